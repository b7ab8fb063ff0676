//! Coordinate text format for explicit polynomial oscillator models.
//!
//! Sections are introduced by a bracketed header; values are whitespace
//! separated, `#` starts a comment, indices are 0-based, units are SI
//! (kg, N/m, N/m^2, N/m^3).
//!
//! ```text
//! [dimensions]
//! n_dof
//! [mass]        # row col value
//! [stiffness]   # row col value
//! [quadratic]   # p r s value      (r <= s)
//! [cubic]       # p r s t value    (r <= s <= t)
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::polynomial::{CubicEntry, PolynomialForce, QuadEntry};
use crate::model::{DofKind, DofLabel, NonlinearForce, StructuralModel};

#[derive(Debug, Default)]
struct RawModel {
    n: Option<usize>,
    mass: Vec<(usize, usize, f64)>,
    stiffness: Vec<(usize, usize, f64)>,
    quadratic: Vec<QuadEntry>,
    cubic: Vec<CubicEntry>,
}

/// Parses the coordinate text format from a string.
pub fn parse_polynomial_model(text: &str) -> Result<StructuralModel> {
    let mut raw = RawModel::default();
    let mut section = String::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(Error::Validation(format!(
                    "line {}: malformed section header '{line}'",
                    lineno + 1
                )));
            }
            section = line[1..line.len() - 1].trim().to_ascii_lowercase();
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |what: &str| {
            Error::Validation(format!("line {}: cannot parse {what}: '{line}'", lineno + 1))
        };
        match section.as_str() {
            "dimensions" => {
                raw.n = Some(fields[0].parse().map_err(|_| bad("dimension"))?);
            }
            "mass" | "stiffness" => {
                if fields.len() != 3 {
                    return Err(bad("matrix triplet (row col value)"));
                }
                let r: usize = fields[0].parse().map_err(|_| bad("row index"))?;
                let c: usize = fields[1].parse().map_err(|_| bad("col index"))?;
                let v: f64 = fields[2].parse().map_err(|_| bad("value"))?;
                if section == "mass" {
                    raw.mass.push((r, c, v));
                } else {
                    raw.stiffness.push((r, c, v));
                }
            }
            "quadratic" => {
                if fields.len() != 4 {
                    return Err(bad("quadratic entry (p r s value)"));
                }
                raw.quadratic.push(QuadEntry {
                    p: fields[0].parse().map_err(|_| bad("p"))?,
                    r: fields[1].parse().map_err(|_| bad("r"))?,
                    s: fields[2].parse().map_err(|_| bad("s"))?,
                    value: fields[3].parse().map_err(|_| bad("value"))?,
                });
            }
            "cubic" => {
                if fields.len() != 5 {
                    return Err(bad("cubic entry (p r s t value)"));
                }
                raw.cubic.push(CubicEntry {
                    p: fields[0].parse().map_err(|_| bad("p"))?,
                    r: fields[1].parse().map_err(|_| bad("r"))?,
                    s: fields[2].parse().map_err(|_| bad("s"))?,
                    t: fields[3].parse().map_err(|_| bad("t"))?,
                    value: fields[4].parse().map_err(|_| bad("value"))?,
                });
            }
            "" => {
                return Err(Error::Validation(format!(
                    "line {}: data before any section header",
                    lineno + 1
                )));
            }
            other => {
                return Err(Error::Validation(format!("unknown section '[{other}]'")));
            }
        }
    }

    let n = raw
        .n
        .ok_or_else(|| Error::Validation("missing [dimensions] section".into()))?;
    if n == 0 {
        return Err(Error::Validation("model dimension must be positive".into()));
    }
    let mass = assemble_symmetric(n, &raw.mass, "mass")?;
    let stiffness = assemble_symmetric(n, &raw.stiffness, "stiffness")?;
    let force = PolynomialForce::new(n, raw.quadratic, raw.cubic)?;
    let labels = (0..n)
        .map(|i| DofLabel { node: i, kind: DofKind::Generic })
        .collect();
    StructuralModel::new(mass, stiffness, NonlinearForce::Polynomial(force), vec![], labels)
}

/// Loads a model from a file path.
pub fn load_polynomial_model(path: &Path) -> Result<StructuralModel> {
    let text = std::fs::read_to_string(path)?;
    parse_polynomial_model(&text)
}

/// Assembles a symmetric matrix from triplets. One-sided off-diagonal
/// entries are mirrored; doubly declared entries must agree to 1e-12
/// relative.
fn assemble_symmetric(n: usize, triplets: &[(usize, usize, f64)], name: &str) -> Result<DMatrix<f64>> {
    let mut declared: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(r, c, v) in triplets {
        if r >= n || c >= n {
            return Err(Error::Validation(format!(
                "{name} entry ({r},{c}) out of range for n={n}"
            )));
        }
        *declared.entry((r, c)).or_insert(0.0) += v;
    }
    let mut m = DMatrix::zeros(n, n);
    let scale = declared.values().fold(0.0f64, |a, v| a.max(v.abs()));
    for (&(r, c), &v) in &declared {
        if r == c {
            m[(r, c)] = v;
            continue;
        }
        match declared.get(&(c, r)) {
            Some(&w) => {
                if (v - w).abs() > 1e-12 * scale {
                    return Err(Error::Validation(format!(
                        "{name} matrix declared asymmetric at ({r},{c}): {v} vs {w}; \
                         symmetric operators are required"
                    )));
                }
                m[(r, c)] = v;
            }
            None => {
                m[(r, c)] = v;
                m[(c, r)] = v;
            }
        }
    }
    Ok(m)
}

/// Writes a polynomial model back to the coordinate text format.
pub fn format_polynomial_model(model: &StructuralModel) -> Result<String> {
    let NonlinearForce::Polynomial(force) = &model.force else {
        return Err(Error::Validation(
            "only explicit polynomial models can be exported to the coordinate format".into(),
        ));
    };
    let mut out = String::new();
    let _ = writeln!(out, "# polynomial oscillator model, SI units, 0-based indices");
    let _ = writeln!(out, "[dimensions]");
    let _ = writeln!(out, "{}", model.n_dof);
    let _ = writeln!(out, "[mass]  # row col value (kg)");
    write_matrix(&mut out, &model.mass);
    let _ = writeln!(out, "[stiffness]  # row col value (N/m)");
    write_matrix(&mut out, &model.stiffness);
    let _ = writeln!(out, "[quadratic]  # p r s value (N/m^2), r <= s");
    for e in &force.quadratic {
        let _ = writeln!(out, "{} {} {} {:.17e}", e.p, e.r, e.s, e.value);
    }
    let _ = writeln!(out, "[cubic]  # p r s t value (N/m^3), r <= s <= t");
    for e in &force.cubic {
        let _ = writeln!(out, "{} {} {} {} {:.17e}", e.p, e.r, e.s, e.t, e.value);
    }
    Ok(out)
}

fn write_matrix(out: &mut String, m: &DMatrix<f64>) {
    for r in 0..m.nrows() {
        for c in r..m.ncols() {
            if m[(r, c)] != 0.0 {
                let _ = writeln!(out, "{r} {c} {:.17e}", m[(r, c)]);
            }
        }
    }
}
