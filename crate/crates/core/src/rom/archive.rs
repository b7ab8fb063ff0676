//! Text archive for assembled reduced-order models.
//!
//! Sections mirror the model file format: bracketed headers, whitespace
//! separated values, `#` comments, SI units. Monomial rows carry the
//! equation index, the R exponents, the S exponents and the coefficient.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rom::{
    ConservativeVariant, DampingVariant, Monomial, RomForcing, RomModel, RomVariant,
};

pub fn format_rom(rom: &RomModel) -> String {
    let n = rom.n_masters();
    let mut out = String::new();
    let _ = writeln!(out, "# reduced-order model ({}), SI units", rom.variant.label());
    let _ = writeln!(out, "[masters]  # global mode indices");
    let _ = writeln!(
        out,
        "{}",
        rom.masters.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(" ")
    );
    let _ = writeln!(out, "[omegas]  # rad/s");
    for w in &rom.omegas {
        let _ = writeln!(out, "{w:.17e}");
    }
    let _ = writeln!(out, "[damping]  # linear coefficient per mode (1/s)");
    for z in &rom.linear_damping {
        let _ = writeln!(out, "{z:.17e}");
    }
    if let Some(f) = &rom.forcing {
        let _ = writeln!(out, "[forcing]  # modal amplitude per mode, then frequency (rad/s)");
        for a in &f.amplitude {
            let _ = writeln!(out, "{a:.17e}");
        }
        let _ = writeln!(out, "{:.17e}", f.omega);
    }
    let _ = writeln!(out, "[monomials]  # eq  {n} R-exponents  {n} S-exponents  coefficient");
    for m in &rom.monomials {
        let re: Vec<String> = m.r_exp.iter().map(|e| e.to_string()).collect();
        let se: Vec<String> = m.s_exp.iter().map(|e| e.to_string()).collect();
        let _ = writeln!(out, "{} {} {} {:.17e}", m.eq, re.join(" "), se.join(" "), m.coeff);
    }
    out
}

/// Pretty printer: one oscillator equation per line, normal coordinates
/// named R1..Rn.
pub fn format_equations(rom: &RomModel) -> String {
    let n = rom.n_masters();
    let mut out = String::new();
    for r in 0..n {
        let mut line = format!("R{}'' ", r + 1);
        if rom.linear_damping[r] != 0.0 {
            line += &format!("+ {:.6e} R{}' ", rom.linear_damping[r], r + 1);
        }
        line += &format!("+ {:.6e} R{}", rom.omegas[r] * rom.omegas[r], r + 1);
        for m in rom.monomials.iter().filter(|m| m.eq == r) {
            let mut term = String::new();
            for (i, &e) in m.r_exp.iter().enumerate() {
                for _ in 0..e {
                    term += &format!(" R{}", i + 1);
                }
            }
            for (i, &e) in m.s_exp.iter().enumerate() {
                for _ in 0..e {
                    term += &format!(" R{}'", i + 1);
                }
            }
            let sign = if m.coeff >= 0.0 { "+" } else { "-" };
            line += &format!(" {sign} {:.6e}{term}", m.coeff.abs());
        }
        match &rom.forcing {
            Some(f) if f.amplitude[r] != 0.0 => {
                line += &format!(" = {:.6e} cos(W t)", f.amplitude[r]);
            }
            _ => line += " = 0",
        }
        out += &line;
        out.push('\n');
    }
    out
}

pub fn parse_rom(text: &str) -> Result<RomModel> {
    let mut section = String::new();
    let mut masters: Vec<usize> = Vec::new();
    let mut omegas: Vec<f64> = Vec::new();
    let mut damping: Vec<f64> = Vec::new();
    let mut forcing_values: Vec<f64> = Vec::new();
    let mut monomials: Vec<Monomial> = Vec::new();
    let mut saw_forcing = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            section = line[1..line.len() - 1].to_ascii_lowercase();
            if section == "forcing" {
                saw_forcing = true;
            }
            continue;
        }
        let bad = |what: &str| {
            Error::Validation(format!("line {}: cannot parse {what}: '{line}'", lineno + 1))
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        match section.as_str() {
            "masters" => {
                for f in &fields {
                    masters.push(f.parse().map_err(|_| bad("master index"))?);
                }
            }
            "omegas" => omegas.push(fields[0].parse().map_err(|_| bad("omega"))?),
            "damping" => damping.push(fields[0].parse().map_err(|_| bad("damping"))?),
            "forcing" => forcing_values.push(fields[0].parse().map_err(|_| bad("forcing"))?),
            "monomials" => {
                let n = masters.len();
                if fields.len() != 2 * n + 2 {
                    return Err(bad("monomial row"));
                }
                let eq: usize = fields[0].parse().map_err(|_| bad("equation index"))?;
                let mut r_exp = vec![0u8; n];
                let mut s_exp = vec![0u8; n];
                for i in 0..n {
                    r_exp[i] = fields[1 + i].parse().map_err(|_| bad("R exponent"))?;
                    s_exp[i] = fields[1 + n + i].parse().map_err(|_| bad("S exponent"))?;
                }
                let coeff: f64 = fields[1 + 2 * n].parse().map_err(|_| bad("coefficient"))?;
                monomials.push(Monomial { eq, r_exp, s_exp, coeff });
            }
            "" => return Err(Error::Validation("data before any section header".into())),
            other => return Err(Error::Validation(format!("unknown section '[{other}]'"))),
        }
    }
    let n = masters.len();
    if n == 0 || omegas.len() != n || damping.len() != n {
        return Err(Error::Validation(
            "ROM archive must declare matching [masters], [omegas], [damping]".into(),
        ));
    }
    let forcing = if saw_forcing {
        if forcing_values.len() != n + 1 {
            return Err(Error::Validation(format!(
                "[forcing] needs {n} amplitudes plus a frequency"
            )));
        }
        let omega = forcing_values[n];
        Some(RomForcing { amplitude: forcing_values[..n].to_vec(), omega })
    } else {
        None
    };
    Ok(RomModel {
        masters,
        omegas,
        linear_damping: damping,
        monomials,
        variant: RomVariant {
            conservative: ConservativeVariant::O2Full,
            damping: DampingVariant::None,
        },
        forcing,
    })
}

pub fn load_rom(path: &Path) -> Result<RomModel> {
    parse_rom(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn archive_round_trip() {
        let rom = RomModel {
            masters: vec![0, 2],
            omegas: vec![3.2e2, 1.74e3],
            linear_damping: vec![0.0, 1.2e-2],
            monomials: vec![
                Monomial { eq: 0, r_exp: vec![3, 0], s_exp: vec![0, 0], coeff: 1.25e8 },
                Monomial { eq: 1, r_exp: vec![1, 0], s_exp: vec![0, 2], coeff: -7.5e-1 },
            ],
            variant: RomVariant::o2(DampingVariant::LinearOnly),
            forcing: Some(RomForcing { amplitude: vec![0.3, 0.0], omega: 310.0 }),
        };
        let text = format_rom(&rom);
        let again = parse_rom(&text).unwrap();
        assert_eq!(again.masters, rom.masters);
        assert_eq!(again.omegas, rom.omegas);
        assert_eq!(again.linear_damping, rom.linear_damping);
        assert_eq!(again.monomials, rom.monomials);
        assert_eq!(again.forcing, rom.forcing);
    }

    #[test]
    fn equation_dump_shows_monomials() {
        let rom = RomModel {
            masters: vec![0],
            omegas: vec![2.0],
            linear_damping: vec![0.0],
            monomials: vec![Monomial {
                eq: 0,
                r_exp: vec![3],
                s_exp: vec![0],
                coeff: 0.5,
            }],
            variant: RomVariant::o3(),
            forcing: None,
        };
        let dump = format_equations(&rom);
        assert!(dump.contains("R1'' "));
        assert!(dump.contains("R1 R1 R1"));
    }
}
