//! Non-intrusive extraction of quadratic/cubic force tensors from
//! nonlinear-force evaluations.
//!
//! Because the internal force is an exact polynomial, the classical
//! finite-amplitude fitting reduces to algebraically exact polarization
//! identities on the even/odd force parts:
//!
//! ```text
//! Q(x) = [f(x) + f(-x)] / 2          even (quadratic) part
//! T(x) = [f(x) - f(-x)] / 2          odd (cubic) part
//! G(v,w)   = [Q(v+w) - Q(v) - Q(w)] / 2
//! H(u,v,w) = [T(u+v+w) - T(u+v) - T(v+w) - T(u+w) + T(u) + T(v) + T(w)] / 6
//! ```
//!
//! The amplitude parameter of the classical scheme is therefore fixed to 1 in
//! units of the M-normalized mode; the finite-amplitude variant is kept
//! behind [`StepScheme::ClassicalLambda`] for parity with the usual
//! formulation, and must return identical tensors on polynomial forces.

use std::collections::BTreeMap;

use nalgebra::{DVector, DVectorView};

use crate::eigen::Spectrum;
use crate::error::{Error, Result};
use crate::model::StructuralModel;

/// Amplitude scheme for the prescribed-displacement evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepScheme {
    /// Polarization at unit amplitude (default; exact for polynomial forces).
    Polarization,
    /// Classical scheme at prescribed amplitude `lambda`: identical algebra
    /// applied to `lambda`-scaled displacements, rescaled by `lambda^2` or
    /// `lambda^3`.
    ClassicalLambda(f64),
}

impl StepScheme {
    fn lambda(&self) -> f64 {
        match self {
            StepScheme::Polarization => 1.0,
            StepScheme::ClassicalLambda(l) => *l,
        }
    }
}

fn even_odd(model: &StructuralModel, x: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let fp = model.nonlinear_force(x)?;
    let fm = model.nonlinear_force(&(-x))?;
    Ok((0.5 * (&fp + &fm), 0.5 * (&fp - &fm)))
}

/// Symmetric bilinear form `G(v, w)`; the arguments need not be eigenvectors.
pub fn quadratic_force(
    model: &StructuralModel,
    v: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    quadratic_force_with(model, v, w, StepScheme::Polarization)
}

pub fn quadratic_force_with(
    model: &StructuralModel,
    v: &DVector<f64>,
    w: &DVector<f64>,
    scheme: StepScheme,
) -> Result<DVector<f64>> {
    let l = scheme.lambda();
    if !(l > 0.0) {
        return Err(Error::Config(format!("STEP amplitude must be > 0, got {l}")));
    }
    let (qvw, _) = even_odd(model, &((v + w) * l))?;
    let (qv, _) = even_odd(model, &(v * l))?;
    let (qw, _) = even_odd(model, &(w * l))?;
    // Grouping keeps the bilinear form exactly symmetric in (v, w).
    Ok((qvw - (qv + qw)) * (0.5 / (l * l)))
}

/// Symmetric trilinear form `H(u, v, w)`.
pub fn cubic_force(
    model: &StructuralModel,
    u: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    cubic_force_with(model, u, v, w, StepScheme::Polarization)
}

pub fn cubic_force_with(
    model: &StructuralModel,
    u: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
    scheme: StepScheme,
) -> Result<DVector<f64>> {
    let l = scheme.lambda();
    if !(l > 0.0) {
        return Err(Error::Config(format!("STEP amplitude must be > 0, got {l}")));
    }
    let t = |x: &DVector<f64>| -> Result<DVector<f64>> { Ok(even_odd(model, &(x * l))?.1) };
    let sum = t(&(u + v + w))? - t(&(u + v))? - t(&(v + w))? - t(&(u + w))?
        + t(u)?
        + t(v)?
        + t(w)?;
    Ok(sum / (6.0 * l * l * l))
}

/// Master-mode force tensors `G(phi_i, phi_j)` for `i <= j` and
/// `H(phi_i, phi_j, phi_k)` for `i <= j <= k`, with symmetric completion on
/// query. Indices are positions into the `masters` list.
#[derive(Debug, Clone)]
pub struct StepTensors {
    /// Global mode indices of the masters.
    pub masters: Vec<usize>,
    g: BTreeMap<(usize, usize), DVector<f64>>,
    h: BTreeMap<(usize, usize, usize), DVector<f64>>,
    /// Count of `nonlinear_force` evaluations spent building the tables.
    pub evaluations: u64,
}

impl StepTensors {
    pub fn n_masters(&self) -> usize {
        self.masters.len()
    }

    /// `G(phi_i, phi_j)` by master positions, any index order.
    pub fn g(&self, i: usize, j: usize) -> &DVector<f64> {
        let key = (i.min(j), i.max(j));
        &self.g[&key]
    }

    /// `H(phi_i, phi_j, phi_k)` by master positions, any index order.
    pub fn h(&self, i: usize, j: usize, k: usize) -> &DVector<f64> {
        let mut key = [i, j, k];
        key.sort_unstable();
        &self.h[&(key[0], key[1], key[2])]
    }

    /// Closed-form evaluation count: one (f(x), f(-x)) pair per distinct
    /// index multiset of size 1, 2, 3, i.e.
    /// `2 * (n + n(n+1)/2 + n(n+1)(n+2)/6)`.
    pub fn expected_evaluations(n: usize) -> u64 {
        let n = n as u64;
        2 * (n + n * (n + 1) / 2 + n * (n + 1) * (n + 2) / 6)
    }
}

/// Runs the extraction over the master modes of `spectrum`.
pub fn step_tensors(
    model: &StructuralModel,
    spectrum: &Spectrum,
    masters: &[usize],
) -> Result<StepTensors> {
    step_tensors_with(model, spectrum, masters, StepScheme::Polarization)
}

pub fn step_tensors_with(
    model: &StructuralModel,
    spectrum: &Spectrum,
    masters: &[usize],
    scheme: StepScheme,
) -> Result<StepTensors> {
    for &m in masters {
        if m >= spectrum.n_computed() {
            return Err(Error::Validation(format!(
                "master mode {m} is outside the {} computed modes",
                spectrum.n_computed()
            )));
        }
    }
    let l = scheme.lambda();
    if !(l > 0.0) {
        return Err(Error::Config(format!("STEP amplitude must be > 0, got {l}")));
    }
    let n = masters.len();
    let phi = |i: usize| -> DVectorView<'_, f64> { spectrum.phi(masters[i]) };

    let before = model.evaluations();
    // One even/odd pair per distinct multiset of master positions.
    let mut cache: BTreeMap<Vec<usize>, (DVector<f64>, DVector<f64>)> = BTreeMap::new();
    {
        let mut insert = |key: Vec<usize>| -> Result<()> {
            if cache.contains_key(&key) {
                return Ok(());
            }
            let mut x = DVector::zeros(model.n_dof);
            for &p in &key {
                x += phi(p) * l;
            }
            let eo = even_odd(model, &x)?;
            cache.insert(key, eo);
            Ok(())
        };
        for i in 0..n {
            insert(vec![i])?;
            for j in i..n {
                insert(vec![i, j])?;
                for k in j..n {
                    insert(vec![i, j, k])?;
                }
            }
        }
    }
    let evaluations = model.evaluations() - before;

    let even = |key: &[usize]| -> &DVector<f64> { &cache[key].0 };
    let odd = |key: &[usize]| -> &DVector<f64> { &cache[key].1 };

    let mut g = BTreeMap::new();
    let mut h = BTreeMap::new();
    let l2 = l * l;
    let l3 = l2 * l;
    for i in 0..n {
        for j in i..n {
            let v = (even(&[i, j]) - even(&[i]) - even(&[j])) * (0.5 / l2);
            g.insert((i, j), v);
            for k in j..n {
                let v = (odd(&[i, j, k]) - odd(&[i, j]) - odd(&[j, k]) - odd(&[i, k])
                    + odd(&[i])
                    + odd(&[j])
                    + odd(&[k]))
                    / (6.0 * l3);
                h.insert((i, j, k), v);
            }
        }
    }

    Ok(StepTensors { masters: masters.to_vec(), g, h, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::solve_modes;
    use crate::model::beam::{assemble_vk_beam, BeamConfig};
    use crate::model::file::parse_polynomial_model;
    use crate::model::polynomial::{CubicEntry, PolynomialForce, QuadEntry};
    use crate::model::{DofKind, DofLabel, NonlinearForce, StructuralModel};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_poly_model(rng: &mut impl Rng, n: usize) -> StructuralModel {
        let mut quad = Vec::new();
        let mut cubic = Vec::new();
        for p in 0..n {
            for r in 0..n {
                for s in r..n {
                    if rng.random_bool(0.6) {
                        quad.push(QuadEntry { p, r, s, value: rng.random_range(-1.0..1.0) });
                    }
                    for t in s..n {
                        if rng.random_bool(0.4) {
                            cubic.push(CubicEntry {
                                p,
                                r,
                                s,
                                t,
                                value: rng.random_range(-1.0..1.0),
                            });
                        }
                    }
                }
            }
        }
        let force = PolynomialForce::new(n, quad, cubic).unwrap();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = 1.0 + i as f64;
        }
        StructuralModel::new(
            DMatrix::identity(n, n),
            k,
            NonlinearForce::Polynomial(force),
            vec![],
            (0..n).map(|i| DofLabel { node: i, kind: DofKind::Generic }).collect(),
        )
        .unwrap()
    }

    fn dense_g_contract(g: &[f64], n: usize, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(n);
        for p in 0..n {
            for r in 0..n {
                for s in 0..n {
                    out[p] += g[(p * n + r) * n + s] * v[r] * w[s];
                }
            }
        }
        out
    }

    fn dense_h_contract(
        h: &[f64],
        n: usize,
        u: &DVector<f64>,
        v: &DVector<f64>,
        w: &DVector<f64>,
    ) -> DVector<f64> {
        let mut out = DVector::zeros(n);
        for p in 0..n {
            for r in 0..n {
                for s in 0..n {
                    for t in 0..n {
                        out[p] += h[((p * n + r) * n + s) * n + t] * u[r] * v[s] * w[t];
                    }
                }
            }
        }
        out
    }

    #[test]
    fn quadratic_polarization_matches_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 5;
        let model = random_poly_model(&mut rng, n);
        let crate::model::NonlinearForce::Polynomial(p) = &model.force else { unreachable!() };
        let g = p.dense_quadratic();
        let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let w = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let direct = dense_g_contract(&g, n, &v, &w);
        let polar = quadratic_force(&model, &v, &w).unwrap();
        assert_relative_eq!(polar, direct, max_relative = 1e-11);
        // G(v, 0) = 0 and exact symmetry of the form.
        let zero = DVector::zeros(n);
        assert_eq!(quadratic_force(&model, &v, &zero).unwrap(), zero);
        assert_eq!(
            quadratic_force(&model, &v, &w).unwrap(),
            quadratic_force(&model, &w, &v).unwrap()
        );
    }

    #[test]
    fn cubic_polarization_matches_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 4;
        let model = random_poly_model(&mut rng, n);
        let crate::model::NonlinearForce::Polynomial(p) = &model.force else { unreachable!() };
        let h = p.dense_cubic();
        let u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let w = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let direct = dense_h_contract(&h, n, &u, &v, &w);
        let polar = cubic_force(&model, &u, &v, &w).unwrap();
        assert_relative_eq!(polar, direct, max_relative = 1e-11);
        let zero = DVector::zeros(n);
        let degenerate = cubic_force(&model, &u, &v, &zero).unwrap();
        assert!(degenerate.amax() <= 1e-14 * direct.amax().max(1.0));
        // Permutation invariance of the trilinear form.
        let base = cubic_force(&model, &u, &v, &w).unwrap();
        for (a, b, c) in [(&v, &u, &w), (&w, &v, &u), (&v, &w, &u)] {
            let other = cubic_force(&model, a, b, c).unwrap();
            assert_relative_eq!(base, other, epsilon = 1e-12 * base.amax().max(1e-300));
        }
    }

    #[test]
    fn classical_lambda_scheme_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 4;
        let model = random_poly_model(&mut rng, n);
        let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let w = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let reference = quadratic_force(&model, &v, &w).unwrap();
        for lambda in [0.5, 2.0] {
            let scaled =
                quadratic_force_with(&model, &v, &w, StepScheme::ClassicalLambda(lambda)).unwrap();
            assert_relative_eq!(reference, scaled, max_relative = 1e-10);
        }
    }

    #[test]
    fn tensor_tables_counts_and_content() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let n = 4;
        let model = random_poly_model(&mut rng, n);
        let spectrum = solve_modes(&model, n).unwrap();
        let masters = [0usize, 1];
        model.reset_evaluations();
        let tensors = step_tensors(&model, &spectrum, &masters).unwrap();
        assert_eq!(tensors.evaluations, StepTensors::expected_evaluations(2));
        assert_eq!(tensors.evaluations, 18);
        assert_eq!(tensors.g.len(), 3);
        assert_eq!(tensors.h.len(), 4);
        // Symmetric completion on query.
        assert_eq!(tensors.g(1, 0), tensors.g(0, 1));
        assert_eq!(tensors.h(1, 0, 1), tensors.h(0, 1, 1));
        // Tables match the generic polarization entry by entry.
        let p0 = spectrum.phi(0).clone_owned();
        let p1 = spectrum.phi(1).clone_owned();
        let g01 = quadratic_force(&model, &p0, &p1).unwrap();
        assert_relative_eq!(tensors.g(0, 1), &g01, max_relative = 1e-11);
        let h011 = cubic_force(&model, &p0, &p1, &p1).unwrap();
        assert_relative_eq!(tensors.h(0, 1, 1), &h011, max_relative = 1e-11);
    }

    #[test]
    fn linear_model_gives_zero_tables() {
        let model = parse_polynomial_model(
            "[dimensions]\n2\n[mass]\n0 0 1\n1 1 1\n[stiffness]\n0 0 1\n1 1 4\n",
        )
        .unwrap();
        let spectrum = solve_modes(&model, 2).unwrap();
        let tensors = step_tensors(&model, &spectrum, &[0, 1]).unwrap();
        for ((_, _), v) in tensors.g.iter() {
            assert_eq!(v.amax(), 0.0);
        }
        for (_, v) in tensors.h.iter() {
            assert_eq!(v.amax(), 0.0);
        }
    }

    /// On the flat beam, G(phi_1, phi_1) must live on the axial dofs only.
    #[test]
    fn beam_g11_is_axial() {
        let model = assemble_vk_beam(&BeamConfig::reference(12)).unwrap();
        let spectrum = solve_modes(&model, 3).unwrap();
        let tensors = step_tensors(&model, &spectrum, &[0]).unwrap();
        let g11 = tensors.g(0, 0);
        let axial = model.dofs_of_kind(DofKind::Axial);
        let axial_norm: f64 = axial.iter().map(|&i| g11[i] * g11[i]).sum::<f64>().sqrt();
        let total = g11.norm();
        assert!(axial_norm > 0.999 * total, "axial fraction {}", axial_norm / total);
    }

    /// Round-trip: tensors extracted over the full basis reconstruct the
    /// nonlinear force exactly up to round-off.
    #[test]
    fn extraction_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 5;
        let model = random_poly_model(&mut rng, n);
        let spectrum = solve_modes(&model, n).unwrap();
        let masters: Vec<usize> = (0..n).collect();
        let tensors = step_tensors(&model, &spectrum, &masters).unwrap();
        // Modal coordinates of X: q = Phi^T M X (mass-normalized basis).
        for _ in 0..20 {
            let x = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
            let q = spectrum.phis.transpose() * &model.mass * &x;
            let mut rebuilt = DVector::zeros(n);
            for i in 0..n {
                for j in 0..n {
                    rebuilt += tensors.g(i, j) * (q[i] * q[j]);
                    for k in 0..n {
                        rebuilt += tensors.h(i, j, k) * (q[i] * q[j] * q[k]);
                    }
                }
            }
            let direct = model.nonlinear_force(&x).unwrap();
            assert_relative_eq!(rebuilt, direct, max_relative = 1e-9);
        }
    }
}
