//! Generalized symmetric eigensolver producing a mass-normalized,
//! sign-deterministic [`Spectrum`].
//!
//! Desk scale permits the dense reduction path (Cholesky of M, symmetric
//! eigendecomposition of `L^-1 K L^-T`) for n_dof up to a few thousand; a
//! shift-invert iterative path is the documented extension point for larger
//! models.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};
use crate::model::StructuralModel;

/// Relative eigenvalue gap below which modes are treated as a cluster and
/// re-orthogonalized in the M inner product.
const CLUSTER_GAP: f64 = 1e-8;

/// Mass-normalized eigenpairs, ascending in frequency.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Angular eigenfrequencies (rad/s), ascending.
    pub omegas: Vec<f64>,
    /// Eigenvectors by column, `phi_i^T M phi_j = delta_ij`.
    pub phis: DMatrix<f64>,
    /// Modes selected as masters (0-based indices into `omegas`).
    pub master_indices: Vec<usize>,
    /// Groups of modes whose eigenvalues were closer than the cluster gap.
    pub clusters: Vec<Vec<usize>>,
}

impl Spectrum {
    pub fn n_computed(&self) -> usize {
        self.omegas.len()
    }

    pub fn phi(&self, i: usize) -> DVectorView<'_, f64> {
        self.phis.column(i)
    }

    pub fn omega(&self, i: usize) -> f64 {
        self.omegas[i]
    }

    /// Returns a copy with the given master set, validated against the
    /// computed modes.
    pub fn with_masters(&self, masters: &[usize]) -> Result<Spectrum> {
        let mut seen = std::collections::BTreeSet::new();
        for &m in masters {
            if m >= self.n_computed() {
                return Err(Error::Validation(format!(
                    "master mode {m} is outside the {} computed modes",
                    self.n_computed()
                )));
            }
            if !seen.insert(m) {
                return Err(Error::Validation(format!("master mode {m} listed twice")));
            }
        }
        let mut s = self.clone();
        s.master_indices = masters.to_vec();
        Ok(s)
    }

    /// Frequencies in Hz.
    pub fn frequencies_hz(&self) -> Vec<f64> {
        self.omegas.iter().map(|w| w / std::f64::consts::TAU).collect()
    }
}

/// Solves `K phi = w^2 M phi` for the `n_modes` lowest modes.
pub fn solve_modes(model: &StructuralModel, n_modes: usize) -> Result<Spectrum> {
    if n_modes == 0 || n_modes > model.n_dof {
        return Err(Error::Validation(format!(
            "n_modes must be in 1..={}, got {n_modes}",
            model.n_dof
        )));
    }
    let chol = model
        .mass
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    // A = L^-1 K L^-T, symmetrized against round-off.
    let y = l.solve_lower_triangular(&model.stiffness).ok_or_else(|| {
        Error::Numerical("singular Cholesky factor of the mass matrix".into())
    })?;
    let a = l
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| Error::Numerical("singular Cholesky factor of the mass matrix".into()))?;
    let a = (&a + a.transpose()) * 0.5;

    let eig = a.symmetric_eigen();
    let mut order: Vec<usize> = (0..model.n_dof).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let mut omegas = Vec::with_capacity(n_modes);
    let mut phis = DMatrix::zeros(model.n_dof, n_modes);
    for (col, &idx) in order.iter().take(n_modes).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if lambda <= 0.0 {
            return Err(Error::Numerical(format!(
                "stiffness matrix is not positive definite on the free dofs \
                 (eigenvalue {lambda:.3e} in mode {col})"
            )));
        }
        omegas.push(lambda.sqrt());
        let y = eig.eigenvectors.column(idx);
        // phi = L^-T y keeps the mass normalization.
        let phi = l
            .transpose()
            .solve_upper_triangular(&DVector::from_column_slice(y.as_slice()))
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        phis.set_column(col, &phi);
    }

    let clusters = find_clusters(&omegas);
    for cluster in &clusters {
        reorthogonalize(&mut phis, &model.mass, cluster);
    }
    for c in 0..n_modes {
        let mut col = phis.column_mut(c);
        let sign = sign_of(col.as_slice());
        if sign < 0.0 {
            col.neg_mut();
        }
    }

    Ok(Spectrum { omegas, phis, master_indices: Vec::new(), clusters })
}

/// Deterministic sign: the largest-magnitude entry (lowest index on ties)
/// must be positive.
fn sign_of(v: &[f64]) -> f64 {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn find_clusters(omegas: &[f64]) -> Vec<Vec<usize>> {
    let mut clusters = Vec::new();
    let mut current = vec![0usize];
    for i in 1..omegas.len() {
        let a = omegas[i - 1] * omegas[i - 1];
        let b = omegas[i] * omegas[i];
        if (b - a).abs() <= CLUSTER_GAP * b.abs().max(a.abs()) {
            current.push(i);
        } else {
            if current.len() > 1 {
                clusters.push(current.clone());
            }
            current = vec![i];
        }
    }
    if current.len() > 1 {
        clusters.push(current);
    }
    clusters
}

/// Modified Gram-Schmidt in the M inner product within one cluster.
fn reorthogonalize(phis: &mut DMatrix<f64>, mass: &DMatrix<f64>, cluster: &[usize]) {
    for (pos, &i) in cluster.iter().enumerate() {
        let mut v = phis.column(i).clone_owned();
        for &j in &cluster[..pos] {
            let pj = phis.column(j).clone_owned();
            let proj = (pj.transpose() * mass * &v)[(0, 0)];
            v -= &pj * proj;
        }
        let norm = ((v.transpose() * mass * &v)[(0, 0)]).sqrt();
        v /= norm;
        phis.set_column(i, &v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::beam::{assemble_vk_beam, BeamConfig};
    use crate::model::file::parse_polynomial_model;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_case() {
        let model = parse_polynomial_model(
            "[dimensions]\n1\n[mass]\n0 0 1.0\n[stiffness]\n0 0 4.0\n",
        )
        .unwrap();
        let s = solve_modes(&model, 1).unwrap();
        assert_relative_eq!(s.omegas[0], 2.0, max_relative = 1e-14);
        assert_relative_eq!(s.phis[(0, 0)], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn beam_matches_reference_frequencies() {
        let model = assemble_vk_beam(&BeamConfig::reference(20)).unwrap();
        let s = solve_modes(&model, 3).unwrap();
        let hz = s.frequencies_hz();
        for (f, reference) in hz.iter().zip([50.900, 140.74, 277.09]) {
            assert!(
                (f - reference).abs() / reference < 0.03,
                "frequency {f} Hz vs reference {reference} Hz"
            );
        }
        // Clamped-clamped Euler-Bernoulli ratio from the characteristic roots
        // beta_i L = 4.7300, 7.8532, 10.9956: w3/w1 = (10.9956/4.7300)^2.
        let analytic = (10.9956f64 / 4.7300).powi(2);
        assert!((s.omegas[2] / s.omegas[0] - analytic).abs() / analytic < 0.02);
    }

    #[test]
    fn orthonormality_and_residual_invariants() {
        let model = assemble_vk_beam(&BeamConfig::reference(12)).unwrap();
        let s = solve_modes(&model, 6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let v = (s.phi(i).transpose() * &model.mass * s.phi(j))[(0, 0)];
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((v - expected).abs() < 1e-10, "M-orthonormality ({i},{j}): {v}");
            }
            let kphi = &model.stiffness * s.phi(i);
            let w2 = s.omegas[i] * s.omegas[i];
            let res = (&kphi - &model.mass * s.phi(i) * w2).norm();
            assert!(res <= 1e-8 * kphi.norm());
            let rayleigh = (s.phi(i).transpose() * &kphi)[(0, 0)];
            assert_relative_eq!(rayleigh, w2, max_relative = 1e-8);
        }
    }

    /// Independent route: eigenvalues of the nonsymmetric M^-1 K via a Schur
    /// decomposition must match the Cholesky-symmetric path.
    #[test]
    fn random_pair_matches_schur_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let n = 6;
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let m = &a * a.transpose() + DMatrix::identity(n, n) * (n as f64);
            let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let k = &b * b.transpose() + DMatrix::identity(n, n) * (2.0 * n as f64);
            let text_free_model = crate::model::StructuralModel::new(
                m.clone(),
                k.clone(),
                crate::model::NonlinearForce::Polynomial(
                    crate::model::polynomial::PolynomialForce::new(n, vec![], vec![]).unwrap(),
                ),
                vec![],
                (0..n)
                    .map(|i| crate::model::DofLabel {
                        node: i,
                        kind: crate::model::DofKind::Generic,
                    })
                    .collect(),
            )
            .unwrap();
            let s = solve_modes(&text_free_model, n).unwrap();
            let minv_k = m.clone().lu().solve(&k).unwrap();
            let mut lambdas: Vec<f64> = minv_k
                .schur()
                .eigenvalues()
                .expect("real spectrum for an SPD pencil")
                .iter()
                .copied()
                .collect();
            lambdas.sort_by(f64::total_cmp);
            for (i, l) in lambdas.iter().enumerate() {
                assert_relative_eq!(s.omegas[i] * s.omegas[i], *l, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn signs_are_deterministic() {
        let model = assemble_vk_beam(&BeamConfig::reference(10)).unwrap();
        let a = solve_modes(&model, 4).unwrap();
        let b = solve_modes(&model, 4).unwrap();
        assert_eq!(a.phis, b.phis);
    }

    #[test]
    fn n_modes_bounds_checked() {
        let model = assemble_vk_beam(&BeamConfig::reference(6)).unwrap();
        assert!(solve_modes(&model, model.n_dof + 1).is_err());
        assert!(solve_modes(&model, 0).is_err());
    }
}
