//! Shifted linear solves `(sigma^2 M - K) Z = rhs`, plain or bordered.
//!
//! When the shift collides with an eigenfrequency the plain system is
//! singular (the small-denominator problem); the flagged variant augments
//! the matrix with border columns `M phi_s` and rows `(M phi_s)^T`, which
//! pins `phi_s^T M Z = 0` and returns the uncancellable force projection
//! `P^s` as the extra solution component.
//!
//! Factorizations are cached by quantized `sigma^2` and border set; the
//! cubic tensor sweep revisits the same handful of shifts many times.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use nalgebra::{DMatrix, DVector, Dyn};

use crate::eigen::Spectrum;
use crate::error::{Error, Result};
use crate::model::StructuralModel;

type Lu = nalgebra::LU<f64, Dyn, Dyn>;

/// Relative residual bound on accepted solutions.
const SOLVE_RESIDUAL: f64 = 1e-9;
/// Mass-orthogonality bound for bordered solutions.
const ORTHO_TOL: f64 = 1e-10;
/// Pivot-ratio floor below which an unflagged system is treated as singular.
const PIVOT_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    sigma2: String,
    resonant: Vec<usize>,
}

pub struct SigmaSolver<'a> {
    pub model: &'a StructuralModel,
    pub spectrum: &'a Spectrum,
    /// Relative resonance-detection threshold used by the precondition check.
    pub tol: f64,
    cache: RefCell<HashMap<CacheKey, Rc<Lu>>>,
    factorizations: RefCell<u64>,
}

impl<'a> SigmaSolver<'a> {
    pub fn new(model: &'a StructuralModel, spectrum: &'a Spectrum, tol: f64) -> Self {
        Self {
            model,
            spectrum,
            tol,
            cache: RefCell::new(HashMap::new()),
            factorizations: RefCell::new(0),
        }
    }

    /// Number of distinct factorizations performed so far.
    pub fn factorizations(&self) -> u64 {
        *self.factorizations.borrow()
    }

    /// Solves the shifted system. `resonant` lists the global modes whose
    /// contributions must be pinned to zero through the bordered system; the
    /// returned scalars are their force projections `P^s`, in the same
    /// order.
    pub fn solve(
        &self,
        sigma: f64,
        rhs: &DVector<f64>,
        resonant: &[usize],
    ) -> Result<(DVector<f64>, Vec<f64>)> {
        let n = self.model.n_dof;
        if rhs.len() != n {
            return Err(Error::Validation(format!(
                "rhs size {} does not match n_dof {n}",
                rhs.len()
            )));
        }
        let sigma2 = sigma * sigma;
        if resonant.is_empty() {
            for (s, ws) in self.spectrum.omegas.iter().enumerate() {
                let ws2 = ws * ws;
                if (sigma2 - ws2).abs() <= self.tol * ws2 {
                    return Err(Error::Numerical(format!(
                        "shift sigma={sigma:.6e} rad/s collides with mode {s} \
                         (omega={ws:.6e}); declare the internal resonance so the \
                         bordered system can be used"
                    )));
                }
            }
        }
        if rhs.amax() == 0.0 {
            return Ok((DVector::zeros(n), vec![0.0; resonant.len()]));
        }
        let mut sorted: Vec<usize> = resonant.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let m = sorted.len();
        let key = CacheKey { sigma2: format!("{sigma2:.12e}"), resonant: sorted.clone() };
        let cached = self.cache.borrow().get(&key).cloned();
        let lu = match cached {
            Some(lu) => lu,
            None => {
                let lu = Rc::new(self.factorize(sigma2, &sorted)?);
                *self.factorizations.borrow_mut() += 1;
                self.cache.borrow_mut().insert(key, Rc::clone(&lu));
                lu
            }
        };

        let mut full_rhs = DVector::zeros(n + m);
        full_rhs.rows_mut(0, n).copy_from(rhs);
        let sol = lu.solve(&full_rhs).ok_or_else(|| {
            Error::Numerical(format!("singular shifted system at sigma={sigma:.6e}"))
        })?;
        let z = sol.rows(0, n).clone_owned();
        let residuals: Vec<f64> = (0..m).map(|q| sol[n + q]).collect();

        // Residual acceptance on the augmented system.
        let aug = self.augmented(sigma2, &sorted);
        let res = (&aug * &sol - &full_rhs).norm();
        if res > SOLVE_RESIDUAL * full_rhs.norm() {
            return Err(Error::Numerical(format!(
                "shifted solve at sigma={sigma:.6e} did not converge: relative \
                 residual {:.3e}",
                res / full_rhs.norm()
            )));
        }
        // Bordered solutions must live in the M-orthogonal complement of the
        // flagged modes.
        if m > 0 {
            let zm = self.model.m_norm(&z);
            for (&s, &p) in sorted.iter().zip(residuals.iter()) {
                let phi = self.spectrum.phi(s).clone_owned();
                let ortho = self.model.m_inner(&phi, &z).abs();
                if zm > 0.0 && ortho > ORTHO_TOL * zm {
                    return Err(Error::Numerical(format!(
                        "bordered solve at sigma={sigma:.6e}: mode-{s} content \
                         {ortho:.3e} exceeds {ORTHO_TOL:.0e} x ||Z||_M"
                    )));
                }
                let _ = p;
            }
        }
        Ok((z, residuals))
    }

    fn augmented(&self, sigma2: f64, resonant: &[usize]) -> DMatrix<f64> {
        let n = self.model.n_dof;
        let m = resonant.len();
        let mut d = DMatrix::zeros(n + m, n + m);
        d.view_mut((0, 0), (n, n))
            .copy_from(&(&self.model.mass * sigma2 - &self.model.stiffness));
        for (q, &s) in resonant.iter().enumerate() {
            let border = &self.model.mass * self.spectrum.phi(s);
            d.view_mut((0, n + q), (n, 1)).copy_from(&border);
            d.view_mut((n + q, 0), (1, n)).copy_from(&border.transpose());
        }
        d
    }

    fn factorize(&self, sigma2: f64, resonant: &[usize]) -> Result<Lu> {
        let aug = self.augmented(sigma2, resonant);
        let lu = aug.lu();
        let diag = lu.u().diagonal();
        let mut dmin = f64::INFINITY;
        let mut dmax: f64 = 0.0;
        for d in diag.iter() {
            dmin = dmin.min(d.abs());
            dmax = dmax.max(d.abs());
        }
        if dmin <= PIVOT_FLOOR * dmax {
            return Err(Error::Numerical(format!(
                "shifted system at sigma^2={sigma2:.6e} is numerically singular \
                 (pivot ratio {:.3e}); an internal resonance is likely unflagged: \
                 declare it so the bordered system can be used",
                dmin / dmax
            )));
        }
        Ok(lu)
    }
}
