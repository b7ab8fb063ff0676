//! Explicit polynomial nonlinear force: sparse canonical monomial storage.
//!
//! Coefficients are stored once per monomial with ordered indices (`r <= s`
//! for quadratic, `r <= s <= t` for cubic); the stored value is the full
//! monomial coefficient of `x_r x_s (x_t)` in the given equation. Queries in
//! the full-summation convention distribute each value uniformly over the
//! distinct index permutations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `(p, r, s, value)` with `r <= s`: coefficient of `x_r x_s` in equation `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadEntry {
    pub p: usize,
    pub r: usize,
    pub s: usize,
    pub value: f64,
}

/// `(p, r, s, t, value)` with `r <= s <= t`: coefficient of `x_r x_s x_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicEntry {
    pub p: usize,
    pub r: usize,
    pub s: usize,
    pub t: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct PolynomialForce {
    pub n: usize,
    pub quadratic: Vec<QuadEntry>,
    pub cubic: Vec<CubicEntry>,
}

impl PolynomialForce {
    /// Validates index ranges, canonical ordering and duplicate entries.
    pub fn new(n: usize, quadratic: Vec<QuadEntry>, cubic: Vec<CubicEntry>) -> Result<Self> {
        let mut seen_q = std::collections::BTreeSet::new();
        for e in &quadratic {
            if e.p >= n || e.r >= n || e.s >= n {
                return Err(Error::Validation(format!(
                    "quadratic entry ({},{},{}) out of range for n={n}",
                    e.p, e.r, e.s
                )));
            }
            if e.r > e.s {
                return Err(Error::Validation(format!(
                    "quadratic entry ({},{},{}) violates the canonical order r <= s implied \
                     by the symmetry G^p_rs = G^p_sr",
                    e.p, e.r, e.s
                )));
            }
            if !seen_q.insert((e.p, e.r, e.s)) {
                return Err(Error::Validation(format!(
                    "duplicate quadratic entry ({},{},{})",
                    e.p, e.r, e.s
                )));
            }
        }
        let mut seen_c = std::collections::BTreeSet::new();
        for e in &cubic {
            if e.p >= n || e.r >= n || e.s >= n || e.t >= n {
                return Err(Error::Validation(format!(
                    "cubic entry ({},{},{},{}) out of range for n={n}",
                    e.p, e.r, e.s, e.t
                )));
            }
            if !(e.r <= e.s && e.s <= e.t) {
                return Err(Error::Validation(format!(
                    "cubic entry ({},{},{},{}) violates the canonical order r <= s <= t implied \
                     by the symmetry h^i_jkl = h^i_lkj",
                    e.p, e.r, e.s, e.t
                )));
            }
            if !seen_c.insert((e.p, e.r, e.s, e.t)) {
                return Err(Error::Validation(format!(
                    "duplicate cubic entry ({},{},{},{})",
                    e.p, e.r, e.s, e.t
                )));
            }
        }
        Ok(Self { n, quadratic, cubic })
    }

    /// `G(x,x) + H(x,x,x)`.
    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut f = DVector::zeros(self.n);
        for e in &self.quadratic {
            f[e.p] += e.value * x[e.r] * x[e.s];
        }
        for e in &self.cubic {
            f[e.p] += e.value * x[e.r] * x[e.s] * x[e.t];
        }
        f
    }

    /// Jacobian of [`Self::eval`] at `x`.
    pub fn tangent(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.n, self.n);
        for e in &self.quadratic {
            j[(e.p, e.r)] += e.value * x[e.s];
            j[(e.p, e.s)] += e.value * x[e.r];
        }
        for e in &self.cubic {
            j[(e.p, e.r)] += e.value * x[e.s] * x[e.t];
            j[(e.p, e.s)] += e.value * x[e.r] * x[e.t];
            j[(e.p, e.t)] += e.value * x[e.r] * x[e.s];
        }
        j
    }

    /// Dense full-summation quadratic tensor `G^p_rs`, symmetric in `(r,s)`.
    pub fn dense_quadratic(&self) -> Vec<f64> {
        let n = self.n;
        let mut g = vec![0.0; n * n * n];
        for e in &self.quadratic {
            if e.r == e.s {
                g[(e.p * n + e.r) * n + e.s] += e.value;
            } else {
                g[(e.p * n + e.r) * n + e.s] += 0.5 * e.value;
                g[(e.p * n + e.s) * n + e.r] += 0.5 * e.value;
            }
        }
        g
    }

    /// Dense full-summation cubic tensor `H^p_rst`, symmetric in `(r,s,t)`.
    pub fn dense_cubic(&self) -> Vec<f64> {
        let n = self.n;
        let mut h = vec![0.0; n * n * n * n];
        for e in &self.cubic {
            let perms = distinct_perms3(e.r, e.s, e.t);
            let w = e.value / perms.len() as f64;
            for (a, b, c) in perms {
                h[((e.p * n + a) * n + b) * n + c] += w;
            }
        }
        h
    }

    /// Builds canonical storage from dense full-summation tensors
    /// (`g[p][r][s]` symmetric in `(r,s)`, `h[p][r][s][t]` symmetric in its
    /// last three indices). Entries below `drop_tol` in magnitude are dropped.
    pub fn from_dense(n: usize, g: &[f64], h: &[f64], drop_tol: f64) -> Result<Self> {
        assert_eq!(g.len(), n * n * n);
        assert_eq!(h.len(), n * n * n * n);
        let mut quadratic = Vec::new();
        for p in 0..n {
            for r in 0..n {
                for s in r..n {
                    let mult = if r == s { 1.0 } else { 2.0 };
                    let v = mult * g[(p * n + r) * n + s];
                    if v.abs() > drop_tol {
                        quadratic.push(QuadEntry { p, r, s, value: v });
                    }
                }
            }
        }
        let mut cubic = Vec::new();
        for p in 0..n {
            for r in 0..n {
                for s in r..n {
                    for t in s..n {
                        let mult = distinct_perms3(r, s, t).len() as f64;
                        let v = mult * h[((p * n + r) * n + s) * n + t];
                        if v.abs() > drop_tol {
                            cubic.push(CubicEntry { p, r, s, t, value: v });
                        }
                    }
                }
            }
        }
        Self::new(n, quadratic, cubic)
    }
}

/// Distinct permutations of an index triple.
pub fn distinct_perms3(r: usize, s: usize, t: usize) -> Vec<(usize, usize, usize)> {
    let all = [
        (r, s, t),
        (r, t, s),
        (s, r, t),
        (s, t, r),
        (t, r, s),
        (t, s, r),
    ];
    let mut out = Vec::new();
    for p in all {
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_coefficient_contraction() {
        // g^0_00 = 1, everything else zero: f([x, 0]) = [x^2, 0].
        let f = PolynomialForce::new(
            2,
            vec![QuadEntry { p: 0, r: 0, s: 0, value: 1.0 }],
            vec![],
        )
        .unwrap();
        let x = DVector::from_vec(vec![3.0, 0.0]);
        let out = f.eval(&x);
        assert_eq!(out[0], 9.0);
        assert_eq!(out[1], 0.0);
    }

    #[test]
    fn canonical_order_is_enforced() {
        let bad = PolynomialForce::new(
            2,
            vec![QuadEntry { p: 0, r: 1, s: 0, value: 1.0 }],
            vec![],
        );
        assert!(bad.is_err());
        let bad_cubic = PolynomialForce::new(
            3,
            vec![],
            vec![CubicEntry { p: 0, r: 2, s: 1, t: 1, value: 1.0 }],
        );
        let msg = format!("{}", bad_cubic.unwrap_err());
        assert!(msg.contains("h^i_jkl = h^i_lkj"), "{msg}");
    }

    #[test]
    fn dense_round_trip_and_eval_match() {
        let f = PolynomialForce::new(
            3,
            vec![
                QuadEntry { p: 0, r: 0, s: 1, value: 2.0 },
                QuadEntry { p: 2, r: 1, s: 1, value: -0.5 },
            ],
            vec![
                CubicEntry { p: 1, r: 0, s: 1, t: 2, value: 1.5 },
                CubicEntry { p: 0, r: 2, s: 2, t: 2, value: 0.25 },
            ],
        )
        .unwrap();
        let g = f.dense_quadratic();
        let h = f.dense_cubic();
        let f2 = PolynomialForce::from_dense(3, &g, &h, 0.0).unwrap();
        let x = DVector::from_vec(vec![0.3, -1.2, 0.7]);
        // Full-summation contraction as an independent reference.
        let n = 3;
        let mut reference = DVector::zeros(n);
        for p in 0..n {
            for r in 0..n {
                for s in 0..n {
                    reference[p] += g[(p * n + r) * n + s] * x[r] * x[s];
                    for t in 0..n {
                        reference[p] += h[((p * n + r) * n + s) * n + t] * x[r] * x[s] * x[t];
                    }
                }
            }
        }
        assert_relative_eq!(f.eval(&x), reference, max_relative = 1e-14);
        assert_relative_eq!(f2.eval(&x), reference, max_relative = 1e-14);
    }

    #[test]
    fn tangent_matches_finite_difference() {
        let f = PolynomialForce::new(
            2,
            vec![QuadEntry { p: 0, r: 0, s: 1, value: 1.0 }],
            vec![CubicEntry { p: 1, r: 0, s: 0, t: 1, value: -2.0 }],
        )
        .unwrap();
        let x = DVector::from_vec(vec![0.4, -0.9]);
        let j = f.tangent(&x);
        let eps = 1e-7;
        for q in 0..2 {
            let mut xp = x.clone();
            xp[q] += eps;
            let mut xm = x.clone();
            xm[q] -= eps;
            let col = (f.eval(&xp) - f.eval(&xm)) / (2.0 * eps);
            for p in 0..2 {
                assert_relative_eq!(j[(p, q)], col[p], epsilon = 1e-6);
            }
        }
    }
}
