//! Dense modal-basis evaluation of the normal-form tensor formulas, used as
//! an independent cross-check of the direct (physical-basis) computation.
//!
//! Three algebraically equivalent routes are implemented for the second
//! order: the rational closed forms with the quartic denominator, the split
//! two-factor forms, and a direct solve of the 4x4 coefficient-balance
//! system. The third order provides the split forms and the 8x8 balance
//! system. A mass-inverse physical route (`O^2 = M^-1 K`) is kept here as a
//! third second-order formula; it is deliberately absent from the production
//! path because building `M^-1 K` costs a solve per dof.
//!
//! Everything is dense and capped at 20 modes: the point is catching sign
//! and index errors, not scaling.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::eigen::Spectrum;
use crate::error::{Error, Result};
use crate::model::StructuralModel;

/// Guard against resonant denominators; the oracle does not implement the
/// augmentation machinery.
const DENOM_GUARD: f64 = 1e-6;

const MAX_N: usize = 20;

/// Modal oscillator system with full nonlinear coupling tensors.
#[derive(Debug, Clone)]
pub struct DenseModalSystem {
    pub n: usize,
    pub omegas: Vec<f64>,
    /// `g[s][i][j]`, fully symmetric under any index permutation.
    pub g: Vec<f64>,
    /// `h[s][i][j][k]`, symmetric in its last three indices.
    pub h: Vec<f64>,
}

impl DenseModalSystem {
    pub fn new(omegas: Vec<f64>, g: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        let n = omegas.len();
        if n == 0 || n > MAX_N {
            return Err(Error::Validation(format!(
                "dense modal system supports 1..={MAX_N} modes, got {n}"
            )));
        }
        if g.len() != n * n * n || h.len() != n * n * n * n {
            return Err(Error::Validation("tensor storage size mismatch".into()));
        }
        let sys = Self { n, omegas, g, h };
        let scale_g = sys.g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for s in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let v = sys.g_at(s, i, j);
                    for (a, b, c) in crate::model::polynomial::distinct_perms3(s, i, j) {
                        if (v - sys.g_at(a, b, c)).abs() > 1e-10 * scale_g.max(1e-300) {
                            return Err(Error::Validation(format!(
                                "g tensor violates g^i_jk = g^j_ki = g^k_ij at ({s},{i},{j})"
                            )));
                        }
                    }
                }
            }
        }
        let scale_h = sys.h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for s in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let v = sys.h_at(s, i, j, k);
                        for (a, b, c) in crate::model::polynomial::distinct_perms3(i, j, k) {
                            if (v - sys.h_at(s, a, b, c)).abs() > 1e-10 * scale_h.max(1e-300) {
                                return Err(Error::Validation(format!(
                                    "h tensor is not symmetric in its last three indices \
                                     at ({s},{i},{j},{k})"
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(sys)
    }

    pub fn g_at(&self, s: usize, i: usize, j: usize) -> f64 {
        self.g[(s * self.n + i) * self.n + j]
    }

    pub fn h_at(&self, s: usize, i: usize, j: usize, k: usize) -> f64 {
        self.h[((s * self.n + i) * self.n + j) * self.n + k]
    }

    /// Column vector `g_ij` over the first index.
    pub fn g_vec(&self, i: usize, j: usize) -> DVector<f64> {
        DVector::from_fn(self.n, |s, _| self.g_at(s, i, j))
    }

    pub fn h_vec(&self, i: usize, j: usize, k: usize) -> DVector<f64> {
        DVector::from_fn(self.n, |s, _| self.h_at(s, i, j, k))
    }

    /// Projects a physical model onto a complete computed spectrum by dense
    /// contraction of the explicit polynomial tensors (no polarization
    /// involved, to stay independent of the production extraction path).
    pub fn from_model(model: &StructuralModel, spectrum: &Spectrum) -> Result<Self> {
        let n = model.n_dof;
        if spectrum.n_computed() != n {
            return Err(Error::Validation(
                "modal projection needs the complete spectrum".into(),
            ));
        }
        let crate::model::NonlinearForce::Polynomial(force) = &model.force else {
            return Err(Error::Validation(
                "dense modal projection requires an explicit polynomial model".into(),
            ));
        };
        let gp = force.dense_quadratic();
        let hp = force.dense_cubic();
        let v = &spectrum.phis;
        // g_modal[s][i][j] = sum_p v[p][s] sum_rc gp[p][r][c] v[r][i] v[c][j],
        // contracted one index at a time.
        let mut t1 = vec![0.0; n * n * n]; // (p, i, c)
        for p in 0..n {
            for r in 0..n {
                for c in 0..n {
                    let w = gp[(p * n + r) * n + c];
                    if w == 0.0 {
                        continue;
                    }
                    for i in 0..n {
                        t1[(p * n + i) * n + c] += w * v[(r, i)];
                    }
                }
            }
        }
        let mut t2 = vec![0.0; n * n * n]; // (p, i, j)
        for p in 0..n {
            for i in 0..n {
                for c in 0..n {
                    let w = t1[(p * n + i) * n + c];
                    if w == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        t2[(p * n + i) * n + j] += w * v[(c, j)];
                    }
                }
            }
        }
        let mut gm = vec![0.0; n * n * n]; // (s, i, j)
        for p in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let w = t2[(p * n + i) * n + j];
                    if w == 0.0 {
                        continue;
                    }
                    for s in 0..n {
                        gm[(s * n + i) * n + j] += v[(p, s)] * w;
                    }
                }
            }
        }
        let mut u1 = vec![0.0; n * n * n * n];
        for p in 0..n {
            for r in 0..n {
                for s_ in 0..n {
                    for t in 0..n {
                        let w = hp[((p * n + r) * n + s_) * n + t];
                        if w == 0.0 {
                            continue;
                        }
                        for i in 0..n {
                            u1[((p * n + i) * n + s_) * n + t] += w * v[(r, i)];
                        }
                    }
                }
            }
        }
        let mut u2 = vec![0.0; n * n * n * n];
        for p in 0..n {
            for i in 0..n {
                for s_ in 0..n {
                    for t in 0..n {
                        let w = u1[((p * n + i) * n + s_) * n + t];
                        if w == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            u2[((p * n + i) * n + j) * n + t] += w * v[(s_, j)];
                        }
                    }
                }
            }
        }
        let mut u3 = vec![0.0; n * n * n * n];
        for p in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for t in 0..n {
                        let w = u2[((p * n + i) * n + j) * n + t];
                        if w == 0.0 {
                            continue;
                        }
                        for k in 0..n {
                            u3[((p * n + i) * n + j) * n + k] += w * v[(t, k)];
                        }
                    }
                }
            }
        }
        let mut hm = vec![0.0; n * n * n * n];
        for p in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let w = u3[((p * n + i) * n + j) * n + k];
                        if w == 0.0 {
                            continue;
                        }
                        for s in 0..n {
                            hm[((s * n + i) * n + j) * n + k] += v[(p, s)] * w;
                        }
                    }
                }
            }
        }
        Self::new(spectrum.omegas.clone(), gm, hm)
    }
}

/// Second-order modal tensors over ordered master pairs. Each map value has
/// one component per mode of the system.
#[derive(Debug, Clone)]
pub struct ModalSecondOrder {
    pub a: BTreeMap<(usize, usize), DVector<f64>>,
    pub b: BTreeMap<(usize, usize), DVector<f64>>,
    pub gamma: BTreeMap<(usize, usize), DVector<f64>>,
}

fn pair_denominators(sys: &DenseModalSystem, i: usize, j: usize, s: usize) -> Result<(f64, f64)> {
    let (wi, wj, ws) = (sys.omegas[i], sys.omegas[j], sys.omegas[s]);
    let ds = (wi + wj).powi(2) - ws * ws;
    let dd = (wi - wj).powi(2) - ws * ws;
    for d in [ds, dd] {
        if d.abs() <= DENOM_GUARD * ws * ws {
            return Err(Error::Numerical(format!(
                "second-order resonant denominator for pair ({i},{j}) against mode {s}; \
                 the oracle does not implement augmentation"
            )));
        }
    }
    Ok((ds, dd))
}

/// Closed rational forms with the quartic denominator.
pub fn modal_second_order(sys: &DenseModalSystem, masters: &[usize]) -> Result<ModalSecondOrder> {
    let mut out = ModalSecondOrder {
        a: BTreeMap::new(),
        b: BTreeMap::new(),
        gamma: BTreeMap::new(),
    };
    for &i in masters {
        for &j in masters {
            let (wi, wj) = (sys.omegas[i], sys.omegas[j]);
            let mut a = DVector::zeros(sys.n);
            let mut b = DVector::zeros(sys.n);
            let mut gam = DVector::zeros(sys.n);
            for s in 0..sys.n {
                let (ds, dd) = pair_denominators(sys, i, j, s)?;
                let d = ds * dd;
                let ws2 = sys.omegas[s] * sys.omegas[s];
                let g = sys.g_at(s, i, j);
                a[s] = (wi * wi + wj * wj - ws2) / d * g;
                b[s] = 2.0 / d * g;
                gam[s] = (-wi * wi + wj * wj - ws2) * 2.0 / d * g;
            }
            out.a.insert((i, j), a);
            out.b.insert((i, j), b);
            out.gamma.insert((i, j), gam);
        }
    }
    Ok(out)
}

/// Split two-factor forms (scalar version of the shifted-solve route).
pub fn modal_second_order_split(
    sys: &DenseModalSystem,
    masters: &[usize],
) -> Result<ModalSecondOrder> {
    let mut out = ModalSecondOrder {
        a: BTreeMap::new(),
        b: BTreeMap::new(),
        gamma: BTreeMap::new(),
    };
    for &i in masters {
        for &j in masters {
            let (wi, wj) = (sys.omegas[i], sys.omegas[j]);
            let mut a = DVector::zeros(sys.n);
            let mut b = DVector::zeros(sys.n);
            let mut gam = DVector::zeros(sys.n);
            for s in 0..sys.n {
                let (ds, dd) = pair_denominators(sys, i, j, s)?;
                let g = sys.g_at(s, i, j);
                let zs = g / ds;
                let zd = g / dd;
                a[s] = 0.5 * (zd + zs);
                b[s] = (zd - zs) / (2.0 * wi * wj);
                gam[s] = (wj - wi) / wj * zd + (wj + wi) / wj * zs;
            }
            out.a.insert((i, j), a);
            out.b.insert((i, j), b);
            out.gamma.insert((i, j), gam);
        }
    }
    Ok(out)
}

/// Direct solve of the four balance equations per component: unknowns
/// `(a, b, gamma_ij, gamma_ji)` from
///
/// ```text
/// 2a - 2 wi^2 b - gamma_ij                  = 0
/// 2a - 2 wj^2 b            - gamma_ji       = 0
/// -2 ws^2 a + wj^2 gamma_ij + wi^2 gamma_ji = 2g
/// 2 ws^2 b + gamma_ij + gamma_ji            = 0
/// ```
///
/// The third right-hand side carries the factor 2 required for consistency
/// with the closed rational forms (substituting them back in closes the
/// system only with `2g`).
pub fn modal_second_order_balance(
    sys: &DenseModalSystem,
    masters: &[usize],
) -> Result<ModalSecondOrder> {
    let mut out = ModalSecondOrder {
        a: BTreeMap::new(),
        b: BTreeMap::new(),
        gamma: BTreeMap::new(),
    };
    for &i in masters {
        for &j in masters {
            let (wi, wj) = (sys.omegas[i], sys.omegas[j]);
            let mut a = DVector::zeros(sys.n);
            let mut b = DVector::zeros(sys.n);
            let mut gij = DVector::zeros(sys.n);
            for s in 0..sys.n {
                pair_denominators(sys, i, j, s)?;
                let ws2 = sys.omegas[s] * sys.omegas[s];
                #[rustfmt::skip]
                let m = DMatrix::from_row_slice(4, 4, &[
                    2.0,        -2.0 * wi * wi, -1.0,     0.0,
                    2.0,        -2.0 * wj * wj,  0.0,    -1.0,
                    -2.0 * ws2,  0.0,            wj * wj, wi * wi,
                    0.0,         2.0 * ws2,      1.0,     1.0,
                ]);
                let rhs = DVector::from_vec(vec![0.0, 0.0, 2.0 * sys.g_at(s, i, j), 0.0]);
                let sol = m.lu().solve(&rhs).ok_or_else(|| {
                    Error::Numerical(format!(
                        "singular balance system for pair ({i},{j}) component {s}"
                    ))
                })?;
                a[s] = sol[0];
                b[s] = sol[1];
                gij[s] = sol[2];
            }
            out.a.insert((i, j), a);
            out.b.insert((i, j), b);
            out.gamma.insert((i, j), gij);
        }
    }
    Ok(out)
}

/// Mass-inverse physical route for the a-tensor:
/// `a_ij = (sd^2 I - O^2)^-1 (ss^2 I - O^2)^-1 ((wi^2 + wj^2) I - O^2) M^-1 G_ij`
/// with `O^2 = M^-1 K`.
pub fn mass_inverse_a(
    model: &StructuralModel,
    omega_i: f64,
    omega_j: f64,
    g_phys: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = model.n_dof;
    let m_lu = model.mass.clone().lu();
    let o2 = m_lu
        .solve(&model.stiffness)
        .ok_or_else(|| Error::Numerical("singular mass matrix".into()))?;
    let rhs = m_lu
        .solve(g_phys)
        .ok_or_else(|| Error::Numerical("singular mass matrix".into()))?;
    let eye = DMatrix::identity(n, n);
    let f = (&eye * (omega_i * omega_i + omega_j * omega_j) - &o2) * rhs;
    let ss = (omega_i + omega_j).powi(2);
    let sd = (-omega_i + omega_j).powi(2);
    let x = (&eye * ss - &o2)
        .lu()
        .solve(&f)
        .ok_or_else(|| Error::Numerical("singular shifted operator in mass-inverse form".into()))?;
    (&eye * sd - &o2)
        .lu()
        .solve(&x)
        .ok_or_else(|| Error::Numerical("singular shifted operator in mass-inverse form".into()))
}

/// Fourth-order force tensors over master triples:
/// `A_ijk = sum_s 2 g_is a_jk^s`, `B_ijk = sum_s 2 g_is b_jk^s`.
#[derive(Debug, Clone)]
pub struct ModalAb {
    pub a4: BTreeMap<(usize, usize, usize), DVector<f64>>,
    pub b4: BTreeMap<(usize, usize, usize), DVector<f64>>,
}

pub fn modal_ab(
    sys: &DenseModalSystem,
    masters: &[usize],
    o2: &ModalSecondOrder,
) -> Result<ModalAb> {
    let mut out = ModalAb { a4: BTreeMap::new(), b4: BTreeMap::new() };
    for &i in masters {
        for &j in masters {
            for &k in masters {
                let ajk = &o2.a[&(j, k)];
                let bjk = &o2.b[&(j, k)];
                let mut a4 = DVector::zeros(sys.n);
                let mut b4 = DVector::zeros(sys.n);
                for r in 0..sys.n {
                    let mut sa = 0.0;
                    let mut sb = 0.0;
                    for s in 0..sys.n {
                        let gis = sys.g_at(r, i, s);
                        sa += 2.0 * gis * ajk[s];
                        sb += 2.0 * gis * bjk[s];
                    }
                    a4[r] = sa;
                    b4[r] = sb;
                }
                out.a4.insert((i, j, k), a4);
                out.b4.insert((i, j, k), b4);
            }
        }
    }
    Ok(out)
}

/// Third-order modal tensors over ordered master triples.
#[derive(Debug, Clone)]
pub struct ModalThirdOrder {
    pub r: BTreeMap<(usize, usize, usize), DVector<f64>>,
    pub u: BTreeMap<(usize, usize, usize), DVector<f64>>,
    pub mu: BTreeMap<(usize, usize, usize), DVector<f64>>,
    pub nu: BTreeMap<(usize, usize, usize), DVector<f64>>,
}

/// Sign patterns of the four cubic force combinations; entry `m` scales
/// `(wj wk B_ijk, wk wi B_jki, wi wj B_kij)`.
const P_SIGNS: [[f64; 3]; 4] = [
    [-1.0, -1.0, -1.0],
    [-1.0, 1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, -1.0],
];

use crate::dnf::resonance::{sigma3, trivial_row};

fn modal_p(
    sys: &DenseModalSystem,
    ab: &ModalAb,
    m: usize,
    i: usize,
    j: usize,
    k: usize,
) -> DVector<f64> {
    let (wi, wj, wk) = (sys.omegas[i], sys.omegas[j], sys.omegas[k]);
    let s = P_SIGNS[m];
    let mut p = ab.a4[&(i, j, k)].clone() + &ab.a4[&(j, k, i)] + &ab.a4[&(k, i, j)]
        + sys.h_vec(i, j, k) * 3.0;
    p += &ab.b4[&(i, j, k)] * (s[0] * wj * wk);
    p += &ab.b4[&(j, k, i)] * (s[1] * wk * wi);
    p += &ab.b4[&(k, i, j)] * (s[2] * wi * wj);
    p
}

/// Split route: the four shifted solves become scalar divisions per modal
/// component. A trivially resonant mode is pinned out of the whole triple:
/// its row is zeroed in all four Z vectors, matching the augmentation rule
/// of the direct path (and keeping the retained reduced-dynamics
/// coefficients exactly at the `A + h`, `B` projections).
pub fn modal_third_order(
    sys: &DenseModalSystem,
    masters: &[usize],
    ab: &ModalAb,
) -> Result<ModalThirdOrder> {
    let mut out = ModalThirdOrder {
        r: BTreeMap::new(),
        u: BTreeMap::new(),
        mu: BTreeMap::new(),
        nu: BTreeMap::new(),
    };
    for &i in masters {
        for &j in masters {
            for &k in masters {
                let (wi, wj, wk) = (sys.omegas[i], sys.omegas[j], sys.omegas[k]);
                let pinned: Vec<usize> =
                    (1..4).filter_map(|m| trivial_row(m, i, j, k)).collect();
                let mut z = [
                    DVector::zeros(sys.n),
                    DVector::zeros(sys.n),
                    DVector::zeros(sys.n),
                    DVector::zeros(sys.n),
                ];
                for (m, zm) in z.iter_mut().enumerate() {
                    let p = modal_p(sys, ab, m, i, j, k);
                    let sig = sigma3(m, wi, wj, wk);
                    for s in 0..sys.n {
                        if pinned.contains(&s) {
                            zm[s] = 0.0;
                            continue;
                        }
                        let ws2 = sys.omegas[s] * sys.omegas[s];
                        let den = sig * sig - ws2;
                        if den.abs() <= DENOM_GUARD * ws2 {
                            return Err(Error::Numerical(format!(
                                "non-trivial third-order resonance for triple \
                                 ({i},{j},{k}) combination {m} against mode {s}; \
                                 the oracle does not implement augmentation"
                            )));
                        }
                        zm[s] = p[s] / den;
                    }
                }
                let s0 = sigma3(0, wi, wj, wk);
                let s1 = sigma3(1, wi, wj, wk);
                let s2 = sigma3(2, wi, wj, wk);
                let s3 = sigma3(3, wi, wj, wk);
                let r = (&z[0] + &z[1] + &z[2] + &z[3]) / 12.0;
                let u = (-&z[0] - &z[1] + &z[2] + &z[3]) / (4.0 * wj * wk);
                let mu =
                    (-&z[0] * s0 + &z[1] * s1 + &z[2] * s2 + &z[3] * s3) / (12.0 * wi * wj * wk);
                let nu = (&z[0] * s0 - &z[1] * s1 + &z[2] * s2 + &z[3] * s3) / (4.0 * wi);
                out.r.insert((i, j, k), r);
                out.u.insert((i, j, k), u);
                out.mu.insert((i, j, k), mu);
                out.nu.insert((i, j, k), nu);
            }
        }
    }
    Ok(out)
}

/// Unsplit route for explicit triples: per component, solves the eight
/// balance equations in `(mu, u_ijk, u_jki, u_kij, r, nu_ijk, nu_jki,
/// nu_kij)`. This is the source system the rational forms derive from, so
/// agreement checks the split algebra end to end. Resonant rows (including
/// trivial ones) are rejected.
pub fn modal_third_order_balance(
    sys: &DenseModalSystem,
    triples: &[(usize, usize, usize)],
    ab: &ModalAb,
) -> Result<ModalThirdOrder> {
    let mut out = ModalThirdOrder {
        r: BTreeMap::new(),
        u: BTreeMap::new(),
        mu: BTreeMap::new(),
        nu: BTreeMap::new(),
    };
    for &(i, j, k) in triples {
        let (wi, wj, wk) = (sys.omegas[i], sys.omegas[j], sys.omegas[k]);
        let (wi2, wj2, wk2) = (wi * wi, wj * wj, wk * wk);
        let p_rhs = ab.a4[&(i, j, k)].clone() + &ab.a4[&(j, k, i)] + &ab.a4[&(k, i, j)]
            + sys.h_vec(i, j, k) * 3.0;
        let b_ijk = &ab.b4[&(i, j, k)];
        let b_jki = &ab.b4[&(j, k, i)];
        let b_kij = &ab.b4[&(k, i, j)];
        let mut r = DVector::zeros(sys.n);
        let mut u = DVector::zeros(sys.n);
        let mut mu = DVector::zeros(sys.n);
        let mut nu = DVector::zeros(sys.n);
        for s in 0..sys.n {
            let ws2 = sys.omegas[s] * sys.omegas[s];
            let resonant = (0..4).any(|m| {
                let sig = sigma3(m, wi, wj, wk);
                (sig * sig - ws2).abs() <= DENOM_GUARD * ws2
            });
            if resonant {
                return Err(Error::Numerical(format!(
                    "resonant row {s} requested in the balance-system oracle for \
                     triple ({i},{j},{k})"
                )));
            }
            // Unknowns: [mu, u_ijk, u_jki, u_kij, r, nu_ijk, nu_jki, nu_kij].
            #[rustfmt::skip]
            let m = DMatrix::from_row_slice(8, 8, &[
                3.0,       -1.0,  -1.0,  -1.0,   0.0,        0.0,  0.0,  0.0,
                0.0,       -wj2,  -wi2,   0.0,   3.0,        0.0,  0.0, -1.0,
                0.0,       -wk2,   0.0,  -wi2,   3.0,        0.0, -1.0,  0.0,
                0.0,        0.0,  -wk2,  -wj2,   3.0,       -1.0,  0.0,  0.0,
                0.0,        0.0,   0.0,   0.0,  -3.0 * ws2,  wi2,  wj2,  wk2,
                3.0 * wi2, -ws2,   0.0,   0.0,   0.0,        0.0, -1.0, -1.0,
                3.0 * wj2,  0.0,  -ws2,   0.0,   0.0,       -1.0,  0.0, -1.0,
                3.0 * wk2,  0.0,   0.0,  -ws2,   0.0,       -1.0, -1.0,  0.0,
            ]);
            let rhs = DVector::from_vec(vec![
                0.0,
                0.0,
                0.0,
                0.0,
                p_rhs[s],
                b_ijk[s],
                b_jki[s],
                b_kij[s],
            ]);
            let sol = m.lu().solve(&rhs).ok_or_else(|| {
                Error::Numerical(format!(
                    "singular third-order balance system for ({i},{j},{k}) row {s}"
                ))
            })?;
            mu[s] = sol[0];
            u[s] = sol[1];
            r[s] = sol[4];
            nu[s] = sol[5];
        }
        out.r.insert((i, j, k), r);
        out.u.insert((i, j, k), u);
        out.mu.insert((i, j, k), mu);
        out.nu.insert((i, j, k), nu);
    }
    Ok(out)
}

/// A randomly generated physical/modal system pair for equivalence checks.
pub struct RandomSystem {
    pub model: StructuralModel,
    /// Complete spectrum of the model.
    pub spectrum: Spectrum,
    /// Modal tensors recomputed in the computed eigenbasis.
    pub sys: DenseModalSystem,
}

/// Builds a random dense SPD pair with prescribed non-resonant frequencies
/// and random symmetric modal tensors, realized as an explicit polynomial
/// model: `K = (M V) diag(w^2) (M V)^T` with `V` a random mass-normalized
/// basis, and the physical force tensors obtained by basis transformation of
/// the modal ones.
pub fn random_system(seed: u64, n: usize) -> Result<RandomSystem> {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    assert!(n >= 2 && n <= MAX_N);

    let rand_orthogonal = |rng: &mut rand_chacha::ChaCha8Rng| -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        a.qr().q()
    };
    let q = rand_orthogonal(&mut rng);
    let d = DVector::from_fn(n, |_, _| rng.random_range(0.5..2.0));
    let mass = &q * DMatrix::from_diagonal(&d) * q.transpose();
    let mass = (&mass + mass.transpose()) * 0.5;
    let m_inv_sqrt = &q * DMatrix::from_diagonal(&d.map(|v| 1.0 / v.sqrt())) * q.transpose();

    // Non-resonant, well-separated frequencies by rejection.
    let omegas = loop {
        let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..3.0)).collect();
        w.sort_by(f64::total_cmp);
        let min_gap = w.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
        if min_gap < 0.08 {
            continue;
        }
        let mut ok = true;
        'outer: for s in 0..n {
            let ws2 = w[s] * w[s];
            for i in 0..n {
                for j in 0..n {
                    for sig in [w[i] + w[j], w[i] - w[j]] {
                        if i != j || sig != 0.0 {
                            if (sig * sig - ws2).abs() <= 0.02 * ws2 {
                                ok = false;
                                break 'outer;
                            }
                        }
                    }
                    for k in 0..n {
                        for m in 0..4 {
                            if trivial_row(m, i, j, k).is_some() {
                                continue;
                            }
                            let sig = sigma3(m, w[i], w[j], w[k]);
                            if (sig * sig - ws2).abs() <= 0.02 * ws2 {
                                ok = false;
                                break 'outer;
                            }
                        }
                    }
                }
            }
        }
        if ok {
            break w;
        }
    };

    let u = rand_orthogonal(&mut rng);
    let v = &m_inv_sqrt * u;
    let mv = &mass * &v;
    let k_op = &mv
        * DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| omegas[i] * omegas[i]))
        * mv.transpose();
    let k_op = (&k_op + k_op.transpose()) * 0.5;

    // Random symmetric modal tensors.
    let mut g = vec![0.0; n * n * n];
    for s in 0..n {
        for i in s..n {
            for j in i..n {
                let val = rng.random_range(-0.5..0.5);
                for (a, b, c) in crate::model::polynomial::distinct_perms3(s, i, j) {
                    g[(a * n + b) * n + c] = val;
                }
            }
        }
    }
    let mut h = vec![0.0; n * n * n * n];
    for s in 0..n {
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    let val = rng.random_range(-0.5..0.5);
                    for (a, b, c) in crate::model::polynomial::distinct_perms3(i, j, k) {
                        h[((s * n + a) * n + b) * n + c] = val;
                    }
                }
            }
        }
    }

    // Physical tensors: f(X) = (M V) [g(x,x) + h(x,x,x)] with x = V^T M X.
    let w_mat = v.transpose() * &mass;
    let mut g1 = vec![0.0; n * n * n];
    for s in 0..n {
        for i in 0..n {
            for j in 0..n {
                let val = g[(s * n + i) * n + j];
                if val == 0.0 {
                    continue;
                }
                for r in 0..n {
                    g1[(s * n + r) * n + j] += val * w_mat[(i, r)];
                }
            }
        }
    }
    let mut g2 = vec![0.0; n * n * n];
    for s in 0..n {
        for r in 0..n {
            for j in 0..n {
                let val = g1[(s * n + r) * n + j];
                if val == 0.0 {
                    continue;
                }
                for c in 0..n {
                    g2[(s * n + r) * n + c] += val * w_mat[(j, c)];
                }
            }
        }
    }
    let mut g_phys = vec![0.0; n * n * n];
    for s in 0..n {
        for r in 0..n {
            for c in 0..n {
                let val = g2[(s * n + r) * n + c];
                if val == 0.0 {
                    continue;
                }
                for p in 0..n {
                    g_phys[(p * n + r) * n + c] += mv[(p, s)] * val;
                }
            }
        }
    }
    let mut h1 = vec![0.0; n * n * n * n];
    for s in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let val = h[((s * n + i) * n + j) * n + k];
                    if val == 0.0 {
                        continue;
                    }
                    for r in 0..n {
                        h1[((s * n + r) * n + j) * n + k] += val * w_mat[(i, r)];
                    }
                }
            }
        }
    }
    let mut h2 = vec![0.0; n * n * n * n];
    for s in 0..n {
        for r in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let val = h1[((s * n + r) * n + j) * n + k];
                    if val == 0.0 {
                        continue;
                    }
                    for c in 0..n {
                        h2[((s * n + r) * n + c) * n + k] += val * w_mat[(j, c)];
                    }
                }
            }
        }
    }
    let mut h3 = vec![0.0; n * n * n * n];
    for s in 0..n {
        for r in 0..n {
            for c in 0..n {
                for k in 0..n {
                    let val = h2[((s * n + r) * n + c) * n + k];
                    if val == 0.0 {
                        continue;
                    }
                    for e in 0..n {
                        h3[((s * n + r) * n + c) * n + e] += val * w_mat[(k, e)];
                    }
                }
            }
        }
    }
    let mut h_phys = vec![0.0; n * n * n * n];
    for s in 0..n {
        for r in 0..n {
            for c in 0..n {
                for e in 0..n {
                    let val = h3[((s * n + r) * n + c) * n + e];
                    if val == 0.0 {
                        continue;
                    }
                    for p in 0..n {
                        h_phys[((p * n + r) * n + c) * n + e] += mv[(p, s)] * val;
                    }
                }
            }
        }
    }

    let force = crate::model::polynomial::PolynomialForce::from_dense(n, &g_phys, &h_phys, 0.0)?;
    let labels = (0..n)
        .map(|i| crate::model::DofLabel { node: i, kind: crate::model::DofKind::Generic })
        .collect();
    let model = StructuralModel::new(
        mass,
        k_op,
        crate::model::NonlinearForce::Polynomial(force),
        vec![],
        labels,
    )?;
    let spectrum = crate::eigen::solve_modes(&model, n)?;
    for (a, b) in spectrum.omegas.iter().zip(omegas.iter()) {
        if (a - b).abs() > 1e-6 * b {
            return Err(Error::Numerical(format!(
                "random system spectrum drifted: {a} vs prescribed {b}"
            )));
        }
    }
    let sys = DenseModalSystem::from_model(&model, &spectrum)?;
    Ok(RandomSystem { model, spectrum, sys })
}

/// Outcome of the modal-equivalence suite.
#[derive(Debug, Clone, Copy)]
pub struct VerificationReport {
    pub systems: usize,
    /// Max relative error, direct second-order tensors vs V * modal oracle.
    pub max_o2: f64,
    /// Max relative error, direct third-order tensors vs V * modal oracle.
    pub max_o3: f64,
    /// Max mutual deviation of the split / unsplit / balance / mass-inverse
    /// second-order forms.
    pub max_forms: f64,
}

/// Runs the direct-vs-modal equivalence suite on `count` random systems of
/// size `n` with `n_masters` master modes.
pub fn run_verification(seed: u64, count: usize, n: usize, n_masters: usize) -> Result<VerificationReport> {
    use crate::dnf::Dnf;
    let mut report = VerificationReport { systems: count, max_o2: 0.0, max_o3: 0.0, max_forms: 0.0 };
    for case in 0..count {
        let rs = random_system(seed.wrapping_add(case as u64), n)?;
        let masters: Vec<usize> = (0..n_masters.min(n)).collect();
        let step = crate::step::step_tensors(&rs.model, &rs.spectrum, &masters)?;
        let dnf = Dnf::detect(&rs.model, &rs.spectrum, &masters, 1e-4)?;
        let mut tensors = dnf.second_order_tensors(&step)?;
        dnf.third_order_force_tensors(&mut tensors)?;
        dnf.third_order_tensors(&mut tensors, &step)?;

        let o2 = modal_second_order(&rs.sys, &masters)?;
        let o2_split = modal_second_order_split(&rs.sys, &masters)?;
        let o2_bal = modal_second_order_balance(&rs.sys, &masters)?;
        let ab = modal_ab(&rs.sys, &masters, &o2)?;
        let o3 = modal_third_order(&rs.sys, &masters, &ab)?;

        let v = &rs.spectrum.phis;
        let rel = |x: &DVector<f64>, y: &DVector<f64>| -> f64 {
            let scale = x.norm().max(y.norm());
            if scale == 0.0 {
                0.0
            } else {
                (x - y).norm() / scale
            }
        };
        for &i in &masters {
            for &j in &masters {
                report.max_o2 = report.max_o2.max(rel(&tensors.a[&(i, j)], &(v * &o2.a[&(i, j)])));
                report.max_o2 = report.max_o2.max(rel(&tensors.b[&(i, j)], &(v * &o2.b[&(i, j)])));
                report.max_o2 =
                    report.max_o2.max(rel(&tensors.gamma[&(i, j)], &(v * &o2.gamma[&(i, j)])));

                report.max_forms = report.max_forms.max(rel(&o2.a[&(i, j)], &o2_split.a[&(i, j)]));
                report.max_forms = report.max_forms.max(rel(&o2.b[&(i, j)], &o2_split.b[&(i, j)]));
                report.max_forms =
                    report.max_forms.max(rel(&o2.gamma[&(i, j)], &o2_bal.gamma[&(i, j)]));
                report.max_forms = report.max_forms.max(rel(&o2.a[&(i, j)], &o2_bal.a[&(i, j)]));
                let g_phys = crate::step::quadratic_force(
                    &rs.model,
                    &rs.spectrum.phi(i).clone_owned(),
                    &rs.spectrum.phi(j).clone_owned(),
                )?;
                let a_mi = mass_inverse_a(
                    &rs.model,
                    rs.spectrum.omegas[i],
                    rs.spectrum.omegas[j],
                    &g_phys,
                )?;
                report.max_forms = report.max_forms.max(rel(&a_mi, &(v * &o2.a[&(i, j)])));
                for &k in &masters {
                    let o3t = tensors.order3.as_ref().unwrap();
                    report.max_o3 =
                        report.max_o3.max(rel(&o3t.r[&(i, j, k)], &(v * &o3.r[&(i, j, k)])));
                    report.max_o3 =
                        report.max_o3.max(rel(&o3t.u[&(i, j, k)], &(v * &o3.u[&(i, j, k)])));
                    report.max_o3 =
                        report.max_o3.max(rel(&o3t.mu[&(i, j, k)], &(v * &o3.mu[&(i, j, k)])));
                    report.max_o3 =
                        report.max_o3.max(rel(&o3t.nu[&(i, j, k)], &(v * &o3.nu[&(i, j, k)])));
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn symmetric_g(n: usize, entries: &[(f64, (usize, usize, usize))]) -> Vec<f64> {
        let mut g = vec![0.0; n * n * n];
        for &(val, (s, i, j)) in entries {
            for (a, b, c) in crate::model::polynomial::distinct_perms3(s, i, j) {
                g[(a * n + b) * n + c] = val;
            }
        }
        g
    }

    fn symmetric_h(n: usize, entries: &[(f64, (usize, usize, usize, usize))]) -> Vec<f64> {
        let mut h = vec![0.0; n * n * n * n];
        for &(val, (s, i, j, k)) in entries {
            for (a, b, c) in crate::model::polynomial::distinct_perms3(i, j, k) {
                h[((s * n + a) * n + b) * n + c] = val;
            }
        }
        h
    }

    #[test]
    fn hand_evaluated_a_coefficient() {
        // a^1_00 = (2 - 100) / ((4 - 100)(0 - 100)) = -98/9600.
        let sys = DenseModalSystem::new(
            vec![1.0, 10.0],
            symmetric_g(2, &[(1.0, (1, 0, 0))]),
            vec![0.0; 16],
        )
        .unwrap();
        let o2 = modal_second_order(&sys, &[0]).unwrap();
        assert_relative_eq!(o2.a[&(0, 0)][1], -98.0 / 9600.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_g_gives_zero_tensors() {
        let n = 3;
        let sys = DenseModalSystem::new(
            vec![1.0, 2.3, 4.7],
            vec![0.0; n * n * n],
            vec![0.0; n * n * n * n],
        )
        .unwrap();
        let o2 = modal_second_order(&sys, &[0, 1]).unwrap();
        for v in o2.a.values().chain(o2.b.values()).chain(o2.gamma.values()) {
            assert_eq!(v.amax(), 0.0);
        }
        let ab = modal_ab(&sys, &[0, 1], &o2).unwrap();
        let o3 = modal_third_order(&sys, &[0, 1], &ab).unwrap();
        for v in o3.r.values().chain(o3.u.values()) {
            assert_eq!(v.amax(), 0.0);
        }
    }

    #[test]
    fn split_unsplit_and_balance_forms_agree() {
        let g = symmetric_g(3, &[(0.7, (0, 0, 1)), (-0.4, (1, 2, 2)), (0.2, (0, 1, 2))]);
        let sys = DenseModalSystem::new(vec![1.0, 2.31, 4.93], g, vec![0.0; 81]).unwrap();
        let masters = [0usize, 1, 2];
        let plain = modal_second_order(&sys, &masters).unwrap();
        let split = modal_second_order_split(&sys, &masters).unwrap();
        let balance = modal_second_order_balance(&sys, &masters).unwrap();
        for key in plain.a.keys() {
            assert_relative_eq!(plain.a[key], split.a[key], max_relative = 1e-10);
            assert_relative_eq!(plain.b[key], split.b[key], max_relative = 1e-10);
            assert_relative_eq!(plain.gamma[key], split.gamma[key], max_relative = 1e-10);
            assert_relative_eq!(plain.a[key], balance.a[key], max_relative = 1e-10);
            assert_relative_eq!(plain.b[key], balance.b[key], max_relative = 1e-10);
            assert_relative_eq!(plain.gamma[key], balance.gamma[key], max_relative = 1e-10);
        }
    }

    #[test]
    fn resonant_denominator_is_an_error() {
        // w2 = 2 w1 makes the (0,0) pair resonant against mode 1.
        let sys = DenseModalSystem::new(
            vec![1.0, 2.0],
            symmetric_g(2, &[(1.0, (1, 0, 0))]),
            vec![0.0; 16],
        )
        .unwrap();
        assert!(modal_second_order(&sys, &[0]).is_err());
    }

    #[test]
    fn third_order_split_matches_balance_system() {
        let n = 3;
        let g = symmetric_g(n, &[(0.5, (0, 0, 1)), (0.3, (1, 2, 2)), (-0.6, (0, 0, 0))]);
        let h = symmetric_h(n, &[(0.9, (0, 1, 2, 2)), (-0.2, (1, 0, 0, 1))]);
        let sys = DenseModalSystem::new(vec![1.0, 2.37, 5.11], g, h).unwrap();
        let masters = [0usize, 1, 2];
        let o2 = modal_second_order(&sys, &masters).unwrap();
        let ab = modal_ab(&sys, &masters, &o2).unwrap();
        let split = modal_third_order(&sys, &masters, &ab).unwrap();
        // Distinct-index triples avoid the trivially resonant rows the
        // balance oracle does not cover.
        let triples = [(0usize, 1usize, 2usize), (2, 0, 1), (1, 2, 0)];
        let balance = modal_third_order_balance(&sys, &triples, &ab).unwrap();
        for key in &triples {
            assert_relative_eq!(split.r[key], balance.r[key], max_relative = 1e-9);
            assert_relative_eq!(split.u[key], balance.u[key], max_relative = 1e-9);
            assert_relative_eq!(split.mu[key], balance.mu[key], max_relative = 1e-9);
            assert_relative_eq!(split.nu[key], balance.nu[key], max_relative = 1e-9);
        }
    }

    #[test]
    fn single_forced_entry_drives_expected_rows() {
        // h^0_111 only, non-resonant frequencies: r/u/mu/nu must be nonzero
        // only where the cubic force drives them.
        let n = 2;
        let h = symmetric_h(n, &[(1.0, (0, 1, 1, 1))]);
        let sys = DenseModalSystem::new(vec![1.0, 2.9], vec![0.0; 8], h).unwrap();
        let o2 = modal_second_order(&sys, &[0, 1]).unwrap();
        let ab = modal_ab(&sys, &[0, 1], &o2).unwrap();
        let o3 = modal_third_order(&sys, &[0, 1], &ab).unwrap();
        assert!(o3.r[&(1, 1, 1)].amax() > 0.0);
        assert_eq!(o3.r[&(0, 0, 0)].amax(), 0.0);
    }
}
