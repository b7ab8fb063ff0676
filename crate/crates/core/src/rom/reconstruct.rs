//! Physical reconstruction of displacements and velocities from normal
//! coordinates through the nonlinear mapping.

use nalgebra::DVector;

use crate::dnf::MappingTensors;
use crate::eigen::Spectrum;
use crate::error::{Error, Result};
use crate::rom::NormalState;

/// How the velocity field is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VelocityRule {
    /// Use the velocity mapping (gamma, and mu/nu at order 3). Default.
    FromMapping,
    /// Differentiate the displacement mapping in time with the first-order
    /// substitutions `Rdot = S`, `Sdot = -w^2 R`.
    FromDisplacementRate,
}

/// Reconstructs `(X, Y)` at the given order (2 or 3). Damped tensors add the
/// `c R S` term to X and `alpha R R + beta S S` to Y when present and
/// `damped` is set.
pub fn reconstruct(
    tensors: &MappingTensors,
    spectrum: &Spectrum,
    state: &NormalState,
    order: u8,
    damped: bool,
    rule: VelocityRule,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = tensors.n_masters();
    if state.r.len() != n || state.s.len() != n {
        return Err(Error::Validation(format!(
            "normal state has {} coordinates, expected {n}",
            state.r.len()
        )));
    }
    if order != 2 && order != 3 {
        return Err(Error::Validation(format!("mapping order must be 2 or 3, got {order}")));
    }
    let o3 = if order == 3 {
        Some(tensors.order3.as_ref().ok_or_else(|| {
            Error::Validation("order-3 reconstruction requires the cubic mapping tensors".into())
        })?)
    } else {
        None
    };
    let damping = if damped {
        Some(tensors.damping.as_ref().ok_or_else(|| {
            Error::Validation("damped reconstruction requires the damping tensors".into())
        })?)
    } else {
        None
    };

    let n_dof = spectrum.phis.nrows();
    let mut x = DVector::zeros(n_dof);
    let mut y = DVector::zeros(n_dof);
    let (r, s) = (&state.r, &state.s);

    for i in 0..n {
        let phi = spectrum.phi(tensors.masters[i]);
        x += phi * r[i];
        y += phi * s[i];
    }
    for i in 0..n {
        for j in 0..n {
            x += &tensors.a[&(i, j)] * (r[i] * r[j]);
            x += &tensors.b[&(i, j)] * (s[i] * s[j]);
            if let Some(d) = damping {
                x += &d.c[&(i, j)] * (r[i] * s[j]);
            }
        }
    }
    if let Some(o3) = o3 {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    x += &o3.r[&(i, j, k)] * (r[i] * r[j] * r[k]);
                    x += &o3.u[&(i, j, k)] * (r[i] * s[j] * s[k]);
                }
            }
        }
    }

    match rule {
        VelocityRule::FromMapping => {
            for i in 0..n {
                for j in 0..n {
                    y += &tensors.gamma[&(i, j)] * (r[i] * s[j]);
                    if let Some(d) = damping {
                        y += &d.alpha[&(i, j)] * (r[i] * r[j]);
                        y += &d.beta[&(i, j)] * (s[i] * s[j]);
                    }
                }
            }
            if let Some(o3) = o3 {
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            y += &o3.mu[&(i, j, k)] * (s[i] * s[j] * s[k]);
                            y += &o3.nu[&(i, j, k)] * (s[i] * r[j] * r[k]);
                        }
                    }
                }
            }
        }
        VelocityRule::FromDisplacementRate => {
            // d/dt of the displacement mapping with Sdot_i = -w_i^2 R_i.
            let w2 = |i: usize| tensors.omegas[i] * tensors.omegas[i];
            for i in 0..n {
                for j in 0..n {
                    y += &tensors.a[&(i, j)] * (s[i] * r[j] + r[i] * s[j]);
                    y -= &tensors.b[&(i, j)] * (w2(i) * r[i] * s[j] + w2(j) * s[i] * r[j]);
                    if let Some(d) = damping {
                        y += &d.c[&(i, j)] * (s[i] * s[j] - w2(j) * r[i] * r[j]);
                    }
                }
            }
            if let Some(o3) = o3 {
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            y += &o3.r[&(i, j, k)]
                                * (s[i] * r[j] * r[k] + r[i] * s[j] * r[k] + r[i] * r[j] * s[k]);
                            y += &o3.u[&(i, j, k)]
                                * (s[i] * s[j] * s[k]
                                    - w2(j) * r[i] * r[j] * s[k]
                                    - w2(k) * r[i] * s[j] * r[k]);
                        }
                    }
                }
            }
        }
    }
    Ok((x, y))
}
