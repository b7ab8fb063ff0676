//! Tensor generation: second order, cubic force tensors, third order with
//! trivial-resonance augmentation, and the Rayleigh-damping extension.

use nalgebra::DVector;

use crate::dnf::resonance::{sigma3, PairCombo, ResonanceSet};
use crate::dnf::solver::SigmaSolver;
use crate::dnf::{
    AbForce, DampingTensors, MappingTensors, Order3, ResidualRecord, ResidualSource,
};
use crate::eigen::Spectrum;
use crate::error::{Error, Result};
use crate::model::{DampingSpec, StructuralModel};
use crate::step::{quadratic_force, StepTensors};

/// Sign patterns scaling `(wj wk B_ijk, wk wi B_jki, wi wj B_kij)` in the
/// four cubic force combinations.
const P_SIGNS: [[f64; 3]; 4] = [
    [-1.0, -1.0, -1.0],
    [-1.0, 1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, -1.0],
];

/// One direct-normal-form computation: model, spectrum, master selection and
/// resonance bookkeeping, sharing a factorization cache across stages.
pub struct Dnf<'a> {
    pub model: &'a StructuralModel,
    pub spectrum: &'a Spectrum,
    /// Master positions map through this list to global mode indices.
    pub masters: Vec<usize>,
    pub resonances: ResonanceSet,
    pub solver: SigmaSolver<'a>,
}

impl<'a> Dnf<'a> {
    pub fn new(
        model: &'a StructuralModel,
        spectrum: &'a Spectrum,
        masters: &[usize],
        resonances: ResonanceSet,
    ) -> Result<Self> {
        for &m in masters {
            if m >= spectrum.n_computed() {
                return Err(Error::Validation(format!(
                    "master mode {m} is outside the {} computed modes",
                    spectrum.n_computed()
                )));
            }
        }
        let tol = resonances.tol;
        Ok(Self {
            model,
            spectrum,
            masters: masters.to_vec(),
            resonances,
            solver: SigmaSolver::new(model, spectrum, tol),
        })
    }

    /// Detects resonances at tolerance `tol` and builds the context.
    pub fn detect(
        model: &'a StructuralModel,
        spectrum: &'a Spectrum,
        masters: &[usize],
        tol: f64,
    ) -> Result<Self> {
        let resonances = crate::dnf::resonance::detect_resonances(spectrum, masters, tol)?;
        Self::new(model, spectrum, masters, resonances)
    }

    fn omega(&self, pos: usize) -> f64 {
        self.spectrum.omegas[self.masters[pos]]
    }

    /// Second-order mapping vectors from the two shifted solves per pair:
    /// `Zs` at `wi + wj`, `Zd` at `-wi + wj`, both with rhs `G(phi_i, phi_j)`;
    /// then `a = (Zd + Zs)/2`, `b = (Zd - Zs)/(2 wi wj)` and the two gamma
    /// combinations.
    pub fn second_order_tensors(&self, step: &StepTensors) -> Result<MappingTensors> {
        let n = self.masters.len();
        let mut t = MappingTensors {
            masters: self.masters.clone(),
            omegas: (0..n).map(|p| self.omega(p)).collect(),
            a: Default::default(),
            b: Default::default(),
            gamma: Default::default(),
            z_s: Default::default(),
            z_d: Default::default(),
            ab_force: None,
            order3: None,
            damping: None,
            residuals: Vec::new(),
        };
        for i in 0..n {
            for j in i..n {
                let (wi, wj) = (self.omega(i), self.omega(j));
                let g = step.g(i, j);
                let flags = self.resonances.pair_flags(i, j);
                let (zs, res_s) = self.solver.solve(wi + wj, g, &flags)?;
                for (&s, &v) in flags.iter().zip(res_s.iter()) {
                    t.residuals.push(ResidualRecord {
                        source: ResidualSource::Pair { i, j, combo: PairCombo::Sum },
                        mode: s,
                        value: v,
                    });
                }
                let (zd, res_d) = self.solver.solve(-wi + wj, g, &flags)?;
                for (&s, &v) in flags.iter().zip(res_d.iter()) {
                    t.residuals.push(ResidualRecord {
                        source: ResidualSource::Pair { i, j, combo: PairCombo::Diff },
                        mode: s,
                        value: v,
                    });
                }
                let a = (&zd + &zs) * 0.5;
                let b = (&zd - &zs) / (2.0 * wi * wj);
                let gamma_ij = &zd * ((wj - wi) / wj) + &zs * ((wj + wi) / wj);
                let gamma_ji = &zd * ((wi - wj) / wi) + &zs * ((wi + wj) / wi);
                t.a.insert((i, j), a.clone());
                t.b.insert((i, j), b.clone());
                t.gamma.insert((i, j), gamma_ij);
                t.z_s.insert((i, j), zs.clone());
                t.z_d.insert((i, j), zd.clone());
                if i != j {
                    t.a.insert((j, i), a);
                    t.b.insert((j, i), b);
                    t.gamma.insert((j, i), gamma_ji);
                    t.z_s.insert((j, i), zs);
                    t.z_d.insert((j, i), zd);
                } else {
                    debug_assert_eq!(
                        t.gamma[&(i, i)],
                        &zd * 0.0 + &zs * 2.0,
                        "gamma_ii reduces to 2 Zs"
                    );
                }
            }
        }
        Ok(t)
    }

    /// Cubic force tensors by reapplying the quadratic extraction to the
    /// mapping vectors: `A_ijk = 2 G(phi_i, a_jk)`, `B_ijk = 2 G(phi_i, b_jk)`.
    pub fn third_order_force_tensors(&self, t: &mut MappingTensors) -> Result<()> {
        let n = self.masters.len();
        let before = self.model.evaluations();
        let mut ab = AbForce {
            a_bar: Default::default(),
            b_bar: Default::default(),
            evaluations: 0,
        };
        for i in 0..n {
            let phi = self.spectrum.phi(self.masters[i]).clone_owned();
            for j in 0..n {
                for k in j..n {
                    let abar = quadratic_force(self.model, &phi, &t.a[&(j, k)])? * 2.0;
                    let bbar = quadratic_force(self.model, &phi, &t.b[&(j, k)])? * 2.0;
                    ab.a_bar.insert((i, j, k), abar.clone());
                    ab.b_bar.insert((i, j, k), bbar.clone());
                    if j != k {
                        ab.a_bar.insert((i, k, j), abar);
                        ab.b_bar.insert((i, k, j), bbar);
                    }
                }
            }
        }
        ab.evaluations = self.model.evaluations() - before;
        t.ab_force = Some(ab);
        Ok(())
    }

    /// Third-order mapping vectors. For each canonical triple the four force
    /// combinations are solved at their frequency shifts, with every flagged
    /// combination routed through the bordered system; permutations follow
    /// from the Z-vector symmetries.
    ///
    /// Refuses to run when a second-order internal resonance is present: the
    /// quadratic tensors then feed wrong cubic corrections, and only the
    /// second-order reduced dynamics is trustworthy.
    pub fn third_order_tensors(&self, t: &mut MappingTensors, step: &StepTensors) -> Result<()> {
        if self.resonances.has_second_order() {
            return Err(Error::ResonancePolicy(
                "a second-order internal resonance is declared or detected; the \
                 third-order normal form is not valid in this configuration - build \
                 the ROM from the second-order tensors instead"
                    .into(),
            ));
        }
        let ab = t.ab_force.as_ref().ok_or_else(|| {
            Error::Validation("third_order_tensors requires the cubic force tensors".into())
        })?;
        let n = self.masters.len();
        let mut o3 = Order3 {
            r: Default::default(),
            u: Default::default(),
            mu: Default::default(),
            nu: Default::default(),
            z: Default::default(),
        };
        // Solve the four combinations on canonical (sorted) triples only.
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    let (wi, wj, wk) = (self.omega(i), self.omega(j), self.omega(k));
                    let s_vec = &ab.a_bar[&(i, j, k)]
                        + &ab.a_bar[&(j, k, i)]
                        + &ab.a_bar[&(k, i, j)]
                        + step.h(i, j, k) * 3.0;
                    let flags = self.resonances.triple_flags(i, j, k);
                    for m in 0..4 {
                        let signs = P_SIGNS[m];
                        let mut p = s_vec.clone();
                        p += &ab.b_bar[&(i, j, k)] * (signs[0] * wj * wk);
                        p += &ab.b_bar[&(j, k, i)] * (signs[1] * wk * wi);
                        p += &ab.b_bar[&(k, i, j)] * (signs[2] * wi * wj);
                        let (z, res) = self.solver.solve(sigma3(m, wi, wj, wk), &p, &flags)?;
                        for (&s, &v) in flags.iter().zip(res.iter()) {
                            t.residuals.push(ResidualRecord {
                                source: ResidualSource::Triple { i, j, k, combo: m },
                                mode: s,
                                value: v,
                            });
                        }
                        o3.z.insert(((i, j, k), m), z);
                    }
                }
            }
        }
        // Assemble r, u, mu, nu for every ordered triple from the canonical
        // solves; the minus sign follows its index through permutations.
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (wi, wj, wk) = (self.omega(i), self.omega(j), self.omega(k));
                    let z = |m: usize| -> &DVector<f64> {
                        let (key, mc) = canonical_combo(i, j, k, m);
                        &o3.z[&(key, mc)]
                    };
                    let (z0, z1, z2, z3) = (z(0), z(1), z(2), z(3));
                    let s0 = sigma3(0, wi, wj, wk);
                    let s1 = sigma3(1, wi, wj, wk);
                    let s2 = sigma3(2, wi, wj, wk);
                    let s3 = sigma3(3, wi, wj, wk);
                    let r = (z0 + z1 + z2 + z3) / 12.0;
                    let u = (-z0 - z1 + z2 + z3) / (4.0 * wj * wk);
                    let mu = (-z0 * s0 + z1 * s1 + z2 * s2 + z3 * s3) / (12.0 * wi * wj * wk);
                    let nu = (z0 * s0 - z1 * s1 + z2 * s2 + z3 * s3) / (4.0 * wi);
                    o3.r.insert((i, j, k), r);
                    o3.u.insert((i, j, k), u);
                    o3.mu.insert((i, j, k), mu);
                    o3.nu.insert((i, j, k), nu);
                }
            }
        }
        t.order3 = Some(o3);
        Ok(())
    }

    /// Light-damping tensors for Rayleigh damping. `Zss`/`Zdd` reuse the
    /// second-order shifts with rhs `M Zs` / `M Zd`, then
    ///
    /// ```text
    /// c_ij = (zm + 3 wi^2 zk) b_ij - 2 zk a_ij
    ///      + (-zm + 2 wi^2 zk) (Zss + Zdd)
    ///      + (-zm + 2 wj^2 zk) (wi/wj) (Zss - Zdd)
    /// alpha_ij = -wi^2 c_ij
    /// beta_ij  = c_ij - (zeta_i + zeta_j) b_ij
    /// ```
    pub fn damping_tensors(&self, t: &mut MappingTensors, spec: DampingSpec) -> Result<()> {
        let n = self.masters.len();
        let mut d = DampingTensors {
            spec,
            c: Default::default(),
            alpha: Default::default(),
            beta: Default::default(),
            z_ss: Default::default(),
            z_dd: Default::default(),
        };
        for i in 0..n {
            for j in i..n {
                let (wi, wj) = (self.omega(i), self.omega(j));
                let flags = self.resonances.pair_flags(i, j);
                let rhs_s = &self.model.mass * &t.z_s[&(i, j)];
                let (zss, res_s) = self.solver.solve(wi + wj, &rhs_s, &flags)?;
                for (&s, &v) in flags.iter().zip(res_s.iter()) {
                    t.residuals.push(ResidualRecord {
                        source: ResidualSource::DampingPair { i, j, combo: PairCombo::Sum },
                        mode: s,
                        value: v,
                    });
                }
                let rhs_d = &self.model.mass * &t.z_d[&(i, j)];
                let (zdd, res_d) = self.solver.solve(-wi + wj, &rhs_d, &flags)?;
                for (&s, &v) in flags.iter().zip(res_d.iter()) {
                    t.residuals.push(ResidualRecord {
                        source: ResidualSource::DampingPair { i, j, combo: PairCombo::Diff },
                        mode: s,
                        value: v,
                    });
                }
                d.z_ss.insert((i, j), zss.clone());
                d.z_dd.insert((i, j), zdd.clone());
                if i != j {
                    d.z_ss.insert((j, i), zss);
                    d.z_dd.insert((j, i), zdd);
                }
            }
        }
        let (zm, zk) = (spec.zeta_m, spec.zeta_k);
        for i in 0..n {
            for j in 0..n {
                let (wi, wj) = (self.omega(i), self.omega(j));
                let zss = &d.z_ss[&(i, j)];
                let zdd = &d.z_dd[&(i, j)];
                let sum = zss + zdd;
                let diff = zss - zdd;
                let c = &t.b[&(i, j)] * (zm + 3.0 * wi * wi * zk) - &t.a[&(i, j)] * (2.0 * zk)
                    + &sum * (-zm + 2.0 * wi * wi * zk)
                    + &diff * ((-zm + 2.0 * wj * wj * zk) * (wi / wj));
                let alpha = &c * (-wi * wi);
                let beta = &c - &t.b[&(i, j)] * (spec.zeta(wi) + spec.zeta(wj));
                d.c.insert((i, j), c);
                d.alpha.insert((i, j), alpha);
                d.beta.insert((i, j), beta);
            }
        }
        t.damping = Some(d);
        Ok(())
    }

    /// Static modal derivative `theta_ij = -1/2 K^-1 G(phi_i, phi_j)`
    /// (global mode indices); coincides with `Zd_ii / 2` for equal indices.
    pub fn static_modal_derivative(&self, i: usize, j: usize) -> Result<DVector<f64>> {
        let phi_i = self.spectrum.phi(i).clone_owned();
        let phi_j = self.spectrum.phi(j).clone_owned();
        let g = quadratic_force(self.model, &phi_i, &phi_j)?;
        // (0 M - K) z = g gives z = -K^-1 g.
        let (z, _) = self.solver.solve(0.0, &g, &[])?;
        Ok(z * 0.5)
    }
}

/// Maps an ordered triple and combination index onto the canonical sorted
/// triple: the minus sign of the frequency combination travels with its
/// index. Returns the sorted key and the combination index in it.
fn canonical_combo(
    i: usize,
    j: usize,
    k: usize,
    m: usize,
) -> ((usize, usize, usize), usize) {
    let mut slots = [(i, 0usize), (j, 1), (k, 2)];
    slots.sort_by_key(|&(v, slot)| (v, slot));
    let key = (slots[0].0, slots[1].0, slots[2].0);
    if m == 0 {
        return (key, 0);
    }
    let minus_slot = m - 1;
    let pos = slots.iter().position(|&(_, s)| s == minus_slot).unwrap();
    (key, pos + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::solve_modes;
    use crate::model::beam::{assemble_vk_beam, BeamConfig};
    use crate::model::file::parse_polynomial_model;
    use crate::step::step_tensors;
    use approx::assert_relative_eq;

    /// Direct-vs-modal equivalence on random dense systems: the central
    /// correctness check of the whole tensor pipeline.
    #[test]
    fn direct_tensors_match_modal_oracle() {
        let report = crate::oracle::run_verification(41, 3, 6, 3).unwrap();
        assert!(report.max_o2 <= 1e-8, "order-2 deviation {}", report.max_o2);
        assert!(report.max_o3 <= 1e-8, "order-3 deviation {}", report.max_o3);
        assert!(report.max_forms <= 1e-10, "form deviation {}", report.max_forms);
    }

    /// Zd_ii = 2 theta_ii on the beam, and the static solve identity.
    #[test]
    fn static_modal_derivative_identity() {
        let model = assemble_vk_beam(&BeamConfig::reference(8)).unwrap();
        let spectrum = solve_modes(&model, 4).unwrap();
        let masters = [0usize, 1];
        let step = step_tensors(&model, &spectrum, &masters).unwrap();
        let dnf = Dnf::detect(&model, &spectrum, &masters, 1e-3).unwrap();
        let t = dnf.second_order_tensors(&step).unwrap();
        for (pos, &m) in masters.iter().enumerate() {
            let theta = dnf.static_modal_derivative(m, m).unwrap();
            let zd = &t.z_d[&(pos, pos)];
            let diff = (zd - &theta * 2.0).norm();
            assert!(diff <= 1e-9 * zd.norm(), "mode {m}: {diff:e}");
        }
    }

    /// gamma is a linear combination of the stored Zs, Zd (no extra solves),
    /// and mu/nu recombine from the stored Z0..Z3.
    #[test]
    fn velocity_tensors_recombine_from_stored_z() {
        let rs = crate::oracle::random_system(7, 5).unwrap();
        let masters = [0usize, 1];
        let step = step_tensors(&rs.model, &rs.spectrum, &masters).unwrap();
        let dnf = Dnf::detect(&rs.model, &rs.spectrum, &masters, 1e-4).unwrap();
        let mut t = dnf.second_order_tensors(&step).unwrap();
        dnf.third_order_force_tensors(&mut t).unwrap();
        dnf.third_order_tensors(&mut t, &step).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let (wi, wj) = (t.omegas[i], t.omegas[j]);
                let re = &t.z_d[&(i, j)] * ((wj - wi) / wj) + &t.z_s[&(i, j)] * ((wj + wi) / wj);
                assert_eq!(&re, &t.gamma[&(i, j)]);
                for k in 0..2 {
                    let o3 = t.order3.as_ref().unwrap();
                    let z = |m: usize| {
                        let (key, mc) = canonical_combo(i, j, k, m);
                        o3.z[&(key, mc)].clone()
                    };
                    let (wk, s0) = (t.omegas[k], sigma3(0, wi, wj, t.omegas[k]));
                    let s1 = sigma3(1, wi, wj, wk);
                    let s2 = sigma3(2, wi, wj, wk);
                    let s3 = sigma3(3, wi, wj, wk);
                    let mu = (-z(0) * s0 + z(1) * s1 + z(2) * s2 + z(3) * s3)
                        / (12.0 * wi * wj * wk);
                    assert_eq!(&mu, &o3.mu[&(i, j, k)]);
                }
            }
        }
    }

    /// Permutation symmetry of the Z vectors checked against an independent
    /// direct solve of a permuted combination.
    #[test]
    fn z_symmetry_against_direct_solve() {
        let rs = crate::oracle::random_system(11, 5).unwrap();
        let masters = [0usize, 1, 2];
        let step = step_tensors(&rs.model, &rs.spectrum, &masters).unwrap();
        let dnf = Dnf::detect(&rs.model, &rs.spectrum, &masters, 1e-4).unwrap();
        let mut t = dnf.second_order_tensors(&step).unwrap();
        dnf.third_order_force_tensors(&mut t).unwrap();
        dnf.third_order_tensors(&mut t, &step).unwrap();
        let ab = t.ab_force.as_ref().unwrap();
        // Z2_jik solved directly must equal the stored canonical Z1_ijk.
        let (i, j, k) = (0usize, 1usize, 2usize);
        let (wi, wj, wk) = (t.omegas[i], t.omegas[j], t.omegas[k]);
        let s_vec = &ab.a_bar[&(j, i, k)]
            + &ab.a_bar[&(i, k, j)]
            + &ab.a_bar[&(k, j, i)]
            + step.h(j, i, k) * 3.0;
        let p2 = s_vec
            + &ab.b_bar[&(j, i, k)] * (1.0 * wi * wk)
            + &ab.b_bar[&(i, k, j)] * (-1.0 * wk * wj)
            + &ab.b_bar[&(k, j, i)] * (1.0 * wj * wi);
        let sigma = sigma3(2, wj, wi, wk);
        let (z_direct, _) = dnf.solver.solve(sigma, &p2, &[]).unwrap();
        let stored = &t.order3.as_ref().unwrap().z[&((i, j, k), 1)];
        let rel = (&z_direct - stored).norm() / stored.norm();
        assert!(rel <= 1e-10, "Z symmetry violated: {rel:e}");
    }

    /// With slaves an order of magnitude stiffer than the master, `a_ii`
    /// approaches `Zd_ii` (twice the static modal derivative) and the
    /// velocity correction `b_ii` becomes negligible.
    #[test]
    fn slow_fast_degeneration() {
        let model = parse_polynomial_model(
            "[dimensions]\n3\n[mass]\n0 0 1\n1 1 1\n2 2 1\n\
             [stiffness]\n0 0 1\n1 1 144\n2 2 225\n\
             [quadratic]\n1 0 0 0.8\n2 0 0 -0.5\n0 0 1 1.6\n0 0 2 -1.0\n",
        )
        .unwrap();
        let spectrum = solve_modes(&model, 3).unwrap();
        let masters = [0usize];
        let step = step_tensors(&model, &spectrum, &masters).unwrap();
        let dnf = Dnf::detect(&model, &spectrum, &masters, 1e-4).unwrap();
        let t = dnf.second_order_tensors(&step).unwrap();
        let a = &t.a[&(0, 0)];
        let zd = &t.z_d[&(0, 0)];
        let w0 = t.omegas[0];
        let m_norm = |v: &nalgebra::DVector<f64>| dnf.model.m_norm(v);
        assert!(m_norm(&(a - zd)) <= 0.02 * m_norm(a));
        assert!(w0 * w0 * m_norm(&t.b[&(0, 0)]) <= 0.05 * m_norm(a));
    }

    /// Scaling structure: with only quadratic forces scaled by eps the
    /// order-2 tensors scale linearly and the cubic tensors quadratically;
    /// a pure cubic force enters the cubic tensors linearly.
    #[test]
    fn mapping_order_consistency() {
        let build = |eps: f64, with_h: bool| -> (f64, f64) {
            let text = format!(
                "[dimensions]\n2\n[mass]\n0 0 1\n1 1 1\n[stiffness]\n0 0 1\n1 1 7.3\n\
                 [quadratic]\n0 0 1 {g}\n1 0 0 {gh}\n1 0 1 {gs}\n{cubic}",
                g = 0.4 * eps,
                gh = 0.2 * eps,
                gs = 0.5 * eps,
                cubic = if with_h {
                    // On the slave equation so the linear-in-h path is not
                    // pinned out of the mapping by the trivial augmentation.
                    format!("[cubic]\n1 0 0 0 {}\n", 0.3 * eps)
                } else {
                    String::new()
                }
            );
            let model = parse_polynomial_model(&text).unwrap();
            let spectrum = solve_modes(&model, 2).unwrap();
            let masters = [0usize];
            let step = step_tensors(&model, &spectrum, &masters).unwrap();
            let dnf = Dnf::detect(&model, &spectrum, &masters, 1e-4).unwrap();
            let mut t = dnf.second_order_tensors(&step).unwrap();
            dnf.third_order_force_tensors(&mut t).unwrap();
            dnf.third_order_tensors(&mut t, &step).unwrap();
            let o3 = t.order3.as_ref().unwrap();
            (t.a[&(0, 0)].norm(), o3.r[&(0, 0, 0)].norm())
        };
        // Quadratic-only model: a ~ eps, r ~ eps^2.
        let (a2, r2) = build(1e-2, false);
        let (a4, r4) = build(1e-4, false);
        assert_relative_eq!(a2 / a4, 1e2, max_relative = 1e-6);
        assert_relative_eq!(r2 / r4, 1e4, max_relative = 1e-6);
        // With a cubic term the eps-linear h contribution dominates r.
        let (_, rh2) = build(1e-2, true);
        let (_, rh4) = build(1e-4, true);
        assert_relative_eq!(rh2 / rh4, 1e2, max_relative = 1e-2);
    }

    /// Second-order resonance refuses the third-order build.
    #[test]
    fn one_to_two_resonance_blocks_third_order() {
        let model = parse_polynomial_model(
            "[dimensions]\n2\n[mass]\n0 0 1\n1 1 1\n[stiffness]\n0 0 1\n1 1 4\n\
             [quadratic]\n1 0 0 0.3\n0 0 1 0.6\n",
        )
        .unwrap();
        let spectrum = solve_modes(&model, 2).unwrap();
        let masters = [0usize, 1];
        let step = step_tensors(&model, &spectrum, &masters).unwrap();
        let dnf = Dnf::detect(&model, &spectrum, &masters, 1e-3).unwrap();
        assert!(dnf.resonances.has_second_order());
        let mut t = dnf.second_order_tensors(&step).unwrap();
        dnf.third_order_force_tensors(&mut t).unwrap();
        let err = dnf.third_order_tensors(&mut t, &step).unwrap_err();
        assert!(matches!(err, Error::ResonancePolicy(_)));
        assert_eq!(err.exit_code(), 4);
    }

    /// Conservative limit of the damping tensors.
    #[test]
    fn zero_damping_gives_zero_tensors() {
        let rs = crate::oracle::random_system(3, 4).unwrap();
        let masters = [0usize, 1];
        let step = step_tensors(&rs.model, &rs.spectrum, &masters).unwrap();
        let dnf = Dnf::detect(&rs.model, &rs.spectrum, &masters, 1e-4).unwrap();
        let mut t = dnf.second_order_tensors(&step).unwrap();
        dnf.damping_tensors(&mut t, DampingSpec::default()).unwrap();
        let d = t.damping.as_ref().unwrap();
        for v in d.c.values().chain(d.alpha.values()).chain(d.beta.values()) {
            assert_eq!(v.amax(), 0.0);
        }
    }

    /// Hand evaluation of the damping tensor on a modal 2-dof model: in
    /// modal coordinates every solve is a scalar division, so c can be
    /// rebuilt directly from the formula.
    #[test]
    fn damping_tensor_matches_modal_hand_evaluation() {
        let model = parse_polynomial_model(
            "[dimensions]\n2\n[mass]\n0 0 1\n1 1 1\n[stiffness]\n0 0 1\n1 1 10.24\n\
             [quadratic]\n0 0 0 0.7\n1 0 0 0.4\n0 0 1 0.8\n1 1 1 -0.3\n0 1 1 -0.6\n1 0 1 -1.2\n",
        )
        .unwrap();
        let spectrum = solve_modes(&model, 2).unwrap();
        let masters = [0usize, 1];
        let step = step_tensors(&model, &spectrum, &masters).unwrap();
        let dnf = Dnf::detect(&model, &spectrum, &masters, 1e-4).unwrap();
        let mut t = dnf.second_order_tensors(&step).unwrap();
        let spec = DampingSpec::new(0.13, 0.002).unwrap();
        dnf.damping_tensors(&mut t, spec).unwrap();

        // Modal hand path: phis are +-e_i on this diagonal model.
        let sys = crate::oracle::DenseModalSystem::from_model(&model, &spectrum).unwrap();
        let (zm, zk) = (spec.zeta_m, spec.zeta_k);
        for i in 0..2 {
            for j in 0..2 {
                let (wi, wj) = (spectrum.omegas[i], spectrum.omegas[j]);
                let mut c_hand = nalgebra::DVector::zeros(2);
                for s in 0..2 {
                    let ws2 = spectrum.omegas[s] * spectrum.omegas[s];
                    let ds = (wi + wj) * (wi + wj) - ws2;
                    let dd = (wi - wj) * (wi - wj) - ws2;
                    let g = sys.g_at(s, i, j);
                    let (zs, zd) = (g / ds, g / dd);
                    let (zss, zdd) = (zs / ds, zd / dd);
                    let a = 0.5 * (zd + zs);
                    let b = (zd - zs) / (2.0 * wi * wj);
                    c_hand[s] = (zm + 3.0 * wi * wi * zk) * b - 2.0 * zk * a
                        + (-zm + 2.0 * wi * wi * zk) * (zss + zdd)
                        + (-zm + 2.0 * wj * wj * zk) * (wi / wj) * (zss - zdd);
                }
                let c_phys = &spectrum.phis * c_hand;
                let d = t.damping.as_ref().unwrap();
                assert_relative_eq!(&d.c[&(i, j)], &c_phys, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn canonical_combo_matches_symmetry_table() {
        // Z1_ijk = Z2_jik = Z3_kji etc., checked on a strictly ordered triple.
        let (i, j, k) = (0usize, 1usize, 2usize);
        assert_eq!(canonical_combo(i, j, k, 1), ((0, 1, 2), 1));
        assert_eq!(canonical_combo(j, i, k, 2), ((0, 1, 2), 1));
        assert_eq!(canonical_combo(k, j, i, 3), ((0, 1, 2), 1));
        assert_eq!(canonical_combo(j, k, i, 3), ((0, 1, 2), 1));
        assert_eq!(canonical_combo(k, i, j, 2), ((0, 1, 2), 1));
        assert_eq!(canonical_combo(i, k, j, 1), ((0, 1, 2), 1));
        // Z0 is fully symmetric.
        assert_eq!(canonical_combo(k, i, j, 0), ((0, 1, 2), 0));
    }
}
