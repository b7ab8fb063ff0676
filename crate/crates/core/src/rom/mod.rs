//! Reduced-order dynamics as explicit monomial lists over the normal
//! coordinates `(R, S = Rdot)`, plus physical reconstruction through the
//! nonlinear mapping.
//!
//! Every variant the theory distinguishes is data, not code: the assembler
//! fills one accumulation map keyed by `(equation, R-exponents, S-exponents)`
//! so that toggling monomial sets (full second-order, trivially resonant
//! third-order, added internal-resonance monomials, damping terms) cannot
//! disturb shared coefficients.

pub mod archive;
pub mod reconstruct;

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::dnf::MappingTensors;
use crate::eigen::Spectrum;
use crate::error::{Error, Result};
use crate::model::{DampingSpec, StructuralModel};
use crate::step::{quadratic_force, StepTensors};

/// Master normal coordinates: displacements `R` and velocities `S`.
#[derive(Debug, Clone)]
pub struct NormalState {
    pub r: DVector<f64>,
    pub s: DVector<f64>,
}

impl NormalState {
    pub fn zero(n: usize) -> Self {
        Self { r: DVector::zeros(n), s: DVector::zeros(n) }
    }
}

/// Conservative monomial set of the reduced dynamics.
#[derive(Debug, Clone, PartialEq)]
pub enum ConservativeVariant {
    /// Second-order normal form: all cubic monomials kept (full triple sums).
    O2Full,
    /// Third-order normal form, no internal resonance: only the trivially
    /// resonant monomials stay.
    O3Trivial,
    /// Third-order plus declared resonant monomials; each entry is
    /// `(equation master position, index multiset)`.
    O3PlusResonant(Vec<(usize, [usize; 3])>),
}

/// Nonlinear damping treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DampingVariant {
    /// Conservative model.
    None,
    /// Linear modal damping only.
    LinearOnly,
    /// Linear damping plus all aggregate `C^r_ijk R_i R_j S_k` monomials.
    FullC,
    /// Linear damping plus only the self terms `C^p_ppp R_p^2 S_p`.
    SelfC,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RomVariant {
    pub conservative: ConservativeVariant,
    pub damping: DampingVariant,
}

impl RomVariant {
    pub fn o2(damping: DampingVariant) -> Self {
        Self { conservative: ConservativeVariant::O2Full, damping }
    }

    pub fn o3() -> Self {
        Self { conservative: ConservativeVariant::O3Trivial, damping: DampingVariant::None }
    }

    pub fn label(&self) -> String {
        let cons = match &self.conservative {
            ConservativeVariant::O2Full => "O2-full".to_string(),
            ConservativeVariant::O3Trivial => "O3-trivial".to_string(),
            ConservativeVariant::O3PlusResonant(set) => {
                format!("O3-plus-resonant({} monomial groups)", set.len())
            }
        };
        let damp = match self.damping {
            DampingVariant::None => "",
            DampingVariant::LinearOnly => ", linear damping",
            DampingVariant::FullC => ", damped (full C)",
            DampingVariant::SelfC => ", damped (self C)",
        };
        format!("{cons}{damp}")
    }
}

/// One reduced-dynamics monomial: contributes
/// `coeff * prod R_i^r_exp[i] * prod S_i^s_exp[i]` to equation `eq`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub eq: usize,
    pub r_exp: Vec<u8>,
    pub s_exp: Vec<u8>,
    pub coeff: f64,
}

/// Harmonic modal forcing `F_r cos(omega t)` on the master equations.
#[derive(Debug, Clone, PartialEq)]
pub struct RomForcing {
    /// Modal amplitude per master.
    pub amplitude: Vec<f64>,
    /// Placeholder forcing frequency (rad/s); continuation overrides it.
    pub omega: f64,
}

/// Assembled reduced dynamics
/// `Rddot_r + zeta_r Rdot_r + w_r^2 R_r + sum monomials = F_r cos(omega t)`.
#[derive(Debug, Clone)]
pub struct RomModel {
    /// Global mode indices of the masters.
    pub masters: Vec<usize>,
    pub omegas: Vec<f64>,
    /// Per-mode linear damping coefficient `zeta_m + zeta_k w_r^2`.
    pub linear_damping: Vec<f64>,
    pub monomials: Vec<Monomial>,
    pub variant: RomVariant,
    pub forcing: Option<RomForcing>,
}

impl RomModel {
    pub fn n_masters(&self) -> usize {
        self.masters.len()
    }

    /// Right-hand side accelerations at state and time:
    /// `Rddot_r = -w_r^2 R_r - zeta_r S_r - sum monomials + F_r cos(w t)`.
    pub fn rhs(&self, state: &NormalState, t: f64) -> DVector<f64> {
        let n = self.n_masters();
        assert_eq!(state.r.len(), n, "state size mismatch");
        let mut acc = DVector::zeros(n);
        for r in 0..n {
            acc[r] = -self.omegas[r] * self.omegas[r] * state.r[r]
                - self.linear_damping[r] * state.s[r];
        }
        for m in &self.monomials {
            let mut v = m.coeff;
            for i in 0..n {
                for _ in 0..m.r_exp[i] {
                    v *= state.r[i];
                }
                for _ in 0..m.s_exp[i] {
                    v *= state.s[i];
                }
            }
            acc[m.eq] -= v;
        }
        if let Some(f) = &self.forcing {
            for r in 0..n {
                acc[r] += f.amplitude[r] * (f.omega * t).cos();
            }
        }
        acc
    }

    /// Monomial coefficient by key, zero when absent.
    pub fn coeff(&self, eq: usize, r_exp: &[u8], s_exp: &[u8]) -> f64 {
        self.monomials
            .iter()
            .find(|m| m.eq == eq && m.r_exp == r_exp && m.s_exp == s_exp)
            .map_or(0.0, |m| m.coeff)
    }
}

/// Modal projections of the cubic force tensors onto one master equation.
struct Projections {
    /// `A^r_ijk = phi_r^T Abar_ijk` keyed by (r, i, j, k).
    a: BTreeMap<(usize, usize, usize, usize), f64>,
    b: BTreeMap<(usize, usize, usize, usize), f64>,
    h: BTreeMap<(usize, usize, usize, usize), f64>,
}

fn projections(
    spectrum: &Spectrum,
    step: &StepTensors,
    tensors: &MappingTensors,
) -> Result<Projections> {
    let ab = tensors.ab_force.as_ref().ok_or_else(|| {
        Error::Validation("ROM assembly requires the cubic force tensors (A, B)".into())
    })?;
    let n = tensors.n_masters();
    let mut p = Projections { a: BTreeMap::new(), b: BTreeMap::new(), h: BTreeMap::new() };
    for r in 0..n {
        let phi = spectrum.phi(tensors.masters[r]);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let key = (r, i, j, k);
                    p.a.insert(key, phi.dot(&ab.a_bar[&(i, j, k)]));
                    p.b.insert(key, phi.dot(&ab.b_bar[&(i, j, k)]));
                    p.h.insert(key, phi.dot(step.h(i, j, k)));
                }
            }
        }
    }
    Ok(p)
}

type MonomialKey = (usize, Vec<u8>, Vec<u8>);

fn add(map: &mut BTreeMap<MonomialKey, f64>, eq: usize, r_exp: Vec<u8>, s_exp: Vec<u8>, v: f64) {
    if v != 0.0 {
        *map.entry((eq, r_exp, s_exp)).or_insert(0.0) += v;
    }
}

fn r_monomial(n: usize, idx: &[usize]) -> Vec<u8> {
    let mut e = vec![0u8; n];
    for &i in idx {
        e[i] += 1;
    }
    e
}

/// Assembles the reduced dynamics for the requested variant.
///
/// `model` is needed only for the damped variants (the `C` coefficients
/// reapply the quadratic extraction to the damping mapping vectors).
pub fn assemble_rom(
    model: &StructuralModel,
    spectrum: &Spectrum,
    variant: RomVariant,
    step: &StepTensors,
    tensors: &MappingTensors,
    forcing: Option<RomForcing>,
) -> Result<RomModel> {
    let n = tensors.n_masters();
    if let Some(f) = &forcing {
        if f.amplitude.len() != n {
            return Err(Error::Validation(format!(
                "forcing amplitude count {} does not match {} masters",
                f.amplitude.len(),
                n
            )));
        }
    }
    let p = projections(spectrum, step, tensors)?;
    let mut map: BTreeMap<MonomialKey, f64> = BTreeMap::new();
    let zero = vec![0u8; n];

    match &variant.conservative {
        ConservativeVariant::O2Full => {
            for r in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let c = p.a[&(r, i, j, k)] + p.h[&(r, i, j, k)];
                            add(&mut map, r, r_monomial(n, &[i, j, k]), zero.clone(), c);
                            add(
                                &mut map,
                                r,
                                r_monomial(n, &[i]),
                                r_monomial(n, &[j, k]),
                                p.b[&(r, i, j, k)],
                            );
                        }
                    }
                }
            }
        }
        ConservativeVariant::O3Trivial | ConservativeVariant::O3PlusResonant(_) => {
            for r in 0..n {
                add(
                    &mut map,
                    r,
                    r_monomial(n, &[r, r, r]),
                    zero.clone(),
                    p.a[&(r, r, r, r)] + p.h[&(r, r, r, r)],
                );
                add(
                    &mut map,
                    r,
                    r_monomial(n, &[r]),
                    r_monomial(n, &[r, r]),
                    p.b[&(r, r, r, r)],
                );
                for j in 0..n {
                    if j == r {
                        continue;
                    }
                    let c = p.a[&(r, j, j, r)]
                        + p.a[&(r, j, r, j)]
                        + p.a[&(r, r, j, j)]
                        + 3.0 * p.h[&(r, r, j, j)];
                    add(&mut map, r, r_monomial(n, &[r, j, j]), zero.clone(), c);
                    add(
                        &mut map,
                        r,
                        r_monomial(n, &[r]),
                        r_monomial(n, &[j, j]),
                        p.b[&(r, r, j, j)],
                    );
                    add(
                        &mut map,
                        r,
                        r_monomial(n, &[j]),
                        r_monomial(n, &[r, j]),
                        p.b[&(r, j, j, r)] + p.b[&(r, j, r, j)],
                    );
                }
            }
            if let ConservativeVariant::O3PlusResonant(set) = &variant.conservative {
                for (eq, multiset) in set {
                    if *eq >= n {
                        return Err(Error::Validation(format!(
                            "resonant monomial targets master position {eq}, but only \
                             {n} masters exist; add the mode to the master set"
                        )));
                    }
                    inject_resonant(&mut map, &p, n, *eq, *multiset);
                }
            }
        }
    }

    let damping_spec: DampingSpec;
    match variant.damping {
        DampingVariant::None => damping_spec = DampingSpec::default(),
        _ => {
            let d = tensors.damping.as_ref().ok_or_else(|| {
                Error::Validation(
                    "damped ROM variant requires the damping mapping tensors".into(),
                )
            })?;
            damping_spec = d.spec;
            if matches!(variant.damping, DampingVariant::FullC | DampingVariant::SelfC) {
                for r in 0..n {
                    let phi = spectrum.phi(tensors.masters[r]).clone_owned();
                    for i in 0..n {
                        for j in 0..n {
                            for k in 0..n {
                                if variant.damping == DampingVariant::SelfC
                                    && !(r == i && r == j && r == k)
                                {
                                    continue;
                                }
                                // C^r_ijk = 2 phi_r^T G(phi_i, c_jk).
                                let phi_i = spectrum.phi(tensors.masters[i]).clone_owned();
                                let gvec = quadratic_force(model, &phi_i, &d.c[&(j, k)])?;
                                let c = 2.0 * phi.dot(&gvec);
                                add(
                                    &mut map,
                                    r,
                                    r_monomial(n, &[i, j]),
                                    r_monomial(n, &[k]),
                                    c,
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    let monomials = map
        .into_iter()
        .filter(|(_, v)| *v != 0.0)
        .map(|((eq, r_exp, s_exp), coeff)| Monomial { eq, r_exp, s_exp, coeff })
        .collect();
    Ok(RomModel {
        masters: tensors.masters.clone(),
        omegas: tensors.omegas.clone(),
        linear_damping: tensors.omegas.iter().map(|&w| damping_spec.zeta(w)).collect(),
        monomials,
        variant,
        forcing,
    })
}

/// Adds the monomial family of one declared resonance: the displacement
/// monomial over the index multiset with the summed `(A + h)` coefficient,
/// and every velocity companion `R_a S_b S_c` over the same multiset with its
/// `B` coefficients.
fn inject_resonant(
    map: &mut BTreeMap<MonomialKey, f64>,
    p: &Projections,
    n: usize,
    eq: usize,
    multiset: [usize; 3],
) {
    let [a, b, c] = multiset;
    let zero = vec![0u8; n];
    for (i, j, k) in crate::model::polynomial::distinct_perms3(a, b, c) {
        add(
            map,
            eq,
            r_monomial(n, &[i, j, k]),
            zero.clone(),
            p.a[&(eq, i, j, k)] + p.h[&(eq, i, j, k)],
        );
    }
    // Velocity companions: choose the displacement index, square the rest.
    let mut splits: Vec<(usize, usize, usize)> = Vec::new();
    for (i, j, k) in [(a, b, c), (b, a, c), (c, a, b)] {
        if !splits.contains(&(i, j, k)) {
            splits.push((i, j, k));
        }
    }
    for (i, j, k) in splits {
        let coeff = if j == k {
            p.b[&(eq, i, j, k)]
        } else {
            p.b[&(eq, i, j, k)] + p.b[&(eq, i, k, j)]
        };
        add(map, eq, r_monomial(n, &[i]), r_monomial(n, &[j, k]), coeff);
    }
}
