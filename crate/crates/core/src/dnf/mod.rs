//! Direct computation of the normal-form mapping tensors from the physical
//! operators: quadratic and cubic manifold corrections, trivial/declared
//! resonance handling through bordered systems, and the light-damping
//! extension.

mod compute;
pub mod resonance;
pub mod solver;

pub use compute::Dnf;
pub use resonance::{
    detect_resonances, PairCombo, ResonanceSet, SecondOrderResonance, ThirdOrderResonance,
    DEFAULT_RES_TOL,
};
pub use solver::SigmaSolver;

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::model::DampingSpec;

/// Where an uncancellable force projection `P^s` came from.
#[derive(Debug, Clone, PartialEq)]
pub enum ResidualSource {
    /// Second-order solve (`Zs` for `Sum`, `Zd` for `Diff`) of a master pair.
    Pair { i: usize, j: usize, combo: PairCombo },
    /// Cubic solve of a master triple, combination `m` in `0..4`.
    Triple { i: usize, j: usize, k: usize, combo: usize },
    /// Damping follow-up solve (`Zss`/`Zdd`) of a master pair.
    DampingPair { i: usize, j: usize, combo: PairCombo },
}

/// One retained reduced-dynamics force from a bordered solve.
#[derive(Debug, Clone)]
pub struct ResidualRecord {
    pub source: ResidualSource,
    /// Global mode whose equation keeps the monomial.
    pub mode: usize,
    /// Projection value `P^s = phi_s^T P`.
    pub value: f64,
}

/// Cubic force tensors `A_ijk = 2 G(phi_i, a_jk)`, `B_ijk = 2 G(phi_i, b_jk)`
/// (physical-basis vectors, homogeneous to forces).
#[derive(Debug, Clone)]
pub struct AbForce {
    pub a_bar: BTreeMap<(usize, usize, usize), DVector<f64>>,
    pub b_bar: BTreeMap<(usize, usize, usize), DVector<f64>>,
    /// `nonlinear_force` evaluations spent on the `2 G(phi, .)` sweeps.
    pub evaluations: u64,
}

/// Third-order mapping vectors over ordered master triples.
#[derive(Debug, Clone)]
pub struct Order3 {
    pub r: BTreeMap<(usize, usize, usize), DVector<f64>>,
    pub u: BTreeMap<(usize, usize, usize), DVector<f64>>,
    pub mu: BTreeMap<(usize, usize, usize), DVector<f64>>,
    pub nu: BTreeMap<(usize, usize, usize), DVector<f64>>,
    /// Solved displacement vectors keyed by canonical (sorted) triple and
    /// combination index.
    pub z: BTreeMap<((usize, usize, usize), usize), DVector<f64>>,
}

/// Damping mapping vectors over ordered master pairs.
#[derive(Debug, Clone)]
pub struct DampingTensors {
    pub spec: DampingSpec,
    pub c: BTreeMap<(usize, usize), DVector<f64>>,
    pub alpha: BTreeMap<(usize, usize), DVector<f64>>,
    pub beta: BTreeMap<(usize, usize), DVector<f64>>,
    pub z_ss: BTreeMap<(usize, usize), DVector<f64>>,
    pub z_dd: BTreeMap<(usize, usize), DVector<f64>>,
}

/// All direct-normal-form mapping vectors for one master set.
///
/// Pair and triple keys are positions into `masters`; storage uses full
/// ordered index tuples, with the symmetries exploited only at generation
/// time.
#[derive(Debug, Clone)]
pub struct MappingTensors {
    /// Global mode indices of the masters.
    pub masters: Vec<usize>,
    /// Master eigenfrequencies (rad/s).
    pub omegas: Vec<f64>,
    pub a: BTreeMap<(usize, usize), DVector<f64>>,
    pub b: BTreeMap<(usize, usize), DVector<f64>>,
    pub gamma: BTreeMap<(usize, usize), DVector<f64>>,
    pub z_s: BTreeMap<(usize, usize), DVector<f64>>,
    pub z_d: BTreeMap<(usize, usize), DVector<f64>>,
    pub ab_force: Option<AbForce>,
    pub order3: Option<Order3>,
    pub damping: Option<DampingTensors>,
    pub residuals: Vec<ResidualRecord>,
}

impl MappingTensors {
    pub fn n_masters(&self) -> usize {
        self.masters.len()
    }

    pub fn a(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.a[&(i, j)]
    }

    pub fn b(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.b[&(i, j)]
    }

    pub fn gamma(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.gamma[&(i, j)]
    }
}
