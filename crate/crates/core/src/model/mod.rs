//! Structural models with exactly quadratic + cubic internal forces.
//!
//! A [`StructuralModel`] carries the mass and stiffness operators on the free
//! dofs together with an exact polynomial evaluator of the nonlinear internal
//! force `G(X,X) + H(X,X,X)`. Two builders are provided: a von Karman
//! clamped-clamped beam assembler ([`beam::assemble_vk_beam`]) and a loader
//! for explicit polynomial oscillator models ([`file::load_polynomial_model`]).

pub mod beam;
pub mod file;
pub mod polynomial;

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::polynomial::PolynomialForce;

/// Physical meaning of a degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    /// Transverse displacement (bending direction).
    Transverse,
    /// Axial (membrane) displacement.
    Axial,
    /// Cross-section rotation.
    Rotation,
    /// Generic oscillator coordinate (polynomial models).
    Generic,
}

/// Label attached to each free dof: owning node and direction.
#[derive(Debug, Clone, Copy)]
pub struct DofLabel {
    pub node: usize,
    pub kind: DofKind,
}

/// Nonlinear internal-force evaluator. Both variants are exact polynomials
/// of degree two and three in the dofs.
#[derive(Debug, Clone)]
pub enum NonlinearForce {
    /// Explicit symmetric tensor contraction.
    Polynomial(PolynomialForce),
    /// Element-level quadrature of the von Karman beam kernels.
    VkBeam(beam::VkBeamForce),
}

impl NonlinearForce {
    fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            NonlinearForce::Polynomial(p) => p.eval(x),
            NonlinearForce::VkBeam(b) => b.eval(x),
        }
    }

    fn tangent(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self {
            NonlinearForce::Polynomial(p) => p.tangent(x),
            NonlinearForce::VkBeam(b) => b.tangent(x),
        }
    }
}

/// Rayleigh damping specification `C = zeta_m M + zeta_k K`.
///
/// The derived per-mode coefficients are `zeta_s = zeta_m + zeta_k w_s^2`
/// (on `2 xi_s w_s = zeta_s`).
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct DampingSpec {
    /// Mass-proportional coefficient (1/s).
    pub zeta_m: f64,
    /// Stiffness-proportional coefficient (s).
    pub zeta_k: f64,
}

impl DampingSpec {
    pub fn new(zeta_m: f64, zeta_k: f64) -> Result<Self> {
        if zeta_m < 0.0 || zeta_k < 0.0 {
            return Err(Error::Config(format!(
                "damping coefficients must be >= 0, got zeta_m={zeta_m}, zeta_k={zeta_k}"
            )));
        }
        Ok(Self { zeta_m, zeta_k })
    }

    /// Modal damping coefficient `zeta_s = zeta_m + zeta_k w_s^2`.
    pub fn zeta(&self, omega: f64) -> f64 {
        self.zeta_m + self.zeta_k * omega * omega
    }

    /// Modal damping ratio `xi_s = (zeta_m/w_s + zeta_k w_s)/2`.
    pub fn xi(&self, omega: f64) -> f64 {
        0.5 * (self.zeta_m / omega + self.zeta_k * omega)
    }

    pub fn is_zero(&self) -> bool {
        self.zeta_m == 0.0 && self.zeta_k == 0.0
    }

    /// Dense damping matrix on the free dofs.
    pub fn matrix(&self, model: &StructuralModel) -> DMatrix<f64> {
        &model.mass * self.zeta_m + &model.stiffness * self.zeta_k
    }
}

/// Finite-element model reduced to its free dofs.
///
/// Immutable after assembly; force evaluation is a pure function of the
/// state and safe to share across threads.
#[derive(Debug)]
pub struct StructuralModel {
    pub n_dof: usize,
    /// Symmetric positive-definite mass operator (free dofs).
    pub mass: DMatrix<f64>,
    /// Symmetric positive-definite stiffness operator (free dofs).
    pub stiffness: DMatrix<f64>,
    /// Quadratic + cubic internal force evaluator.
    pub force: NonlinearForce,
    /// Indices of the eliminated (constrained) dofs in the full numbering.
    pub constrained_dofs: Vec<usize>,
    /// Per-free-dof labels.
    pub labels: Vec<DofLabel>,
    evaluations: AtomicU64,
}

impl StructuralModel {
    pub fn new(
        mass: DMatrix<f64>,
        stiffness: DMatrix<f64>,
        force: NonlinearForce,
        constrained_dofs: Vec<usize>,
        labels: Vec<DofLabel>,
    ) -> Result<Self> {
        let n = mass.nrows();
        if stiffness.nrows() != n || stiffness.ncols() != n || mass.ncols() != n {
            return Err(Error::Validation(format!(
                "operator size mismatch: mass {}x{}, stiffness {}x{}",
                mass.nrows(),
                mass.ncols(),
                stiffness.nrows(),
                stiffness.ncols()
            )));
        }
        check_symmetric(&mass, "mass", 1e-12)?;
        check_symmetric(&stiffness, "stiffness", 1e-12)?;
        if labels.len() != n {
            return Err(Error::Validation(format!(
                "label count {} does not match n_dof {n}",
                labels.len()
            )));
        }
        Ok(Self {
            n_dof: n,
            mass,
            stiffness,
            force,
            constrained_dofs,
            labels,
            evaluations: AtomicU64::new(0),
        })
    }

    /// Nonlinear part of the internal force, `G(X,X) + H(X,X,X)`.
    pub fn nonlinear_force(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.n_dof {
            return Err(Error::Validation(format!(
                "state size {} does not match n_dof {}",
                x.len(),
                self.n_dof
            )));
        }
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        Ok(self.force.eval(x))
    }

    /// Full internal force `K X + G(X,X) + H(X,X,X)`.
    pub fn internal_force(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.stiffness * x + self.nonlinear_force(x)?)
    }

    /// Tangent of the nonlinear force part, `d(G+H)/dX`.
    pub fn nonlinear_tangent(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if x.len() != self.n_dof {
            return Err(Error::Validation(format!(
                "state size {} does not match n_dof {}",
                x.len(),
                self.n_dof
            )));
        }
        Ok(self.force.tangent(x))
    }

    /// Number of `nonlinear_force` evaluations since construction or the
    /// last [`Self::reset_evaluations`].
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn reset_evaluations(&self) {
        self.evaluations.store(0, Ordering::Relaxed);
    }

    /// M-inner product `a^T M b`.
    pub fn m_inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a.transpose() * &self.mass * b)[(0, 0)]
    }

    /// M-norm `sqrt(a^T M a)`.
    pub fn m_norm(&self, a: &DVector<f64>) -> f64 {
        self.m_inner(a, a).max(0.0).sqrt()
    }

    /// Free-dof indices whose label matches `kind`.
    pub fn dofs_of_kind(&self, kind: DofKind) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }
}

fn check_symmetric(m: &DMatrix<f64>, name: &str, rel_tol: f64) -> Result<()> {
    let scale = m.amax();
    if scale == 0.0 {
        return Ok(());
    }
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > rel_tol * scale {
                return Err(Error::Validation(format!(
                    "{name} matrix is not symmetric at ({i},{j}): {} vs {}",
                    m[(i, j)],
                    m[(j, i)]
                )));
            }
        }
    }
    Ok(())
}
