//! Harmonic balance with alternating frequency/time evaluation and pseudo
//! arc-length continuation, for the full structural model and for reduced
//! models alike: backbone curves of the conservative system and
//! frequency-response curves of the forced, damped one, with fold flags.
//!
//! Floquet stability is out of scope; every point carries
//! `stability_assessed = false`.

pub mod aft;
pub mod continuation;

pub use aft::{FullSystem, HarmonicGrid, HbmSystem, RomSystem};
pub use continuation::{backbone, continue_branch, frf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Harmonic forcing at a single drive point (or master coordinate).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForcingSpec {
    /// Free-dof index (full model) or master position (ROM).
    pub dof: usize,
    /// Amplitude (N, or modal force for ROMs).
    pub amplitude: f64,
}

impl ForcingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.amplitude < 0.0 {
            return Err(Error::Config(format!(
                "forcing amplitude must be >= 0, got {}",
                self.amplitude
            )));
        }
        Ok(())
    }
}

/// Continuation and harmonic-truncation parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HbmConfig {
    /// Harmonic truncation H.
    pub n_harmonics: usize,
    /// Time samples per period; 0 selects `2^ceil(log2(4H+2))`, the smallest
    /// power of two that keeps cubic products alias-free.
    pub n_time_samples: usize,
    /// Relative corrector tolerance on the update norm.
    pub corrector_tol: f64,
    pub max_corrector_iterations: usize,
    /// Maximum accepted continuation steps per branch.
    pub max_steps: usize,
    /// Arc-length step sizes, in the normal-coordinate/probe amplitude scale.
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Backbone start-up modal force; `None` selects
    /// `1e-4 * omega_r^2 * initial_step` (a K-consistent scale at the probe
    /// amplitude the first step aims for).
    pub kick_force: Option<f64>,
    /// Continuation window (rad/s) and amplitude cap at the probe.
    pub omega_min: f64,
    pub omega_max: f64,
    pub amplitude_cap: f64,
}

impl HbmConfig {
    pub fn validated(mut self) -> Result<Self> {
        if self.n_harmonics == 0 {
            return Err(Error::Config("need at least one harmonic".into()));
        }
        let floor = 4 * self.n_harmonics + 1;
        if self.n_time_samples == 0 {
            let mut nt = 1usize;
            while nt < floor + 1 {
                nt *= 2;
            }
            self.n_time_samples = nt;
        } else if self.n_time_samples < floor {
            return Err(Error::Config(format!(
                "n_time_samples {} aliases cubic terms; need >= {floor}",
                self.n_time_samples
            )));
        }
        if !(self.corrector_tol > 0.0) || self.max_corrector_iterations == 0 {
            return Err(Error::Config("invalid corrector settings".into()));
        }
        if !(self.min_step > 0.0 && self.initial_step >= self.min_step
            && self.max_step >= self.initial_step)
        {
            return Err(Error::Config(format!(
                "step sizes must satisfy 0 < min {} <= initial {} <= max {}",
                self.min_step, self.initial_step, self.max_step
            )));
        }
        if !(self.omega_min >= 0.0 && self.omega_max > self.omega_min) {
            return Err(Error::Config("empty continuation window".into()));
        }
        Ok(self)
    }

    /// Reasonable defaults for a backbone run around `omega_ref` with a
    /// probe-amplitude scale `amp`.
    pub fn backbone_defaults(omega_ref: f64, amp: f64, n_harmonics: usize) -> Self {
        Self {
            n_harmonics,
            n_time_samples: 0,
            corrector_tol: 1e-10,
            max_corrector_iterations: 25,
            max_steps: 600,
            initial_step: amp / 50.0,
            min_step: amp / 1e7,
            max_step: amp / 8.0,
            kick_force: None,
            omega_min: 0.5 * omega_ref,
            omega_max: 2.0 * omega_ref,
            amplitude_cap: amp,
        }
    }

    /// Reasonable defaults for an FRF sweep over `[omega_min, omega_max]`.
    pub fn frf_defaults(omega_min: f64, omega_max: f64, amp: f64, n_harmonics: usize) -> Self {
        Self {
            n_harmonics,
            n_time_samples: 0,
            corrector_tol: 1e-10,
            max_corrector_iterations: 25,
            max_steps: 2000,
            initial_step: amp / 50.0,
            min_step: amp / 1e8,
            max_step: amp / 4.0,
            kick_force: None,
            omega_min,
            omega_max,
            amplitude_cap: amp,
        }
    }
}

/// Why a branch trace ended.
#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    WindowExit,
    AmplitudeCap,
    MaxSteps,
    /// A conservative family returned to the origin after tracing out.
    BranchClosed,
    /// Corrector kept failing at the minimum step; carries the last
    /// diagnostic.
    StepFloor(String),
}

/// One accepted continuation point.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    /// Fundamental frequency (rad/s).
    pub omega: f64,
    /// Max absolute probe displacement over one period.
    pub amplitude: f64,
    /// Harmonic coefficients, layout `[a0 | a1 b1 | a2 b2 | ...]` per block.
    pub coeffs: DVector<f64>,
    /// Marks a sign change of the frequency component of the branch tangent.
    pub fold: bool,
    /// Floquet analysis is not performed.
    pub stability_assessed: bool,
    /// Final corrector residual norm (force units).
    pub residual: f64,
}

/// Ordered continuation output.
#[derive(Debug, Clone)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    /// Probe dof (physical) the amplitude column refers to.
    pub probe: usize,
    pub stop: StopReason,
    /// Reference frequency used for scaling (usually the linear mode).
    pub omega_ref: f64,
}

impl Branch {
    pub fn max_amplitude(&self) -> f64 {
        self.points.iter().map(|p| p.amplitude).fold(0.0, f64::max)
    }

    pub fn fold_count(&self) -> usize {
        self.points.iter().filter(|p| p.fold).count()
    }

    /// Interpolates the branch frequency at a probe amplitude (first
    /// crossing while amplitude grows monotonically).
    pub fn omega_at_amplitude(&self, amp: f64) -> Option<f64> {
        for w in self.points.windows(2) {
            let (p0, p1) = (&w[0], &w[1]);
            if (p0.amplitude <= amp && amp <= p1.amplitude)
                || (p1.amplitude <= amp && amp <= p0.amplitude)
            {
                let t = (amp - p0.amplitude) / (p1.amplitude - p0.amplitude);
                return Some(p0.omega + t * (p1.omega - p0.omega));
            }
        }
        None
    }

    /// Peak location and value, refined by a parabola through the largest
    /// sampled amplitude and its neighbours (exact apex of a smooth
    /// resonance crest up to cubic terms).
    pub fn peak(&self) -> (f64, f64) {
        let Some(imax) = self
            .points
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.amplitude.total_cmp(&b.1.amplitude))
            .map(|(i, _)| i)
        else {
            return (0.0, 0.0);
        };
        if imax == 0 || imax + 1 >= self.points.len() {
            let p = &self.points[imax];
            return (p.omega, p.amplitude);
        }
        let (p0, p1, p2) = (&self.points[imax - 1], &self.points[imax], &self.points[imax + 1]);
        // Quadratic through (w, a) triplets in the omega coordinate.
        let (x0, x1, x2) = (p0.omega, p1.omega, p2.omega);
        let (y0, y1, y2) = (p0.amplitude, p1.amplitude, p2.amplitude);
        let d0 = (x0 - x1) * (x0 - x2);
        let d1 = (x1 - x0) * (x1 - x2);
        let d2 = (x2 - x0) * (x2 - x1);
        if d0 == 0.0 || d1 == 0.0 || d2 == 0.0 {
            return (x1, y1);
        }
        let a = y0 / d0 + y1 / d1 + y2 / d2;
        let b = -(y0 * (x1 + x2) / d0 + y1 * (x0 + x2) / d1 + y2 * (x0 + x1) / d2);
        if a >= 0.0 {
            return (x1, y1);
        }
        let xp = -b / (2.0 * a);
        let c = y0 * x1 * x2 / d0 + y1 * x0 * x2 / d1 + y2 * x0 * x1 / d2;
        let yp = a * xp * xp + b * xp + c;
        if yp >= y1 && (x0..=x2).contains(&xp) || (x2..=x0).contains(&xp) {
            (xp, yp)
        } else {
            (x1, y1)
        }
    }

    /// Arc length accumulated between fold pairs, in the (omega/omega_ref,
    /// amplitude/scale) plane; a crude measure of the extent of an
    /// internal-resonance loop.
    pub fn loop_arc_length(&self, amp_scale: f64) -> f64 {
        let folds: Vec<usize> = self
            .points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.fold)
            .map(|(i, _)| i)
            .collect();
        if folds.len() < 2 {
            return 0.0;
        }
        let (lo, hi) = (folds[0], *folds.last().unwrap());
        self.points[lo..=hi]
            .windows(2)
            .map(|w| {
                let dw = (w[1].omega - w[0].omega) / self.omega_ref;
                let da = (w[1].amplitude - w[0].amplitude) / amp_scale;
                (dw * dw + da * da).sqrt()
            })
            .sum()
    }
}
