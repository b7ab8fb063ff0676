//! Predictor-corrector continuation on the harmonic-balance equations.
//!
//! The corrector is a least-squares Newton (QR) on the residual rows plus
//! the active constraint rows: pseudo arc-length, the backbone phase anchor,
//! or a frequency pin. Least squares absorbs the one-dimensional phase
//! degeneracy of conservative backbones, where the residual rows are rank
//! deficient along the time-shift generator.
//!
//! Continuation runs in scaled coordinates `(q / sigma_q, omega / omega_ref)`
//! so that arc steps weigh amplitude and frequency comparably.

use faer::prelude::*;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hbm::aft::{jacobian, residual, HarmonicGrid, HbmSystem};
use crate::hbm::{Branch, BranchPoint, HbmConfig, StopReason};

/// Extra rows appended to the residual system.
enum Constraint {
    /// `t^T (y - y_base) = ds` in scaled coordinates.
    ArcLength { tangent: DVector<f64>, base: DVector<f64>, ds: f64 },
    /// Pins one scaled coefficient to zero (backbone phase anchor).
    Anchor { index: usize },
    /// Pins the scaled frequency.
    FixedOmega { value: f64 },
}

/// Scaled state vector `[q / sigma; omega / omega_ref]`.
#[derive(Clone)]
struct ScaledPoint {
    y: DVector<f64>,
}

struct Tracer<'a, S: HbmSystem + ?Sized> {
    sys: &'a S,
    grid: &'a HarmonicGrid,
    cfg: &'a HbmConfig,
    /// Reporting reference (linear mode or window edge).
    omega_ref: f64,
    /// Coordinate scale of the frequency unknown; one fifth of the window
    /// span, so the largest arc step crosses at most 1/40 of the window.
    omega_scale: f64,
    sigma: f64,
    forcing: Option<DVector<f64>>,
    anchor: Option<usize>,
    /// Weight applied to constraint rows to keep the least-squares system
    /// balanced against force-unit residual rows.
    row_weight: f64,
    /// Backbone closure: stop when the amplitude drops back below this
    /// value (the family returned to the origin).
    close_below: Option<f64>,
}

impl<'a, S: HbmSystem + ?Sized> Tracer<'a, S> {
    fn n_unknowns(&self) -> usize {
        self.grid.n_coeffs(self.sys.n_eq()) + 1
    }

    fn unscale(&self, y: &DVector<f64>) -> (DVector<f64>, f64) {
        let n = y.len() - 1;
        (y.rows(0, n) * self.sigma, y[n] * self.omega_scale)
    }

    /// One Newton-QR correction pass; mutates `y`. The Jacobian is refreshed
    /// every third iteration (modified Newton); acceptance is either a small
    /// update or a residual at the round-off floor of the force scale.
    fn correct(&self, y: &mut DVector<f64>, constraints: &[Constraint]) -> Result<(usize, f64)> {
        let nq = self.grid.n_coeffs(self.sys.n_eq());
        let rows = nq + constraints.len();
        let cols = nq + 1;
        let res_floor = 1e-14 * self.row_weight * self.sigma * (nq as f64).sqrt();
        let mut last_res = f64::INFINITY;
        let mut qr: Option<faer::linalg::solvers::Qr<f64>> = None;
        for iter in 1..=self.cfg.max_corrector_iterations {
            let (q, omega) = self.unscale(y);
            if !(omega > 0.0) {
                return Err(Error::Numerical(format!(
                    "corrector drifted to a non-positive frequency {omega:.3e}"
                )));
            }
            let r = residual(self.sys, self.grid, &q, omega, self.forcing.as_ref())?;
            let res_norm = r.norm();
            let mut cons_ok = true;
            let mut rhs = DVector::zeros(rows);
            rhs.rows_mut(0, nq).copy_from(&(-&r));
            for (c, row) in constraints.iter().zip(nq..rows) {
                let value = match c {
                    Constraint::ArcLength { tangent, base, ds } => {
                        tangent.dot(&(&*y - base)) - ds
                    }
                    Constraint::Anchor { index } => y[*index],
                    Constraint::FixedOmega { value } => y[nq] - value,
                };
                cons_ok &= value.abs() <= self.cfg.corrector_tol * y.norm().max(1e-9);
                rhs[row] = -value * self.row_weight;
            }
            if res_norm <= res_floor && cons_ok && iter > 1 {
                return Ok((iter, res_norm));
            }
            if qr.is_none() || (iter - 1) % 3 == 0 {
                let (jq, jw) = jacobian(self.sys, self.grid, &q, omega)?;
                let mut a = DMatrix::zeros(rows, cols);
                a.view_mut((0, 0), (nq, nq)).copy_from(&(&jq * self.sigma));
                a.view_mut((0, nq), (nq, 1)).copy_from(&(&jw * self.omega_scale));
                for (c, row) in constraints.iter().zip(nq..rows) {
                    match c {
                        Constraint::ArcLength { tangent, .. } => {
                            for col in 0..cols {
                                a[(row, col)] = tangent[col] * self.row_weight;
                            }
                        }
                        Constraint::Anchor { index } => a[(row, *index)] = self.row_weight,
                        Constraint::FixedOmega { .. } => a[(row, nq)] = self.row_weight,
                    }
                }
                let af = faer::MatRef::from_column_major_slice(a.as_slice(), rows, cols);
                qr = Some(af.qr());
            }
            let bf = faer::MatRef::from_column_major_slice(rhs.as_slice(), rows, 1);
            let sol = qr.as_ref().unwrap().solve_lstsq(bf);
            let mut step_norm2 = 0.0;
            for i in 0..cols {
                let d = sol[(i, 0)];
                y[i] += d;
                step_norm2 += d * d;
            }
            let step = step_norm2.sqrt();
            let scale = y.norm().max(1e-9);
            if step <= self.cfg.corrector_tol * scale {
                return Ok((iter, res_norm));
            }
            if step > 1e6 * scale || !step.is_finite() {
                return Err(Error::Numerical(format!(
                    "corrector diverged (step {step:.3e} at iteration {iter})"
                )));
            }
            last_res = res_norm;
        }
        Err(Error::Numerical(format!(
            "corrector did not converge in {} iterations (last residual {last_res:.3e})",
            self.cfg.max_corrector_iterations
        )))
    }

    fn make_point(&self, y: &DVector<f64>, fold: bool, res: f64) -> BranchPoint {
        let (q, omega) = self.unscale(y);
        BranchPoint {
            omega,
            amplitude: self.grid.amplitude(self.sys, &q, omega),
            coeffs: q,
            fold,
            stability_assessed: false,
            residual: res,
        }
    }

    /// Pseudo arc-length march from two consistent points.
    fn trace(&self, y_prev: ScaledPoint, y_curr: ScaledPoint, res_curr: f64) -> Result<Branch> {
        let mut points = Vec::new();
        let mut y_prev = y_prev.y;
        let mut y_curr = y_curr.y;
        points.push(self.make_point(&y_curr, false, res_curr));

        let mut tangent = (&y_curr - &y_prev).normalize();
        let nq = self.n_unknowns() - 1;
        let mut ds = (self.cfg.initial_step / self.sigma).max(1e-14);
        let ds_min = self.cfg.min_step / self.sigma;
        let ds_max = self.cfg.max_step / self.sigma;
        let mut omega_sign = tangent[nq].signum();
        let stop;
        let mut steps = 0usize;
        loop {
            if steps >= self.cfg.max_steps {
                stop = StopReason::MaxSteps;
                break;
            }
            let mut attempt = ds;
            let accepted = loop {
                let mut y_try = &y_curr + &tangent * attempt;
                let constraints = self.step_constraints(&tangent, &y_curr, attempt);
                match self.correct(&mut y_try, &constraints) {
                    Ok((iters, res)) => {
                        // Reject corner-cutting steps: the new secant must
                        // stay close to the predictor direction.
                        let turn = (&y_try - &y_curr).normalize().dot(&tangent);
                        if turn < 0.8 && attempt * 0.5 >= ds_min {
                            attempt *= 0.5;
                            continue;
                        }
                        break Some((y_try, iters, res, turn));
                    }
                    Err(e) => {
                        attempt *= 0.5;
                        if attempt < ds_min {
                            stop = StopReason::StepFloor(format!("{e}"));
                            return Ok(self.finish(points, stop));
                        }
                    }
                }
            };
            let Some((y_new, iters, res, turn)) = accepted else { unreachable!() };
            steps += 1;
            let t_new = (&y_new - &y_curr).normalize();
            let new_sign = t_new[nq].signum();
            let fold = new_sign != omega_sign && omega_sign != 0.0;
            omega_sign = new_sign;
            y_prev = std::mem::replace(&mut y_curr, y_new);
            let _ = &y_prev;
            points.push(self.make_point(&y_curr, fold, res));
            tangent = t_new;
            // Step adaptation on corrector effort and path curvature.
            ds = if turn < 0.95 {
                (attempt * 0.6).max(ds_min)
            } else if iters <= 4 && turn > 0.999 {
                (attempt * 1.4).min(ds_max)
            } else if iters >= self.cfg.max_corrector_iterations / 2 {
                (attempt * 0.6).max(ds_min)
            } else {
                attempt
            };
            let last = points.last().unwrap();
            if last.omega > self.cfg.omega_max || last.omega < self.cfg.omega_min {
                stop = StopReason::WindowExit;
                break;
            }
            if last.amplitude > self.cfg.amplitude_cap {
                stop = StopReason::AmplitudeCap;
                break;
            }
            if let Some(floor) = self.close_below {
                if steps > 5 && last.amplitude < floor {
                    stop = StopReason::BranchClosed;
                    break;
                }
            }
        }
        Ok(self.finish(points, stop))
    }

    fn step_constraints(
        &self,
        tangent: &DVector<f64>,
        base: &DVector<f64>,
        ds: f64,
    ) -> Vec<Constraint> {
        let mut rows = vec![Constraint::ArcLength {
            tangent: tangent.clone(),
            base: base.clone(),
            ds,
        }];
        if let Some(idx) = self.anchor {
            rows.push(Constraint::Anchor { index: idx });
        }
        rows
    }

    fn finish(&self, points: Vec<BranchPoint>, stop: StopReason) -> Branch {
        Branch { points, probe: self.probe_index(), stop, omega_ref: self.omega_ref }
    }

    fn probe_index(&self) -> usize {
        0
    }
}

/// Traces the conservative periodic-orbit family of one mode: kick-started
/// with a small harmonic forcing just below the linear frequency, then the
/// forcing is removed and the family is continued with the sine phase anchor
/// and the arc-length closure.
pub fn backbone<S: HbmSystem + ?Sized>(sys: &S, mode: usize, cfg: &HbmConfig) -> Result<Branch> {
    let cfg = cfg.clone().validated()?;
    let grid = HarmonicGrid::new(cfg.n_harmonics, cfg.n_time_samples);
    let (omega_r, shape) = sys.linear_mode(mode)?;
    let n = sys.n_eq();
    let nq = grid.n_coeffs(n);
    let sigma = 8.0 * cfg.max_step;
    let omega_scale = (cfg.omega_max - cfg.omega_min) / 5.0;
    let anchor_q = grid.b_off(1, n) + sys.anchor_index(mode);
    let tracer = Tracer {
        sys,
        grid: &grid,
        cfg: &cfg,
        omega_ref: omega_r,
        omega_scale,
        sigma,
        forcing: None,
        anchor: Some(anchor_q),
        row_weight: row_weight_for(sys, omega_r),
        close_below: None,
    };

    // Kick solve: forced, conservative, slightly below the linear frequency
    // so the in-phase branch is unique and small.
    let a_target = cfg.initial_step;
    let kick = cfg.kick_force.unwrap_or(1e-4 * omega_r * omega_r * a_target);
    let delta = kick / (2.0 * a_target * omega_r * omega_r);
    let omega_kick = omega_r * (1.0 - delta);
    let mut y = DVector::zeros(nq + 1);
    for p in 0..n {
        y[grid.a_off(1, n) + p] = a_target * shape[p] / sigma;
    }
    y[nq] = omega_kick / omega_scale;
    let kicked = Tracer {
        forcing: Some(sys.kick_vector(mode)? * kick),
        anchor: None,
        ..tracer_clone(&tracer)
    };
    kicked
        .correct(&mut y, &[Constraint::FixedOmega { value: omega_kick / omega_scale }])
        .map_err(|e| {
            Error::Numerical(format!("backbone kick start-up failed for mode {mode}: {e}"))
        })?;

    // Remove the kick: project the forced point onto the conservative family
    // at the same arc distance from the origin.
    let mut origin = DVector::zeros(nq + 1);
    origin[nq] = omega_r / omega_scale;
    let t0 = (&y - &origin).normalize();
    let ds0 = (&y - &origin).norm();
    let constraints = [
        Constraint::ArcLength { tangent: t0, base: origin.clone(), ds: ds0 },
        Constraint::Anchor { index: anchor_q },
    ];
    let (_, res) = tracer.correct(&mut y, &constraints).map_err(|e| {
        Error::Numerical(format!(
            "backbone start-up failed after kick removal for mode {mode}: {e} \
             (last residual of the kicked point retained)"
        ))
    })?;

    let first_amp = {
        let (q, omega) = tracer.unscale(&y);
        grid.amplitude(sys, &q, omega)
    };
    let tracer = Tracer { close_below: Some(0.5 * first_amp), ..tracer_clone(&tracer) };
    tracer.trace(ScaledPoint { y: origin }, ScaledPoint { y }, res)
}

/// Forced-damped frequency response over the configured window, swept from
/// the lower edge.
pub fn frf<S: HbmSystem + ?Sized>(
    sys: &S,
    forcing: &DVector<f64>,
    cfg: &HbmConfig,
) -> Result<Branch> {
    let cfg = cfg.clone().validated()?;
    if sys.damping().is_none() {
        return Err(Error::Config(
            "frequency-response continuation needs damping; use the backbone driver \
             for conservative systems"
                .into(),
        ));
    }
    let grid = HarmonicGrid::new(cfg.n_harmonics, cfg.n_time_samples);
    let n = sys.n_eq();
    let nq = grid.n_coeffs(n);
    let omega_ref = cfg.omega_min.max(1e-12);
    let omega_scale = (cfg.omega_max - cfg.omega_min) / 5.0;
    let sigma = 8.0 * cfg.max_step;
    let tracer = Tracer {
        sys,
        grid: &grid,
        cfg: &cfg,
        omega_ref,
        omega_scale,
        sigma,
        forcing: Some(forcing.clone()),
        anchor: None,
        row_weight: row_weight_for(sys, omega_ref),
        close_below: None,
    };

    // Linear predictor at the window edge.
    let linear_guess = |omega: f64| -> Result<DVector<f64>> {
        let k = sys.stiffness();
        let m = sys.mass();
        let c = sys.damping().unwrap();
        let mut lhs = DMatrix::zeros(2 * n, 2 * n);
        lhs.view_mut((0, 0), (n, n)).copy_from(&(k - m * omega * omega));
        lhs.view_mut((0, n), (n, n)).copy_from(&(c * omega));
        lhs.view_mut((n, 0), (n, n)).copy_from(&(c * (-omega)));
        lhs.view_mut((n, n), (n, n)).copy_from(&(k - m * omega * omega));
        let mut rhs = DVector::zeros(2 * n);
        rhs.rows_mut(0, n).copy_from(forcing);
        let sol = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular linear predictor for the FRF".into()))?;
        let mut q = DVector::zeros(nq);
        q.rows_mut(grid.a_off(1, n), n).copy_from(&sol.rows(0, n));
        q.rows_mut(grid.b_off(1, n), n).copy_from(&sol.rows(n, n));
        Ok(q)
    };

    let start_point = |omega: f64| -> Result<(DVector<f64>, f64)> {
        let q = linear_guess(omega)?;
        let mut y = DVector::zeros(nq + 1);
        for i in 0..nq {
            y[i] = q[i] / sigma;
        }
        y[nq] = omega / omega_scale;
        let (_, res) = tracer
            .correct(&mut y, &[Constraint::FixedOmega { value: omega / omega_scale }])
            .map_err(|e| Error::Numerical(format!("FRF start-up at {omega:.6e} failed: {e}")))?;
        Ok((y, res))
    };

    let (y1, _) = start_point(cfg.omega_min)?;
    let domega = (cfg.initial_step / sigma) * omega_scale;
    let (y2, res2) = start_point(cfg.omega_min + domega)?;
    tracer.trace(ScaledPoint { y: y1 }, ScaledPoint { y: y2 }, res2)
}

/// Continues from two already-converged points (general entry point).
pub fn continue_branch<S: HbmSystem + ?Sized>(
    sys: &S,
    cfg: &HbmConfig,
    omega_ref: f64,
    forcing: Option<DVector<f64>>,
    anchor: Option<usize>,
    prev: (DVector<f64>, f64),
    curr: (DVector<f64>, f64),
) -> Result<Branch> {
    let cfg = cfg.clone().validated()?;
    let grid = HarmonicGrid::new(cfg.n_harmonics, cfg.n_time_samples);
    let sigma = 8.0 * cfg.max_step;
    let omega_scale = (cfg.omega_max - cfg.omega_min) / 5.0;
    let tracer = Tracer {
        sys,
        grid: &grid,
        cfg: &cfg,
        omega_ref,
        omega_scale,
        sigma,
        forcing,
        anchor,
        row_weight: row_weight_for(sys, omega_ref),
        close_below: None,
    };
    let nq = grid.n_coeffs(sys.n_eq());
    let pack = |qw: &(DVector<f64>, f64)| -> DVector<f64> {
        let mut y = DVector::zeros(nq + 1);
        for i in 0..nq {
            y[i] = qw.0[i] / sigma;
        }
        y[nq] = qw.1 / omega_scale;
        y
    };
    let y_prev = pack(&prev);
    let mut y_curr = pack(&curr);
    let constraints = tracer.step_constraints(
        &(&y_curr - &y_prev).normalize(),
        &y_prev.clone(),
        (&y_curr - &y_prev).norm(),
    );
    let (_, res) = tracer.correct(&mut y_curr, &constraints)?;
    tracer.trace(ScaledPoint { y: y_prev }, ScaledPoint { y: y_curr }, res)
}

/// Solves the forced-damped balance equations at one fixed frequency,
/// seeding Newton from the linear response.
pub fn solve_at<S: HbmSystem + ?Sized>(
    sys: &S,
    cfg: &HbmConfig,
    omega: f64,
    forcing: &DVector<f64>,
) -> Result<BranchPoint> {
    let cfg = cfg.clone().validated()?;
    let grid = HarmonicGrid::new(cfg.n_harmonics, cfg.n_time_samples);
    let n = sys.n_eq();
    let nq = grid.n_coeffs(n);
    let sigma = 8.0 * cfg.max_step;
    let tracer = Tracer {
        sys,
        grid: &grid,
        cfg: &cfg,
        omega_ref: omega,
        omega_scale: omega,
        sigma,
        forcing: Some(forcing.clone()),
        anchor: None,
        row_weight: row_weight_for(sys, omega),
        close_below: None,
    };
    let k = sys.stiffness();
    let m = sys.mass();
    let mut lhs = DMatrix::zeros(2 * n, 2 * n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&(k - m * omega * omega));
    lhs.view_mut((n, n), (n, n)).copy_from(&(k - m * omega * omega));
    if let Some(c) = sys.damping() {
        lhs.view_mut((0, n), (n, n)).copy_from(&(c * omega));
        lhs.view_mut((n, 0), (n, n)).copy_from(&(c * (-omega)));
    }
    let mut rhs = DVector::zeros(2 * n);
    rhs.rows_mut(0, n).copy_from(forcing);
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular linear predictor".into()))?;
    let mut y = DVector::zeros(nq + 1);
    for p in 0..n {
        y[grid.a_off(1, n) + p] = sol[p] / sigma;
        y[grid.b_off(1, n) + p] = sol[n + p] / sigma;
    }
    y[nq] = 1.0;
    let (_, res) = tracer.correct(&mut y, &[Constraint::FixedOmega { value: 1.0 }])?;
    Ok(tracer.make_point(&y, false, res))
}

fn row_weight_for<S: HbmSystem + ?Sized>(sys: &S, omega_ref: f64) -> f64 {
    (sys.stiffness().norm() + omega_ref * omega_ref * sys.mass().norm()).max(1e-12)
}

fn tracer_clone<'a, S: HbmSystem + ?Sized>(t: &Tracer<'a, S>) -> Tracer<'a, S> {
    Tracer {
        sys: t.sys,
        grid: t.grid,
        cfg: t.cfg,
        omega_ref: t.omega_ref,
        omega_scale: t.omega_scale,
        sigma: t.sigma,
        forcing: t.forcing.clone(),
        anchor: t.anchor,
        row_weight: t.row_weight,
        close_below: t.close_below,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hbm::aft::RomSystem;
    use crate::rom::{DampingVariant, Monomial, RomModel, RomVariant};
    use approx::assert_relative_eq;

    fn duffing(alpha: f64, zeta: f64) -> RomModel {
        RomModel {
            masters: vec![0],
            omegas: vec![1.0],
            linear_damping: vec![zeta],
            monomials: vec![Monomial { eq: 0, r_exp: vec![3], s_exp: vec![0], coeff: alpha }],
            variant: RomVariant::o2(DampingVariant::LinearOnly),
            forcing: None,
        }
    }

    #[test]
    fn linear_backbone_is_vertical() {
        let rom = duffing(0.0, 0.0);
        let sys = RomSystem::new(&rom, None);
        let cfg = HbmConfig::backbone_defaults(1.0, 1.0, 3);
        let branch = backbone(&sys, 0, &cfg).unwrap();
        assert!(branch.points.len() > 10);
        for p in &branch.points {
            assert_relative_eq!(p.omega, 1.0, max_relative = 1e-9);
            assert!(!p.stability_assessed);
        }
        assert!(branch.max_amplitude() > 0.9);
    }

    /// Duffing backbone against the first-order perturbation formula
    /// w(a) = w0 (1 + 3 alpha a^2 / (8 w0^2)).
    #[test]
    fn duffing_backbone_matches_perturbation() {
        let alpha = 0.1;
        let rom = duffing(alpha, 0.0);
        let sys = RomSystem::new(&rom, None);
        let cfg = HbmConfig::backbone_defaults(1.0, 1.0, 7);
        let branch = backbone(&sys, 0, &cfg).unwrap();
        let mut checked = 0;
        for p in &branch.points {
            let a = p.amplitude;
            let w_ms = 1.0 + 3.0 * alpha * a * a / 8.0;
            if w_ms - 1.0 > 0.05 || a < 0.05 {
                continue;
            }
            assert_relative_eq!(p.omega, w_ms, max_relative = 5e-3);
            checked += 1;
        }
        assert!(checked > 5, "only {checked} points in the asymptotic range");
    }

    #[test]
    fn linear_frf_matches_analytic() {
        let zeta = 0.2; // c = zeta (m = k = 1)
        let rom = duffing(0.0, zeta);
        let sys = RomSystem::new(&rom, None);
        let f = 0.1;
        let peak = f / (zeta * (1.0f64 - zeta * zeta / 4.0).sqrt());
        let mut cfg = HbmConfig::frf_defaults(0.4, 1.8, peak, 5);
        cfg.max_steps = 4000;
        let forcing = DVector::from_vec(vec![f]);
        let branch = frf(&sys, &forcing, &cfg).unwrap();
        assert_eq!(branch.stop, StopReason::WindowExit);
        for p in &branch.points {
            let d = ((1.0 - p.omega * p.omega).powi(2)
                + (zeta * p.omega).powi(2))
            .sqrt();
            assert_relative_eq!(p.amplitude, f / d, max_relative = 1e-8);
        }
        // Monotone single peak: no folds on a linear FRF.
        assert_eq!(branch.fold_count(), 0);
        assert_relative_eq!(branch.peak().1, peak, max_relative = 1e-4);
        // Exact peak value from a fixed-frequency solve at the analytic
        // resonance location.
        let omega_peak = (1.0f64 - zeta * zeta / 2.0).sqrt();
        let at_peak = solve_at(&sys, &cfg, omega_peak, &forcing).unwrap();
        assert_relative_eq!(at_peak.amplitude, peak, max_relative = 1e-6);
    }

    /// Hardening Duffing at sufficient forcing shows exactly two folds.
    #[test]
    fn duffing_frf_fold_pair() {
        let rom = duffing(0.15, 0.02);
        let sys = RomSystem::new(&rom, None);
        let forcing = DVector::from_vec(vec![0.02]);
        let mut cfg = HbmConfig::frf_defaults(0.7, 1.6, 2.0, 7);
        cfg.max_steps = 6000;
        let branch = frf(&sys, &forcing, &cfg).unwrap();
        assert_eq!(branch.stop, StopReason::WindowExit);
        assert_eq!(branch.fold_count(), 2, "expected exactly two folds");
        // Fold pair brackets the overhanging resonance.
        let folds: Vec<&BranchPoint> = branch.points.iter().filter(|p| p.fold).collect();
        assert!(folds[0].omega > folds[1].omega);
    }

    /// Deterministic output: identical configs give identical branches.
    #[test]
    fn continuation_is_deterministic() {
        let rom = duffing(0.1, 0.0);
        let sys = RomSystem::new(&rom, None);
        let cfg = HbmConfig::backbone_defaults(1.0, 0.7, 5);
        let b1 = backbone(&sys, 0, &cfg).unwrap();
        let b2 = backbone(&sys, 0, &cfg).unwrap();
        assert_eq!(b1.points.len(), b2.points.len());
        for (p, q) in b1.points.iter().zip(b2.points.iter()) {
            assert_eq!(p.omega, q.omega);
            assert_eq!(p.coeffs, q.coeffs);
        }
    }
}
