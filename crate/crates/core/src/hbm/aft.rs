//! Fourier-domain residual and Jacobian assembly with time-domain evaluation
//! of the nonlinear terms (alternating frequency/time).
//!
//! Coefficient layout per system: `q = [a0 | a1 b1 | ... | aH bH]`, each
//! block `n` long, representing
//! `x(t) = a0 + sum_k a_k cos(k W t) + b_k sin(k W t)`.

use nalgebra::{DMatrix, DVector};

use crate::dnf::MappingTensors;
use crate::eigen::Spectrum;
use crate::error::{Error, Result};
use crate::model::{DampingSpec, StructuralModel};
use crate::rom::reconstruct::{reconstruct, VelocityRule};
use crate::rom::{NormalState, RomModel};

/// Second-order system exposed to the harmonic-balance machinery.
pub trait HbmSystem {
    fn n_eq(&self) -> usize;
    fn mass(&self) -> &DMatrix<f64>;
    fn stiffness(&self) -> &DMatrix<f64>;
    fn damping(&self) -> Option<&DMatrix<f64>>;
    /// Nonlinear force (no linear parts) and its state Jacobians.
    fn nl(&self, x: &DVector<f64>, v: &DVector<f64>)
        -> Result<(DVector<f64>, DMatrix<f64>, Option<DMatrix<f64>>)>;
    /// Whether the nonlinearity depends on velocities.
    fn velocity_nl(&self) -> bool;
    /// Linear mode used to seed a backbone: `(omega, shape)`.
    fn linear_mode(&self, index: usize) -> Result<(f64, DVector<f64>)>;
    /// Force direction for the backbone kick of a mode.
    fn kick_vector(&self, index: usize) -> Result<DVector<f64>>;
    /// Physical probe displacement for one time sample of the state.
    fn probe_value(&self, x: &DVector<f64>, v: &DVector<f64>) -> f64;
    /// Index of the phase-anchor coordinate within a coefficient block.
    fn anchor_index(&self, mode: usize) -> usize;
}

/// Precomputed sampling grid and projection weights.
pub struct HarmonicGrid {
    pub h: usize,
    pub nt: usize,
    /// `cos_t[k][m] = cos(k tau_m)`, `k` in `0..=h`.
    cos_t: Vec<Vec<f64>>,
    sin_t: Vec<Vec<f64>>,
}

impl HarmonicGrid {
    pub fn new(h: usize, nt: usize) -> Self {
        let mut cos_t = Vec::with_capacity(h + 1);
        let mut sin_t = Vec::with_capacity(h + 1);
        for k in 0..=h {
            let mut c = Vec::with_capacity(nt);
            let mut s = Vec::with_capacity(nt);
            for m in 0..nt {
                let tau = std::f64::consts::TAU * (k * m) as f64 / nt as f64;
                c.push(tau.cos());
                s.push(tau.sin());
            }
            cos_t.push(c);
            sin_t.push(s);
        }
        Self { h, nt, cos_t, sin_t }
    }

    pub fn n_coeffs(&self, n_eq: usize) -> usize {
        (2 * self.h + 1) * n_eq
    }

    /// Offset of the cosine block of harmonic `k` (k = 0 is the mean).
    pub fn a_off(&self, k: usize, n: usize) -> usize {
        if k == 0 {
            0
        } else {
            (2 * k - 1) * n
        }
    }

    /// Offset of the sine block of harmonic `k >= 1`.
    pub fn b_off(&self, k: usize, n: usize) -> usize {
        2 * k * n
    }

    /// State at sample `m`: displacements and `d/d tau` (multiply by omega
    /// for velocities).
    pub fn sample_state(&self, q: &DVector<f64>, n: usize, m: usize) -> (DVector<f64>, DVector<f64>) {
        let mut x = q.rows(0, n).clone_owned();
        let mut dxdtau = DVector::zeros(n);
        for k in 1..=self.h {
            let (c, s) = (self.cos_t[k][m], self.sin_t[k][m]);
            let a = q.rows(self.a_off(k, n), n);
            let b = q.rows(self.b_off(k, n), n);
            for p in 0..n {
                x[p] += a[p] * c + b[p] * s;
                dxdtau[p] += (k as f64) * (-a[p] * s + b[p] * c);
            }
        }
        (x, dxdtau)
    }

    /// Time series of the probe displacement; the amplitude measure is its
    /// max absolute value.
    pub fn probe_series<S: HbmSystem + ?Sized>(
        &self,
        sys: &S,
        q: &DVector<f64>,
        omega: f64,
    ) -> Vec<f64> {
        let n = sys.n_eq();
        (0..self.nt)
            .map(|m| {
                let (x, dx) = self.sample_state(q, n, m);
                sys.probe_value(&x, &(dx * omega))
            })
            .collect()
    }

    /// Peak absolute probe displacement over one period: the sampled series
    /// is a trigonometric polynomial, so its interpolant peak is refined by
    /// Newton on the derivative for a discretization-free measure.
    pub fn amplitude<S: HbmSystem + ?Sized>(&self, sys: &S, q: &DVector<f64>, omega: f64) -> f64 {
        trig_peak(&self.probe_series(sys, q, omega))
    }
}

/// Peak absolute value of the band-limited interpolant of uniform samples
/// over one period.
pub fn trig_peak(series: &[f64]) -> f64 {
    let nt = series.len();
    if nt == 0 {
        return 0.0;
    }
    let kmax = (nt - 1) / 2;
    let mut ac = vec![0.0; kmax + 1];
    let mut bs = vec![0.0; kmax + 1];
    for (m, &v) in series.iter().enumerate() {
        for k in 0..=kmax {
            let tau = std::f64::consts::TAU * (k * m) as f64 / nt as f64;
            let w = if k == 0 { 1.0 / nt as f64 } else { 2.0 / nt as f64 };
            ac[k] += w * v * tau.cos();
            bs[k] += w * v * tau.sin();
        }
    }
    let eval = |tau: f64| -> (f64, f64, f64) {
        let (mut x, mut dx, mut ddx) = (ac[0], 0.0, 0.0);
        for k in 1..=kmax {
            let kf = k as f64;
            let (c, s) = ((kf * tau).cos(), (kf * tau).sin());
            x += ac[k] * c + bs[k] * s;
            dx += kf * (-ac[k] * s + bs[k] * c);
            ddx += kf * kf * (-ac[k] * c - bs[k] * s);
        }
        (x, dx, ddx)
    };
    // Coarse argmax of x^2, then Newton on (x^2)' = 2 x x'.
    let fine = 4 * nt;
    let mut best_tau = 0.0;
    let mut best = 0.0f64;
    for m in 0..fine {
        let tau = std::f64::consts::TAU * m as f64 / fine as f64;
        let (x, _, _) = eval(tau);
        if x.abs() > best {
            best = x.abs();
            best_tau = tau;
        }
    }
    let mut tau = best_tau;
    for _ in 0..40 {
        let (x, dx, ddx) = eval(tau);
        let g = x * dx;
        let h = dx * dx + x * ddx;
        if h == 0.0 {
            break;
        }
        let step = g / h;
        tau -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    let (x, _, _) = eval(tau);
    x.abs().max(best)
}

/// Fourier residual of the balance equations. `forcing` is the cosine
/// amplitude vector applied at harmonic one.
pub fn residual<S: HbmSystem + ?Sized>(
    sys: &S,
    grid: &HarmonicGrid,
    q: &DVector<f64>,
    omega: f64,
    forcing: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    let n = sys.n_eq();
    let nq = grid.n_coeffs(n);
    if q.len() != nq {
        return Err(Error::Validation(format!(
            "coefficient block has {} entries, expected {nq}",
            q.len()
        )));
    }
    let (m_op, k_op, c_op) = (sys.mass(), sys.stiffness(), sys.damping());
    let mut r = DVector::zeros(nq);

    // Linear blocks, assembled spectrally (exact).
    r.rows_mut(0, n).copy_from(&(k_op * q.rows(0, n)));
    for k in 1..=grid.h {
        let kw = k as f64 * omega;
        let a = q.rows(grid.a_off(k, n), n).clone_owned();
        let b = q.rows(grid.b_off(k, n), n).clone_owned();
        let mut rc = k_op * &a - m_op * &a * (kw * kw);
        let mut rs = k_op * &b - m_op * &b * (kw * kw);
        if let Some(c) = c_op {
            rc += c * &b * kw;
            rs -= c * &a * kw;
        }
        r.rows_mut(grid.a_off(k, n), n).copy_from(&rc);
        r.rows_mut(grid.b_off(k, n), n).copy_from(&rs);
    }
    if let Some(f) = forcing {
        let mut block = r.rows_mut(grid.a_off(1, n), n);
        block -= f;
    }

    // Nonlinear terms by time sampling and projection.
    let w0 = 1.0 / grid.nt as f64;
    let wk = 2.0 / grid.nt as f64;
    for m in 0..grid.nt {
        let (x, dxdtau) = grid.sample_state(q, n, m);
        let v = &dxdtau * omega;
        let (f, _, _) = sys.nl(&x, &v)?;
        for p in 0..n {
            r[p] += w0 * f[p];
        }
        for k in 1..=grid.h {
            let (c, s) = (grid.cos_t[k][m], grid.sin_t[k][m]);
            for p in 0..n {
                r[grid.a_off(k, n) + p] += wk * c * f[p];
                r[grid.b_off(k, n) + p] += wk * s * f[p];
            }
        }
    }
    Ok(r)
}

/// Jacobian of [`residual`] with respect to the coefficients and to omega.
pub fn jacobian<S: HbmSystem + ?Sized>(
    sys: &S,
    grid: &HarmonicGrid,
    q: &DVector<f64>,
    omega: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = sys.n_eq();
    let nq = grid.n_coeffs(n);
    let (m_op, k_op, c_op) = (sys.mass(), sys.stiffness(), sys.damping());
    let mut jq = DMatrix::zeros(nq, nq);
    let mut jw = DVector::zeros(nq);

    jq.view_mut((0, 0), (n, n)).copy_from(k_op);
    for k in 1..=grid.h {
        let kf = k as f64;
        let kw = kf * omega;
        let (ao, bo) = (grid.a_off(k, n), grid.b_off(k, n));
        let diag = k_op - m_op * (kw * kw);
        jq.view_mut((ao, ao), (n, n)).copy_from(&diag);
        jq.view_mut((bo, bo), (n, n)).copy_from(&diag);
        let a = q.rows(ao, n).clone_owned();
        let b = q.rows(bo, n).clone_owned();
        let mut dwc = m_op * &a * (-2.0 * kf * kf * omega);
        let mut dws = m_op * &b * (-2.0 * kf * kf * omega);
        if let Some(c) = c_op {
            jq.view_mut((ao, bo), (n, n)).copy_from(&(c * kw));
            jq.view_mut((bo, ao), (n, n)).copy_from(&(c * (-kw)));
            dwc += c * &b * kf;
            dws -= c * &a * kf;
        }
        jw.rows_mut(ao, n).copy_from(&dwc);
        jw.rows_mut(bo, n).copy_from(&dws);
    }

    // AFT chain rule: out-block weights x in-block weights x local Jacobians.
    let w0 = 1.0 / grid.nt as f64;
    let wk = 2.0 / grid.nt as f64;
    let n_blocks = 2 * grid.h + 1;
    let block_off = |b: usize| -> usize {
        if b == 0 {
            0
        } else if b % 2 == 1 {
            grid.a_off(b.div_ceil(2), n)
        } else {
            grid.b_off(b / 2, n)
        }
    };
    let mut wout = vec![0.0; n_blocks];
    let mut win_x = vec![0.0; n_blocks];
    let mut win_v = vec![0.0; n_blocks];
    for m in 0..grid.nt {
        let (x, dxdtau) = grid.sample_state(q, n, m);
        let v = &dxdtau * omega;
        let (_, jx, jv) = sys.nl(&x, &v)?;
        wout[0] = w0;
        win_x[0] = 1.0;
        win_v[0] = 0.0;
        for k in 1..=grid.h {
            let (c, s) = (grid.cos_t[k][m], grid.sin_t[k][m]);
            wout[2 * k - 1] = wk * c;
            wout[2 * k] = wk * s;
            win_x[2 * k - 1] = c;
            win_x[2 * k] = s;
            win_v[2 * k - 1] = -(k as f64) * s * omega;
            win_v[2 * k] = (k as f64) * c * omega;
        }
        // Hot loop: accumulate wo*win * J into the (ro, co) block using
        // contiguous column slices.
        let nq_rows = nq;
        let jq_s = jq.as_mut_slice();
        let jx_s = jx.as_slice();
        let jv_s = jv.as_ref().map(|m| m.as_slice());
        for ib in 0..n_blocks {
            let co = block_off(ib);
            for ob in 0..n_blocks {
                let ro = block_off(ob);
                let cx = wout[ob] * win_x[ib];
                let cv = jv_s.map(|_| wout[ob] * win_v[ib]).unwrap_or(0.0);
                for pq in 0..n {
                    let dst = &mut jq_s[(co + pq) * nq_rows + ro..(co + pq) * nq_rows + ro + n];
                    let src = &jx_s[pq * n..pq * n + n];
                    if cx != 0.0 {
                        for pp in 0..n {
                            dst[pp] += cx * src[pp];
                        }
                    }
                    if cv != 0.0 {
                        let srcv = &jv_s.unwrap()[pq * n..pq * n + n];
                        for pp in 0..n {
                            dst[pp] += cv * srcv[pp];
                        }
                    }
                }
            }
        }
        if let Some(jv) = &jv {
            // d v_m / d omega = v_m / omega.
            let dv = &dxdtau;
            let contribution = jv * dv;
            for p in 0..n {
                jw[p] += w0 * contribution[p];
            }
            for k in 1..=grid.h {
                let (c, s) = (grid.cos_t[k][m], grid.sin_t[k][m]);
                for p in 0..n {
                    jw[grid.a_off(k, n) + p] += wk * c * contribution[p];
                    jw[grid.b_off(k, n) + p] += wk * s * contribution[p];
                }
            }
        }
    }
    Ok((jq, jw))
}

/// Full structural model under harmonic balance.
pub struct FullSystem<'a> {
    pub model: &'a StructuralModel,
    spectrum: Option<&'a Spectrum>,
    c: Option<DMatrix<f64>>,
    /// Probe dof (free index).
    pub probe: usize,
}

impl<'a> FullSystem<'a> {
    pub fn new(
        model: &'a StructuralModel,
        spectrum: Option<&'a Spectrum>,
        damping: Option<DampingSpec>,
        probe: usize,
    ) -> Result<Self> {
        if probe >= model.n_dof {
            return Err(Error::Validation(format!(
                "probe dof {probe} outside the {} free dofs",
                model.n_dof
            )));
        }
        let c = match damping {
            Some(d) if !d.is_zero() => Some(d.matrix(model)),
            _ => None,
        };
        Ok(Self { model, spectrum, c, probe })
    }

    /// Point-force cosine amplitude vector.
    pub fn point_force(&self, dof: usize, amplitude: f64) -> DVector<f64> {
        let mut f = DVector::zeros(self.model.n_dof);
        f[dof] = amplitude;
        f
    }
}

impl HbmSystem for FullSystem<'_> {
    fn n_eq(&self) -> usize {
        self.model.n_dof
    }

    fn mass(&self) -> &DMatrix<f64> {
        &self.model.mass
    }

    fn stiffness(&self) -> &DMatrix<f64> {
        &self.model.stiffness
    }

    fn damping(&self) -> Option<&DMatrix<f64>> {
        self.c.as_ref()
    }

    fn nl(
        &self,
        x: &DVector<f64>,
        _v: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>, Option<DMatrix<f64>>)> {
        let f = self.model.nonlinear_force(x)?;
        let jx = self.model.nonlinear_tangent(x)?;
        Ok((f, jx, None))
    }

    fn velocity_nl(&self) -> bool {
        false
    }

    fn linear_mode(&self, index: usize) -> Result<(f64, DVector<f64>)> {
        let sp = self.spectrum.ok_or_else(|| {
            Error::Validation("backbone start-up needs a computed spectrum".into())
        })?;
        if index >= sp.n_computed() {
            return Err(Error::Validation(format!("mode {index} not computed")));
        }
        Ok((sp.omegas[index], sp.phi(index).clone_owned()))
    }

    fn kick_vector(&self, index: usize) -> Result<DVector<f64>> {
        let (_, phi) = self.linear_mode(index)?;
        Ok(&self.model.mass * phi)
    }

    fn probe_value(&self, x: &DVector<f64>, _v: &DVector<f64>) -> f64 {
        x[self.probe]
    }

    fn anchor_index(&self, _mode: usize) -> usize {
        self.probe
    }
}

/// Reduced model under harmonic balance, with physical probe reconstruction
/// through the nonlinear mapping.
pub struct RomSystem<'a> {
    pub rom: &'a RomModel,
    mass: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    c: Option<DMatrix<f64>>,
    velocity_nl: bool,
    reconstruction: Option<RomReconstruction<'a>>,
}

/// Mapping data for probe reconstruction.
pub struct RomReconstruction<'a> {
    pub tensors: &'a MappingTensors,
    pub spectrum: &'a Spectrum,
    /// Mapping order, 2 or 3.
    pub order: u8,
    /// Include the damping mapping terms.
    pub damped: bool,
    /// Physical probe dof.
    pub probe: usize,
}

impl<'a> RomSystem<'a> {
    pub fn new(rom: &'a RomModel, reconstruction: Option<RomReconstruction<'a>>) -> Self {
        let n = rom.n_masters();
        let mass = DMatrix::identity(n, n);
        let stiffness = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| {
            rom.omegas[i] * rom.omegas[i]
        }));
        let c = if rom.linear_damping.iter().any(|&z| z != 0.0) {
            Some(DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| rom.linear_damping[i])))
        } else {
            None
        };
        let velocity_nl = rom.monomials.iter().any(|m| m.s_exp.iter().any(|&e| e > 0));
        Self { rom, mass, stiffness, c, velocity_nl, reconstruction }
    }
}

impl HbmSystem for RomSystem<'_> {
    fn n_eq(&self) -> usize {
        self.rom.n_masters()
    }

    fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    fn damping(&self) -> Option<&DMatrix<f64>> {
        self.c.as_ref()
    }

    fn nl(
        &self,
        x: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>, Option<DMatrix<f64>>)> {
        let n = self.rom.n_masters();
        let mut f = DVector::zeros(n);
        let mut jx = DMatrix::zeros(n, n);
        let mut jv = DMatrix::zeros(n, n);
        for m in &self.rom.monomials {
            let mut val = m.coeff;
            for i in 0..n {
                for _ in 0..m.r_exp[i] {
                    val *= x[i];
                }
                for _ in 0..m.s_exp[i] {
                    val *= v[i];
                }
            }
            f[m.eq] += val;
            for d in 0..n {
                if m.r_exp[d] > 0 {
                    let mut g = m.coeff * m.r_exp[d] as f64;
                    for i in 0..n {
                        let e = if i == d { m.r_exp[i] - 1 } else { m.r_exp[i] };
                        for _ in 0..e {
                            g *= x[i];
                        }
                        for _ in 0..m.s_exp[i] {
                            g *= v[i];
                        }
                    }
                    jx[(m.eq, d)] += g;
                }
                if m.s_exp[d] > 0 {
                    let mut g = m.coeff * m.s_exp[d] as f64;
                    for i in 0..n {
                        for _ in 0..m.r_exp[i] {
                            g *= x[i];
                        }
                        let e = if i == d { m.s_exp[i] - 1 } else { m.s_exp[i] };
                        for _ in 0..e {
                            g *= v[i];
                        }
                    }
                    jv[(m.eq, d)] += g;
                }
            }
        }
        let jv = if self.velocity_nl { Some(jv) } else { None };
        Ok((f, jx, jv))
    }

    fn velocity_nl(&self) -> bool {
        self.velocity_nl
    }

    fn linear_mode(&self, index: usize) -> Result<(f64, DVector<f64>)> {
        let n = self.rom.n_masters();
        if index >= n {
            return Err(Error::Validation(format!(
                "master position {index} outside {n} masters"
            )));
        }
        let mut e = DVector::zeros(n);
        e[index] = 1.0;
        Ok((self.rom.omegas[index], e))
    }

    fn kick_vector(&self, index: usize) -> Result<DVector<f64>> {
        let (_, e) = self.linear_mode(index)?;
        Ok(e)
    }

    fn probe_value(&self, x: &DVector<f64>, v: &DVector<f64>) -> f64 {
        match &self.reconstruction {
            None => x[0],
            Some(rec) => {
                let state = NormalState { r: x.clone(), s: v.clone() };
                let (xx, _) = reconstruct(
                    rec.tensors,
                    rec.spectrum,
                    &state,
                    rec.order,
                    rec.damped,
                    VelocityRule::FromMapping,
                )
                .expect("reconstruction tensors available");
                xx[rec.probe]
            }
        }
    }

    fn anchor_index(&self, mode: usize) -> usize {
        mode
    }
}
