//! Internal-resonance bookkeeping.
//!
//! Every frequency combination `sigma` formed over master pairs and triples
//! is tested against every computed eigenfrequency: a hit within the relative
//! tolerance `|sigma^2 - w_s^2| <= tol * w_s^2` flags the combination. Cubic
//! combinations that cancel by index structure (`+w_m - w_m + w_s`) are
//! always flagged and marked trivial; everything else within tolerance is
//! non-trivial. Near-misses inside `(tol, 10 tol]` are reported as
//! conditioning warnings.
//!
//! Index convention: `i, j, k` are positions into the master list; `s` is a
//! global mode index into the computed spectrum.

use serde::{Deserialize, Serialize};

use crate::eigen::Spectrum;
use crate::error::{Error, Result};

/// Default relative detection threshold on `sigma^2` vs `w_s^2`. The theory
/// treats only exact resonance; a finite threshold is mandatory in floating
/// point.
pub const DEFAULT_RES_TOL: f64 = 1e-3;

/// Quadratic frequency combination: `w_i + w_j` or `-w_i + w_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairCombo {
    Sum,
    Diff,
}

impl PairCombo {
    pub fn sigma(&self, wi: f64, wj: f64) -> f64 {
        match self {
            PairCombo::Sum => wi + wj,
            PairCombo::Diff => -wi + wj,
        }
    }
}

/// Cubic frequency combination `sigma_m`, `m` in `0..4`:
/// `(+,+,+), (-,+,+), (+,-,+), (+,+,-)` on `(w_i, w_j, w_k)`.
pub fn sigma3(m: usize, wi: f64, wj: f64, wk: f64) -> f64 {
    match m {
        0 => wi + wj + wk,
        1 => -wi + wj + wk,
        2 => wi - wj + wk,
        _ => wi + wj - wk,
    }
}

/// The master position left over after an exact `+w -w` index cancellation
/// in combination `m`, if any.
pub fn trivial_row(m: usize, i: usize, j: usize, k: usize) -> Option<usize> {
    match m {
        1 => (i == j).then_some(k).or((i == k).then_some(j)),
        2 => (j == i).then_some(k).or((j == k).then_some(i)),
        3 => (k == i).then_some(j).or((k == j).then_some(i)),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct SecondOrderResonance {
    /// Global mode hit by the combination.
    pub s: usize,
    /// Master positions forming the combination.
    pub i: usize,
    pub j: usize,
    pub combo: PairCombo,
    pub sigma: f64,
    /// `|sigma^2 - w_s^2| / w_s^2`.
    pub detuning: f64,
    /// True when declared by the user rather than detected.
    pub declared: bool,
}

#[derive(Debug, Clone)]
pub struct ThirdOrderResonance {
    pub s: usize,
    pub i: usize,
    pub j: usize,
    pub k: usize,
    /// Combination index into [`sigma3`].
    pub combo: usize,
    pub sigma: f64,
    pub detuning: f64,
    /// Exact index-cancellation resonance (always present, stays in the
    /// reduced dynamics as the hardening/softening terms).
    pub trivial: bool,
    pub declared: bool,
}

#[derive(Debug, Clone)]
pub struct ResonanceSet {
    pub tol: f64,
    /// Master positions this set was built for.
    pub masters: Vec<usize>,
    pub second: Vec<SecondOrderResonance>,
    pub third: Vec<ThirdOrderResonance>,
    pub warnings: Vec<String>,
}

impl ResonanceSet {
    pub fn has_second_order(&self) -> bool {
        !self.second.is_empty()
    }

    /// Global modes flagged for the pair combination `(i, j, combo)`.
    pub fn second_flags(&self, i: usize, j: usize, combo: PairCombo) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .second
            .iter()
            .filter(|r| r.i == i && r.j == j && r.combo == combo)
            .map(|r| r.s)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Global modes flagged for the triple combination `(i, j, k, m)`.
    pub fn third_flags(&self, i: usize, j: usize, k: usize, m: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .third
            .iter()
            .filter(|r| r.i == i && r.j == j && r.k == k && r.combo == m)
            .map(|r| r.s)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Union of the flags of both pair combinations: a resonant mode is
    /// pinned out of the whole quadratic row (a, b and gamma share the
    /// quartic denominator), so every second-order solve of the pair carries
    /// the same border set.
    pub fn pair_flags(&self, i: usize, j: usize) -> Vec<usize> {
        let mut out = self.second_flags(i, j, PairCombo::Sum);
        out.extend(self.second_flags(i, j, PairCombo::Diff));
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Union of the flags of the four cubic combinations of a triple: the
    /// augmentation zeroes the flagged mode's row in every Z vector of the
    /// triple, so the retained reduced-dynamics coefficients stay exactly
    /// the `(A + h, B)` projections.
    pub fn triple_flags(&self, i: usize, j: usize, k: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for m in 0..4 {
            out.extend(self.third_flags(i, j, k, m));
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Non-trivial cubic resonances grouped as (equation mode s, index
    /// multiset), for reduced-dynamics monomial injection.
    pub fn nontrivial_third(&self) -> Vec<(usize, [usize; 3])> {
        let mut out = Vec::new();
        for r in self.third.iter().filter(|r| !r.trivial) {
            let mut t = [r.i, r.j, r.k];
            t.sort_unstable();
            if !out.contains(&(r.s, t)) {
                out.push((r.s, t));
            }
        }
        out.sort_unstable();
        out
    }

    /// Declares a second-order resonance `(s, i, j)`; the combination with
    /// the smallest detuning is flagged.
    pub fn declare_second(&mut self, spectrum: &Spectrum, s: usize, i: usize, j: usize) -> Result<()> {
        self.check_indices(spectrum, s, &[i, j])?;
        let (wi, wj) = (
            spectrum.omegas[self.masters[i]],
            spectrum.omegas[self.masters[j]],
        );
        let ws2 = spectrum.omegas[s] * spectrum.omegas[s];
        let best = [PairCombo::Sum, PairCombo::Diff]
            .into_iter()
            .min_by(|a, b| {
                let da = (a.sigma(wi, wj).powi(2) - ws2).abs();
                let db = (b.sigma(wi, wj).powi(2) - ws2).abs();
                da.total_cmp(&db)
            })
            .unwrap();
        let sigma = best.sigma(wi, wj);
        self.second.push(SecondOrderResonance {
            s,
            i,
            j,
            combo: best,
            sigma,
            detuning: (sigma * sigma - ws2).abs() / ws2,
            declared: true,
        });
        // Declared resonances hold for both index orders of the pair.
        if i != j {
            let sigma_rev = match best {
                PairCombo::Sum => PairCombo::Sum.sigma(wj, wi),
                PairCombo::Diff => PairCombo::Diff.sigma(wj, wi),
            };
            let combo_rev = match best {
                PairCombo::Sum => PairCombo::Sum,
                // -wi + wj flips sign under swap but keeps sigma^2.
                PairCombo::Diff => PairCombo::Diff,
            };
            self.second.push(SecondOrderResonance {
                s,
                i: j,
                j: i,
                combo: combo_rev,
                sigma: sigma_rev,
                detuning: (sigma_rev * sigma_rev - ws2).abs() / ws2,
                declared: true,
            });
        }
        Ok(())
    }

    /// Declares a cubic resonance `(s, i, j, k)`: for every ordered
    /// arrangement of the triple, the combination closest to `w_s` is
    /// flagged.
    pub fn declare_third(
        &mut self,
        spectrum: &Spectrum,
        s: usize,
        i: usize,
        j: usize,
        k: usize,
    ) -> Result<()> {
        self.check_indices(spectrum, s, &[i, j, k])?;
        let ws2 = spectrum.omegas[s] * spectrum.omegas[s];
        let mut triple = [i, j, k];
        triple.sort_unstable();
        for (a, b, c) in crate::model::polynomial::distinct_perms3(triple[0], triple[1], triple[2])
        {
            let (wa, wb, wc) = (
                spectrum.omegas[self.masters[a]],
                spectrum.omegas[self.masters[b]],
                spectrum.omegas[self.masters[c]],
            );
            let m = (0..4)
                .min_by(|&m1, &m2| {
                    let d1 = (sigma3(m1, wa, wb, wc).powi(2) - ws2).abs();
                    let d2 = (sigma3(m2, wa, wb, wc).powi(2) - ws2).abs();
                    d1.total_cmp(&d2)
                })
                .unwrap();
            let sigma = sigma3(m, wa, wb, wc);
            self.third.push(ThirdOrderResonance {
                s,
                i: a,
                j: b,
                k: c,
                combo: m,
                sigma,
                detuning: (sigma * sigma - ws2).abs() / ws2,
                trivial: false,
                declared: true,
            });
        }
        Ok(())
    }

    fn check_indices(&self, spectrum: &Spectrum, s: usize, masters: &[usize]) -> Result<()> {
        if s >= spectrum.n_computed() {
            return Err(Error::Validation(format!(
                "resonant mode {s} is outside the {} computed modes",
                spectrum.n_computed()
            )));
        }
        for &m in masters {
            if m >= self.masters.len() {
                return Err(Error::Validation(format!(
                    "master position {m} is outside the {} masters",
                    self.masters.len()
                )));
            }
        }
        Ok(())
    }
}

/// Scans all pair and triple combinations over the master set against every
/// computed mode.
pub fn detect_resonances(spectrum: &Spectrum, masters: &[usize], tol: f64) -> Result<ResonanceSet> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("resonance tolerance must be > 0, got {tol}")));
    }
    for &m in masters {
        if m >= spectrum.n_computed() {
            return Err(Error::Validation(format!(
                "master mode {m} is outside the {} computed modes",
                spectrum.n_computed()
            )));
        }
    }
    let n = masters.len();
    let w = |p: usize| spectrum.omegas[masters[p]];
    let mut set = ResonanceSet {
        tol,
        masters: masters.to_vec(),
        second: Vec::new(),
        third: Vec::new(),
        warnings: Vec::new(),
    };
    for s in 0..spectrum.n_computed() {
        let ws2 = spectrum.omegas[s] * spectrum.omegas[s];
        for i in 0..n {
            for j in 0..n {
                for combo in [PairCombo::Sum, PairCombo::Diff] {
                    let sigma = combo.sigma(w(i), w(j));
                    let det = (sigma * sigma - ws2).abs() / ws2;
                    if det <= tol {
                        set.second.push(SecondOrderResonance {
                            s,
                            i,
                            j,
                            combo,
                            sigma,
                            detuning: det,
                            declared: false,
                        });
                    } else if det <= 10.0 * tol {
                        set.warnings.push(format!(
                            "near second-order resonance: sigma={sigma:.6e} ({combo:?} of \
                             masters {i},{j}) vs mode {s} at relative detuning {det:.3e}"
                        ));
                    }
                }
                for k in 0..n {
                    for m in 0..4 {
                        let sigma = sigma3(m, w(i), w(j), w(k));
                        let det = (sigma * sigma - ws2).abs() / ws2;
                        let trivial = trivial_row(m, i, j, k)
                            .map(|p| masters[p] == s)
                            .unwrap_or(false);
                        if trivial || det <= tol {
                            set.third.push(ThirdOrderResonance {
                                s,
                                i,
                                j,
                                k,
                                combo: m,
                                sigma,
                                detuning: det,
                                trivial,
                                declared: false,
                            });
                        } else if det <= 10.0 * tol {
                            set.warnings.push(format!(
                                "near third-order resonance: sigma={sigma:.6e} (combination \
                                 {m} of masters {i},{j},{k}) vs mode {s} at relative \
                                 detuning {det:.3e}"
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(set)
}
