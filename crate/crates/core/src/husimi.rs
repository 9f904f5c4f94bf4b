//! Torus coherent states, Husimi distributions of Schur states and their
//! Wehrl entropies.
//!
//! The coherent state centred at `(q₀, p₀)` has position amplitudes
//!
//! ```text
//! α_k ∝ Σ_{|m| ≤ 3} exp[-πN(k/N - q₀ - m)² + 2πiN p₀ (k/N - m)]
//! ```
//!
//! Substituting `κ = k - Nm` turns the overlap `⟨α|v⟩` into a Gaussian-
//! windowed Fourier sum over the periodically extended state,
//! `Σ_κ exp[-π(κ - Nq₀)²/N] v_{κ mod N} e^{-2πi p₀ κ}`, so one row of the
//! Husimi grid (fixed `q₀`, all `p₀`) costs a single FFT.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::map::Leak;
use crate::quantum::{
    build_unitary, mean_dwell, open_map, resonance_spectrum, QuantumParams, QuantumScanOptions,
    ResonanceSet,
};
use crate::stats::{self, CompensatedSum};

/// Number of periodic images kept on each side.
pub const IMAGE_CUTOFF: i64 = 3;
/// Gaussian weights below `exp(-WINDOW_EXPONENT)` are skipped.
const WINDOW_EXPONENT: f64 = 50.0;

#[derive(Clone, Debug, PartialEq)]
pub struct CoherentState {
    pub q: f64,
    pub p: f64,
    /// Unit-norm amplitudes on `k = 1..=N` (index `k - 1`).
    pub amplitudes: Vec<C64>,
}

pub fn coherent_state(q: f64, p: f64, n: usize) -> Result<CoherentState> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "N",
            reason: format!("must be at least 2, got {n}"),
        });
    }
    let nf = n as f64;
    let mut amplitudes: Vec<C64> = (1..=n)
        .map(|k| {
            (-IMAGE_CUTOFF..=IMAGE_CUTOFF)
                .map(|m| {
                    let x = k as f64 / nf - q - m as f64;
                    let kappa = k as f64 - nf * m as f64;
                    C64::from_polar((-PI * nf * x * x).exp(), 2.0 * PI * p * kappa)
                })
                .sum()
        })
        .collect();
    let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amplitudes {
        *a /= norm;
    }
    Ok(CoherentState { q, p, amplitudes })
}

pub fn overlap(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Husimi cell masses on an `m_q × m_p` cell-centred grid, q-major
/// (`values[i * m_p + j]`), summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct HusimiField {
    pub m_q: usize,
    pub m_p: usize,
    pub values: Vec<f64>,
}

impl HusimiField {
    pub fn uniform(m_q: usize, m_p: usize) -> Self {
        let len = m_q * m_p;
        Self {
            m_q,
            m_p,
            values: vec![1.0 / len as f64; len],
        }
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.m_p + j]
    }

    pub fn cell_area(&self) -> f64 {
        1.0 / (self.m_q * self.m_p) as f64
    }

    /// Cell index `(i, j)` of the largest mass.
    pub fn argmax(&self) -> (usize, usize) {
        let idx = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
            .0;
        (idx / self.m_p, idx % self.m_p)
    }

    fn normalize(&mut self) -> Result<()> {
        let total = stats::sum(self.values.iter().copied());
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::DegenerateField);
        }
        for v in &mut self.values {
            *v /= total;
        }
        Ok(())
    }
}

/// Precomputed coherent-state norms and FFT plan for a fixed `N` and grid.
pub struct HusimiPlan {
    n: usize,
    m_q: usize,
    m_p: usize,
    /// `‖α̃(q_i, p_j)‖²` of the unnormalized coherent states.
    norms: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for HusimiPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HusimiPlan")
            .field("n", &self.n)
            .field("m_q", &self.m_q)
            .field("m_p", &self.m_p)
            .finish()
    }
}

impl HusimiPlan {
    pub fn new(n: usize, m_q: usize, m_p: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter {
                name: "N",
                reason: format!("must be at least 2, got {n}"),
            });
        }
        if m_q < 2 || m_p < 2 {
            return Err(Error::InvalidParameter {
                name: "husimi resolution",
                reason: format!("need at least 2 cells per axis, got {m_q}x{m_p}"),
            });
        }
        let nf = n as f64;
        let images = (2 * IMAGE_CUTOFF + 1) as usize;
        let norms = (0..m_q)
            .into_par_iter()
            .flat_map_iter(|i| {
                let q0 = (i as f64 + 0.5) / m_q as f64;
                // Gram matrix of the image Gaussians g_m(k).
                let mut gram = vec![0.0; images * images];
                for k in 1..=n {
                    let g: Vec<f64> = (-IMAGE_CUTOFF..=IMAGE_CUTOFF)
                        .map(|m| {
                            let x = k as f64 / nf - q0 - m as f64;
                            (-PI * nf * x * x).exp()
                        })
                        .collect();
                    for a in 0..images {
                        for b in 0..images {
                            gram[a * images + b] += g[a] * g[b];
                        }
                    }
                }
                (0..m_p).map(move |j| {
                    let p0 = (j as f64 + 0.5) / m_p as f64;
                    let mut acc = CompensatedSum::new();
                    for a in 0..images {
                        for b in 0..images {
                            let d = a as f64 - b as f64;
                            acc.add(gram[a * images + b] * (2.0 * PI * nf * p0 * d).cos());
                        }
                    }
                    acc.value()
                })
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(m_p);
        Ok(Self {
            n,
            m_q,
            m_p,
            norms,
            fft,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.m_q, self.m_p)
    }

    /// Husimi distribution `|⟨α(q,p)|v⟩|²` of a state, normalized to unit
    /// cell-mass sum.
    pub fn husimi(&self, state: &[C64]) -> Result<HusimiField> {
        if state.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: state.len(),
            });
        }
        let norm2: f64 = state.iter().map(|a| a.norm_sqr()).sum();
        if norm2 == 0.0 || !norm2.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let (n, m_q, m_p) = (self.n as i64, self.m_q, self.m_p);
        let nf = n as f64;
        let half_width = (WINDOW_EXPONENT * nf / PI).sqrt();
        let kappa_min = 1 - IMAGE_CUTOFF * n;
        let kappa_max = n + IMAGE_CUTOFF * n;
        let twiddle = -PI / m_p as f64;

        let mut values = vec![0.0; m_q * m_p];
        let mut buf = vec![C64::new(0.0, 0.0); m_p];
        let mut scratch = vec![C64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for (i, row) in values.chunks_mut(m_p).enumerate() {
            let center = (i as f64 + 0.5) / m_q as f64 * nf;
            let lo = ((center - half_width).floor() as i64).max(kappa_min);
            let hi = ((center + half_width).ceil() as i64).min(kappa_max);
            buf.fill(C64::new(0.0, 0.0));
            for kappa in lo..=hi {
                let d = kappa as f64 - center;
                let g = (-PI * d * d / nf).exp();
                let v = state[((kappa - 1).rem_euclid(n)) as usize];
                let slot = kappa.rem_euclid(m_p as i64) as usize;
                buf[slot] += v * C64::from_polar(g, twiddle * kappa as f64);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            let norms = &self.norms[i * m_p..(i + 1) * m_p];
            for ((out, s), nrm) in row.iter_mut().zip(&buf).zip(norms) {
                *out = s.norm_sqr() / nrm;
            }
        }
        let mut field = HusimiField { m_q, m_p, values };
        field.normalize()?;
        Ok(field)
    }
}

/// Convenience wrapper building a one-off plan.
pub fn husimi(state: &[C64], m_q: usize, m_p: usize) -> Result<HusimiField> {
    HusimiPlan::new(state.len(), m_q, m_p)?.husimi(state)
}

/// Mean Husimi field of the `m` Schur states with the largest dwell times.
pub fn mean_husimi(resonances: &ResonanceSet, m: usize, plan: &HusimiPlan) -> Result<HusimiField> {
    let available = resonances
        .resonances
        .iter()
        .filter(|r| r.dwell > 0.0)
        .count();
    if m == 0 || m > available {
        return Err(Error::NotEnoughStates {
            requested: m,
            available,
        });
    }
    let fields = (0..m)
        .into_par_iter()
        .map(|k| plan.husimi(&resonances.schur_vector(k)))
        .collect::<Result<Vec<_>>>()?;
    let (m_q, m_p) = plan.resolution();
    let mut values = vec![0.0; m_q * m_p];
    for (idx, v) in values.iter_mut().enumerate() {
        *v = stats::sum(fields.iter().map(|f| f.values[idx])) / m as f64;
    }
    let mut field = HusimiField { m_q, m_p, values };
    field.normalize()?;
    Ok(field)
}

/// Differential entropy `-Σ Q̃ ln Q̃ ΔA` of the density `Q̃ = mass / ΔA`,
/// with `0 ln 0 = 0`.
pub fn differential_entropy(field: &HusimiField) -> f64 {
    let area = field.cell_area();
    let mut acc = CompensatedSum::new();
    for &mass in &field.values {
        if mass > 0.0 {
            acc.add(-mass * (mass / area).ln());
        }
    }
    acc.value()
}

/// Affine entropy scale anchored at a reference coherent state (→ 0) and
/// the uniform density (→ 1), for one `N` and grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WehrlScale {
    pub coherent_entropy: f64,
    pub n: usize,
    pub m_q: usize,
    pub m_p: usize,
}

impl WehrlScale {
    pub fn new(plan: &HusimiPlan) -> Result<Self> {
        let reference = coherent_state(0.5, 0.5, plan.dim())?;
        let s = differential_entropy(&plan.husimi(&reference.amplitudes)?);
        if s >= 0.0 {
            return Err(Error::InvalidParameter {
                name: "husimi resolution",
                reason: format!(
                    "reference coherent-state entropy {s} is not below the uniform value 0"
                ),
            });
        }
        let (m_q, m_p) = plan.resolution();
        Ok(Self {
            coherent_entropy: s,
            n: plan.dim(),
            m_q,
            m_p,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WehrlRecord {
    /// Normalized Wehrl entropy in `[0, 1]`.
    pub s_w: f64,
    /// Raw differential entropy.
    pub entropy: f64,
    pub dwell: Option<f64>,
}

pub fn wehrl_entropy(field: &HusimiField, scale: &WehrlScale) -> Result<WehrlRecord> {
    if field.values.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateField);
    }
    if (field.m_q, field.m_p) != (scale.m_q, scale.m_p) {
        return Err(Error::DimensionMismatch {
            expected: scale.m_q * scale.m_p,
            found: field.m_q * field.m_p,
        });
    }
    let entropy = differential_entropy(field);
    let s_w = ((entropy - scale.coherent_entropy) / -scale.coherent_entropy).clamp(0.0, 1.0);
    Ok(WehrlRecord {
        s_w,
        entropy,
        dwell: None,
    })
}

/// Wehrl entropy of every Schur state, in dwell-time order.
pub fn schur_entropies(
    resonances: &ResonanceSet,
    plan: &HusimiPlan,
    scale: &WehrlScale,
) -> Result<Vec<WehrlRecord>> {
    (0..resonances.len())
        .into_par_iter()
        .map(|k| {
            let field = plan.husimi(&resonances.schur_vector(k))?;
            let mut rec = wehrl_entropy(&field, scale)?;
            rec.dwell = Some(resonances.resonances[k].dwell);
            Ok(rec)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyPoint {
    pub dwell: f64,
    pub s_w: f64,
    /// `None` for states with infinite dwell time.
    pub bin: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyBin {
    pub index: usize,
    pub lower: f64,
    pub upper: f64,
    pub mean_s_w: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyVsDwell {
    pub points: Vec<EntropyPoint>,
    pub bins: Vec<EntropyBin>,
}

impl EntropyVsDwell {
    pub fn max_entropy(&self) -> f64 {
        self.points.iter().map(|p| p.s_w).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Bins `(T, S_W)` pairs into dwell-time intervals of width `bin_width`.
pub fn bin_entropies(records: &[WehrlRecord], bin_width: f64) -> Result<EntropyVsDwell> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "dwell bin width",
            reason: format!("must be positive, got {bin_width}"),
        });
    }
    let points: Vec<EntropyPoint> = records
        .iter()
        .map(|r| {
            let dwell = r.dwell.unwrap_or(f64::NAN);
            let bin = dwell.is_finite().then(|| (dwell / bin_width).floor() as usize);
            EntropyPoint {
                dwell,
                s_w: r.s_w,
                bin,
            }
        })
        .collect();
    let mut grouped: std::collections::BTreeMap<usize, (CompensatedSum, usize)> = Default::default();
    for p in &points {
        if let Some(b) = p.bin {
            let e = grouped.entry(b).or_default();
            e.0.add(p.s_w);
            e.1 += 1;
        }
    }
    let bins = grouped
        .into_iter()
        .map(|(index, (s, count))| EntropyBin {
            index,
            lower: index as f64 * bin_width,
            upper: (index + 1) as f64 * bin_width,
            mean_s_w: s.value() / count as f64,
            count,
        })
        .collect();
    Ok(EntropyVsDwell { points, bins })
}

/// Per-state `(T_k, S_W)` with bin averages over dwell intervals.
pub fn entropy_vs_dwell(
    resonances: &ResonanceSet,
    bin_width: f64,
    plan: &HusimiPlan,
    scale: &WehrlScale,
) -> Result<EntropyVsDwell> {
    bin_entropies(&schur_entropies(resonances, plan, scale)?, bin_width)
}

/// Mean Wehrl entropy and mean dwell time of one leak position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyScanPoint {
    pub center: f64,
    pub mean_s_w: f64,
    pub s_w_stderr: f64,
    pub mean_dwell: f64,
    pub dwell_stderr: f64,
    pub zero_modes: usize,
}

/// `⟨S_W⟩(q̄_L)` over all `N` Schur states for each leak center. The same
/// factorization also yields `⟨T⟩`, reported alongside.
pub fn leak_scan_entropy(
    params: QuantumParams,
    positions: &[f64],
    width: f64,
    plan: &HusimiPlan,
    options: QuantumScanOptions,
) -> Result<Vec<EntropyScanPoint>> {
    if plan.dim() != params.n {
        return Err(Error::DimensionMismatch {
            expected: params.n,
            found: plan.dim(),
        });
    }
    let scale = WehrlScale::new(plan)?;
    let u = build_unitary(params)?;
    positions
        .iter()
        .map(|&c| {
            let leak = Leak::new(c, width)?;
            let res = resonance_spectrum(&open_map(params, &u, leak)?)?;
            let s_w: Vec<f64> = schur_entropies(&res, plan, &scale)?
                .iter()
                .map(|r| r.s_w)
                .collect();
            let (mean_s_w, s_w_stderr) = stats::mean_and_stderr(&s_w).unwrap_or((f64::NAN, f64::NAN));
            let dwell = mean_dwell(leak.center, &res.resonances, options);
            Ok(EntropyScanPoint {
                center: leak.center,
                mean_s_w,
                s_w_stderr,
                mean_dwell: dwell.mean_dwell,
                dwell_stderr: dwell.dwell_stderr,
                zero_modes: dwell.zero_modes,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn coherent_state_is_normalized() {
        for n in [2, 8, 64] {
            let s = coherent_state(0.3, 0.8, n).unwrap();
            assert_abs_diff_eq!(overlap(&s.amplitudes, &s.amplitudes).norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn coherent_state_is_torus_periodic() {
        let n = 32;
        let a = coherent_state(0.3, 0.6, n).unwrap();
        for (dq, dp) in [(1.0, 0.0), (0.0, 1.0), (-1.0, 1.0)] {
            let b = coherent_state(0.3 + dq, 0.6 + dp, n).unwrap();
            assert_abs_diff_eq!(overlap(&a.amplitudes, &b.amplitudes).norm(), 1.0, epsilon = 1e-10);
        }
    }

    /// Direct evaluation of `|⟨α|v⟩|²` cell by cell.
    fn brute_husimi(state: &[C64], m_q: usize, m_p: usize) -> Vec<f64> {
        let n = state.len();
        let mut out = Vec::with_capacity(m_q * m_p);
        for i in 0..m_q {
            for j in 0..m_p {
                let q = (i as f64 + 0.5) / m_q as f64;
                let p = (j as f64 + 0.5) / m_p as f64;
                let a = coherent_state(q, p, n).unwrap();
                out.push(overlap(&a.amplitudes, state).norm_sqr());
            }
        }
        let total: f64 = out.iter().sum();
        out.iter().map(|v| v / total).collect()
    }

    #[test]
    fn fft_husimi_matches_direct_overlaps() {
        for (n, m_q, m_p) in [(4, 6, 5), (16, 12, 10), (16, 8, 40), (33, 9, 7)] {
            let state: Vec<C64> = (0..n)
                .map(|k| C64::new((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos()))
                .collect();
            let fast = husimi(&state, m_q, m_p).unwrap();
            let slow = brute_husimi(&state, m_q, m_p);
            for (a, b) in fast.values.iter().zip(&slow) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn husimi_of_coherent_state_peaks_at_center() {
        let n = 64;
        let s = coherent_state(0.5, 0.5, n).unwrap();
        let f = husimi(&s.amplitudes, 51, 51).unwrap();
        assert_eq!(f.argmax(), (25, 25));
    }

    #[test]
    fn husimi_rejects_zero_state() {
        let z = vec![C64::new(0.0, 0.0); 8];
        assert!(matches!(husimi(&z, 10, 10), Err(Error::ZeroNorm)));
    }

    #[test]
    fn husimi_mass_sums_to_one() {
        let s = coherent_state(0.1, 0.9, 20).unwrap();
        let f = husimi(&s.amplitudes, 30, 30).unwrap();
        assert_abs_diff_eq!(stats::sum(f.values.iter().copied()), 1.0, epsilon = 1e-12);
        assert!(f.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn position_translation_shifts_husimi() {
        // Shifting amplitudes by N/m_q basis sites translates the field by one row.
        let n = 40;
        let m = 20;
        let state: Vec<C64> = (0..n)
            .map(|k| C64::new((k as f64 * 0.37).cos(), (k as f64 * 0.91).sin()))
            .collect();
        let shift = n / m;
        let moved: Vec<C64> = (0..n).map(|k| state[(k + n - shift) % n]).collect();
        let a = husimi(&state, m, 16).unwrap();
        let b = husimi(&moved, m, 16).unwrap();
        for i in 0..m {
            for j in 0..16 {
                assert_abs_diff_eq!(b.value((i + 1) % m, j), a.value(i, j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn entropy_endpoints_are_exact() {
        let plan = HusimiPlan::new(32, 40, 40).unwrap();
        let scale = WehrlScale::new(&plan).unwrap();
        let coh = coherent_state(0.5, 0.5, 32).unwrap();
        let rec = wehrl_entropy(&plan.husimi(&coh.amplitudes).unwrap(), &scale).unwrap();
        assert_eq!(rec.s_w, 0.0);
        let rec = wehrl_entropy(&HusimiField::uniform(40, 40), &scale).unwrap();
        assert_eq!(rec.entropy, 0.0);
        assert_eq!(rec.s_w, 1.0);
    }

    #[test]
    fn degenerate_field_rejected() {
        let plan = HusimiPlan::new(16, 20, 20).unwrap();
        let scale = WehrlScale::new(&plan).unwrap();
        let zero = HusimiField {
            m_q: 20,
            m_p: 20,
            values: vec![0.0; 400],
        };
        assert!(matches!(wehrl_entropy(&zero, &scale), Err(Error::DegenerateField)));
    }

    #[test]
    fn binning_single_state() {
        let rec = WehrlRecord {
            s_w: 0.7,
            entropy: -1.0,
            dwell: Some(0.5),
        };
        let e = bin_entropies(&[rec], 0.08).unwrap();
        assert_eq!(e.points.len(), 1);
        assert_eq!(e.bins.len(), 1);
        assert_eq!(e.bins[0].index, 6);
        assert_eq!(e.bins[0].mean_s_w, 0.7);
    }

    #[test]
    fn bin_means_within_member_range() {
        let recs: Vec<WehrlRecord> = (0..100)
            .map(|i| WehrlRecord {
                s_w: ((i * 37) % 100) as f64 / 100.0,
                entropy: 0.0,
                dwell: Some(i as f64 * 0.013),
            })
            .collect();
        let e = bin_entropies(&recs, 0.08).unwrap();
        for b in &e.bins {
            let members: Vec<f64> = e
                .points
                .iter()
                .filter(|p| p.bin == Some(b.index))
                .map(|p| p.s_w)
                .collect();
            let lo = members.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = members.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(b.mean_s_w >= lo - 1e-15 && b.mean_s_w <= hi + 1e-15);
            assert_eq!(members.len(), b.count);
        }
    }
}
