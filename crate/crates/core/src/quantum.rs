//! Quantized standard map on the torus, the leak projector, and resonance
//! spectra of the open propagator `Ũ = Π U`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::map::Leak;
use crate::schur::{self, max_abs, SchurDecomposition};
use crate::stats;

/// Moduli below this are zero modes: `Γ = ∞`, `T = 0`.
pub const ZERO_MODE_MODULUS: f64 = 1e-14;
/// Decay rates at or below this are reported as infinite dwell time.
pub const CLOSED_DECAY_RATE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantumParams {
    /// Hilbert-space dimension `N = 2π/ħ`.
    pub n: usize,
    pub k: f64,
}

impl QuantumParams {
    pub fn new(n: usize, k: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter {
                name: "N",
                reason: format!("Hilbert-space dimension must be at least 2, got {n}"),
            });
        }
        if !k.is_finite() {
            return Err(Error::InvalidParameter {
                name: "K",
                reason: format!("must be finite, got {k}"),
            });
        }
        Ok(Self { n, k })
    }

    /// Position of basis index `k = 1..=N`.
    pub fn position(&self, k: usize) -> f64 {
        k as f64 / self.n as f64
    }
}

#[derive(Clone, Debug)]
pub struct UnitaryPropagator(pub DMatrix<C64>);

impl UnitaryPropagator {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `max |U†U - I|`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.dim();
        let g = self.0.adjoint() * &self.0;
        max_abs(&(g - DMatrix::<C64>::identity(n, n)))
    }
}

/// One-period Floquet operator in the position basis `q = k/N`, `k = 1..=N`:
///
/// `U_{k,k'} = N^{-1/2} exp[iπ(k-k')²/N + i(NK/2π) cos(2πk'/N)]`.
pub fn build_unitary(params: QuantumParams) -> Result<UnitaryPropagator> {
    let QuantumParams { n, k } = QuantumParams::new(params.n, params.k)?;
    let nf = n as f64;
    let norm = 1.0 / nf.sqrt();
    let kick: Vec<f64> = (1..=n)
        .map(|kp| nf * k / (2.0 * PI) * (2.0 * PI * (kp % n) as f64 / nf).cos())
        .collect();
    // exp(iπ d²/N) only depends on d² mod 2N.
    let modulus = 2 * n as u64;
    let free: Vec<C64> = (0..n as u64)
        .map(|d| C64::from_polar(norm, PI * ((d * d) % modulus) as f64 / nf))
        .collect();
    let columns: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|col| {
            let phase = C64::from_polar(1.0, kick[col]);
            (0..n).map(|row| free[row.abs_diff(col)] * phase).collect()
        })
        .collect();
    let data: Vec<C64> = columns.into_iter().flatten().collect();
    Ok(UnitaryPropagator(DMatrix::from_vec(n, n, data)))
}

/// Diagonal projector onto the complement of the leak.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeakProjector {
    /// `survives[k-1]` for basis index `k`.
    pub survives: Vec<bool>,
}

impl LeakProjector {
    pub fn dim(&self) -> usize {
        self.survives.len()
    }

    pub fn masked_count(&self) -> usize {
        self.survives.iter().filter(|&&s| !s).count()
    }

    /// Basis indices `k` (1-based) inside the leak.
    pub fn masked_indices(&self) -> Vec<usize> {
        self.survives
            .iter()
            .enumerate()
            .filter(|(_, &s)| !s)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

pub fn build_projector(params: QuantumParams, leak: Leak) -> LeakProjector {
    LeakProjector {
        survives: (1..=params.n)
            .map(|k| !leak.contains_q(params.position(k)))
            .collect(),
    }
}

#[derive(Clone, Debug)]
pub struct OpenPropagator(pub DMatrix<C64>);

/// `Ũ = Π U`: rows of `U` inside the leak are zeroed.
pub fn open_propagator(u: &UnitaryPropagator, projector: &LeakProjector) -> Result<OpenPropagator> {
    if projector.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: projector.dim(),
        });
    }
    let mut m = u.0.clone();
    for (row, _) in projector.survives.iter().enumerate().filter(|(_, &s)| !s) {
        m.row_mut(row).fill(C64::new(0.0, 0.0));
    }
    Ok(OpenPropagator(m))
}

/// One eigenvalue `z = exp(iθ - Γ/2)` of the open propagator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resonance {
    pub z: C64,
    pub theta: f64,
    pub gamma: f64,
    /// `T = 1/Γ`; `0` for zero modes, `+∞` for non-decaying states.
    pub dwell: f64,
}

impl Resonance {
    pub fn from_eigenvalue(z: C64) -> Self {
        let modulus = z.norm();
        let theta = z.arg();
        if modulus < ZERO_MODE_MODULUS {
            return Self {
                z,
                theta,
                gamma: f64::INFINITY,
                dwell: 0.0,
            };
        }
        let gamma = (-2.0 * modulus.ln()).max(0.0);
        let dwell = if gamma <= CLOSED_DECAY_RATE {
            f64::INFINITY
        } else {
            1.0 / gamma
        };
        Self {
            z,
            theta,
            gamma,
            dwell,
        }
    }

    pub fn is_zero_mode(&self) -> bool {
        self.dwell == 0.0
    }
}

/// Resonances ordered by non-increasing `|z|` together with the matching
/// reordered Schur factorization.
#[derive(Clone, Debug)]
pub struct ResonanceSet {
    pub resonances: Vec<Resonance>,
    pub schur: SchurDecomposition,
}

impl ResonanceSet {
    pub fn len(&self) -> usize {
        self.resonances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resonances.is_empty()
    }

    /// Schur vector `k` (0-based, in dwell-time order).
    pub fn schur_vector(&self, k: usize) -> Vec<C64> {
        self.schur.vectors.column(k).iter().copied().collect()
    }

    pub fn dwell_times(&self) -> Vec<f64> {
        self.resonances.iter().map(|r| r.dwell).collect()
    }
}

/// Sorted Schur factorization of `Ũ`. The masked rows of `Ũ` are exactly
/// zero and are deflated, so the zero modes come out as exact zeros whose
/// Schur vectors are the position states of the masked sites.
pub fn resonance_spectrum(op: &OpenPropagator) -> Result<ResonanceSet> {
    let schur = schur::deflated_sorted_schur(&op.0)?;
    let resonances = schur
        .eigenvalues()
        .into_iter()
        .map(Resonance::from_eigenvalue)
        .collect();
    Ok(ResonanceSet { resonances, schur })
}

/// Eigenvalues only, sorted by non-increasing modulus.
pub fn resonance_eigenvalues(op: &OpenPropagator) -> Result<Vec<Resonance>> {
    let mut z = schur::deflated_eigenvalues(&op.0)?;
    z.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    Ok(z.into_iter().map(Resonance::from_eigenvalue).collect())
}

/// Options of the quantum leak scans.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QuantumScanOptions {
    /// Leave zero modes (`T = 0`) out of `⟨T⟩`.
    pub exclude_zero_modes: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantumScanPoint {
    pub center: f64,
    pub mean_dwell: f64,
    pub dwell_stderr: f64,
    pub zero_modes: usize,
    /// States with infinite dwell time; only nonzero for a closed system.
    pub non_decaying: usize,
}

/// `⟨T⟩` over a set of resonances. Infinite dwell times are always left out.
pub fn mean_dwell(center: f64, resonances: &[Resonance], options: QuantumScanOptions) -> QuantumScanPoint {
    let values: Vec<f64> = resonances
        .iter()
        .filter(|r| r.dwell.is_finite())
        .filter(|r| !(options.exclude_zero_modes && r.is_zero_mode()))
        .map(|r| r.dwell)
        .collect();
    let (mean_dwell, dwell_stderr) = stats::mean_and_stderr(&values).unwrap_or((f64::NAN, f64::NAN));
    QuantumScanPoint {
        center,
        mean_dwell,
        dwell_stderr,
        zero_modes: resonances.iter().filter(|r| r.is_zero_mode()).count(),
        non_decaying: resonances.iter().filter(|r| r.dwell.is_infinite()).count(),
    }
}

/// Builds `Ũ` for one leak.
pub fn open_map(params: QuantumParams, u: &UnitaryPropagator, leak: Leak) -> Result<OpenPropagator> {
    open_propagator(u, &build_projector(params, leak))
}

/// `⟨T⟩(q̄_L)` over all `N` resonances for each leak center.
pub fn leak_scan_quantum(
    params: QuantumParams,
    positions: &[f64],
    width: f64,
    options: QuantumScanOptions,
) -> Result<Vec<QuantumScanPoint>> {
    let u = build_unitary(params)?;
    positions
        .par_iter()
        .map(|&c| {
            let leak = Leak::new(c, width)?;
            let res = resonance_eigenvalues(&open_map(params, &u, leak)?)?;
            Ok(mean_dwell(leak.center, &res, options))
        })
        .collect()
}
