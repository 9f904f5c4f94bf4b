//! Grid ensembles of classical trajectories: FTLE and dwell-time fields,
//! histograms, strip and dwell-conditioned averages, survival curves and
//! leak-position scans.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::map::{evolve_open, ftle, EscapeRecord, Leak, MapParams, PhaseSpacePoint};
use crate::stats::{self, CompensatedSum};

/// Strips used for averaging follow exactly the leak geometry.
pub type StripRegion = Leak;

/// Cell-centred sampling of the unit torus, `x_ij = ((i+½)/n_q, (j+½)/n_p)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PhaseSpaceGrid {
    pub n_q: usize,
    pub n_p: usize,
}

impl PhaseSpaceGrid {
    pub fn new(n_q: usize, n_p: usize) -> Result<Self> {
        if n_q < 2 || n_p < 2 {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: format!("need at least 2 cells per axis, got {n_q}x{n_p}"),
            });
        }
        Ok(Self { n_q, n_p })
    }

    pub fn len(&self) -> usize {
        self.n_q * self.n_p
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn q(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.n_q as f64
    }

    pub fn p(&self, j: usize) -> f64 {
        (j as f64 + 0.5) / self.n_p as f64
    }

    pub fn point(&self, i: usize, j: usize) -> PhaseSpacePoint {
        PhaseSpacePoint::new(self.q(i), self.p(j))
    }

    /// Point of the flat, row-major (q-major) cell index.
    pub fn point_at(&self, idx: usize) -> PhaseSpacePoint {
        self.point(idx / self.n_p, idx % self.n_p)
    }
}

/// Per-cell values in q-major order (`values[i * n_p + j]`) with a validity
/// mask; masked-out cells are the discarded trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: PhaseSpaceGrid,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl ScalarField {
    pub fn new(grid: PhaseSpaceGrid, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        for len in [values.len(), mask.len()] {
            if len != grid.len() {
                return Err(Error::DimensionMismatch {
                    expected: grid.len(),
                    found: len,
                });
            }
        }
        Ok(Self { grid, values, mask })
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_p + j]
    }

    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// The field under the index reflection `(i, j) -> (n_q-1-i, n_p-1-j)`.
    pub fn reflected(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().rev().copied().collect(),
            mask: self.mask.iter().rev().copied().collect(),
        }
    }
}

/// FTLE after `n` iterations of the closed map for every grid cell.
pub fn ftle_field(grid: PhaseSpaceGrid, n: usize, params: MapParams) -> Result<ScalarField> {
    if n == 0 {
        return Err(Error::ZeroIterations);
    }
    let values = (0..grid.len())
        .into_par_iter()
        .map(|idx| ftle(grid.point_at(idx), n, params))
        .collect::<Result<Vec<_>>>()?;
    ScalarField::new(grid, values, vec![true; grid.len()])
}

/// Uniform-measure mean of the field over the cells inside `strip`.
pub fn strip_mean_ftle(field: &ScalarField, strip: StripRegion) -> Result<f64> {
    let grid = field.grid;
    let mut acc = CompensatedSum::new();
    let mut count = 0usize;
    for i in (0..grid.n_q).filter(|&i| strip.contains_q(grid.q(i))) {
        for j in 0..grid.n_p {
            let idx = i * grid.n_p + j;
            if field.mask[idx] {
                acc.add(field.values[idx]);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyStrip {
            center: strip.center,
            width: strip.width,
        });
    }
    Ok(acc.value() / count as f64)
}

/// Evolves every grid cell in the leaking map. Order matches the grid.
pub fn evolve_grid(
    grid: PhaseSpaceGrid,
    leak: Leak,
    t_max: u32,
    params: MapParams,
) -> Result<Vec<EscapeRecord>> {
    (0..grid.len())
        .into_par_iter()
        .map(|idx| evolve_open(grid.point_at(idx), leak, t_max, params))
        .collect()
}

/// Dwell-time and FTLE fields of one leaking-map run.
#[derive(Clone, Debug)]
pub struct OpenClassicalRun {
    pub dwell: ScalarField,
    pub ftle: ScalarField,
    pub records: Vec<EscapeRecord>,
    pub cutoff: u32,
    /// Fraction of initial conditions outside the leak that escaped before `t_max`.
    pub escaped_fraction: f64,
}

impl OpenClassicalRun {
    /// `true` when at least 99% of the valid trajectories escaped.
    pub fn escape_check_passed(&self) -> bool {
        self.escaped_fraction >= 0.99
    }
}

/// Builds masked fields from escape records. Cells with `τ < cutoff` and
/// cells starting inside the leak are masked out.
pub fn fields_from_records(
    grid: PhaseSpaceGrid,
    records: Vec<EscapeRecord>,
    cutoff: u32,
) -> Result<OpenClassicalRun> {
    if records.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: records.len(),
        });
    }
    let mask: Vec<bool> = records
        .iter()
        .map(|r| r.is_valid() && r.dwell >= cutoff)
        .collect();
    let dwell = records.iter().map(|r| r.dwell as f64).collect();
    let ftle = records.iter().map(|r| r.ftle.unwrap_or(f64::NAN)).collect();
    let valid = records.iter().filter(|r| r.is_valid()).count();
    let escaped = records.iter().filter(|r| r.is_valid() && r.escaped).count();
    let escaped_fraction = if valid == 0 {
        1.0
    } else {
        escaped as f64 / valid as f64
    };
    Ok(OpenClassicalRun {
        dwell: ScalarField::new(grid, dwell, mask.clone())?,
        ftle: ScalarField::new(grid, ftle, mask)?,
        records,
        cutoff,
        escaped_fraction,
    })
}

pub fn dwell_ftle_field(
    grid: PhaseSpaceGrid,
    leak: Leak,
    t_max: u32,
    params: MapParams,
    cutoff: u32,
) -> Result<OpenClassicalRun> {
    let records = evolve_grid(grid, leak, t_max, params)?;
    fields_from_records(grid, records, cutoff)
}

/// Normalized histogram of the unmasked values of a field.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub lower: f64,
    pub bin_width: f64,
    pub probabilities: Vec<f64>,
    /// Mean of the underlying samples.
    pub mean: f64,
    pub samples: usize,
}

impl Histogram {
    pub fn bin_edges(&self, bin: usize) -> (f64, f64) {
        let lo = self.lower + bin as f64 * self.bin_width;
        (lo, lo + self.bin_width)
    }
}

pub fn ftle_histogram(field: &ScalarField, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidParameter {
            name: "bins",
            reason: "need at least one bin".into(),
        });
    }
    let values: Vec<f64> = field.valid_values().collect();
    if values.is_empty() {
        return Err(Error::AllMasked);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let bin_width = if span > 0.0 { span / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in &values {
        let b = (((v - lo) / bin_width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let total = values.len() as f64;
    Ok(Histogram {
        lower: lo,
        bin_width,
        probabilities: counts.iter().map(|&c| c as f64 / total).collect(),
        mean: stats::sum(values.iter().copied()) / total,
        samples: values.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DwellBin {
    pub mean_ftle: f64,
    pub count: usize,
}

/// `⟨λ⟩_τ` for every dwell time present among the valid records.
pub fn mean_ftle_by_dwell(records: &[EscapeRecord]) -> BTreeMap<u32, DwellBin> {
    let mut acc: BTreeMap<u32, (CompensatedSum, usize)> = BTreeMap::new();
    for r in records {
        if let (true, Some(l)) = (r.is_valid(), r.ftle) {
            let e = acc.entry(r.dwell).or_default();
            e.0.add(l);
            e.1 += 1;
        }
    }
    acc.into_iter()
        .map(|(tau, (s, n))| {
            (
                tau,
                DwellBin {
                    mean_ftle: s.value() / n as f64,
                    count: n,
                },
            )
        })
        .collect()
}

/// Fraction of the ensemble that has not escaped after `n` iterations,
/// `n = 0..=t_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalCurve {
    pub probabilities: Vec<f64>,
}

/// Least-squares exponential fit `P(n) ≈ A e^{-rate · n}` over the tail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentialTail {
    pub rate: f64,
    pub ln_amplitude: f64,
    pub rms_residual: f64,
    pub first: usize,
    pub last: usize,
}

/// Tail window bounds on `P`.
pub const TAIL_WINDOW: (f64, f64) = (1e-3, 1e-1);
/// Largest RMS residual of `ln P` accepted as exponential.
pub const TAIL_MAX_RESIDUAL: f64 = 0.25;

impl SurvivalCurve {
    /// Survival from escape records; the denominator counts every initial
    /// condition, so `P(0)` excludes cells that start in the leak.
    pub fn from_records(records: &[EscapeRecord], t_max: u32) -> Self {
        let total = records.len().max(1) as f64;
        let mut escapes_at = vec![0usize; t_max as usize + 1];
        let mut survivors = 0usize;
        for r in records {
            if r.escaped {
                escapes_at[r.dwell.min(t_max) as usize] += 1;
            } else {
                survivors += 1;
            }
        }
        // Count of τ > n, accumulated from the end.
        let mut probabilities = vec![0.0; t_max as usize + 1];
        let mut alive = survivors;
        for n in (0..=t_max as usize).rev() {
            probabilities[n] = alive as f64 / total;
            alive += escapes_at[n];
        }
        Self { probabilities }
    }

    pub fn t_max(&self) -> usize {
        self.probabilities.len().saturating_sub(1)
    }

    pub fn tail_fit(&self) -> Result<ExponentialTail> {
        let (lo, hi) = TAIL_WINDOW;
        let (ns, lnp): (Vec<f64>, Vec<f64>) = self
            .probabilities
            .iter()
            .enumerate()
            .filter(|(_, &p)| (lo..=hi).contains(&p))
            .map(|(n, &p)| (n as f64, p.ln()))
            .unzip();
        if ns.len() < 3 {
            return Err(Error::NoExponentialRegime(format!(
                "only {} points with {lo:e} <= P <= {hi:e}",
                ns.len()
            )));
        }
        let fit = stats::fit_line(&ns, &lnp).ok_or_else(|| {
            Error::NoExponentialRegime("degenerate tail window".into())
        })?;
        if fit.slope >= 0.0 || fit.rms_residual > TAIL_MAX_RESIDUAL {
            return Err(Error::NoExponentialRegime(format!(
                "tail fit slope {} with rms residual {}",
                fit.slope, fit.rms_residual
            )));
        }
        Ok(ExponentialTail {
            rate: -fit.slope,
            ln_amplitude: fit.intercept,
            rms_residual: fit.rms_residual,
            first: ns[0] as usize,
            last: ns[ns.len() - 1] as usize,
        })
    }

    pub fn decay_rate(&self) -> Result<f64> {
        self.tail_fit().map(|t| t.rate)
    }
}

pub fn survival_probability(
    grid: PhaseSpaceGrid,
    leak: Leak,
    t_max: u32,
    params: MapParams,
) -> Result<SurvivalCurve> {
    let records = evolve_grid(grid, leak, t_max, params)?;
    Ok(SurvivalCurve::from_records(&records, t_max))
}

/// First iteration at which the local log-slope of `P` matches the fitted
/// tail rate within relative `tolerance`; shorter dwell times are discarded.
pub fn short_dwell_cutoff(curve: &SurvivalCurve, tolerance: f64) -> Result<u32> {
    let rate = curve.tail_fit()?.rate;
    let p = &curve.probabilities;
    (0..p.len().saturating_sub(1))
        .take_while(|&n| p[n + 1] > 0.0)
        .find(|&n| {
            let slope = (p[n + 1] / p[n]).ln();
            (slope + rate).abs() <= tolerance * rate
        })
        .map(|n| n as u32)
        .ok_or_else(|| {
            Error::NoExponentialRegime(format!(
                "local slope never matches tail rate {rate} within {tolerance}"
            ))
        })
}

/// Averages of one leak position over all valid initial conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalScanPoint {
    pub center: f64,
    pub mean_dwell: f64,
    pub dwell_stderr: f64,
    pub mean_ftle: f64,
    pub ftle_stderr: f64,
    pub valid: usize,
    pub non_escaped: usize,
}

/// Options of [`leak_scan_classical`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScanOptions {
    /// Drop trajectories that never escaped from `⟨λ⟩`. They always
    /// contribute `τ = t_max` to `⟨τ⟩`.
    pub exclude_non_escaping_ftle: bool,
}

pub fn scan_point_classical(
    center: f64,
    grid: PhaseSpaceGrid,
    width: f64,
    t_max: u32,
    params: MapParams,
    options: ScanOptions,
) -> Result<ClassicalScanPoint> {
    let leak = Leak::new(center, width)?;
    let records = evolve_grid(grid, leak, t_max, params)?;
    let valid: Vec<&EscapeRecord> = records.iter().filter(|r| r.is_valid()).collect();
    let dwell: Vec<f64> = valid.iter().map(|r| r.dwell as f64).collect();
    let lambdas: Vec<f64> = valid
        .iter()
        .filter(|r| r.escaped || !options.exclude_non_escaping_ftle)
        .filter_map(|r| r.ftle)
        .collect();
    let (mean_dwell, dwell_stderr) = stats::mean_and_stderr(&dwell).unwrap_or((0.0, 0.0));
    let (mean_ftle, ftle_stderr) =
        stats::mean_and_stderr(&lambdas).unwrap_or((f64::NAN, f64::NAN));
    Ok(ClassicalScanPoint {
        center: leak.center,
        mean_dwell,
        dwell_stderr,
        mean_ftle,
        ftle_stderr,
        valid: valid.len(),
        non_escaped: valid.iter().filter(|r| !r.escaped).count(),
    })
}

/// `⟨τ⟩(q̄_L)` and `⟨λ⟩(q̄_L)` over the given leak centers. No short-dwell
/// mask is applied.
pub fn leak_scan_classical(
    positions: &[f64],
    grid: PhaseSpaceGrid,
    width: f64,
    t_max: u32,
    params: MapParams,
    options: ScanOptions,
) -> Result<Vec<ClassicalScanPoint>> {
    positions
        .iter()
        .map(|&c| scan_point_classical(c, grid, width, t_max, params, options))
        .collect()
}

/// `count` leak centers uniformly spaced on `[0, 1)`.
pub fn uniform_positions(count: usize) -> Vec<f64> {
    (0..count).map(|i| i as f64 / count as f64).collect()
}
