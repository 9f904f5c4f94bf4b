//! Helpers for reading leak-position scans: extrema on the periodic scan
//! axis, reflection symmetry about `q̄_L = 1/2`, and curve comparisons.

use serde::Serialize;

use crate::map::wrap_unit;
use crate::stats;

/// Indices of strict local minima of a curve sampled on a periodic axis.
pub fn local_minima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    if n < 3 {
        return Vec::new();
    }
    (0..n)
        .filter(|&i| {
            let prev = values[(i + n - 1) % n];
            let next = values[(i + 1) % n];
            values[i] < prev && values[i] < next
        })
        .collect()
}

pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let neg: Vec<f64> = values.iter().map(|v| -v).collect();
    local_minima(&neg)
}

pub fn argmin(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
}

pub fn argmax(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_nan())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
}

/// Circular distance between two points of `[0, 1)`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = wrap_unit(a - b);
    d.min(1.0 - d)
}

/// Index of the position reflected about `1/2`, if it is part of the scan.
pub fn mirror_index(positions: &[f64], i: usize) -> Option<usize> {
    let target = wrap_unit(1.0 - positions[i]);
    positions
        .iter()
        .position(|&p| circular_distance(p, target) < 1e-9)
}

/// Worst violation of `|O(x) - O(1-x)| <= k·sqrt(se(x)² + se(1-x)²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SymmetryCheck {
    pub pairs: usize,
    /// Largest `|O(x) - O(1-x)|` over the pairs.
    pub max_difference: f64,
    /// Largest difference in units of the combined standard error.
    pub max_sigmas: f64,
}

impl SymmetryCheck {
    pub fn passes(&self, sigmas: f64) -> bool {
        self.max_sigmas <= sigmas
    }
}

pub fn symmetry_check(positions: &[f64], values: &[f64], stderr: &[f64]) -> SymmetryCheck {
    let mut check = SymmetryCheck {
        pairs: 0,
        max_difference: 0.0,
        max_sigmas: 0.0,
    };
    for i in 0..positions.len() {
        let Some(j) = mirror_index(positions, i) else {
            continue;
        };
        if j <= i {
            continue;
        }
        check.pairs += 1;
        let diff = (values[i] - values[j]).abs();
        let se = stderr[i].hypot(stderr[j]);
        check.max_difference = check.max_difference.max(diff);
        let sig = if diff == 0.0 {
            0.0
        } else if se > 0.0 {
            diff / se
        } else {
            f64::INFINITY
        };
        check.max_sigmas = check.max_sigmas.max(sig);
    }
    check
}

/// Root-mean-square difference of two curves.
pub fn rms_difference(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ss = stats::sum(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)));
    (ss / a.len() as f64).sqrt()
}
