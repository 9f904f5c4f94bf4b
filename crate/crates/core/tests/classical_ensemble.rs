use leakmap::ensemble::{
    evolve_grid, leak_scan_classical, mean_ftle_by_dwell, short_dwell_cutoff, uniform_positions,
    PhaseSpaceGrid, ScanOptions, SurvivalCurve,
};
use leakmap::scan::{argmin, circular_distance, symmetry_check};
use leakmap::{EscapeRecord, Leak, MapParams};

const T_MAX: u32 = 1000;

fn params() -> MapParams {
    MapParams::new(10.0).unwrap()
}

fn records(center: f64, n: usize) -> Vec<EscapeRecord> {
    let grid = PhaseSpaceGrid::new(n, n).unwrap();
    evolve_grid(grid, Leak::new(center, 0.2).unwrap(), T_MAX, params()).unwrap()
}

fn mean_over(by_dwell: &std::collections::BTreeMap<u32, leakmap::ensemble::DwellBin>, taus: std::ops::RangeInclusive<u32>) -> f64 {
    let (mut s, mut c) = (0.0, 0usize);
    for tau in taus {
        if let Some(b) = by_dwell.get(&tau) {
            s += b.mean_ftle * b.count as f64;
            c += b.count;
        }
    }
    s / c as f64
}

#[test]
fn cutoffs_are_short() {
    // Frozen from a 500×500 run: n_c = 0 at 0.2 and 2 at 0.5.
    for (center, expected) in [(0.2, 0), (0.5, 2)] {
        let curve = SurvivalCurve::from_records(&records(center, 500), T_MAX);
        let n_c = short_dwell_cutoff(&curve, 0.1).unwrap();
        assert!(n_c <= 20);
        assert_eq!(n_c, expected, "leak at {center}");
    }
}

#[test]
fn escape_rates() {
    // Independent Monte Carlo with 2e6 random initial conditions gives
    // 0.212 and 0.165; -ln 0.8 = 0.223 ignores correlations.
    let rate = |c| SurvivalCurve::from_records(&records(c, 400), T_MAX).decay_rate().unwrap();
    let (r2, r5) = (rate(0.2), rate(0.5));
    assert!((r2 - 0.212).abs() < 0.01, "{r2}");
    assert!((r5 - 0.165).abs() < 0.01, "{r5}");
}

#[test]
fn short_orbits_sample_lower_ftle_at_sticky_leak() {
    let near_sticky = mean_ftle_by_dwell(&records(0.2, 300));
    let first = near_sticky[&1].mean_ftle;
    assert!(first < mean_over(&near_sticky, 5..=15), "{first}");
    assert!(first < 1.6);

    let central = mean_ftle_by_dwell(&records(0.5, 300));
    let first = central[&1].mean_ftle;
    assert!(first > mean_over(&central, 10..=30), "{first}");
    assert!(first > 2.0);
}

#[test]
fn mean_dwell_scan_minimum_and_symmetry() {
    let positions = uniform_positions(50);
    let grid = PhaseSpaceGrid::new(200, 200).unwrap();
    let scan = leak_scan_classical(&positions, grid, 0.2, T_MAX, params(), ScanOptions::default()).unwrap();
    let tau: Vec<f64> = scan.iter().map(|p| p.mean_dwell).collect();
    let tau_se: Vec<f64> = scan.iter().map(|p| p.dwell_stderr).collect();
    let at = positions[argmin(&tau).unwrap()];
    assert!(
        circular_distance(at, 0.2).min(circular_distance(at, 0.8)) <= 0.05 + 1e-12,
        "argmin at {at}"
    );
    let sym = symmetry_check(&positions, &tau, &tau_se);
    assert_eq!(sym.pairs, 24);
    assert!(sym.passes(3.0), "{sym:?}");
    let lambda: Vec<f64> = scan.iter().map(|p| p.mean_ftle).collect();
    let lambda_se: Vec<f64> = scan.iter().map(|p| p.ftle_stderr).collect();
    assert!(symmetry_check(&positions, &lambda, &lambda_se).passes(3.0));
}
