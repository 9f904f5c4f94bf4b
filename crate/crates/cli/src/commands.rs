//! The four experiments. Each one writes its artifacts and returns the
//! summary values that go into the manifest.

use std::io::Write;

use leakmap::ensemble::{
    self, fields_from_records, ftle_histogram, leak_scan_classical, mean_ftle_by_dwell,
    short_dwell_cutoff, strip_mean_ftle, uniform_positions, ScanOptions, SurvivalCurve,
};
use leakmap::husimi::{entropy_vs_dwell, leak_scan_entropy, mean_husimi, HusimiPlan, WehrlScale};
use leakmap::quantum::{
    build_unitary, leak_scan_quantum, mean_dwell, open_map, resonance_spectrum, QuantumParams,
};
use leakmap::{io, map, scan, stats, Leak, PhaseSpacePoint};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{Config, Stream, DESK_SCALE_MAX_N};
use crate::output::OutputDir;
use crate::CliError;

/// Largest `‖U†U − I‖_max` accepted before projecting.
pub const UNITARITY_TOLERANCE: f64 = 1e-12;

pub type Results = Map<String, Value>;

fn positions_of(values: &[f64], idx: Vec<usize>) -> Vec<f64> {
    idx.into_iter().map(|i| values[i]).collect()
}

pub fn ftle_field(cfg: &Config, out: &mut OutputDir) -> Result<Results, CliError> {
    let params = cfg.map_params()?;
    let grid = cfg.grid()?;
    let n = cfg.classical.ftle_iterations;
    let field = out.time("ftle_field", || ensemble::ftle_field(grid, n, params))?;
    out.write("ftle_field.lcf", |w| io::write_field_lcf(w, &field))?;
    out.write_heatmap("ftle_field", grid.n_q, grid.n_p, &field.values, None)?;
    if cfg.classical.write_field_csv {
        out.write("ftle_field.csv", |w| io::write_field_csv(w, &field))?;
    }

    let positions = uniform_positions(cfg.scan.positions);
    let means = out.time("strip_means", || {
        positions
            .iter()
            .map(|&c| Ok((c, strip_mean_ftle(&field, Leak::new(c, cfg.leak.width)?)?)))
            .collect::<leakmap::Result<Vec<_>>>()
    })?;
    out.write("strip_means.csv", |w| io::write_curve_csv(w, ("q_L", "mean_ftle"), &means))?;
    let curve: Vec<f64> = means.iter().map(|m| m.1).collect();

    let mut results = Results::new();
    results.insert("field_mean".into(), json!(stats::mean(&field.values)));
    results.insert(
        "strip_mean_minima".into(),
        json!(positions_of(&positions, scan::local_minima(&curve))),
    );
    results.insert(
        "strip_mean_argmax".into(),
        json!(scan::argmax(&curve).map(|i| positions[i])),
    );

    if cfg.classical.random_ics > 0 {
        let mut rng = cfg.rng(Stream::RandomInitialConditions);
        let points: Vec<PhaseSpacePoint> = (0..cfg.classical.random_ics)
            .map(|_| PhaseSpacePoint::new(rng.gen(), rng.gen()))
            .collect();
        let iters = cfg.classical.random_ic_iterations;
        let ftles = out.time("random_ic_ftle", || {
            points
                .par_iter()
                .map(|&x| map::ftle(x, iters, params))
                .collect::<leakmap::Result<Vec<f64>>>()
        })?;
        out.write("random_ftle.csv", |w| {
            writeln!(w, "q,p,ftle")?;
            for (x, l) in points.iter().zip(&ftles) {
                writeln!(w, "{},{},{l}", x.q, x.p)?;
            }
            Ok(())
        })?;
        let (mean, se) = stats::mean_and_stderr(&ftles).unwrap_or((f64::NAN, f64::NAN));
        log::info!("grand-mean FTLE over {} random ICs: {mean} ± {se}", ftles.len());
        results.insert("random_ic_mean_ftle".into(), json!(mean));
        results.insert("random_ic_ftle_stderr".into(), json!(se));
    }
    Ok(results)
}

pub fn open_classical(cfg: &Config, out: &mut OutputDir) -> Result<Results, CliError> {
    let params = cfg.map_params()?;
    let grid = cfg.grid()?;
    let leak = cfg.leak()?;
    let t_max = cfg.classical.t_max;
    let records = out.time("evolve", || ensemble::evolve_grid(grid, leak, t_max, params))?;
    let curve = SurvivalCurve::from_records(&records, t_max);
    let tail = curve.tail_fit()?;
    let cutoff = short_dwell_cutoff(&curve, cfg.classical.cutoff_tolerance)?;
    log::info!("escape rate {} (tail n = {}..={}), cutoff n_c = {cutoff}", tail.rate, tail.first, tail.last);
    let by_dwell = mean_ftle_by_dwell(&records);
    let run = fields_from_records(grid, records, cutoff)?;
    if !run.escape_check_passed() {
        log::warn!(
            "only {:.4} of the trajectories escaped before t_max = {t_max}",
            run.escaped_fraction
        );
    }
    let hist = ftle_histogram(&run.ftle, cfg.classical.histogram_bins)?;

    out.write("dwell_field.lcf", |w| io::write_field_lcf(w, &run.dwell))?;
    out.write_heatmap("dwell_field", grid.n_q, grid.n_p, &run.dwell.values, Some(&run.dwell.mask))?;
    out.write("open_ftle_field.lcf", |w| io::write_field_lcf(w, &run.ftle))?;
    out.write_heatmap("open_ftle_field", grid.n_q, grid.n_p, &run.ftle.values, Some(&run.ftle.mask))?;
    if cfg.classical.write_field_csv {
        out.write("dwell_field.csv", |w| io::write_field_csv(w, &run.dwell))?;
        out.write("open_ftle_field.csv", |w| io::write_field_csv(w, &run.ftle))?;
    }
    out.write("ftle_histogram.csv", |w| io::write_histogram_csv(w, &hist))?;
    out.write("mean_ftle_by_dwell.csv", |w| {
        writeln!(w, "dwell,mean_ftle,count")?;
        for (tau, b) in &by_dwell {
            writeln!(w, "{tau},{},{}", b.mean_ftle, b.count)?;
        }
        Ok(())
    })?;
    out.write("survival.csv", |w| io::write_survival_csv(w, &curve))?;

    let mut results = Results::new();
    results.insert("cutoff".into(), json!(cutoff));
    results.insert("escape_rate".into(), json!(tail.rate));
    results.insert("tail_rms_residual".into(), json!(tail.rms_residual));
    results.insert("tail_window".into(), json!([tail.first, tail.last]));
    results.insert("escaped_fraction".into(), json!(run.escaped_fraction));
    results.insert("escape_check_passed".into(), json!(run.escape_check_passed()));
    results.insert("histogram_mean".into(), json!(hist.mean));
    results.insert("histogram_samples".into(), json!(hist.samples));
    Ok(results)
}

pub fn quantum(cfg: &Config, out: &mut OutputDir) -> Result<Results, CliError> {
    let qp = cfg.quantum_params()?;
    warn_scale(qp);
    let leak = cfg.leak()?;
    let u = out.time("unitary", || build_unitary(qp))?;
    let unitarity = u.unitarity_error();
    log::info!("unitarity ‖U†U − I‖_max = {unitarity:e}");
    if !(unitarity <= UNITARITY_TOLERANCE) {
        return Err(CliError::Check(format!(
            "unitarity error {unitarity:e} exceeds {UNITARITY_TOLERANCE:e}"
        )));
    }
    let op = open_map(qp, &u, leak)?;
    let res = out.time("schur", || resonance_spectrum(&op))?;
    let residual = res.schur.residual(&op.0);
    let orthonormality = res.schur.orthonormality_error();
    log::info!("Schur residual {residual:e}, orthonormality {orthonormality:e}");
    out.write("spectrum.csv", |w| io::write_spectrum_csv(w, &res))?;
    if cfg.quantum.write_schur_vectors {
        out.write("schur_vectors.lcf", |w| io::write_schur_vectors_lcf(w, &res))?;
    }

    let plan = HusimiPlan::new(qp.n, cfg.quantum.husimi_q, cfg.quantum.husimi_p)?;
    let scale = WehrlScale::new(&plan)?;
    let mean = out.time("mean_husimi", || mean_husimi(&res, cfg.quantum.top_states, &plan))?;
    out.write("mean_husimi.lcf", |w| io::write_husimi_lcf(w, &mean))?;
    out.write_heatmap("mean_husimi", mean.m_q, mean.m_p, &mean.values, None)?;
    let entropy = out.time("entropy", || entropy_vs_dwell(&res, cfg.quantum.dwell_bin, &plan, &scale))?;
    out.write("entropy_scatter.csv", |w| io::write_entropy_scatter_csv(w, &entropy))?;
    out.write("entropy_bins.csv", |w| io::write_entropy_bins_csv(w, &entropy))?;

    let dwell = mean_dwell(leak.center, &res.resonances, cfg.quantum_scan_options());
    let max_modulus = res.resonances.iter().map(|r| r.z.norm()).fold(0.0, f64::max);
    let mut results = Results::new();
    results.insert("unitarity_error".into(), json!(unitarity));
    results.insert("schur_residual".into(), json!(residual));
    results.insert("orthonormality_error".into(), json!(orthonormality));
    results.insert("max_modulus".into(), json!(max_modulus));
    results.insert("zero_modes".into(), json!(dwell.zero_modes));
    results.insert("mean_dwell".into(), json!(dwell.mean_dwell));
    results.insert("max_entropy".into(), json!(entropy.max_entropy()));
    results.insert("coherent_entropy".into(), json!(scale.coherent_entropy));
    Ok(results)
}

pub fn scan(cfg: &Config, out: &mut OutputDir) -> Result<Results, CliError> {
    let params = cfg.map_params()?;
    let grid = cfg.grid()?;
    let qp = cfg.quantum_params()?;
    warn_scale(qp);
    let width = cfg.leak.width;
    let positions = uniform_positions(cfg.scan.positions);
    let options = ScanOptions {
        exclude_non_escaping_ftle: cfg.classical.exclude_non_escaping_ftle,
    };
    let classical = out.time("classical_scan", || {
        leak_scan_classical(&positions, grid, width, cfg.classical.t_max, params, options)
    })?;
    let plan = HusimiPlan::new(qp.n, cfg.quantum.husimi_q, cfg.quantum.husimi_p)?;
    let quantum = out.time("quantum_scan", || {
        leak_scan_entropy(qp, &positions, width, &plan, cfg.quantum_scan_options())
    })?;

    out.write("scan.csv", |w| {
        writeln!(w, "q_L,mean_tau,mean_lambda,mean_T,mean_SW")?;
        for (c, q) in classical.iter().zip(&quantum) {
            writeln!(w, "{},{},{},{},{}", c.center, c.mean_dwell, c.mean_ftle, q.mean_dwell, q.mean_s_w)?;
        }
        Ok(())
    })?;
    out.write("scan_stderr.csv", |w| {
        writeln!(w, "q_L,tau_stderr,lambda_stderr,T_stderr,SW_stderr")?;
        for (c, q) in classical.iter().zip(&quantum) {
            writeln!(w, "{},{},{},{},{}", c.center, c.dwell_stderr, c.ftle_stderr, q.dwell_stderr, q.s_w_stderr)?;
        }
        Ok(())
    })?;

    let tau: Vec<f64> = classical.iter().map(|c| c.mean_dwell).collect();
    let lambda: Vec<f64> = classical.iter().map(|c| c.mean_ftle).collect();
    let t: Vec<f64> = quantum.iter().map(|q| q.mean_dwell).collect();
    let s_w: Vec<f64> = quantum.iter().map(|q| q.mean_s_w).collect();
    let curves = [
        ("mean_tau", &tau, classical.iter().map(|c| c.dwell_stderr).collect::<Vec<_>>()),
        ("mean_lambda", &lambda, classical.iter().map(|c| c.ftle_stderr).collect()),
        ("mean_T", &t, quantum.iter().map(|q| q.dwell_stderr).collect()),
        ("mean_SW", &s_w, quantum.iter().map(|q| q.s_w_stderr).collect()),
    ];
    let mut minima = Map::new();
    let mut symmetry = Map::new();
    for (name, values, se) in &curves {
        minima.insert(
            name.to_string(),
            json!({
                "argmin": scan::argmin(values).map(|i| positions[i]),
                "local_minima": positions_of(&positions, scan::local_minima(values)),
            }),
        );
        symmetry.insert(name.to_string(), json!(scan::symmetry_check(&positions, values, se)));
    }
    let mut summary = Map::new();
    summary.insert("pearson_tau_T".into(), json!(stats::pearson(&tau, &t)));
    summary.insert("pearson_lambda_SW".into(), json!(stats::pearson(&lambda, &s_w)));
    summary.insert("pearson_tau_lambda".into(), json!(stats::pearson(&tau, &lambda)));
    summary.insert("pearson_T_SW".into(), json!(stats::pearson(&t, &s_w)));
    summary.insert("minima".into(), Value::Object(minima));
    summary.insert("symmetry".into(), Value::Object(symmetry));

    if !cfg.scan.convergence_dims.is_empty() {
        let mut columns = Vec::new();
        for &n in &cfg.scan.convergence_dims {
            let p = QuantumParams::new(n, cfg.map.k)?;
            let points = out.time(&format!("convergence_scan_n{n}"), || {
                leak_scan_quantum(p, &positions, width, cfg.quantum_scan_options())
            })?;
            columns.push(points.iter().map(|q| q.mean_dwell).collect::<Vec<f64>>());
        }
        out.write("scan_convergence.csv", |w| {
            write!(w, "q_L")?;
            for n in &cfg.scan.convergence_dims {
                write!(w, ",T_N{n}")?;
            }
            writeln!(w)?;
            for (i, c) in positions.iter().enumerate() {
                write!(w, "{c}")?;
                for col in &columns {
                    write!(w, ",{}", col[i])?;
                }
                writeln!(w)?;
            }
            Ok(())
        })?;
        let rms: Vec<f64> = columns
            .windows(2)
            .map(|pair| scan::rms_difference(&pair[0], &pair[1]))
            .collect();
        let shrinking = rms.windows(2).all(|d| d[1] < d[0]);
        summary.insert(
            "convergence".into(),
            json!({
                "dims": cfg.scan.convergence_dims,
                "rms_successive_differences": rms,
                "monotone": shrinking,
            }),
        );
    }
    out.write_json("correlations.json", &summary)?;

    let mut results = Results::new();
    results.insert("positions".into(), json!(positions.len()));
    results.insert("pearson_tau_T".into(), summary["pearson_tau_T"].clone());
    results.insert("pearson_lambda_SW".into(), summary["pearson_lambda_SW"].clone());
    Ok(results)
}

fn warn_scale(qp: QuantumParams) {
    if qp.n > DESK_SCALE_MAX_N {
        log::warn!(
            "N = {} needs O(N³) ≈ {:.0e} flops per Schur factorization; this is beyond desk scale",
            qp.n,
            (qp.n as f64).powi(3) * 10.0
        );
    }
}
