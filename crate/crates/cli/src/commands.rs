use std::fs;
use std::path::{Path, PathBuf};

use polariton_transfer::analysis::{fit_scaling, scaling_points, sweep, ScalingFit, ScalingPoint, SchedulePolicy};
use polariton_transfer::io::{emit_plot_series, rounds_table, sweep_table, Table};
use polariton_transfer::jch::{blockade_check, calibrate_j_eff, effective_vs_exact_overlap, interconversion_leakage};
use polariton_transfer::protocol::{default_regular_schedule, lossy_run, optimize_schedule, run_continuous, run_protocol};
use polariton_transfer::{build_chain, JchParams, MeasurementSchedule};
use serde::Serialize;
use serde_json::json;

use crate::config::{Config, SweepSpec, ValidateSpec};
use crate::CliError;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INCOMPLETE: u8 = 2;
pub const EXIT_CHECKS_FAILED: u8 = 3;

/// Thresholds of the exact-model checks.
const MAX_LEAKAGE: f64 = 1e-3;
const MIN_OVERLAP: f64 = 0.99;
const MAX_ASYMMETRY: f64 = 0.01;
const MAX_RATIO_DRIFT: f64 = 0.005;
const MAX_DOUBLE: f64 = 1e-2;
const MAX_CUTOFF_SHIFT: f64 = 0.1;

fn out_dir(config: &Config, out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = out.unwrap_or_else(|| config.output.dir.clone());
    fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(e.to_string()))?;
    text.push('\n');
    write(path, &text)
}

pub fn simulate(config: &Config, out: Option<PathBuf>) -> Result<u8, CliError> {
    let graph = config.graph()?;
    let qubit = config.qubit()?;
    let target = config.protocol.target;
    let schedule = match &config.schedule {
        Some(s) => s.clone(),
        None => default_regular_schedule(&graph, config.protocol.max_rounds)?,
    };
    let dir = out_dir(config, out)?;
    let lossy = match &config.units {
        Some(u) if u.kappa > 0.0 || u.gamma > 0.0 => Some(u.params()?),
        _ => None,
    };
    let record = match &lossy {
        Some(params) => {
            let run = lossy_run(&graph, &qubit, &schedule, target, params)?;
            write_json(
                &dir.join("loss.json"),
                &json!({
                    "efficiency": run.efficiency,
                    "lossless_success": run.lossless_success,
                    "degradation": run.degradation(),
                    "envelope": run.envelope,
                    "polariton_decay": run.polariton_decay,
                }),
            )?;
            run.record
        }
        None => run_protocol(&graph, &qubit, &schedule, target)?,
    };
    if let MeasurementSchedule::Continuous { rate, duration, dt } = schedule {
        if lossy.is_none() && graph.endpoints_connected() {
            let run = run_continuous(&graph, &qubit, rate, duration, dt)?;
            let mut table = Table::new(&["time", "cumulative", "density"]);
            for s in &run.samples {
                table.push(vec![s.time.into(), s.cumulative.into(), s.density.into()])?;
            }
            write(&dir.join("detection.csv"), &table.to_csv())?;
        }
    }
    write_json(&dir.join("record.json"), &record)?;
    write(&dir.join("rounds.csv"), &rounds_table(&record).to_csv())?;
    println!(
        "rounds {} elapsed {} P {} converged {}",
        record.rounds.len(),
        record.elapsed,
        record.cumulative_success(),
        record.converged
    );
    if record.converged {
        Ok(EXIT_OK)
    } else {
        let reason = record.diagnostic.clone().unwrap_or_else(|| {
            format!("cumulative success {} below target {}", record.cumulative_success(), target)
        });
        eprintln!("incomplete[ceiling={}]: {reason}", record.ceiling);
        Ok(EXIT_INCOMPLETE)
    }
}

fn sweep_spec(config: &Config) -> Result<&SweepSpec, CliError> {
    config.sweep.as_ref().ok_or_else(|| CliError::config("missing [sweep] section"))
}

fn run_sweep(spec: &SweepSpec) -> Result<Vec<polariton_transfer::analysis::SweepRow>, CliError> {
    let policies = spec.policies.iter().map(|p| p.resolve()).collect::<Result<Vec<_>, _>>()?;
    Ok(spec.f.iter().flat_map(|&f| sweep(&spec.sizes, f, &policies, spec.hopping, spec.execution)).collect())
}

pub fn sweep_cmd(config: &Config, out: Option<PathBuf>) -> Result<u8, CliError> {
    let spec = sweep_spec(config)?;
    let rows = run_sweep(spec)?;
    let dir = out_dir(config, out)?;
    write(&dir.join("sweep.csv"), &sweep_table(&rows).to_csv())?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    println!("rows {} failed {}", rows.len(), failed);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct FitReport<'a> {
    policy: &'a str,
    #[serde(flatten)]
    fit: &'a ScalingFit,
    j_eff_over_a: f64,
}

fn calibration_params(config: &Config) -> Result<JchParams, CliError> {
    match &config.units {
        Some(u) => Ok(JchParams::new(
            1e4 * u.g,
            1e4 * u.g + u.delta,
            u.g,
            u.photon_hopping,
            0.0,
            0.0,
            1,
        )?),
        None => Ok(JchParams::resonant(100.0, 1.0, 1)?),
    }
}

pub fn synthetic_points() -> Vec<ScalingPoint> {
    [8usize, 12, 16, 24, 32, 48, 64]
        .iter()
        .map(|&n| ScalingPoint { n, f: 0.99, t: 0.33 * (n as f64).powf(5.0 / 3.0) * 100f64.ln(), j: 1.0 })
        .collect()
}

pub fn fit_cmd(config: Option<&Config>, synthetic: bool, out: Option<PathBuf>) -> Result<u8, CliError> {
    let default = Config::default();
    let config = config.unwrap_or(&default);
    let (policy, points) = if synthetic {
        ("synthetic".to_string(), synthetic_points())
    } else {
        let spec = sweep_spec(config)?;
        let rows = run_sweep(spec)?;
        let policy = match &spec.fit_policy {
            Some(p) => p.clone(),
            None => spec.policies.first().map_or(Ok(SchedulePolicy::regular()), |p| p.resolve())?.name().to_string(),
        };
        let points = scaling_points(&rows, &policy, spec.hopping);
        (policy, points)
    };
    let ratio = calibrate_j_eff(&calibration_params(config)?)?.ratio;
    let fit = fit_scaling(&points)?.with_ratio(ratio);
    let dir = out_dir(config, out)?;
    write_json(&dir.join("fit.json"), &FitReport { policy: &policy, fit: &fit, j_eff_over_a: ratio })?;
    println!("c {} p {} residual {} J_eff/A {}", fit.c, fit.p, fit.residual, ratio);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Check {
    name: String,
    value: Option<f64>,
    threshold: f64,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl Check {
    fn below(name: String, value: f64, threshold: f64) -> Self {
        Check { name, value: Some(value), threshold, pass: value < threshold, error: None }
    }

    fn above(name: String, value: f64, threshold: f64) -> Self {
        Check { name, value: Some(value), threshold, pass: value > threshold, error: None }
    }

    fn failed(name: String, threshold: f64, e: polariton_transfer::Error) -> Self {
        Check { name, value: None, threshold, pass: false, error: Some(format!("{}: {e}", e.kind())) }
    }
}

pub fn validate_cmd(config: &Config, out: Option<PathBuf>) -> Result<u8, CliError> {
    let spec: ValidateSpec = config.validate_spec();
    if let Some(&n) = spec.sizes.iter().find(|&&n| n > polariton_transfer::jch::MAX_SITES || n < 2) {
        return Err(CliError::new(
            "capacity",
            format!("validation sizes must lie in 2..={}, got {n}", polariton_transfer::jch::MAX_SITES),
        ));
    }
    let params = spec.params(spec.g, spec.n_max)?;
    let single = spec.params(spec.g, 1)?;
    let qubit = config.qubit()?;
    let t_max = if spec.hopping > 0.0 { spec.t_max / spec.hopping } else { spec.t_max };
    let mut checks = Vec::new();
    let mut curves = Vec::new();

    let calibration = calibrate_j_eff(&single);
    let reference = spec.params(4.0 * spec.g, 1).and_then(|p| calibrate_j_eff(&p));
    match (&calibration, &reference) {
        (Ok(c), Ok(r)) => {
            checks.push(Check::below("calibration species asymmetry".into(), c.species_asymmetry(), MAX_ASYMMETRY));
            let drift = (c.ratio - r.ratio).abs() / r.ratio;
            checks.push(Check::below(format!("J_eff/A drift from g/A={} to {}", spec.g, 4.0 * spec.g), drift, MAX_RATIO_DRIFT));
        }
        (Err(e), _) => checks.push(Check::failed("calibration".into(), MAX_ASYMMETRY, e.clone())),
        (_, Err(e)) => checks.push(Check::failed("calibration reference".into(), MAX_RATIO_DRIFT, e.clone())),
    }

    for &n in &spec.sizes {
        let g = build_chain(n, 1.0)?;
        if n <= 3 {
            match interconversion_leakage(&single, &g, t_max) {
                Ok(v) => checks.push(Check::below(format!("N={n} interconversion leakage"), v, MAX_LEAKAGE)),
                Err(e) => checks.push(Check::failed(format!("N={n} interconversion leakage"), MAX_LEAKAGE, e)),
            }
            let mut scan = vec![spec.g];
            scan.extend(spec.g_scan.iter().map(|r| r * spec.hopping));
            for (i, g_abs) in scan.into_iter().enumerate() {
                let g_ratio = g_abs / spec.hopping;
                let name = format!("N={n} g/A={g_ratio} worst overlap");
                let result = spec.params(g_abs, 1);
                match result.and_then(|p| effective_vs_exact_overlap(&p, &g, &qubit, t_max)) {
                    Ok(r) => {
                        if i == 0 {
                            checks.push(Check::above(name, r.worst, MIN_OVERLAP));
                        }
                        curves.push(json!({ "n": n, "g_over_a": g_ratio, "worst": r.worst, "j_eff": r.j_eff, "series": r.series }));
                    }
                    Err(e) if i == 0 => checks.push(Check::failed(name, MIN_OVERLAP, e)),
                    Err(e) => curves.push(json!({ "n": n, "g_over_a": g_ratio, "error": e.to_string() })),
                }
            }
        }
        let name = format!("N={n} max double occupancy");
        match blockade_check(&params, &g, (0, n - 1), t_max) {
            Ok(b) => {
                checks.push(Check::below(name, b.max_double, MAX_DOUBLE));
                checks.push(Check::below(
                    format!("N={n} cutoff shift n_max {} to {}", spec.n_max, spec.n_max + 1),
                    b.relative_shift,
                    MAX_CUTOFF_SHIFT,
                ));
            }
            Err(e) => checks.push(Check::failed(name, MAX_DOUBLE, e)),
        }
    }

    let pass = checks.iter().all(|c| c.pass);
    let dir = out_dir(config, out)?;
    write_json(
        &dir.join("validation.json"),
        &json!({
            "g_over_a": spec.g / spec.hopping,
            "calibration": calibration.as_ref().ok(),
            "checks": checks,
            "overlap_curves": curves,
            "pass": pass,
        }),
    )?;
    for c in &checks {
        let value = c.value.map_or_else(|| c.error.clone().unwrap_or_default(), |v| format!("{v:e}"));
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, value);
    }
    Ok(if pass { EXIT_OK } else { EXIT_CHECKS_FAILED })
}

pub fn schedule_opt(config: &Config, out: Option<PathBuf>) -> Result<u8, CliError> {
    let graph = config.graph()?;
    let greedy = match &config.schedule {
        Some(s @ MeasurementSchedule::GreedyOptimized { .. }) => s.clone(),
        Some(_) => return Err(CliError::config("schedule-opt needs a greedy-optimized [schedule] or none")),
        None => SchedulePolicy::Optimized {
            window_scale: polariton_transfer::analysis::DEFAULT_WINDOW_SCALE,
            grid_step: polariton_transfer::analysis::DEFAULT_GRID_STEP,
            max_rounds: config.protocol.max_rounds,
        }
        .schedule_for(&graph)?,
    };
    let MeasurementSchedule::GreedyOptimized { window, grid_step, max_rounds } = greedy else {
        unreachable!()
    };
    let schedule = optimize_schedule(&graph, max_rounds, window, grid_step)?;
    let record = run_protocol(&graph, &config.qubit()?, &schedule, config.protocol.target)?;
    let dir = out_dir(config, out)?;
    write_json(&dir.join("schedule.json"), &schedule)?;
    write(&dir.join("rounds.csv"), &rounds_table(&record).to_csv())?;
    println!("rounds {} P {}", schedule.times().map_or(0, |t| t.len()), record.cumulative_success());
    Ok(EXIT_OK)
}

pub fn plot(table: &Path, x: &str, y: &str, group: Option<&str>, out: Option<PathBuf>) -> Result<u8, CliError> {
    let text = fs::read_to_string(table).map_err(|e| CliError::io(format!("{}: {e}", table.display())))?;
    let series = emit_plot_series(&Table::from_csv(&text)?, x, y, group)?;
    match out {
        Some(path) => write(&path, &series)?,
        None => print!("{series}"),
    }
    Ok(EXIT_OK)
}
