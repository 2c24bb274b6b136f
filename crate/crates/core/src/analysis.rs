//! Sweeps and fits: time to reach a target fidelity, the power law in chain
//! length, geometric convergence of the success probability, and schedule
//! policy comparisons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_chain, CouplingGraph, MeasurementSchedule, PolaritonQubit, TransferRecord};
use crate::par::{self, Execution};
use crate::protocol::{dark_weight, regular_schedule, run_protocol, DEFAULT_TAU_SCALE};

pub const DEFAULT_MAX_ROUNDS: usize = 4000;
pub const DEFAULT_WINDOW_SCALE: f64 = 1.5;
pub const DEFAULT_GRID_STEP: f64 = 0.05;

/// How measurement times are chosen for a graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SchedulePolicy {
    /// First measurement at the front arrival time, then every
    /// `tau_scale * N^(1/3) / J`.
    Regular { tau_scale: f64, max_rounds: usize },
    /// Greedy snapshots searched over a window of `window_scale * (N + 1) / J`.
    Optimized { window_scale: f64, grid_step: f64, max_rounds: usize },
}

impl SchedulePolicy {
    pub fn regular() -> Self {
        SchedulePolicy::Regular { tau_scale: DEFAULT_TAU_SCALE, max_rounds: DEFAULT_MAX_ROUNDS }
    }

    pub fn optimized() -> Self {
        SchedulePolicy::Optimized {
            window_scale: DEFAULT_WINDOW_SCALE,
            grid_step: DEFAULT_GRID_STEP,
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SchedulePolicy::Regular { .. } => "regular",
            SchedulePolicy::Optimized { .. } => "optimized",
        }
    }

    pub fn schedule_for(&self, graph: &CouplingGraph) -> Result<MeasurementSchedule> {
        match *self {
            SchedulePolicy::Regular { tau_scale, max_rounds } => {
                regular_schedule(graph, tau_scale, max_rounds)
            }
            SchedulePolicy::Optimized { window_scale, grid_step, max_rounds } => {
                let j = graph.as_uniform_chain().or_else(|| graph.min_weight()).unwrap_or(1.0);
                let schedule = MeasurementSchedule::GreedyOptimized {
                    window: window_scale * (graph.node_count() + 1) as f64 / j,
                    grid_step: grid_step / j,
                    max_rounds,
                };
                schedule.validate()?;
                Ok(schedule)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityTime {
    pub time: f64,
    pub rounds: usize,
    pub cumulative: f64,
}

/// Elapsed time of the first round at which cumulative success reaches `f`.
pub fn time_to_fidelity(graph: &CouplingGraph, policy: &SchedulePolicy, f: f64) -> Result<FidelityTime> {
    let ceiling = dark_weight(graph, graph.sender(), graph.receiver())?;
    if ceiling < f {
        return Err(Error::Unreachable { target: f, ceiling });
    }
    let schedule = policy.schedule_for(graph)?;
    let record = run_protocol(graph, &PolaritonQubit::plus(), &schedule, f)?;
    if !record.converged {
        return Err(Error::ScheduleExhausted { reached: record.cumulative_success(), target: f });
    }
    Ok(FidelityTime { time: record.elapsed, rounds: record.rounds.len(), cumulative: record.cumulative_success() })
}

/// One measured time-to-fidelity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub f: f64,
    pub t: f64,
    /// Hopping rate of the effective model; `t * j` is dimensionless.
    pub j: f64,
}

/// The fitted constant expressed per hopping convention.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitConstants {
    /// Time in units of `1 / J` of the single-excitation hopping.
    pub hopping: f64,
    /// Time in units of `1 / A` of the bare photon hopping, `J = ratio * A`.
    pub photon: Option<f64>,
    /// Calibrated `J / A` used for `photon`.
    pub ratio: Option<f64>,
    /// Time in units of `1 / A` of an XY chain `A sum (XX + YY)`, `J = 2A`.
    pub xy: f64,
    /// Reading the hopping coefficient literally, `J = A`.
    pub literal: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub c: f64,
    pub p: f64,
    /// Euclidean norm of the log-domain residuals.
    pub residual: f64,
    pub r_squared: f64,
    pub points: Vec<ScalingPoint>,
    pub conventions: UnitConstants,
}

impl ScalingFit {
    /// Attaches a calibrated `J / A` ratio for the photon convention.
    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.conventions.photon = Some(self.c / ratio);
        self.conventions.ratio = Some(ratio);
        self
    }

    pub fn predict(&self, n: usize, f: f64, j: f64) -> f64 {
        self.c * (n as f64).powf(self.p) * (1.0 - f).ln().abs() / j
    }
}

/// Least-squares fit of `log(t J / |ln(1 - F)|) = log c + p log N`.
pub fn fit_scaling(points: &[ScalingPoint]) -> Result<ScalingFit> {
    let mut distinct: Vec<usize> = points.iter().map(|p| p.n).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 5 {
        return Err(Error::Fit(format!("need at least 5 distinct N, got {}", distinct.len())));
    }
    for p in points {
        let ok = p.n > 0 && p.f > 0.0 && p.f < 1.0 && p.t > 0.0 && p.j > 0.0;
        if !ok || !p.t.is_finite() {
            return Err(Error::Fit(format!("invalid point {p:?}")));
        }
    }
    let x: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| (p.t * p.j / (1.0 - p.f).ln().abs()).ln()).collect();
    let line = least_squares_line(&x, &y)?;
    let c = line.intercept.exp();
    Ok(ScalingFit {
        c,
        p: line.slope,
        residual: line.residual,
        r_squared: line.r_squared,
        points: points.to_vec(),
        conventions: UnitConstants { hopping: c, photon: None, ratio: None, xy: c / 2.0, literal: c },
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub r_squared: f64,
}

pub fn least_squares_line(x: &[f64], y: &[f64]) -> Result<Line> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Fit("need at least two paired samples".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::Fit("degenerate design: all abscissae equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(Line { slope, intercept, residual: ss_res.sqrt(), r_squared })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceFit {
    /// `-d ln(1 - P_k) / dk` over the tail; infinite when already converged.
    pub rate: f64,
    pub r_squared: f64,
    /// First round (1-based) of the fitted tail.
    pub tail_start: usize,
    pub tail_points: usize,
    /// Success is complete to rounding.
    pub converged: bool,
    /// The failure probability does not decay.
    pub stalled: bool,
}

const CONVERGED_FAILURE: f64 = 1e-13;

/// Fits `ln(1 - P_k)` against `k` over the rounds after the most likely
/// heralding round. Rounds already at complete success are dropped.
pub fn fit_convergence(record: &TransferRecord) -> Result<ConvergenceFit> {
    let rounds = &record.rounds;
    if let Some(done) = rounds.iter().position(|r| 1.0 - r.cumulative <= CONVERGED_FAILURE) {
        return Ok(ConvergenceFit {
            rate: f64::INFINITY,
            r_squared: 1.0,
            tail_start: done + 1,
            tail_points: 0,
            converged: true,
            stalled: false,
        });
    }
    if rounds.len() < 10 {
        return Err(Error::Fit(format!("need at least 10 rounds, got {}", rounds.len())));
    }
    if rounds.iter().all(|r| r.absolute <= 1e-14) {
        return Ok(ConvergenceFit {
            rate: 0.0,
            r_squared: 0.0,
            tail_start: 1,
            tail_points: rounds.len(),
            converged: false,
            stalled: true,
        });
    }
    let peak = rounds
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, r)| if r.absolute > best.1 { (i, r.absolute) } else { best })
        .0;
    let start = (peak + 1).min(rounds.len() - 3);
    let tail = &rounds[start..];
    let x: Vec<f64> = tail.iter().map(|r| r.round as f64).collect();
    let y: Vec<f64> = tail.iter().map(|r| (1.0 - r.cumulative).ln()).collect();
    let line = least_squares_line(&x, &y)?;
    let rate = -line.slope;
    Ok(ConvergenceFit {
        rate,
        r_squared: line.r_squared,
        tail_start: tail[0].round,
        tail_points: tail.len(),
        converged: false,
        stalled: rate <= 1e-12,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub policy: String,
    pub f: f64,
    pub t: Option<f64>,
    pub rounds: usize,
    pub p_final: f64,
    /// `ok`, or the kind of the error that stopped this row.
    pub status: String,
}

/// One row per `(N, policy)` in input order; failed rows are marked, not fatal.
pub fn sweep(
    sizes: &[usize],
    f: f64,
    policies: &[SchedulePolicy],
    j: f64,
    execution: Execution,
) -> Vec<SweepRow> {
    let jobs: Vec<(usize, SchedulePolicy, f64)> = sizes
        .iter()
        .flat_map(|&n| policies.iter().map(move |p| (n, *p, f)))
        .collect();
    par::map(&jobs, execution, |&(n, policy, f)| sweep_row(n, &policy, f, j))
}

/// `|ln(1 - F)|` dependence at fixed `N`.
pub fn fidelity_sweep(
    n: usize,
    fs: &[f64],
    policy: &SchedulePolicy,
    j: f64,
    execution: Execution,
) -> Vec<SweepRow> {
    par::map(fs, execution, |&f| sweep_row(n, policy, f, j))
}

fn sweep_row(n: usize, policy: &SchedulePolicy, f: f64, j: f64) -> SweepRow {
    let outcome = build_chain(n, j).and_then(|g| {
        let schedule = policy.schedule_for(&g)?;
        run_protocol(&g, &PolaritonQubit::plus(), &schedule, f)
    });
    match outcome {
        Ok(record) => SweepRow {
            n,
            policy: policy.name().into(),
            f,
            t: record.converged.then_some(record.elapsed),
            rounds: record.rounds.len(),
            p_final: record.cumulative_success(),
            status: if record.converged { "ok".into() } else { "schedule-exhausted".into() },
        },
        Err(e) => SweepRow {
            n,
            policy: policy.name().into(),
            f,
            t: None,
            rounds: 0,
            p_final: 0.0,
            status: e.kind().into(),
        },
    }
}

/// Successful rows of one policy as fit input.
pub fn scaling_points(rows: &[SweepRow], policy: &str, j: f64) -> Vec<ScalingPoint> {
    rows.iter()
        .filter(|r| r.policy == policy)
        .filter_map(|r| r.t.map(|t| ScalingPoint { n: r.n, f: r.f, t, j }))
        .collect()
}
