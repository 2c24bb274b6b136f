//! Heralded dual-rail transfer: encoding at the sender, repeated projective
//! (or continuous) interrogation of the receiver, loss, greedy schedule
//! optimization and the dark-state ceiling on general graphs.
//!
//! A run is deterministic: both measurement branches are tracked by keeping
//! the failure branch as a sub-normalized state and accumulating the success
//! probability of every round.

use serde::{Deserialize, Serialize};

use crate::dynamics::{norm_sqr, DecayProfile, NonHermitianPropagator, SpectralDecomposition};
use crate::error::{Error, Result};
use crate::model::{
    CouplingGraph, DualRailState, JchParams, MeasurementSchedule, PolaritonQubit, RoundRecord,
    SingleExcitationState, TransferRecord, C64,
};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Result of one projective parity measurement at the receiver.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementOutcome {
    /// `|f_r|^2 / ||f||^2`.
    pub conditional: f64,
    /// `|f_r|^2`.
    pub absolute: f64,
    /// Qubit read out at the receiver on success; `None` if success is impossible.
    pub success: Option<PolaritonQubit>,
    /// Post-measurement state on failure; `None` if failure is impossible.
    pub failure: Option<DualRailState>,
}

impl MeasurementOutcome {
    /// Success is certain.
    pub fn heralded(&self) -> bool {
        self.failure.is_none()
    }
}

/// Qubit carried by the two rails at the receiver when both hold amplitude
/// `f` times the sent coefficients. The common phase of `f` is removed.
fn received_qubit(sent: &PolaritonQubit, f: C64) -> PolaritonQubit {
    let rail_one = sent.alpha * f;
    let rail_two = sent.beta * f;
    let norm = (rail_one.norm_sqr() + rail_two.norm_sqr()).sqrt();
    let phase = f.conj() / f.norm();
    PolaritonQubit { alpha: rail_one / norm * phase, beta: rail_two / norm * phase }
}

/// Fidelity of the qubit received with amplitude `f` against the sent one.
pub fn heralded_fidelity(sent: &PolaritonQubit, f: C64) -> f64 {
    let rail_one = sent.alpha * f;
    let rail_two = sent.beta * f;
    let norm_sqr = rail_one.norm_sqr() + rail_two.norm_sqr();
    (sent.alpha.conj() * rail_one + sent.beta.conj() * rail_two).norm_sqr() / norm_sqr
}

pub fn measure_receiver(state: &DualRailState, graph: &CouplingGraph) -> Result<MeasurementOutcome> {
    let n = graph.node_count();
    if state.spatial.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: state.spatial.len() });
    }
    let total = state.spatial.norm_sqr();
    if total < f64::MIN_POSITIVE {
        return Err(Error::ProtocolExhausted);
    }
    let r = graph.receiver();
    let f = state.spatial.amplitudes()[r];
    let absolute = f.norm_sqr();
    let conditional = (absolute / total).min(1.0);
    let success = (absolute > 0.0).then(|| received_qubit(&state.qubit, f));
    let failure = (absolute < total).then(|| {
        let mut amps = state.spatial.amplitudes().to_vec();
        amps[r] = ZERO;
        let remaining = norm_sqr(&amps);
        (remaining > 0.0).then(|| DualRailState {
            qubit: state.qubit,
            spatial: SingleExcitationState::from_raw(amps),
        })
    });
    Ok(MeasurementOutcome { conditional, absolute, success, failure: failure.flatten() })
}

/// Squared weight of the sender excitation inside the cyclic subspace of the
/// receiver, `span{H^k e_r}`: the supremum of cumulative success over all
/// measurement schedules at `r`.
pub fn dark_weight(graph: &CouplingGraph, s: usize, r: usize) -> Result<f64> {
    let n = graph.node_count();
    if s >= n || r >= n {
        return Err(Error::DimensionMismatch { expected: n, got: s.max(r) + 1 });
    }
    if s == r {
        return Ok(1.0);
    }
    if !graph.connected(s, r) {
        return Ok(0.0);
    }
    let d = SpectralDecomposition::of_graph(graph)?;
    Ok(dark_weight_from(&d, s, r))
}

fn dark_weight_from(d: &SpectralDecomposition, s: usize, r: usize) -> f64 {
    let values = d.eigenvalues();
    let v = d.eigenvectors();
    let scale = values.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-9 * scale;
    let mut total = 0.0;
    let mut k = 0;
    while k < values.len() {
        let mut end = k + 1;
        while end < values.len() && values[end] - values[end - 1] <= tol {
            end += 1;
        }
        let overlap: f64 = (k..end).map(|i| v[(s, i)] * v[(r, i)]).sum();
        let weight: f64 = (k..end).map(|i| v[(r, i)] * v[(r, i)]).sum();
        if weight > 1e-28 {
            total += overlap * overlap / weight;
        }
        k = end;
    }
    total.min(1.0)
}

/// Sender excitation tracked in the rotating eigenframe: the physical state
/// at time `t` is `exp(-loss t / 2) sum_k c_k exp(-i lambda_k t) v_k`.
struct Tracker<'a> {
    values: &'a [f64],
    receiver_row: Vec<f64>,
    coeffs: Vec<C64>,
    loss: f64,
}

impl<'a> Tracker<'a> {
    fn new(d: &'a SpectralDecomposition, s: usize, r: usize, loss: f64) -> Self {
        let v = d.eigenvectors();
        let n = d.dim();
        Tracker {
            values: d.eigenvalues(),
            receiver_row: (0..n).map(|k| v[(r, k)]).collect(),
            coeffs: (0..n).map(|k| C64::new(v[(s, k)], 0.0)).collect(),
            loss,
        }
    }

    /// Receiver amplitude in the frame, without the damping factor.
    fn frame_amplitude(&self, t: f64) -> C64 {
        self.coeffs
            .iter()
            .zip(&self.receiver_row)
            .zip(self.values)
            .fold(ZERO, |acc, ((c, vr), lam)| acc + c * C64::from_polar(*vr, -lam * t))
    }

    fn damping(&self, t: f64) -> f64 {
        (-0.5 * self.loss * t).exp()
    }

    fn amplitude(&self, t: f64) -> C64 {
        self.frame_amplitude(t) * self.damping(t)
    }

    fn remaining(&self, t: f64) -> f64 {
        norm_sqr(&self.coeffs) * self.damping(t).powi(2)
    }

    /// Removes the receiver component at time `t`.
    fn collapse(&mut self, t: f64) -> C64 {
        let g = self.frame_amplitude(t);
        for ((c, vr), lam) in self.coeffs.iter_mut().zip(&self.receiver_row).zip(self.values) {
            *c -= g * C64::from_polar(*vr, lam * t);
        }
        g * self.damping(t)
    }
}

/// Regular schedule starting at the front arrival time with interval
/// `tau_scale * N^(1/3) / J`.
pub fn regular_schedule(
    graph: &CouplingGraph,
    tau_scale: f64,
    max_rounds: usize,
) -> Result<MeasurementSchedule> {
    if !(tau_scale.is_finite() && tau_scale > 0.0) {
        return Err(Error::InvalidParameter(format!("tau scale must be > 0, got {tau_scale}")));
    }
    let n = graph.node_count() as f64;
    let j = graph.as_uniform_chain().or_else(|| graph.min_weight()).unwrap_or(1.0);
    let schedule = MeasurementSchedule::Regular {
        t0: crate::dynamics::arrival_time_estimate(graph).time,
        tau: tau_scale * n.cbrt() / j,
        max_rounds,
    };
    schedule.validate()?;
    Ok(schedule)
}

pub const DEFAULT_TAU_SCALE: f64 = 0.35;

pub fn default_regular_schedule(graph: &CouplingGraph, max_rounds: usize) -> Result<MeasurementSchedule> {
    regular_schedule(graph, DEFAULT_TAU_SCALE, max_rounds)
}

fn check_target(target: f64) -> Result<()> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!("target fidelity must be in (0, 1), got {target}")));
    }
    Ok(())
}

fn disconnected_record(graph: &CouplingGraph, target: f64) -> TransferRecord {
    TransferRecord {
        rounds: Vec::new(),
        conditional_fidelity: None,
        elapsed: 0.0,
        converged: false,
        target,
        ceiling: 0.0,
        remaining_norm: 1.0,
        decayed: 0.0,
        diagnostic: Some(format!(
            "sender {} and receiver {} lie in different components; success ceiling is 0",
            graph.sender() + 1,
            graph.receiver() + 1
        )),
    }
}

/// Runs the protocol, stopping once cumulative success reaches `target` or
/// the schedule is exhausted. A disconnected sender/receiver pair yields an
/// empty record with ceiling 0 and a diagnostic instead of an error.
pub fn run_protocol(
    graph: &CouplingGraph,
    qubit: &PolaritonQubit,
    schedule: &MeasurementSchedule,
    target: f64,
) -> Result<TransferRecord> {
    run_damped(graph, qubit, schedule, target, 0.0)
}

fn run_damped(
    graph: &CouplingGraph,
    qubit: &PolaritonQubit,
    schedule: &MeasurementSchedule,
    target: f64,
    loss: f64,
) -> Result<TransferRecord> {
    check_target(target)?;
    schedule.validate()?;
    if !graph.endpoints_connected() {
        return Ok(disconnected_record(graph, target));
    }
    if let MeasurementSchedule::Continuous { rate, duration, dt } = *schedule {
        let run = continuous(graph, qubit, rate, duration, dt, Some(target), loss)?;
        return Ok(run.record);
    }
    let d = SpectralDecomposition::of_graph(graph)?;
    let times = match schedule {
        MeasurementSchedule::GreedyOptimized { window, grid_step, max_rounds } => {
            greedy_times(&d, graph, *max_rounds, *window, *grid_step)
        }
        other => other.times().unwrap_or_default(),
    };
    let ceiling = dark_weight_from(&d, graph.sender(), graph.receiver());
    Ok(run_snapshots(&d, graph, qubit, &times, target, loss, ceiling))
}

fn run_snapshots(
    d: &SpectralDecomposition,
    graph: &CouplingGraph,
    qubit: &PolaritonQubit,
    times: &[f64],
    target: f64,
    loss: f64,
    ceiling: f64,
) -> TransferRecord {
    let mut tracker = Tracker::new(d, graph.sender(), graph.receiver(), loss);
    let mut rounds = Vec::with_capacity(times.len());
    let mut cumulative = 0.0;
    let mut fidelity: Option<f64> = None;
    let mut elapsed = 0.0;
    let mut remaining = 1.0;
    for (k, &t) in times.iter().enumerate() {
        let before = tracker.remaining(t);
        if before <= 0.0 {
            break;
        }
        let f = tracker.collapse(t);
        let absolute = f.norm_sqr();
        cumulative += absolute;
        remaining = tracker.remaining(t);
        elapsed = t;
        if absolute > 0.0 {
            let fid = heralded_fidelity(qubit, f);
            fidelity = Some(fidelity.map_or(fid, |m: f64| m.min(fid)));
        }
        rounds.push(RoundRecord {
            round: k + 1,
            time: t,
            conditional: (absolute / before).min(1.0),
            absolute,
            cumulative,
            remaining,
        });
        if cumulative >= target {
            break;
        }
    }
    let decayed = if loss > 0.0 { (1.0 - cumulative - remaining).max(0.0) } else { 0.0 };
    let diagnostic = (ceiling < target).then(|| {
        format!("target {target} exceeds the dark-state ceiling {ceiling:.6} of this sender/receiver pair")
    });
    TransferRecord {
        rounds,
        conditional_fidelity: fidelity,
        elapsed,
        converged: cumulative >= target,
        target,
        ceiling,
        remaining_norm: remaining,
        decayed,
        diagnostic,
    }
}

/// Greedy schedule: each next time maximizes the success probability of that
/// round over a forward grid of `window / grid_step` points, refined by a
/// golden-section search around the best grid point, given failure of every
/// earlier round.
pub fn optimize_schedule(
    graph: &CouplingGraph,
    max_rounds: usize,
    window: f64,
    grid_step: f64,
) -> Result<MeasurementSchedule> {
    let probe = MeasurementSchedule::GreedyOptimized { window, grid_step, max_rounds };
    probe.validate()?;
    if !graph.endpoints_connected() {
        return Ok(MeasurementSchedule::SnapshotList { times: Vec::new() });
    }
    let d = SpectralDecomposition::of_graph(graph)?;
    Ok(MeasurementSchedule::SnapshotList { times: greedy_times(&d, graph, max_rounds, window, grid_step) })
}

fn greedy_times(
    d: &SpectralDecomposition,
    graph: &CouplingGraph,
    max_rounds: usize,
    window: f64,
    grid_step: f64,
) -> Vec<f64> {
    let mut tracker = Tracker::new(d, graph.sender(), graph.receiver(), 0.0);
    let points = ((window / grid_step) + 1e-9).floor().max(1.0) as usize;
    let mut times = Vec::with_capacity(max_rounds);
    let mut now = 0.0;
    // the very first round may also be taken immediately
    let first_offset = if graph.sender() == graph.receiver() { 0 } else { 1 };
    for round in 0..max_rounds {
        if tracker.remaining(now) <= 1e-14 {
            break;
        }
        let p = |t: f64| tracker.amplitude(t).norm_sqr();
        let start = if round == 0 { first_offset } else { 1 };
        let (mut best_t, mut best_p) = (now + start as f64 * grid_step, f64::NEG_INFINITY);
        for j in start..=points {
            let t = now + j as f64 * grid_step;
            let pj = p(t);
            if pj > best_p {
                best_t = t;
                best_p = pj;
            }
        }
        let lo = (best_t - grid_step).max(if round == 0 { 0.0 } else { now + 1e-9 * grid_step });
        let hi = best_t + grid_step;
        let refined = golden_section_max(&p, lo, hi, 1e-12 * hi.max(1.0));
        if refined > now && p(refined) >= best_p {
            best_t = refined;
        }
        if round > 0 && best_t <= now {
            break;
        }
        tracker.collapse(best_t);
        times.push(best_t);
        now = best_t;
    }
    times
}

fn golden_section_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd { c } else { d }
}

/// One sample of a continuously monitored run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionSample {
    pub time: f64,
    /// `1 - ||f(t)||^2` minus decay.
    pub cumulative: f64,
    /// `Gamma |f_r(t)|^2`.
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousRun {
    pub record: TransferRecord,
    pub samples: Vec<DetectionSample>,
}

/// Continuous detection at the receiver modelled as a decay channel of rate
/// `rate` on that site; each time step is reported as one round.
pub fn run_continuous(
    graph: &CouplingGraph,
    qubit: &PolaritonQubit,
    rate: f64,
    duration: f64,
    dt: f64,
) -> Result<ContinuousRun> {
    MeasurementSchedule::Continuous { rate, duration, dt }.validate()?;
    if !graph.endpoints_connected() {
        return Ok(ContinuousRun { record: disconnected_record(graph, 1.0), samples: Vec::new() });
    }
    continuous(graph, qubit, rate, duration, dt, None, 0.0)
}

fn continuous(
    graph: &CouplingGraph,
    qubit: &PolaritonQubit,
    rate: f64,
    duration: f64,
    dt: f64,
    target: Option<f64>,
    loss: f64,
) -> Result<ContinuousRun> {
    let n = graph.node_count();
    let fastest = rate.max(graph.max_weight()).max(loss);
    let limit = 0.1 / fastest;
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepSize(format!(
            "dt = {dt} does not resolve the fastest rate {fastest}; need dt <= {limit}"
        )));
    }
    let r = graph.receiver();
    let detection = DecayProfile::at_site(n, r, rate)?;
    let decay = detection.plus(&DecayProfile::uniform(n, loss)?)?;
    let steps = (duration / dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { duration / steps as f64 };
    let propagator = NonHermitianPropagator::new(graph, &decay, h)?;

    let mut psi = SingleExcitationState::localized(n, graph.sender())?.into_raw();
    let mut detected = 0.0;
    let mut decayed = 0.0;
    let mut norm = 1.0;
    let mut fidelity: Option<f64> = None;
    let mut rounds = Vec::with_capacity(steps);
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(DetectionSample { time: 0.0, cumulative: 0.0, density: rate * psi[r].norm_sqr() });
    let mut elapsed = 0.0;
    for k in 0..steps {
        let next = propagator.apply(&psi);
        let next_norm = norm_sqr(&next);
        if next_norm > norm + crate::model::DRIFT_TOL {
            return Err(Error::StepSize(format!("squared norm grew from {norm} to {next_norm}")));
        }
        // split the lost weight between detection and loss by the trapezoid
        // rule on their instantaneous rates
        let lost = norm - next_norm;
        let site_rate = |v: &[C64]| rate * v[r].norm_sqr();
        let loss_rate = |v: &[C64]| loss * norm_sqr(v);
        let (ds, dl) = (site_rate(&psi) + site_rate(&next), loss_rate(&psi) + loss_rate(&next));
        let share = if ds + dl > 0.0 { ds / (ds + dl) } else { 1.0 };
        let step_detected = lost * share;
        detected += step_detected;
        decayed += lost - step_detected;

        let t = (k + 1) as f64 * h;
        let f = next[r];
        if f.norm_sqr() > 0.0 {
            let fid = heralded_fidelity(qubit, f);
            fidelity = Some(fidelity.map_or(fid, |m: f64| m.min(fid)));
        }
        rounds.push(RoundRecord {
            round: k + 1,
            time: t,
            conditional: if norm > 0.0 { (step_detected / norm).min(1.0) } else { 0.0 },
            absolute: step_detected,
            cumulative: detected,
            remaining: next_norm,
        });
        samples.push(DetectionSample { time: t, cumulative: detected, density: rate * f.norm_sqr() });
        psi = next;
        norm = next_norm;
        elapsed = t;
        if target.is_some_and(|f| detected >= f) {
            break;
        }
    }
    let d = SpectralDecomposition::of_graph(graph)?;
    let ceiling = dark_weight_from(&d, graph.sender(), r);
    let target_value = target.unwrap_or(1.0);
    let record = TransferRecord {
        rounds,
        conditional_fidelity: fidelity,
        elapsed,
        converged: detected >= target_value,
        target: target_value,
        ceiling,
        remaining_norm: norm,
        decayed,
        diagnostic: None,
    };
    Ok(ContinuousRun { record, samples })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossyRun {
    pub record: TransferRecord,
    /// Cumulative heralding probability with loss.
    pub efficiency: f64,
    /// Same schedule without loss.
    pub lossless_success: f64,
    /// `exp(-gamma_p t_complete)`.
    pub envelope: f64,
    /// Loss rate per polariton, `(kappa + gamma) / 2`.
    pub polariton_decay: f64,
}

impl LossyRun {
    /// `efficiency / lossless_success`.
    pub fn degradation(&self) -> f64 {
        if self.lossless_success > 0.0 {
            self.efficiency / self.lossless_success
        } else {
            0.0
        }
    }
}

/// Protocol with uniform polariton loss `(kappa + gamma) / 2` on every site.
/// Rates in `params` are in the same units as the graph weights. Heralded
/// states keep unit fidelity; loss only reduces the efficiency.
pub fn lossy_run(
    graph: &CouplingGraph,
    qubit: &PolaritonQubit,
    schedule: &MeasurementSchedule,
    target: f64,
    params: &JchParams,
) -> Result<LossyRun> {
    let gamma_p = params.polariton_decay();
    let lossless = run_damped(graph, qubit, schedule, target, 0.0)?;
    let record = match schedule {
        MeasurementSchedule::Continuous { .. } => run_damped(graph, qubit, schedule, target, gamma_p)?,
        _ if lossless.rounds.is_empty() => run_damped(graph, qubit, schedule, target, gamma_p)?,
        _ => {
            // same rounds as the lossless run, which stops at the target
            let times = lossless.rounds.iter().map(|r| r.time).collect();
            let snapshots = MeasurementSchedule::SnapshotList { times };
            run_damped(graph, qubit, &snapshots, target, gamma_p)?
        }
    };
    let efficiency = record.cumulative_success();
    Ok(LossyRun {
        envelope: (-gamma_p * lossless.elapsed).exp(),
        efficiency,
        lossless_success: lossless.cumulative_success(),
        polariton_decay: gamma_p,
        record,
    })
}
