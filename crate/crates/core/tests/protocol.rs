use approx::assert_abs_diff_eq;
use polariton_transfer::protocol::{
    dark_weight, default_regular_schedule, lossy_run, optimize_schedule, run_continuous, run_protocol,
};
use polariton_transfer::{build_chain, build_graph, JchParams, MeasurementSchedule, PolaritonQubit, C64};
use proptest::prelude::*;
use std::f64::consts::FRAC_PI_2;

fn qubit(re_a: f64, im_a: f64, re_b: f64, im_b: f64) -> Option<PolaritonQubit> {
    let n = (re_a * re_a + im_a * im_a + re_b * re_b + im_b * im_b).sqrt();
    if n < 1e-3 {
        return None;
    }
    PolaritonQubit::new(C64::new(re_a / n, im_a / n), C64::new(re_b / n, im_b / n)).ok()
}

#[test]
fn single_round_on_two_sites() {
    let g = build_chain(2, 1.0).unwrap();
    let schedule = MeasurementSchedule::SnapshotList { times: vec![FRAC_PI_2] };
    let rec = run_protocol(&g, &PolaritonQubit::minus(), &schedule, 0.99).unwrap();
    assert_eq!(rec.rounds.len(), 1);
    assert!(rec.converged);
    assert_abs_diff_eq!(rec.cumulative_success(), 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(rec.conditional_fidelity.unwrap(), 1.0, epsilon = 1e-12);
}

#[test]
fn regular_schedule_reaches_target() {
    let g = build_chain(12, 1.0).unwrap();
    let schedule = default_regular_schedule(&g, 2000).unwrap();
    let rec = run_protocol(&g, &PolaritonQubit::plus(), &schedule, 0.99).unwrap();
    assert!(rec.converged);
    assert!(rec.cumulative_success() >= 0.99);
}

#[test]
fn disconnected_pair_is_reported() {
    let g = build_graph(4, &[(0, 1, 1.0), (2, 3, 1.0)], 0, 3).unwrap();
    let schedule = MeasurementSchedule::Regular { t0: 1.0, tau: 1.0, max_rounds: 10 };
    let rec = run_protocol(&g, &PolaritonQubit::plus(), &schedule, 0.9).unwrap();
    assert_eq!(rec.ceiling, 0.0);
    assert!(!rec.converged);
    assert!(rec.diagnostic.is_some());
}

#[test]
fn star_ceiling() {
    // centre 0 with three leaves; leaf to leaf transfer is capped by the dark subspace
    let g = build_graph(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)], 1, 2).unwrap();
    let w = dark_weight(&g, 1, 2).unwrap();
    assert!(w < 1.0);
    let schedule = MeasurementSchedule::Regular { t0: 0.3, tau: 0.9, max_rounds: 3000 };
    let rec = run_protocol(&g, &PolaritonQubit::plus(), &schedule, 0.999_999).unwrap();
    assert!(rec.cumulative_success() <= w + 1e-9);
    assert!((rec.cumulative_success() - w).abs() < 1e-3);
}

#[test]
fn greedy_schedule_is_increasing() {
    let g = build_chain(6, 1.0).unwrap();
    let schedule = optimize_schedule(&g, 30, 10.0, 0.05).unwrap();
    let times = schedule.times().unwrap();
    assert!(!times.is_empty());
    assert!(times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn continuous_detection_on_two_sites() {
    let g = build_chain(2, 1.0).unwrap();
    let run = run_continuous(&g, &PolaritonQubit::plus(), 1.0, 30.0, 0.01).unwrap();
    assert!(run.record.cumulative_success() > 0.99);
    assert!(run.samples.windows(2).all(|w| w[1].cumulative >= w[0].cumulative - 1e-15));
    let weak = run_continuous(&g, &PolaritonQubit::plus(), 1e-6, 5.0, 0.01).unwrap();
    assert!(weak.record.cumulative_success() < 1e-5);
}

#[test]
fn coarse_detection_step_is_rejected() {
    let g = build_chain(3, 1.0).unwrap();
    let err = run_continuous(&g, &PolaritonQubit::plus(), 5.0, 10.0, 0.5).unwrap_err();
    assert_eq!(err.kind(), "step-size");
}

#[test]
fn loss_costs_efficiency() {
    let g = build_chain(4, 1.0).unwrap();
    let params = JchParams::resonant(100.0, 1.0, 1).unwrap().with_losses(0.02, 0.02).unwrap();
    let schedule = default_regular_schedule(&g, 500).unwrap();
    let run = lossy_run(&g, &PolaritonQubit::plus(), &schedule, 0.99, &params).unwrap();
    assert!(run.lossless_success >= 0.99);
    assert!(run.efficiency < run.lossless_success);
    assert!(run.degradation() >= run.envelope - 1e-12);
    assert!(run.record.norm_defect().abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn heralded_rounds_are_perfect(
        n in 2usize..16,
        a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0,
        gaps in proptest::collection::vec(0.05f64..3.0, 1..20),
    ) {
        let Some(q) = qubit(a, b, c, d) else { return Ok(()) };
        let g = build_chain(n, 1.0).unwrap();
        let times: Vec<f64> = gaps.iter().scan(0.0, |t, dt| { *t += dt; Some(*t) }).collect();
        let rec = run_protocol(&g, &q, &MeasurementSchedule::SnapshotList { times }, 0.999).unwrap();
        if let Some(f) = rec.conditional_fidelity {
            prop_assert!((f - 1.0).abs() < 1e-10);
        }
        prop_assert!(rec.rounds.windows(2).all(|w| w[1].cumulative >= w[0].cumulative));
        prop_assert!(rec.norm_defect().abs() < 1e-12);
    }
}
