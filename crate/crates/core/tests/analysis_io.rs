use polariton_transfer::analysis::{fit_scaling, scaling_points, sweep, ScalingPoint, SchedulePolicy};
use polariton_transfer::io::{emit_plot_series, rounds_table, sweep_table};
use polariton_transfer::protocol::{default_regular_schedule, run_protocol};
use polariton_transfer::{build_chain, Execution, PolaritonQubit};

#[test]
fn synthetic_power_law_is_recovered() {
    let points: Vec<ScalingPoint> = [4usize, 8, 16, 32, 64]
        .iter()
        .map(|&n| ScalingPoint { n, f: 0.99, t: 0.4 * (n as f64).powf(5.0 / 3.0) * 100f64.ln() / 2.0, j: 2.0 })
        .collect();
    let fit = fit_scaling(&points).unwrap();
    assert!((fit.p - 5.0 / 3.0).abs() < 1e-10);
    assert!((fit.c - 0.4).abs() < 1e-10);
    assert!(fit_scaling(&points[..3]).is_err());
}

#[test]
fn sweep_is_identical_across_execution_modes() {
    let sizes = [3, 5, 8];
    let policies = [SchedulePolicy::regular(), SchedulePolicy::optimized()];
    let seq = sweep(&sizes, 0.9, &policies, 1.0, Execution::Sequential);
    let par = sweep(&sizes, 0.9, &policies, 1.0, Execution::Parallel);
    assert_eq!(seq, par);
    assert_eq!(seq.len(), 6);
    assert_eq!(scaling_points(&seq, "regular", 1.0).len(), 3);
    let csv = sweep_table(&seq).to_csv();
    assert!(csv.starts_with("N,policy,F,t,rounds,P_final,status\n"));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn rounds_csv_and_plot_series() {
    let g = build_chain(6, 1.0).unwrap();
    let schedule = default_regular_schedule(&g, 100).unwrap();
    let rec = run_protocol(&g, &PolaritonQubit::plus(), &schedule, 0.95).unwrap();
    let table = rounds_table(&rec);
    assert_eq!(table.len(), rec.rounds.len());
    let series = emit_plot_series(&table, "time", "P_k", None).unwrap();
    assert!(series.starts_with("group,time,P_k\n"));
    let err = emit_plot_series(&table, "time", "nope", None).unwrap_err();
    assert_eq!(err.kind(), "missing-column");
}
