//! Integration tests of the experiment verbs: fixture replay, verification,
//! byte-determinism, and the edge cases of each report.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use walksat_lab::commands::{
    cmd_bounds, cmd_drift, cmd_first_flip, cmd_lazy_equivalence, cmd_replay, cmd_solve, cmd_sweep,
    render_json, render_sweep_csv,
};
use walksat_lab::config::ParamOverrides;
use walksat_lab_core::dimacs::parse_dimacs;
use walksat_lab_core::formula::generate_uniform;
use walksat_lab_core::revelation::{ProcessParams, ScriptChoice};
use walksat_lab_core::trace::Trace;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn example_inputs() -> (walksat_lab_core::Formula, Vec<ScriptChoice>, ProcessParams) {
    let f = parse_dimacs(&std::fs::read_to_string(fixture("example.cnf")).unwrap()).unwrap();
    let script: Vec<ScriptChoice> =
        serde_json::from_str(&std::fs::read_to_string(fixture("example_choices.json")).unwrap())
            .unwrap();
    let params = ParamOverrides {
        k1: Some(2),
        lambda: Some(2),
        ..Default::default()
    }
    .apply(f.k(), f.n());
    (f, script, params)
}

#[test]
fn replay_of_the_shipped_fixture() {
    let (f, script, params) = example_inputs();
    let expected: Trace =
        serde_json::from_str(&std::fs::read_to_string(fixture("example_expected.json")).unwrap())
            .unwrap();
    let report = cmd_replay(&f, &script, &params, Some(&expected)).unwrap();
    assert_eq!(report.matches, Some(true));
    assert_eq!(report.first_divergence, None);
    let trace = &report.trace;
    assert_eq!(trace.t_stop, 4);
    assert_eq!(trace.z_at(4), BTreeSet::from([1, 4]));
    assert_eq!(trace.n_at(4), BTreeSet::from([1, 2, 3, 4, 5, 6]));
    assert_eq!(trace.a_at(4), BTreeSet::from([7]));
}

#[test]
fn replay_flags_a_tampered_expectation() {
    let (f, script, params) = example_inputs();
    let mut tampered: Trace =
        serde_json::from_str(&std::fs::read_to_string(fixture("example_expected.json")).unwrap())
            .unwrap();
    tampered.records[2].z_size = 7;
    let report = cmd_replay(&f, &script, &params, Some(&tampered)).unwrap();
    assert_eq!(report.matches, Some(false));
    let div = report.first_divergence.unwrap();
    assert!(div.contains("records[2]"), "{div}");
    assert!(div.contains("z_size"), "{div}");
}

#[test]
fn replay_empty_script_on_satisfied_formula() {
    let f = parse_dimacs("p cnf 2 1\n1 -2 0\n").unwrap();
    let params = ProcessParams::defaults(2, 2);
    let report = cmd_replay(&f, &[], &params, None).unwrap();
    assert_eq!(report.trace.t_stop, 0);
    assert!(report.trace.satisfied());
}

#[test]
fn solve_zero_flips_on_all_true_fixture() {
    let f = parse_dimacs("c k 3\np cnf 3 2\n1 -2 3 0\n-1 -2 3 0\n").unwrap();
    let report = cmd_solve(&f, None, 5).unwrap();
    assert_eq!(report.outcome, "satisfied");
    assert_eq!(report.flips, 0);
    assert!(report.verified);
}

#[test]
fn solve_succeeds_at_reference_scale() {
    // k=5, n=10^4 at r = 2^5/(25*5) with the default budget t_max = n.
    let f = generate_uniform(10_000, 2560, 5, walksat_lab_core::rng::derive_seed(0xACE, 0)).unwrap();
    let report = cmd_solve(&f, None, 0xACE).unwrap();
    assert_eq!(report.outcome, "satisfied");
    assert!(report.flips <= 10_000);
}

#[test]
fn solve_budget_zero_fails_on_unsatisfied_start() {
    let f = parse_dimacs("c k 1\np cnf 1 1\n-1 0\n").unwrap();
    let report = cmd_solve(&f, Some(0), 5).unwrap();
    assert_eq!(report.outcome, "failure");
    assert_eq!(report.flips, 0);
    assert!(!report.verified);
}

#[test]
fn sweep_single_trial_rates_are_zero_or_one() {
    let params = ProcessParams::defaults(3, 40);
    let rows = cmd_sweep(3, 40, &[0.5, 2.0], 1, None, 3, &params).unwrap();
    for row in rows {
        assert!(row.success_rate == 0.0 || row.success_rate == 1.0);
        assert!(row.successes <= row.trials);
        assert!(row.wilson_lo >= 0.0 && row.wilson_hi <= 1.0);
    }
}

#[test]
fn sweep_success_rate_is_monotone_within_noise() {
    // Two densities at k=5, n=1000: 0.1 * 2^k/k and (1/25) * 2^k/k.
    let k = 5;
    let n = 1000;
    let dense = 0.1 * 32.0 / 5.0;
    let sparse = 32.0 / (25.0 * 5.0);
    let params = ProcessParams::defaults(k, n);
    let rows = cmd_sweep(k, n, &[sparse, dense], 100, None, 17, &params).unwrap();
    assert!(
        rows[1].success_rate <= rows[0].success_rate + 0.1,
        "dense {} vs sparse {}",
        rows[1].success_rate,
        rows[0].success_rate
    );
}

#[test]
fn drift_reports_empty_data_on_trivially_satisfied_instances() {
    // Density so low that m = 0: every run stops immediately.
    let params = ProcessParams::defaults(3, 50);
    let report = cmd_drift(3, 50, 0.001, 5, None, 1, &params).unwrap();
    assert!(report.empty);
    assert_eq!(report.steps, 0);
    assert_eq!(report.mean_increment, None);
    assert_eq!(report.satisfied_runs, 5);
}

#[test]
fn bounds_d0_tracks_the_all_negative_count() {
    let params = ProcessParams::defaults(4, 200);
    let report = cmd_bounds(4, 200, 1.0, 30, None, 5, &params).unwrap();
    // E[d0] = m / 2^k = 12.5; the bound is 4 m / 2^k = 50.
    assert_eq!(report.m, 200);
    assert!((report.d_bound - 50.0).abs() < 1e-12);
    assert!(report.mean_d0 > 6.0 && report.mean_d0 < 20.0, "{}", report.mean_d0);
}

#[test]
fn first_flip_reference_formula() {
    let report = cmd_first_flip(5, 1000, 0.256, 200, 77).unwrap();
    assert_eq!(report.m, 256);
    assert!((report.reference - (5.0 * 256.0) / (32.0 * 1000.0)).abs() < 1e-12);
    assert!(report.counted <= report.trials);
}

#[test]
fn lazy_equivalence_report_shape() {
    let params = ProcessParams::defaults(3, 30);
    let report = cmd_lazy_equivalence(3, 30, 0.5, 300, None, 21, &params, false).unwrap();
    assert!(report.ks_t_p > 0.001, "faithful sampler rejected: {}", report.ks_t_p);
    assert_eq!(report.runs_per_mode, 300);
}

#[test]
fn every_verb_is_byte_deterministic() {
    let (f, script, example_params) = example_inputs();
    let params = ProcessParams::defaults(4, 60);

    let solve = |_| render_json(&cmd_solve(&f, None, 9).unwrap());
    assert_eq!(solve(()), solve(()));

    let sweep =
        |_| render_sweep_csv(&cmd_sweep(4, 60, &[0.16, 1.0], 10, None, 9, &params).unwrap());
    assert_eq!(sweep(()), sweep(()));

    let drift = |_| render_json(&cmd_drift(4, 60, 1.0, 10, None, 9, &params).unwrap());
    assert_eq!(drift(()), drift(()));

    let bounds = |_| render_json(&cmd_bounds(4, 60, 1.0, 10, None, 9, &params).unwrap());
    assert_eq!(bounds(()), bounds(()));

    let replay = |_| render_json(&cmd_replay(&f, &script, &example_params, None).unwrap());
    assert_eq!(replay(()), replay(()));

    let lazy =
        |_| render_json(&cmd_lazy_equivalence(4, 60, 1.0, 50, None, 9, &params, false).unwrap());
    assert_eq!(lazy(()), lazy(()));
}

#[test]
fn trace_json_schema_is_versioned_and_round_trips() {
    let f = generate_uniform(20, 30, 3, 5).unwrap();
    let params = ProcessParams::defaults(3, 20);
    let trace = walksat_lab_core::revelation::run_instrumented(
        &f,
        &params,
        walksat_lab_core::revelation::Driver::Seeded(8),
        40,
    )
    .unwrap();
    assert_eq!(trace.schema, "walksat-lab/trace/v1");
    let text = serde_json::to_string(&trace).unwrap();
    let back: Trace = serde_json::from_str(&text).unwrap();
    assert_eq!(back, trace);
}
