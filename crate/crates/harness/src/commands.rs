//! The experiment verbs behind the CLI. Every command returns a
//! serializable report; rendering is centralized so that a rerun with the
//! same configuration and seed produces byte-identical output.

use serde::Serialize;
use walksat_lab_core::formula::{unsat_indices, Formula};
use walksat_lab_core::revelation::{run_instrumented, Driver, ProcessParams, ScriptChoice};
use walksat_lab_core::rng::derive_seed;
use walksat_lab_core::trace::{first_divergence, Trace};
use walksat_lab_core::walksat;

use crate::config::{clause_count, rho_of, HarnessError};
use crate::experiments::{first_flip_break_mean, instrumented_trials, lazy_trials, par_trials};
use crate::stats::{ks_two_sample, wilson_95};

pub const SOLVE_SCHEMA: &str = "walksat-lab/solve/v1";
pub const SWEEP_SCHEMA: &str = "walksat-lab/sweep/v1";
pub const DRIFT_SCHEMA: &str = "walksat-lab/drift/v1";
pub const BOUNDS_SCHEMA: &str = "walksat-lab/bounds/v1";
pub const REPLAY_SCHEMA: &str = "walksat-lab/replay/v1";
pub const LAZY_EQ_SCHEMA: &str = "walksat-lab/lazy-equivalence/v1";
pub const FIRST_FLIP_SCHEMA: &str = "walksat-lab/first-flip/v1";

/// Renders a report as pretty JSON with a trailing newline.
pub fn render_json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub schema: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub r: f64,
    pub rho: f64,
    pub seed: u64,
    pub t_max: usize,
    pub outcome: String,
    pub flips: usize,
    pub verified: bool,
}

/// Runs the walk once on `f` with budget `t_max` (default n). A satisfied
/// outcome is re-verified literal by literal; a verification failure is a
/// fatal internal-consistency error, never a report.
pub fn cmd_solve(f: &Formula, t_max: Option<usize>, seed: u64) -> Result<SolveReport, HarnessError> {
    let t_max = t_max.unwrap_or(f.n());
    let result = walksat::run(f, t_max, derive_seed(seed, 1));
    let satisfied = result.is_satisfied();
    if let Some(a) = result.satisfying_assignment() {
        let unsat = unsat_indices(f, a);
        if !unsat.is_empty() {
            return Err(HarnessError::Verification(format!(
                "satisfied outcome leaves clauses {unsat:?} unsatisfied"
            )));
        }
    }
    let r = f.density();
    Ok(SolveReport {
        schema: SOLVE_SCHEMA.to_string(),
        n: f.n(),
        m: f.m(),
        k: f.k(),
        r,
        rho: rho_of(r, f.k()),
        seed,
        t_max,
        outcome: if satisfied { "satisfied" } else { "failure" }.to_string(),
        flips: result.flips_used,
        verified: satisfied,
    })
}

// ---------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub r: f64,
    pub rho: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_flips: f64,
    pub mean_d_peak: f64,
    pub mean_z_peak: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

/// Instrumented success-rate sweep over a density list. Trial (d, i) uses
/// the seed stream `d * trials + i` of the master seed.
pub fn cmd_sweep(
    k: usize,
    n: usize,
    densities: &[f64],
    trials: usize,
    t_max: Option<usize>,
    seed: u64,
    params: &ProcessParams,
) -> Result<Vec<SweepRow>, HarnessError> {
    if densities.is_empty() {
        return Err(HarnessError::BadConfig("sweep needs at least one density".into()));
    }
    if trials == 0 {
        return Err(HarnessError::BadConfig("trials must be at least 1".into()));
    }
    let cap = t_max.unwrap_or(n);
    let mut rows = Vec::with_capacity(densities.len());
    for (d_idx, &r) in densities.iter().enumerate() {
        if r <= 0.0 {
            return Err(HarnessError::BadConfig(format!("density {r} must be positive")));
        }
        let m = clause_count(r, n);
        let master = derive_seed(seed, (d_idx * trials) as u64);
        let traces = instrumented_trials(n, m, k, params, cap, master, trials);
        let successes = traces.iter().filter(|t| t.satisfied()).count();
        let mean_of =
            |f: &dyn Fn(&Trace) -> f64| traces.iter().map(f).sum::<f64>() / trials as f64;
        let (wilson_lo, wilson_hi) = wilson_95(successes, trials);
        rows.push(SweepRow {
            r,
            rho: rho_of(r, k),
            trials,
            successes,
            success_rate: successes as f64 / trials as f64,
            mean_flips: mean_of(&|t: &Trace| t.t_stop as f64),
            mean_d_peak: mean_of(&|t: &Trace| t.d_peak() as f64),
            mean_z_peak: mean_of(&|t: &Trace| t.z_peak() as f64),
            wilson_lo,
            wilson_hi,
        });
    }
    Ok(rows)
}

/// Versioned CSV rendering of a sweep.
pub fn render_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str("# walksat-lab/sweep/v1\n");
    out.push_str(
        "r,rho,trials,successes,success_rate,mean_flips,mean_d_peak,mean_z_peak,wilson_lo,wilson_hi\n",
    );
    for row in rows {
        out.push_str(&format!(
            "{:.6},{:.6},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            row.r,
            row.rho,
            row.trials,
            row.successes,
            row.success_rate,
            row.mean_flips,
            row.mean_d_peak,
            row.mean_z_peak,
            row.wilson_lo,
            row.wilson_hi
        ));
    }
    out
}

#[derive(Serialize)]
struct SweepJson<'a> {
    schema: &'static str,
    rows: &'a [SweepRow],
}

pub fn render_sweep_json(rows: &[SweepRow]) -> String {
    render_json(&SweepJson {
        schema: SWEEP_SCHEMA,
        rows,
    })
}

// ---------------------------------------------------------------------
// drift
// ---------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct DriftCase {
    pub steps: usize,
    pub mean_increment: Option<f64>,
    /// Fraction of these steps whose potential moved down by one.
    pub dec_fraction: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DriftReport {
    pub schema: String,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub r: f64,
    pub rho: f64,
    pub trials: usize,
    pub seed: u64,
    pub t_star: usize,
    pub cap: usize,
    pub empty: bool,
    /// Steps aggregated (t <= min(T, T*) in every run).
    pub steps: usize,
    /// Mean one-step increment of S' + H'.
    pub mean_increment: Option<f64>,
    /// Steps whose chosen clause was outside Z; dec_fraction counts S'
    /// decrements (hidden chosen slots).
    pub case_outside_z: DriftCase,
    /// Steps whose chosen clause was inside Z; dec_fraction counts H'
    /// decrements.
    pub case_inside_z: DriftCase,
    pub satisfied_runs: usize,
    pub rich_failure_runs: usize,
}

/// Measures the one-step drift of S' + H' over instrumented runs.
pub fn cmd_drift(
    k: usize,
    n: usize,
    r: f64,
    trials: usize,
    t_max: Option<usize>,
    seed: u64,
    params: &ProcessParams,
) -> Result<DriftReport, HarnessError> {
    if trials == 0 {
        return Err(HarnessError::BadConfig("trials must be at least 1".into()));
    }
    if r <= 0.0 {
        return Err(HarnessError::BadConfig(format!("density {r} must be positive")));
    }
    let m = clause_count(r, n);
    let cap = t_max.unwrap_or(params.t_star);
    let traces = instrumented_trials(n, m, k, params, cap, seed, trials);

    let mut total_steps = 0usize;
    let mut total_inc = 0i64;
    let mut out_steps = 0usize;
    let mut out_inc = 0i64;
    let mut out_dec = 0usize;
    let mut in_steps = 0usize;
    let mut in_inc = 0i64;
    let mut in_dec = 0usize;
    for trace in &traces {
        let mut prev_s = 0i64;
        let mut prev_h = 0i64;
        for rec in &trace.records {
            if rec.t > params.t_star {
                break;
            }
            let ds = rec.s_prime - prev_s;
            let dh = rec.h_prime - prev_h;
            prev_s = rec.s_prime;
            prev_h = rec.h_prime;
            let inc = ds + dh;
            total_steps += 1;
            total_inc += inc;
            if rec.chosen_in_z {
                in_steps += 1;
                in_inc += inc;
                if dh == -1 {
                    in_dec += 1;
                }
            } else {
                out_steps += 1;
                out_inc += inc;
                if rec.chosen_hidden {
                    out_dec += 1;
                }
            }
        }
    }
    let frac = |num: usize, den: usize| {
        if den == 0 {
            None
        } else {
            Some(num as f64 / den as f64)
        }
    };
    let mean = |sum: i64, den: usize| {
        if den == 0 {
            None
        } else {
            Some(sum as f64 / den as f64)
        }
    };
    Ok(DriftReport {
        schema: DRIFT_SCHEMA.to_string(),
        k,
        n,
        m,
        r,
        rho: rho_of(r, k),
        trials,
        seed,
        t_star: params.t_star,
        cap,
        empty: total_steps == 0,
        steps: total_steps,
        mean_increment: mean(total_inc, total_steps),
        case_outside_z: DriftCase {
            steps: out_steps,
            mean_increment: mean(out_inc, out_steps),
            dec_fraction: frac(out_dec, out_steps),
        },
        case_inside_z: DriftCase {
            steps: in_steps,
            mean_increment: mean(in_inc, in_steps),
            dec_fraction: frac(in_dec, in_steps),
        },
        satisfied_runs: traces.iter().filter(|t| t.satisfied()).count(),
        rich_failure_runs: traces
            .iter()
            .filter(|t| t.records.iter().any(|r| !r.rich_ok))
            .count(),
    })
}

// ---------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub schema: String,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub r: f64,
    pub rho: f64,
    pub trials: usize,
    pub seed: u64,
    pub t_star: usize,
    /// 2^(2-k) m.
    pub d_bound: f64,
    /// epsilon * n.
    pub z_bound: f64,
    pub mean_d0: f64,
    pub mean_d_peak: f64,
    pub max_d_peak: usize,
    pub mean_z_peak: f64,
    pub max_z_peak: usize,
    pub d_violation_runs: usize,
    pub z_violation_runs: usize,
    pub violation_runs: usize,
    pub violation_rate: f64,
    pub satisfied_runs: usize,
    /// Runs where a successful rich build failed its own guarantee
    /// (always 0 for a correct construction).
    pub rich_violation_runs: usize,
}

/// Monitors per-run maxima of |D| and |Z| over t <= T* against the bounds
/// 2^(2-k) m and epsilon n.
pub fn cmd_bounds(
    k: usize,
    n: usize,
    r: f64,
    trials: usize,
    t_max: Option<usize>,
    seed: u64,
    params: &ProcessParams,
) -> Result<BoundsReport, HarnessError> {
    if trials == 0 {
        return Err(HarnessError::BadConfig("trials must be at least 1".into()));
    }
    if r <= 0.0 {
        return Err(HarnessError::BadConfig(format!("density {r} must be positive")));
    }
    let m = clause_count(r, n);
    let cap = t_max.unwrap_or(params.t_star).min(params.t_star);
    let traces = instrumented_trials(n, m, k, params, cap, seed, trials);
    let d_bound = 4.0 * m as f64 / (1u64 << k) as f64;
    let z_bound = params.epsilon * n as f64;
    let mut d_violation_runs = 0;
    let mut z_violation_runs = 0;
    let mut violation_runs = 0;
    let mut d_peaks = Vec::with_capacity(trials);
    let mut z_peaks = Vec::with_capacity(trials);
    for trace in &traces {
        let d_peak = trace.d_peak();
        let z_peak = trace.z_peak();
        let d_bad = (d_peak as f64) > d_bound;
        let z_bad = (z_peak as f64) > z_bound;
        d_violation_runs += usize::from(d_bad);
        z_violation_runs += usize::from(z_bad);
        violation_runs += usize::from(d_bad || z_bad);
        d_peaks.push(d_peak);
        z_peaks.push(z_peak);
    }
    Ok(BoundsReport {
        schema: BOUNDS_SCHEMA.to_string(),
        k,
        n,
        m,
        r,
        rho: rho_of(r, k),
        trials,
        seed,
        t_star: params.t_star,
        d_bound,
        z_bound,
        mean_d0: traces.iter().map(|t| t.d0_size as f64).sum::<f64>() / trials as f64,
        mean_d_peak: d_peaks.iter().sum::<usize>() as f64 / trials as f64,
        max_d_peak: d_peaks.iter().copied().max().unwrap_or(0),
        mean_z_peak: z_peaks.iter().sum::<usize>() as f64 / trials as f64,
        max_z_peak: z_peaks.iter().copied().max().unwrap_or(0),
        d_violation_runs,
        z_violation_runs,
        violation_runs,
        violation_rate: violation_runs as f64 / trials as f64,
        satisfied_runs: traces.iter().filter(|t| t.satisfied()).count(),
        rich_violation_runs: traces
            .iter()
            .filter(|t| !t.rich_violations.is_empty())
            .count(),
    })
}

// ---------------------------------------------------------------------
// replay
// ---------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ReplayReport {
    pub schema: String,
    /// Set when an expected trace was supplied.
    pub matches: Option<bool>,
    pub first_divergence: Option<String>,
    pub trace: Trace,
}

/// Replays a choice script against a fixed formula, optionally comparing
/// the resulting trace with an expected one.
pub fn cmd_replay(
    f: &Formula,
    script: &[ScriptChoice],
    params: &ProcessParams,
    expect: Option<&Trace>,
) -> Result<ReplayReport, HarnessError> {
    let cap = script.len() + 1;
    let trace = run_instrumented(f, params, Driver::Script(script), cap)?;
    let (matches, divergence) = match expect {
        None => (None, None),
        Some(expected) => {
            let diff = first_divergence(&trace, expected);
            (Some(diff.is_none()), diff)
        }
    };
    Ok(ReplayReport {
        schema: REPLAY_SCHEMA.to_string(),
        matches,
        first_divergence: divergence,
        trace,
    })
}

// ---------------------------------------------------------------------
// lazy-equivalence
// ---------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct LazyEquivalenceReport {
    pub schema: String,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub r: f64,
    pub rho: f64,
    pub runs_per_mode: usize,
    pub cap: usize,
    pub seed: u64,
    pub negative_control: bool,
    pub reveal_boost: f64,
    /// KS statistic and p-value on the stopping time.
    pub ks_t_stat: f64,
    pub ks_t_p: f64,
    /// KS statistic and p-value on the terminal |D|.
    pub ks_d_stat: f64,
    pub ks_d_p: f64,
    pub eager_mean_t: f64,
    pub lazy_mean_t: f64,
}

/// Compares eager and lazy generation: two-sample KS on the stopping time
/// and on the terminal |D|. The negative control runs the lazy side with a
/// deliberately biased occurrence sampler, which the test must reject.
#[allow(clippy::too_many_arguments)]
pub fn cmd_lazy_equivalence(
    k: usize,
    n: usize,
    r: f64,
    runs: usize,
    t_max: Option<usize>,
    seed: u64,
    params: &ProcessParams,
    negative_control: bool,
) -> Result<LazyEquivalenceReport, HarnessError> {
    if runs == 0 {
        return Err(HarnessError::BadConfig("runs must be at least 1".into()));
    }
    if r <= 0.0 {
        return Err(HarnessError::BadConfig(format!("density {r} must be positive")));
    }
    let m = clause_count(r, n);
    let cap = t_max.unwrap_or(n);
    let boost = if negative_control { 8.0 } else { 1.0 };
    let eager = instrumented_trials(n, m, k, params, cap, derive_seed(seed, 1), runs);
    let lazy = lazy_trials(n, m, k, params, cap, derive_seed(seed, 2), runs, boost);
    let t_of = |ts: &[Trace]| -> Vec<f64> { ts.iter().map(|t| t.t_stop as f64).collect() };
    let d_of = |ts: &[Trace]| -> Vec<f64> {
        ts.iter()
            .map(|t| t.records.last().map_or(t.d0_size, |r| r.d_size) as f64)
            .collect()
    };
    let (e_t, l_t) = (t_of(&eager), t_of(&lazy));
    let (e_d, l_d) = (d_of(&eager), d_of(&lazy));
    let (ks_t_stat, ks_t_p) = ks_two_sample(&e_t, &l_t);
    let (ks_d_stat, ks_d_p) = ks_two_sample(&e_d, &l_d);
    Ok(LazyEquivalenceReport {
        schema: LAZY_EQ_SCHEMA.to_string(),
        k,
        n,
        m,
        r,
        rho: rho_of(r, k),
        runs_per_mode: runs,
        cap,
        seed,
        negative_control,
        reveal_boost: boost,
        ks_t_stat,
        ks_t_p,
        ks_d_stat,
        ks_d_p,
        eager_mean_t: e_t.iter().sum::<f64>() / runs as f64,
        lazy_mean_t: l_t.iter().sum::<f64>() / runs as f64,
    })
}

// ---------------------------------------------------------------------
// first-flip (experiment helper reused by the acceptance suite)
// ---------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct FirstFlipReport {
    pub schema: String,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub trials: usize,
    pub counted: usize,
    pub mean_broken: f64,
    /// km / (2^k n).
    pub reference: f64,
}

/// Mean number of clauses newly broken by the first flip over fresh
/// instances, against the km/(2^k n) reference.
pub fn cmd_first_flip(
    k: usize,
    n: usize,
    r: f64,
    trials: usize,
    seed: u64,
) -> Result<FirstFlipReport, HarnessError> {
    if trials == 0 {
        return Err(HarnessError::BadConfig("trials must be at least 1".into()));
    }
    let m = clause_count(r, n);
    let (mean_broken, counted) = first_flip_break_mean(n, m, k, seed, trials);
    Ok(FirstFlipReport {
        schema: FIRST_FLIP_SCHEMA.to_string(),
        k,
        n,
        m,
        trials,
        counted,
        mean_broken,
        reference: (k * m) as f64 / ((1u64 << k) as f64 * n as f64),
    })
}

/// Success counts for plain solver trials at one density.
pub fn solve_success_count(
    k: usize,
    n: usize,
    r: f64,
    trials: usize,
    t_max: usize,
    seed: u64,
) -> usize {
    let m = clause_count(r, n);
    let results = par_trials(trials, |trial| {
        let f = walksat_lab_core::formula::generate_uniform(
            n,
            m,
            k,
            derive_seed(seed, 2 * trial as u64),
        )
        .expect("valid dimensions");
        let res = walksat::run(&f, t_max, derive_seed(seed, 2 * trial as u64 + 1));
        if let Some(a) = res.satisfying_assignment() {
            assert!(unsat_indices(&f, a).is_empty());
        }
        res.is_satisfied()
    });
    results.into_iter().filter(|&s| s).count()
}
