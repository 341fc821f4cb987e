//! Parallel trial execution. Trials are embarrassingly parallel: each one
//! derives its own seed from (master seed, trial index), and results are
//! collected in trial order, so the aggregate never depends on scheduling.
//! `WALKSAT_LAB_THREADS` caps the worker pool.

use rayon::prelude::*;
use walksat_lab_core::formula::{generate_uniform, unsat_indices, Formula};
use walksat_lab_core::revelation::{run_instrumented, run_instrumented_lazy, Driver, ProcessParams};
use walksat_lab_core::rng::{derive_seed, LabRng};
use walksat_lab_core::trace::Trace;
use walksat_lab_core::walksat::{self, SolverTracker};

/// Worker pool honoring `WALKSAT_LAB_THREADS`.
pub fn thread_pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("WALKSAT_LAB_THREADS") {
        if let Ok(threads) = v.trim().parse::<usize>() {
            if threads >= 1 {
                builder = builder.num_threads(threads);
            }
        }
    }
    builder.build().expect("thread pool")
}

/// Maps `f` over trial indices in parallel; the output vector is in trial
/// order regardless of completion order.
pub fn par_trials<T: Send>(trials: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    thread_pool().install(|| (0..trials).into_par_iter().map(f).collect())
}

/// One generated instance per trial, solved by the plain walk. Returns
/// (satisfied, flips) per trial; every satisfied outcome is re-verified.
pub fn solve_trials(
    n: usize,
    m: usize,
    k: usize,
    t_max: usize,
    master_seed: u64,
    trials: usize,
) -> Vec<(bool, usize)> {
    par_trials(trials, |trial| {
        let f = generate_uniform(n, m, k, derive_seed(master_seed, 2 * trial as u64))
            .expect("valid dimensions");
        let result = walksat::run(&f, t_max, derive_seed(master_seed, 2 * trial as u64 + 1));
        if let Some(a) = result.satisfying_assignment() {
            assert!(
                unsat_indices(&f, a).is_empty(),
                "satisfied outcome failed verification"
            );
        }
        (result.is_satisfied(), result.flips_used)
    })
}

/// One instrumented run per trial on a fresh instance. Satisfied outcomes
/// are re-verified against the formula before being reported.
pub fn instrumented_trials(
    n: usize,
    m: usize,
    k: usize,
    params: &ProcessParams,
    cap: usize,
    master_seed: u64,
    trials: usize,
) -> Vec<Trace> {
    par_trials(trials, |trial| {
        let f = generate_uniform(n, m, k, derive_seed(master_seed, 2 * trial as u64))
            .expect("valid dimensions");
        let trace = run_instrumented(
            &f,
            params,
            Driver::Seeded(derive_seed(master_seed, 2 * trial as u64 + 1)),
            cap,
        )
        .expect("seeded run cannot fail");
        if trace.satisfied() {
            let mut a = walksat_lab_core::Assignment::all_true(n);
            for &v in &trace.false_vars {
                a.set(v, false);
            }
            assert!(
                unsat_indices(&f, &a).is_empty(),
                "satisfied trace failed verification"
            );
        }
        trace
    })
}

/// One lazy run per trial (no formula materialized).
#[allow(clippy::too_many_arguments)]
pub fn lazy_trials(
    n: usize,
    m: usize,
    k: usize,
    params: &ProcessParams,
    cap: usize,
    master_seed: u64,
    trials: usize,
    reveal_boost: f64,
) -> Vec<Trace> {
    par_trials(trials, |trial| {
        run_instrumented_lazy(
            n,
            m,
            k,
            params,
            derive_seed(master_seed, trial as u64),
            cap,
            reveal_boost,
        )
    })
}

/// Number of clauses newly broken by the first flip on a fresh instance,
/// or `None` when the all-true assignment already satisfies it.
pub fn first_flip_broken(f: &Formula, run_seed: u64) -> Option<usize> {
    let mut tracker = SolverTracker::new(f, walksat_lab_core::Assignment::all_true(f.n()));
    let mut rng = LabRng::from_seed(run_seed);
    let clause = tracker.sample_unsat(&mut rng)?;
    let slot = rng.index(f.k());
    let var = f.literal(clause, slot).var();
    let (_, broken) = tracker.flip(f, var);
    Some(broken)
}

/// Mean number of clauses broken by the first flip over fresh instances.
/// Returns (mean, counted trials).
pub fn first_flip_break_mean(
    n: usize,
    m: usize,
    k: usize,
    master_seed: u64,
    trials: usize,
) -> (f64, usize) {
    let broken: Vec<Option<usize>> = par_trials(trials, |trial| {
        let f = generate_uniform(n, m, k, derive_seed(master_seed, 2 * trial as u64))
            .expect("valid dimensions");
        first_flip_broken(&f, derive_seed(master_seed, 2 * trial as u64 + 1))
    });
    let counted: Vec<usize> = broken.into_iter().flatten().collect();
    let mean = counted.iter().sum::<usize>() as f64 / counted.len().max(1) as f64;
    (mean, counted.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_results_are_order_deterministic() {
        let a = solve_trials(30, 20, 3, 100, 7, 16);
        let b = solve_trials(30, 20, 3, 100, 7, 16);
        assert_eq!(a, b);
    }

    #[test]
    fn first_flip_none_when_satisfied_at_start() {
        let f = generate_uniform(6, 0, 3, 0).unwrap();
        assert_eq!(first_flip_broken(&f, 1), None);
    }
}
