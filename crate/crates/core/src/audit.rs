//! Step-by-step verification of the structural laws of the revelation
//! process against a concrete formula.
//!
//! Each law is checked literally from the definitions (no shared state with
//! the incremental bookkeeping), so a clean audit certifies the run:
//!
//! - parity: sigma(x) is true iff x was flipped an even number of times;
//! - reveal: a slot shows its literal iff its variable lies in A ∪ N;
//! - dense rows: every slot of a dense clause is revealed;
//! - D contains every unsatisfied clause, and the incremental D matches the
//!   definitional recount;
//! - the injection from A into D is valid (so U <= S);
//! - S <= |D| + k|Z| + S', and H <= k|Z| + H' while the rich reference is
//!   alive (after a rich failure H is the |N| fallback, a label rather than
//!   the potential that the inequality speaks about, and the bound genuinely
//!   need not hold);
//! - |R_t - R_{t-1}| <= 2;
//! - S + H = 0 implies the assignment is satisfying;
//! - the rich reference satisfies every dense clause in >= rich_min
//!   occurrences while the construction is alive.

use crate::formula::Formula;
use crate::revelation::{Driver, ProcessParams, Revelation, StepResult};
use crate::rng::LabRng;
use crate::trace::{StepRecord, Trace};

/// Audits the process state right after a step produced `record`;
/// `prev_r` is R of the previous step (0 at the start). Returns violation
/// descriptions; an empty vector means every law holds.
pub fn audit_step(
    rev: &Revelation<'_>,
    f: &Formula,
    record: &StepRecord,
    prev_r: i64,
) -> Vec<String> {
    let t = record.t;
    let mut bad = Vec::new();
    let mut report = |msg: String| bad.push(format!("step {t}: {msg}"));

    // Parity law.
    for v in 1..=f.n() as u32 {
        let even = rev.flip_count(v).is_multiple_of(2);
        if rev.sigma().value(v) != even {
            report(format!("parity broken at x{v}"));
        }
    }

    // Reveal law and slot contents.
    let a_or_n = rev.free_flipped().union(rev.dense_vars());
    for i in 0..f.m() {
        for j in 0..f.k() {
            let lit = f.literal(i, j);
            match rev.slot(i, j) {
                Some(shown) => {
                    if shown != lit {
                        report(format!("slot ({},{}) shows {shown:?}, formula has {lit:?}", i + 1, j + 1));
                    }
                    if !a_or_n.contains(lit.var()) {
                        report(format!("slot ({},{}) revealed but x{} not in A∪N", i + 1, j + 1, lit.var()));
                    }
                }
                None => {
                    if a_or_n.contains(lit.var()) {
                        report(format!("slot ({},{}) hides x{} in A∪N", i + 1, j + 1, lit.var()));
                    }
                }
            }
        }
    }

    // Dense rows fully revealed.
    for i in rev.dense_clauses() {
        for j in 0..f.k() {
            if rev.slot(i, j).is_none() {
                report(format!("dense clause {} has hidden slot {}", i + 1, j + 1));
            }
        }
    }

    // D: definitional recount, view consistency, and superset of unsat.
    let d_def = rev.d_indices_definitional(f);
    if d_def != rev.d_indices() {
        report("incremental D differs from definitional recount".to_string());
    }
    if d_def.len() != record.d_size {
        report(format!("recorded d_size {} vs {}", record.d_size, d_def.len()));
    }
    for i in rev.unsat_indices_sorted() {
        if !d_def.contains(&i) {
            report(format!("unsatisfied clause {} outside D", i + 1));
        }
    }

    // Injection from A into D, and U <= S.
    if let Err(e) = rev.injection(f) {
        report(format!("injection invalid: {e}"));
    }
    let u_t = rev.unsat_outside_dense() as i64;
    if u_t > record.s_pot {
        report(format!("U={u_t} exceeds S={}", record.s_pot));
    }

    // Potential inequalities.
    let kz = (f.k() * record.z_size) as i64;
    if record.s_pot > record.d_size as i64 + kz + record.s_prime {
        report(format!(
            "S={} > |D|+k|Z|+S' = {}+{}+{}",
            record.s_pot, record.d_size, kz, record.s_prime
        ));
    }
    if record.rich_ok && record.h_pot as i64 > kz + record.h_prime {
        report(format!(
            "H={} > k|Z|+H' = {}+{}",
            record.h_pot, kz, record.h_prime
        ));
    }
    if (record.r_pot - prev_r).abs() > 2 {
        report(format!("|R_t - R_(t-1)| = {} > 2", (record.r_pot - prev_r).abs()));
    }

    // Recorded H matches the definitional recount.
    if rev.h_value() != record.h_pot {
        report(format!("recorded H {} vs recount {}", record.h_pot, rev.h_value()));
    }

    // Termination law.
    if record.s_pot + record.h_pot as i64 == 0 && !rev.is_satisfied() {
        report("S+H = 0 but sigma is not satisfying".to_string());
    }

    // Rich reference: while alive it satisfies every dense clause in at
    // least rich_min occurrences and is defined on N.
    if rev.rich_ok() {
        let rich_min = rev.params().rich_min(f.k());
        for i in rev.dense_clauses() {
            let sat = f
                .clause(i)
                .literals()
                .iter()
                .filter(|l| rev.tau().get(l.var()) == Some(l.is_positive()))
                .count();
            if sat < rich_min {
                report(format!(
                    "dense clause {} has {sat} < {rich_min} reference-satisfied occurrences",
                    i + 1
                ));
            }
        }
        for x in rev.dense_vars().iter() {
            if !rev.tau().is_defined(x) {
                report(format!("x{x} in N without a reference value"));
            }
        }
    }
    if !rev.rich_violations().is_empty() {
        report(format!("rich build violations: {:?}", rev.rich_violations()));
    }

    bad
}

/// Runs an instrumented seeded walk, auditing after every step. Returns the
/// trace and every violation found.
pub fn run_audited(
    f: &Formula,
    params: &ProcessParams,
    seed: u64,
    cap: usize,
) -> (Trace, Vec<String>) {
    let mut rev = Revelation::new_eager(f, params.clone());
    let mut rng = LabRng::from_seed(seed);
    let mut records = Vec::new();
    let mut violations = Vec::new();
    let mut prev_r = 0i64;
    while records.len() < cap && !rev.is_stopped() {
        match rev.step(&mut rng, None).expect("seeded step cannot fail") {
            StepResult::Stopped => break,
            StepResult::Stepped(record) => {
                violations.extend(audit_step(&rev, f, &record, prev_r));
                prev_r = record.r_pot;
                records.push(record);
            }
        }
    }
    // A satisfied outcome must verify against the formula.
    if rev.is_satisfied() {
        let unsat = crate::formula::unsat_indices(f, rev.sigma());
        if !unsat.is_empty() {
            violations.push(format!("satisfied outcome fails verification: {unsat:?}"));
        }
    }
    let mut trace = rev.into_trace("eager", Some(seed), cap);
    trace.records = records;
    (trace, violations)
}

/// Convenience wrapper mirroring [`crate::revelation::run_instrumented`]
/// with the audit switched off (used where only the trace is needed).
pub fn run_unaudited(f: &Formula, params: &ProcessParams, seed: u64, cap: usize) -> Trace {
    crate::revelation::run_instrumented(f, params, Driver::Seeded(seed), cap)
        .expect("seeded run cannot fail")
}
