//! The Walksat local-search solver.
//!
//! A run starts from the all-true assignment, then repeats up to `t_max`
//! times: pick an unsatisfied clause uniformly at random, pick one of its `k`
//! slots uniformly, and flip the variable under that slot (which always
//! satisfies the chosen clause). [`SolverTracker`] keeps per-clause counts of
//! currently-true literal occurrences and the set of unsatisfied clauses in an
//! array with position index, so a flip costs time proportional to the
//! occurrence list of the flipped variable and unsatisfied-clause sampling is
//! O(1).

use crate::formula::{Assignment, Formula, Var};
use crate::rng::LabRng;
use serde::{Deserialize, Serialize};

const NOT_IN_UNSAT: u32 = u32::MAX;

/// Incremental solver state: assignment, true-occurrence counts, occurrence
/// lists, and the unsatisfied-clause set.
#[derive(Clone, Debug)]
pub struct SolverTracker {
    assignment: Assignment,
    true_count: Vec<u32>,
    occurrences: Vec<Vec<(u32, u16)>>, // var -> (clause, slot), slot 0-based
    unsat: Vec<u32>,
    unsat_pos: Vec<u32>,
}

impl SolverTracker {
    /// Builds the tracker for `f` under `a` in one O(km) pass.
    pub fn new(f: &Formula, a: Assignment) -> Self {
        assert_eq!(a.n(), f.n(), "assignment must be total over f's variables");
        let mut true_count = vec![0u32; f.m()];
        let mut occurrences = vec![Vec::new(); f.n() + 1];
        for (i, clause) in f.clauses().iter().enumerate() {
            for (j, lit) in clause.literals().iter().enumerate() {
                occurrences[lit.var() as usize].push((i as u32, j as u16));
                if lit.eval(&a) {
                    true_count[i] += 1;
                }
            }
        }
        let mut unsat = Vec::new();
        let mut unsat_pos = vec![NOT_IN_UNSAT; f.m()];
        for (i, &tc) in true_count.iter().enumerate() {
            if tc == 0 {
                unsat_pos[i] = unsat.len() as u32;
                unsat.push(i as u32);
            }
        }
        SolverTracker {
            assignment: a,
            true_count,
            occurrences,
            unsat,
            unsat_pos,
        }
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn true_count(&self, clause: usize) -> u32 {
        self.true_count[clause]
    }

    /// Occurrence list of a variable: (clause, slot) pairs in input order.
    pub fn occurrences(&self, var: Var) -> &[(u32, u16)] {
        &self.occurrences[var as usize]
    }

    pub fn unsat_len(&self) -> usize {
        self.unsat.len()
    }

    pub fn is_satisfied(&self) -> bool {
        self.unsat.is_empty()
    }

    pub fn is_unsat(&self, clause: usize) -> bool {
        self.unsat_pos[clause] != NOT_IN_UNSAT
    }

    /// Unsatisfied clause indices, ascending (linear scan; for inspection).
    pub fn unsat_indices_sorted(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.unsat.iter().map(|&i| i as usize).collect();
        v.sort_unstable();
        v
    }

    /// Uniform draw from the unsatisfied set; `None` when satisfied.
    pub fn sample_unsat(&self, rng: &mut LabRng) -> Option<usize> {
        if self.unsat.is_empty() {
            None
        } else {
            Some(self.unsat[rng.index(self.unsat.len())] as usize)
        }
    }

    fn unsat_insert(&mut self, clause: u32) {
        debug_assert_eq!(self.unsat_pos[clause as usize], NOT_IN_UNSAT);
        self.unsat_pos[clause as usize] = self.unsat.len() as u32;
        self.unsat.push(clause);
    }

    fn unsat_remove(&mut self, clause: u32) {
        let pos = self.unsat_pos[clause as usize];
        debug_assert_ne!(pos, NOT_IN_UNSAT);
        let last = *self.unsat.last().unwrap();
        self.unsat[pos as usize] = last;
        self.unsat_pos[last as usize] = pos;
        self.unsat.pop();
        self.unsat_pos[clause as usize] = NOT_IN_UNSAT;
    }

    /// Toggles `var`, updating only the clauses in its occurrence list.
    /// Returns (clauses made satisfied, clauses newly broken).
    pub fn flip(&mut self, f: &Formula, var: Var) -> (usize, usize) {
        self.assignment.toggle(var);
        let now = self.assignment.value(var);
        let mut made = 0;
        let mut broken = 0;
        // The occurrence list is borrowed around the loop; satisfy the
        // borrow checker by swapping it out.
        let occ = std::mem::take(&mut self.occurrences[var as usize]);
        for &(i, j) in &occ {
            let lit = f.literal(i as usize, j as usize);
            if lit.is_positive() == now {
                // This occurrence just became true.
                self.true_count[i as usize] += 1;
                if self.true_count[i as usize] == 1 {
                    self.unsat_remove(i);
                    made += 1;
                }
            } else {
                self.true_count[i as usize] -= 1;
                if self.true_count[i as usize] == 0 {
                    self.unsat_insert(i);
                    broken += 1;
                }
            }
        }
        self.occurrences[var as usize] = occ;
        (made, broken)
    }
}

/// One flip: which clause was chosen, which slot, which variable moved.
/// Clause and slot indices are 0-based here; serialization shifts to 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipEvent {
    pub clause: usize,
    pub slot: usize,
    pub var: Var,
}

/// Outcome of a solver run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Satisfied(Assignment),
    Failure,
}

/// Result of [`run`] / [`run_with_restarts`].
#[derive(Clone, Debug)]
pub struct RunResult {
    pub outcome: Outcome,
    pub flips_used: usize,
    pub flip_log: Vec<FlipEvent>,
}

impl RunResult {
    pub fn is_satisfied(&self) -> bool {
        matches!(self.outcome, Outcome::Satisfied(_))
    }

    pub fn satisfying_assignment(&self) -> Option<&Assignment> {
        match &self.outcome {
            Outcome::Satisfied(a) => Some(a),
            Outcome::Failure => None,
        }
    }
}

/// One walk from `start`, flipping at most `t_max` times. The satisfaction
/// check runs before every flip and once more after the last, so a run that
/// reaches a satisfying assignment on its final flip still reports success.
pub fn run_from(f: &Formula, start: Assignment, t_max: usize, rng: &mut LabRng) -> RunResult {
    let mut tracker = SolverTracker::new(f, start);
    let mut flip_log = Vec::new();
    for _ in 0..t_max {
        let clause = match tracker.sample_unsat(rng) {
            None => {
                return RunResult {
                    outcome: Outcome::Satisfied(tracker.assignment().clone()),
                    flips_used: flip_log.len(),
                    flip_log,
                }
            }
            Some(i) => i,
        };
        let slot = rng.index(f.k());
        let var = f.literal(clause, slot).var();
        tracker.flip(f, var);
        flip_log.push(FlipEvent { clause, slot, var });
    }
    let outcome = if tracker.is_satisfied() {
        Outcome::Satisfied(tracker.assignment().clone())
    } else {
        Outcome::Failure
    };
    RunResult {
        outcome,
        flips_used: flip_log.len(),
        flip_log,
    }
}

/// Walksat from the all-true assignment. Deterministic given `seed`.
pub fn run(f: &Formula, t_max: usize, seed: u64) -> RunResult {
    let mut rng = LabRng::from_seed(seed);
    run_from(f, Assignment::all_true(f.n()), t_max, &mut rng)
}

/// Restart wrapper: up to `tries` independent walks, each from a fresh
/// uniformly random assignment. Reports the total flips across all tries and
/// the concatenated flip log.
pub fn run_with_restarts(f: &Formula, tries: usize, t_max_per_try: usize, seed: u64) -> RunResult {
    assert!(tries >= 1);
    let mut rng = LabRng::from_seed(seed);
    let mut total_flips = 0;
    let mut full_log = Vec::new();
    for _ in 0..tries {
        let start = Assignment::random(f.n(), &mut rng);
        let mut result = run_from(f, start, t_max_per_try, &mut rng);
        total_flips += result.flips_used;
        full_log.append(&mut result.flip_log);
        if result.is_satisfied() {
            return RunResult {
                outcome: result.outcome,
                flips_used: total_flips,
                flip_log: full_log,
            };
        }
    }
    RunResult {
        outcome: Outcome::Failure,
        flips_used: total_flips,
        flip_log: full_log,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{generate_uniform, unsat_indices, Clause, Literal};
    use crate::rng::derive_seed;

    fn clause(lits: &[i64]) -> Clause {
        Clause(lits.iter().map(|&c| Literal::from_dimacs(c).unwrap()).collect())
    }

    fn recount(f: &Formula, a: &Assignment) -> (Vec<u32>, Vec<usize>) {
        let counts: Vec<u32> = f
            .clauses()
            .iter()
            .map(|c| c.literals().iter().filter(|l| l.eval(a)).count() as u32)
            .collect();
        let unsat = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(i, _)| i)
            .collect();
        (counts, unsat)
    }

    fn assert_tracker_matches_recount(f: &Formula, t: &SolverTracker) {
        let (counts, unsat) = recount(f, t.assignment());
        for (i, &c) in counts.iter().enumerate() {
            assert_eq!(t.true_count(i), c, "true_count mismatch at clause {i}");
        }
        assert_eq!(t.unsat_indices_sorted(), unsat);
    }

    #[test]
    fn init_tracker_examples() {
        let f = Formula::new(2, 2, vec![clause(&[-1, -2])]).unwrap();
        let t = SolverTracker::new(&f, Assignment::all_true(2));
        assert_eq!(t.true_count(0), 0);
        assert_eq!(t.unsat_indices_sorted(), vec![0]);

        let f = Formula::new(2, 2, vec![clause(&[1, 2])]).unwrap();
        let t = SolverTracker::new(&f, Assignment::all_true(2));
        assert_eq!(t.true_count(0), 2);
        assert!(t.is_satisfied());
    }

    #[test]
    fn init_tracker_matches_recount_on_random_instances() {
        for seed in 0..20 {
            let f = generate_uniform(8, 20, 3, seed).unwrap();
            let mut rng = LabRng::from_seed(seed ^ 0xABCD);
            let a = Assignment::random(8, &mut rng);
            let t = SolverTracker::new(&f, a);
            assert_tracker_matches_recount(&f, &t);
        }
    }

    #[test]
    fn flip_makes_and_breaks() {
        let f = Formula::new(1, 1, vec![clause(&[-1])]).unwrap();
        let mut t = SolverTracker::new(&f, Assignment::all_true(1));
        let (made, broken) = t.flip(&f, 1);
        assert_eq!((made, broken), (1, 0));
        assert!(t.is_satisfied());
    }

    #[test]
    fn flip_is_an_involution() {
        let f = generate_uniform(6, 15, 3, 7).unwrap();
        let original = SolverTracker::new(&f, Assignment::all_true(6));
        let mut t = original.clone();
        t.flip(&f, 4);
        t.flip(&f, 4);
        assert_eq!(t.assignment(), original.assignment());
        assert_eq!(t.unsat_indices_sorted(), original.unsat_indices_sorted());
        for i in 0..f.m() {
            assert_eq!(t.true_count(i), original.true_count(i));
        }
    }

    #[test]
    fn flip_equals_fresh_tracker_on_toggled_assignment() {
        for seed in 0..20 {
            let f = generate_uniform(8, 20, 3, seed).unwrap();
            let mut t = SolverTracker::new(&f, Assignment::all_true(8));
            let var = (seed % 8) as Var + 1;
            t.flip(&f, var);
            let mut toggled = Assignment::all_true(8);
            toggled.toggle(var);
            let fresh = SolverTracker::new(&f, toggled);
            assert_eq!(t.assignment(), fresh.assignment());
            assert_eq!(t.unsat_indices_sorted(), fresh.unsat_indices_sorted());
        }
    }

    #[test]
    fn tracker_matches_recount_after_fuzzed_flip_sequences() {
        let mut rng = LabRng::from_seed(0xF1F2);
        for seed in 0..30 {
            let f = generate_uniform(10, 30, 4, seed).unwrap();
            let mut t = SolverTracker::new(&f, Assignment::all_true(10));
            for _ in 0..50 {
                let var = rng.index(10) as Var + 1;
                t.flip(&f, var);
            }
            assert_tracker_matches_recount(&f, &t);
        }
    }

    #[test]
    fn duplicate_occurrences_count_literal_slots() {
        // A clause holding both x1 and ~x1 always has true_count >= 1.
        let f = Formula::new(1, 2, vec![clause(&[1, -1])]).unwrap();
        let mut t = SolverTracker::new(&f, Assignment::all_true(1));
        assert_eq!(t.true_count(0), 1);
        t.flip(&f, 1);
        assert_eq!(t.true_count(0), 1);
    }

    #[test]
    fn run_zero_flips_on_satisfied_start() {
        let f = Formula::new(2, 2, vec![clause(&[1, -2])]).unwrap();
        let r = run(&f, 100, 1);
        assert!(r.is_satisfied());
        assert_eq!(r.flips_used, 0);
        assert!(r.flip_log.is_empty());
    }

    #[test]
    fn run_single_all_negative_clause_needs_one_flip() {
        let f = Formula::new(3, 3, vec![clause(&[-1, -2, -3])]).unwrap();
        for seed in 0..10 {
            let r = run(&f, 1, seed);
            assert!(r.is_satisfied(), "seed {seed}");
            assert_eq!(r.flips_used, 1);
        }
    }

    #[test]
    fn run_budget_zero_fails_on_unsatisfied_start() {
        let f = Formula::new(1, 1, vec![clause(&[-1])]).unwrap();
        let r = run(&f, 0, 3);
        assert!(!r.is_satisfied());
        assert_eq!(r.flips_used, 0);
    }

    #[test]
    fn every_satisfied_outcome_verifies() {
        for seed in 0..40 {
            let f = generate_uniform(20, 30, 3, seed).unwrap();
            let r = run(&f, 400, derive_seed(9, seed));
            if let Some(a) = r.satisfying_assignment() {
                assert!(unsat_indices(&f, a).is_empty(), "seed {seed}");
            }
            assert!(r.flips_used <= 400);
            assert_eq!(r.flip_log.len(), r.flips_used);
        }
    }

    #[test]
    fn chosen_clause_is_satisfied_immediately_after_its_flip() {
        // The flipped literal occurs in the chosen clause, so its new value
        // satisfies that occurrence.
        for seed in 0..10 {
            let f = generate_uniform(10, 40, 3, seed).unwrap();
            let r = run(&f, 200, seed);
            let mut tracker = SolverTracker::new(&f, Assignment::all_true(10));
            for ev in &r.flip_log {
                assert!(tracker.is_unsat(ev.clause));
                tracker.flip(&f, ev.var);
                assert!(tracker.true_count(ev.clause) > 0);
            }
        }
    }

    #[test]
    fn unsat_sampling_is_uniform_chi_square() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        // Fixed state with 10 unsatisfied clauses; 10^5 redraws.
        let clauses = (0..10).map(|_| clause(&[-1, -2])).collect();
        let f = Formula::new(2, 2, clauses).unwrap();
        let t = SolverTracker::new(&f, Assignment::all_true(2));
        assert_eq!(t.unsat_len(), 10);
        let mut rng = LabRng::from_seed(0xC0FFEE);
        let draws = 100_000;
        let mut counts = [0f64; 10];
        for _ in 0..draws {
            counts[t.sample_unsat(&mut rng).unwrap()] += 1.0;
        }
        let expected = draws as f64 / 10.0;
        let stat: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new(9.0).unwrap().cdf(stat);
        assert!(p > 0.001, "chi-square stat {stat}, p {p}");
    }

    #[test]
    fn restarts_solve_a_satisfiable_fixture() {
        let f = Formula::new(3, 3, vec![clause(&[-1, -2, -3]), clause(&[1, 2, 3])]).unwrap();
        let r = run_with_restarts(&f, 1, 100, 5);
        assert!(r.is_satisfied());
    }

    #[test]
    fn restarts_fail_on_unsatisfiable_input() {
        let f = Formula::new(1, 1, vec![clause(&[1]), clause(&[-1])]).unwrap();
        let r = run_with_restarts(&f, 5, 50, 11);
        assert!(!r.is_satisfied());
        assert_eq!(r.flip_log.len(), r.flips_used);
    }

    /// Exact success probability of one walk of budget `t_max` from a uniform
    /// random start, by dynamic programming over all 2^n assignments.
    #[allow(clippy::needless_range_loop)]
    fn chain_success_from_uniform(f: &Formula, t_max: usize) -> f64 {
        let n = f.n();
        let states = 1usize << n;
        let assignment_of = |s: usize| {
            let mut a = Assignment::all_true(n);
            for v in 0..n {
                a.set(v as Var + 1, s >> v & 1 == 1);
            }
            a
        };
        let mut dist = vec![1.0 / states as f64; states];
        let mut success = 0.0;
        for step in 0..=t_max {
            // Absorb satisfied states.
            for s in 0..states {
                if dist[s] > 0.0 && unsat_indices(f, &assignment_of(s)).is_empty() {
                    success += dist[s];
                    dist[s] = 0.0;
                }
            }
            if step == t_max {
                break;
            }
            let mut next = vec![0.0; states];
            for s in 0..states {
                if dist[s] == 0.0 {
                    continue;
                }
                let a = assignment_of(s);
                let unsat = unsat_indices(f, &a);
                let p_clause = dist[s] / unsat.len() as f64;
                for &ci in &unsat {
                    for j in 0..f.k() {
                        let var = f.literal(ci, j).var();
                        let flipped = s ^ (1 << (var - 1));
                        next[flipped] += p_clause / f.k() as f64;
                    }
                }
            }
            dist = next;
        }
        success
    }

    #[test]
    fn restart_success_rate_matches_chain_oracle() {
        // Multi-try success probability = 1 - (1-p)^tries with p the exact
        // single-try probability from the chain, since each try restarts from
        // an independent uniform assignment.
        let f = Formula::new(
            3,
            3,
            vec![clause(&[-1, -2, -3]), clause(&[1, 2, 3]), clause(&[-1, 2, 3])],
        )
        .unwrap();
        let t_max = 2;
        let tries = 2;
        let p1 = chain_success_from_uniform(&f, t_max);
        let expected = 1.0 - (1.0 - p1).powi(tries as i32);
        let runs = 20_000;
        let hits = (0..runs)
            .filter(|&i| run_with_restarts(&f, tries, t_max, derive_seed(777, i)).is_satisfied())
            .count();
        let freq = hits as f64 / runs as f64;
        let se = (expected * (1.0 - expected) / runs as f64).sqrt();
        assert!(
            (freq - expected).abs() < 4.0 * se,
            "freq {freq}, expected {expected}, se {se}"
        );
    }
}
