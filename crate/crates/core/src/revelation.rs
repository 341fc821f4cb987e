//! The revelation process: an instrumented re-run of Walksat that tracks
//! exactly how much of the formula the walk has looked at.
//!
//! The process keeps a per-slot view of the formula. Initially only the sign
//! of every literal is visible. Whenever a variable is flipped for the first
//! time, all of its occurrences are revealed. Clauses that accumulate too
//! many touched variables (at least `k1` flipped slots, or more than
//! `lambda` slots on variables of previously dense clauses) are revealed
//! wholesale and collected in the dense-clause set `Z`; their variables form
//! the set `N`, and flipped variables outside `N` form the set `A`.
//!
//! On top of that view the process maintains the counting potentials
//! reported in [`StepRecord`]: the size of the pessimistic clause set `D`
//! (clauses with no visible untouched positive slot), the potentials
//! `S = |D| - |A|` and `H` (disagreements between the walk assignment and a
//! rich reference assignment on `N`), their walk-only surrogates `S'` and
//! `H'`, and the capped sum `R`.
//!
//! Two generation modes share all of this machinery. The eager mode replays
//! a concrete formula. The lazy mode never materializes one: signs are drawn
//! up front and hidden variables are drawn uniformly from the untouched
//! variables at the moment a slot is revealed, which by symmetry of the
//! uniform model reproduces the eager distribution of every visible
//! quantity.

use crate::expansion::extend_rich_from_lits;
use crate::formula::{
    is_s_negative, Assignment, Formula, Literal, PartialAssignment, Var, VarSet,
};
use crate::rng::LabRng;
use crate::trace::{StepRecord, Trace, TRACE_SCHEMA};
use crate::walksat::FlipEvent;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Thresholds of the revelation process. All fractions are rounded up when
/// applied to the clause width, and every field can be overridden for
/// fixtures and experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessParams {
    /// Flipped-slot threshold for revealing a clause.
    pub k1: usize,
    /// Active-slot threshold for counting a clause as active.
    pub k2: usize,
    /// Passive-slot threshold for counting a clause as passive.
    pub k3: usize,
    /// Dense-variable slot threshold of the reveal cascade.
    pub lambda: usize,
    /// Size budget for the dense set, as a fraction of n.
    pub epsilon: f64,
    /// Step budget as a fraction of n.
    pub theta: f64,
    /// Step budget `ceil(theta * n)`.
    pub t_star: usize,
    /// Fraction of k that a rich assignment must satisfy per dense clause.
    pub rich_fraction: f64,
    /// Fraction of k used as the matching fold of the rich construction.
    pub match_fraction: f64,
}

fn ceil_frac(frac: f64, k: usize) -> usize {
    ((frac * k as f64).ceil() as usize).max(1)
}

impl ProcessParams {
    /// Default thresholds for clause width `k` on `n` variables:
    /// `k1 = ceil(0.49 k)`, `k2 = ceil(0.48 k)`, `k3 = ceil(0.01 k)`,
    /// `lambda = ceil(sqrt(k))`, `epsilon = exp(-k^(2/3))`,
    /// `theta = 1/(3k)`, `t_star = ceil(theta n)`.
    pub fn defaults(k: usize, n: usize) -> Self {
        assert!(k >= 1 && n >= 1);
        let theta = 1.0 / (3.0 * k as f64);
        ProcessParams {
            k1: ceil_frac(0.49, k),
            k2: ceil_frac(0.48, k),
            k3: ceil_frac(0.01, k),
            lambda: ((k as f64).sqrt().ceil() as usize).max(1),
            epsilon: (-(k as f64).powf(2.0 / 3.0)).exp(),
            theta,
            t_star: ((theta * n as f64).ceil() as usize).max(1),
            rich_fraction: 0.8,
            match_fraction: 0.9,
        }
    }

    /// Replaces theta and recomputes the step budget.
    pub fn with_theta(mut self, theta: f64, n: usize) -> Self {
        self.theta = theta;
        self.t_star = ((theta * n as f64).ceil() as usize).max(1);
        self
    }

    /// Satisfied-occurrence requirement per dense clause.
    pub fn rich_min(&self, k: usize) -> usize {
        ceil_frac(self.rich_fraction, k)
    }

    /// Matching fold of the rich construction.
    pub fn match_fold(&self, k: usize) -> usize {
        ceil_frac(self.match_fraction, k)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProcessError {
    #[error("the process has already stopped")]
    AlreadyStopped,
    #[error("step {step}: injected clause index {clause} is out of range 1..={m}")]
    ChoiceClauseOutOfRange { step: usize, clause: usize, m: usize },
    #[error("step {step}: injected slot index {slot} is out of range 1..={k}")]
    ChoiceSlotOutOfRange { step: usize, slot: usize, k: usize },
    #[error("step {step}: injected clause {clause} is not unsatisfied")]
    ChoiceNotUnsat { step: usize, clause: usize },
    #[error("step {step}: choice script exhausted")]
    ScriptExhausted { step: usize },
    #[error("step {step}: script entry has t={got}, expected {step}")]
    ScriptTimeMismatch { step: usize, got: usize },
}

/// One entry of a replay script; all indices are 1-based.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScriptChoice {
    pub t: usize,
    pub i: usize,
    pub j: usize,
}

/// How the unsatisfied-clause and slot choices are made.
pub enum Driver<'a> {
    /// Fresh random choices from the given seed.
    Seeded(u64),
    /// Injected (i, j) pairs, validated step by step.
    Script(&'a [ScriptChoice]),
}

/// Result of one [`Revelation::step`] call.
#[derive(Clone, Debug)]
pub enum StepResult {
    /// The current assignment satisfies the formula; nothing was done.
    Stopped,
    /// One flip was performed.
    Stepped(StepRecord),
}

const HIDDEN: u32 = 0;
const NEVER: u32 = 0;
const NOT_IN_UNSAT: u32 = u32::MAX;

enum ModeState<'a> {
    Eager {
        f: &'a Formula,
        /// var -> every (clause, slot) occurrence, in clause order.
        full_occ: Vec<Vec<(u32, u16)>>,
    },
    Lazy {
        /// Occurrence-coin multiplier; 1.0 is the faithful sampler, larger
        /// values deliberately bias it (negative-control fixture).
        boost: f64,
        /// Variables whose occurrences are fully revealed.
        revealed: Vec<bool>,
        revealed_count: usize,
    },
}

/// The live state of the revelation process.
pub struct Revelation<'a> {
    params: ProcessParams,
    n: usize,
    m: usize,
    k: usize,
    mode: ModeState<'a>,

    // Per-slot view: sign, and the revealed variable (HIDDEN when unknown).
    positive: Vec<bool>,
    slot_var: Vec<u32>,

    // Assignment state driven off the view.
    sigma: Assignment,
    occ: Vec<Vec<(u32, u16)>>, // revealed occurrences per var
    true_count: Vec<u32>,
    unsat: Vec<u32>,
    unsat_pos: Vec<u32>,

    // Analysis sets and their join times (step numbers; NEVER = not yet).
    free_flipped: VarSet, // A: flipped at least once, not dense
    dense_vars: VarSet,   // N: variables of dense clauses
    dense_clause: Vec<bool>,
    dense_len: usize, // |Z|
    first_flip: Vec<u32>,
    dense_join: Vec<u32>,
    flip_count: Vec<u32>,

    // |D| bookkeeping: clauses with no hidden positive slot.
    hidden_pos: Vec<u16>,
    d_count: usize,
    d0: usize,

    // Potentials.
    s_prime: i64,
    h_prime: i64,
    r_pot: i64,
    tau: PartialAssignment,
    rich_ok: bool,
    h_count: usize,
    rich_violations: Vec<String>,

    // Injection from A into D (var -> clause + 1; 0 = unmapped).
    s_map: Vec<u32>,

    // Active/passive slot marks: 0 none, 1 active, 2 passive.
    pair_mark: Vec<u8>,
    active_slots: Vec<u16>,
    passive_slots: Vec<u16>,
    active_clauses: usize,
    passive_clauses: usize,

    t: usize,
    stopped: bool,
    flip_log: Vec<FlipEvent>,
    n_join_log: Vec<(Var, usize)>,
    z_join_log: Vec<(usize, usize)>, // 0-based clause, step
}

impl<'a> Revelation<'a> {
    /// Instruments a concrete formula.
    pub fn new_eager(f: &'a Formula, params: ProcessParams) -> Self {
        let (n, m, k) = (f.n(), f.m(), f.k());
        let mut positive = Vec::with_capacity(m * k);
        let mut full_occ = vec![Vec::new(); n + 1];
        for (i, clause) in f.clauses().iter().enumerate() {
            for (j, lit) in clause.literals().iter().enumerate() {
                positive.push(lit.is_positive());
                full_occ[lit.var() as usize].push((i as u32, j as u16));
            }
        }
        Self::from_signs(ModeState::Eager { f, full_occ }, params, n, m, k, positive)
    }

    /// Starts a lazy run: signs are drawn now, variables only when revealed.
    pub fn new_lazy(
        n: usize,
        m: usize,
        k: usize,
        params: ProcessParams,
        rng: &mut LabRng,
        reveal_boost: f64,
    ) -> Self {
        let positive: Vec<bool> = (0..m * k).map(|_| rng.bool()).collect();
        Self::from_signs(
            ModeState::Lazy {
                boost: reveal_boost,
                revealed: vec![false; n + 1],
                revealed_count: 0,
            },
            params,
            n,
            m,
            k,
            positive,
        )
    }

    fn from_signs(
        mode: ModeState<'a>,
        params: ProcessParams,
        n: usize,
        m: usize,
        k: usize,
        positive: Vec<bool>,
    ) -> Self {
        // Hidden slots behave like their sign under the all-true start, so
        // the initial true count is the number of positive slots.
        let mut true_count = vec![0u32; m];
        let mut hidden_pos = vec![0u16; m];
        for i in 0..m {
            for j in 0..k {
                if positive[i * k + j] {
                    true_count[i] += 1;
                    hidden_pos[i] += 1;
                }
            }
        }
        let mut unsat = Vec::new();
        let mut unsat_pos = vec![NOT_IN_UNSAT; m];
        let mut d_count = 0;
        for i in 0..m {
            if true_count[i] == 0 {
                unsat_pos[i] = unsat.len() as u32;
                unsat.push(i as u32);
            }
            if hidden_pos[i] == 0 {
                d_count += 1;
            }
        }
        let d0 = d_count;
        Revelation {
            params,
            n,
            m,
            k,
            mode,
            positive,
            slot_var: vec![HIDDEN; m * k],
            sigma: Assignment::all_true(n),
            occ: vec![Vec::new(); n + 1],
            true_count,
            unsat,
            unsat_pos,
            free_flipped: VarSet::new(n),
            dense_vars: VarSet::new(n),
            dense_clause: vec![false; m],
            dense_len: 0,
            first_flip: vec![NEVER; n + 1],
            dense_join: vec![NEVER; n + 1],
            flip_count: vec![0; n + 1],
            hidden_pos,
            d_count,
            d0,
            s_prime: 0,
            h_prime: 0,
            r_pot: 0,
            tau: PartialAssignment::new(n),
            rich_ok: true,
            h_count: 0,
            rich_violations: Vec::new(),
            s_map: vec![0; n + 1],
            pair_mark: vec![0; m * k],
            active_slots: vec![0; m],
            passive_slots: vec![0; m],
            active_clauses: 0,
            passive_clauses: 0,
            t: 0,
            stopped: false,
            flip_log: Vec::new(),
            n_join_log: Vec::new(),
            z_join_log: Vec::new(),
        }
    }

    // ------------------------------------------------------------------
    // View accessors
    // ------------------------------------------------------------------

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn params(&self) -> &ProcessParams {
        &self.params
    }

    /// Steps performed so far.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    /// The walk assignment.
    pub fn sigma(&self) -> &Assignment {
        &self.sigma
    }

    /// True when the current assignment satisfies every clause.
    pub fn is_satisfied(&self) -> bool {
        self.unsat.is_empty()
    }

    pub fn unsat_len(&self) -> usize {
        self.unsat.len()
    }

    /// Unsatisfied clause indices, ascending (0-based).
    pub fn unsat_indices_sorted(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.unsat.iter().map(|&i| i as usize).collect();
        v.sort_unstable();
        v
    }

    /// The per-slot view: `None` when only the sign is visible, otherwise
    /// the revealed literal.
    pub fn slot(&self, i: usize, j: usize) -> Option<Literal> {
        let idx = i * self.k + j;
        if self.slot_var[idx] == HIDDEN {
            None
        } else {
            Some(Literal::new(self.slot_var[idx], self.positive[idx]))
        }
    }

    /// Sign of slot (i, j); available at every time.
    pub fn slot_positive(&self, i: usize, j: usize) -> bool {
        self.positive[i * self.k + j]
    }

    /// A: flipped at least once and not absorbed into the dense set.
    pub fn free_flipped(&self) -> &VarSet {
        &self.free_flipped
    }

    /// N: variables of dense clauses.
    pub fn dense_vars(&self) -> &VarSet {
        &self.dense_vars
    }

    /// Z: dense clause indices, ascending (0-based).
    pub fn dense_clauses(&self) -> Vec<usize> {
        (0..self.m).filter(|&i| self.dense_clause[i]).collect()
    }

    pub fn dense_len(&self) -> usize {
        self.dense_len
    }

    pub fn is_dense(&self, clause: usize) -> bool {
        self.dense_clause[clause]
    }

    /// |D|: clauses with no untouched positive slot.
    pub fn d_size(&self) -> usize {
        self.d_count
    }

    pub fn d0_size(&self) -> usize {
        self.d0
    }

    /// D from the view: clauses whose every positive slot is revealed.
    pub fn d_indices(&self) -> Vec<usize> {
        (0..self.m).filter(|&i| self.hidden_pos[i] == 0).collect()
    }

    /// D recomputed from the definition on a concrete formula: clauses that
    /// are S-negative for S = A ∪ N.
    pub fn d_indices_definitional(&self, f: &Formula) -> Vec<usize> {
        let s = self.free_flipped.union(&self.dense_vars);
        (0..f.m())
            .filter(|&i| is_s_negative(f.clause(i), &s))
            .collect()
    }

    pub fn s_pot(&self) -> i64 {
        self.d_count as i64 - self.free_flipped.len() as i64
    }

    /// H: disagreements between the walk and the rich reference on N, or
    /// |N| when the rich construction has failed at some earlier step.
    pub fn h_value(&self) -> usize {
        if self.rich_ok {
            self.dense_vars
                .iter()
                .filter(|&x| self.tau.get(x) != Some(self.sigma.value(x)))
                .count()
        } else {
            self.dense_vars.len()
        }
    }

    pub fn s_prime(&self) -> i64 {
        self.s_prime
    }

    pub fn h_prime(&self) -> i64 {
        self.h_prime
    }

    pub fn r_pot(&self) -> i64 {
        self.r_pot
    }

    pub fn rich_ok(&self) -> bool {
        self.rich_ok
    }

    pub fn rich_violations(&self) -> &[String] {
        &self.rich_violations
    }

    /// The rich reference assignment built so far (defined on N when the
    /// construction has not failed).
    pub fn tau(&self) -> &PartialAssignment {
        &self.tau
    }

    pub fn flip_count(&self, var: Var) -> u32 {
        self.flip_count[var as usize]
    }

    pub fn flip_log(&self) -> &[FlipEvent] {
        &self.flip_log
    }

    pub fn n_join_log(&self) -> &[(Var, usize)] {
        &self.n_join_log
    }

    /// (clause, step) joins of the dense set, 0-based clause indices.
    pub fn z_join_log(&self) -> &[(usize, usize)] {
        &self.z_join_log
    }

    pub fn active_clause_count(&self) -> usize {
        self.active_clauses
    }

    pub fn passive_clause_count(&self) -> usize {
        self.passive_clauses
    }

    /// Number of unsatisfied clauses outside the dense set.
    pub fn unsat_outside_dense(&self) -> usize {
        self.unsat
            .iter()
            .filter(|&&i| !self.dense_clause[i as usize])
            .count()
    }

    // ------------------------------------------------------------------
    // Core mechanics
    // ------------------------------------------------------------------

    fn unsat_insert(&mut self, clause: u32) {
        self.unsat_pos[clause as usize] = self.unsat.len() as u32;
        self.unsat.push(clause);
    }

    fn unsat_remove(&mut self, clause: u32) {
        let pos = self.unsat_pos[clause as usize];
        let last = *self.unsat.last().unwrap();
        self.unsat[pos as usize] = last;
        self.unsat_pos[last as usize] = pos;
        self.unsat.pop();
        self.unsat_pos[clause as usize] = NOT_IN_UNSAT;
    }

    /// Marks one slot as holding `var`, maintaining |D| and occurrence lists.
    /// Truth counts do not move: a variable is revealed before it is ever
    /// flipped, so the revealed literal has the same value as its sign.
    fn mark_slot(&mut self, slot_idx: usize, var: Var) {
        debug_assert_eq!(self.slot_var[slot_idx], HIDDEN);
        self.slot_var[slot_idx] = var;
        let clause = slot_idx / self.k;
        if self.positive[slot_idx] {
            self.hidden_pos[clause] -= 1;
            if self.hidden_pos[clause] == 0 {
                self.d_count += 1;
            }
        }
        self.occ[var as usize].push((clause as u32, (slot_idx % self.k) as u16));
    }

    /// Reveals every occurrence of `var` and returns the slot indices that
    /// were newly revealed. In lazy mode the occurrences themselves are
    /// sampled here: each still-hidden slot hides `var` with probability
    /// 1/(number of untouched variables).
    fn reveal_occurrences(&mut self, var: Var, forced_slot: Option<usize>, rng: &mut LabRng) -> Vec<usize> {
        let mut new_slots = Vec::new();
        match &mut self.mode {
            ModeState::Eager { full_occ, .. } => {
                for &(i, j) in &full_occ[var as usize] {
                    let idx = i as usize * self.k + j as usize;
                    debug_assert_eq!(self.slot_var[idx], HIDDEN);
                    new_slots.push(idx);
                }
            }
            ModeState::Lazy {
                boost,
                revealed,
                revealed_count,
            } => {
                debug_assert!(!revealed[var as usize]);
                let d = self.n - *revealed_count;
                debug_assert!(d >= 1);
                let p = (*boost / d as f64).min(1.0);
                for idx in 0..self.m * self.k {
                    if self.slot_var[idx] != HIDDEN || Some(idx) == forced_slot {
                        continue;
                    }
                    if rng.coin(p) {
                        new_slots.push(idx);
                    }
                }
                if let Some(idx) = forced_slot {
                    new_slots.push(idx);
                    new_slots.sort_unstable();
                }
                revealed[var as usize] = true;
                *revealed_count += 1;
            }
        }
        for &idx in &new_slots {
            self.mark_slot(idx, var);
        }
        new_slots
    }

    /// Variable under a hidden slot: read from the formula, or drawn
    /// uniformly from the untouched variables in lazy mode.
    fn draw_hidden_var(&mut self, slot_idx: usize, rng: &mut LabRng) -> Var {
        match &self.mode {
            ModeState::Eager { f, .. } => {
                f.literal(slot_idx / self.k, slot_idx % self.k).var()
            }
            ModeState::Lazy { ref revealed, .. } => loop {
                let v = rng.below(self.n as u64) as Var + 1;
                if !revealed[v as usize] {
                    return v;
                }
            },
        }
    }

    /// Toggles `var` and updates clause truth counts along its (complete)
    /// occurrence list.
    fn flip_var(&mut self, var: Var) {
        self.sigma.toggle(var);
        let now = self.sigma.value(var);
        let occ = std::mem::take(&mut self.occ[var as usize]);
        for &(i, j) in &occ {
            let idx = i as usize * self.k + j as usize;
            if self.positive[idx] == now {
                self.true_count[i as usize] += 1;
                if self.true_count[i as usize] == 1 {
                    self.unsat_remove(i);
                }
            } else {
                self.true_count[i as usize] -= 1;
                if self.true_count[i as usize] == 0 {
                    self.unsat_insert(i);
                }
            }
        }
        self.occ[var as usize] = occ;
    }

    fn mark_active(&mut self, slot_idx: usize) {
        if self.pair_mark[slot_idx] != 0 {
            return;
        }
        self.pair_mark[slot_idx] = 1;
        let clause = slot_idx / self.k;
        self.active_slots[clause] += 1;
        if self.active_slots[clause] as usize == self.params.k2 {
            self.active_clauses += 1;
        }
    }

    fn mark_passive(&mut self, slot_idx: usize) {
        if self.pair_mark[slot_idx] != 0 {
            return;
        }
        self.pair_mark[slot_idx] = 2;
        let clause = slot_idx / self.k;
        self.passive_slots[clause] += 1;
        if self.passive_slots[clause] as usize == self.params.k3 {
            self.passive_clauses += 1;
        }
    }

    /// Dense-threshold test for a candidate clause at step `t` with flipped
    /// variable `y`. Assumes the clause has no hidden positive slot.
    fn meets_dense_threshold(&self, clause: usize, t: usize, y: Var) -> bool {
        let mut flipped_slots = 0;
        let mut dense_slots = 0;
        for j in 0..self.k {
            let var = self.slot_var[clause * self.k + j];
            if var == HIDDEN {
                continue;
            }
            let vi = var as usize;
            // In A before this step, or the variable flipped right now.
            let in_a_prev = self.first_flip[vi] != NEVER
                && (self.first_flip[vi] as usize) < t
                && !(self.dense_join[vi] != NEVER && (self.dense_join[vi] as usize) < t);
            if var == y || in_a_prev {
                flipped_slots += 1;
            }
            if self.dense_join[vi] != NEVER {
                dense_slots += 1;
            }
        }
        flipped_slots >= self.params.k1 || dense_slots > self.params.lambda
    }

    /// The reveal cascade: repeatedly adds the least clause outside Z that
    /// has no untouched positive slot and meets a threshold, revealing its
    /// variables into N. Returns the clauses added this step, in order.
    fn dense_closure(&mut self, t: usize, y: Var, rng: &mut LabRng) -> Vec<usize> {
        let mut added = Vec::new();
        loop {
            let mut candidate = None;
            for i in 0..self.m {
                if self.dense_clause[i] || self.hidden_pos[i] != 0 {
                    continue;
                }
                if self.meets_dense_threshold(i, t, y) {
                    candidate = Some(i);
                    break;
                }
            }
            let Some(i) = candidate else { break };
            self.dense_clause[i] = true;
            self.dense_len += 1;
            self.z_join_log.push((i, t));
            added.push(i);
            for j in 0..self.k {
                let idx = i * self.k + j;
                let var = if self.slot_var[idx] == HIDDEN {
                    let var = self.draw_hidden_var(idx, rng);
                    self.reveal_occurrences(var, Some(idx), rng);
                    var
                } else {
                    self.slot_var[idx]
                };
                if self.dense_join[var as usize] == NEVER {
                    self.dense_join[var as usize] = t as u32;
                    self.dense_vars.insert(var);
                    self.free_flipped.remove(var);
                    self.s_map[var as usize] = 0;
                    self.n_join_log.push((var, t));
                }
            }
        }
        added
    }

    /// Extends the rich reference assignment over the clauses added this
    /// step; flags the run on failure. New dense variables enter the H count.
    fn extend_rich(&mut self, t: usize, added: &[usize]) {
        let new_vars: Vec<Var> = self
            .n_join_log
            .iter()
            .rev()
            .take_while(|&&(_, s)| s == t)
            .map(|&(v, _)| v)
            .collect();
        if self.rich_ok {
            let clause_lits: Vec<(usize, Vec<Literal>)> = added
                .iter()
                .map(|&i| {
                    let lits = (0..self.k)
                        .map(|j| {
                            Literal::new(self.slot_var[i * self.k + j], self.positive[i * self.k + j])
                        })
                        .collect();
                    (i, lits)
                })
                .collect();
            let dense_join = &self.dense_join;
            let in_n_prev =
                |v: Var| dense_join[v as usize] != NEVER && (dense_join[v as usize] as usize) < t;
            let result = extend_rich_from_lits(
                &clause_lits,
                self.n,
                in_n_prev,
                &self.tau,
                self.params.match_fold(self.k),
                self.params.rich_min(self.k),
            );
            match result {
                Ok(tau) => {
                    // Recount the richness guarantee on the new clauses.
                    let rich_min = self.params.rich_min(self.k);
                    for (i, lits) in &clause_lits {
                        let sat = lits
                            .iter()
                            .filter(|l| tau.get(l.var()) == Some(l.is_positive()))
                            .count();
                        if sat < rich_min {
                            self.rich_violations.push(format!(
                                "step {t}: clause {} has {sat} < {rich_min} satisfied occurrences",
                                i + 1
                            ));
                        }
                    }
                    if !tau.extends(&self.tau) {
                        self.rich_violations
                            .push(format!("step {t}: extension changed old reference values"));
                    }
                    self.tau = tau;
                    for &v in new_vars.iter().rev() {
                        if self.tau.get(v) != Some(self.sigma.value(v)) {
                            self.h_count += 1;
                        }
                    }
                }
                Err(_) => {
                    self.rich_ok = false;
                }
            }
        }
    }

    /// Performs one step of the process. `injected` carries a 0-based
    /// (clause, slot) pair for replays; random choices draw from `rng`.
    pub fn step(
        &mut self,
        rng: &mut LabRng,
        injected: Option<(usize, usize)>,
    ) -> Result<StepResult, ProcessError> {
        if self.stopped {
            return Err(ProcessError::AlreadyStopped);
        }
        // Termination check: the walk stops as soon as sigma satisfies
        // everything.
        if self.unsat.is_empty() {
            self.stopped = true;
            return Ok(StepResult::Stopped);
        }
        let t = self.t + 1;

        // Choice of clause and slot.
        let (i_t, j_t) = match injected {
            Some((i, j)) => {
                if i >= self.m {
                    return Err(ProcessError::ChoiceClauseOutOfRange {
                        step: t,
                        clause: i + 1,
                        m: self.m,
                    });
                }
                if j >= self.k {
                    return Err(ProcessError::ChoiceSlotOutOfRange {
                        step: t,
                        slot: j + 1,
                        k: self.k,
                    });
                }
                if self.unsat_pos[i] == NOT_IN_UNSAT {
                    return Err(ProcessError::ChoiceNotUnsat {
                        step: t,
                        clause: i + 1,
                    });
                }
                (i, j)
            }
            None => {
                let i = self.unsat[rng.index(self.unsat.len())] as usize;
                let j = rng.index(self.k);
                (i, j)
            }
        };

        let slot_idx = i_t * self.k + j_t;
        let chosen_in_z = self.dense_clause[i_t];
        let chosen_hidden = self.slot_var[slot_idx] == HIDDEN;

        // Reveal the flipped variable and all of its occurrences.
        let y = if chosen_hidden {
            debug_assert!(!self.positive[slot_idx], "hidden slot of an unsat clause is negative");
            let y = self.draw_hidden_var(slot_idx, rng);
            let new_slots = self.reveal_occurrences(y, Some(slot_idx), rng);
            for idx in new_slots {
                if idx == slot_idx {
                    self.mark_active(idx);
                } else {
                    self.mark_passive(idx);
                }
            }
            y
        } else {
            self.slot_var[slot_idx]
        };

        let y_in_n_prev = self.dense_join[y as usize] != NEVER;

        // Flip.
        if self.first_flip[y as usize] == NEVER {
            self.first_flip[y as usize] = t as u32;
        }
        self.flip_count[y as usize] += 1;
        self.flip_var(y);
        if !y_in_n_prev {
            self.free_flipped.insert(y);
        }

        // Walk-only potentials.
        if chosen_hidden {
            self.s_prime -= 1;
        }
        if y_in_n_prev {
            if let Some(ref_val) = self.tau.get(y) {
                if self.sigma.value(y) == ref_val {
                    self.h_prime -= 1;
                    if self.rich_ok {
                        self.h_count -= 1;
                    }
                } else {
                    self.h_prime += 1;
                    if self.rich_ok {
                        self.h_count += 1;
                    }
                }
            }
        }

        // Reveal cascade and rich extension.
        let added = self.dense_closure(t, y, rng);
        if !added.is_empty() {
            self.extend_rich(t, &added);
        }

        // A-update: y stays free unless the cascade absorbed it.
        if self.dense_join[y as usize] == NEVER {
            self.s_map[y as usize] = i_t as u32 + 1;
        }

        self.r_pot = if t <= self.params.t_star {
            self.s_prime + self.h_prime
        } else {
            self.r_pot - 1
        };

        self.t = t;
        self.flip_log.push(FlipEvent {
            clause: i_t,
            slot: j_t,
            var: y,
        });

        let record = StepRecord {
            t,
            i_t: i_t + 1,
            j_t: j_t + 1,
            flipped_var: y,
            chosen_in_z,
            chosen_hidden,
            d_size: self.d_count,
            s_pot: self.s_pot(),
            h_pot: if self.rich_ok {
                self.h_count
            } else {
                self.dense_vars.len()
            },
            s_prime: self.s_prime,
            h_prime: self.h_prime,
            r_pot: self.r_pot,
            z_size: self.dense_len,
            n_size: self.dense_vars.len(),
            a_size: self.free_flipped.len(),
            active_count: self.active_clauses,
            passive_count: self.passive_clauses,
            rich_ok: self.rich_ok,
        };
        Ok(StepResult::Stepped(record))
    }

    /// The injection from A into D maintained by the process: the most
    /// recent clause choice that put each free flipped variable into A.
    /// Verifies the required properties against a concrete formula and
    /// reports the first violation instead of a map if any fails.
    pub fn injection(&self, f: &Formula) -> Result<Vec<(Var, usize)>, String> {
        let s = self.free_flipped.union(&self.dense_vars);
        let mut seen = vec![false; self.m];
        let mut map = Vec::new();
        for x in self.free_flipped.iter() {
            let entry = self.s_map[x as usize];
            if entry == 0 {
                return Err(format!("variable x{x} in A has no image"));
            }
            let clause = entry as usize - 1;
            if seen[clause] {
                return Err(format!("clause {} hit twice (not injective)", clause + 1));
            }
            seen[clause] = true;
            if !is_s_negative(f.clause(clause), &s) {
                return Err(format!("image clause {} is outside D", clause + 1));
            }
            let contributes = f
                .clause(clause)
                .literals()
                .iter()
                .any(|l| l.var() == x && l.eval(&self.sigma));
            if !contributes {
                return Err(format!(
                    "x{x} does not contribute a true literal to clause {}",
                    clause + 1
                ));
            }
            map.push((x, clause));
        }
        Ok(map)
    }

    /// Builds the serializable trace of a finished (or capped) run.
    pub fn into_trace(self, mode: &str, seed: Option<u64>, cap: usize) -> Trace {
        let satisfied = self.unsat.is_empty();
        Trace {
            schema: TRACE_SCHEMA.to_string(),
            mode: mode.to_string(),
            n: self.n,
            m: self.m,
            k: self.k,
            params: self.params.clone(),
            seed,
            cap,
            outcome: if satisfied { "satisfied" } else { "cap_reached" }.to_string(),
            t_stop: self.t,
            d0_size: self.d0,
            records: Vec::new(),
            n_join_log: self.n_join_log.clone(),
            z_join_log: self
                .z_join_log
                .iter()
                .map(|&(c, t)| (c + 1, t))
                .collect(),
            rich_violations: self.rich_violations.clone(),
            false_vars: self.sigma.false_vars(),
        }
    }
}

/// Runs the instrumented process on a concrete formula until it stops or
/// `cap` flips have been made.
pub fn run_instrumented(
    f: &Formula,
    params: &ProcessParams,
    driver: Driver<'_>,
    cap: usize,
) -> Result<Trace, ProcessError> {
    let mut rev = Revelation::new_eager(f, params.clone());
    let (mut rng, script, seed, mode) = match driver {
        Driver::Seeded(seed) => (LabRng::from_seed(seed), None, Some(seed), "eager"),
        Driver::Script(script) => (LabRng::from_seed(0), Some(script), None, "replay"),
    };
    let mut records = Vec::new();
    let mut script_pos = 0usize;
    while records.len() < cap && !rev.is_stopped() {
        let injected = match script {
            None => None,
            Some(choices) => {
                if rev.is_satisfied() {
                    // The stop check fires before any choice is consumed.
                    None
                } else {
                    let step = rev.t() + 1;
                    let choice = choices
                        .get(script_pos)
                        .ok_or(ProcessError::ScriptExhausted { step })?;
                    if choice.t != step {
                        return Err(ProcessError::ScriptTimeMismatch {
                            step,
                            got: choice.t,
                        });
                    }
                    if choice.i == 0 {
                        return Err(ProcessError::ChoiceClauseOutOfRange {
                            step,
                            clause: 0,
                            m: f.m(),
                        });
                    }
                    if choice.j == 0 {
                        return Err(ProcessError::ChoiceSlotOutOfRange {
                            step,
                            slot: 0,
                            k: f.k(),
                        });
                    }
                    script_pos += 1;
                    Some((choice.i - 1, choice.j - 1))
                }
            }
        };
        if let Some((i, _)) = injected {
            if i >= f.m() {
                return Err(ProcessError::ChoiceClauseOutOfRange {
                    step: rev.t() + 1,
                    clause: i + 1,
                    m: f.m(),
                });
            }
        }
        match rev.step(&mut rng, injected)? {
            StepResult::Stopped => break,
            StepResult::Stepped(record) => records.push(record),
        }
    }
    let mut trace = rev.into_trace(mode, seed, cap);
    trace.records = records;
    Ok(trace)
}

/// Runs the process in lazy mode: no formula is materialized; signs and
/// revealed variables are drawn on demand. `reveal_boost = 1.0` is the
/// faithful sampler; larger values bias the occurrence coins (negative
/// control).
pub fn run_instrumented_lazy(
    n: usize,
    m: usize,
    k: usize,
    params: &ProcessParams,
    seed: u64,
    cap: usize,
    reveal_boost: f64,
) -> Trace {
    let mut rng = LabRng::from_seed(seed);
    let mut rev = Revelation::new_lazy(n, m, k, params.clone(), &mut rng, reveal_boost);
    let mut records = Vec::new();
    while records.len() < cap && !rev.is_stopped() {
        match rev.step(&mut rng, None).expect("lazy step cannot fail") {
            StepResult::Stopped => break,
            StepResult::Stepped(record) => records.push(record),
        }
    }
    let mut trace = rev.into_trace("lazy", Some(seed), cap);
    trace.records = records;
    trace
}

/// Definitional active/passive classification replayed from a flip history.
///
/// A pair (i, j) is active at `t` when some step `s <= t` chose exactly that
/// slot while it was still hidden; it is passive when some step `s <= t`
/// flipped its (hidden) variable through a different slot. A clause counts
/// as active with at least `k2` active slots, passive with at least `k3`
/// passive slots. `n_joins` carries the dense-join times needed to decide
/// hiddenness. Runs in O(t * m * k); meant as an oracle for the incremental
/// tallies.
pub fn classify_active_passive(
    f: &Formula,
    flips: &[FlipEvent],
    n_joins: &[(Var, usize)],
    t: usize,
    params: &ProcessParams,
) -> (usize, usize) {
    let infinity = usize::MAX;
    let mut first_flip = vec![infinity; f.n() + 1];
    for (idx, ev) in flips.iter().enumerate().take(t) {
        let time = idx + 1;
        if first_flip[ev.var as usize] == infinity {
            first_flip[ev.var as usize] = time;
        }
    }
    let mut join = vec![infinity; f.n() + 1];
    for &(v, time) in n_joins {
        if time <= t && join[v as usize] == infinity {
            join[v as usize] = time;
        }
    }
    // Hidden at the end of step s-1: neither flipped nor joined before s.
    let hidden_at = |var: Var, s: usize| first_flip[var as usize] >= s && join[var as usize] >= s;

    let mut active = 0;
    let mut passive = 0;
    for i in 0..f.m() {
        let mut active_slots = 0;
        let mut passive_slots = 0;
        for j in 0..f.k() {
            let var = f.literal(i, j).var();
            let mut is_active = false;
            let mut is_passive = false;
            for (idx, ev) in flips.iter().enumerate().take(t) {
                let s = idx + 1;
                if ev.clause == i && ev.slot == j {
                    if hidden_at(var, s) {
                        is_active = true;
                        break;
                    }
                } else if ev.var == var && hidden_at(var, s) {
                    is_passive = true;
                    break;
                }
            }
            if is_active {
                active_slots += 1;
            } else if is_passive {
                passive_slots += 1;
            }
        }
        if active_slots >= params.k2 {
            active += 1;
        }
        if passive_slots >= params.k3 {
            passive += 1;
        }
    }
    (active, passive)
}
