//! The random k-CNF model and its evaluation primitives.
//!
//! A formula is an ordered list of `m` clauses, each an ordered tuple of
//! exactly `k` signed literals over variables `x1..xn`. Duplicate literals
//! inside a clause and duplicate clauses are both allowed and preserved; no
//! simplification of any kind happens here, so a formula drawn by
//! [`generate_uniform`] is an exactly uniform element of the `(2n)^{km}`
//! possible outcomes.

use crate::rng::LabRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Variable identifier, 1-based everywhere (matching the DIMACS convention).
pub type Var = u32;

/// A signed variable. Stored packed: `var << 1 | negated`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Literal(u32);

impl Literal {
    pub fn new(var: Var, positive: bool) -> Self {
        debug_assert!(var >= 1);
        Literal(var << 1 | u32::from(!positive))
    }

    pub fn positive(var: Var) -> Self {
        Self::new(var, true)
    }

    pub fn negative(var: Var) -> Self {
        Self::new(var, false)
    }

    /// The underlying variable.
    pub fn var(self) -> Var {
        self.0 >> 1
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    /// +1 for a positive literal, -1 for a negative one.
    pub fn sign(self) -> i8 {
        if self.is_positive() {
            1
        } else {
            -1
        }
    }

    /// Value of the literal under an assignment.
    pub fn eval(self, a: &Assignment) -> bool {
        a.value(self.var()) == self.is_positive()
    }

    /// DIMACS integer encoding: `+v` / `-v`.
    pub fn to_dimacs(self) -> i64 {
        let v = i64::from(self.var());
        if self.is_positive() {
            v
        } else {
            -v
        }
    }

    pub fn from_dimacs(code: i64) -> Option<Self> {
        if code == 0 || code.unsigned_abs() > u64::from(u32::MAX >> 1) {
            return None;
        }
        Some(Self::new(code.unsigned_abs() as u32, code > 0))
    }
}

impl std::fmt::Debug for Literal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_positive() {
            write!(f, "x{}", self.var())
        } else {
            write!(f, "~x{}", self.var())
        }
    }
}

/// An ordered tuple of exactly `k` literals; duplicates permitted.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Clause(pub Vec<Literal>);

impl Clause {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn literals(&self) -> &[Literal] {
        &self.0
    }

    pub fn is_satisfied(&self, a: &Assignment) -> bool {
        self.0.iter().any(|l| l.eval(a))
    }

    pub fn all_negative(&self) -> bool {
        self.0.iter().all(|l| !l.is_positive())
    }
}

/// Errors from constructing or generating formulas.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("invalid dimensions: n={n}, m={m}, k={k}")]
    InvalidDimensions { n: usize, m: usize, k: usize },
    #[error("clause {clause} has width {got}, expected {expected}")]
    WidthMismatch {
        clause: usize,
        expected: usize,
        got: usize,
    },
    #[error("clause {clause} uses variable {var} but n={n}")]
    VarOutOfRange { clause: usize, var: Var, n: usize },
}

/// An ordered m-tuple of k-clauses over variables `x1..xn`.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Formula {
    n: usize,
    k: usize,
    clauses: Vec<Clause>,
}

impl Formula {
    /// Validating constructor; rejects bad dimensions, widths, and variables.
    pub fn new(n: usize, k: usize, clauses: Vec<Clause>) -> Result<Self, FormulaError> {
        if n == 0 || (k == 0 && !clauses.is_empty()) {
            return Err(FormulaError::InvalidDimensions {
                n,
                m: clauses.len(),
                k,
            });
        }
        for (idx, clause) in clauses.iter().enumerate() {
            if clause.len() != k {
                return Err(FormulaError::WidthMismatch {
                    clause: idx + 1,
                    expected: k,
                    got: clause.len(),
                });
            }
            for lit in clause.literals() {
                if lit.var() as usize > n || lit.var() == 0 {
                    return Err(FormulaError::VarOutOfRange {
                        clause: idx + 1,
                        var: lit.var(),
                        n,
                    });
                }
            }
        }
        Ok(Formula { n, k, clauses })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.clauses.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Clause density m/n.
    pub fn density(&self) -> f64 {
        self.m() as f64 / self.n as f64
    }

    pub fn clause(&self, i: usize) -> &Clause {
        &self.clauses[i]
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Literal in slot `j` of clause `i` (both 0-based).
    pub fn literal(&self, i: usize, j: usize) -> Literal {
        self.clauses[i].0[j]
    }
}

/// Draws a uniform formula: every one of the `k*m` literal slots is an
/// independent uniform pick among the `2n` literals. Deterministic in `seed`.
pub fn generate_uniform(n: usize, m: usize, k: usize, seed: u64) -> Result<Formula, FormulaError> {
    if n == 0 || (k == 0 && m > 0) {
        return Err(FormulaError::InvalidDimensions { n, m, k });
    }
    let mut rng = LabRng::from_seed(seed);
    let mut clauses = Vec::with_capacity(m);
    for _ in 0..m {
        let mut lits = Vec::with_capacity(k);
        for _ in 0..k {
            let code = rng.below(2 * n as u64);
            let var = (code / 2) as Var + 1;
            lits.push(Literal::new(var, code.is_multiple_of(2)));
        }
        clauses.push(Clause(lits));
    }
    Ok(Formula { n, k, clauses })
}

/// Number of clauses consisting of negative literals only. These are exactly
/// the clauses unsatisfied under the all-true assignment.
pub fn count_all_negative(f: &Formula) -> usize {
    f.clauses.iter().filter(|c| c.all_negative()).count()
}

/// Indices (0-based, ascending) of the clauses with no true literal under `a`.
pub fn unsat_indices(f: &Formula, a: &Assignment) -> Vec<usize> {
    f.clauses
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_satisfied(a))
        .map(|(i, _)| i)
        .collect()
}

/// A clause is S-negative when every positively-signed occurrence has its
/// variable inside `s`. All-negative clauses are S-negative for any `s`.
pub fn is_s_negative(clause: &Clause, s: &VarSet) -> bool {
    clause
        .literals()
        .iter()
        .all(|l| !l.is_positive() || s.contains(l.var()))
}

/// A total truth assignment over variables `1..=n`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Assignment {
    values: Vec<bool>, // index 0 unused
}

impl Assignment {
    pub fn all_true(n: usize) -> Self {
        Assignment {
            values: vec![true; n + 1],
        }
    }

    /// Independent fair coin per variable.
    pub fn random(n: usize, rng: &mut LabRng) -> Self {
        let mut values = vec![true; n + 1];
        for v in values.iter_mut().skip(1) {
            *v = rng.bool();
        }
        Assignment { values }
    }

    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn value(&self, var: Var) -> bool {
        self.values[var as usize]
    }

    pub fn set(&mut self, var: Var, value: bool) {
        self.values[var as usize] = value;
    }

    pub fn toggle(&mut self, var: Var) {
        self.values[var as usize] = !self.values[var as usize];
    }

    /// Variables currently assigned false, ascending.
    pub fn false_vars(&self) -> Vec<Var> {
        (1..=self.n() as Var).filter(|&v| !self.value(v)).collect()
    }
}

/// A set of variables with O(1) membership, used pervasively by the
/// instrumentation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarSet {
    member: Vec<bool>, // index 0 unused
    len: usize,
}

impl VarSet {
    pub fn new(n: usize) -> Self {
        VarSet {
            member: vec![false; n + 1],
            len: 0,
        }
    }

    pub fn from_vars(n: usize, vars: &[Var]) -> Self {
        let mut s = Self::new(n);
        for &v in vars {
            s.insert(v);
        }
        s
    }

    pub fn contains(&self, var: Var) -> bool {
        self.member[var as usize]
    }

    /// Returns true when the variable was newly inserted.
    pub fn insert(&mut self, var: Var) -> bool {
        if self.member[var as usize] {
            false
        } else {
            self.member[var as usize] = true;
            self.len += 1;
            true
        }
    }

    pub fn remove(&mut self, var: Var) -> bool {
        if self.member[var as usize] {
            self.member[var as usize] = false;
            self.len -= 1;
            true
        } else {
            false
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Ascending members; linear in n, meant for inspection and tests.
    pub fn iter(&self) -> impl Iterator<Item = Var> + '_ {
        (1..self.member.len()).filter(|&v| self.member[v]).map(|v| v as Var)
    }

    /// Membership union with another set of the same universe.
    pub fn union(&self, other: &VarSet) -> VarSet {
        let mut out = self.clone();
        for v in other.iter() {
            out.insert(v);
        }
        out
    }
}

/// A partial truth assignment; variables outside the domain are unassigned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialAssignment {
    values: Vec<Option<bool>>, // index 0 unused
}

impl PartialAssignment {
    pub fn new(n: usize) -> Self {
        PartialAssignment {
            values: vec![None; n + 1],
        }
    }

    pub fn get(&self, var: Var) -> Option<bool> {
        self.values[var as usize]
    }

    pub fn is_defined(&self, var: Var) -> bool {
        self.values[var as usize].is_some()
    }

    pub fn set(&mut self, var: Var, value: bool) {
        self.values[var as usize] = Some(value);
    }

    pub fn defined_vars(&self) -> Vec<Var> {
        (1..self.values.len())
            .filter(|&v| self.values[v].is_some())
            .map(|v| v as Var)
            .collect()
    }

    /// True when `self` and `other` agree wherever `other` is defined.
    pub fn extends(&self, other: &PartialAssignment) -> bool {
        other
            .defined_vars()
            .iter()
            .all(|&v| self.get(v) == other.get(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_seed;
    use proptest::prelude::*;

    fn clause(lits: &[i64]) -> Clause {
        Clause(lits.iter().map(|&c| Literal::from_dimacs(c).unwrap()).collect())
    }

    #[test]
    fn literal_round_trip_and_sign() {
        let pos = Literal::positive(3);
        let neg = Literal::negative(3);
        assert_eq!(pos.var(), 3);
        assert_eq!(neg.var(), 3);
        assert_eq!(pos.sign(), 1);
        assert_eq!(neg.sign(), -1);
        assert_eq!(Literal::from_dimacs(pos.to_dimacs()), Some(pos));
        assert_eq!(Literal::from_dimacs(neg.to_dimacs()), Some(neg));
        assert_eq!(Literal::from_dimacs(0), None);
    }

    #[test]
    fn count_all_negative_by_inspection() {
        // [(~x1 v ~x2), (x1 v ~x2)] has exactly one all-negative clause.
        let f = Formula::new(2, 2, vec![clause(&[-1, -2]), clause(&[1, -2])]).unwrap();
        assert_eq!(count_all_negative(&f), 1);
    }

    #[test]
    fn count_all_negative_empty_formula() {
        let f = Formula::new(3, 0, vec![]).unwrap();
        assert_eq!(count_all_negative(&f), 0);
    }

    #[test]
    fn unsat_indices_under_all_true() {
        let f = Formula::new(2, 2, vec![clause(&[1, 2]), clause(&[-1, -2])]).unwrap();
        let a = Assignment::all_true(2);
        assert_eq!(unsat_indices(&f, &a), vec![1]);
    }

    #[test]
    fn unsat_indices_empty_on_satisfying_assignment() {
        let f = Formula::new(2, 2, vec![clause(&[1, 2]), clause(&[-1, 2])]).unwrap();
        let mut a = Assignment::all_true(2);
        a.set(1, false);
        assert_eq!(unsat_indices(&f, &a), Vec::<usize>::new());
    }

    #[test]
    fn s_negative_examples() {
        let n = 3;
        // All-negative clause is S-negative even for S = {}.
        assert!(is_s_negative(&clause(&[-1, -2, -3]), &VarSet::new(n)));
        // (x1 v ~x2 v ~x3): S = {x1} yes, S = {} no.
        let c = clause(&[1, -2, -3]);
        assert!(is_s_negative(&c, &VarSet::from_vars(n, &[1])));
        assert!(!is_s_negative(&c, &VarSet::new(n)));
    }

    #[test]
    fn generator_dimensions_and_determinism() {
        let f = generate_uniform(10, 6, 5, 77).unwrap();
        assert_eq!((f.n(), f.m(), f.k()), (10, 6, 5));
        for c in f.clauses() {
            assert_eq!(c.len(), 5);
            assert!(c.literals().iter().all(|l| (1..=10).contains(&l.var())));
        }
        // Byte-identical on repeated calls with the same seed.
        let g = generate_uniform(5, 4, 3, 1234).unwrap();
        let h = generate_uniform(5, 4, 3, 1234).unwrap();
        assert_eq!(g, h);
        assert_ne!(g, generate_uniform(5, 4, 3, 1235).unwrap());
    }

    #[test]
    fn generator_rejects_bad_dimensions() {
        assert!(matches!(
            generate_uniform(0, 1, 3, 0),
            Err(FormulaError::InvalidDimensions { .. })
        ));
        assert!(matches!(
            generate_uniform(4, 1, 0, 0),
            Err(FormulaError::InvalidDimensions { .. })
        ));
        // k = 0 with m = 0 is a legal (empty) formula.
        assert!(generate_uniform(4, 0, 0, 0).is_ok());
    }

    #[test]
    fn single_slot_is_a_fair_two_point_draw() {
        // n=1, m=1, k=1: the clause is x1 or ~x1, each with probability 1/2.
        let trials = 2000;
        let positives = (0..trials)
            .filter(|&i| {
                let f = generate_uniform(1, 1, 1, derive_seed(5150, i)).unwrap();
                f.literal(0, 0).is_positive()
            })
            .count();
        let se = (0.25 / trials as f64).sqrt();
        let freq = positives as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 5.0 * se, "freq {freq}");
    }

    #[test]
    fn generator_marginals_over_single_slot() {
        // Frequency of each of the 2n literals in one fixed slot, 10^4 draws,
        // within 5 standard errors of 1/(2n).
        let n = 3;
        let draws = 10_000u64;
        let mut counts = vec![0usize; 2 * n];
        for i in 0..draws {
            let f = generate_uniform(n, 1, 2, derive_seed(8080, i)).unwrap();
            let lit = f.literal(0, 1);
            let idx = (lit.var() as usize - 1) * 2 + usize::from(!lit.is_positive());
            counts[idx] += 1;
        }
        let p = 1.0 / (2 * n) as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        for &c in &counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - p).abs() < 5.0 * se, "freq {freq} vs {p}");
        }
    }

    #[test]
    fn all_negative_matches_unsat_under_all_true() {
        for seed in 0..50 {
            let f = generate_uniform(8, 20, 3, seed).unwrap();
            let a = Assignment::all_true(8);
            assert_eq!(count_all_negative(&f), unsat_indices(&f, &a).len());
        }
    }

    #[test]
    fn unsat_indices_matches_per_clause_oracle() {
        // Independent oracle: evaluate every literal of every clause directly.
        let mut rng = LabRng::from_seed(31337);
        for seed in 0..30 {
            let f = generate_uniform(3, 10, 3, seed).unwrap();
            let a = Assignment::random(3, &mut rng);
            let oracle: Vec<usize> = (0..f.m())
                .filter(|&i| {
                    let mut any_true = false;
                    for j in 0..f.k() {
                        let l = f.literal(i, j);
                        let val = if l.is_positive() {
                            a.value(l.var())
                        } else {
                            !a.value(l.var())
                        };
                        any_true |= val;
                    }
                    !any_true
                })
                .collect();
            assert_eq!(unsat_indices(&f, &a), oracle);
        }
    }

    proptest! {
        #[test]
        fn prop_s_negative_matches_quantifier_loop(
            lits in proptest::collection::vec((1u32..=6, proptest::bool::ANY), 1..6),
            members in proptest::collection::vec(proptest::bool::ANY, 6),
        ) {
            let clause = Clause(lits.iter().map(|&(v, pos)| Literal::new(v, pos)).collect());
            let mut s = VarSet::new(6);
            for (i, &m) in members.iter().enumerate() {
                if m {
                    s.insert(i as Var + 1);
                }
            }
            // Definitional re-evaluation: for all j with sign +1, var in S.
            let oracle = clause
                .literals()
                .iter()
                .filter(|l| l.is_positive())
                .all(|l| s.contains(l.var()));
            prop_assert_eq!(is_s_negative(&clause, &s), oracle);
        }

        #[test]
        fn prop_varset_len_tracks_membership(ops in proptest::collection::vec((1u32..=20, proptest::bool::ANY), 0..60)) {
            let mut s = VarSet::new(20);
            let mut reference = std::collections::BTreeSet::new();
            for (v, add) in ops {
                if add {
                    s.insert(v);
                    reference.insert(v);
                } else {
                    s.remove(v);
                    reference.remove(&v);
                }
            }
            prop_assert_eq!(s.len(), reference.len());
            prop_assert_eq!(s.iter().collect::<Vec<_>>(), reference.into_iter().collect::<Vec<_>>());
        }
    }
}
