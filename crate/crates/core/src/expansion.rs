//! Factor-graph structure and expansion machinery: l-fold matchings, greedy
//! overlap chains, occurrence closures, and rich partial assignments.
//!
//! The factor graph pairs every clause with the distinct variables occurring
//! in it. An l-fold matching from a clause set to its neighborhood gives each
//! clause exactly `l` private variables; such a matching is what lets us pick
//! a partial assignment that satisfies many occurrences in every clause of
//! the set at once ("rich" assignments).

use crate::formula::{Clause, Formula, Literal, PartialAssignment, Var, VarSet};

/// Bipartite clause/variable adjacency with duplicate occurrences collapsed
/// for matching purposes; ordered occurrence lists are kept alongside for the
/// closure operations that count slots rather than distinct variables.
#[derive(Clone, Debug)]
pub struct FactorGraph {
    n: usize,
    clause_adj: Vec<Vec<Var>>,   // distinct vars per clause, ascending
    var_adj: Vec<Vec<usize>>,    // distinct clause indices per var, ascending
    clause_slots: Vec<Vec<Var>>, // slot variables in order, duplicates kept
}

impl FactorGraph {
    pub fn new(f: &Formula) -> Self {
        let mut clause_adj = Vec::with_capacity(f.m());
        let mut clause_slots = Vec::with_capacity(f.m());
        let mut var_adj = vec![Vec::new(); f.n() + 1];
        for (i, clause) in f.clauses().iter().enumerate() {
            let slots: Vec<Var> = clause.literals().iter().map(|l| l.var()).collect();
            let mut distinct = slots.clone();
            distinct.sort_unstable();
            distinct.dedup();
            for &v in &distinct {
                var_adj[v as usize].push(i);
            }
            clause_adj.push(distinct);
            clause_slots.push(slots);
        }
        FactorGraph {
            n: f.n(),
            clause_adj,
            var_adj,
            clause_slots,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.clause_adj.len()
    }

    /// Distinct variables of clause `i`, ascending.
    pub fn vars(&self, i: usize) -> &[Var] {
        &self.clause_adj[i]
    }

    /// Slot variables of clause `i` in order, duplicates preserved.
    pub fn slots(&self, i: usize) -> &[Var] {
        &self.clause_slots[i]
    }

    /// Distinct clauses containing variable `v`, ascending.
    pub fn clauses_of(&self, v: Var) -> &[usize] {
        &self.var_adj[v as usize]
    }
}

/// Union of the distinct variables of the clauses in `z`.
pub fn neighborhood(fg: &FactorGraph, z: &[usize]) -> VarSet {
    let mut out = VarSet::new(fg.n());
    for &i in z {
        for &v in fg.vars(i) {
            out.insert(v);
        }
    }
    out
}

/// An edge set giving each matched clause exactly `l` variables, each
/// variable at most one clause.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LFoldMatching {
    pub edges: Vec<(usize, Var)>,
}

impl LFoldMatching {
    /// Checks the degree constraints against a clause set and fold count.
    pub fn is_valid(&self, fg: &FactorGraph, z: &[usize], l: usize) -> bool {
        let mut per_clause = std::collections::BTreeMap::new();
        let mut used_vars = std::collections::BTreeSet::new();
        for &(i, v) in &self.edges {
            if !fg.vars(i).contains(&v) || !used_vars.insert(v) {
                return false;
            }
            *per_clause.entry(i).or_insert(0usize) += 1;
        }
        z.iter().all(|i| per_clause.get(i) == Some(&l)) && per_clause.len() == z.len()
    }
}

/// Augmenting-path matcher over an explicit adjacency: `adj[c]` lists the
/// candidate variables of left vertex `c`, in preference order. Returns the
/// matched variables per left vertex when every vertex can get `quota` of
/// them, `None` otherwise (the decision is exact: augmenting paths find a
/// maximum matching on the split graph).
fn match_with_quota(adj: &[Vec<Var>], quota: usize, n: usize) -> Option<Vec<Vec<Var>>> {
    // owner[v] = left vertex currently matched to variable v.
    let mut owner: Vec<Option<usize>> = vec![None; n + 1];
    let mut stamp = vec![0u32; n + 1];
    let mut round = 0u32;

    fn augment(
        c: usize,
        adj: &[Vec<Var>],
        owner: &mut Vec<Option<usize>>,
        stamp: &mut Vec<u32>,
        round: u32,
    ) -> bool {
        for &v in &adj[c] {
            let vi = v as usize;
            if stamp[vi] == round {
                continue;
            }
            stamp[vi] = round;
            match owner[vi] {
                None => {
                    owner[vi] = Some(c);
                    return true;
                }
                Some(other) => {
                    if augment(other, adj, owner, stamp, round) {
                        owner[vi] = Some(c);
                        return true;
                    }
                }
            }
        }
        false
    }

    for c in 0..adj.len() {
        for _ in 0..quota {
            round += 1;
            if !augment(c, adj, &mut owner, &mut stamp, round) {
                return None;
            }
        }
    }
    let mut matched = vec![Vec::new(); adj.len()];
    for (v, own) in owner.iter().enumerate().skip(1) {
        if let Some(c) = own {
            matched[*c].push(v as Var);
        }
    }
    Some(matched)
}

/// Decides whether an l-fold matching from the clauses of `z` into their
/// neighborhood exists, returning a witness when it does.
pub fn l_fold_matching(fg: &FactorGraph, z: &[usize], l: usize) -> Option<LFoldMatching> {
    assert!(l >= 1);
    let adj: Vec<Vec<Var>> = z.iter().map(|&i| fg.vars(i).to_vec()).collect();
    let matched = match_with_quota(&adj, l, fg.n())?;
    let mut edges = Vec::new();
    for (zi, vars) in matched.iter().enumerate() {
        for &v in vars {
            edges.push((z[zi], v));
        }
    }
    Some(LFoldMatching { edges })
}

/// Greedy maximal chain of distinct clauses outside `z`, each sharing at
/// least `lambda` distinct variables with the accumulated neighborhood of
/// `z` and the chain so far. Scans ascending and restarts after every
/// addition, so the result is deterministic. Callers compare the chain
/// length against their size budget.
pub fn overlap_chain(fg: &FactorGraph, z: &[usize], lambda: usize) -> Vec<usize> {
    let mut in_base = vec![false; fg.m()];
    for &i in z {
        in_base[i] = true;
    }
    let mut acc = neighborhood(fg, z);
    let mut chain = Vec::new();
    loop {
        let found = (0..fg.m()).find(|&i| {
            !in_base[i] && fg.vars(i).iter().filter(|&&v| acc.contains(v)).count() >= lambda
        });
        match found {
            None => return chain,
            Some(i) => {
                in_base[i] = true;
                for &v in fg.vars(i) {
                    acc.insert(v);
                }
                chain.push(i);
            }
        }
    }
}

/// Least fixed point of the cascade rule: while some clause outside the set
/// has at least `lambda` slots (occurrence-counted) on variables of the
/// set's neighborhood, add the least such clause. Returns the closed set,
/// ascending.
pub fn occurrence_closure(fg: &FactorGraph, y0: &[usize], lambda: usize) -> Vec<usize> {
    let mut member = vec![false; fg.m()];
    for &i in y0 {
        member[i] = true;
    }
    let mut nb = neighborhood(fg, y0);
    loop {
        let found = (0..fg.m()).find(|&i| {
            !member[i] && fg.slots(i).iter().filter(|&&v| nb.contains(v)).count() >= lambda
        });
        match found {
            None => break,
            Some(i) => {
                member[i] = true;
                for &v in fg.vars(i) {
                    nb.insert(v);
                }
            }
        }
    }
    (0..fg.m()).filter(|&i| member[i]).collect()
}

/// Why a rich-assignment extension could not be built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RichFailure {
    /// The clause set has no matching of the required fold.
    NoMatching,
    /// After dropping matched variables that already carry values, some
    /// clause keeps fewer than the required edges.
    PrunedBelowThreshold { clause: usize },
}

/// Extends `tau_prev` to a partial assignment satisfying at least `rich_min`
/// literal occurrences in every listed clause, without touching values on
/// `n_prev`. `clause_lits` carries (clause index, its literals).
///
/// The construction matches each clause to `match_fold` private variables,
/// drops edges whose variable already has a value, gives each surviving
/// matched variable the truth value satisfying its lowest-index occurrence,
/// and defaults every other new variable to true.
pub fn extend_rich_from_lits(
    clause_lits: &[(usize, Vec<Literal>)],
    n: usize,
    in_n_prev: impl Fn(Var) -> bool,
    tau_prev: &PartialAssignment,
    match_fold: usize,
    rich_min: usize,
) -> Result<PartialAssignment, RichFailure> {
    if clause_lits.is_empty() {
        return Ok(tau_prev.clone());
    }
    // Adjacency with fresh variables first so the matching prefers variables
    // it is allowed to assign.
    let adj: Vec<Vec<Var>> = clause_lits
        .iter()
        .map(|(_, lits)| {
            let mut vars: Vec<Var> = lits.iter().map(|l| l.var()).collect();
            vars.sort_unstable();
            vars.dedup();
            vars.sort_by_key(|&v| (in_n_prev(v), v));
            vars
        })
        .collect();
    let matched = match_with_quota(&adj, match_fold, n).ok_or(RichFailure::NoMatching)?;

    let mut tau = tau_prev.clone();
    for (zi, vars) in matched.iter().enumerate() {
        let (clause_idx, lits) = &clause_lits[zi];
        let kept: Vec<Var> = vars.iter().copied().filter(|&v| !in_n_prev(v)).collect();
        if kept.len() < rich_min {
            return Err(RichFailure::PrunedBelowThreshold {
                clause: *clause_idx,
            });
        }
        for v in kept {
            // Satisfy the lowest-index occurrence of v in this clause.
            let lit = lits.iter().find(|l| l.var() == v).expect("matched var occurs");
            tau.set(v, lit.is_positive());
        }
    }
    // Unmatched new variables default to true.
    for (_, lits) in clause_lits {
        for lit in lits {
            let v = lit.var();
            if !in_n_prev(v) && !tau.is_defined(v) {
                tau.set(v, true);
            }
        }
    }
    Ok(tau)
}

/// Formula-facing wrapper of [`extend_rich_from_lits`] for a set of clause
/// indices.
pub fn build_rich_assignment(
    f: &Formula,
    z_new: &[usize],
    n_prev: &VarSet,
    tau_prev: &PartialAssignment,
    match_fold: usize,
    rich_min: usize,
) -> Result<PartialAssignment, RichFailure> {
    let clause_lits: Vec<(usize, Vec<Literal>)> = z_new
        .iter()
        .map(|&i| (i, f.clause(i).literals().to_vec()))
        .collect();
    extend_rich_from_lits(
        &clause_lits,
        f.n(),
        |v| n_prev.contains(v),
        tau_prev,
        match_fold,
        rich_min,
    )
}

/// Number of literal occurrences of `clause` satisfied under a partial
/// assignment (unassigned variables satisfy nothing).
pub fn satisfied_occurrences(clause: &Clause, tau: &PartialAssignment) -> usize {
    clause
        .literals()
        .iter()
        .filter(|l| tau.get(l.var()) == Some(l.is_positive()))
        .count()
}
