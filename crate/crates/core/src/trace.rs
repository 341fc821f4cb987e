//! Serializable run traces of the instrumented process.
//!
//! A [`Trace`] carries one [`StepRecord`] per flip plus the join logs of the
//! dense sets, which is enough to reconstruct the A/N/Z sets at any time.
//! Clause and slot indices are 1-based in this format.

use crate::revelation::ProcessParams;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Version tag of the trace format.
pub const TRACE_SCHEMA: &str = "walksat-lab/trace/v1";

/// Per-step metrics of the instrumented process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Step number, starting at 1.
    pub t: usize,
    /// Chosen unsatisfied clause (1-based).
    pub i_t: usize,
    /// Chosen slot (1-based).
    pub j_t: usize,
    pub flipped_var: u32,
    /// Whether the chosen clause was already dense before this step.
    pub chosen_in_z: bool,
    /// Whether the chosen slot was still hidden before this step.
    pub chosen_hidden: bool,
    pub d_size: usize,
    pub s_pot: i64,
    pub h_pot: usize,
    pub s_prime: i64,
    pub h_prime: i64,
    pub r_pot: i64,
    pub z_size: usize,
    pub n_size: usize,
    pub a_size: usize,
    pub active_count: usize,
    pub passive_count: usize,
    pub rich_ok: bool,
}

/// A complete instrumented run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub schema: String,
    /// "eager", "lazy", or "replay".
    pub mode: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub params: ProcessParams,
    pub seed: Option<u64>,
    /// Step budget the run was given.
    pub cap: usize,
    /// "satisfied" or "cap_reached".
    pub outcome: String,
    /// Number of flips performed.
    pub t_stop: usize,
    /// Clauses with no positive slot at the start.
    pub d0_size: usize,
    pub records: Vec<StepRecord>,
    /// (variable, step) pairs: when each variable joined N.
    pub n_join_log: Vec<(u32, usize)>,
    /// (clause, step) pairs (1-based clause): when each clause joined Z.
    pub z_join_log: Vec<(usize, usize)>,
    /// Rich-assignment guarantee violations (a correct build leaves none).
    pub rich_violations: Vec<String>,
    /// Variables assigned false when the run ended.
    pub false_vars: Vec<u32>,
}

impl Trace {
    pub fn satisfied(&self) -> bool {
        self.outcome == "satisfied"
    }

    /// Z at time `t`: dense clauses joined at steps <= t (1-based indices).
    pub fn z_at(&self, t: usize) -> BTreeSet<usize> {
        self.z_join_log
            .iter()
            .filter(|&&(_, s)| s <= t)
            .map(|&(c, _)| c)
            .collect()
    }

    /// N at time `t`.
    pub fn n_at(&self, t: usize) -> BTreeSet<u32> {
        self.n_join_log
            .iter()
            .filter(|&&(_, s)| s <= t)
            .map(|&(v, _)| v)
            .collect()
    }

    /// A at time `t`: variables flipped by `t` that are not in N at `t`.
    pub fn a_at(&self, t: usize) -> BTreeSet<u32> {
        let n_set = self.n_at(t);
        self.records
            .iter()
            .filter(|r| r.t <= t)
            .map(|r| r.flipped_var)
            .filter(|v| !n_set.contains(v))
            .collect()
    }

    /// Largest |D| over the recorded steps (including the start).
    pub fn d_peak(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.d_size)
            .max()
            .unwrap_or(0)
            .max(self.d0_size)
    }

    /// Largest |Z| over the recorded steps.
    pub fn z_peak(&self) -> usize {
        self.records.iter().map(|r| r.z_size).max().unwrap_or(0)
    }
}

/// Compares two traces field by field, returning the path of the first
/// divergence (depth-first in serialization order), or `None` when equal.
pub fn first_divergence(actual: &Trace, expected: &Trace) -> Option<String> {
    let a = serde_json::to_value(actual).expect("trace serializes");
    let b = serde_json::to_value(expected).expect("trace serializes");
    diff_values(&a, &b, "trace")
}

fn diff_values(a: &serde_json::Value, b: &serde_json::Value, path: &str) -> Option<String> {
    use serde_json::Value;
    match (a, b) {
        (Value::Object(ma), Value::Object(mb)) => {
            for (key, va) in ma {
                match mb.get(key) {
                    None => return Some(format!("{path}.{key}: missing in expected")),
                    Some(vb) => {
                        if let Some(d) = diff_values(va, vb, &format!("{path}.{key}")) {
                            return Some(d);
                        }
                    }
                }
            }
            for key in mb.keys() {
                if !ma.contains_key(key) {
                    return Some(format!("{path}.{key}: missing in actual"));
                }
            }
            None
        }
        (Value::Array(va), Value::Array(vb)) => {
            for (idx, (ea, eb)) in va.iter().zip(vb.iter()).enumerate() {
                if let Some(d) = diff_values(ea, eb, &format!("{path}[{idx}]")) {
                    return Some(d);
                }
            }
            if va.len() != vb.len() {
                return Some(format!(
                    "{path}: length {} vs expected {}",
                    va.len(),
                    vb.len()
                ));
            }
            None
        }
        _ => {
            if a == b {
                None
            } else {
                Some(format!("{path}: {a} vs expected {b}"))
            }
        }
    }
}
