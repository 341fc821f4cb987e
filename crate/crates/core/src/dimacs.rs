//! DIMACS CNF reading and writing.
//!
//! The only extension over plain DIMACS is a comment line `c k <width>`
//! emitted on write; on parse the width is taken from that line when present
//! and inferred from the first clause otherwise. Clause order, literal order,
//! and duplicates survive a round trip untouched, and mixed clause widths are
//! rejected because the model is fixed-width by construction.

use crate::formula::{Clause, Formula, Literal, Var};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DimacsError {
    #[error("missing 'p cnf' header")]
    MissingHeader,
    #[error("malformed header line: {0}")]
    MalformedHeader(String),
    #[error("unexpected token {token:?}")]
    BadToken { token: String },
    #[error("clause {clause} uses variable {var} but the header declares {n} variables")]
    VarOutOfRange { clause: usize, var: Var, n: usize },
    #[error("clause {clause} has width {got}, expected {expected}")]
    WidthMismatch {
        clause: usize,
        expected: usize,
        got: usize,
    },
    #[error("clause {clause} is not terminated by 0")]
    UnterminatedClause { clause: usize },
    #[error("header declares {expected} clauses but the body has {got}")]
    ClauseCountMismatch { expected: usize, got: usize },
    #[error("variable count 0 is not supported")]
    ZeroVariables,
}

/// Parses DIMACS CNF text into a fixed-width formula.
pub fn parse_dimacs(input: &str) -> Result<Formula, DimacsError> {
    let mut declared: Option<(usize, usize)> = None;
    let mut width_hint: Option<usize> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut current: Vec<Literal> = Vec::new();

    for line in input.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('c') {
            // Recognize the width extension "c k <width>"; ignore other comments.
            let mut toks = comment.split_whitespace();
            if toks.next() == Some("k") {
                if let Some(Ok(w)) = toks.next().map(str::parse::<usize>) {
                    width_hint = Some(w);
                }
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            let toks: Vec<&str> = rest.split_whitespace().collect();
            if toks.len() != 3 || toks[0] != "cnf" {
                return Err(DimacsError::MalformedHeader(line.to_string()));
            }
            let n = toks[1]
                .parse::<usize>()
                .map_err(|_| DimacsError::MalformedHeader(line.to_string()))?;
            let m = toks[2]
                .parse::<usize>()
                .map_err(|_| DimacsError::MalformedHeader(line.to_string()))?;
            if n == 0 {
                return Err(DimacsError::ZeroVariables);
            }
            declared = Some((n, m));
            continue;
        }
        let (n, _) = declared.ok_or(DimacsError::MissingHeader)?;
        for tok in line.split_whitespace() {
            let code: i64 = tok.parse().map_err(|_| DimacsError::BadToken {
                token: tok.to_string(),
            })?;
            if code == 0 {
                clauses.push(Clause(std::mem::take(&mut current)));
            } else {
                let lit = Literal::from_dimacs(code).ok_or(DimacsError::BadToken {
                    token: tok.to_string(),
                })?;
                if lit.var() as usize > n {
                    return Err(DimacsError::VarOutOfRange {
                        clause: clauses.len() + 1,
                        var: lit.var(),
                        n,
                    });
                }
                current.push(lit);
            }
        }
    }

    let (n, m) = declared.ok_or(DimacsError::MissingHeader)?;
    if !current.is_empty() {
        return Err(DimacsError::UnterminatedClause {
            clause: clauses.len() + 1,
        });
    }
    if clauses.len() != m {
        return Err(DimacsError::ClauseCountMismatch {
            expected: m,
            got: clauses.len(),
        });
    }

    let k = match width_hint {
        Some(k) => k,
        None => clauses.first().map_or(0, Clause::len),
    };
    for (idx, clause) in clauses.iter().enumerate() {
        if clause.len() != k {
            return Err(DimacsError::WidthMismatch {
                clause: idx + 1,
                expected: k,
                got: clause.len(),
            });
        }
    }

    // Formula::new re-validates; its error cannot fire after the checks above.
    Formula::new(n, k, clauses).map_err(|_| DimacsError::MalformedHeader(String::new()))
}

/// Serializes a formula; `parse_dimacs(write_dimacs(f)) == f` exactly.
pub fn write_dimacs(f: &Formula) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "c k {}", f.k());
    let _ = writeln!(out, "p cnf {} {}", f.n(), f.m());
    for clause in f.clauses() {
        for lit in clause.literals() {
            let _ = write!(out, "{} ", lit.to_dimacs());
        }
        let _ = writeln!(out, "0");
    }
    out
}
