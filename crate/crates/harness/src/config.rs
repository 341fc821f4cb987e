//! Experiment configuration shared by the CLI verbs.

use serde::Serialize;
use thiserror::Error;
use walksat_lab_core::revelation::ProcessParams;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Dimacs(#[from] walksat_lab_core::dimacs::DimacsError),
    #[error(transparent)]
    Formula(#[from] walksat_lab_core::formula::FormulaError),
    #[error(transparent)]
    Process(#[from] walksat_lab_core::revelation::ProcessError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("internal consistency: {0}")]
    Verification(String),
}

/// Clause density, given either directly as r = m/n or as the normalized
/// rho = r k / 2^k.
#[derive(Clone, Copy, Debug)]
pub enum Density {
    R(f64),
    Rho(f64),
}

impl Density {
    pub fn r(&self, k: usize) -> f64 {
        match *self {
            Density::R(r) => r,
            Density::Rho(rho) => rho * (1u64 << k) as f64 / k as f64,
        }
    }
}

/// rho = r k / 2^k, reported alongside r in every output row.
pub fn rho_of(r: f64, k: usize) -> f64 {
    r * k as f64 / (1u64 << k) as f64
}

/// m = ceil(r n).
pub fn clause_count(r: f64, n: usize) -> usize {
    (r * n as f64).ceil() as usize
}

/// Optional overrides of the process thresholds, applied on top of the
/// defaults for (k, n).
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct ParamOverrides {
    pub k1: Option<usize>,
    pub k2: Option<usize>,
    pub k3: Option<usize>,
    pub lambda: Option<usize>,
    pub epsilon: Option<f64>,
    pub theta: Option<f64>,
}

impl ParamOverrides {
    pub fn apply(&self, k: usize, n: usize) -> ProcessParams {
        let mut p = ProcessParams::defaults(k, n);
        if let Some(v) = self.k1 {
            p.k1 = v;
        }
        if let Some(v) = self.k2 {
            p.k2 = v;
        }
        if let Some(v) = self.k3 {
            p.k3 = v;
        }
        if let Some(v) = self.lambda {
            p.lambda = v;
        }
        if let Some(v) = self.epsilon {
            p.epsilon = v;
        }
        if let Some(theta) = self.theta {
            p = p.with_theta(theta, n);
        }
        p
    }
}
