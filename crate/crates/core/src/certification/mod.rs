//! Security quantities of the extended SDI protocol: the min-entropy bound
//! for arbitrary splitter reflectivity, the failure-probability budget and
//! the completeness of the certification test.

mod bounds;
mod completeness;
mod entropy;

pub use bounds::{
    epsilon_fail, epsilon_gamma, epsilon_minus, epsilon_plus, evaluate_budget, solve_nr_minus,
    BudgetInputs, NrSolution, PhotonBounds, SecurityBudget,
};
pub use completeness::{completeness, solve_cert_window};
pub use entropy::{
    certified_min_entropy, guessing_prob_exact, guessing_prob_gaussian, min_entropy_sdi,
    peak_diff_outcome, sdi_window, EntropyMode, EntropyReport,
};

use serde::{Deserialize, Serialize};

/// Closed integer interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntWindow {
    pub lo: i64,
    pub hi: i64,
}

impl IntWindow {
    pub fn new(lo: i64, hi: i64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> u64 {
        if self.hi < self.lo {
            0
        } else {
            (self.hi - self.lo) as u64 + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn contains(&self, x: i64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundStatus {
    Ok,
    BelowNoiseFloor,
    Saturated,
    EpsOrderViolated,
}

impl BoundStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundStatus::Ok => "ok",
            BoundStatus::BelowNoiseFloor => "below-noise-floor",
            BoundStatus::Saturated => "saturated",
            BoundStatus::EpsOrderViolated => "eps-order-violated",
        }
    }
}

impl std::fmt::Display for BoundStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
