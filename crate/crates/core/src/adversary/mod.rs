//! Separation oracles: given a sampling distribution, find a function whose
//! estimation error is as large as possible, either over all Lipschitz
//! functions or over a finite discretized class.

mod exact;
mod grid;
mod line_dp;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lipschitz::{DiscreteFunction, SamplingDistribution};

pub use exact::{exact_oracle, exact_oracle_small, sign_pattern_value, ExactOracle, DEFAULT_EXACT_CAP};
pub use grid::{
    build_grid, doubling_enum_oracle, doubling_enum_oracle_with_cap, grid_gamma_for_delta,
    qdelta_to_lipschitz, repair_bound, Ball, GridOracle, GridStructure, DEFAULT_CLASS_CAP,
};
pub use line_dp::{line_dp_oracle, line_dp_oracle_with_cap, LineClassParams, LineDpOracle, DEFAULT_STATE_CAP};

/// What a reported value certifies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Guarantee {
    /// The value is the worst case over all Lipschitz functions.
    Exact,
    /// The value is the worst case over a class that `delta`-approximates
    /// the Lipschitz functions.
    ClassExact { delta: f64 },
    Heuristic,
}

/// A (near-)worst-case function for a distribution and its error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub witness: DiscreteFunction,
    pub value: f64,
    pub guarantee: Guarantee,
}

/// Which oracle backs a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Exact,
    LineDp,
    Grid,
}

impl std::str::FromStr for OracleKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Self::Exact),
            "line-dp" => Ok(Self::LineDp),
            "grid" => Ok(Self::Grid),
            other => Err(format!("unknown oracle '{other}' (expected exact, line-dp or grid)")),
        }
    }
}

impl std::fmt::Display for OracleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Exact => "exact",
            Self::LineDp => "line-dp",
            Self::Grid => "grid",
        })
    }
}

/// Finds a function maximizing the estimation error for `p`.
pub trait SeparationOracle: Sync {
    fn separate(&self, p: &SamplingDistribution) -> Result<OracleReport>;

    fn guarantee(&self) -> Guarantee;
}

/// Deterministic reduction order: larger value wins, ties go to the
/// lexicographically smallest witness.
pub(crate) fn better(a: &(f64, Vec<f64>), b: &(f64, Vec<f64>)) -> Ordering {
    match a.0.total_cmp(&b.0) {
        Ordering::Equal => {
            for (x, y) in a.1.iter().zip(&b.1) {
                match y.total_cmp(x) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            Ordering::Equal
        }
        o => o,
    }
}

pub(crate) fn pick_best(a: (f64, Vec<f64>), b: (f64, Vec<f64>)) -> (f64, Vec<f64>) {
    if better(&b, &a) == Ordering::Greater {
        b
    } else {
        a
    }
}
