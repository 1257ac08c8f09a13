//! Tabular zero-sum stochastic games and exact evaluation of stationary
//! policy pairs.

mod chain;
mod diameter;
pub mod enumerate;
mod model;
mod policy;

pub use chain::{
    evaluate, gain, gain_vector, induce_mrp, is_irreducible, mean_first_passage_times, recurrent_classes,
    stationary_distribution, EvalReport, MarkovRewardProcess,
};
pub use diameter::{
    diameter_a1, diameter_a1_with_budget, diameter_a2, HITTING_TIME_ITERATION_CAP, HITTING_TIME_VALUE_CAP,
};
pub use model::{Dims, SgModel, ROW_SUM_TOL};
pub use policy::{Player, StationaryPolicy};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("cell (s={s}, a1={a1}, a2={a2}): {reason}")]
    InvalidCell {
        s: usize,
        a1: usize,
        a2: usize,
        reason: String,
    },
    #[error("policy row for state {state}: {reason}")]
    InvalidPolicy { state: usize, reason: String },
    #[error("chain has {0} recurrent classes; a unichain process is required")]
    Multichain(usize),
    #[error("linear system is singular")]
    SingularSystem,
    #[error("hitting-time iteration did not converge after {iterations} iterations (value {value})")]
    NoConvergence { iterations: usize, value: f64 },
    #[error("enumeration of {count} deterministic policies exceeds the budget of {budget}")]
    EnumerationTooLarge { count: f64, budget: usize },
    #[error(transparent)]
    MatrixGame(#[from] crate::matgame::MatGameError),
}

/// `max − min` of a vector; zero for empty input.
pub fn span(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    crate::matgame::max_of(v) - crate::matgame::min_of(v)
}

/// Dot product in index order. Every `p·v` in the crate goes through here so
/// identical inputs give identical bits regardless of the caller.
#[inline]
pub fn dot(p: &[f64], v: &[f64]) -> f64 {
    p.iter().zip(v).map(|(a, b)| a * b).sum()
}
