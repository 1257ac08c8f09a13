//! Brute-force evaluation over deterministic stationary policies.
//!
//! These routines only use exact chain evaluation, so they serve as
//! independent references for the iterative planners and as the exact
//! best-response evaluator used in run accounting.

use super::{gain_vector, induce_mrp, Dims, Player, SgError, SgModel, StationaryPolicy};
use crate::exec;

/// Largest number of deterministic policies (or pairs) enumerated by default.
pub const ENUMERATION_BUDGET: usize = 1 << 20;

/// `A^S` if it fits in the budget.
pub fn policy_count(states: usize, actions: usize, budget: usize) -> Result<usize, SgError> {
    let mut count: usize = 1;
    for _ in 0..states {
        count = match count.checked_mul(actions) {
            Some(c) if c <= budget => c,
            _ => {
                return Err(SgError::EnumerationTooLarge {
                    count: (actions as f64).powi(states as i32),
                    budget,
                })
            }
        };
    }
    Ok(count)
}

/// Counts of deterministic policies for each player, if their product fits.
pub fn deterministic_pair_count(d: Dims, budget: usize) -> Result<(usize, usize), SgError> {
    let n1 = policy_count(d.states, d.actions_p1, budget)?;
    let n2 = policy_count(d.states, d.actions_p2, budget)?;
    match n1.checked_mul(n2) {
        Some(c) if c <= budget => Ok((n1, n2)),
        _ => Err(SgError::EnumerationTooLarge {
            count: n1 as f64 * n2 as f64,
            budget,
        }),
    }
}

/// The `index`-th deterministic policy in mixed-radix order (state 0 is the
/// fastest-varying digit).
pub fn deterministic_policy(owner: Player, states: usize, actions: usize, index: usize) -> StationaryPolicy {
    let mut digits = Vec::with_capacity(states);
    let mut rest = index;
    for _ in 0..states {
        digits.push(rest % actions);
        rest /= actions;
    }
    StationaryPolicy::deterministic(owner, &digits, actions).expect("digits are in range")
}

/// Exact best response of Player 2 to a fixed `pi1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResponseValue {
    /// `min_{π²} ρ(M, π¹, π², s)` for each start state.
    pub values: Vec<f64>,
    /// A deterministic minimizer (first in enumeration order with the
    /// smallest total gain).
    pub policy: StationaryPolicy,
}

impl ResponseValue {
    /// Worst start state, i.e. `min_s values[s]`.
    pub fn worst(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `min_{π²} ρ(M, π¹, π², ·)` by enumerating Player 2's deterministic
/// stationary policies; valid because fixing `π¹` leaves a finite MDP.
pub fn worst_case_response(model: &SgModel, pi1: &StationaryPolicy) -> Result<ResponseValue, SgError> {
    worst_case_response_with_budget(model, pi1, ENUMERATION_BUDGET)
}

pub fn worst_case_response_with_budget(
    model: &SgModel,
    pi1: &StationaryPolicy,
    budget: usize,
) -> Result<ResponseValue, SgError> {
    let d = model.dims();
    let n2 = policy_count(d.states, d.actions_p2, budget)?;
    let gains = exec::map_indices(n2, |k| {
        let pi2 = deterministic_policy(Player::Two, d.states, d.actions_p2, k);
        induce_mrp(model, pi1, &pi2).and_then(|m| gain_vector(&m))
    });
    let mut values = vec![f64::INFINITY; d.states];
    let mut best = (f64::INFINITY, 0usize);
    for (k, g) in gains.into_iter().enumerate() {
        let g = g?;
        for (v, x) in values.iter_mut().zip(&g) {
            *v = v.min(*x);
        }
        let total: f64 = g.iter().sum();
        if total < best.0 {
            best = (total, k);
        }
    }
    Ok(ResponseValue {
        values,
        policy: deterministic_policy(Player::Two, d.states, d.actions_p2, best.1),
    })
}

/// `max_{π¹} min_{π²} ρ(M, π¹, π², s)` over deterministic stationary policies
/// of both players. Equals the game value for turn-based games, where
/// deterministic stationary optimal policies exist.
pub fn deterministic_maximin(model: &SgModel) -> Result<Vec<f64>, SgError> {
    let d = model.dims();
    let (n1, n2) = deterministic_pair_count(d, ENUMERATION_BUDGET)?;
    let per_pi1 = exec::map_indices(n1, |i| {
        let pi1 = deterministic_policy(Player::One, d.states, d.actions_p1, i);
        let mut worst = vec![f64::INFINITY; d.states];
        for k in 0..n2 {
            let pi2 = deterministic_policy(Player::Two, d.states, d.actions_p2, k);
            let g = gain_vector(&induce_mrp(model, &pi1, &pi2)?)?;
            for (w, x) in worst.iter_mut().zip(&g) {
                *w = w.min(*x);
            }
        }
        Ok::<_, SgError>(worst)
    });
    let mut best = vec![f64::NEG_INFINITY; d.states];
    for w in per_pi1 {
        for (b, x) in best.iter_mut().zip(&w?) {
            *b = b.max(*x);
        }
    }
    Ok(best)
}
