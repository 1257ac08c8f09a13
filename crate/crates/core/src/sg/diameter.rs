//! Diameters of a stochastic game under the two mixing assumptions.
//!
//! Both include return times (`s = s'`), so a single-state game has diameter 1.

use super::enumerate::{deterministic_pair_count, deterministic_policy, ENUMERATION_BUDGET};
use super::{induce_mrp, mean_first_passage_times, Player, SgError, SgModel};
use crate::exec;
use crate::matgame::{self, MatrixGame};

pub const HITTING_TIME_ITERATION_CAP: usize = 1_000_000;
pub const HITTING_TIME_VALUE_CAP: f64 = 1e9;
const HITTING_TIME_TOL: f64 = 1e-12;

/// `max_{s,s'} max_{π¹} max_{π²} T_{s→s'}`, by enumerating deterministic
/// stationary pairs. Returns `+∞` if some pair never reaches some state.
pub fn diameter_a1(model: &SgModel) -> Result<f64, SgError> {
    diameter_a1_with_budget(model, ENUMERATION_BUDGET)
}

pub fn diameter_a1_with_budget(model: &SgModel, budget: usize) -> Result<f64, SgError> {
    let d = model.dims();
    let (n1, n2) = deterministic_pair_count(d, budget)?;
    let worst = exec::map_indices(n1 * n2, |k| -> Result<f64, SgError> {
        let pi1 = deterministic_policy(Player::One, d.states, d.actions_p1, k / n2);
        let pi2 = deterministic_policy(Player::Two, d.states, d.actions_p2, k % n2);
        let mrp = induce_mrp(model, &pi1, &pi2)?;
        let t = mean_first_passage_times(mrp.transition())?;
        Ok(t.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    });
    worst
        .into_iter()
        .try_fold(f64::NEG_INFINITY, |acc, x| x.map(|x| acc.max(x)))
}

/// `max_{s,s'} max_{π²} min_{π¹} T_{s→s'}`.
///
/// For each target the hitting-time game (Player 2 maximizes, Player 1
/// minimizes) is solved by value iteration on the model with the target made
/// absorbing.
pub fn diameter_a2(model: &SgModel) -> Result<f64, SgError> {
    let n = model.num_states();
    let per_target = exec::map_indices_with_grain(n, 4, |j| hitting_time_values(model, j));
    let mut worst = f64::NEG_INFINITY;
    for values in per_target {
        worst = values?.into_iter().fold(worst, f64::max);
    }
    Ok(worst)
}

/// Game values of the expected time to reach `target` (return time at the
/// target itself).
fn hitting_time_values(model: &SgModel, target: usize) -> Result<Vec<f64>, SgError> {
    let d = model.dims();
    let n = d.states;
    let mut v = vec![0.0; n];
    for iteration in 1..=HITTING_TIME_ITERATION_CAP {
        let next = hitting_stage(model, target, &v)?;
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let top = next.iter().copied().fold(0.0, f64::max);
        v = next;
        if top > HITTING_TIME_VALUE_CAP {
            return Err(SgError::NoConvergence {
                iterations: iteration,
                value: top,
            });
        }
        if delta <= HITTING_TIME_TOL * top.max(1.0) {
            return Ok(v);
        }
    }
    Err(SgError::NoConvergence {
        iterations: HITTING_TIME_ITERATION_CAP,
        value: v.iter().copied().fold(0.0, f64::max),
    })
}

fn hitting_stage(model: &SgModel, target: usize, v: &[f64]) -> Result<Vec<f64>, SgError> {
    let d = model.dims();
    let mut out = Vec::with_capacity(d.states);
    for s in 0..d.states {
        // Rows: Player 2 (maximizer of time); columns: Player 1.
        let mut payoff = Vec::with_capacity(d.joint_actions());
        for a2 in 0..d.actions_p2 {
            for a1 in 0..d.actions_p1 {
                let row = model.next_state_probs(s, a1, a2);
                let cont: f64 = row
                    .iter()
                    .zip(v)
                    .enumerate()
                    .filter(|(k, _)| *k != target)
                    .map(|(_, (p, x))| p * x)
                    .sum();
                payoff.push(1.0 + cont);
            }
        }
        let game = MatrixGame::new(d.actions_p2, d.actions_p1, payoff)?;
        out.push(matgame::value(&game)?);
    }
    Ok(out)
}
