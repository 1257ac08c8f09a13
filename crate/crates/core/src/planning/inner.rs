//! Linear optimization of `p·v` over one confidence cell.
//!
//! The feasible set is `{p ∈ Δ : ‖p − p̂‖₁ ≤ r, lo ≤ p ≤ hi}`. Moving mass
//! from a coordinate with smaller `v` to one with larger `v` changes the
//! objective by the difference times the amount, so the optimum fills the
//! best receivers from the worst donors until the L1 budget `r/2` of moved
//! mass, the boxes, or the ordering is exhausted.

use super::PlanError;
use crate::confidence::CellRegion;
use crate::sg::dot;

/// Slack for the feasibility sanity check on a cell.
const FEASIBILITY_SLACK: f64 = 1e-9;

/// `argmax_{p ∈ cell} p·v` and its value.
pub fn inner_max_transition(cell: &CellRegion<'_>, v: &[f64]) -> Result<(Vec<f64>, f64), PlanError> {
    let order = sorted_indices(v, true);
    transfer(cell, v, &order)
}

/// `argmin_{p ∈ cell} p·v` and its value.
pub fn inner_min_transition(cell: &CellRegion<'_>, v: &[f64]) -> Result<(Vec<f64>, f64), PlanError> {
    let order = sorted_indices(v, false);
    transfer(cell, v, &order)
}

/// Indices ordered from most to least desirable; ties keep index order.
fn sorted_indices(v: &[f64], descending: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    if descending {
        idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    } else {
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    }
    idx
}

fn check_cell(cell: &CellRegion<'_>) -> Result<(), PlanError> {
    let inside = cell
        .phat
        .iter()
        .zip(cell.lo.iter().zip(cell.hi))
        .all(|(p, (l, h))| l - FEASIBILITY_SLACK <= *p && *p <= h + FEASIBILITY_SLACK);
    let total: f64 = cell.phat.iter().sum();
    if !inside || (total - 1.0).abs() > FEASIBILITY_SLACK || cell.l1_radius < 0.0 {
        return Err(PlanError::InfeasibleRegion);
    }
    Ok(())
}

fn transfer(cell: &CellRegion<'_>, v: &[f64], order: &[usize]) -> Result<(Vec<f64>, f64), PlanError> {
    check_cell(cell)?;
    let mut p = cell.phat.to_vec();
    let mut budget = cell.l1_radius / 2.0;
    let (mut top, mut bottom) = (0, order.len().saturating_sub(1));
    while budget > 0.0 && top < bottom {
        let (i, j) = (order[top], order[bottom]);
        if v[i] == v[j] {
            break;
        }
        let room = (cell.hi[i] - p[i]).max(0.0);
        let spare = (p[j] - cell.lo[j]).max(0.0);
        let amount = budget.min(room).min(spare);
        if amount > 0.0 {
            p[i] += amount;
            p[j] -= amount;
            budget -= amount;
        }
        if amount >= room {
            top += 1;
        }
        if amount >= spare {
            bottom -= 1;
        }
        if amount < room && amount < spare {
            break;
        }
    }
    let value = dot(&p, v);
    Ok((p, value))
}
