use serde::{Deserialize, Serialize};

use super::SgError;

/// Tolerance on transition row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Sizes of a tabular game.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub states: usize,
    pub actions_p1: usize,
    pub actions_p2: usize,
}

impl Dims {
    pub fn new(states: usize, actions_p1: usize, actions_p2: usize) -> Self {
        Self {
            states,
            actions_p1,
            actions_p2,
        }
    }

    /// Number of joint actions `A = |A¹|·|A²|`.
    pub fn joint_actions(&self) -> usize {
        self.actions_p1 * self.actions_p2
    }

    /// Number of `(s, a1, a2)` cells.
    pub fn cells(&self) -> usize {
        self.states * self.joint_actions()
    }

    #[inline]
    pub fn cell(&self, s: usize, a1: usize, a2: usize) -> usize {
        (s * self.actions_p1 + a1) * self.actions_p2 + a2
    }

    /// Inverse of [`Dims::cell`].
    pub fn cell_coords(&self, cell: usize) -> (usize, usize, usize) {
        let a2 = cell % self.actions_p2;
        let rest = cell / self.actions_p2;
        (rest / self.actions_p1, rest % self.actions_p1, a2)
    }

    fn validate(&self) -> Result<(), SgError> {
        if self.states == 0 || self.actions_p1 == 0 || self.actions_p2 == 0 {
            return Err(SgError::Dimension(format!(
                "sizes must be positive, got S={} A1={} A2={}",
                self.states, self.actions_p1, self.actions_p2
            )));
        }
        Ok(())
    }
}

/// A two-player zero-sum stochastic game with deterministic rewards.
///
/// Rewards are stored per cell `(s, a1, a2)` and transition rows per cell with
/// `S` entries each, both in [`Dims::cell`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct SgModel {
    dims: Dims,
    rewards: Vec<f64>,
    transitions: Vec<f64>,
}

impl SgModel {
    pub fn new(dims: Dims, rewards: Vec<f64>, transitions: Vec<f64>) -> Result<Self, SgError> {
        dims.validate()?;
        if rewards.len() != dims.cells() {
            return Err(SgError::Dimension(format!(
                "expected {} rewards, got {}",
                dims.cells(),
                rewards.len()
            )));
        }
        if transitions.len() != dims.cells() * dims.states {
            return Err(SgError::Dimension(format!(
                "expected {} transition entries, got {}",
                dims.cells() * dims.states,
                transitions.len()
            )));
        }
        for cell in 0..dims.cells() {
            let (s, a1, a2) = dims.cell_coords(cell);
            let r = rewards[cell];
            if !(0.0..=1.0).contains(&r) {
                return Err(SgError::InvalidCell {
                    s,
                    a1,
                    a2,
                    reason: format!("reward {r} outside [0, 1]"),
                });
            }
            check_row(&transitions[cell * dims.states..(cell + 1) * dims.states])
                .map_err(|reason| SgError::InvalidCell { s, a1, a2, reason })?;
        }
        Ok(Self {
            dims,
            rewards,
            transitions,
        })
    }

    /// Build from nested `[s][a1][a2]` rewards and `[s][a1][a2][s']` kernels.
    pub fn from_nested(rewards: &[Vec<Vec<f64>>], transitions: &[Vec<Vec<Vec<f64>>>]) -> Result<Self, SgError> {
        let s = rewards.len();
        let a1 = rewards.first().map_or(0, Vec::len);
        let a2 = rewards.first().and_then(|r| r.first()).map_or(0, Vec::len);
        let dims = Dims::new(s, a1, a2);
        let shape_err = || SgError::Dimension("ragged nested arrays".into());
        if transitions.len() != s {
            return Err(shape_err());
        }
        let mut flat_r = Vec::with_capacity(dims.cells());
        let mut flat_p = Vec::with_capacity(dims.cells() * s);
        for (rs, ps) in rewards.iter().zip(transitions) {
            if rs.len() != a1 || ps.len() != a1 {
                return Err(shape_err());
            }
            for (ra, pa) in rs.iter().zip(ps) {
                if ra.len() != a2 || pa.len() != a2 {
                    return Err(shape_err());
                }
                flat_r.extend_from_slice(ra);
                for row in pa {
                    if row.len() != s {
                        return Err(shape_err());
                    }
                    flat_p.extend_from_slice(row);
                }
            }
        }
        Self::new(dims, flat_r, flat_p)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn num_states(&self) -> usize {
        self.dims.states
    }

    #[inline]
    pub fn reward(&self, s: usize, a1: usize, a2: usize) -> f64 {
        self.rewards[self.dims.cell(s, a1, a2)]
    }

    /// `p(·|s, a1, a2)`.
    #[inline]
    pub fn next_state_probs(&self, s: usize, a1: usize, a2: usize) -> &[f64] {
        let c = self.dims.cell(s, a1, a2);
        &self.transitions[c * self.dims.states..(c + 1) * self.dims.states]
    }

    #[inline]
    pub fn cell_row(&self, cell: usize) -> &[f64] {
        &self.transitions[cell * self.dims.states..(cell + 1) * self.dims.states]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    /// Same rewards, different kernel (e.g. an optimistic model picked from a
    /// confidence set).
    pub fn with_transitions(&self, transitions: Vec<f64>) -> Result<SgModel, SgError> {
        SgModel::new(self.dims, self.rewards.clone(), transitions)
    }
}

fn check_row(row: &[f64]) -> Result<(), String> {
    if let Some(x) = row.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(format!("transition probability {x} is negative or not finite"));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > ROW_SUM_TOL {
        return Err(format!("transition row sums to {total}"));
    }
    Ok(())
}
