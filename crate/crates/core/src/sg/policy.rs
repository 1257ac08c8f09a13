use serde::{Deserialize, Serialize};

use super::{SgError, ROW_SUM_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    /// The maximizer (the learner).
    One,
    /// The minimizer (the opponent).
    Two,
}

/// A per-state distribution over one player's actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryPolicy {
    owner: Player,
    num_actions: usize,
    probs: Vec<f64>,
}

impl StationaryPolicy {
    pub fn new(owner: Player, num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self, SgError> {
        if num_states == 0 || num_actions == 0 || probs.len() != num_states * num_actions {
            return Err(SgError::Dimension(format!(
                "policy needs {num_states}x{num_actions} probabilities, got {}",
                probs.len()
            )));
        }
        for (state, row) in probs.chunks(num_actions).enumerate() {
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(SgError::InvalidPolicy {
                    state,
                    reason: "negative or non-finite probability".into(),
                });
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_SUM_TOL {
                return Err(SgError::InvalidPolicy {
                    state,
                    reason: format!("row sums to {total}"),
                });
            }
        }
        Ok(Self {
            owner,
            num_actions,
            probs,
        })
    }

    pub fn from_rows(owner: Player, rows: &[Vec<f64>]) -> Result<Self, SgError> {
        let a = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != a) {
            return Err(SgError::Dimension("ragged policy rows".into()));
        }
        Self::new(owner, rows.len(), a, rows.concat())
    }

    pub fn uniform(owner: Player, num_states: usize, num_actions: usize) -> Self {
        Self {
            owner,
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    /// Point masses on `actions[s]`.
    pub fn deterministic(owner: Player, actions: &[usize], num_actions: usize) -> Result<Self, SgError> {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(SgError::InvalidPolicy {
                    state: s,
                    reason: format!("action {a} out of range"),
                });
            }
            probs[s * num_actions + a] = 1.0;
        }
        Self::new(owner, actions.len(), num_actions, probs)
    }

    pub fn owner(&self) -> Player {
        self.owner
    }

    pub fn num_states(&self) -> usize {
        self.probs.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn is_deterministic(&self) -> bool {
        self.probs.iter().all(|&p| p == 0.0 || p == 1.0)
    }

    /// Largest coordinatewise difference to another policy of the same shape.
    pub fn max_abs_diff(&self, other: &StationaryPolicy) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_rows() {
        let p = StationaryPolicy::deterministic(Player::One, &[1, 0], 2).unwrap();
        assert_eq!(p.row(0), &[0.0, 1.0]);
        assert_eq!(p.row(1), &[1.0, 0.0]);
        assert!(p.is_deterministic());
    }

    #[test]
    fn rejects_unnormalized_row() {
        let err = StationaryPolicy::new(Player::Two, 2, 2, vec![0.5, 0.5, 0.2, 0.2]).unwrap_err();
        assert!(matches!(err, SgError::InvalidPolicy { state: 1, .. }));
    }
}
