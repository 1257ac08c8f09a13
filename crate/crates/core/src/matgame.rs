//! Zero-sum matrix games.
//!
//! The row player maximizes `pᵀ G q`, the column player minimizes it. Games are
//! solved through the column player's linear program on a strictly positive
//! shift of `G`:
//!
//! ```text
//! maximize Σ y_j  subject to  G' y ≤ 1,  y ≥ 0
//! ```
//!
//! The optimal `y` scaled to the simplex is the column strategy and the dual
//! prices of the `≤` rows give the row strategy. Pivoting uses Bland's rule, so
//! the vertex returned for degenerate games is reproducible.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on probability-vector feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-10;
/// Tolerance on the mutual best-response certificate.
pub const OPTIMALITY_TOL: f64 = 1e-8;
/// Smallest pivot / reduced cost treated as nonzero inside the simplex.
const PIVOT_TOL: f64 = 1e-12;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatGameError {
    #[error("matrix game must have at least one row and one column")]
    Empty,
    #[error("payoff rows have inconsistent lengths")]
    Ragged,
    #[error("payoff entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("simplex failed to terminate after {0} pivots")]
    NumericalFailure(usize),
}

/// Dense payoff matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixGame {
    rows: usize,
    cols: usize,
    payoff: Vec<f64>,
}

impl MatrixGame {
    pub fn new(rows: usize, cols: usize, payoff: Vec<f64>) -> Result<Self, MatGameError> {
        if rows == 0 || cols == 0 {
            return Err(MatGameError::Empty);
        }
        if payoff.len() != rows * cols {
            return Err(MatGameError::Ragged);
        }
        if let Some(k) = payoff.iter().position(|x| !x.is_finite()) {
            return Err(MatGameError::NonFinite {
                row: k / cols,
                col: k % cols,
            });
        }
        Ok(Self { rows, cols, payoff })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MatGameError> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(MatGameError::Ragged);
        }
        Self::new(n, m, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.payoff[i * self.cols + j]
    }

    /// `(pᵀG)_j` for every column.
    pub fn row_mix_payoffs(&self, p: &[f64]) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| p[i] * self.get(i, j)).sum())
            .collect()
    }

    /// `(Gq)_i` for every row.
    pub fn col_mix_payoffs(&self, q: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * q[j]).sum())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSolution {
    pub value: f64,
    /// Row (maximizing) player's optimal mixed strategy.
    pub row_strategy: Vec<f64>,
    /// Column (minimizing) player's optimal mixed strategy.
    pub col_strategy: Vec<f64>,
    /// `max_i (Gq)_i − min_j (pᵀG)_j`; zero for an exact saddle point.
    pub duality_gap: f64,
}

impl GameSolution {
    /// Lower bound guaranteed by the row strategy, `min_j (pᵀG)_j`.
    pub fn row_guarantee(&self, game: &MatrixGame) -> f64 {
        min_of(&game.row_mix_payoffs(&self.row_strategy))
    }

    /// Upper bound guaranteed by the column strategy, `max_i (Gq)_i`.
    pub fn col_guarantee(&self, game: &MatrixGame) -> f64 {
        max_of(&game.col_mix_payoffs(&self.col_strategy))
    }
}

/// Value of the game.
pub fn value(game: &MatrixGame) -> Result<f64, MatGameError> {
    solve(game).map(|s| s.value)
}

/// Solve a zero-sum matrix game exactly.
pub fn solve(game: &MatrixGame) -> Result<GameSolution, MatGameError> {
    let (n, m) = (game.rows, game.cols);
    if n == 1 {
        // Row player has no choice: column player picks the first minimizing column.
        let j = argmin_first(&game.payoff);
        return Ok(finish(game, vec![1.0], unit(m, j)));
    }
    if m == 1 {
        let col: Vec<f64> = (0..n).map(|i| game.get(i, 0)).collect();
        let i = argmax_first(&col);
        return Ok(finish(game, unit(n, i), vec![1.0]));
    }

    let lo = min_of(&game.payoff);
    let shift = 1.0 - lo;
    let (p, q) = simplex_strategies(game, shift)?;
    Ok(finish(game, p, q))
}

fn finish(game: &MatrixGame, row_strategy: Vec<f64>, col_strategy: Vec<f64>) -> GameSolution {
    let lower = min_of(&game.row_mix_payoffs(&row_strategy));
    let upper = max_of(&game.col_mix_payoffs(&col_strategy));
    GameSolution {
        value: 0.5 * (lower + upper),
        row_strategy,
        col_strategy,
        duality_gap: upper - lower,
    }
}

/// Runs the bounded-feasible simplex on `max 1ᵀy, (G+shift) y ≤ 1, y ≥ 0`.
///
/// Tableau layout: `n` constraint rows over `m` structural and `n` slack
/// columns plus the right-hand side; the objective row stores reduced costs
/// `c_j − z_j`.
fn simplex_strategies(game: &MatrixGame, shift: f64) -> Result<(Vec<f64>, Vec<f64>), MatGameError> {
    let (n, m) = (game.rows, game.cols);
    let width = m + n + 1;
    let rhs = m + n;
    let mut tab = vec![0.0; n * width];
    for i in 0..n {
        for j in 0..m {
            tab[i * width + j] = game.get(i, j) + shift;
        }
        tab[i * width + m + i] = 1.0;
        tab[i * width + rhs] = 1.0;
    }
    let mut reduced = vec![0.0; m + n];
    reduced[..m].iter_mut().for_each(|c| *c = 1.0);
    let mut objective = 0.0;
    let mut basis: Vec<usize> = (m..m + n).collect();

    let mut pivots = 0;
    // Bland: lowest-index column with positive reduced cost enters.
    while let Some(enter) = (0..m + n).find(|&j| reduced[j] > PIVOT_TOL) {
        // Ratio test, ties resolved by the lowest basic variable index.
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..n {
            let a = tab[i * width + enter];
            if a > PIVOT_TOL {
                let ratio = tab[i * width + rhs] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        if ratio < best - PIVOT_TOL || (ratio <= best + PIVOT_TOL && basis[i] < basis[r]) {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
        }
        // The feasible region is bounded because every entry of G' is positive.
        let Some((row, _)) = leave else {
            return Err(MatGameError::NumericalFailure(pivots));
        };

        let piv = tab[row * width + enter];
        for k in 0..width {
            tab[row * width + k] /= piv;
        }
        for i in 0..n {
            if i != row {
                let factor = tab[i * width + enter];
                if factor != 0.0 {
                    for k in 0..width {
                        tab[i * width + k] -= factor * tab[row * width + k];
                    }
                }
            }
        }
        let factor = reduced[enter];
        for k in 0..m + n {
            reduced[k] -= factor * tab[row * width + k];
        }
        objective += factor * tab[row * width + rhs];
        basis[row] = enter;

        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(MatGameError::NumericalFailure(pivots));
        }
    }

    if objective <= 0.0 {
        return Err(MatGameError::NumericalFailure(pivots));
    }
    let mut y = vec![0.0; m];
    for (i, &b) in basis.iter().enumerate() {
        if b < m {
            y[b] = tab[i * width + rhs].max(0.0);
        }
    }
    // Dual prices sit in the slack columns' reduced costs with flipped sign.
    let x: Vec<f64> = (0..n).map(|i| (-reduced[m + i]).max(0.0)).collect();
    Ok((normalize(x), normalize(y)))
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    } else {
        let k = v.len();
        v.iter_mut().for_each(|x| *x = 1.0 / k as f64);
    }
    v
}

fn unit(len: usize, at: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[at] = 1.0;
    v
}

fn argmin_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = k;
        }
    }
    best
}

fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = k;
        }
    }
    best
}

pub(crate) fn min_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

pub(crate) fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
