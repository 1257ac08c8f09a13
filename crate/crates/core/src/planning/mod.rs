//! Average-reward maximin planning with the aperiodicity (Schweitzer)
//! transform. The same iteration runs on a known game or on the extended game
//! whose transitions range over a confidence region; a one-player variant
//! computes Player 2's pessimistic response.

mod inner;

pub use inner::{inner_max_transition, inner_min_transition};

use thiserror::Error;

use crate::confidence::ConfidenceRegion;
use crate::exec;
use crate::matgame::{self, MatGameError, MatrixGame};
use crate::sg::{dot, span, Dims, Player, SgError, SgModel, StationaryPolicy};

/// Above this many states the per-state stage solves run on the pool.
pub const PARALLEL_STATE_GRAIN: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid value-iteration config: {0}")]
    InvalidConfig(String),
    #[error("value iteration did not converge after {iterations} iterations (span of increment {final_span})")]
    NoConvergence { iterations: usize, final_span: f64 },
    #[error("confidence cell does not contain its center")]
    InfeasibleRegion,
    #[error(transparent)]
    MatrixGame(#[from] MatGameError),
    #[error(transparent)]
    Model(#[from] SgError),
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ViConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub max_iters: usize,
}

impl Default for ViConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            gamma: 1e-6,
            max_iters: 1_000_000,
        }
    }
}

impl ViConfig {
    pub fn with_gamma(self, gamma: f64) -> Self {
        Self { gamma, ..self }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(PlanError::InvalidConfig(format!(
                "alpha = {} not in (0, 1)",
                self.alpha
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(PlanError::InvalidConfig(format!("gamma = {} not positive", self.gamma)));
        }
        if self.max_iters == 0 {
            return Err(PlanError::InvalidConfig("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    /// Midpoint of `interval`.
    pub rho_star: f64,
    /// `[min_s Δ(s), max_s Δ(s)] / (1 − α)` for the last increment `Δ`.
    pub interval: (f64, f64),
    /// Final iterate.
    pub values: Vec<f64>,
    pub pi1: StationaryPolicy,
    pub iterations: usize,
    /// `span(v_N − v_{N−1})`.
    pub final_span: f64,
    /// `max_i span(v_i)` over all iterates.
    pub max_iterate_span: f64,
}

/// [`PlanResult`] on the extended game plus the kernel chosen by the final
/// stage, i.e. the optimistic model `M_k¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimisticPlan {
    pub plan: PlanResult,
    pub model: SgModel,
}

/// Player 2's pessimistic response to a fixed `π¹` over a kernel set.
#[derive(Clone, Debug, PartialEq)]
pub struct PessimisticPlan {
    /// Midpoint of `interval`.
    pub rho_lower: f64,
    pub interval: (f64, f64),
    pub pi2: StationaryPolicy,
    /// The minimizing kernel of the final stage (`M_k²`).
    pub model: SgModel,
    pub values: Vec<f64>,
    pub iterations: usize,
    pub final_span: f64,
}

/// A set of admissible kernels that can be optimized over one cell at a time.
trait KernelSet: Sync {
    fn dims(&self) -> Dims;
    fn best(&self, cell: usize, v: &[f64]) -> Result<(Vec<f64>, f64), PlanError>;
    fn worst(&self, cell: usize, v: &[f64]) -> Result<(Vec<f64>, f64), PlanError>;
}

impl KernelSet for SgModel {
    fn dims(&self) -> Dims {
        SgModel::dims(self)
    }
    fn best(&self, cell: usize, v: &[f64]) -> Result<(Vec<f64>, f64), PlanError> {
        let row = self.cell_row(cell);
        Ok((row.to_vec(), dot(row, v)))
    }
    fn worst(&self, cell: usize, v: &[f64]) -> Result<(Vec<f64>, f64), PlanError> {
        self.best(cell, v)
    }
}

impl KernelSet for ConfidenceRegion {
    fn dims(&self) -> Dims {
        ConfidenceRegion::dims(self)
    }
    fn best(&self, cell: usize, v: &[f64]) -> Result<(Vec<f64>, f64), PlanError> {
        inner_max_transition(&self.cell(cell), v)
    }
    fn worst(&self, cell: usize, v: &[f64]) -> Result<(Vec<f64>, f64), PlanError> {
        inner_min_transition(&self.cell(cell), v)
    }
}

struct Converged {
    previous: Vec<f64>,
    last: Vec<f64>,
    iterations: usize,
    interval: (f64, f64),
    final_span: f64,
    max_iterate_span: f64,
}

/// `v_i = (1−α) T v_{i−1} + α v_{i−1}` from `v_0 = 0` until
/// `span(v_i − v_{i−1}) ≤ (1−α)γ`.
fn iterate<F>(n: usize, cfg: &ViConfig, stage: F) -> Result<Converged, PlanError>
where
    F: Fn(usize, &[f64]) -> Result<f64, PlanError> + Sync + Send,
{
    cfg.validate()?;
    let a = cfg.alpha;
    let mut prev = vec![0.0; n];
    let mut max_iterate_span: f64 = 0.0;
    let mut inc_span = f64::INFINITY;
    for it in 1..=cfg.max_iters {
        let applied = exec::map_indices_with_grain(n, PARALLEL_STATE_GRAIN, |s| stage(s, &prev));
        let mut next = Vec::with_capacity(n);
        for (s, tv) in applied.into_iter().enumerate() {
            next.push((1.0 - a) * tv? + a * prev[s]);
        }
        let inc: Vec<f64> = next.iter().zip(&prev).map(|(x, y)| x - y).collect();
        inc_span = span(&inc);
        max_iterate_span = max_iterate_span.max(span(&next));
        if inc_span <= (1.0 - a) * cfg.gamma {
            let lo = matgame::min_of(&inc) / (1.0 - a);
            let hi = matgame::max_of(&inc) / (1.0 - a);
            return Ok(Converged {
                previous: prev,
                last: next,
                iterations: it,
                interval: (lo, hi),
                final_span: inc_span,
                max_iterate_span,
            });
        }
        prev = next;
    }
    Err(PlanError::NoConvergence {
        iterations: cfg.max_iters,
        final_span: inc_span,
    })
}

fn check_rewards(d: Dims, rewards: &[f64]) -> Result<(), PlanError> {
    if rewards.len() != d.cells() {
        return Err(SgError::Dimension(format!("expected {} rewards, got {}", d.cells(), rewards.len())).into());
    }
    Ok(())
}

/// Stage game at `s`: rows Player 1, columns Player 2, payoff
/// `r + max_{p ∈ set} p·v`. Also returns the maximizing rows.
fn maximin_stage<K: KernelSet>(
    set: &K,
    rewards: &[f64],
    s: usize,
    v: &[f64],
) -> Result<(MatrixGame, Vec<Vec<f64>>), PlanError> {
    let d = set.dims();
    let mut payoff = Vec::with_capacity(d.joint_actions());
    let mut rows = Vec::with_capacity(d.joint_actions());
    for a1 in 0..d.actions_p1 {
        for a2 in 0..d.actions_p2 {
            let c = d.cell(s, a1, a2);
            let (p, cont) = set.best(c, v)?;
            payoff.push(rewards[c] + cont);
            rows.push(p);
        }
    }
    Ok((MatrixGame::new(d.actions_p1, d.actions_p2, payoff)?, rows))
}

fn maximin<K: KernelSet>(set: &K, rewards: &[f64], cfg: &ViConfig) -> Result<OptimisticPlan, PlanError> {
    let d = set.dims();
    check_rewards(d, rewards)?;
    let conv = iterate(d.states, cfg, |s, v| {
        let (game, _) = maximin_stage(set, rewards, s, v)?;
        Ok(matgame::value(&game)?)
    })?;
    // Policy and kernel from the stage games of the final iteration.
    let mut pi_rows = Vec::with_capacity(d.states);
    let mut kernel = Vec::with_capacity(d.cells() * d.states);
    for s in 0..d.states {
        let (game, rows) = maximin_stage(set, rewards, s, &conv.previous)?;
        pi_rows.push(matgame::solve(&game)?.row_strategy);
        for row in rows {
            kernel.extend(normalized(row));
        }
    }
    let pi1 = StationaryPolicy::from_rows(Player::One, &pi_rows)?;
    let model = SgModel::new(d, rewards.to_vec(), kernel)?;
    Ok(OptimisticPlan {
        plan: PlanResult {
            rho_star: midpoint(conv.interval),
            interval: conv.interval,
            values: conv.last,
            pi1,
            iterations: conv.iterations,
            final_span: conv.final_span,
            max_iterate_span: conv.max_iterate_span,
        },
        model,
    })
}

/// Under fixed `π¹`, Player 2's value at `s` for each action and the
/// minimizing rows per cell.
fn response_stage<K: KernelSet>(
    set: &K,
    rewards: &[f64],
    pi1: &StationaryPolicy,
    s: usize,
    v: &[f64],
) -> Result<(Vec<f64>, Vec<Vec<f64>>), PlanError> {
    let d = set.dims();
    let mut per_action = vec![0.0; d.actions_p2];
    let mut rows = vec![Vec::new(); d.actions_p1 * d.actions_p2];
    let w = pi1.row(s);
    for a1 in 0..d.actions_p1 {
        for (a2, q) in per_action.iter_mut().enumerate() {
            let c = d.cell(s, a1, a2);
            let (p, cont) = set.worst(c, v)?;
            *q += w[a1] * (rewards[c] + cont);
            rows[a1 * d.actions_p2 + a2] = p;
        }
    }
    Ok((per_action, rows))
}

fn first_argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x < xs[best] {
            best = i;
        }
    }
    best
}

fn respond<K: KernelSet>(
    set: &K,
    pi1: &StationaryPolicy,
    rewards: &[f64],
    cfg: &ViConfig,
) -> Result<PessimisticPlan, PlanError> {
    let d = set.dims();
    check_rewards(d, rewards)?;
    if pi1.num_states() != d.states || pi1.num_actions() != d.actions_p1 {
        return Err(SgError::Dimension("Player 1 policy does not match the game".into()).into());
    }
    let conv = iterate(d.states, cfg, |s, v| {
        let (q, _) = response_stage(set, rewards, pi1, s, v)?;
        Ok(matgame::min_of(&q))
    })?;
    let mut actions = Vec::with_capacity(d.states);
    let mut kernel = Vec::with_capacity(d.cells() * d.states);
    for s in 0..d.states {
        let (q, rows) = response_stage(set, rewards, pi1, s, &conv.previous)?;
        actions.push(first_argmin(&q));
        for row in rows {
            kernel.extend(normalized(row));
        }
    }
    Ok(PessimisticPlan {
        rho_lower: midpoint(conv.interval),
        interval: conv.interval,
        pi2: StationaryPolicy::deterministic(Player::Two, &actions, d.actions_p2)?,
        model: SgModel::new(d, rewards.to_vec(), kernel)?,
        values: conv.last,
        iterations: conv.iterations,
        final_span: conv.final_span,
    })
}

fn midpoint((lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) / 2.0
}

/// Divide out rounding drift; exact rows are returned unchanged.
fn normalized(mut row: Vec<f64>) -> Vec<f64> {
    let total: f64 = row.iter().sum();
    if total != 1.0 {
        row.iter_mut().for_each(|x| *x /= total);
    }
    row
}

/// Maximin value iteration on a known game.
pub fn schweitzer_vi(model: &SgModel, cfg: &ViConfig) -> Result<PlanResult, PlanError> {
    maximin(model, model.rewards(), cfg).map(|p| p.plan)
}

/// Maximin value iteration on the extended game in which Player 1 also picks
/// each transition row from `region`.
pub fn maximin_evi(region: &ConfidenceRegion, rewards: &[f64], cfg: &ViConfig) -> Result<OptimisticPlan, PlanError> {
    maximin(region, rewards, cfg)
}

/// Player 2 minimizes the average reward against `pi1`, choosing both its
/// action and each transition row from `region`.
pub fn pessimistic_response_evi(
    region: &ConfidenceRegion,
    pi1: &StationaryPolicy,
    rewards: &[f64],
    cfg: &ViConfig,
) -> Result<PessimisticPlan, PlanError> {
    respond(region, pi1, rewards, cfg)
}

/// Player 2's best response to `pi1` on the true game.
pub fn best_response(model: &SgModel, pi1: &StationaryPolicy, cfg: &ViConfig) -> Result<PessimisticPlan, PlanError> {
    respond(model, pi1, model.rewards(), cfg)
}
