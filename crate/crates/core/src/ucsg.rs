//! The optimistic phase-based learner, in the online (regret) and offline
//! (maximin policy with certificate) settings.
//!
//! A phase plans on the extended game over the current confidence region with
//! accuracy `γ_k = 1/√t_k`. It then plays the resulting stationary policy
//! until some cell's within-phase count reaches its phase-start count.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::confidence::{ConfidenceRegion, Counts};
use crate::opponents::{extract_pibar, History, Opponent, OpponentSpec};
use crate::planning::{
    best_response, maximin_evi, pessimistic_response_evi, schweitzer_vi, OptimisticPlan, PessimisticPlan, PlanError,
    ViConfig,
};
use crate::sg::enumerate::{policy_count, worst_case_response};
use crate::sg::{gain_vector, induce_mrp, Dims, SgError, SgModel, StationaryPolicy};

/// Accuracy used for the reference value `ρ*` of regret accounting.
pub const REFERENCE_GAMMA: f64 = 1e-8;

/// Above this many Player 2 policies exact best responses use value
/// iteration instead of enumeration.
pub const EXACT_RESPONSE_ENUMERATION_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Online,
    Offline,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Online => "online",
            Mode::Offline => "offline",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "online" => Ok(Mode::Online),
            "offline" => Ok(Mode::Offline),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: u64,
    pub delta: f64,
    pub mode: Mode,
    pub seed: u64,
    #[serde(default)]
    pub vi: ViConfig,
    #[serde(default)]
    pub initial_state: usize,
    #[serde(default = "default_opponent")]
    pub opponent: OpponentSpec,
    #[serde(default)]
    pub epsilons: Vec<f64>,
}

fn default_opponent() -> OpponentSpec {
    OpponentSpec::BestResponse
}

impl RunConfig {
    pub fn new(horizon: u64, delta: f64, mode: Mode, seed: u64) -> Self {
        Self {
            horizon,
            delta,
            mode,
            seed,
            vi: ViConfig::default(),
            initial_state: 0,
            opponent: default_opponent(),
            epsilons: Vec::new(),
        }
    }

    pub fn validate(&self, dims: Dims) -> Result<(), String> {
        if self.horizon < 1 {
            return Err("horizon must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(format!("delta = {} not in (0, 1)", self.delta));
        }
        if self.initial_state >= dims.states {
            return Err(format!("initial state {} out of range", self.initial_state));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(format!("epsilon {e} not in (0, 1)"));
        }
        self.vi.validate().map_err(|e| e.to_string())
    }
}

/// Column-wise log of every step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions_p1: Vec<usize>,
    pub actions_p2: Vec<usize>,
    pub rewards: Vec<f64>,
    /// 1-indexed phase of each step.
    pub phases: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Offline-only quantities of a phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OfflinePhase {
    pub pi2: StationaryPolicy,
    /// Estimate returned by the pessimistic planner.
    pub rho_lower: f64,
    /// `ρ(M_k², π_k¹, π_k², s_{t_k})`, exact.
    pub pessimistic_rho: f64,
    /// `optimistic_rho − pessimistic_rho + 2γ_k`.
    pub u: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    /// 1-indexed.
    pub k: usize,
    /// 1-indexed first step.
    pub t_k: u64,
    pub length: u64,
    pub start_state: usize,
    pub gamma: f64,
    pub pi1: StationaryPolicy,
    /// Estimate and interval returned by the optimistic planner.
    pub evi_rho: f64,
    pub evi_interval: (f64, f64),
    pub evi_iterations: usize,
    /// `min_{π²} ρ(M_k¹, π_k¹, π², s_{t_k})`, exact.
    pub optimistic_rho: f64,
    pub true_model_in_region: bool,
    /// `min_{π²} ρ(M, π_k¹, π², s)` on the true game, per start state.
    pub true_worst_case: Vec<f64>,
    pub offline: Option<OfflinePhase>,
    /// Per-state average of Player 2's distributions in this phase.
    pub pibar: Option<StationaryPolicy>,
}

impl PhaseRecord {
    /// Worst start state of [`PhaseRecord::true_worst_case`].
    pub fn true_worst(&self) -> f64 {
        self.true_worst_case.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestPolicy {
    pub phase: usize,
    pub policy: StationaryPolicy,
    pub u: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub horizon: u64,
    pub seed: u64,
    pub rho_star: f64,
    pub rho_star_interval: (f64, f64),
    pub total_reward: f64,
    /// `T·ρ* − Σ r_t` over the steps actually played.
    pub regret: f64,
    pub trajectory: Trajectory,
    pub phases: Vec<PhaseRecord>,
    /// Offline: the phase policy with the smallest certificate.
    pub best_policy: Option<BestPolicy>,
    /// `(ε, L_ε)` pairs, in the order requested.
    pub l_eps: Vec<(f64, u64)>,
}

impl RunReport {
    pub fn phase_count_bound(&self, dims: Dims) -> f64 {
        phase_count_bound(dims, self.horizon)
    }
}

/// `S·A·log₂T`.
pub fn phase_count_bound(dims: Dims, horizon: u64) -> f64 {
    dims.cells() as f64 * (horizon.max(2) as f64).log2()
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("run aborted at phase {}: {reason}", partial.phases.len() + 1)]
    Aborted { reason: String, partial: Box<RunReport> },
}

/// `L_ε = Σ_k T_k 1{ρ* − w_k > ε}` with `w_k` the exact worst case of phase k.
pub fn l_epsilon(rho_star: f64, phases: &[PhaseRecord], eps: f64) -> u64 {
    phases
        .iter()
        .filter(|p| rho_star - p.true_worst() > eps)
        .map(|p| p.length)
        .sum()
}

/// `min_{π²} ρ(model, π¹, π², ·)`: enumeration for small games, otherwise an
/// exactly evaluated value-iteration best response.
pub fn exact_worst_case(model: &SgModel, pi1: &StationaryPolicy) -> Result<Vec<f64>, RunError> {
    let d = model.dims();
    let fail = |e: String| RunError::InvalidConfig(e);
    if policy_count(d.states, d.actions_p2, EXACT_RESPONSE_ENUMERATION_LIMIT).is_ok() {
        return worst_case_response(model, pi1)
            .map(|r| r.values)
            .map_err(|e| fail(e.to_string()));
    }
    let cfg = ViConfig::default().with_gamma(REFERENCE_GAMMA);
    let pi2 = best_response(model, pi1, &cfg).map_err(|e| fail(e.to_string()))?.pi2;
    induce_mrp(model, pi1, &pi2)
        .and_then(|m| gain_vector(&m))
        .map_err(|e| fail(e.to_string()))
}

/// `min_{π²} ρ(M_k¹, π_k¹, π², s)`: the exact value the optimistic pair guarantees from `s`.
pub fn optimistic_value(optimistic: &OptimisticPlan, s: usize) -> Result<f64, RunError> {
    Ok(exact_worst_case(&optimistic.model, &optimistic.plan.pi1)?[s])
}

/// `u_k = optimistic − ρ(M_k², π_k¹, π_k², s) + 2γ_k`, both values exact.
pub fn offline_certificate(
    optimistic_rho: f64,
    pi1: &StationaryPolicy,
    pessimistic: PessimisticPlan,
    gamma: f64,
    s: usize,
) -> Result<OfflinePhase, SgError> {
    let pessimistic_rho = gain_vector(&induce_mrp(&pessimistic.model, pi1, &pessimistic.pi2)?)?[s];
    Ok(OfflinePhase {
        u: optimistic_rho - pessimistic_rho + 2.0 * gamma,
        pi2: pessimistic.pi2,
        rho_lower: pessimistic.rho_lower,
        pessimistic_rho,
    })
}

/// Index drawn from `dist` by inverting its cumulative sum.
fn sample(rng: &mut ChaCha8Rng, dist: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

enum Player2<'a> {
    Opponent(&'a mut dyn Opponent),
    Pessimistic,
}

/// Online run against `opponent`.
pub fn run_online(model: &SgModel, opponent: &mut dyn Opponent, cfg: &RunConfig) -> Result<RunReport, RunError> {
    run_with(model, Player2::Opponent(opponent), Mode::Online, cfg)
}

/// Offline run: Player 2 plays the pessimistic response of each phase.
pub fn run_offline(model: &SgModel, cfg: &RunConfig) -> Result<RunReport, RunError> {
    run_with(model, Player2::Pessimistic, Mode::Offline, cfg)
}

/// Dispatch on `cfg.mode`, building the online opponent from `cfg.opponent`.
pub fn run(model: &SgModel, cfg: &RunConfig) -> Result<RunReport, RunError> {
    match cfg.mode {
        Mode::Online => {
            let mut opp = cfg.opponent.build(model).map_err(RunError::InvalidConfig)?;
            run_online(model, opp.as_mut(), cfg)
        }
        Mode::Offline => run_offline(model, cfg),
    }
}

struct Learner<'a> {
    model: &'a SgModel,
    cfg: &'a RunConfig,
    report: RunReport,
}

impl Learner<'_> {
    fn abort(self, reason: impl ToString) -> RunError {
        let mut partial = self.report;
        partial.total_reward = partial.trajectory.rewards.iter().sum();
        partial.regret = partial.trajectory.len() as f64 * partial.rho_star - partial.total_reward;
        RunError::Aborted {
            reason: reason.to_string(),
            partial: Box::new(partial),
        }
    }
}

fn run_with(model: &SgModel, mut player2: Player2<'_>, mode: Mode, cfg: &RunConfig) -> Result<RunReport, RunError> {
    let dims = model.dims();
    cfg.validate(dims).map_err(RunError::InvalidConfig)?;
    let reference = schweitzer_vi(model, &cfg.vi.with_gamma(REFERENCE_GAMMA))
        .map_err(|e| RunError::InvalidConfig(format!("reference value: {e}")))?;
    let mut learner = Learner {
        model,
        cfg,
        report: RunReport {
            mode,
            horizon: cfg.horizon,
            seed: cfg.seed,
            rho_star: reference.rho_star,
            rho_star_interval: reference.interval,
            total_reward: 0.0,
            regret: 0.0,
            trajectory: Trajectory::default(),
            phases: Vec::new(),
            best_policy: None,
            l_eps: Vec::new(),
        },
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counts = Counts::new(dims);
    let mut state = cfg.initial_state;
    let mut t: u64 = 1;
    while t <= cfg.horizon {
        match play_phase(&mut learner, &mut player2, &mut rng, &mut counts, &mut state, t) {
            Ok(next_t) => t = next_t,
            Err(e) => return Err(learner.abort(e)),
        }
    }

    let mut report = learner.report;
    report.total_reward = report.trajectory.rewards.iter().sum();
    report.regret = cfg.horizon as f64 * report.rho_star - report.total_reward;
    report.l_eps = cfg
        .epsilons
        .iter()
        .map(|&e| (e, l_epsilon(report.rho_star, &report.phases, e)))
        .collect();
    if mode == Mode::Offline {
        report.best_policy = report
            .phases
            .iter()
            .filter_map(|p| p.offline.as_ref().map(|o| (p, o.u)))
            .fold(None, |best: Option<(&PhaseRecord, f64)>, (p, u)| match best {
                Some((_, bu)) if bu <= u => best,
                _ => Some((p, u)),
            })
            .map(|(p, u)| BestPolicy {
                phase: p.k,
                policy: p.pi1.clone(),
                u,
            });
    }
    Ok(report)
}

#[derive(Debug, Error)]
enum PhaseError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Model(#[from] SgError),
    #[error("{0}")]
    Eval(String),
}

/// Plays one phase starting at step `t_k`; returns the first step of the next.
fn play_phase(
    learner: &mut Learner<'_>,
    player2: &mut Player2<'_>,
    rng: &mut ChaCha8Rng,
    counts: &mut Counts,
    state: &mut usize,
    t_k: u64,
) -> Result<u64, PhaseError> {
    let (model, cfg) = (learner.model, learner.cfg);
    let k = learner.report.phases.len() + 1;
    counts.start_phase(t_k);
    let region = ConfidenceRegion::build(counts, cfg.delta, cfg.horizon);
    let gamma = 1.0 / (t_k as f64).sqrt();
    let vi = cfg.vi.with_gamma(gamma);
    let optimistic = maximin_evi(&region, model.rewards(), &vi)?;
    let pi1 = optimistic.plan.pi1.clone();
    let pessimistic = match player2 {
        Player2::Opponent(opp) => {
            opp.on_phase_start(&pi1)?;
            None
        }
        Player2::Pessimistic => Some(pessimistic_response_evi(&region, &pi1, model.rewards(), &vi)?),
    };

    let start_state = *state;
    let first = learner.report.trajectory.len();
    let mut pi2_log = Vec::new();
    let mut t = t_k;
    loop {
        let traj = &learner.report.trajectory;
        let d2 = match (&mut *player2, &pessimistic) {
            (Player2::Opponent(opp), _) => opp.act(&History {
                t,
                state: *state,
                states: &traj.states,
                actions_p1: &traj.actions_p1,
                actions_p2: &traj.actions_p2,
                rewards: &traj.rewards,
            }),
            (Player2::Pessimistic, Some(p)) => p.pi2.row(*state).to_vec(),
            (Player2::Pessimistic, None) => unreachable!("offline phase without a response"),
        };
        let a1 = sample(rng, pi1.row(*state));
        let a2 = sample(rng, &d2);
        let r = model.reward(*state, a1, a2);
        let next = sample(rng, model.next_state_probs(*state, a1, a2));
        let traj = &mut learner.report.trajectory;
        traj.states.push(*state);
        traj.actions_p1.push(a1);
        traj.actions_p2.push(a2);
        traj.rewards.push(r);
        traj.phases.push(k);
        pi2_log.push(d2);
        let doubled = counts.observe(*state, a1, a2, next);
        *state = next;
        t += 1;
        if doubled || t > cfg.horizon {
            break;
        }
    }

    let optimistic_rho = optimistic_value(&optimistic, start_state).map_err(|e| PhaseError::Eval(e.to_string()))?;
    let true_worst_case = exact_worst_case(model, &pi1).map_err(|e| PhaseError::Eval(e.to_string()))?;
    let offline = match pessimistic {
        Some(p) => Some(offline_certificate(optimistic_rho, &pi1, p, gamma, start_state)?),
        None => None,
    };
    let pibar = extract_pibar(&learner.report.trajectory.states[first..], &pi2_log, model.num_states());
    log::debug!(
        "phase {k}: t_k={t_k} length={} evi_rho={:.6} optimistic={optimistic_rho:.6}",
        t - t_k,
        optimistic.plan.rho_star
    );
    learner.report.phases.push(PhaseRecord {
        k,
        t_k,
        length: t - t_k,
        start_state,
        gamma,
        pi1,
        evi_rho: optimistic.plan.rho_star,
        evi_interval: optimistic.plan.interval,
        evi_iterations: optimistic.plan.iterations,
        optimistic_rho,
        true_model_in_region: region.contains(model),
        true_worst_case,
        offline,
        pibar,
    });
    Ok(t)
}
