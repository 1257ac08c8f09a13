//! Player 2 strategies for online runs.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::planning::{best_response, PlanError, ViConfig};
use crate::sg::{Player, SgModel, StationaryPolicy};

/// Accuracy of the best-response adversary's value iteration.
pub const BEST_RESPONSE_GAMMA: f64 = 1e-8;

/// Everything observed before the current step.
#[derive(Clone, Copy, Debug)]
pub struct History<'a> {
    /// 1-indexed current step.
    pub t: u64,
    pub state: usize,
    /// Past states, actions and rewards, oldest first.
    pub states: &'a [usize],
    pub actions_p1: &'a [usize],
    pub actions_p2: &'a [usize],
    pub rewards: &'a [f64],
}

pub trait Opponent: Send {
    /// Called whenever the learner commits to a new stationary policy.
    fn on_phase_start(&mut self, _pi1: &StationaryPolicy) -> Result<(), PlanError> {
        Ok(())
    }

    /// Distribution over Player 2's actions at `history.state`.
    fn act(&mut self, history: &History<'_>) -> Vec<f64>;
}

/// Plays a fixed stationary policy.
#[derive(Clone, Debug)]
pub struct StationaryOpponent {
    pub policy: StationaryPolicy,
}

impl Opponent for StationaryOpponent {
    fn act(&mut self, h: &History<'_>) -> Vec<f64> {
        self.policy.row(h.state).to_vec()
    }
}

/// Knows the true game and the learner's current policy, and plays the
/// minimizing stationary response, recomputed once per learner phase.
#[derive(Clone, Debug)]
pub struct BestResponseOpponent {
    model: SgModel,
    cfg: ViConfig,
    response: StationaryPolicy,
}

impl BestResponseOpponent {
    pub fn new(model: SgModel) -> Self {
        let d = model.dims();
        Self {
            response: StationaryPolicy::uniform(Player::Two, d.states, d.actions_p2),
            cfg: ViConfig::default().with_gamma(BEST_RESPONSE_GAMMA),
            model,
        }
    }

    pub fn response(&self) -> &StationaryPolicy {
        &self.response
    }
}

impl Opponent for BestResponseOpponent {
    fn on_phase_start(&mut self, pi1: &StationaryPolicy) -> Result<(), PlanError> {
        self.response = best_response(&self.model, pi1, &self.cfg)?.pi2;
        Ok(())
    }

    fn act(&mut self, h: &History<'_>) -> Vec<f64> {
        self.response.row(h.state).to_vec()
    }
}

/// Follows a time schedule of stationary policies.
#[derive(Clone, Debug)]
pub struct SwitchingOpponent {
    /// `(first step, policy)`, sorted by first step; the first entry starts at 1.
    schedule: Vec<(u64, StationaryPolicy)>,
    /// If set, the schedule repeats with this period.
    cycle: Option<u64>,
}

impl SwitchingOpponent {
    /// Policy `k` is used from step `schedule[k].0` until the next entry.
    pub fn new(mut schedule: Vec<(u64, StationaryPolicy)>) -> Self {
        assert!(!schedule.is_empty(), "empty switching schedule");
        schedule.sort_by_key(|(t, _)| *t);
        schedule[0].0 = 1;
        Self { schedule, cycle: None }
    }

    /// Cycle through `policies`, switching every `period` steps.
    pub fn periodic(policies: Vec<StationaryPolicy>, period: u64) -> Self {
        assert!(period > 0 && !policies.is_empty(), "bad periodic schedule");
        let n = policies.len() as u64;
        let schedule = policies
            .into_iter()
            .enumerate()
            .map(|(k, p)| (1 + k as u64 * period, p))
            .collect();
        Self {
            schedule,
            cycle: Some(n * period),
        }
    }

    fn current(&self, t: u64) -> &StationaryPolicy {
        let t = match self.cycle {
            Some(c) => (t - 1) % c + 1,
            None => t,
        };
        let k = self.schedule.partition_point(|(start, _)| *start <= t);
        &self.schedule[k.saturating_sub(1)].1
    }
}

impl Opponent for SwitchingOpponent {
    fn act(&mut self, h: &History<'_>) -> Vec<f64> {
        self.current(h.t).row(h.state).to_vec()
    }
}

/// Draws a fresh flat-Dirichlet distribution at every step.
#[derive(Clone, Debug)]
pub struct RandomOpponent {
    rng: ChaCha8Rng,
    actions: usize,
}

impl RandomOpponent {
    pub fn new(actions: usize, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            actions,
        }
    }
}

impl Opponent for RandomOpponent {
    fn act(&mut self, _h: &History<'_>) -> Vec<f64> {
        let w: Vec<f64> = (0..self.actions).map(|_| Exp1.sample(&mut self.rng)).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }
}

/// Textual opponent description: `uniform`, `fixed:<a>`, `best-response`,
/// `random:<seed>` or `switching:<period>` (constant actions in turn).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum OpponentSpec {
    Uniform,
    Fixed(usize),
    BestResponse,
    Random(u64),
    Switching(u64),
}

impl OpponentSpec {
    pub fn build(&self, model: &SgModel) -> Result<Box<dyn Opponent>, String> {
        let d = model.dims();
        let constant = |a: usize| {
            StationaryPolicy::deterministic(Player::Two, &vec![a; d.states], d.actions_p2).map_err(|e| e.to_string())
        };
        Ok(match *self {
            OpponentSpec::Uniform => Box::new(StationaryOpponent {
                policy: StationaryPolicy::uniform(Player::Two, d.states, d.actions_p2),
            }),
            OpponentSpec::Fixed(a) => Box::new(StationaryOpponent { policy: constant(a)? }),
            OpponentSpec::BestResponse => Box::new(BestResponseOpponent::new(model.clone())),
            OpponentSpec::Random(seed) => Box::new(RandomOpponent::new(d.actions_p2, seed)),
            OpponentSpec::Switching(period) => {
                if period == 0 {
                    return Err("switching period must be positive".into());
                }
                let policies = (0..d.actions_p2).map(constant).collect::<Result<_, _>>()?;
                Box::new(SwitchingOpponent::periodic(policies, period))
            }
        })
    }
}

impl fmt::Display for OpponentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpponentSpec::Uniform => write!(f, "uniform"),
            OpponentSpec::Fixed(a) => write!(f, "fixed:{a}"),
            OpponentSpec::BestResponse => write!(f, "best-response"),
            OpponentSpec::Random(s) => write!(f, "random:{s}"),
            OpponentSpec::Switching(p) => write!(f, "switching:{p}"),
        }
    }
}

impl FromStr for OpponentSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let number = |what: &str| -> Result<u64, String> {
            arg.ok_or_else(|| format!("`{kind}` needs a {what}"))?
                .parse()
                .map_err(|e| format!("bad {what} in `{s}`: {e}"))
        };
        match (kind, arg) {
            ("uniform", None) => Ok(OpponentSpec::Uniform),
            ("best-response", None) => Ok(OpponentSpec::BestResponse),
            ("fixed", _) => Ok(OpponentSpec::Fixed(number("action")? as usize)),
            ("random", _) => Ok(OpponentSpec::Random(number("seed")?)),
            ("switching", _) => Ok(OpponentSpec::Switching(number("period")?)),
            _ => Err(format!("unknown opponent `{s}`")),
        }
    }
}

impl TryFrom<String> for OpponentSpec {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<OpponentSpec> for String {
    fn from(o: OpponentSpec) -> String {
        o.to_string()
    }
}

/// Per-state average of the logged Player 2 distributions, or `None` if some
/// state was never visited in the slice.
pub fn extract_pibar(states: &[usize], pi2_log: &[Vec<f64>], num_states: usize) -> Option<StationaryPolicy> {
    let actions = pi2_log.first()?.len();
    let mut sums = vec![0.0; num_states * actions];
    let mut visits = vec![0u64; num_states];
    for (&s, dist) in states.iter().zip(pi2_log) {
        visits[s] += 1;
        for (acc, p) in sums[s * actions..(s + 1) * actions].iter_mut().zip(dist) {
            *acc += p;
        }
    }
    if visits.contains(&0) {
        return None;
    }
    for (row, &n) in sums.chunks_mut(actions).zip(&visits) {
        row.iter_mut().for_each(|x| *x /= n as f64);
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= total);
    }
    StationaryPolicy::new(Player::Two, num_states, actions, sums).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn history(t: u64, state: usize) -> History<'static> {
        History {
            t,
            state,
            states: &[],
            actions_p1: &[],
            actions_p2: &[],
            rewards: &[],
        }
    }

    #[test]
    fn spec_strings_roundtrip() {
        for s in ["uniform", "fixed:1", "best-response", "random:42", "switching:100"] {
            let spec: OpponentSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("fixed".parse::<OpponentSpec>().is_err());
        assert!("nemesis".parse::<OpponentSpec>().is_err());
    }

    #[test]
    fn schedule_flips_at_boundary() {
        let a = StationaryPolicy::deterministic(Player::Two, &[0], 2).unwrap();
        let b = StationaryPolicy::deterministic(Player::Two, &[1], 2).unwrap();
        let mut opp = SwitchingOpponent::new(vec![(1, a), (100, b)]);
        assert_eq!(opp.act(&history(99, 0)), vec![1.0, 0.0]);
        assert_eq!(opp.act(&history(100, 0)), vec![0.0, 1.0]);
        assert_eq!(opp.act(&history(10_000, 0)), vec![0.0, 1.0]);
    }

    #[test]
    fn periodic_schedule_cycles() {
        let a = StationaryPolicy::deterministic(Player::Two, &[0], 2).unwrap();
        let b = StationaryPolicy::deterministic(Player::Two, &[1], 2).unwrap();
        let mut opp = SwitchingOpponent::periodic(vec![a, b], 3);
        let picks: Vec<f64> = (1..=7).map(|t| opp.act(&history(t, 0))[1]).collect();
        assert_eq!(picks, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn pibar_averages_and_detects_gaps() {
        let log = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.25, 0.75]];
        let pibar = extract_pibar(&[0, 0, 1], &log, 2).unwrap();
        assert_eq!(pibar.row(0), &[0.5, 0.5]);
        assert_eq!(pibar.row(1), &[0.25, 0.75]);
        assert!(extract_pibar(&[0, 0, 0], &log, 2).is_none());
    }

    #[test]
    fn random_opponent_is_seeded() {
        let mut a = RandomOpponent::new(3, 7);
        let mut b = RandomOpponent::new(3, 7);
        let da = a.act(&history(1, 0));
        assert_eq!(da, b.act(&history(1, 0)));
        assert!((da.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
