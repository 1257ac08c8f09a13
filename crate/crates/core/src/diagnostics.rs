//! Randomized checks of the Markov-chain facts the learner's analysis relies
//! on, chiefly perturbation bounds for first-passage times and stationary
//! distributions.
//!
//! A bound check only counts as a failure inside its hypothesis; violations
//! outside it are reported as informational.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::envgen::{generate, Family, GenSpec};
use crate::exec;
use crate::sg::{
    evaluate, induce_mrp, is_irreducible, mean_first_passage_times, stationary_distribution, Player, SgError, SgModel,
    StationaryPolicy,
};

pub const STATIONARY_SLACK: f64 = 1e-10;
pub const WRAPPED_TOL: f64 = 1e-10;
pub const SPAN_SLACK: f64 = 1e-8;

fn max_entry(m: &DMatrix<f64>) -> f64 {
    m.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `max_{ij} |a_ij − b_ij|`.
pub fn max_abs_entry_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn flat_dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Per-instance generator; independent of scheduling order.
fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Random irreducible chain: each row has a random sparse support plus the
/// edge `i → i+1 (mod S)`.
pub fn random_irreducible_chain(states: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(states, states);
    for i in 0..states {
        let mut support = vec![(i + 1) % states];
        for j in 0..states {
            if j != support[0] && rng.random_bool(0.4) {
                support.push(j);
            }
        }
        for (j, w) in support.iter().zip(flat_dirichlet(rng, support.len())) {
            p[(i, *j)] += w;
        }
    }
    p
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub d_before: f64,
    /// `‖P̃ − P‖_∞` as the largest absolute entry.
    pub e_norm: f64,
    pub d_after: f64,
    /// `e_norm ≤ 1/(8 D S²)`.
    pub in_hypothesis: bool,
    /// `d_after ≤ 2 d_before`.
    pub bound_holds: bool,
}

/// Row-wise convex jitter `P + λ(q − P)` toward flat-Dirichlet rows, with the
/// largest absolute change capped at `cap`.
pub fn perturb(p: &DMatrix<f64>, cap: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = p.nrows();
    let mut out = p.clone();
    for i in 0..n {
        let q = flat_dirichlet(rng, n);
        let dev = (0..n).map(|j| (q[j] - p[(i, j)]).abs()).fold(0.0, f64::max);
        let lambda = if dev > 0.0 { (cap / dev).min(1.0) } else { 0.0 };
        if lambda == 0.0 {
            continue;
        }
        for j in 0..n {
            out[(i, j)] = p[(i, j)] + lambda * (q[j] - p[(i, j)]);
        }
        let total: f64 = out.row(i).sum();
        out.row_mut(i).iter_mut().for_each(|x| *x /= total);
    }
    out
}

fn mfpt_report(p: &DMatrix<f64>, ptilde: &DMatrix<f64>, d_before: f64) -> Result<PerturbationReport, SgError> {
    let s = p.nrows() as f64;
    let e_norm = max_abs_entry_diff(p, ptilde);
    let d_after = max_entry(&mean_first_passage_times(ptilde)?);
    Ok(PerturbationReport {
        d_before,
        e_norm,
        d_after,
        in_hypothesis: e_norm <= 1.0 / (8.0 * d_before * s * s),
        bound_holds: d_after <= 2.0 * d_before * (1.0 + 1e-12),
    })
}

/// Perturb with `‖E‖_∞ ≤ min(scale, 1/(8 D S²))` and compare diameters.
pub fn check_mfpt_perturbation(p: &DMatrix<f64>, scale: f64, seed: u64) -> Result<PerturbationReport, SgError> {
    let d = max_entry(&mean_first_passage_times(p)?);
    let s = p.nrows() as f64;
    // Stay strictly inside the hypothesis despite rounding in the rows.
    let cap = scale.min((1.0 - 1e-9) / (8.0 * d * s * s));
    let ptilde = perturb(p, cap, &mut ChaCha8Rng::seed_from_u64(seed));
    mfpt_report(p, &ptilde, d)
}

/// As [`check_mfpt_perturbation`] but capped only at `scale`, so the result
/// may fall outside the hypothesis.
pub fn check_mfpt_perturbation_raw(p: &DMatrix<f64>, scale: f64, seed: u64) -> Result<PerturbationReport, SgError> {
    let d = max_entry(&mean_first_passage_times(p)?);
    let ptilde = perturb(p, scale, &mut ChaCha8Rng::seed_from_u64(seed));
    mfpt_report(p, &ptilde, d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryCheck {
    pub e_norm: f64,
    /// `2 / (S max_{i≠j} T_ij)`; below it the perturbed chain stays irreducible.
    pub irreducibility_threshold: f64,
    pub perturbed_irreducible: bool,
    /// `max_j |μ̃_j − μ_j| − bound_j`.
    pub worst_excess: f64,
    pub holds: bool,
}

/// `|μ̃_j − μ_j| ≤ μ_j (S ‖E‖_∞ / 2) max_{i≠j} T_ij` for every `j`.
pub fn check_stationary_perturbation(p: &DMatrix<f64>, ptilde: &DMatrix<f64>) -> Result<StationaryCheck, SgError> {
    let n = p.nrows();
    let s = n as f64;
    let t = mean_first_passage_times(p)?;
    let mu = stationary_distribution(p)?;
    let perturbed_irreducible = is_irreducible(ptilde);
    let mu_tilde = stationary_distribution(ptilde)?;
    let e_norm = max_abs_entry_diff(p, ptilde);
    let off_diag_max = |j: usize| (0..n).filter(|&i| i != j).map(|i| t[(i, j)]).fold(0.0, f64::max);
    let max_off = (0..n).map(off_diag_max).fold(0.0, f64::max);
    let worst_excess = (0..n)
        .map(|j| (mu_tilde[j] - mu[j]).abs() - mu[j] * (s * e_norm / 2.0) * off_diag_max(j))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(StationaryCheck {
        e_norm,
        irreducibility_threshold: if max_off > 0.0 {
            2.0 / (s * max_off)
        } else {
            f64::INFINITY
        },
        perturbed_irreducible,
        worst_excess,
        holds: worst_excess <= STATIONARY_SLACK,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WrappedChain {
    pub kernel: DMatrix<f64>,
    pub stationary: Vec<f64>,
    /// `v_k(s) / T_k`.
    pub frequencies: Vec<f64>,
    pub max_error: f64,
    pub identity_holds: bool,
}

/// Empirical kernel of the slice closed into a cycle by an extra edge from
/// its last state to its first, and whether its stationary law equals the
/// visit frequencies. `None` if some state is never visited.
pub fn wrapped_empirical_chain(states: &[usize], num_states: usize) -> Option<WrappedChain> {
    let len = states.len();
    if len == 0 {
        return None;
    }
    let mut visits = vec![0u64; num_states];
    let mut kernel = DMatrix::zeros(num_states, num_states);
    for (i, &s) in states.iter().enumerate() {
        visits[s] += 1;
        let next = states[(i + 1) % len];
        kernel[(s, next)] += 1.0;
    }
    if visits.contains(&0) {
        return None;
    }
    for (s, &v) in visits.iter().enumerate() {
        kernel.row_mut(s).iter_mut().for_each(|x| *x /= v as f64);
    }
    let stationary = stationary_distribution(&kernel).ok()?;
    let frequencies: Vec<f64> = visits.iter().map(|&v| v as f64 / len as f64).collect();
    let max_error = stationary
        .iter()
        .zip(&frequencies)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Some(WrappedChain {
        kernel,
        stationary,
        frequencies,
        max_error,
        identity_holds: max_error <= WRAPPED_TOL,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanCheck {
    pub span_bias: f64,
    pub max_mfpt: f64,
    pub holds: bool,
}

/// `span(h) ≤ max_{s,s'} T_{s→s'}` for the chain induced by `(pi1, pi2)`.
pub fn check_span_bound(model: &SgModel, pi1: &StationaryPolicy, pi2: &StationaryPolicy) -> Result<SpanCheck, SgError> {
    let report = evaluate(&induce_mrp(model, pi1, pi2)?)?;
    let max_mfpt = report.max_mfpt();
    Ok(SpanCheck {
        span_bias: report.span_bias,
        max_mfpt,
        holds: report.span_bias <= max_mfpt + SPAN_SLACK,
    })
}

/// Instance counts and sizes for [`run_suites`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub mfpt: usize,
    pub stationary: usize,
    pub wrapped: usize,
    pub span: usize,
    pub max_states: usize,
    pub seed: u64,
    /// Additionally perturb at this multiple of the mean-first-passage
    /// threshold; results are informational.
    pub out_of_hypothesis_factor: Option<f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            mfpt: 500,
            stationary: 500,
            wrapped: 200,
            span: 200,
            max_states: 6,
            seed: 0,
            out_of_hypothesis_factor: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub in_hypothesis: usize,
    /// In-hypothesis cases where the checked statement failed.
    pub failures: usize,
    /// Out-of-hypothesis cases where the statement failed (not an error).
    pub informational_violations: usize,
    /// Largest observed value of the checked ratio (statement holds iff ≤ 1).
    pub worst_ratio: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct Case {
    in_hypothesis: bool,
    holds: bool,
    ratio: f64,
}

fn summarize(name: &str, cases: Vec<Result<Case, SgError>>) -> Result<SuiteResult, SgError> {
    let mut out = SuiteResult {
        name: name.to_string(),
        cases: cases.len(),
        in_hypothesis: 0,
        failures: 0,
        informational_violations: 0,
        worst_ratio: 0.0,
    };
    for c in cases {
        let c = c?;
        out.worst_ratio = out.worst_ratio.max(c.ratio);
        if c.in_hypothesis {
            out.in_hypothesis += 1;
            out.failures += usize::from(!c.holds);
        } else {
            out.informational_violations += usize::from(!c.holds);
        }
    }
    Ok(out)
}

fn pick_states(rng: &mut ChaCha8Rng, max_states: usize) -> usize {
    rng.random_range(1..=max_states.max(1))
}

pub fn mfpt_suite(count: usize, max_states: usize, seed: u64) -> Result<SuiteResult, SgError> {
    let cases = exec::map_indices(count, |i| {
        let mut rng = instance_rng(seed, i);
        let n = pick_states(&mut rng, max_states);
        let p = random_irreducible_chain(n, &mut rng);
        let r = check_mfpt_perturbation(&p, 1.0, rng.random())?;
        Ok(Case {
            in_hypothesis: r.in_hypothesis,
            holds: r.bound_holds,
            ratio: r.d_after / (2.0 * r.d_before),
        })
    });
    summarize("mfpt_perturbation", cases)
}

/// Perturbations at `factor` times the threshold `1/(8DS²)`.
pub fn mfpt_out_of_hypothesis_suite(
    count: usize,
    max_states: usize,
    factor: f64,
    seed: u64,
) -> Result<SuiteResult, SgError> {
    let cases = exec::map_indices(count, |i| {
        let mut rng = instance_rng(seed, i);
        let n = pick_states(&mut rng, max_states);
        let p = random_irreducible_chain(n, &mut rng);
        let d = max_entry(&mean_first_passage_times(&p)?);
        let scale = factor / (8.0 * d * (n * n) as f64);
        let r = check_mfpt_perturbation_raw(&p, scale, rng.random())?;
        Ok(Case {
            in_hypothesis: r.in_hypothesis,
            holds: r.bound_holds,
            ratio: r.d_after / (2.0 * r.d_before),
        })
    });
    summarize("mfpt_out_of_hypothesis", cases)
}

pub fn stationary_suite(count: usize, max_states: usize, seed: u64) -> Result<SuiteResult, SgError> {
    let cases = exec::map_indices(count, |i| {
        let mut rng = instance_rng(seed, i);
        let n = pick_states(&mut rng, max_states);
        let p = random_irreducible_chain(n, &mut rng);
        let t = mean_first_passage_times(&p)?;
        let max_off = (0..n)
            .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
            .map(|(a, b)| t[(a, b)])
            .fold(0.0, f64::max);
        let threshold = if max_off > 0.0 { 2.0 / (n as f64 * max_off) } else { 1.0 };
        let cap = threshold * rng.random_range(0.01..0.99);
        let ptilde = perturb(&p, cap, &mut rng);
        let c = check_stationary_perturbation(&p, &ptilde)?;
        let irreducible_below_threshold = c.perturbed_irreducible || c.e_norm >= c.irreducibility_threshold;
        Ok(Case {
            in_hypothesis: c.perturbed_irreducible,
            holds: c.holds && irreducible_below_threshold,
            ratio: if c.holds { 0.0 } else { f64::INFINITY },
        })
    });
    summarize("stationary_perturbation", cases)
}

/// Simulate a chain until every state has been visited and at least a random
/// minimum length has elapsed.
pub fn simulate_covering_slice(p: &DMatrix<f64>, min_len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = p.nrows();
    let mut seen = vec![false; n];
    let mut unseen = n;
    let mut s = rng.random_range(0..n);
    let mut out = Vec::new();
    while unseen > 0 || out.len() < min_len {
        out.push(s);
        if !seen[s] {
            seen[s] = true;
            unseen -= 1;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = n - 1;
        for j in 0..n {
            acc += p[(s, j)];
            if u < acc {
                next = j;
                break;
            }
        }
        s = next;
    }
    out
}

pub fn wrapped_suite(count: usize, max_states: usize, seed: u64) -> Result<SuiteResult, SgError> {
    let cases = exec::map_indices(count, |i| {
        let mut rng = instance_rng(seed, i);
        let n = pick_states(&mut rng, max_states);
        let p = random_irreducible_chain(n, &mut rng);
        let min_len = rng.random_range(1..=200);
        let slice = simulate_covering_slice(&p, min_len, &mut rng);
        let w = wrapped_empirical_chain(&slice, n).ok_or(SgError::SingularSystem)?;
        Ok(Case {
            in_hypothesis: true,
            holds: w.identity_holds,
            ratio: w.max_error / WRAPPED_TOL,
        })
    });
    summarize("wrapped_empirical_chain", cases)
}

fn random_policy(owner: Player, states: usize, actions: usize, rng: &mut ChaCha8Rng) -> StationaryPolicy {
    let rows: Vec<Vec<f64>> = (0..states).map(|_| flat_dirichlet(rng, actions)).collect();
    StationaryPolicy::from_rows(owner, &rows).unwrap_or_else(|_| StationaryPolicy::uniform(owner, states, actions))
}

pub fn span_suite(count: usize, max_states: usize, seed: u64) -> Result<SuiteResult, SgError> {
    let cases = exec::map_indices(count, |i| {
        let mut rng = instance_rng(seed, i);
        let n = pick_states(&mut rng, max_states);
        let spec = GenSpec::new(
            Family::ErgodicRandom,
            n,
            2,
            2,
            rng.random_range(0.05..1.0),
            rng.random(),
        );
        let (model, _) = generate(&spec).map_err(|e| SgError::Dimension(e.to_string()))?;
        let pi1 = random_policy(Player::One, n, 2, &mut rng);
        let pi2 = random_policy(Player::Two, n, 2, &mut rng);
        let c = check_span_bound(&model, &pi1, &pi2)?;
        Ok(Case {
            in_hypothesis: true,
            holds: c.holds,
            ratio: c.span_bias / c.max_mfpt,
        })
    });
    summarize("span_bound", cases)
}

/// All suites in a fixed order.
pub fn run_suites(cfg: &SuiteConfig) -> Result<Vec<SuiteResult>, SgError> {
    let mut out = vec![
        mfpt_suite(cfg.mfpt, cfg.max_states, cfg.seed)?,
        stationary_suite(cfg.stationary, cfg.max_states, cfg.seed.wrapping_add(1))?,
        wrapped_suite(cfg.wrapped, cfg.max_states, cfg.seed.wrapping_add(2))?,
        span_suite(cfg.span, cfg.max_states, cfg.seed.wrapping_add(3))?,
    ];
    if let Some(f) = cfg.out_of_hypothesis_factor {
        out.push(mfpt_out_of_hypothesis_suite(
            cfg.mfpt,
            cfg.max_states,
            f,
            cfg.seed.wrapping_add(4),
        )?);
    }
    Ok(out)
}
