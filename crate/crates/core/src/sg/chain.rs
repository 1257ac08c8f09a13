use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::{span, Player, SgError, SgModel, StationaryPolicy, ROW_SUM_TOL};

/// Markov chain with per-state expected one-step reward, induced by fixing a
/// stationary policy for each player.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovRewardProcess {
    transition: DMatrix<f64>,
    reward: DVector<f64>,
}

impl MarkovRewardProcess {
    pub fn new(transition: DMatrix<f64>, reward: DVector<f64>) -> Result<Self, SgError> {
        let n = transition.nrows();
        if n == 0 || transition.ncols() != n || reward.len() != n {
            return Err(SgError::Dimension(format!(
                "transition is {}x{}, reward has {} entries",
                transition.nrows(),
                transition.ncols(),
                reward.len()
            )));
        }
        for i in 0..n {
            let row = transition.row(i);
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (row.sum() - 1.0).abs() > ROW_SUM_TOL {
                return Err(SgError::Dimension(format!("row {i} is not a distribution")));
            }
        }
        Ok(Self { transition, reward })
    }

    /// A chain with zero rewards; convenient for pure Markov-chain analysis.
    pub fn from_chain(transition: DMatrix<f64>) -> Result<Self, SgError> {
        let n = transition.nrows();
        Self::new(transition, DVector::zeros(n))
    }

    pub fn num_states(&self) -> usize {
        self.reward.len()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn reward(&self) -> &DVector<f64> {
        &self.reward
    }

    /// `max_s |ρ + h(s) − r̄(s) − Σ P(s'|s) h(s')|`.
    pub fn bellman_residual(&self, rho: f64, bias: &[f64]) -> f64 {
        let h = DVector::from_column_slice(bias);
        let ph = &self.transition * &h;
        (0..self.num_states())
            .map(|s| (rho + h[s] - self.reward[s] - ph[s]).abs())
            .fold(0.0, f64::max)
    }
}

/// `P(s'|s) = Σ π¹(a1|s) π²(a2|s) p(s'|s,a1,a2)` and the matching `r̄`.
pub fn induce_mrp(
    model: &SgModel,
    pi1: &StationaryPolicy,
    pi2: &StationaryPolicy,
) -> Result<MarkovRewardProcess, SgError> {
    let d = model.dims();
    check_policy(pi1, Player::One, d.states, d.actions_p1)?;
    check_policy(pi2, Player::Two, d.states, d.actions_p2)?;
    let n = d.states;
    let mut p = DMatrix::zeros(n, n);
    let mut r = DVector::zeros(n);
    for s in 0..n {
        for (a1, &w1) in pi1.row(s).iter().enumerate() {
            if w1 == 0.0 {
                continue;
            }
            for (a2, &w2) in pi2.row(s).iter().enumerate() {
                let w = w1 * w2;
                if w == 0.0 {
                    continue;
                }
                r[s] += w * model.reward(s, a1, a2);
                for (t, &q) in model.next_state_probs(s, a1, a2).iter().enumerate() {
                    p[(s, t)] += w * q;
                }
            }
        }
    }
    // Renormalize away rounding so the row-sum invariant holds tightly.
    for s in 0..n {
        let total: f64 = p.row(s).sum();
        p.row_mut(s).iter_mut().for_each(|x| *x /= total);
    }
    MarkovRewardProcess::new(p, r)
}

fn check_policy(pi: &StationaryPolicy, owner: Player, states: usize, actions: usize) -> Result<(), SgError> {
    if pi.num_states() != states || pi.num_actions() != actions {
        return Err(SgError::Dimension(format!(
            "{owner:?} policy is {}x{}, model expects {states}x{actions}",
            pi.num_states(),
            pi.num_actions()
        )));
    }
    Ok(())
}

/// Exact long-run statistics of a unichain Markov reward process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Gain.
    pub rho: f64,
    /// Bias, normalized so that `min_s h(s) = 0`.
    pub bias: Vec<f64>,
    /// Stationary distribution; zero on transient states.
    pub stationary: Vec<f64>,
    /// Whether every state is recurrent.
    pub irreducible: bool,
    /// `mfpt[i][j]`: expected steps to reach `j` from `i` (return time on the
    /// diagonal). `+∞` where `j` is not reached almost surely.
    pub mfpt: Vec<Vec<f64>>,
    pub span_bias: f64,
}

impl EvalReport {
    pub fn max_mfpt(&self) -> f64 {
        self.mfpt.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Gain, bias, stationary distribution and mean first passage times.
pub fn evaluate(mrp: &MarkovRewardProcess) -> Result<EvalReport, SgError> {
    let p = mrp.transition();
    let classes = recurrent_classes(p);
    if classes.len() != 1 {
        return Err(SgError::Multichain(classes.len()));
    }
    let irreducible = classes[0].len() == mrp.num_states();
    let (rho, mut bias) = solve_gain_bias(mrp, classes[0][0])?;
    let lo = bias.iter().copied().fold(f64::INFINITY, f64::min);
    bias.iter_mut().for_each(|h| *h -= lo);
    let stationary = stationary_unichain(p)?;
    let t = mean_first_passage_times(p)?;
    let mfpt = (0..t.nrows()).map(|i| t.row(i).iter().copied().collect()).collect();
    Ok(EvalReport {
        rho,
        span_bias: span(&bias),
        bias,
        stationary,
        irreducible,
        mfpt,
    })
}

/// Gain of a unichain process (no bias normalization, no passage times).
pub fn gain(mrp: &MarkovRewardProcess) -> Result<f64, SgError> {
    let classes = recurrent_classes(mrp.transition());
    if classes.len() != 1 {
        return Err(SgError::Multichain(classes.len()));
    }
    solve_gain_bias(mrp, classes[0][0]).map(|(rho, _)| rho)
}

/// Per-state gain `P* r̄` for an arbitrary (possibly multichain) process.
pub fn gain_vector(mrp: &MarkovRewardProcess) -> Result<Vec<f64>, SgError> {
    let p = mrp.transition();
    let n = mrp.num_states();
    let classes = recurrent_classes(p);
    let mut g = vec![0.0; n];
    let mut recurrent = vec![false; n];
    for class in &classes {
        let sub = p.select_rows(class).select_columns(class);
        let mu = stationary_unichain(&sub)?;
        let rho: f64 = class.iter().zip(&mu).map(|(&s, m)| m * mrp.reward()[s]).sum();
        for &s in class {
            g[s] = rho;
            recurrent[s] = true;
        }
    }
    let transient: Vec<usize> = (0..n).filter(|&s| !recurrent[s]).collect();
    if transient.is_empty() {
        return Ok(g);
    }
    // (I − Q) g_T = R g_R
    let k = transient.len();
    let mut a = DMatrix::identity(k, k);
    let mut b = DVector::zeros(k);
    for (ii, &i) in transient.iter().enumerate() {
        for (jj, &j) in transient.iter().enumerate() {
            a[(ii, jj)] -= p[(i, j)];
        }
        b[ii] = (0..n).filter(|&j| recurrent[j]).map(|j| p[(i, j)] * g[j]).sum();
    }
    let x = a.lu().solve(&b).ok_or(SgError::SingularSystem)?;
    for (ii, &i) in transient.iter().enumerate() {
        g[i] = x[ii];
    }
    Ok(g)
}

/// Stationary distribution of a unichain chain (zeros on transient states).
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<Vec<f64>, SgError> {
    let classes = recurrent_classes(p);
    if classes.len() != 1 {
        return Err(SgError::Multichain(classes.len()));
    }
    stationary_unichain(p)
}

fn stationary_unichain(p: &DMatrix<f64>) -> Result<Vec<f64>, SgError> {
    let n = p.nrows();
    // μ(I − P) = 0 with the last balance equation replaced by Σμ = 1.
    let mut a = (DMatrix::identity(n, n) - p).transpose();
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let mu = a.lu().solve(&b).ok_or(SgError::SingularSystem)?;
    Ok(mu.iter().map(|&x| x.max(0.0)).collect())
}

/// Solves `ρ + h(s) − Σ P h = r̄(s)` with `h(reference) = 0`.
fn solve_gain_bias(mrp: &MarkovRewardProcess, reference: usize) -> Result<(f64, Vec<f64>), SgError> {
    let n = mrp.num_states();
    let p = mrp.transition();
    // Unknown 0 is ρ; the reference state's bias column carries it instead.
    let mut a = DMatrix::identity(n, n) - p;
    a.column_mut(reference).fill(1.0);
    let x = a.lu().solve(mrp.reward()).ok_or(SgError::SingularSystem)?;
    let rho = x[reference];
    let mut h: Vec<f64> = x.iter().copied().collect();
    h[reference] = 0.0;
    Ok((rho, h))
}

/// Closed strongly connected components of the support graph, each sorted,
/// ordered by smallest member.
pub fn recurrent_classes(p: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = p.nrows();
    let mut g = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if p[(i, j)] > 0.0 {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut component = vec![0usize; n];
    let sccs = tarjan_scc(&g);
    for (c, members) in sccs.iter().enumerate() {
        for v in members {
            component[v.index()] = c;
        }
    }
    let mut closed: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members.iter().all(|v| {
                let i = v.index();
                (0..n).all(|j| p[(i, j)] == 0.0 || component[j] == *c)
            })
        })
        .map(|(_, members)| {
            let mut m: Vec<usize> = members.iter().map(|v| v.index()).collect();
            m.sort_unstable();
            m
        })
        .collect();
    closed.sort();
    closed
}

pub fn is_irreducible(p: &DMatrix<f64>) -> bool {
    let classes = recurrent_classes(p);
    classes.len() == 1 && classes[0].len() == p.nrows()
}

/// Mean first passage times `T[i][j] = 1 + Σ_{k≠j} P[i][k] T[k][j]`, with the
/// return time on the diagonal. Entries are `+∞` when `j` is not hit almost
/// surely from `i`.
pub fn mean_first_passage_times(p: &DMatrix<f64>) -> Result<DMatrix<f64>, SgError> {
    let n = p.nrows();
    let mut t = DMatrix::from_element(n, n, f64::INFINITY);
    for j in 0..n {
        let escapes = escapes_target(p, j);
        let finite: Vec<usize> = (0..n).filter(|&i| i != j && !escapes[i]).collect();
        let k = finite.len();
        let mut col = vec![f64::INFINITY; n];
        if k > 0 {
            let mut a = DMatrix::identity(k, k);
            for (ii, &i) in finite.iter().enumerate() {
                for (kk, &l) in finite.iter().enumerate() {
                    a[(ii, kk)] -= p[(i, l)];
                }
            }
            let x = a
                .lu()
                .solve(&DVector::from_element(k, 1.0))
                .ok_or(SgError::SingularSystem)?;
            for (ii, &i) in finite.iter().enumerate() {
                col[i] = x[ii];
            }
        }
        let mut ret = 1.0;
        for l in 0..n {
            if l != j && p[(j, l)] > 0.0 {
                ret += p[(j, l)] * col[l];
            }
        }
        col[j] = ret;
        for i in 0..n {
            t[(i, j)] = col[i];
        }
    }
    Ok(t)
}

/// `escapes[i]` is true when, starting from `i ≠ j`, there is positive
/// probability of never visiting `j`.
fn escapes_target(p: &DMatrix<f64>, j: usize) -> Vec<bool> {
    let n = p.nrows();
    // States that can reach j at all.
    let mut reaches = vec![false; n];
    reaches[j] = true;
    let mut stack = vec![j];
    while let Some(v) = stack.pop() {
        for u in 0..n {
            if !reaches[u] && p[(u, v)] > 0.0 {
                reaches[u] = true;
                stack.push(u);
            }
        }
    }
    // Anything that can reach a j-unreachable state without passing through j.
    let mut escapes: Vec<bool> = reaches.iter().map(|r| !r).collect();
    let mut stack: Vec<usize> = (0..n).filter(|&i| escapes[i]).collect();
    while let Some(v) = stack.pop() {
        for u in 0..n {
            if u != j && !escapes[u] && p[(u, v)] > 0.0 {
                escapes[u] = true;
                stack.push(u);
            }
        }
    }
    escapes[j] = false;
    escapes
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mrp(rows: &[&[f64]], r: &[f64]) -> MarkovRewardProcess {
        let n = rows.len();
        MarkovRewardProcess::new(
            DMatrix::from_row_slice(n, n, &rows.concat()),
            DVector::from_column_slice(r),
        )
        .unwrap()
    }

    #[test]
    fn lazy_two_state_chain() {
        let e = evaluate(&mrp(&[&[0.5, 0.5], &[0.5, 0.5]], &[1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(e.rho, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(e.stationary[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(e.mfpt[0][1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.mfpt[0][0], 2.0, epsilon = 1e-12);
        assert!(e.irreducible);
    }

    #[test]
    fn deterministic_two_cycle() {
        let m = mrp(&[&[0.0, 1.0], &[1.0, 0.0]], &[1.0, 0.0]);
        let e = evaluate(&m).unwrap();
        assert_abs_diff_eq!(e.rho, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(e.mfpt[0][1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.mfpt[0][0], 2.0, epsilon = 1e-12);
        assert!(m.bellman_residual(e.rho, &e.bias) <= 1e-12);
        assert_eq!(e.bias.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
    }

    #[test]
    fn absorbing_single_state() {
        let e = evaluate(&mrp(&[&[1.0]], &[0.7])).unwrap();
        assert_eq!(e.rho, 0.7);
        assert_eq!(e.bias, vec![0.0]);
        assert_eq!(e.mfpt[0][0], 1.0);
    }

    #[test]
    fn transient_state_unichain() {
        // 0 -> 1, 1 <-> 2; state 0 is transient.
        let m = mrp(
            &[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0]],
            &[0.0, 1.0, 0.0],
        );
        let e = evaluate(&m).unwrap();
        assert!(!e.irreducible);
        assert_abs_diff_eq!(e.rho, 0.5, epsilon = 1e-12);
        assert_eq!(e.stationary[0], 0.0);
        assert!(e.mfpt[1][0].is_infinite());
        assert_eq!(e.mfpt[0][1], 1.0);
        assert!(m.bellman_residual(e.rho, &e.bias) <= 1e-12);
    }

    #[test]
    fn multichain_rejected_but_gain_vector_works() {
        let m = mrp(
            &[&[1.0, 0.0, 0.0], &[0.5, 0.0, 0.5], &[0.0, 0.0, 1.0]],
            &[1.0, 0.0, 0.0],
        );
        assert_eq!(evaluate(&m).unwrap_err(), SgError::Multichain(2));
        let g = gain_vector(&m).unwrap();
        assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g[2], 0.0, epsilon = 1e-12);
    }
}
