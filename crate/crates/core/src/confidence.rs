//! Transition statistics and the per-cell confidence regions used by the
//! learner: an L1 ball around the empirical row intersected with
//! empirical-Bernstein coordinate boxes.

use crate::sg::{Dims, SgModel};

/// Absolute tolerance of [`ConfidenceRegion::contains`].
pub const CONTAINS_TOL: f64 = 1e-12;

/// Visit and transition counts, plus the phase bookkeeping of the doubling
/// rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Counts {
    dims: Dims,
    visits: Vec<u64>,
    transitions: Vec<u64>,
    phase_floor: Vec<u64>,
    within_phase: Vec<u64>,
    phase_start: u64,
    total: u64,
}

impl Counts {
    pub fn new(dims: Dims) -> Self {
        Self {
            dims,
            visits: vec![0; dims.cells()],
            transitions: vec![0; dims.cells() * dims.states],
            phase_floor: vec![1; dims.cells()],
            within_phase: vec![0; dims.cells()],
            phase_start: 1,
            total: 0,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Snapshot `n_k = max(1, visits)` and reset the within-phase counters.
    /// `t` is the 1-indexed step at which the phase starts.
    pub fn start_phase(&mut self, t: u64) {
        for (f, &n) in self.phase_floor.iter_mut().zip(&self.visits) {
            *f = n.max(1);
        }
        self.within_phase.iter_mut().for_each(|v| *v = 0);
        self.phase_start = t;
    }

    /// Record one transition. Returns `true` when the doubling rule fires,
    /// i.e. the within-phase count of this cell reached its phase-start floor.
    pub fn observe(&mut self, s: usize, a1: usize, a2: usize, next: usize) -> bool {
        let c = self.dims.cell(s, a1, a2);
        self.visits[c] += 1;
        self.transitions[c * self.dims.states + next] += 1;
        self.within_phase[c] += 1;
        self.total += 1;
        self.within_phase[c] >= self.phase_floor[c]
    }

    pub fn visits(&self, cell: usize) -> u64 {
        self.visits[cell]
    }

    pub fn transition_counts(&self, cell: usize) -> &[u64] {
        let n = self.dims.states;
        &self.transitions[cell * n..(cell + 1) * n]
    }

    /// `n_k(s,a)` of the current phase.
    pub fn phase_floor(&self, cell: usize) -> u64 {
        self.phase_floor[cell]
    }

    /// `v_k(s,a)`.
    pub fn within_phase(&self, cell: usize) -> u64 {
        self.within_phase[cell]
    }

    pub fn phase_start(&self) -> u64 {
        self.phase_start
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Add `n` synthetic visits of `cell` split proportionally to `row`
    /// (rounded down, remainder to the largest entry). Used by tests to
    /// emulate very long histories.
    pub fn inject(&mut self, cell: usize, row: &[f64], n: u64) {
        let s = self.dims.states;
        let mut placed = 0;
        let mut argmax = 0;
        for (j, &p) in row.iter().enumerate() {
            let k = (p * n as f64).floor() as u64;
            self.transitions[cell * s + j] += k;
            placed += k;
            if p > row[argmax] {
                argmax = j;
            }
        }
        self.transitions[cell * s + argmax] += n - placed;
        self.visits[cell] += n;
        self.total += n;
    }
}

/// `δ₁ = δ / (2 S² A log₂ T)`, with `T` clamped to at least 2.
pub fn delta1(delta: f64, horizon: u64, dims: Dims) -> f64 {
    let s = dims.states as f64;
    let a = dims.joint_actions() as f64;
    delta / (2.0 * s * s * a * (horizon.max(2) as f64).log2())
}

/// `min(2, √(2 S ln(1/δ₁) / n))`.
pub fn l1_radius(states: usize, n: u64, delta1: f64) -> f64 {
    let n = n.max(1) as f64;
    (2.0 * states as f64 * (1.0 / delta1).ln() / n).sqrt().min(2.0)
}

/// Coordinate interval `[lo, hi]` for an empirical probability `p` from `n`
/// samples.
pub fn coordinate_box(p: f64, n: u64, delta1: f64) -> (f64, f64) {
    let n = n.max(1);
    let nf = n as f64;
    let log_term = (6.0 / delta1).ln();
    let hoeffding = (log_term / (2.0 * nf)).sqrt();
    let bernstein = if n > 1 {
        (2.0 * p * (1.0 - p) / nf * log_term).sqrt() + 7.0 / (3.0 * (nf - 1.0)) * log_term
    } else {
        f64::INFINITY
    };
    let width = hoeffding.min(bernstein);
    let mut lo = (p - width).max(0.0);
    let mut hi = (p + width).min(1.0);
    if n > 1 {
        let (slo, shi) = std_dev_interval(p, (2.0 * log_term / (nf - 1.0)).sqrt());
        lo = lo.max(slo);
        hi = hi.min(shi);
    }
    // p lies in every piece mathematically; keep it there despite rounding.
    (lo.min(p), hi.max(p))
}

/// The connected piece containing `p` of `{x ∈ [0,1] : |σ(x) − σ(p)| ≤ c}`,
/// where `σ(x) = √(x(1−x))`.
fn std_dev_interval(p: f64, c: f64) -> (f64, f64) {
    let sigma = (p * (1.0 - p)).max(0.0).sqrt();
    let roots = |s: f64| {
        let d = (1.0 - 4.0 * s * s).max(0.0).sqrt();
        ((1.0 - d) / 2.0, (1.0 + d) / 2.0)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    // σ(x) ≥ σ − c: an interval around 1/2.
    if sigma - c > 0.0 {
        let (a, b) = roots(sigma - c);
        lo = a;
        hi = b;
    }
    // σ(x) ≤ σ + c: excludes a neighbourhood of 1/2; keep p's side.
    if sigma + c < 0.5 {
        let (a, b) = roots(sigma + c);
        if p <= 0.5 {
            hi = hi.min(a);
        } else {
            lo = lo.max(b);
        }
    }
    (lo, hi)
}

/// One cell of a [`ConfidenceRegion`].
#[derive(Clone, Copy, Debug)]
pub struct CellRegion<'a> {
    pub phat: &'a [f64],
    pub l1_radius: f64,
    pub lo: &'a [f64],
    pub hi: &'a [f64],
}

impl CellRegion<'_> {
    pub fn contains(&self, p: &[f64]) -> bool {
        let l1: f64 = p.iter().zip(self.phat).map(|(a, b)| (a - b).abs()).sum();
        l1 <= self.l1_radius + CONTAINS_TOL
            && p.iter()
                .zip(self.lo.iter().zip(self.hi))
                .all(|(x, (l, h))| *x >= l - CONTAINS_TOL && *x <= h + CONTAINS_TOL)
    }
}

/// Admissible transition rows for every `(s, a1, a2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceRegion {
    dims: Dims,
    phat: Vec<f64>,
    l1_radius: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    delta1: f64,
}

impl ConfidenceRegion {
    /// Region built from the current counts. Call at a phase boundary.
    pub fn build(counts: &Counts, delta: f64, horizon: u64) -> Self {
        let dims = counts.dims();
        let s = dims.states;
        let d1 = delta1(delta, horizon, dims);
        let cells = dims.cells();
        let mut phat = Vec::with_capacity(cells * s);
        let mut l1 = Vec::with_capacity(cells);
        let mut lo = Vec::with_capacity(cells * s);
        let mut hi = Vec::with_capacity(cells * s);
        for c in 0..cells {
            let raw = counts.visits(c);
            let n = raw.max(1);
            let start = phat.len();
            if raw == 0 {
                phat.extend(std::iter::repeat_n(1.0 / s as f64, s));
            } else {
                phat.extend(counts.transition_counts(c).iter().map(|&k| k as f64 / raw as f64));
            }
            for j in 0..s {
                let (l, h) = coordinate_box(phat[start + j], n, d1);
                lo.push(l);
                hi.push(h);
            }
            l1.push(l1_radius(s, n, d1));
        }
        Self {
            dims,
            phat,
            l1_radius: l1,
            lo,
            hi,
            delta1: d1,
        }
    }

    /// The singleton region `{model kernel}`.
    pub fn collapsed(model: &SgModel) -> Self {
        let dims = model.dims();
        Self {
            dims,
            phat: model.transitions().to_vec(),
            l1_radius: vec![0.0; dims.cells()],
            lo: model.transitions().to_vec(),
            hi: model.transitions().to_vec(),
            delta1: 0.0,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }

    #[inline]
    pub fn cell(&self, c: usize) -> CellRegion<'_> {
        let s = self.dims.states;
        let r = c * s..(c + 1) * s;
        CellRegion {
            phat: &self.phat[r.clone()],
            l1_radius: self.l1_radius[c],
            lo: &self.lo[r.clone()],
            hi: &self.hi[r],
        }
    }

    /// Flat empirical kernel in cell order.
    pub fn phat(&self) -> &[f64] {
        &self.phat
    }

    /// Whether every row of the flat kernel `p` is admissible.
    pub fn contains_kernel(&self, p: &[f64]) -> bool {
        let s = self.dims.states;
        p.len() == self.phat.len() && (0..self.dims.cells()).all(|c| self.cell(c).contains(&p[c * s..(c + 1) * s]))
    }

    pub fn contains(&self, model: &SgModel) -> bool {
        model.dims() == self.dims && self.contains_kernel(model.transitions())
    }
}
