//! Random game families with certified diameters, and a TOML model format.
//!
//! Every generated transition row is mixed with the uniform distribution at
//! weight `mix`, so each state is hit with probability at least `mix/S` per
//! step under any actions and first passage times are at most `S/mix`.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sg::enumerate::{deterministic_pair_count, ENUMERATION_BUDGET};
use crate::sg::{diameter_a1, diameter_a2, Dims, SgError, SgModel};

pub const FORMAT_NAME: &str = "ucsg-sg";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Independent flat-Dirichlet rows.
    ErgodicRandom,
    /// Rows supported on `branching` random states.
    Garnet,
    /// Even states are controlled by Player 1, odd states by Player 2.
    TurnBased,
    /// A river-swim chain in which Player 2 pushes against the current.
    RiverSwim2p,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub family: Family,
    pub states: usize,
    pub actions_p1: usize,
    pub actions_p2: usize,
    /// Weight of the uniform component in every row, in `(0, 1]`.
    pub mix: f64,
    pub seed: u64,
    /// Support size for [`Family::Garnet`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branching: Option<usize>,
    /// Fail instead of falling back to the analytic bound when exact
    /// certification is too expensive.
    #[serde(default)]
    pub require_exact: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("exact certification needs {count} deterministic policy pairs (budget {budget})")]
    SpecTooLarge { count: f64, budget: usize },
    #[error(transparent)]
    Model(#[from] SgError),
}

/// Diameter certificate of a generated game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `S / mix`, valid for both diameter notions.
    pub analytic_bound: f64,
    /// Exact max-max diameter, when enumeration is feasible.
    pub d1: Option<f64>,
    /// Exact maximin diameter.
    pub d2: Option<f64>,
}

impl Certificate {
    /// Tightest certified bound.
    pub fn bound(&self) -> f64 {
        [self.d1, self.d2]
            .into_iter()
            .flatten()
            .fold(self.analytic_bound, f64::min)
    }
}

impl GenSpec {
    pub fn new(family: Family, states: usize, actions_p1: usize, actions_p2: usize, mix: f64, seed: u64) -> Self {
        Self {
            family,
            states,
            actions_p1,
            actions_p2,
            mix,
            seed,
            branching: None,
            require_exact: false,
        }
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.states, self.actions_p1, self.actions_p2)
    }

    fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InvalidSpec(m));
        if self.states == 0 || self.actions_p1 == 0 || self.actions_p2 == 0 {
            return bad("sizes must be positive".into());
        }
        if !(self.mix > 0.0 && self.mix <= 1.0) {
            return bad(format!("mix = {} not in (0, 1]", self.mix));
        }
        if self.family == Family::Garnet {
            match self.branching {
                Some(b) if (1..=self.states).contains(&b) => {}
                other => return bad(format!("garnet needs branching in 1..={}, got {other:?}", self.states)),
            }
        }
        Ok(())
    }
}

fn flat_dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// `(1 − mix)·q + mix·uniform`, renormalized.
fn mix_row(q: &[f64], mix: f64) -> Vec<f64> {
    let u = mix / q.len() as f64;
    let row: Vec<f64> = q.iter().map(|p| (1.0 - mix) * p + u).collect();
    let total: f64 = row.iter().sum();
    row.into_iter().map(|x| x / total).collect()
}

fn garnet_row(rng: &mut ChaCha8Rng, n: usize, b: usize) -> Vec<f64> {
    let mut states: Vec<usize> = (0..n).collect();
    for i in 0..b {
        let j = rng.random_range(i..n);
        states.swap(i, j);
    }
    let w = flat_dirichlet(rng, b);
    let mut row = vec![0.0; n];
    for (s, p) in states[..b].iter().zip(w) {
        row[*s] = p;
    }
    row
}

fn river_row(s: usize, n: usize, a1: usize, a2: usize, actions_p2: usize) -> (f64, Vec<f64>) {
    let mut row = vec![0.0; n];
    let right = (s + 1).min(n - 1);
    let left = s.saturating_sub(1);
    if a1.is_multiple_of(2) {
        row[left] += 1.0;
        let r = if s == 0 { 0.05 } else { 0.0 };
        return (r, row);
    }
    // Player 2's push in [0, 0.3].
    let push = if actions_p2 > 1 {
        0.3 * a2 as f64 / (actions_p2 - 1) as f64
    } else {
        0.0
    };
    row[right] += 0.6 - push;
    row[s] += 0.35;
    row[left] += 0.05 + push;
    let r = if s == n - 1 { 1.0 } else { 0.0 };
    (r, row)
}

/// Sample a game from `spec` and certify its diameters.
pub fn generate(spec: &GenSpec) -> Result<(SgModel, Certificate), GenError> {
    spec.validate()?;
    let d = spec.dims();
    let n = d.states;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rewards = Vec::with_capacity(d.cells());
    let mut kernel = Vec::with_capacity(d.cells() * n);
    for s in 0..n {
        // Turn-based: draws are shared across the passive player's actions.
        let mut shared: Vec<(f64, Vec<f64>)> = Vec::new();
        for a1 in 0..d.actions_p1 {
            for a2 in 0..d.actions_p2 {
                let (r, q) = match spec.family {
                    Family::ErgodicRandom => (rng.random::<f64>(), flat_dirichlet(&mut rng, n)),
                    Family::Garnet => (
                        rng.random::<f64>(),
                        garnet_row(&mut rng, n, spec.branching.unwrap_or(1)),
                    ),
                    Family::TurnBased => {
                        let active = if s % 2 == 0 { a1 } else { a2 };
                        while shared.len() <= active {
                            shared.push((rng.random::<f64>(), flat_dirichlet(&mut rng, n)));
                        }
                        shared[active].clone()
                    }
                    Family::RiverSwim2p => river_row(s, n, a1, a2, d.actions_p2),
                };
                rewards.push(r);
                kernel.extend(mix_row(&q, spec.mix));
            }
        }
    }
    let model = SgModel::new(d, rewards, kernel)?;
    let cert = certify(&model, spec.mix, spec.require_exact)?;
    Ok((model, cert))
}

/// Diameter certificate for a game whose rows all carry `mix` uniform weight.
pub fn certify(model: &SgModel, mix: f64, require_exact: bool) -> Result<Certificate, GenError> {
    let d = model.dims();
    let analytic_bound = d.states as f64 / mix;
    let d1 = match deterministic_pair_count(d, ENUMERATION_BUDGET) {
        Ok(_) => Some(diameter_a1(model)?),
        Err(SgError::EnumerationTooLarge { count, budget }) => {
            if require_exact {
                return Err(GenError::SpecTooLarge { count, budget });
            }
            None
        }
        Err(e) => return Err(e.into()),
    };
    let d2 = if d1.is_some() || require_exact {
        Some(diameter_a2(model)?)
    } else {
        None
    };
    Ok(Certificate { analytic_bound, d1, d2 })
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{0}")]
    Syntax(String),
    #[error("header: {0}")]
    Header(String),
    #[error("cell (s={s}, a1={a1}, a2={a2}): {reason}")]
    Cell {
        s: usize,
        a1: usize,
        a2: usize,
        reason: String,
    },
    #[error("cell #{index} in file: {reason}")]
    CellEntry { index: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    format: String,
    version: u32,
    states: usize,
    actions_p1: usize,
    actions_p2: usize,
    #[serde(default)]
    cell: Vec<RawCell>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCell {
    state: usize,
    a1: usize,
    a2: usize,
    reward: f64,
    next: Vec<f64>,
}

/// Canonical text form. Floats use the shortest representation that parses
/// back to the same bits.
pub fn to_toml_string(model: &SgModel) -> String {
    let d = model.dims();
    let mut out = String::new();
    let _ = writeln!(out, "format = \"{FORMAT_NAME}\"");
    let _ = writeln!(out, "version = {FORMAT_VERSION}");
    let _ = writeln!(out, "states = {}", d.states);
    let _ = writeln!(out, "actions_p1 = {}", d.actions_p1);
    let _ = writeln!(out, "actions_p2 = {}", d.actions_p2);
    for c in 0..d.cells() {
        let (s, a1, a2) = d.cell_coords(c);
        let next: Vec<String> = model.cell_row(c).iter().map(|p| format!("{p:?}")).collect();
        let _ = write!(
            out,
            "\n[[cell]]\nstate = {s}\na1 = {a1}\na2 = {a2}\nreward = {:?}\nnext = [{}]\n",
            model.rewards()[c],
            next.join(", ")
        );
    }
    out
}

pub fn from_toml_str(text: &str) -> Result<SgModel, ParseError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| ParseError::Syntax(e.to_string()))?;
    if raw.format != FORMAT_NAME {
        return Err(ParseError::Header(format!(
            "format is `{}`, expected `{FORMAT_NAME}`",
            raw.format
        )));
    }
    if raw.version != FORMAT_VERSION {
        return Err(ParseError::Header(format!("unsupported version {}", raw.version)));
    }
    let d = Dims::new(raw.states, raw.actions_p1, raw.actions_p2);
    if d.cells() == 0 {
        return Err(ParseError::Header("sizes must be positive".into()));
    }
    let mut rewards = vec![f64::NAN; d.cells()];
    let mut kernel = vec![0.0; d.cells() * d.states];
    let mut seen = vec![false; d.cells()];
    for (index, cell) in raw.cell.iter().enumerate() {
        if cell.state >= d.states || cell.a1 >= d.actions_p1 || cell.a2 >= d.actions_p2 {
            return Err(ParseError::CellEntry {
                index,
                reason: format!("index ({}, {}, {}) out of range", cell.state, cell.a1, cell.a2),
            });
        }
        let c = d.cell(cell.state, cell.a1, cell.a2);
        let cell_err = |reason: String| ParseError::Cell {
            s: cell.state,
            a1: cell.a1,
            a2: cell.a2,
            reason,
        };
        if seen[c] {
            return Err(cell_err("listed twice".into()));
        }
        if cell.next.len() != d.states {
            return Err(cell_err(format!(
                "`next` has {} entries, expected {}",
                cell.next.len(),
                d.states
            )));
        }
        seen[c] = true;
        rewards[c] = cell.reward;
        kernel[c * d.states..(c + 1) * d.states].copy_from_slice(&cell.next);
    }
    if let Some(c) = seen.iter().position(|x| !x) {
        let (s, a1, a2) = d.cell_coords(c);
        return Err(ParseError::Cell {
            s,
            a1,
            a2,
            reason: "missing".into(),
        });
    }
    SgModel::new(d, rewards, kernel).map_err(|e| match e {
        SgError::InvalidCell { s, a1, a2, reason } => ParseError::Cell { s, a1, a2, reason },
        other => ParseError::Header(other.to_string()),
    })
}

pub fn save(model: &SgModel, path: &Path) -> Result<(), ParseError> {
    std::fs::write(path, to_toml_string(model)).map_err(|source| ParseError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: &Path) -> Result<SgModel, ParseError> {
    let text = std::fs::read_to_string(path).map_err(|source| ParseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        for family in [Family::ErgodicRandom, Family::TurnBased, Family::RiverSwim2p] {
            let (m, _) = generate(&GenSpec::new(family, 3, 2, 2, 0.3, 11)).unwrap();
            let back = from_toml_str(&to_toml_string(&m)).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn single_state_has_unit_diameter() {
        let (_, cert) = generate(&GenSpec::new(Family::ErgodicRandom, 1, 2, 3, 0.5, 0)).unwrap();
        assert_eq!(cert.d1, Some(1.0));
        assert_eq!(cert.analytic_bound, 2.0);
    }

    #[test]
    fn turn_based_passive_player_is_irrelevant() {
        let (m, _) = generate(&GenSpec::new(Family::TurnBased, 4, 2, 3, 0.2, 5)).unwrap();
        for s in 0..4 {
            for a1 in 0..2 {
                for a2 in 0..3 {
                    let (p1, p2) = if s % 2 == 0 { (a1, 0) } else { (0, a2) };
                    assert_eq!(m.next_state_probs(s, a1, a2), m.next_state_probs(s, p1, p2));
                    assert_eq!(m.reward(s, a1, a2), m.reward(s, p1, p2));
                }
            }
        }
    }

    #[test]
    fn bad_row_names_cell() {
        let text = "format = \"ucsg-sg\"\nversion = 1\nstates = 2\nactions_p1 = 1\nactions_p2 = 1\n\
            [[cell]]\nstate = 0\na1 = 0\na2 = 0\nreward = 0.5\nnext = [0.5, 0.5]\n\
            [[cell]]\nstate = 1\na1 = 0\na2 = 0\nreward = 0.5\nnext = [0.5, 0.6]\n";
        match from_toml_str(text) {
            Err(ParseError::Cell { s: 1, a1: 0, a2: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn garnet_requires_branching() {
        let spec = GenSpec::new(Family::Garnet, 4, 2, 2, 0.1, 0);
        assert!(matches!(generate(&spec), Err(GenError::InvalidSpec(_))));
    }

    #[test]
    fn exact_certification_can_be_too_large() {
        let mut spec = GenSpec::new(Family::ErgodicRandom, 12, 3, 3, 0.5, 0);
        spec.require_exact = true;
        assert!(matches!(generate(&spec), Err(GenError::SpecTooLarge { .. })));
    }
}
