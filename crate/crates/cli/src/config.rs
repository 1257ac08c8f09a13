use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use ucsg_core::diagnostics::SuiteConfig;
use ucsg_core::envgen::{self, GenSpec};
use ucsg_core::opponents::OpponentSpec;
use ucsg_core::planning::ViConfig;
use ucsg_core::sg::SgModel;
use ucsg_core::ucsg::{Mode, RunConfig};

/// Where the game comes from: exactly one of a model file or a generator spec.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub file: Option<PathBuf>,
    pub generate: Option<GenSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub horizon: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_opponent")]
    pub opponent: OpponentSpec,
    #[serde(default)]
    pub initial_state: usize,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub vi: ViConfig,
}

fn default_delta() -> f64 {
    0.1
}

fn default_mode() -> Mode {
    Mode::Online
}

fn default_opponent() -> OpponentSpec {
    OpponentSpec::BestResponse
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelSection,
    pub run: Option<RunSection>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub diagnostics: SuiteConfig,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        if cfg.seeds.is_empty() {
            bail!("`seeds` must not be empty");
        }
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn model(&self) -> Result<SgModel> {
        match (&self.model.file, &self.model.generate) {
            (Some(file), None) => {
                let path = self.resolve(file);
                envgen::load(&path).with_context(|| format!("loading model {}", path.display()))
            }
            (None, Some(spec)) => {
                let (model, cert) = envgen::generate(spec)?;
                log::info!("generated model, diameter certificate {cert:?}");
                Ok(model)
            }
            _ => bail!("[model] needs exactly one of `file` or `generate`"),
        }
    }

    pub fn run_config(&self, seed: u64, mode: Option<Mode>) -> Result<RunConfig> {
        let Some(run) = &self.run else {
            bail!("config has no [run] section");
        };
        if let Some(e) = run.epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            bail!("epsilon {e} not in (0, 1)");
        }
        Ok(RunConfig {
            horizon: run.horizon,
            delta: run.delta,
            mode: mode.unwrap_or(run.mode),
            seed,
            vi: run.vi,
            initial_state: run.initial_state,
            opponent: run.opponent.clone(),
            epsilons: run.epsilons.clone(),
        })
    }
}
