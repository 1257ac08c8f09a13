mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use ucsg_core::diagnostics;
use ucsg_core::envgen::{self, GenSpec};
use ucsg_core::sg::SgModel;
use ucsg_core::ucsg::{self, Mode, RunError, RunReport};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "ucsg",
    version,
    about = "Learn and evaluate maximin policies in average-reward stochastic games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the learner for every configured seed and write CSV results.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run this single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mode: Option<Mode>,
    },
    /// Run the perturbation and bias diagnostics. Exits with status 1 when
    /// an in-hypothesis case fails.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; defaults to `<out>/diagnostics.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a game from a spec file and save it in the model format.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("UCSG_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            mode,
        } => cmd_run(&config, out, seed, mode).map(|_| true),
        Command::Diagnose { config, out } => cmd_diagnose(&config, out),
        Command::Gen { spec, out } => cmd_gen(&spec, &out).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn cmd_run(path: &Path, out: Option<PathBuf>, seed: Option<u64>, mode: Option<Mode>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    let out = match out {
        Some(o) => o,
        None => cfg.resolve(&cfg.out),
    };
    let model = cfg.model()?;
    let run_cfgs = cfg
        .seeds
        .iter()
        .map(|&s| {
            let rc = cfg.run_config(s, mode)?;
            rc.validate(model.dims()).map_err(|e| anyhow!(e))?;
            Ok(rc)
        })
        .collect::<Result<Vec<_>>>()?;
    let epsilons = run_cfgs[0].epsilons.clone();

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    envgen::save(&model, &out.join("model.toml"))?;

    let reports: Vec<RunReport> = run_cfgs
        .par_iter()
        .map(|rc| {
            log::info!("seed {}: {} steps, {} mode", rc.seed, rc.horizon, rc.mode);
            let dir = out.join(format!("seed_{}", rc.seed));
            fs::create_dir_all(&dir)?;
            match ucsg::run(&model, rc) {
                Ok(report) => {
                    write_seed(&dir, &report)?;
                    Ok(report)
                }
                Err(RunError::Aborted { reason, partial }) => {
                    write_seed(&dir, &partial)?;
                    Err(anyhow!(
                        "seed {} aborted: {reason} (partial results in {})",
                        rc.seed,
                        dir.display()
                    ))
                }
                Err(e) => Err(e.into()),
            }
        })
        .collect::<Result<_>>()?;

    let dims = model.dims();
    let rows: Vec<Vec<String>> = reports.iter().map(|r| output::summary_row(r, dims)).collect();
    output::write_table(&out.join("summary.csv"), &output::summary_header(&epsilons), &rows)?;
    output::write_aggregate(&out.join("aggregate.csv"), &reports, &epsilons)?;
    write_manifest(&out, &cfg.seeds)?;
    for r in &reports {
        println!(
            "seed {}: regret {} over {} steps, rho* {}",
            r.seed,
            output::fmt_f(r.regret),
            r.horizon,
            output::fmt_f(r.rho_star)
        );
    }
    Ok(())
}

fn write_seed(dir: &Path, report: &RunReport) -> Result<()> {
    output::write_steps(&dir.join("steps.csv"), report)?;
    output::write_phases(&dir.join("phases.csv"), report)?;
    output::write_regret(&dir.join("regret.csv"), report)?;
    Ok(())
}

fn write_manifest(out: &Path, seeds: &[u64]) -> Result<()> {
    let mut files = vec!["model.toml".to_string(), "summary.csv".into(), "aggregate.csv".into()];
    for s in seeds {
        for f in ["steps.csv", "phases.csv", "regret.csv"] {
            files.push(format!("seed_{s}/{f}"));
        }
    }
    let manifest = output::Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        model_format: envgen::FORMAT_NAME.to_string(),
        model_format_version: envgen::FORMAT_VERSION,
        schemas: output::Schemas::current(),
        seeds: seeds.to_vec(),
        files,
    };
    fs::write(out.join("manifest.toml"), toml::to_string(&manifest)?)?;
    Ok(())
}

fn cmd_diagnose(path: &Path, out: Option<PathBuf>) -> Result<bool> {
    let cfg = ExperimentConfig::load(path)?;
    let dest = match out {
        Some(o) => o,
        None => cfg.resolve(&cfg.out).join("diagnostics.csv"),
    };
    if let Some(parent) = dest.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let results = diagnostics::run_suites(&cfg.diagnostics)?;
    output::write_diagnostics(&dest, &results)?;
    let mut ok = true;
    for r in &results {
        println!(
            "{:<24} cases {:>5}  in-hypothesis {:>5}  failures {:>3}  informational {:>3}  {}",
            r.name,
            r.cases,
            r.in_hypothesis,
            r.failures,
            r.informational_violations,
            if r.passed() { "pass" } else { "FAIL" }
        );
        ok &= r.passed();
    }
    Ok(ok)
}

fn cmd_gen(spec_path: &Path, out: &Path) -> Result<()> {
    let text = fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let spec: GenSpec = toml::from_str(&text).with_context(|| format!("parsing {}", spec_path.display()))?;
    let (model, cert): (SgModel, _) = envgen::generate(&spec)?;
    envgen::save(&model, out)?;
    print!("{}", toml::to_string(&cert)?);
    Ok(())
}
