use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use imcmc_cli::hmm::{at_budget, run_hmm};
use imcmc_cli::multimodal::run_multimodal;
use imcmc_cli::oracle_check::run_oracle_check;
use imcmc_cli::{Experiment, RawConfig, RunConfig};

#[derive(Parser)]
#[command(name = "imcmc", version, about = "Interacting MCMC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Three-mode planar mixture, mode occupancy over sweeps.
    Multimodal(Common),
    /// State-space model: reference Gibbs, interacting and independent MwG.
    Hmm(Common),
    /// Exact transition-matrix checks on a small discrete instance.
    OracleCheck(Common),
}

#[derive(Args)]
struct Common {
    /// Config file with one `key = value` per line.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    /// Number of chains N.
    #[arg(long, allow_hyphen_values = true)]
    chains: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    sweeps: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Draw the candidates of each sub-iteration on worker threads.
    #[arg(long)]
    parallel: bool,
    /// Any other key, as `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn resolve(experiment: Experiment, c: Common) -> Result<RunConfig> {
    let mut raw = RawConfig::new(experiment);
    if let Some(path) = &c.config {
        raw.merge_file(path)?;
    }
    for pair in &c.set {
        raw.set_pair(pair)?;
    }
    for (key, value) in [("seed", c.seed), ("chains", c.chains), ("sweeps", c.sweeps)] {
        if let Some(v) = value {
            raw.set(key, v)?;
        }
    }
    if let Some(out) = c.out {
        raw.set("out", out.display().to_string())?;
    }
    if c.parallel {
        raw.set("parallel", "true")?;
    }
    Ok(raw.resolve()?)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Multimodal(c) => {
            let cfg = resolve(Experiment::Multimodal, c)?;
            let s = run_multimodal(&cfg)?;
            let p = s.final_occupancy();
            println!(
                "sweeps {}  occupancy {}  acceptance {:.4}  cpu {:.2}s",
                cfg.sweeps,
                p.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" "),
                s.acceptance_rate,
                s.cpu_seconds
            );
            Ok(true)
        }
        Command::Hmm(c) => {
            let cfg = resolve(Experiment::Hmm, c)?;
            let s = run_hmm(&cfg)?;
            let (a, b) = (s.interacting.last().unwrap(), s.independent.last().unwrap());
            let budget = a.cpu_seconds.min(b.cpu_seconds);
            println!("interacting: sweep {} cpu {:.3}s epsilon {:.4}", a.sweep, a.cpu_seconds, a.mean);
            println!("independent: sweep {} cpu {:.3}s epsilon {:.4}", b.sweep, b.cpu_seconds, b.mean);
            if let (Some(x), Some(y)) = (at_budget(&s.interacting, budget), at_budget(&s.independent, budget)) {
                println!("at {budget:.3}s: interacting {:.4}, independent {:.4}", x.mean, y.mean);
            }
            Ok(true)
        }
        Command::OracleCheck(c) => {
            let cfg = resolve(Experiment::OracleCheck, c)?;
            let checks = run_oracle_check(&cfg)?;
            for c in &checks {
                println!("{c}");
            }
            Ok(checks.iter().all(|c| c.passed()))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
