use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fdmimo::harness::{run_experiment, run_invariant_suite, ExperimentConfig, Scenario};

#[derive(Parser)]
#[command(name = "fdmimo", version, about = "FD-MIMO elevation beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Element-approach vs approximate port pattern cuts.
    Pattern(Common),
    /// Port correlation: quadrature, Monte Carlo, approximate pattern and 2D model.
    Corr(Common),
    /// Single cell-edge user, rate per strategy.
    SingleUser(Common),
    /// Single cell, K users, minimum rate per strategy.
    MultiUser(Common),
    /// Three cells, K users each, minimum SIR per strategy.
    MultiCell(Common),
    /// Runs the invariant suite; --trials sets the number of random seeds.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; scenario defaults fill absent fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Channel realizations per sweep point; Monte Carlo samples for `corr`.
    #[arg(long)]
    trials: Option<usize>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; all available cores when absent.
    #[arg(long)]
    threads: Option<usize>,
}

fn load(common: &Common, scenario: Scenario) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_path(p, Some(scenario)).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::for_scenario(scenario),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.trials {
        cfg.trials = t;
        if scenario == Scenario::CorrCompare {
            cfg.general.mc_samples = t;
        }
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            bail!("--threads must be >= 1");
        }
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

fn validate(common: &Common) -> Result<bool> {
    let seeds = common.trials.unwrap_or(100) as u64;
    let outcomes = pool(common.threads)?.install(|| run_invariant_suite(seeds));
    let mut text = String::new();
    for c in &outcomes {
        text.push_str(&format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
    }
    match &common.out {
        Some(p) => std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(outcomes.iter().all(|c| c.passed))
}

fn simulate(common: &Common, scenario: Scenario) -> Result<()> {
    let cfg = load(common, scenario)?;
    let table = pool(common.threads)?.install(|| run_experiment(&cfg))?;
    match &cfg.out {
        Some(path) => {
            table.export_csv(path).with_context(|| format!("writing {}", path.display()))?;
            if cfg.plot_script {
                let gp = path.with_extension("gp");
                std::fs::write(&gp, table.gnuplot_script(path)).with_context(|| format!("writing {}", gp.display()))?;
            }
            eprintln!("{}: {} rows written to {}", scenario, table.len(), path.display());
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            table.write_csv(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Pattern(c) => simulate(c, Scenario::PatternCompare),
        Command::Corr(c) => simulate(c, Scenario::CorrCompare),
        Command::SingleUser(c) => simulate(c, Scenario::SingleUser),
        Command::MultiUser(c) => simulate(c, Scenario::MultiUser),
        Command::MultiCell(c) => simulate(c, Scenario::MultiCell),
        Command::Validate(c) => match validate(c) {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("error: invariant suite reported failures");
                return ExitCode::FAILURE;
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
