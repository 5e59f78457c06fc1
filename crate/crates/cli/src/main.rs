//! `ergo`: configuration-driven experiments on ergodic and non-ergodic
//! reward processes.

mod config;
mod error;
mod experiments;
mod plot;
mod registry;
mod runner;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ergodic_core::chain::{classify_chain, induced_chain, induced_rewards, is_ergodic_mdp, ErgodicVerdict, DEFAULT_POLICY_CAP};
use ergodic_core::process::PolicySpec;

use crate::error::{CliError, CliResult};
use crate::plot::{PlotKind, PlotSpec};

#[derive(Parser)]
#[command(name = "ergo", version, about = "Ergodicity experiments: chains, wealth processes and learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the chain an MDP induces under a policy.
    #[command(alias = "chainlint")]
    AnalyzeChain {
        mdp: PathBuf,
        /// Policy file; defaults to action 0 for single-action MDPs and
        /// the uniform policy otherwise.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Write the condensation graph in DOT format here.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Run an experiment config: one output directory per config.
    Run {
        config: PathBuf,
        /// Output directory, overriding the config and $ERGO_OUTPUT_ROOT.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a config over the cartesian product of its [sweep] grid.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render CSV outputs to SVG.
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        x: Option<String>,
        #[arg(long)]
        y: Option<String>,
        #[arg(long)]
        log_x: bool,
        #[arg(long)]
        log_y: bool,
        /// Draw a linear y axis for trajectory plots.
        #[arg(long, conflicts_with = "log_y")]
        linear_y: bool,
        #[arg(long)]
        vline: Vec<f64>,
        #[arg(long)]
        hline: Vec<f64>,
        #[arg(long, default_value = "")]
        title: String,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// List registered environments and algorithms.
    List,
}

fn analyze_chain(mdp_path: &Path, policy_path: Option<&Path>, dot: Option<&Path>) -> CliResult<String> {
    let mdp = registry::load_mdp(mdp_path)?;
    let mut out = String::new();
    let policy = match policy_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            PolicySpec::from_toml_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None if mdp.n_actions() == 1 => PolicySpec::deterministic(vec![0; mdp.n_states()]),
        None => {
            let verdict = match is_ergodic_mdp(&mdp, DEFAULT_POLICY_CAP) {
                ErgodicVerdict::Ergodic => "ergodic".to_string(),
                ErgodicVerdict::NotErgodic { counterexample } => {
                    format!("not ergodic (policy {counterexample:?} breaks it)")
                }
                ErgodicVerdict::Inconclusive { checked } => format!("inconclusive after {checked} policies"),
            };
            out.push_str(&format!("mdp: {verdict}\npolicy: uniform\n"));
            PolicySpec::uniform(mdp.n_states(), mdp.n_actions())
        }
    };
    let chain = induced_chain(&mdp, &policy).map_err(|e| CliError::Config(e.to_string()))?;
    let rewards = induced_rewards(&mdp, &policy).map_err(|e| CliError::Config(e.to_string()))?;
    let report = classify_chain(&chain, Some(&rewards)).map_err(|e| CliError::Runtime(e.to_string()))?;
    out.push_str(&report.to_text());
    if let Some(d) = dot {
        std::fs::write(d, report.condensation_dot(&chain))?;
    }
    Ok(out)
}

fn list() -> String {
    let mut out = String::from("environments:\n");
    for (n, d) in registry::ENVIRONMENTS {
        out.push_str(&format!("  {n:<24} {d}\n"));
    }
    out.push_str("algorithms:\n");
    for (n, d) in registry::ALGORITHMS {
        out.push_str(&format!("  {n:<24} {d}\n"));
    }
    out
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::AnalyzeChain { mdp, policy, dot } => {
            print!("{}", analyze_chain(&mdp, policy.as_deref(), dot.as_deref())?);
        }
        Command::Run { config, out } => {
            let dir = runner::cmd_run(&config, out.as_deref())?;
            println!("wrote {}", dir.display());
        }
        Command::Sweep { config, out } => {
            let dir = runner::cmd_sweep(&config, out.as_deref())?;
            println!("wrote {}", dir.display());
        }
        Command::Plot {
            kind,
            output,
            x,
            y,
            log_x,
            log_y,
            linear_y,
            vline,
            hline,
            title,
            inputs,
        } => {
            let mut spec = PlotSpec::new(kind, title);
            spec.x = x;
            spec.y = y;
            spec.log_x = log_x;
            spec.log_y = (spec.log_y || log_y) && !linear_y;
            spec.vlines = vline;
            spec.hlines = hline;
            let texts = inputs
                .iter()
                .map(|p| {
                    std::fs::read_to_string(p)
                        .map(|t| (p.display().to_string(), t))
                        .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
                })
                .collect::<CliResult<Vec<_>>>()?;
            std::fs::write(&output, plot::render(&texts, &spec)?)?;
        }
        Command::List => print!("{}", list()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
