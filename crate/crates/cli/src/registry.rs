//! Registered environments and algorithms, and their parameter tables.

use std::path::Path;

use ergodic_core::env::{BanditParams, CoinToss, CoinTossParams, DeliveryParams};
use ergodic_core::optim::default_fraction_grid;
use ergodic_core::process::MdpSpec;
use serde::Deserialize;

use crate::config::{params, Component};
use crate::error::{CliError, CliResult};

pub const ENVIRONMENTS: &[(&str, &str)] = &[
    ("bandit", "two-action multiplicative bandit (safe vs risky factor)"),
    ("coin_toss", "multiplicative coin toss with a grid of stake fractions"),
    ("delivery", "two-state delivery-robot MDP"),
    ("mdp_file", "finite MDP loaded from a TOML spec file"),
];

pub const ALGORITHMS: &[(&str, &str)] = &[
    ("ergodicity_check", "ensemble vs time averages of a finite Markov reward process"),
    ("fixed_fraction", "coin toss trajectories under a constant stake"),
    ("fraction_agent", "wealth-dependent stake trained on the temporal or one-step objective"),
    ("growth_q", "multi-step Q-learning with the growth-regularized target"),
    ("learn_and_train", "learn a return transformation from a probe, then train REINFORCE on it"),
    ("monte_carlo_preference", "time-indexed Monte-Carlo agents across a loss-probability grid"),
    ("preference", "bandit agents across a loss-probability grid, with indifference points"),
    ("q_learning", "tabular one-step Q-learning, compared with value iteration when possible"),
    ("reinforce", "REINFORCE on raw or log-transformed returns"),
];

fn unknown(kind: &'static str, name: &str, table: &[(&str, &str)]) -> CliError {
    let mut candidates: Vec<(usize, String)> = table
        .iter()
        .map(|(n, _)| (strsim::levenshtein(name, n), n.to_string()))
        .collect();
    candidates.sort();
    CliError::UnknownComponent {
        kind,
        name: name.to_string(),
        candidates: candidates.into_iter().map(|(_, n)| n).collect(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CoinTossCfg {
    initial_return: f64,
    win_mult: f64,
    loss_mult: f64,
    p_win: f64,
    additive: bool,
    grid: Option<Vec<f64>>,
}

impl Default for CoinTossCfg {
    fn default() -> Self {
        let p = CoinTossParams::default();
        Self {
            initial_return: p.initial_return,
            win_mult: p.win_mult,
            loss_mult: p.loss_mult,
            p_win: p.p_win,
            additive: false,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct BanditCfg {
    r_safe: f64,
    r_win: f64,
    r_loss: f64,
    p_loss: f64,
    initial_return: f64,
}

impl Default for BanditCfg {
    fn default() -> Self {
        let p = BanditParams::default();
        Self {
            r_safe: p.r_safe,
            r_win: p.r_win,
            r_loss: p.r_loss,
            p_loss: p.p_loss,
            initial_return: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct DeliveryCfg {
    delivery_points: f64,
    step_cost: f64,
    direct_steps: u32,
    safe_steps: u32,
    destroy_prob: f64,
    reward_floor: f64,
    initial_return: f64,
}

impl Default for DeliveryCfg {
    fn default() -> Self {
        let p = DeliveryParams::default();
        Self {
            delivery_points: p.delivery_points,
            step_cost: p.step_cost,
            direct_steps: p.direct_steps,
            safe_steps: p.safe_steps,
            destroy_prob: p.destroy_prob,
            reward_floor: p.reward_floor,
            initial_return: 100.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpFileCfg {
    path: String,
    #[serde(default)]
    initial_return: f64,
}

/// A resolved environment.
#[derive(Debug, Clone)]
pub enum EnvSpec {
    CoinToss {
        game: CoinToss,
        grid: Vec<f64>,
        additive: bool,
    },
    Bandit {
        params: BanditParams,
        initial_return: f64,
    },
    /// Finite MDPs: the delivery robot or a spec file.
    Finite {
        label: &'static str,
        mdp: MdpSpec,
        initial_return: f64,
    },
}

impl EnvSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EnvSpec::CoinToss { .. } => "coin_toss",
            EnvSpec::Bandit { .. } => "bandit",
            EnvSpec::Finite { label, .. } => label,
        }
    }
}

pub fn resolve_environment(c: &Component, base_dir: &Path) -> CliResult<EnvSpec> {
    match c.name.as_str() {
        "coin_toss" => {
            let cfg: CoinTossCfg = params(c, "environment")?;
            let game = CoinToss::new(CoinTossParams {
                initial_return: cfg.initial_return,
                win_mult: cfg.win_mult,
                loss_mult: cfg.loss_mult,
                p_win: cfg.p_win,
            })?;
            let grid = cfg.grid.unwrap_or_else(default_fraction_grid);
            if grid.is_empty() || grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(CliError::Config("environment `coin_toss`: grid must be non-empty within [0, 1]".into()));
            }
            Ok(EnvSpec::CoinToss {
                game,
                grid,
                additive: cfg.additive,
            })
        }
        "bandit" => {
            let cfg: BanditCfg = params(c, "environment")?;
            let p = BanditParams {
                r_safe: cfg.r_safe,
                r_win: cfg.r_win,
                r_loss: cfg.r_loss,
                p_loss: cfg.p_loss,
            };
            p.validate()?;
            Ok(EnvSpec::Bandit {
                params: p,
                initial_return: cfg.initial_return,
            })
        }
        "delivery" => {
            let cfg: DeliveryCfg = params(c, "environment")?;
            let mdp = ergodic_core::env::delivery_mdp(&DeliveryParams {
                delivery_points: cfg.delivery_points,
                step_cost: cfg.step_cost,
                direct_steps: cfg.direct_steps,
                safe_steps: cfg.safe_steps,
                destroy_prob: cfg.destroy_prob,
                reward_floor: cfg.reward_floor,
            })?;
            Ok(EnvSpec::Finite {
                label: "delivery",
                mdp,
                initial_return: cfg.initial_return,
            })
        }
        "mdp_file" => {
            let cfg: MdpFileCfg = params(c, "environment")?;
            let path = base_dir.join(&cfg.path);
            let mdp = load_mdp(&path)?;
            Ok(EnvSpec::Finite {
                label: "mdp_file",
                mdp,
                initial_return: cfg.initial_return,
            })
        }
        other => Err(unknown("environment", other, ENVIRONMENTS)),
    }
}

pub fn load_mdp(path: &Path) -> CliResult<MdpSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    MdpSpec::from_toml_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Checks that the algorithm name is registered, before any parameters are read.
pub fn check_algorithm(c: &Component) -> CliResult<()> {
    if ALGORITHMS.iter().any(|(n, _)| *n == c.name) {
        Ok(())
    } else {
        Err(unknown("algorithm", &c.name, ALGORITHMS))
    }
}

/// Rejects environment and algorithm pairs that do not fit together.
pub fn check_pair(env: &EnvSpec, algorithm: &str) -> CliResult<()> {
    let allowed: &[&str] = match algorithm {
        "fixed_fraction" | "learn_and_train" | "reinforce" | "fraction_agent" => &["coin_toss"],
        "preference" | "monte_carlo_preference" => &["bandit"],
        "ergodicity_check" => &["delivery", "mdp_file"],
        "growth_q" | "q_learning" => &["coin_toss", "bandit", "delivery", "mdp_file"],
        _ => &[],
    };
    if allowed.contains(&env.name()) {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "algorithm `{algorithm}` does not run on environment `{}` (supported: {})",
            env.name(),
            allowed.join(", ")
        )))
    }
}
