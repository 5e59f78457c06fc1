//! One function per registered algorithm. Each turns an environment, a
//! parameter table and a seed into CSV bytes, summary metrics and plot jobs.

use std::io::Write;

use ergodic_core::chain::{classify_chain, induced_chain, induced_rewards};
use ergodic_core::diagnostics::{ergodicity_gap, growth_rate_estimate, positive_growth_fraction};
use ergodic_core::env::{
    indifference_expected, indifference_growth, BanditEnv, BanditParams, CoinToss, CoinTossEnv, CoinTossProcess,
    Environment, FiniteEnv,
};
use ergodic_core::growth_q::{default_ruin_floor, multi_step_growth_q, GrowthQConfig};
use ergodic_core::optim::{
    evaluate_policy, q_learning, reinforce_train, tabular_q_learning, value_iteration, Baseline,
    DiscretizedFractionPolicy, EpsilonSchedule, LearningCurve, LogTransform, LrSchedule, QLearningConfig, QTable,
    ReinforceConfig, RewardChannel,
};
use ergodic_core::process::{ensemble, write_trajectory_csv, FiniteMrp, MdpSpec, PolicySpec, TrajectoryRecord};
use ergodic_core::stats::{self, correlation};
use ergodic_core::temporal::{
    evaluate_fraction_agent, monte_carlo_sweep, preference_sweep, train_fraction_agent, trajectory_indifference,
    AgentConfig, EvalMode, FractionObjective, FractionTrainConfig, MonteCarloConfig, PreferenceCurve, StepSize,
    UpdateRule,
};
use ergodic_core::transform::{learn_and_train, LearnAndTrainConfig, LoessConfig, SmoothingAxis};
use serde::Deserialize;

use crate::config::{params, Component};
use crate::error::{CliError, CliResult};
use crate::plot::{PlotKind, PlotSpec};
use crate::registry::EnvSpec;

#[derive(Debug, Clone)]
pub struct PlotJob {
    pub inputs: Vec<String>,
    pub output: String,
    pub spec: PlotSpec,
}

/// Everything one seed produces. File names are relative to the seed directory.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub metrics: Vec<(String, f64)>,
    pub plots: Vec<PlotJob>,
}

impl Artifacts {
    fn file(&mut self, name: impl Into<String>, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) {
        let mut buf = Vec::new();
        write(&mut buf).expect("writing to memory");
        self.files.push((name.into(), buf));
    }

    fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push((name.into(), value));
    }

    fn plot(&mut self, inputs: &[&str], output: &str, spec: PlotSpec) {
        self.plots.push(PlotJob {
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            output: output.into(),
            spec,
        });
    }

    /// `metric,value` rows in insertion order.
    pub fn summary_csv(&self) -> Vec<u8> {
        let mut out = b"metric,value\n".to_vec();
        for (k, v) in &self.metrics {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }
}

pub fn run_seed(env: &EnvSpec, algorithm: &Component, seed: u64) -> CliResult<Artifacts> {
    match algorithm.name.as_str() {
        "fixed_fraction" => fixed_fraction(env, algorithm, seed),
        "learn_and_train" => run_learn_and_train(env, algorithm, seed),
        "reinforce" => run_reinforce(env, algorithm, seed),
        "growth_q" => run_growth_q(env, algorithm, seed),
        "q_learning" => run_q_learning(env, algorithm, seed),
        "preference" => run_preference(env, algorithm, seed),
        "monte_carlo_preference" => run_monte_carlo(env, algorithm, seed),
        "fraction_agent" => run_fraction_agent(env, algorithm, seed),
        "ergodicity_check" => run_ergodicity_check(env, algorithm, seed),
        other => Err(CliError::Runtime(format!("algorithm `{other}` has no runner"))),
    }
}

fn coin(env: &EnvSpec) -> CliResult<(CoinToss, CoinTossEnv)> {
    match env {
        EnvSpec::CoinToss { game, grid, additive } => {
            let e = if *additive {
                CoinTossEnv::additive(*game, grid.clone())
            } else {
                CoinTossEnv::new(*game, grid.clone())
            };
            Ok((*game, e))
        }
        _ => Err(CliError::Config("expected the coin_toss environment".into())),
    }
}

fn bandit(env: &EnvSpec) -> CliResult<BanditParams> {
    match env {
        EnvSpec::Bandit { params, .. } => Ok(*params),
        _ => Err(CliError::Config("expected the bandit environment".into())),
    }
}

fn curve_csv(curve: &LearningCurve) -> impl FnOnce(&mut Vec<u8>) -> std::io::Result<()> + '_ {
    move |w| curve.write_csv(w)
}

fn per_step_growth(trajs: &[TrajectoryRecord]) -> Vec<f64> {
    trajs
        .iter()
        .map(|t| growth_rate_estimate(&t.return_series()).per_step_log_growth)
        .collect()
}

fn write_growth(w: &mut Vec<u8>, growth: &[f64]) -> std::io::Result<()> {
    writeln!(w, "run,per_step_log_growth")?;
    for (i, g) in growth.iter().enumerate() {
        writeln!(w, "{i},{g}")?;
    }
    Ok(())
}

fn write_policy(w: &mut Vec<u8>, policy: &DiscretizedFractionPolicy) -> std::io::Result<()> {
    writeln!(w, "alpha,probability")?;
    for (a, p) in policy.grid().iter().zip(policy.probs()) {
        writeln!(w, "{a},{p}")?;
    }
    Ok(())
}

fn write_q(w: &mut Vec<u8>, q: &QTable) -> std::io::Result<()> {
    writeln!(w, "state,action,q")?;
    for s in 0..q.n_states() {
        for a in 0..q.n_actions() {
            writeln!(w, "{s},{a},{}", q.get(s, a))?;
        }
    }
    Ok(())
}

fn bool_metric(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Evaluation of a trained fraction policy: growth per run plus the first
/// few trajectories for plotting.
fn evaluate_into(
    art: &mut Artifacts,
    env: &CoinTossEnv,
    policy: &DiscretizedFractionPolicy,
    horizon: usize,
    runs: usize,
    seed: u64,
    title: &str,
) {
    let evals = evaluate_policy(env, policy, horizon, runs, seed);
    let growth = per_step_growth(&evals);
    art.metric("median_eval_growth", stats::median(&growth));
    art.metric("positive_growth_fraction", positive_growth_fraction(&evals));
    art.file("eval_growth.csv", |w| write_growth(w, &growth));
    let shown = &evals[..evals.len().min(10)];
    art.file("eval_trajectories.csv", |w| write_trajectory_csv(w, shown));
    art.plot(
        &["eval_trajectories.csv"],
        "eval_trajectories.svg",
        PlotSpec::new(PlotKind::Trajectory, title),
    );
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FixedFractionCfg {
    alpha: f64,
    horizon: usize,
    trajectories: usize,
}

impl Default for FixedFractionCfg {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            horizon: 1000,
            trajectories: 10,
        }
    }
}

fn fixed_fraction(env: &EnvSpec, c: &Component, seed: u64) -> CliResult<Artifacts> {
    let cfg: FixedFractionCfg = params(c, "algorithm")?;
    let (game, _) = coin(env)?;
    let trajs = ensemble(&CoinTossProcess { game, alpha: cfg.alpha }, cfg.horizon, cfg.trajectories, seed)?;
    let mut art = Artifacts::default();
    let width = cfg.trajectories.saturating_sub(1).to_string().len().max(3);
    let mut names = Vec::new();
    for (i, t) in trajs.iter().enumerate() {
        let name = format!("trajectory_{i:0width$}.csv");
        art.file(name.clone(), |w| write_trajectory_csv(w, std::slice::from_ref(t)));
        names.push(name);
    }
    let r0 = game.params.initial_return;
    let finals: Vec<f64> = trajs.iter().map(TrajectoryRecord::final_return).collect();
    art.metric("initial_return", r0);
    art.metric("expected_final_return", game.expected_return(cfg.alpha, cfg.horizon as u32));
    art.metric("mean_final_return", stats::mean(&finals));
    art.metric("median_final_return", stats::median(&finals));
    art.metric(
        "max_final_ratio",
        finals.iter().copied().fold(f64::NEG_INFINITY, f64::max) / r0,
    );
    art.metric(
        "fraction_below_initial",
        finals.iter().filter(|&&r| r < r0).count() as f64 / finals.len() as f64,
    );
    art.metric("median_log_growth", stats::median(&per_step_growth(&trajs)));
    if let Ok(g) = game.time_growth(cfg.alpha) {
        art.metric("analytic_log_growth", g);
    }
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    art.plot(
        &refs,
        "trajectories.svg",
        PlotSpec::new(PlotKind::Trajectory, format!("coin toss, alpha = {}", cfg.alpha)),
    );
    Ok(art)
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AxisName {
    Auto,
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum BaselineName {
    None,
    Mean,
}

#[derive(Debug)]
struct ReinforceParams {
    episodes: usize,
    horizon: usize,
    learning_rate: f64,
    batch_size: usize,
    baseline: BaselineName,
    temperature: f64,
}

impl Default for ReinforceParams {
    fn default() -> Self {
        let d = ReinforceConfig::default();
        Self {
            episodes: d.episodes,
            horizon: d.horizon,
            learning_rate: d.learning_rate,
            batch_size: d.batch_size,
            baseline: BaselineName::Mean,
            temperature: 1.0,
        }
    }
}

impl ReinforceParams {
    fn config(&self) -> ReinforceConfig {
        ReinforceConfig {
            episodes: self.episodes,
            horizon: self.horizon,
            learning_rate: self.learning_rate,
            baseline: match self.baseline {
                BaselineName::None => Baseline::None,
                BaselineName::Mean => Baseline::Mean,
            },
            batch_size: self.batch_size,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct LearnAndTrainParams {
    probe_alpha: f64,
    probe_horizon: usize,
    max_probe_attempts: usize,
    span: f64,
    grid_points: usize,
    robustness_iters: usize,
    axis: AxisName,
    episodes: usize,
    horizon: usize,
    learning_rate: f64,
    batch_size: usize,
    baseline: BaselineName,
    temperature: f64,
    eval_runs: usize,
    eval_horizon: usize,
}

impl Default for LearnAndTrainParams {
    fn default() -> Self {
        let d = LearnAndTrainConfig::default();
        let r = ReinforceParams::default();
        Self {
            probe_alpha: 1.0,
            probe_horizon: d.probe_horizon,
            max_probe_attempts: d.max_probe_attempts,
            span: d.loess.span,
            grid_points: d.loess.grid_points,
            robustness_iters: d.loess.robustness_iters,
            axis: AxisName::Auto,
            episodes: r.episodes,
            horizon: r.horizon,
            learning_rate: r.learning_rate,
            batch_size: r.batch_size,
            baseline: r.baseline,
            temperature: r.temperature,
            eval_runs: 100,
            eval_horizon: 1000,
        }
    }
}

impl LearnAndTrainParams {
    fn reinforce(&self) -> ReinforceParams {
        ReinforceParams {
            episodes: self.episodes,
            horizon: self.horizon,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            baseline: self.baseline,
            temperature: self.temperature,
        }
    }
}

fn run_learn_and_train(env: &EnvSpec, c: &Component, seed: u64) -> CliResult<Artifacts> {
    let p: LearnAndTrainParams = params(c, "algorithm")?;
    let (_, env) = coin(env)?;
    let cfg = LearnAndTrainConfig {
        probe_horizon: p.probe_horizon,
        max_probe_attempts: p.max_probe_attempts,
        loess: LoessConfig {
            span: p.span,
            grid_points: p.grid_points,
            robustness_iters: p.robustness_iters,
            axis: match p.axis {
                AxisName::Auto => SmoothingAxis::Auto,
                AxisName::Linear => SmoothingAxis::Linear,
                AxisName::Log => SmoothingAxis::Log,
            },
            ..LoessConfig::default()
        },
        reinforce: p.reinforce().config(),
        temperature: p.reinforce().temperature,
    };
    let out = learn_and_train(&env, &PolicySpec::fraction(p.probe_alpha)?, &cfg, seed)?;
    let mut art = Artifacts::default();
    art.metric("probe_attempts", out.probe_attempts as f64);
    art.metric("excluded_fraction", out.scatter.excluded_fraction());
    let visited = out.probe.return_series();
    if visited.iter().all(|&r| r > 0.0) {
        let hs: Vec<f64> = visited.iter().map(|&r| out.transform.eval(r)).collect();
        let ls: Vec<f64> = visited.iter().map(|r| r.ln()).collect();
        art.metric("correlation_with_log", correlation(&hs, &ls));
    }
    art.metric("mean_alpha", out.policy.mean_alpha());
    art.metric("greedy_alpha", out.policy.greedy_alpha());
    art.file("scatter.csv", |w| out.scatter.write_csv(w));
    art.file("transform.csv", |w| out.transform.write_csv(w));
    art.file("curve.csv", curve_csv(&out.curve));
    art.file("policy.csv", |w| write_policy(w, &out.policy));
    let log_axis = out.transform.axis() == SmoothingAxis::Log;
    let mut scatter = PlotSpec::new(PlotKind::Line, "probe scatter").columns("R", "log_r2");
    scatter.log_x = log_axis;
    let mut transform = PlotSpec::new(PlotKind::Line, "learned transformation").columns("R", "h");
    transform.log_x = log_axis;
    art.plot(&["scatter.csv"], "scatter.svg", scatter);
    art.plot(&["transform.csv"], "transform.svg", transform);
    art.plot(
        &["curve.csv"],
        "curve.svg",
        PlotSpec::new(PlotKind::Line, "training").columns("iteration", "mean_alpha"),
    );
    evaluate_into(&mut art, &env, &out.policy, p.eval_horizon, p.eval_runs, seed, "evaluation");
    Ok(art)
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ChannelName {
    Raw,
    Log,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ReinforceRunParams {
    channel: ChannelName,
    episodes: usize,
    horizon: usize,
    learning_rate: f64,
    batch_size: usize,
    baseline: BaselineName,
    temperature: f64,
    eval_runs: usize,
    eval_horizon: usize,
}

impl Default for ReinforceRunParams {
    fn default() -> Self {
        let r = ReinforceParams::default();
        Self {
            channel: ChannelName::Log,
            episodes: r.episodes,
            horizon: r.horizon,
            learning_rate: r.learning_rate,
            batch_size: r.batch_size,
            baseline: r.baseline,
            temperature: r.temperature,
            eval_runs: 100,
            eval_horizon: 1000,
        }
    }
}

impl ReinforceRunParams {
    fn reinforce(&self) -> ReinforceParams {
        ReinforceParams {
            episodes: self.episodes,
            horizon: self.horizon,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            baseline: self.baseline,
            temperature: self.temperature,
        }
    }
}

fn run_reinforce(env: &EnvSpec, c: &Component, seed: u64) -> CliResult<Artifacts> {
    let p: ReinforceRunParams = params(c, "algorithm")?;
    let (_, env) = coin(env)?;
    let policy = DiscretizedFractionPolicy::new(env.grid.clone(), p.reinforce().temperature)?;
    let channel = match p.channel {
        ChannelName::Raw => RewardChannel::RawRewards,
        ChannelName::Log => RewardChannel::TransformedIncrements(&LogTransform),
    };
    let out = reinforce_train(&env, policy, channel, &p.reinforce().config(), seed)?;
    let mut art = Artifacts::default();
    art.metric("mean_alpha", out.policy.mean_alpha());
    art.metric("greedy_alpha", out.policy.greedy_alpha());
    art.file("curve.csv", curve_csv(&out.curve));
    art.file("policy.csv", |w| write_policy(w, &out.policy));
    art.plot(
        &["curve.csv"],
        "curve.svg",
        PlotSpec::new(PlotKind::Line, "training").columns("iteration", "mean_alpha"),
    );
    evaluate_into(&mut art, &env, &out.policy, p.eval_horizon, p.eval_runs, seed, "evaluation");
    Ok(art)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GrowthQParams {
    lambda: f64,
    gamma: f64,
    window_n: usize,
    total_steps: usize,
    episode_steps: usize,
    ruin_floor: f64,
    curve_points: usize,
    lr0: f64,
    lr_decay: f64,
    eps0: f64,
    eps_decay: f64,
    eps_min: f64,
}

impl Default for GrowthQParams {
    fn default() -> Self {
        let d = GrowthQConfig::default();
        Self {
            lambda: d.lambda,
            gamma: d.gamma,
            window_n: d.window_n,
            total_steps: d.total_steps,
            episode_steps: d.episode_steps,
            ruin_floor: default_ruin_floor(),
            curve_points: d.curve_points,
            lr0: d.learning_rate.lr0,
            lr_decay: d.learning_rate.lr_decay,
            eps0: d.epsilon.eps0,
            eps_decay: d.epsilon.eps_decay,
            eps_min: d.epsilon.eps_min,
        }
    }
}

/// The environment behind a tabular learner.
fn tabular_env(env: &EnvSpec) -> CliResult<Box<dyn Environment>> {
    Ok(match env {
        EnvSpec::CoinToss { .. } => Box::new(coin(env)?.1),
        EnvSpec::Bandit { params, initial_return } => Box::new(BanditEnv {
            params: *params,
            initial_return: *initial_return,
        }),
        EnvSpec::Finite { mdp, initial_return, .. } => Box::new(FiniteEnv::new(mdp.clone(), *initial_return)),
    })
}

fn policy_metrics(art: &mut Artifacts, prefix: &str, policy: &[usize]) {
    for (s, a) in policy.iter().enumerate() {
        art.metric(format!("{prefix}_state_{s}"), *a as f64);
    }
}

fn run_growth_q(env: &EnvSpec, c: &Component, seed: u64) -> CliResult<Artifacts> {
    let p: GrowthQParams = params(c, "algorithm")?;
    let cfg = GrowthQConfig {
        lambda: p.lambda,
        gamma: p.gamma,
        window_n: p.window_n,
        learning_rate: LrSchedule {
            lr0: p.lr0,
            lr_decay: p.lr_decay,
        },
        epsilon: EpsilonSchedule {
            eps0: p.eps0,
            eps_decay: p.eps_decay,
            eps_min: p.eps_min,
        },
        total_steps: p.total_steps,
        episode_steps: p.episode_steps,
        ruin_floor: p.ruin_floor,
        curve_points: p.curve_points,
    };
    let e = tabular_env(env)?;
    let out = multi_step_growth_q(e.as_ref(), &cfg, seed)?;
    let mut art = Artifacts::default();
    if let Some(a) = out.greedy_alpha {
        art.metric("greedy_alpha", a);
    }
    policy_metrics(&mut art, "greedy_action", &out.policy);
    art.metric("backups", out.backups as f64);
    art.file("q_table.csv", |w| write_q(w, &out.q));
    art.file("curve.csv", curve_csv(&out.curve));
    art.plot(
        &["curve.csv"],
        "curve.svg",
        PlotSpec::new(PlotKind::Line, format!("growth-regularized Q, lambda = {}", p.lambda))
            .columns("iteration", "mean_alpha"),
    );
    Ok(art)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct QLearningParams {
    steps: usize,
    discount: f64,
    max_episode_steps: Option<usize>,
    curve_points: usize,
    lr0: f64,
    lr_decay: f64,
    eps0: f64,
    eps_decay: f64,
    eps_min: f64,
}

impl Default for QLearningParams {
    fn default() -> Self {
        let d = QLearningConfig::default();
        Self {
            steps: d.steps,
            discount: d.discount,
            max_episode_steps: None,
            curve_points: d.curve_points,
            lr0: d.learning_rate.lr0,
            lr_decay: d.learning_rate.lr_decay,
            eps0: d.epsilon.eps0,
            eps_decay: d.epsilon.eps_decay,
            eps_min: d.epsilon.eps_min,
        }
    }
}

fn run_q_learning(env: &EnvSpec, c: &Component, seed: u64) -> CliResult<Artifacts> {
    let p: QLearningParams = params(c, "algorithm")?;
    let cfg = QLearningConfig {
        steps: p.steps,
        learning_rate: LrSchedule {
            lr0: p.lr0,
            lr_decay: p.lr_decay,
        },
        discount: p.discount,
        epsilon: EpsilonSchedule {
            eps0: p.eps0,
            eps_decay: p.eps_decay,
            eps_min: p.eps_min,
        },
        max_episode_steps: p.max_episode_steps.unwrap_or(usize::MAX),
        curve_points: p.curve_points,
    };
    let mut art = Artifacts::default();
    let out = match env {
        EnvSpec::Finite { mdp, .. } => {
            let out = tabular_q_learning(mdp, &cfg, seed)?;
            let vi = value_iteration(mdp, p.discount, 1e-10, 1_000_000)?;
            let vi_policy = vi.greedy_policy();
            policy_metrics(&mut art, "vi_action", &vi_policy);
            art.metric("agrees_with_value_iteration", bool_metric(vi_policy == out.policy));
            art.file("value_iteration_q.csv", |w| write_q(w, &vi));
            out
        }
        _ => {
            let e = tabular_env(env)?;
            let out = q_learning(e.as_ref(), &cfg, seed)?;
            if let Some(grid) = e.stake_grid() {
                art.metric("greedy_alpha", grid[out.policy[0]]);
            }
            out
        }
    };
    policy_metrics(&mut art, "greedy_action", &out.policy);
    art.file("q_table.csv", |w| write_q(w, &out.q));
    art.file("curve.csv", curve_csv(&out.curve));
    art.plot(
        &["curve.csv"],
        "curve.svg",
        PlotSpec::new(PlotKind::Line, format!("Q-learning, discount = {}", p.discount))
            .columns("iteration", "objective"),
    );
    Ok(art)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum RuleName {
    OneStep,
    Temporal,
    Both,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum StepSizeParam {
    Named(StepSizeName),
    Constant(f64),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum StepSizeName {
    SampleAverage,
}

impl StepSizeParam {
    fn resolve(self) -> StepSize {
        match self {
            StepSizeParam::Named(StepSizeName::SampleAverage) => StepSize::SampleAverage,
            StepSizeParam::Constant(c) => StepSize::Constant(c),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PreferenceParams {
    rule: RuleName,
    p_grid: Option<Vec<f64>>,
    replicates: usize,
    episodes: usize,
    steps_per_episode: usize,
    epsilon: f64,
    eval_steps: usize,
    step_size: StepSizeParam,
}

impl Default for PreferenceParams {
    fn default() -> Self {
        let d = AgentConfig::new(UpdateRule::OneStepExpected);
        Self {
            rule: RuleName::Both,
            p_grid: None,
            replicates: 20,
            episodes: d.episodes,
            steps_per_episode: d.steps_per_episode,
            epsilon: d.epsilon,
            eval_steps: d.eval_steps,
            step_size: StepSizeParam::Named(StepSizeName::SampleAverage),
        }
    }
}

fn record_curve(art: &mut Artifacts, label: &str, curve: &PreferenceCurve, markers: Vec<f64>) {
    let file = format!("preference_{label}.csv");
    if curve.p.len() >= 2 {
        art.metric(format!("indifference_{label}"), curve.indifference.value());
        art.metric(format!("indifference_{label}_in_range"), bool_metric(curve.indifference.in_range()));
    } else {
        art.metric(format!("safe_preference_{label}"), curve.safe_preference[0]);
    }
    art.file(file.clone(), |w| curve.write_csv(w));
    let mut spec = PlotSpec::new(PlotKind::Preference, format!("safe preference ({label})"));
    spec.vlines = markers;
    art.plot(&[&file], &format!("preference_{label}.svg"), spec);
}

fn run_preference(env: &EnvSpec, c: &Component, seed: u64) -> CliResult<Artifacts> {
    let p: PreferenceParams = params(c, "algorithm")?;
    let params = bandit(env)?;
    let grid = p.p_grid.clone().unwrap_or_else(|| vec![params.p_loss]);
    let initial_return = match env {
        EnvSpec::Bandit { initial_return, .. } => *initial_return,
        _ => 1.0,
    };
    let p_e = indifference_expected(&params)?;
    let p_t = indifference_growth(&params)?;
    let mut art = Artifacts::default();
    art.metric("p_expected", p_e);
    art.metric("p_growth", p_t);
    let rules: &[(RuleName, UpdateRule, &str)] = &[
        (RuleName::OneStep, UpdateRule::OneStepExpected, "one_step"),
        (RuleName::Temporal, UpdateRule::TemporalCompounded, "temporal"),
    ];
    for &(name, rule, label) in rules {
        if p.rule != name && p.rule != RuleName::Both {
            continue;
        }
        let cfg = AgentConfig {
            rule,
            step_size: p.step_size.resolve(),
            epsilon: p.epsilon,
            episodes: p.episodes,
            steps_per_episode: p.steps_per_episode,
            initial_return,
            eval_steps: p.eval_steps,
        };
        cfg.validate()?;
        let curve = preference_sweep(&cfg, &params, &grid, p.replicates, seed)?;
        record_curve(&mut art, label, &curve, vec![p_t, p_e]);
    }
    Ok(art)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct MonteCarloParams {
    horizon: usize,
    episodes: usize,
    epsilon: f64,
    step_size: StepSizeParam,
    p_grid: Option<Vec<f64>>,
    replicates: usize,
}

impl Default for MonteCarloParams {
    fn default() -> Self {
        Self {
            horizon: 50,
            episodes: 20_000,
            epsilon: 0.1,
            step_size: StepSizeParam::Named(StepSizeName::SampleAverage),
            p_grid: None,
            replicates: 10,
        }
    }
}

fn run_monte_carlo(env: &EnvSpec, c: &Component, seed: u64) -> CliResult<Artifacts> {
    let p: MonteCarloParams = params(c, "algorithm")?;
    let params = bandit(env)?;
    let grid = p.p_grid.clone().unwrap_or_else(|| vec![params.p_loss]);
    let cfg = MonteCarloConfig {
        horizon: p.horizon,
        episodes: p.episodes,
        epsilon: p.epsilon,
        step_size: p.step_size.resolve(),
    };
    cfg.validate()?;
    let analytic = trajectory_indifference(&params, p.horizon);
    let mut art = Artifacts::default();
    art.metric("p_trajectory", analytic);
    art.metric("p_expected", indifference_expected(&params)?);
    art.metric("p_growth", indifference_growth(&params)?);
    let curve = monte_carlo_sweep(&params, &cfg, &grid, p.replicates, seed)?;
    record_curve(&mut art, "monte_carlo", &curve, vec![analytic]);
    Ok(art)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ObjectiveName {
    Temporal,
    OneStep,
    Both,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FractionParams {
    objective: ObjectiveName,
    episodes: usize,
    horizon: usize,
    learning_rate: f64,
    eval_runs: usize,
    eval_horizon: usize,
}

impl Default for FractionParams {
    fn default() -> Self {
        let d = FractionTrainConfig::default();
        Self {
            objective: ObjectiveName::Both,
            episodes: d.episodes,
            horizon: d.horizon,
            learning_rate: d.learning_rate,
            eval_runs: 200,
            eval_horizon: 1000,
        }
    }
}

fn run_fraction_agent(env: &EnvSpec, c: &Component, seed: u64) -> CliResult<Artifacts> {
    let p: FractionParams = params(c, "algorithm")?;
    let (game, _) = coin(env)?;
    let cfg = FractionTrainConfig {
        episodes: p.episodes,
        horizon: p.horizon,
        learning_rate: p.learning_rate,
    };
    let mut art = Artifacts::default();
    let mut eval_rows = Vec::new();
    let mut curves = Vec::new();
    let objectives: &[(ObjectiveName, FractionObjective, &str)] = &[
        (ObjectiveName::Temporal, FractionObjective::Temporal, "temporal"),
        (ObjectiveName::OneStep, FractionObjective::OneStepExpected, "one_step"),
    ];
    for &(name, objective, label) in objectives {
        if p.objective != name && p.objective != ObjectiveName::Both {
            continue;
        }
        let (agent, alphas) = train_fraction_agent(&game, objective, &cfg, seed)?;
        art.metric(format!("alpha_{label}"), agent.alpha(1.0));
        let file = format!("training_alpha_{label}.csv");
        art.file(file.clone(), |w| {
            writeln!(w, "episode,alpha")?;
            for (i, a) in alphas.iter().enumerate() {
                writeln!(w, "{i},{a}")?;
            }
            Ok(())
        });
        curves.push(file);
        for (mode, mode_label) in [(EvalMode::Fixed, "fixed"), (EvalMode::Recursive, "recursive")] {
            let growth = evaluate_fraction_agent(&game, &agent, mode, p.eval_horizon, p.eval_runs, seed);
            art.metric(format!("median_growth_{label}_{mode_label}"), stats::median(&growth));
            for (i, g) in growth.into_iter().enumerate() {
                eval_rows.push((label, mode_label, i, g));
            }
        }
    }
    art.file("eval_growth.csv", |w| {
        writeln!(w, "objective,mode,run,per_step_log_growth")?;
        for (o, m, i, g) in &eval_rows {
            writeln!(w, "{o},{m},{i},{g}")?;
        }
        Ok(())
    });
    let refs: Vec<&str> = curves.iter().map(String::as_str).collect();
    let mut spec = PlotSpec::new(PlotKind::Line, "stake at w = 1 during training").columns("episode", "alpha");
    spec.hlines = vec![game.optimal_fraction().fraction];
    art.plot(&refs, "training_alpha.svg", spec);
    Ok(art)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum StartParam {
    Named(StartName),
    State(usize),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum StartName {
    Initial,
    Stationary,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ErgodicityParams {
    policy: Option<Vec<usize>>,
    start: StartParam,
    horizon: usize,
    trajectories: usize,
    probe_times: Vec<usize>,
}

impl Default for ErgodicityParams {
    fn default() -> Self {
        Self {
            policy: None,
            start: StartParam::Named(StartName::Initial),
            horizon: 10_000,
            trajectories: 200,
            probe_times: vec![0, 1, 10, 100],
        }
    }
}

fn run_ergodicity_check(env: &EnvSpec, c: &Component, seed: u64) -> CliResult<Artifacts> {
    let p: ErgodicityParams = params(c, "algorithm")?;
    let mdp = match env {
        EnvSpec::Finite { mdp, .. } => mdp,
        _ => return Err(CliError::Config("ergodicity_check needs a finite MDP".into())),
    };
    let policy = match &p.policy {
        Some(t) => PolicySpec::deterministic(t.clone()),
        None if mdp.n_actions() == 1 => PolicySpec::deterministic(vec![0; mdp.n_states()]),
        None => PolicySpec::uniform(mdp.n_states(), mdp.n_actions()),
    };
    let chain = induced_chain(mdp, &policy)?;
    let rewards = induced_rewards(mdp, &policy)?;
    let report = classify_chain(&chain, Some(&rewards))?;
    let started: MdpSpec = match p.start {
        StartParam::Named(StartName::Initial) => mdp.clone(),
        StartParam::Named(StartName::Stationary) => {
            let pi = report
                .stationary
                .clone()
                .ok_or_else(|| CliError::Config("stationary start needs a unique stationary distribution".into()))?;
            mdp.clone().with_initial_dist(pi)?
        }
        StartParam::State(s) => mdp.clone().starting_at(s)?,
    };
    let gap = ergodicity_gap(
        &FiniteMrp {
            mdp: &started,
            policy: &policy,
        },
        p.horizon,
        p.trajectories,
        &p.probe_times,
        seed,
    )?;
    let mut art = Artifacts::default();
    art.metric("recurrent_classes", report.recurrent_classes.len() as f64);
    art.metric("transient_states", report.transient_states.len() as f64);
    if let Some(rho) = report.rho {
        art.metric("rho", rho);
    }
    art.metric("time_mean", gap.time_mean);
    art.metric("time_ci", gap.time_ci);
    art.metric("gap", gap.gap);
    art.metric("strict_gap", gap.strict_gap);
    art.metric("asymptotic_within_ci", bool_metric(gap.asymptotic_within_ci()));
    art.metric("strict_within_ci", bool_metric(gap.strict_within_ci()));
    art.file("chain.txt", |w| w.write_all(report.to_text().as_bytes()));
    art.file("chain.dot", |w| w.write_all(report.condensation_dot(&chain).as_bytes()));
    art.file("ensemble.csv", |w| gap.write_ensemble_csv(w));
    art.file("time.csv", |w| gap.write_time_csv(w));
    let mut spec = PlotSpec::new(PlotKind::Line, "ensemble average by time").columns("t", "ensemble_mean");
    spec.hlines = report.rho.into_iter().collect();
    art.plot(&["ensemble.csv"], "ensemble.svg", spec);
    Ok(art)
}
