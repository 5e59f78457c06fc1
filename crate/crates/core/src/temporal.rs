//! Temporal training on the multiplicative bandit.
//!
//! An episode repeats the safe/risky choice many times with the return
//! compounding. The one-step rule values an action by its mean factor and
//! the temporal rule by its mean log factor, so their indifference points
//! settle at the expected-value and growth-rate predictions. A
//! time-indexed agent trained on whole-trajectory returns interpolates
//! between the two as the horizon grows.

use rayon::prelude::*;

use crate::env::{bandit_step, BanditAction, BanditOutcome, BanditParams, CoinToss};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    /// Value tracks the realized one-step factor.
    OneStepExpected,
    /// Value tracks the log of the realized factor.
    TemporalCompounded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    SampleAverage,
    Constant(f64),
}

impl StepSize {
    fn at(self, n: u64) -> f64 {
        match self {
            StepSize::SampleAverage => 1.0 / (n + 1) as f64,
            StepSize::Constant(c) => c,
        }
    }
}

/// Values for `[safe, risk]` with an epsilon-greedy choice.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditAgent {
    pub values: [f64; 2],
    pub counts: [u64; 2],
    pub rule: UpdateRule,
    pub step_size: StepSize,
    pub epsilon: f64,
}

impl BanditAgent {
    pub fn new(rule: UpdateRule, step_size: StepSize, epsilon: f64) -> Self {
        Self {
            values: [0.0; 2],
            counts: [0; 2],
            rule,
            step_size,
            epsilon,
        }
    }

    /// Greedy action; ties are broken uniformly.
    pub fn greedy(&self, rng: &mut RngStream) -> BanditAction {
        let [s, r] = self.values;
        if s > r {
            BanditAction::Safe
        } else if r > s {
            BanditAction::Risk
        } else if rng.bernoulli(0.5) {
            BanditAction::Safe
        } else {
            BanditAction::Risk
        }
    }

    pub fn act(&self, rng: &mut RngStream, explore: bool) -> BanditAction {
        if explore && rng.uniform() < self.epsilon {
            BanditAction::from_index(rng.index(2))
        } else {
            self.greedy(rng)
        }
    }

    /// Moves the chosen action's value toward the signal of `factor`.
    pub fn update(&mut self, action: BanditAction, factor: f64) {
        let signal = match self.rule {
            UpdateRule::OneStepExpected => factor,
            UpdateRule::TemporalCompounded => factor.ln(),
        };
        let i = action.index();
        let lr = self.step_size.at(self.counts[i]);
        self.values[i] += lr * (signal - self.values[i]);
        self.counts[i] += 1;
    }

    /// Probability that a greedy choice is safe.
    pub fn greedy_safe_probability(&self) -> f64 {
        let [s, r] = self.values;
        if s > r {
            1.0
        } else if r > s {
            0.0
        } else {
            0.5
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub action: BanditAction,
    pub outcome: BanditOutcome,
    pub factor: f64,
    pub return_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub final_return: f64,
    pub steps: Vec<StepLog>,
}

impl EpisodeResult {
    pub fn log_growth(&self, initial_return: f64) -> f64 {
        (self.final_return / initial_return).ln()
    }
}

/// Plays `steps` compounded rounds from `initial_return`. With `learn` set
/// the agent explores and updates after every round.
pub fn temporal_episode(
    agent: &mut BanditAgent,
    params: &BanditParams,
    steps: usize,
    initial_return: f64,
    learn: bool,
    rng: &mut RngStream,
) -> Result<EpisodeResult> {
    if steps == 0 {
        return Err(Error::InvalidSpec("an episode needs at least one step".into()));
    }
    if !(initial_return > 0.0) {
        return Err(Error::InvalidSpec("initial return must be positive".into()));
    }
    let mut r = initial_return;
    let mut log = Vec::with_capacity(steps);
    for _ in 0..steps {
        let action = agent.act(rng, learn);
        let (next, outcome) = bandit_step(r, action, params, rng);
        let factor = outcome.factor(params);
        if learn {
            agent.update(action, factor);
        }
        r = next;
        log.push(StepLog {
            action,
            outcome,
            factor,
            return_after: r,
        });
    }
    Ok(EpisodeResult {
        final_return: r,
        steps: log,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    pub rule: UpdateRule,
    pub step_size: StepSize,
    /// Exploration during training; evaluation is greedy.
    pub epsilon: f64,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub initial_return: f64,
    pub eval_steps: usize,
}

impl AgentConfig {
    pub fn new(rule: UpdateRule) -> Self {
        Self {
            rule,
            step_size: StepSize::SampleAverage,
            epsilon: 0.1,
            episodes: 400,
            steps_per_episode: 100,
            initial_return: 1.0,
            eval_steps: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.steps_per_episode == 0 || self.eval_steps == 0 {
            return Err(Error::InvalidSpec("episodes and step counts must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidSpec("epsilon outside [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedAgent {
    pub agent: BanditAgent,
    /// Share of safe choices over the greedy evaluation block.
    pub safe_frequency: f64,
}

/// Trains one agent on stream `stream` of `seed`, then measures its safe
/// share over a frozen greedy block.
pub fn train_preference_stream(
    config: &AgentConfig,
    params: &BanditParams,
    seed: u64,
    stream: u64,
) -> Result<TrainedAgent> {
    config.validate()?;
    params.validate()?;
    let mut rng = RngStream::new(seed, stream);
    let mut agent = BanditAgent::new(config.rule, config.step_size, config.epsilon);
    for _ in 0..config.episodes {
        temporal_episode(&mut agent, params, config.steps_per_episode, config.initial_return, true, &mut rng)?;
    }
    let eval = temporal_episode(&mut agent, params, config.eval_steps, config.initial_return, false, &mut rng)?;
    let safe = eval.steps.iter().filter(|s| s.action == BanditAction::Safe).count();
    Ok(TrainedAgent {
        agent,
        safe_frequency: safe as f64 / config.eval_steps as f64,
    })
}

pub fn train_preference(config: &AgentConfig, params: &BanditParams, seed: u64) -> Result<TrainedAgent> {
    train_preference_stream(config, params, seed, 0)
}

/// Where a preference curve crosses one half.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Indifference {
    Crossing(f64),
    /// No crossing inside the grid; carries the grid end beyond which it lies.
    OutOfRange { boundary: f64 },
}

impl Indifference {
    pub fn value(&self) -> f64 {
        match *self {
            Indifference::Crossing(p) => p,
            Indifference::OutOfRange { boundary } => boundary,
        }
    }

    pub fn in_range(&self) -> bool {
        matches!(self, Indifference::Crossing(_))
    }
}

/// First crossing of one half by linear interpolation. A point exactly at
/// one half is the crossing; ties resolve to the lower `p`.
pub fn indifference_crossing(p: &[f64], preference: &[f64]) -> Indifference {
    for i in 0..p.len() {
        if preference[i] == 0.5 {
            return Indifference::Crossing(p[i]);
        }
        if i + 1 < p.len() && (preference[i] - 0.5) * (preference[i + 1] - 0.5) < 0.0 {
            let t = (0.5 - preference[i]) / (preference[i + 1] - preference[i]);
            return Indifference::Crossing(p[i] + t * (p[i + 1] - p[i]));
        }
    }
    let above = preference.first().is_some_and(|&x| x > 0.5);
    let boundary = if above {
        p.first().copied().unwrap_or(f64::NAN)
    } else {
        p.last().copied().unwrap_or(f64::NAN)
    };
    Indifference::OutOfRange { boundary }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceCurve {
    pub p: Vec<f64>,
    pub safe_preference: Vec<f64>,
    /// 95% half-width over replicate agents.
    pub ci: Vec<f64>,
    pub indifference: Indifference,
}

impl PreferenceCurve {
    /// Rows `p,safe_preference,ci`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "p,safe_preference,ci")?;
        for ((p, s), c) in self.p.iter().zip(&self.safe_preference).zip(&self.ci) {
            writeln!(out, "{p},{s},{c}")?;
        }
        Ok(())
    }
}

fn check_grid(p_grid: &[f64]) -> Result<()> {
    if p_grid.is_empty() {
        return Err(Error::EmptyInput("p grid"));
    }
    if p_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidSpec("p grid must lie in [0, 1]".into()));
    }
    if p_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSpec("p grid must increase strictly".into()));
    }
    Ok(())
}

fn curve_from(p_grid: &[f64], per_point: Vec<Vec<f64>>) -> PreferenceCurve {
    let mut safe_preference = Vec::with_capacity(p_grid.len());
    let mut ci = Vec::with_capacity(p_grid.len());
    for xs in &per_point {
        let (m, h) = stats::mean_ci(xs);
        safe_preference.push(m);
        ci.push(if h.is_finite() { h } else { 0.0 });
    }
    let indifference = indifference_crossing(p_grid, &safe_preference);
    PreferenceCurve {
        p: p_grid.to_vec(),
        safe_preference,
        ci,
        indifference,
    }
}

/// Trains `replicates` independent agents at every loss probability of the
/// grid. Agent `j` at point `i` uses stream `i * replicates + j`.
pub fn preference_sweep(
    config: &AgentConfig,
    params: &BanditParams,
    p_grid: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<PreferenceCurve> {
    check_grid(p_grid)?;
    if replicates == 0 {
        return Err(Error::InvalidSpec("replicates must be positive".into()));
    }
    let per_point: Vec<Vec<f64>> = p_grid
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let params = params.with_p_loss(p);
            (0..replicates)
                .into_par_iter()
                .map(|j| {
                    train_preference_stream(config, &params, seed, (i * replicates + j) as u64)
                        .map(|t| t.safe_frequency)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(curve_from(p_grid, per_point))
}

/// One value table per time step, trained on whole trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeIndexedAgent {
    pub tables: Vec<[f64; 2]>,
    pub counts: Vec<[u64; 2]>,
}

impl TimeIndexedAgent {
    pub fn new(horizon: usize) -> Self {
        Self {
            tables: vec![[0.0; 2]; horizon],
            counts: vec![[0; 2]; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.tables.len()
    }

    /// Mean over time steps of the probability of a greedy safe choice.
    pub fn safe_preference(&self) -> f64 {
        let total: f64 = self
            .tables
            .iter()
            .map(|[s, r]| match s.partial_cmp(r) {
                Some(std::cmp::Ordering::Greater) => 1.0,
                Some(std::cmp::Ordering::Less) => 0.0,
                _ => 0.5,
            })
            .sum();
        total / self.tables.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloConfig {
    pub horizon: usize,
    pub episodes: usize,
    pub epsilon: f64,
    pub step_size: StepSize,
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.episodes == 0 {
            return Err(Error::InvalidSpec("horizon and episodes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidSpec("epsilon outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Every-visit Monte-Carlo training of a time-indexed agent. After each
/// episode, the per-step normalized trajectory return `(R_H / R_0)^(1/H)`
/// is the target for every visited `(t, action)`.
pub fn monte_carlo_trajectory_update(
    agent: TimeIndexedAgent,
    params: &BanditParams,
    config: &MonteCarloConfig,
    seed: u64,
    stream: u64,
) -> Result<TimeIndexedAgent> {
    config.validate()?;
    params.validate()?;
    if agent.horizon() != config.horizon {
        return Err(Error::Shape(format!(
            "agent has {} tables for horizon {}",
            agent.horizon(),
            config.horizon
        )));
    }
    let mut agent = agent;
    let mut rng = RngStream::new(seed, stream);
    let mut actions = vec![0usize; config.horizon];
    let inv_h = 1.0 / config.horizon as f64;
    for _ in 0..config.episodes {
        let mut r = 1.0;
        for (t, slot) in actions.iter_mut().enumerate() {
            let [s, k] = agent.tables[t];
            let a = if rng.uniform() < config.epsilon {
                rng.index(2)
            } else if s > k {
                0
            } else if k > s {
                1
            } else {
                rng.index(2)
            };
            r = bandit_step(r, BanditAction::from_index(a), params, &mut rng).0;
            *slot = a;
        }
        let target = r.powf(inv_h);
        for (t, &a) in actions.iter().enumerate() {
            let lr = config.step_size.at(agent.counts[t][a]);
            agent.tables[t][a] += lr * (target - agent.tables[t][a]);
            agent.counts[t][a] += 1;
        }
    }
    Ok(agent)
}

/// Loss probability at which a time-indexed agent trained on horizon `h`
/// is indifferent: `E[f^(1/h)] = r_safe^(1/h)` for the risky factor `f`.
pub fn trajectory_indifference(params: &BanditParams, horizon: usize) -> f64 {
    let e = 1.0 / horizon as f64;
    let (w, l, s) = (params.r_win.powf(e), params.r_loss.powf(e), params.r_safe.powf(e));
    (w - s) / (w - l)
}

/// Preference sweep for time-indexed Monte-Carlo agents.
pub fn monte_carlo_sweep(
    params: &BanditParams,
    config: &MonteCarloConfig,
    p_grid: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<PreferenceCurve> {
    check_grid(p_grid)?;
    if replicates == 0 {
        return Err(Error::InvalidSpec("replicates must be positive".into()));
    }
    let per_point: Vec<Vec<f64>> = p_grid
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let params = params.with_p_loss(p);
            (0..replicates)
                .into_par_iter()
                .map(|j| {
                    monte_carlo_trajectory_update(
                        TimeIndexedAgent::new(config.horizon),
                        &params,
                        config,
                        seed,
                        (i * replicates + j) as u64,
                    )
                    .map(|a| a.safe_preference())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(curve_from(p_grid, per_point))
}

/// Coin-toss stake as a function of normalized wealth `w = R / R_0`:
/// `alpha(w) = sigmoid(theta0 + theta1 * w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionAgent {
    pub theta: [f64; 2],
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl FractionAgent {
    pub fn alpha(&self, w: f64) -> f64 {
        sigmoid(self.theta[0] + self.theta[1] * w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FractionObjective {
    /// Pathwise gradient of `ln(R_T / R_0)`.
    Temporal,
    /// Gradient of the mean one-step factor.
    OneStepExpected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// The stake predicted at `w = 1`, applied at every step.
    Fixed,
    /// The stake recomputed from the agent's own normalized wealth.
    Recursive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionTrainConfig {
    pub episodes: usize,
    pub horizon: usize,
    pub learning_rate: f64,
}

impl Default for FractionTrainConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            horizon: 100,
            learning_rate: 0.05,
        }
    }
}

/// Gradient ascent on the chosen objective along simulated coin-toss
/// episodes. Normalized wealth enters as an input without being
/// differentiated.
pub fn train_fraction_agent(
    game: &CoinToss,
    objective: FractionObjective,
    config: &FractionTrainConfig,
    seed: u64,
) -> Result<(FractionAgent, Vec<f64>)> {
    if config.episodes == 0 || config.horizon == 0 {
        return Err(Error::InvalidSpec("episodes and horizon must be positive".into()));
    }
    let p = game.params;
    let mut agent = FractionAgent { theta: [0.0, 0.0] };
    let mut rng = RngStream::new(seed, 0);
    let mut alphas = Vec::with_capacity(config.episodes);
    for _ in 0..config.episodes {
        let mut grad = [0.0; 2];
        let mut w = 1.0;
        for _ in 0..config.horizon {
            let a = agent.alpha(w);
            let m = if rng.bernoulli(p.p_win) { p.win_mult } else { -p.loss_mult };
            let da = a * (1.0 - a);
            let g = match objective {
                FractionObjective::Temporal => m / (1.0 + m * a),
                FractionObjective::OneStepExpected => m,
            };
            grad[0] += g * da;
            grad[1] += g * da * w;
            w *= 1.0 + m * a;
        }
        for (t, g) in agent.theta.iter_mut().zip(grad) {
            *t += config.learning_rate * g / config.horizon as f64;
        }
        if agent.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Diverged("fraction agent parameters became non-finite".into()));
        }
        alphas.push(agent.alpha(1.0));
    }
    Ok((agent, alphas))
}

/// Per-step log growth of `n` evaluation runs of `horizon` steps.
pub fn evaluate_fraction_agent(
    game: &CoinToss,
    agent: &FractionAgent,
    mode: EvalMode,
    horizon: usize,
    n: usize,
    seed: u64,
) -> Vec<f64> {
    let p = game.params;
    let fixed = agent.alpha(1.0);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i as u64);
            let mut log_w: f64 = 0.0;
            for _ in 0..horizon {
                let a = match mode {
                    EvalMode::Fixed => fixed,
                    EvalMode::Recursive => agent.alpha(log_w.exp()),
                };
                let m = if rng.bernoulli(p.p_win) { p.win_mult } else { -p.loss_mult };
                log_w += (1.0 + m * a).ln();
            }
            log_w / horizon as f64
        })
        .collect()
}
