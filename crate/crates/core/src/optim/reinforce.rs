use rayon::prelude::*;

use super::{CurvePoint, LearningCurve, ReturnTransform};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::process::TrajectoryRecord;
use crate::rng::RngStream;

/// Softmax policy over a grid of stakes. The stake is state independent.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedFractionPolicy {
    grid: Vec<f64>,
    logits: Vec<f64>,
    temperature: f64,
}

impl DiscretizedFractionPolicy {
    /// Uniform policy over `grid`.
    pub fn new(grid: Vec<f64>, temperature: f64) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyInput("stake grid"));
        }
        if grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidSpec("stake grid must lie in [0, 1]".into()));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpec("stake grid must increase strictly".into()));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidSpec("temperature must be positive".into()));
        }
        let logits = vec![0.0; grid.len()];
        Ok(Self {
            grid,
            logits,
            temperature,
        })
    }

    pub fn with_logits(mut self, logits: Vec<f64>) -> Result<Self> {
        if logits.len() != self.grid.len() {
            return Err(Error::Shape(format!(
                "{} logits for a grid of {}",
                logits.len(),
                self.grid.len()
            )));
        }
        self.logits = logits;
        Ok(self)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn probs(&self) -> Vec<f64> {
        let t = self.temperature;
        let m = self.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = self.logits.iter().map(|l| ((l - m) / t).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|x| x / z).collect()
    }

    pub fn mean_alpha(&self) -> f64 {
        self.probs().iter().zip(&self.grid).map(|(p, a)| p * a).sum()
    }

    /// Most probable stake; ties go to the smaller one.
    pub fn greedy_alpha(&self) -> f64 {
        let mut best = 0;
        for (i, &l) in self.logits.iter().enumerate() {
            if l > self.logits[best] {
                best = i;
            }
        }
        self.grid[best]
    }

    pub fn sample(&self, rng: &mut RngStream) -> usize {
        rng.categorical(&self.probs())
    }

    /// Gradient of `ln pi(action)` with respect to the logits.
    pub fn score(&self, action: usize) -> Vec<f64> {
        let mut g: Vec<f64> = self.probs().iter().map(|p| -p / self.temperature).collect();
        g[action] += 1.0 / self.temperature;
        g
    }
}

/// The per-step signal whose episode sum is maximized.
#[derive(Clone, Copy)]
pub enum RewardChannel<'a> {
    RawRewards,
    /// `h(R_k) - h(R_{k-1})`.
    TransformedIncrements(&'a dyn ReturnTransform),
}

impl RewardChannel<'_> {
    /// Episode sum of the channel; telescopes to a difference of endpoints.
    pub fn episode_objective(&self, traj: &TrajectoryRecord) -> f64 {
        match self {
            RewardChannel::RawRewards => traj.rewards.iter().sum(),
            RewardChannel::TransformedIncrements(h) => h.eval(traj.final_return()) - h.eval(traj.initial_return),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    None,
    /// Running mean of the objectives of all earlier batches.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReinforceConfig {
    pub episodes: usize,
    pub horizon: usize,
    pub learning_rate: f64,
    pub baseline: Baseline,
    /// Episodes per update.
    pub batch_size: usize,
}

impl Default for ReinforceConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            horizon: 100,
            learning_rate: 1.0,
            baseline: Baseline::Mean,
            batch_size: 10,
        }
    }
}

impl ReinforceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.horizon == 0 || self.batch_size == 0 {
            return Err(Error::InvalidSpec("episodes, horizon and batch_size must be positive".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidSpec("learning_rate must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReinforceOutcome {
    pub policy: DiscretizedFractionPolicy,
    pub curve: LearningCurve,
}

/// One episode with a stake drawn once and held for the horizon. The
/// episode ends early on ruin.
fn episode<E: Environment + ?Sized>(
    env: &E,
    policy: &DiscretizedFractionPolicy,
    horizon: usize,
    seed: u64,
    stream: u64,
) -> (usize, TrajectoryRecord) {
    let mut rng = RngStream::new(seed, stream);
    let action = policy.sample(&mut rng);
    let r0 = env.initial_return();
    let mut rec = TrajectoryRecord::with_capacity(seed, stream, r0, horizon);
    let mut state = env.reset(&mut rng);
    let mut ret = r0;
    for _ in 0..horizon {
        let tr = env.step(state, action, ret, &mut rng);
        rec.push(state, action, tr.reward);
        ret += tr.reward;
        state = tr.next_state;
        if tr.ruined {
            break;
        }
    }
    (action, rec)
}

/// Episodic REINFORCE on the episode sum of `channel`.
///
/// The policy's grid indexes the environment's actions. Episodes of a batch
/// run in parallel on streams numbered by episode, so results do not depend
/// on the thread count.
pub fn reinforce_train<E: Environment + ?Sized>(
    env: &E,
    mut policy: DiscretizedFractionPolicy,
    channel: RewardChannel<'_>,
    config: &ReinforceConfig,
    seed: u64,
) -> Result<ReinforceOutcome> {
    config.validate()?;
    if policy.grid.len() != env.n_actions() {
        return Err(Error::Shape(format!(
            "policy grid has {} points but the environment has {} actions",
            policy.grid.len(),
            env.n_actions()
        )));
    }
    let mut curve = LearningCurve::new();
    let mut baseline_sum = 0.0;
    let mut baseline_n = 0usize;
    let mut done = 0usize;
    let mut iteration = 0usize;
    while done < config.episodes {
        let batch = config.batch_size.min(config.episodes - done);
        let results: Vec<(usize, TrajectoryRecord)> = (done..done + batch)
            .into_par_iter()
            .map(|i| episode(env, &policy, config.horizon, seed, i as u64))
            .collect();
        let objectives: Vec<f64> = results.iter().map(|(_, t)| channel.episode_objective(t)).collect();
        let b = match config.baseline {
            Baseline::None => 0.0,
            Baseline::Mean if baseline_n > 0 => baseline_sum / baseline_n as f64,
            Baseline::Mean => 0.0,
        };
        let mut grad = vec![0.0; policy.logits.len()];
        for ((action, _), &g) in results.iter().zip(&objectives) {
            if !g.is_finite() {
                return Err(Error::Diverged(format!("non-finite episode objective {g}")));
            }
            for (acc, s) in grad.iter_mut().zip(policy.score(*action)) {
                *acc += (g - b) * s;
            }
        }
        for (l, g) in policy.logits.iter_mut().zip(&grad) {
            *l += config.learning_rate * g / batch as f64;
        }
        if let Some(bad) = policy.logits.iter().find(|l| !l.is_finite()) {
            return Err(Error::Diverged(format!(
                "logit became {bad} after {} episodes",
                done + batch
            )));
        }
        baseline_sum += objectives.iter().sum::<f64>();
        baseline_n += batch;
        done += batch;
        iteration += 1;
        let mean_final = results.iter().map(|(_, t)| t.final_return()).sum::<f64>() / batch as f64;
        curve.push(CurvePoint {
            iteration,
            objective: objectives.iter().sum::<f64>() / batch as f64,
            mean_final_return: mean_final,
            mean_alpha: policy.mean_alpha(),
            growth_estimate: None,
        });
    }
    Ok(ReinforceOutcome { policy, curve })
}

/// Rollouts of a frozen policy, one held stake per trajectory, on streams
/// `0..n` of `seed`.
pub fn evaluate_policy<E: Environment + ?Sized>(
    env: &E,
    policy: &DiscretizedFractionPolicy,
    horizon: usize,
    n: usize,
    seed: u64,
) -> Vec<TrajectoryRecord> {
    (0..n)
        .into_par_iter()
        .map(|i| episode(env, policy, horizon, seed, i as u64).1)
        .collect()
}
