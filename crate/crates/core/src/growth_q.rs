//! Q-learning on a blend of discounted return and time-average growth.
//!
//! Each decision holds its action for a window of `N` steps. The window's
//! discounted reward sum and bootstrap form the expected-return target, and
//! the log ratio of the window's end and start returns forms the growth
//! target; `lambda` blends the two.

use std::collections::VecDeque;

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::optim::{CurvePoint, EpsilonSchedule, LearningCurve, LrSchedule, QTable};
use crate::rng::RngStream;

/// Growth assigned to a window that ends in ruin: the log of the smallest
/// positive normal ratio.
pub fn default_ruin_floor() -> f64 {
    f64::MIN_POSITIVE.ln()
}

/// The last `N + 1` returns.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBuffer {
    n: usize,
    ring: VecDeque<f64>,
}

impl WindowBuffer {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpec("window N must be at least 1".into()));
        }
        Ok(Self {
            n,
            ring: VecDeque::with_capacity(n + 1),
        })
    }

    pub fn window(&self) -> usize {
        self.n
    }

    pub fn push(&mut self, r: f64) {
        if self.ring.len() == self.n + 1 {
            self.ring.pop_front();
        }
        self.ring.push_back(r);
    }

    pub fn clear(&mut self) {
        self.ring.clear();
    }

    pub fn valid(&self) -> usize {
        self.ring.len()
    }

    pub fn is_full(&self) -> bool {
        self.ring.len() == self.n + 1
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.ring.iter().copied()
    }

    fn check(&self) -> Result<(f64, f64)> {
        if !self.is_full() {
            return Err(Error::InsufficientData(format!(
                "window holds {} of {} returns",
                self.ring.len(),
                self.n + 1
            )));
        }
        if self.ring.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::UndefinedGrowth);
        }
        Ok((self.ring[0], self.ring[self.n]))
    }

    /// `ln(R_k / R_{k-N})`.
    pub fn log_growth(&self) -> Result<f64> {
        let (first, last) = self.check()?;
        Ok((last / first).ln())
    }
}

/// `(R_k / R_{k-N})^(1/N)`, the per-step growth factor over the window.
pub fn geometric_mean_window(buffer: &WindowBuffer) -> Result<f64> {
    let (first, last) = buffer.check()?;
    Ok((last / first).powf(1.0 / buffer.n as f64))
}

/// Plain multi-step target `reward + discount * max q`; an empty row is
/// terminal.
pub fn n_step_target(q_next: &[f64], reward: f64, discount: f64) -> f64 {
    if q_next.is_empty() {
        reward
    } else {
        reward + discount * q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `(1 - lambda) * (reward + discount * max q) + lambda * growth_term`.
///
/// `discount` is the factor applied to the bootstrap, `gamma^N` for an
/// `N`-step reward. An empty row is terminal.
pub fn regularized_backup(q_next: &[f64], reward: f64, growth_term: f64, lambda: f64, discount: f64) -> f64 {
    (1.0 - lambda) * n_step_target(q_next, reward, discount) + lambda * growth_term
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthQConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub window_n: usize,
    pub learning_rate: LrSchedule,
    pub epsilon: EpsilonSchedule,
    pub total_steps: usize,
    /// Returns reset to their initial value after this many steps. The
    /// default of one window per episode starts every decision from the
    /// initial return, so wealth-proportional rewards of different scales
    /// are not averaged into one entry.
    pub episode_steps: usize,
    pub ruin_floor: f64,
    pub curve_points: usize,
}

impl Default for GrowthQConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            gamma: 0.99,
            window_n: 20,
            learning_rate: LrSchedule::harmonic(),
            epsilon: EpsilonSchedule {
                eps0: 1.0,
                eps_decay: 1e-5,
                eps_min: 0.2,
            },
            total_steps: 2_000_000,
            episode_steps: 20,
            ruin_floor: default_ruin_floor(),
            curve_points: 100,
        }
    }
}

impl GrowthQConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidSpec(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidSpec(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if self.window_n == 0 {
            return Err(Error::InvalidSpec("window_n must be at least 1".into()));
        }
        if self.total_steps == 0 || self.episode_steps == 0 {
            return Err(Error::InvalidSpec("total_steps and episode_steps must be positive".into()));
        }
        if !self.ruin_floor.is_finite() {
            return Err(Error::InvalidSpec("ruin_floor must be finite".into()));
        }
        Ok(())
    }
}

/// One backup: the experience of a window and the target built from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackupRecord {
    pub state: usize,
    pub action: usize,
    pub target: f64,
}

#[derive(Debug, Clone)]
pub struct GrowthQOutcome {
    pub q: QTable,
    pub policy: Vec<usize>,
    /// Stake of the greedy action in the initial state, for wealth processes.
    pub greedy_alpha: Option<f64>,
    pub curve: LearningCurve,
    pub backups: usize,
}

/// Multi-step Q-learning with the growth-regularized target.
pub fn multi_step_growth_q<E: Environment + ?Sized>(env: &E, config: &GrowthQConfig, seed: u64) -> Result<GrowthQOutcome> {
    run(env, config, seed, None)
}

/// As [`multi_step_growth_q`], also returning every backup target in order.
pub fn multi_step_growth_q_traced<E: Environment + ?Sized>(
    env: &E,
    config: &GrowthQConfig,
    seed: u64,
) -> Result<(GrowthQOutcome, Vec<BackupRecord>)> {
    let mut trace = Vec::new();
    let out = run(env, config, seed, Some(&mut trace))?;
    Ok((out, trace))
}

fn run<E: Environment + ?Sized>(
    env: &E,
    config: &GrowthQConfig,
    seed: u64,
    mut trace: Option<&mut Vec<BackupRecord>>,
) -> Result<GrowthQOutcome> {
    config.validate()?;
    let (ns, na) = (env.n_states(), env.n_actions());
    let mut q = QTable::zeros(ns, na);
    let mut visits = vec![0u64; ns * na];
    let mut rng = RngStream::new(seed, 0);
    let mut buffer = WindowBuffer::new(config.window_n)?;
    let mut curve = LearningCurve::new();
    let every = (config.total_steps / config.curve_points.max(1)).max(1);
    let mut next_mark = every;

    let mut steps = 0usize;
    let mut decisions = 0usize;
    let mut block_reward = 0.0;
    let mut block_windows = 0usize;
    let mut block_growth = 0.0;
    let mut block_growth_n = 0usize;
    let mut finals: Vec<f64> = Vec::new();

    'episodes: while steps < config.total_steps {
        let mut state = env.reset(&mut rng);
        let mut ret = env.initial_return();
        let mut ep_steps = 0usize;
        loop {
            let s0 = state;
            let action = if rng.uniform() < config.epsilon.at(decisions) {
                rng.index(na)
            } else {
                q.argmax(s0)
            };
            buffer.clear();
            buffer.push(ret);
            let mut reward = 0.0;
            let mut disc = 1.0;
            let mut ruined = false;
            let mut k = 0;
            while k < config.window_n {
                let tr = env.step(state, action, ret, &mut rng);
                reward += disc * tr.reward;
                disc *= config.gamma;
                ret += tr.reward;
                buffer.push(ret);
                state = tr.next_state;
                k += 1;
                steps += 1;
                ep_steps += 1;
                if tr.ruined {
                    ruined = true;
                    break;
                }
                if steps >= config.total_steps || ep_steps >= config.episode_steps {
                    break;
                }
            }
            let window_growth = if ruined { None } else { buffer.log_growth().ok() };
            let (growth, lambda) = match (ruined, window_growth) {
                (true, _) => (config.ruin_floor, config.lambda),
                (false, Some(g)) => (g, config.lambda),
                // Partial or undefined windows fall back to the plain target.
                (false, None) => (0.0, 0.0),
            };
            let q_next: &[f64] = if ruined { &[] } else { q.row(state) };
            let target = regularized_backup(q_next, reward, growth, lambda, disc);
            let idx = s0 * na + action;
            let lr = config.learning_rate.at(visits[idx]);
            visits[idx] += 1;
            let old = q.get(s0, action);
            q.set(s0, action, old + lr * (target - old));
            if !q.get(s0, action).is_finite() {
                return Err(Error::Diverged(format!("Q({s0}, {action}) became non-finite")));
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push(BackupRecord {
                    state: s0,
                    action,
                    target,
                });
            }
            decisions += 1;
            block_reward += reward;
            block_windows += 1;
            if let Some(g) = window_growth {
                block_growth += g / k as f64;
                block_growth_n += 1;
            }

            let episode_over = ruined || ep_steps >= config.episode_steps;
            if episode_over {
                finals.push(ret);
            }
            if steps >= next_mark {
                while next_mark <= steps {
                    next_mark += every;
                }
                let mean_final = if finals.is_empty() {
                    ret
                } else {
                    finals.iter().sum::<f64>() / finals.len() as f64
                };
                let greedy = q.argmax(0);
                curve.push(CurvePoint {
                    iteration: steps,
                    objective: block_reward / block_windows.max(1) as f64,
                    mean_final_return: mean_final,
                    mean_alpha: env.stake_grid().map_or(greedy as f64, |g| g[greedy]),
                    growth_estimate: (block_growth_n > 0).then(|| (block_growth / block_growth_n as f64).exp()),
                });
                block_reward = 0.0;
                block_windows = 0;
                block_growth = 0.0;
                block_growth_n = 0;
                finals.clear();
            }
            if steps >= config.total_steps {
                break 'episodes;
            }
            if episode_over {
                break;
            }
        }
    }
    let policy = q.greedy_policy();
    let greedy_alpha = env.stake_grid().map(|g| g[policy[0]]);
    Ok(GrowthQOutcome {
        q,
        policy,
        greedy_alpha,
        curve,
        backups: decisions,
    })
}
