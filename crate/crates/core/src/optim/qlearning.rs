use super::{CurvePoint, EpsilonSchedule, LearningCurve, LrSchedule};
use crate::env::{Environment, FiniteEnv};
use crate::error::{Error, Result};
use crate::process::MdpSpec;
use crate::rng::RngStream;

/// Action values indexed by `(state, action)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Best action; ties go to the lowest index.
    pub fn argmax(&self, s: usize) -> usize {
        let row = self.row(s);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    pub fn greedy_policy(&self) -> Vec<usize> {
        (0..self.n_states).map(|s| self.argmax(s)).collect()
    }

    /// Max-norm distance to a table of the same shape.
    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Discounted optimal action values by value iteration. Stops once a sweep
/// changes no entry by more than `tol`.
pub fn value_iteration(mdp: &MdpSpec, discount: f64, tol: f64, max_sweeps: usize) -> Result<QTable> {
    if !(0.0..1.0).contains(&discount) {
        return Err(Error::InvalidSpec(format!("discount {discount} outside [0, 1)")));
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut q = QTable::zeros(ns, na);
    for _ in 0..max_sweeps {
        let v: Vec<f64> = (0..ns).map(|s| q.max(s)).collect();
        let mut delta: f64 = 0.0;
        for s in 0..ns {
            for a in 0..na {
                let row = mdp.kernel_row(s, a);
                let mut x = 0.0;
                for (t, &p) in row.iter().enumerate() {
                    if p > 0.0 {
                        x += p * (mdp.reward(s, a, t) + discount * v[t]);
                    }
                }
                delta = delta.max((x - q.get(s, a)).abs());
                q.set(s, a, x);
            }
        }
        if delta <= tol {
            return Ok(q);
        }
    }
    Err(Error::Diverged(format!("value iteration did not reach {tol} in {max_sweeps} sweeps")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QLearningConfig {
    pub steps: usize,
    pub learning_rate: LrSchedule,
    pub discount: f64,
    pub epsilon: EpsilonSchedule,
    /// Episodes are cut after this many steps; ruin always ends one.
    pub max_episode_steps: usize,
    /// Learning-curve points recorded over the run.
    pub curve_points: usize,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        Self {
            steps: 100_000,
            learning_rate: LrSchedule::harmonic(),
            discount: 0.99,
            epsilon: EpsilonSchedule::constant(0.1),
            max_episode_steps: usize::MAX,
            curve_points: 100,
        }
    }
}

impl QLearningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::InvalidSpec(format!("discount {} outside [0, 1)", self.discount)));
        }
        if self.steps == 0 || self.max_episode_steps == 0 {
            return Err(Error::InvalidSpec("steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct QLearningOutcome {
    pub q: QTable,
    pub policy: Vec<usize>,
    pub curve: LearningCurve,
}

/// One-step Q-learning with an epsilon-greedy behaviour policy. Ruin is
/// terminal: its target carries no bootstrap term.
pub fn q_learning<E: Environment + ?Sized>(env: &E, config: &QLearningConfig, seed: u64) -> Result<QLearningOutcome> {
    config.validate()?;
    let (ns, na) = (env.n_states(), env.n_actions());
    let mut q = QTable::zeros(ns, na);
    let mut visits = vec![0u64; ns * na];
    let mut rng = RngStream::new(seed, 0);
    let mut curve = LearningCurve::new();
    let every = (config.steps / config.curve_points.max(1)).max(1);

    let mut state = env.reset(&mut rng);
    let mut ret = env.initial_return();
    let mut ep_len = 0;
    let mut block_reward = 0.0;
    let mut finals = Vec::new();
    for t in 0..config.steps {
        let action = if rng.uniform() < config.epsilon.at(t) {
            rng.index(na)
        } else {
            q.argmax(state)
        };
        let tr = env.step(state, action, ret, &mut rng);
        let target = if tr.ruined {
            tr.reward
        } else {
            tr.reward + config.discount * q.max(tr.next_state)
        };
        let k = state * na + action;
        let lr = config.learning_rate.at(visits[k]);
        visits[k] += 1;
        let old = q.get(state, action);
        q.set(state, action, old + lr * (target - old));

        block_reward += tr.reward;
        ret += tr.reward;
        ep_len += 1;
        if tr.ruined || ep_len >= config.max_episode_steps {
            finals.push(ret);
            state = env.reset(&mut rng);
            ret = env.initial_return();
            ep_len = 0;
        } else {
            state = tr.next_state;
        }
        if (t + 1) % every == 0 {
            let mean_final = if finals.is_empty() {
                ret
            } else {
                finals.iter().sum::<f64>() / finals.len() as f64
            };
            curve.push(CurvePoint {
                iteration: t + 1,
                objective: block_reward / every as f64,
                mean_final_return: mean_final,
                mean_alpha: q.argmax(0) as f64,
                growth_estimate: None,
            });
            block_reward = 0.0;
            finals.clear();
        }
    }
    if q.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged("non-finite action value".into()));
    }
    let policy = q.greedy_policy();
    Ok(QLearningOutcome { q, policy, curve })
}

/// [`q_learning`] on a finite MDP; entering a dead absorbing state ends
/// the episode.
pub fn tabular_q_learning(mdp: &MdpSpec, config: &QLearningConfig, seed: u64) -> Result<QLearningOutcome> {
    q_learning(&FiniteEnv::new(mdp.clone(), 0.0), config, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{delivery_mdp, DeliveryParams, DIRECT, OPERATIONAL, SAFE};

    #[test]
    fn rewarding_action_is_learned() {
        // Two states; action 1 pays 1, action 0 pays 0; moves are uniform.
        let mdp = MdpSpec::new(
            2,
            2,
            vec![0.5; 8],
            vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0],
            vec![1.0, 0.0],
        )
        .unwrap();
        let cfg = QLearningConfig {
            steps: 20_000,
            discount: 0.9,
            epsilon: EpsilonSchedule::constant(0.2),
            ..Default::default()
        };
        let out = tabular_q_learning(&mdp, &cfg, 3).unwrap();
        assert_eq!(out.policy, vec![1, 1]);
    }

    #[test]
    fn value_iteration_on_delivery() {
        let mdp = delivery_mdp(&DeliveryParams::default()).unwrap();
        let far = value_iteration(&mdp, 0.99, 1e-10, 100_000).unwrap();
        assert_eq!(far.argmax(OPERATIONAL), SAFE);
        assert!((far.get(OPERATIONAL, SAFE) - 8000.0).abs() < 1e-6);
        let near = value_iteration(&mdp, 0.1, 1e-12, 10_000).unwrap();
        assert_eq!(near.argmax(OPERATIONAL), DIRECT);
        // V = 89 / (1 - 0.1 * 0.99) under the direct route.
        let v = 89.0 / (1.0 - 0.1 * 0.99);
        assert!((near.get(OPERATIONAL, DIRECT) - v).abs() < 1e-9);
        assert!((near.get(OPERATIONAL, SAFE) - (80.0 + 0.1 * v)).abs() < 1e-9);
        assert!(value_iteration(&mdp, 1.0, 1e-9, 10).is_err());
    }

    #[test]
    fn delivery_policies_by_discount() {
        let mdp = delivery_mdp(&DeliveryParams::default()).unwrap();
        let explore = EpsilonSchedule::constant(1.0);
        let myopic = QLearningConfig {
            steps: 200_000,
            discount: 0.1,
            epsilon: explore,
            ..Default::default()
        };
        assert_eq!(tabular_q_learning(&mdp, &myopic, 1).unwrap().policy[OPERATIONAL], DIRECT);
        let patient = QLearningConfig {
            steps: 2_000_000,
            discount: 0.99,
            learning_rate: LrSchedule { lr0: 1.0, lr_decay: 0.01 },
            epsilon: explore,
            ..Default::default()
        };
        assert_eq!(tabular_q_learning(&mdp, &patient, 1).unwrap().policy[OPERATIONAL], SAFE);
    }

    #[test]
    fn argmax_ties_go_low() {
        let mut q = QTable::zeros(1, 3);
        q.set(0, 1, 2.0);
        q.set(0, 2, 2.0);
        assert_eq!(q.argmax(0), 1);
    }
}
