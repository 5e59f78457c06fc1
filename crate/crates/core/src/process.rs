//! Finite MDPs, policies, trajectories, and seeded rollouts.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::rng::RngStream;

const ROW_TOL: f64 = 1e-12;

/// A finite MDP with transition-attached rewards `g(s, a, s')`.
///
/// `kernel` and `reward` are dense, row-major over `(state, action, next)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpSpec {
    n_states: usize,
    n_actions: usize,
    kernel: Vec<f64>,
    reward: Vec<f64>,
    initial_dist: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpFile {
    n_states: usize,
    n_actions: usize,
    kernel: Vec<f64>,
    reward: Vec<f64>,
    initial_dist: Vec<f64>,
}

impl MdpSpec {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        kernel: Vec<f64>,
        reward: Vec<f64>,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidSpec("n_states and n_actions must be positive".into()));
        }
        let cells = n_states * n_actions * n_states;
        if kernel.len() != cells {
            return Err(Error::InvalidSpec(format!(
                "kernel has {} entries, expected {cells}",
                kernel.len()
            )));
        }
        if reward.len() != cells {
            return Err(Error::InvalidSpec(format!(
                "reward has {} entries, expected {cells}",
                reward.len()
            )));
        }
        if initial_dist.len() != n_states {
            return Err(Error::InvalidSpec(format!(
                "initial_dist has {} entries, expected {n_states}",
                initial_dist.len()
            )));
        }
        for s in 0..n_states {
            for a in 0..n_actions {
                let start = (s * n_actions + a) * n_states;
                check_distribution(&kernel[start..start + n_states])
                    .map_err(|e| Error::InvalidSpec(format!("kernel row (state {s}, action {a}): {e}")))?;
            }
        }
        if let Some(i) = reward.iter().position(|r| !r.is_finite()) {
            return Err(Error::InvalidSpec(format!("reward entry {i} is not finite")));
        }
        check_distribution(&initial_dist)
            .map_err(|e| Error::InvalidSpec(format!("initial_dist: {e}")))?;
        Ok(Self {
            n_states,
            n_actions,
            kernel,
            reward,
            initial_dist,
        })
    }

    /// Parses the TOML spec-file format (`n_states`, `n_actions`, `kernel`,
    /// `reward`, `initial_dist`).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: MdpFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(
            file.n_states,
            file.n_actions,
            file.kernel,
            file.reward,
            file.initial_dist,
        )
    }

    pub fn to_toml_string(&self) -> String {
        let list = |xs: &[f64]| {
            xs.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        format!(
            "n_states = {}\nn_actions = {}\nkernel = [{}]\nreward = [{}]\ninitial_dist = [{}]\n",
            self.n_states,
            self.n_actions,
            list(&self.kernel),
            list(&self.reward),
            list(&self.initial_dist)
        )
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn kernel_row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.n_actions + action) * self.n_states;
        &self.kernel[start..start + self.n_states]
    }

    pub fn reward(&self, state: usize, action: usize, next: usize) -> f64 {
        self.reward[(state * self.n_actions + action) * self.n_states + next]
    }

    /// Expected one-step reward of `action` in `state`.
    pub fn expected_reward(&self, state: usize, action: usize) -> f64 {
        self.kernel_row(state, action)
            .iter()
            .enumerate()
            .map(|(next, p)| p * self.reward(state, action, next))
            .sum()
    }

    /// Replaces the initial distribution.
    pub fn with_initial_dist(mut self, dist: Vec<f64>) -> Result<Self> {
        if dist.len() != self.n_states {
            return Err(Error::Shape(format!(
                "initial_dist of length {} for {} states",
                dist.len(),
                self.n_states
            )));
        }
        check_distribution(&dist).map_err(|e| Error::InvalidSpec(format!("initial_dist: {e}")))?;
        self.initial_dist = dist;
        Ok(self)
    }

    /// Point-mass initial distribution on `state`.
    pub fn starting_at(self, state: usize) -> Result<Self> {
        let n = self.n_states;
        check_index("state", state, n)?;
        let mut dist = vec![0.0; n];
        dist[state] = 1.0;
        self.with_initial_dist(dist)
    }

    /// States that no action can leave and that pay nothing: once entered,
    /// no further reward is attainable.
    pub fn dead_states(&self) -> Vec<bool> {
        (0..self.n_states)
            .map(|s| {
                (0..self.n_actions).all(|a| {
                    self.kernel_row(s, a)[s] == 1.0 && self.reward(s, a, s) == 0.0
                })
            })
            .collect()
    }
}

pub(crate) fn check_distribution(row: &[f64]) -> std::result::Result<(), String> {
    if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(format!("entry {p} outside [0, 1]"));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > ROW_TOL {
        return Err(format!("sums to {total}, expected 1"));
    }
    Ok(())
}

pub(crate) fn check_index(what: &'static str, index: usize, limit: usize) -> Result<()> {
    if index >= limit {
        Err(Error::Index { what, index, limit })
    } else {
        Ok(())
    }
}

/// How an agent picks actions.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// One action per state.
    DeterministicTabular(Vec<usize>),
    /// One action distribution per state.
    StochasticTabular(Vec<Vec<f64>>),
    /// A stake fraction in `[0, 1]` for wealth processes.
    ParametricFraction(f64),
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum PolicyFile {
    Deterministic { table: Vec<usize> },
    Stochastic { table: Vec<Vec<f64>> },
    Fraction { fraction: f64 },
}

impl PolicySpec {
    pub fn deterministic(table: Vec<usize>) -> Self {
        Self::DeterministicTabular(table)
    }

    pub fn stochastic(table: Vec<Vec<f64>>) -> Result<Self> {
        for (s, row) in table.iter().enumerate() {
            check_distribution(row)
                .map_err(|e| Error::InvalidSpec(format!("policy row {s}: {e}")))?;
        }
        Ok(Self::StochasticTabular(table))
    }

    pub fn fraction(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Domain(format!("fraction {alpha} outside [0, 1]")));
        }
        Ok(Self::ParametricFraction(alpha))
    }

    /// Uniform random policy.
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self::StochasticTabular(vec![vec![1.0 / n_actions as f64; n_actions]; n_states])
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        match toml::from_str::<PolicyFile>(text).map_err(|e| Error::Parse(e.to_string()))? {
            PolicyFile::Deterministic { table } => Ok(Self::deterministic(table)),
            PolicyFile::Stochastic { table } => Self::stochastic(table),
            PolicyFile::Fraction { fraction } => Self::fraction(fraction),
        }
    }

    /// Checks that a tabular policy fits the MDP.
    pub fn check_against(&self, mdp: &MdpSpec) -> Result<()> {
        match self {
            Self::DeterministicTabular(t) => {
                if t.len() != mdp.n_states() {
                    return Err(Error::Shape(format!(
                        "policy covers {} states, MDP has {}",
                        t.len(),
                        mdp.n_states()
                    )));
                }
                for &a in t {
                    check_index("action", a, mdp.n_actions())?;
                }
                Ok(())
            }
            Self::StochasticTabular(t) => {
                if t.len() != mdp.n_states() || t.iter().any(|row| row.len() != mdp.n_actions()) {
                    return Err(Error::Shape("stochastic policy table does not match MDP".into()));
                }
                Ok(())
            }
            Self::ParametricFraction(_) => Err(Error::UnsupportedPolicy(
                "a fraction policy has no tabular form",
            )),
        }
    }

    /// Action distribution in `state` (tabular kinds only).
    pub fn action_probs(&self, state: usize, n_actions: usize) -> Result<Vec<f64>> {
        match self {
            Self::DeterministicTabular(t) => {
                let mut row = vec![0.0; n_actions];
                row[t[state]] = 1.0;
                Ok(row)
            }
            Self::StochasticTabular(t) => Ok(t[state].clone()),
            Self::ParametricFraction(_) => Err(Error::UnsupportedPolicy(
                "a fraction policy has no tabular form",
            )),
        }
    }

    fn sample_action(&self, state: usize, rng: &mut RngStream) -> usize {
        match self {
            Self::DeterministicTabular(t) => t[state],
            Self::StochasticTabular(t) => rng.categorical(&t[state]),
            Self::ParametricFraction(_) => 0,
        }
    }
}

/// One realization of a reward process.
///
/// `returns[k] = returns[k - 1] + rewards[k]`, with `returns[0]` built on
/// `initial_return`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream_id: u64,
    pub initial_return: f64,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub returns: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn new(seed: u64, stream_id: u64, initial_return: f64) -> Self {
        Self {
            seed,
            stream_id,
            initial_return,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn with_capacity(seed: u64, stream_id: u64, initial_return: f64, horizon: usize) -> Self {
        Self {
            seed,
            stream_id,
            initial_return,
            states: Vec::with_capacity(horizon),
            actions: Vec::with_capacity(horizon),
            rewards: Vec::with_capacity(horizon),
            returns: Vec::with_capacity(horizon),
        }
    }

    pub fn push(&mut self, state: usize, action: usize, reward: f64) {
        let prev = self.final_return();
        self.states.push(state);
        self.actions.push(action);
        self.rewards.push(reward);
        self.returns.push(prev + reward);
    }

    /// Appends a step whose return is known exactly (multiplicative
    /// processes); the reward is stored as the return difference.
    pub fn push_return(&mut self, state: usize, action: usize, next_return: f64) {
        let prev = self.final_return();
        self.states.push(state);
        self.actions.push(action);
        self.rewards.push(next_return - prev);
        self.returns.push(next_return);
    }

    pub fn horizon(&self) -> usize {
        self.rewards.len()
    }

    pub fn final_return(&self) -> f64 {
        self.returns.last().copied().unwrap_or(self.initial_return)
    }

    /// Return series `R_0, R_1, ..., R_T` including the initial value.
    pub fn return_series(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.returns.len() + 1);
        out.push(self.initial_return);
        out.extend_from_slice(&self.returns);
        out
    }

    /// Return held before step `k`.
    pub fn return_before(&self, k: usize) -> f64 {
        if k == 0 {
            self.initial_return
        } else {
            self.returns[k - 1]
        }
    }
}

/// Header of the trajectory dump.
pub const TRAJECTORY_CSV_HEADER: &str = "seed,step,state,action,reward,return";

/// Writes trajectories as CSV rows `seed,step,state,action,reward,return`.
pub fn write_trajectory_csv<W: Write>(mut out: W, trajs: &[TrajectoryRecord]) -> io::Result<()> {
    writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
    for t in trajs {
        for k in 0..t.horizon() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                t.seed, k, t.states[k], t.actions[k], t.rewards[k], t.returns[k]
            )?;
        }
    }
    Ok(())
}

/// Draws the next state from the kernel row and looks up its reward.
pub fn sample_transition(
    mdp: &MdpSpec,
    state: usize,
    action: usize,
    rng: &mut RngStream,
) -> Result<(usize, f64)> {
    check_index("state", state, mdp.n_states())?;
    check_index("action", action, mdp.n_actions())?;
    let next = rng.categorical(mdp.kernel_row(state, action));
    Ok((next, mdp.reward(state, action, next)))
}

/// Anything that can produce trajectories from a random stream.
pub trait TrajectorySource: Sync {
    fn generate(&self, horizon: usize, rng: &mut RngStream) -> Result<TrajectoryRecord>;
}

/// A finite MDP under a fixed tabular policy: a Markov reward process.
#[derive(Debug, Clone)]
pub struct FiniteMrp<'a> {
    pub mdp: &'a MdpSpec,
    pub policy: &'a PolicySpec,
}

impl TrajectorySource for FiniteMrp<'_> {
    fn generate(&self, horizon: usize, rng: &mut RngStream) -> Result<TrajectoryRecord> {
        rollout(self.mdp, self.policy, horizon, rng)
    }
}

/// Simulates `horizon` steps from a state drawn from `initial_dist`.
pub fn rollout(
    mdp: &MdpSpec,
    policy: &PolicySpec,
    horizon: usize,
    rng: &mut RngStream,
) -> Result<TrajectoryRecord> {
    if horizon == 0 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    policy.check_against(mdp)?;
    let mut rec = TrajectoryRecord::with_capacity(rng.seed(), rng.stream_id(), 0.0, horizon);
    let mut state = rng.categorical(mdp.initial_dist());
    for _ in 0..horizon {
        let action = policy.sample_action(state, rng);
        let (next, reward) = sample_transition(mdp, state, action, rng)?;
        rec.push(state, action, reward);
        state = next;
    }
    Ok(rec)
}

/// Runs `n` independent trajectories; trajectory `i` uses stream
/// `(base_seed, i)`. Streams are simulated in parallel.
pub fn ensemble<S: TrajectorySource + ?Sized>(
    source: &S,
    horizon: usize,
    n: usize,
    base_seed: u64,
) -> Result<Vec<TrajectoryRecord>> {
    if n == 0 {
        return Err(Error::EmptyInput("ensemble needs at least one trajectory"));
    }
    (0..n as u64)
        .into_par_iter()
        .map(|i| source.generate(horizon, &mut RngStream::new(base_seed, i)))
        .collect()
}

pub fn ensemble_rollout(
    mdp: &MdpSpec,
    policy: &PolicySpec,
    horizon: usize,
    n_trajectories: usize,
    base_seed: u64,
) -> Result<Vec<TrajectoryRecord>> {
    ensemble(&FiniteMrp { mdp, policy }, horizon, n_trajectories, base_seed)
}
