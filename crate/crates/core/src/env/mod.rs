//! Concrete environments: the coin-toss wealth process, the two-action
//! multiplicative bandit, and the delivery-robot MDP.
//!
//! Two families share the [`TrajectoryRecord`](crate::process::TrajectoryRecord)
//! output: finite MDPs ([`MdpSpec`](crate::process::MdpSpec)) and wealth
//! processes whose state is a continuous return. The learners see both
//! through [`Environment`].

mod bandit;
mod coin_toss;
mod delivery;

pub use bandit::{
    bandit_step, indifference_expected, indifference_growth, BanditAction, BanditEnv,
    BanditOutcome, BanditParams,
};
pub use coin_toss::{CoinToss, CoinTossEnv, CoinTossParams, CoinTossProcess, OptimalFraction};
pub use delivery::{delivery_mdp, DeliveryParams, DESTROYED, DIRECT, OPERATIONAL, SAFE};

use crate::process::{sample_transition, MdpSpec};
use crate::rng::RngStream;

/// Outcome of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub next_state: usize,
    pub reward: f64,
    /// No further reward is attainable: the return hit zero or the agent
    /// entered a dead absorbing state.
    pub ruined: bool,
}

/// Discrete-action interface consumed by the tabular learners. The return
/// is tracked by the caller and passed back in, since wealth processes pay
/// rewards proportional to it.
pub trait Environment: Sync {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn initial_return(&self) -> f64;
    fn reset(&self, rng: &mut RngStream) -> usize;
    fn step(&self, state: usize, action: usize, current_return: f64, rng: &mut RngStream) -> Transition;

    /// Stake carried by each action, for wealth processes.
    fn stake_grid(&self) -> Option<&[f64]> {
        None
    }
}

/// A finite MDP seen through [`Environment`]; entering a dead state counts
/// as ruin.
#[derive(Debug, Clone)]
pub struct FiniteEnv {
    mdp: MdpSpec,
    dead: Vec<bool>,
    initial_return: f64,
}

impl FiniteEnv {
    pub fn new(mdp: MdpSpec, initial_return: f64) -> Self {
        let dead = mdp.dead_states();
        Self {
            mdp,
            dead,
            initial_return,
        }
    }

    pub fn mdp(&self) -> &MdpSpec {
        &self.mdp
    }

    pub fn is_dead(&self, state: usize) -> bool {
        self.dead[state]
    }
}

impl Environment for FiniteEnv {
    fn n_states(&self) -> usize {
        self.mdp.n_states()
    }

    fn n_actions(&self) -> usize {
        self.mdp.n_actions()
    }

    fn initial_return(&self) -> f64 {
        self.initial_return
    }

    fn reset(&self, rng: &mut RngStream) -> usize {
        rng.categorical(self.mdp.initial_dist())
    }

    fn step(&self, state: usize, action: usize, current_return: f64, rng: &mut RngStream) -> Transition {
        let (next_state, reward) =
            sample_transition(&self.mdp, state, action, rng).expect("learner indices are in range");
        Transition {
            next_state,
            reward,
            ruined: self.dead[next_state]
                || (self.initial_return > 0.0 && current_return + reward <= 0.0),
        }
    }
}
