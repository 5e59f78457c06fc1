//! Simulation and analysis of non-ergodic reward processes.
//!
//! The crate covers four areas:
//!
//! - [`process`], [`chain`], [`diagnostics`]: finite MDPs and wealth
//!   processes, Markov chain classification with stationary reward rates,
//!   and empirical ensemble-versus-time comparisons.
//! - [`env`]: the coin toss, the multiplicative bandit, and the delivery
//!   robot.
//! - [`optim`]: REINFORCE over a discretized stake and tabular Q-learning,
//!   the expected-value baselines.
//! - [`transform`]: a return transformation learned from one probe
//!   trajectory.
//! - [`growth_q`]: multi-step Q-learning with a growth-regularized target.
//! - [`temporal`]: agents trained on along-trajectory growth.

pub mod chain;
pub mod diagnostics;
pub mod env;
pub mod error;
pub mod growth_q;
pub mod optim;
pub mod process;
pub mod rng;
pub mod stats;
pub mod temporal;
pub mod transform;

pub use error::{Error, Result};
pub use rng::RngStream;
