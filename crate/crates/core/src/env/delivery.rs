//! Delivery robot at trip granularity.
//!
//! Two states (operational, destroyed) and two actions (direct, safe). A
//! surviving trip pays `max(delivery_points - steps * step_cost,
//! reward_floor)`. A direct trip ends in destruction with probability
//! `destroy_prob`; that trip pays the step costs with no delivery,
//! `-direct_steps * step_cost`. The destroyed state is absorbing and pays 0.

use crate::error::{Error, Result};
use crate::process::MdpSpec;

pub const OPERATIONAL: usize = 0;
pub const DESTROYED: usize = 1;
pub const DIRECT: usize = 0;
pub const SAFE: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeliveryParams {
    pub delivery_points: f64,
    pub step_cost: f64,
    pub direct_steps: u32,
    pub safe_steps: u32,
    pub destroy_prob: f64,
    pub reward_floor: f64,
}

impl Default for DeliveryParams {
    fn default() -> Self {
        Self {
            delivery_points: 100.0,
            step_cost: 1.0,
            direct_steps: 10,
            safe_steps: 20,
            destroy_prob: 0.01,
            reward_floor: 0.0,
        }
    }
}

impl DeliveryParams {
    pub fn validate(&self) -> Result<()> {
        if self.direct_steps == 0 || self.safe_steps == 0 {
            return Err(Error::InvalidSpec("trip step counts must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.destroy_prob) {
            return Err(Error::InvalidSpec("destroy_prob outside [0, 1]".into()));
        }
        Ok(())
    }

    fn trip_reward(&self, steps: u32) -> f64 {
        (self.delivery_points - steps as f64 * self.step_cost).max(self.reward_floor)
    }
}

pub fn delivery_mdp(params: &DeliveryParams) -> Result<MdpSpec> {
    params.validate()?;
    let n = 2;
    let idx = |s: usize, a: usize, t: usize| (s * 2 + a) * n + t;
    let mut kernel = vec![0.0; 8];
    let mut reward = vec![0.0; 8];

    kernel[idx(OPERATIONAL, DIRECT, OPERATIONAL)] = 1.0 - params.destroy_prob;
    kernel[idx(OPERATIONAL, DIRECT, DESTROYED)] = params.destroy_prob;
    reward[idx(OPERATIONAL, DIRECT, OPERATIONAL)] = params.trip_reward(params.direct_steps);
    reward[idx(OPERATIONAL, DIRECT, DESTROYED)] = -(params.direct_steps as f64) * params.step_cost;

    kernel[idx(OPERATIONAL, SAFE, OPERATIONAL)] = 1.0;
    reward[idx(OPERATIONAL, SAFE, OPERATIONAL)] = params.trip_reward(params.safe_steps);

    kernel[idx(DESTROYED, DIRECT, DESTROYED)] = 1.0;
    kernel[idx(DESTROYED, SAFE, DESTROYED)] = 1.0;

    MdpSpec::new(n, 2, kernel, reward, vec![1.0, 0.0])
}
