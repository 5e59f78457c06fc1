//! The coin-toss wealth process: stake a fraction `alpha` of the current
//! return, win `win_mult * stake` with probability `p_win`, otherwise lose
//! `loss_mult * stake`.
//!
//! Treating wealth as a state would make the reward Markov, but the state
//! distribution never settles (its variance diverges), so the process is
//! kept as a wealth process rather than a discretized MDP.

use crate::error::{Error, Result};
use crate::process::{TrajectoryRecord, TrajectorySource};
use crate::rng::RngStream;

use super::{Environment, Transition};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinTossParams {
    pub initial_return: f64,
    pub win_mult: f64,
    pub loss_mult: f64,
    pub p_win: f64,
}

impl Default for CoinTossParams {
    fn default() -> Self {
        Self {
            initial_return: 100.0,
            win_mult: 0.5,
            loss_mult: 0.4,
            p_win: 0.5,
        }
    }
}

impl CoinTossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_return > 0.0) {
            return Err(Error::InvalidSpec("initial_return must be positive".into()));
        }
        if !(self.loss_mult > 0.0 && self.loss_mult < 1.0) {
            return Err(Error::InvalidSpec("loss_mult must lie in (0, 1)".into()));
        }
        if !(self.win_mult > 0.0) {
            return Err(Error::InvalidSpec("win_mult must be positive".into()));
        }
        if !(self.p_win > 0.0 && self.p_win <= 1.0) {
            return Err(Error::InvalidSpec("p_win must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Closed-form maximizer of the per-step log growth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalFraction {
    pub fraction: f64,
    /// `false` when no stake has positive expected log growth.
    pub has_edge: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinToss {
    pub params: CoinTossParams,
}

impl Default for CoinToss {
    fn default() -> Self {
        Self {
            params: CoinTossParams::default(),
        }
    }
}

impl CoinToss {
    pub fn new(params: CoinTossParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    /// Reward for a known coin outcome.
    pub fn reward(&self, prev_return: f64, alpha: f64, win: bool) -> f64 {
        if win {
            self.params.win_mult * alpha * prev_return
        } else {
            -self.params.loss_mult * alpha * prev_return
        }
    }

    /// One toss: `(reward, next_return)`.
    pub fn step(&self, prev_return: f64, alpha: f64, rng: &mut RngStream) -> (f64, f64) {
        let win = rng.bernoulli(self.params.p_win);
        let reward = self.reward(prev_return, alpha, win);
        (reward, prev_return + reward)
    }

    /// Mean log wealth ratio over `horizon` tosses at a fixed stake, summed
    /// in log space so that long horizons cannot underflow. Consumes the
    /// same draws as [`Self::step`].
    pub fn realized_log_growth(&self, alpha: f64, horizon: usize, rng: &mut RngStream) -> f64 {
        let up = (1.0 + self.params.win_mult * alpha).ln();
        let down = (1.0 - self.params.loss_mult * alpha).ln();
        let mut acc = crate::stats::CompensatedSum::new();
        for _ in 0..horizon {
            acc.add(if rng.bernoulli(self.params.p_win) { up } else { down });
        }
        acc.value() / horizon.max(1) as f64
    }

    /// Expected one-step multiplier `1 + alpha * (p w - (1 - p) l)`.
    pub fn expected_factor(&self, alpha: f64) -> f64 {
        let p = self.params;
        1.0 + alpha * (p.p_win * p.win_mult - (1.0 - p.p_win) * p.loss_mult)
    }

    /// `E[R_T] = R_0 (1 + alpha * edge)^T`; `R_0 (1 + 0.05 alpha)^T` for the defaults.
    pub fn expected_return(&self, alpha: f64, steps: u32) -> f64 {
        self.params.initial_return * self.expected_factor(alpha).powi(steps as i32)
    }

    /// Expected log of the one-step wealth ratio.
    pub fn time_growth(&self, alpha: f64) -> Result<f64> {
        let p = self.params;
        let down = 1.0 - p.loss_mult * alpha;
        if down <= 0.0 {
            return Err(Error::Domain(format!("alpha = {alpha} can lose everything")));
        }
        let up = 1.0 + p.win_mult * alpha;
        let loss_term = if p.p_win < 1.0 { (1.0 - p.p_win) * down.ln() } else { 0.0 };
        Ok(p.p_win * up.ln() + loss_term)
    }

    /// Kelly-style optimum `(p w - (1 - p) l) / (w l)`, clipped to `[0, 1]`,
    /// evaluated as `p / l - (1 - p) / w`.
    pub fn optimal_fraction(&self) -> OptimalFraction {
        let p = self.params;
        let edge = p.p_win * p.win_mult - (1.0 - p.p_win) * p.loss_mult;
        if edge <= 0.0 {
            return OptimalFraction {
                fraction: 0.0,
                has_edge: false,
            };
        }
        OptimalFraction {
            fraction: (p.p_win / p.loss_mult - (1.0 - p.p_win) / p.win_mult).min(1.0),
            has_edge: true,
        }
    }

    /// Simulates `horizon` tosses at a fixed stake.
    pub fn trajectory(&self, alpha: f64, horizon: usize, rng: &mut RngStream) -> TrajectoryRecord {
        let mut rec = TrajectoryRecord::with_capacity(
            rng.seed(),
            rng.stream_id(),
            self.params.initial_return,
            horizon,
        );
        let mut r = self.params.initial_return;
        for _ in 0..horizon {
            let (reward, next) = self.step(r, alpha, rng);
            rec.push(0, 0, reward);
            r = next;
        }
        rec
    }
}

/// The coin toss under a fixed stake, as a trajectory source.
#[derive(Debug, Clone, Copy)]
pub struct CoinTossProcess {
    pub game: CoinToss,
    pub alpha: f64,
}

impl TrajectorySource for CoinTossProcess {
    fn generate(&self, horizon: usize, rng: &mut RngStream) -> Result<TrajectoryRecord> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Domain(format!("alpha = {} outside [0, 1]", self.alpha)));
        }
        Ok(self.game.trajectory(self.alpha, horizon, rng))
    }
}

/// Coin toss with a discrete grid of stakes as actions.
///
/// With `additive` set, every stake is a fraction of the initial return
/// instead of the current one, so rewards are i.i.d. given the action.
#[derive(Debug, Clone)]
pub struct CoinTossEnv {
    pub game: CoinToss,
    pub grid: Vec<f64>,
    pub additive: bool,
}

impl CoinTossEnv {
    pub fn new(game: CoinToss, grid: Vec<f64>) -> Self {
        Self {
            game,
            grid,
            additive: false,
        }
    }

    pub fn additive(game: CoinToss, grid: Vec<f64>) -> Self {
        Self {
            game,
            grid,
            additive: true,
        }
    }
}

impl Environment for CoinTossEnv {
    fn n_states(&self) -> usize {
        1
    }

    fn n_actions(&self) -> usize {
        self.grid.len()
    }

    fn initial_return(&self) -> f64 {
        self.game.params.initial_return
    }

    fn reset(&self, _rng: &mut RngStream) -> usize {
        0
    }

    fn stake_grid(&self) -> Option<&[f64]> {
        Some(&self.grid)
    }

    fn step(&self, _state: usize, action: usize, current_return: f64, rng: &mut RngStream) -> Transition {
        let base = if self.additive {
            self.game.params.initial_return
        } else {
            current_return
        };
        let (reward, _) = self.game.step(base, self.grid[action], rng);
        Transition {
            next_state: 0,
            reward,
            ruined: !self.additive && current_return + reward <= 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tree_values() {
        let g = CoinToss::default();
        assert_eq!(g.reward(100.0, 1.0, true), 50.0);
        let loss = g.reward(100.0, 1.0, false);
        assert_eq!(100.0 + loss, 60.0);
        assert_abs_diff_eq!(60.0 + g.reward(60.0, 1.0, false), 36.0, epsilon = 1e-12);
        assert_eq!(g.reward(100.0, 0.0, true), 0.0);
        assert_eq!(g.reward(100.0, 0.0, false), 0.0);
    }

    #[test]
    fn zero_stake_never_moves() {
        let g = CoinToss::default();
        let t = g.trajectory(0.0, 50, &mut RngStream::new(1, 0));
        assert!(t.rewards.iter().all(|&r| r == 0.0));
        assert_eq!(t.final_return(), 100.0);
    }

    #[test]
    fn closed_form_expectation() {
        let g = CoinToss::default();
        assert_abs_diff_eq!(g.expected_return(1.0, 1), 105.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.expected_return(1.0, 2), 110.25, epsilon = 1e-12);
        assert_eq!(g.expected_return(0.0, 37), 100.0);
    }

    #[test]
    fn growth_values() {
        let g = CoinToss::default();
        assert_eq!(g.time_growth(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(g.time_growth(1.0).unwrap(), 0.5 * 0.9f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(g.time_growth(1.0).unwrap(), -0.052680, epsilon = 1e-6);
        let wild = CoinToss::new(CoinTossParams {
            loss_mult: 0.8,
            ..Default::default()
        })
        .unwrap();
        assert!(wild.time_growth(1.0).is_ok());
        assert!(matches!(wild.time_growth(1.3), Err(Error::Domain(_))));
    }

    #[test]
    fn optimal_fraction_cases() {
        assert_eq!(
            CoinToss::default().optimal_fraction(),
            OptimalFraction {
                fraction: 0.25,
                has_edge: true
            }
        );
        let even = CoinToss::new(CoinTossParams {
            win_mult: 0.4,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(even.optimal_fraction().fraction, 0.0);
        assert!(!even.optimal_fraction().has_edge);
        let sure = CoinToss::new(CoinTossParams {
            p_win: 1.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(sure.optimal_fraction().fraction, 1.0);
    }

    #[test]
    fn optimum_matches_grid_search() {
        let g = CoinToss::default();
        let best = (0..=10_000)
            .map(|i| i as f64 * 1e-4)
            .max_by(|a, b| g.time_growth(*a).unwrap().total_cmp(&g.time_growth(*b).unwrap()))
            .unwrap();
        assert!((best - 0.25).abs() < 1e-3, "grid maximizer {best}");
    }

    #[test]
    fn params_validation() {
        assert!(CoinToss::new(CoinTossParams {
            initial_return: 0.0,
            ..Default::default()
        })
        .is_err());
        assert!(CoinToss::new(CoinTossParams {
            loss_mult: 1.0,
            ..Default::default()
        })
        .is_err());
        assert!(CoinToss::new(CoinTossParams {
            p_win: 0.0,
            ..Default::default()
        })
        .is_err());
    }
}
