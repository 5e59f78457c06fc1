//! Two-action multiplicative bandit: a safe action scales the return by
//! `r_safe`; a risky one by `r_loss` with probability `p_loss`, else `r_win`.

use crate::error::{Error, Result};
use crate::rng::RngStream;

use super::{Environment, Transition};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BanditParams {
    pub r_safe: f64,
    pub r_win: f64,
    pub r_loss: f64,
    pub p_loss: f64,
}

impl Default for BanditParams {
    fn default() -> Self {
        Self {
            r_safe: 1.0,
            r_win: 1.5,
            r_loss: 0.6,
            p_loss: 0.5,
        }
    }
}

impl BanditParams {
    /// Enforces `0 < r_loss < 1 <= r_safe < r_win` and `p_loss` in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        if !(self.r_loss > 0.0 && self.r_loss < 1.0 && 1.0 <= self.r_safe && self.r_safe < self.r_win) {
            return Err(Error::InvalidSpec(format!(
                "need 0 < r_loss < 1 <= r_safe < r_win, got r_loss={} r_safe={} r_win={}",
                self.r_loss, self.r_safe, self.r_win
            )));
        }
        if !(0.0..=1.0).contains(&self.p_loss) {
            return Err(Error::InvalidSpec(format!("p_loss = {} outside [0, 1]", self.p_loss)));
        }
        Ok(())
    }

    pub fn with_p_loss(self, p_loss: f64) -> Self {
        Self { p_loss, ..self }
    }

    // The indifference formulas only need a weak ordering with a non-empty
    // risky spread.
    fn check_weak_order(&self) -> Result<()> {
        if self.r_loss > 0.0 && self.r_loss <= self.r_safe && self.r_safe <= self.r_win && self.r_loss < self.r_win {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "indifference needs 0 < r_loss <= r_safe <= r_win with r_loss < r_win, got {} {} {}",
                self.r_loss, self.r_safe, self.r_win
            )))
        }
    }

    /// Expected one-step factor of the risky action.
    pub fn risk_expected_factor(&self) -> f64 {
        self.p_loss * self.r_loss + (1.0 - self.p_loss) * self.r_win
    }

    /// Expected log factor of the risky action.
    pub fn risk_log_growth(&self) -> f64 {
        self.p_loss * self.r_loss.ln() + (1.0 - self.p_loss) * self.r_win.ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BanditAction {
    Safe,
    Risk,
}

impl BanditAction {
    pub fn index(self) -> usize {
        match self {
            BanditAction::Safe => 0,
            BanditAction::Risk => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            BanditAction::Safe
        } else {
            BanditAction::Risk
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BanditOutcome {
    Safe,
    RiskWin,
    RiskLoss,
}

impl BanditOutcome {
    pub fn factor(self, params: &BanditParams) -> f64 {
        match self {
            BanditOutcome::Safe => params.r_safe,
            BanditOutcome::RiskWin => params.r_win,
            BanditOutcome::RiskLoss => params.r_loss,
        }
    }
}

/// One round: `(next_return, outcome)`.
pub fn bandit_step(
    prev_return: f64,
    action: BanditAction,
    params: &BanditParams,
    rng: &mut RngStream,
) -> (f64, BanditOutcome) {
    let outcome = match action {
        BanditAction::Safe => BanditOutcome::Safe,
        BanditAction::Risk => {
            if rng.bernoulli(params.p_loss) {
                BanditOutcome::RiskLoss
            } else {
                BanditOutcome::RiskWin
            }
        }
    };
    (outcome.factor(params) * prev_return, outcome)
}

/// Loss probability at which the one-step expected factors tie:
/// `(r_win - r_safe) / (r_win - r_loss)`.
pub fn indifference_expected(params: &BanditParams) -> Result<f64> {
    params.check_weak_order()?;
    Ok((params.r_win - params.r_safe) / (params.r_win - params.r_loss))
}

/// Loss probability at which the expected log factors tie:
/// `ln(r_win / r_safe) / ln(r_win / r_loss)`.
pub fn indifference_growth(params: &BanditParams) -> Result<f64> {
    params.check_weak_order()?;
    Ok((params.r_win / params.r_safe).ln() / (params.r_win / params.r_loss).ln())
}

/// The bandit seen through [`Environment`]: action 0 is safe, 1 is risky.
#[derive(Debug, Clone, Copy)]
pub struct BanditEnv {
    pub params: BanditParams,
    pub initial_return: f64,
}

impl Environment for BanditEnv {
    fn n_states(&self) -> usize {
        1
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn initial_return(&self) -> f64 {
        self.initial_return
    }

    fn reset(&self, _rng: &mut RngStream) -> usize {
        0
    }

    fn step(&self, _state: usize, action: usize, current_return: f64, rng: &mut RngStream) -> Transition {
        let (next, _) = bandit_step(current_return, BanditAction::from_index(action), &self.params, rng);
        Transition {
            next_state: 0,
            reward: next - current_return,
            ruined: next <= 0.0,
        }
    }
}
