//! Expected-value learners: REINFORCE over a discretized stake and tabular
//! Q-learning, plus the schedules and learning curves they share with the
//! growth-oriented learners.

mod qlearning;
mod reinforce;

use std::io::{self, Write};

pub use qlearning::{
    q_learning, tabular_q_learning, value_iteration, QLearningConfig, QLearningOutcome, QTable,
};
pub use reinforce::{
    evaluate_policy, reinforce_train, Baseline, DiscretizedFractionPolicy, ReinforceConfig,
    ReinforceOutcome, RewardChannel,
};

/// The default stake grid `{0, 0.05, ..., 1}`.
pub fn default_fraction_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// Monotone map applied to returns before differencing.
pub trait ReturnTransform: Sync {
    fn eval(&self, r: f64) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTransform;

impl ReturnTransform for IdentityTransform {
    fn eval(&self, r: f64) -> f64 {
        r
    }
}

/// `ln R`; `-inf` at or below zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogTransform;

impl ReturnTransform for LogTransform {
    fn eval(&self, r: f64) -> f64 {
        if r > 0.0 {
            r.ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// `lr0 / (1 + lr_decay * n)` where `n` counts prior updates of the entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub lr0: f64,
    pub lr_decay: f64,
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        Self { lr0: lr, lr_decay: 0.0 }
    }

    /// `1 / (1 + n)`: the sample average.
    pub fn harmonic() -> Self {
        Self { lr0: 1.0, lr_decay: 1.0 }
    }

    pub fn at(&self, visits: u64) -> f64 {
        self.lr0 / (1.0 + self.lr_decay * visits as f64)
    }
}

/// `max(eps_min, eps0 - eps_decay * t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub eps0: f64,
    pub eps_decay: f64,
    pub eps_min: f64,
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Self {
        Self {
            eps0: eps,
            eps_decay: 0.0,
            eps_min: eps,
        }
    }

    /// Linear decay from `eps0` to `eps_min` over `steps` decisions.
    pub fn linear(eps0: f64, eps_min: f64, steps: usize) -> Self {
        Self {
            eps0,
            eps_decay: (eps0 - eps_min).max(0.0) / steps.max(1) as f64,
            eps_min,
        }
    }

    pub fn at(&self, t: usize) -> f64 {
        (self.eps0 - self.eps_decay * t as f64).max(self.eps_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub objective: f64,
    pub mean_final_return: f64,
    /// Mean stake for fraction policies; greedy action in the initial state
    /// for tabular learners.
    pub mean_alpha: f64,
    pub growth_estimate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a point; iterations must increase strictly.
    pub fn push(&mut self, point: CurvePoint) {
        if let Some(last) = self.points.last() {
            assert!(point.iteration > last.iteration, "iterations must increase");
        }
        self.points.push(point);
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn last(&self) -> Option<&CurvePoint> {
        self.points.last()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn has_growth(&self) -> bool {
        self.points.iter().any(|p| p.growth_estimate.is_some())
    }

    /// `iteration,objective,mean_final_return,mean_alpha`, with a trailing
    /// `growth_estimate` column when any point carries one.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let growth = self.has_growth();
        write!(out, "iteration,objective,mean_final_return,mean_alpha")?;
        if growth {
            write!(out, ",growth_estimate")?;
        }
        writeln!(out)?;
        for p in &self.points {
            write!(
                out,
                "{},{},{},{}",
                p.iteration, p.objective, p.mean_final_return, p.mean_alpha
            )?;
            if growth {
                match p.growth_estimate {
                    Some(g) => write!(out, ",{g}")?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
