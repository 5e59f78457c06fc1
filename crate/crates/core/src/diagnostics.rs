//! Ensemble averages, time averages, their gap, and per-step growth.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::process::{ensemble, TrajectoryRecord, TrajectorySource};
use crate::stats::{self, CompensatedSum, Z95};

/// Mean over trajectories of the reward at step `t`, with a 95% half-width.
pub fn ensemble_average_at(trajs: &[TrajectoryRecord], t: usize) -> Result<(f64, f64)> {
    if trajs.is_empty() {
        return Err(Error::EmptyInput("ensemble is empty"));
    }
    let mut xs = Vec::with_capacity(trajs.len());
    for tr in trajs {
        if t >= tr.horizon() {
            return Err(Error::Index {
                what: "probe time",
                index: t,
                limit: tr.horizon(),
            });
        }
        xs.push(tr.rewards[t]);
    }
    Ok(stats::mean_ci(&xs))
}

/// Mean reward along one trajectory.
pub fn time_average(traj: &TrajectoryRecord) -> f64 {
    stats::mean(&traj.rewards)
}

/// 95% half-width of [`time_average`] from batch means, which accounts for
/// serial correlation along the chain.
pub fn time_average_ci(traj: &TrajectoryRecord) -> f64 {
    Z95 * stats::batch_means_se(&traj.rewards, 50)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicityGapReport {
    pub probe_times: Vec<usize>,
    pub ensemble_mean_at: Vec<f64>,
    pub ensemble_ci: Vec<f64>,
    pub time_mean_per_traj: Vec<f64>,
    /// Mean of the per-trajectory time means.
    pub time_mean: f64,
    pub time_ci: f64,
    /// Gap at the last probe: the asymptotic comparison.
    pub gap: f64,
    /// Largest gap over all probes, including the earliest: the strict
    /// comparison that requires a stationary start.
    pub strict_gap: f64,
    pub n_trajectories: usize,
    pub horizon: usize,
}

impl ErgodicityGapReport {
    /// Whether the asymptotic gap falls within the summed half-widths.
    pub fn asymptotic_within_ci(&self) -> bool {
        let last = self.ensemble_ci.len() - 1;
        self.gap <= self.ensemble_ci[last] + self.time_ci
    }

    /// Whether every probe's gap falls within its summed half-widths.
    pub fn strict_within_ci(&self) -> bool {
        self.ensemble_mean_at
            .iter()
            .zip(&self.ensemble_ci)
            .all(|(m, ci)| (m - self.time_mean).abs() <= ci + self.time_ci)
    }

    /// Rows `t,ensemble_mean,ci`.
    pub fn write_ensemble_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,ensemble_mean,ci")?;
        for ((t, m), ci) in self.probe_times.iter().zip(&self.ensemble_mean_at).zip(&self.ensemble_ci) {
            writeln!(out, "{t},{m},{ci}")?;
        }
        Ok(())
    }

    /// Rows `trajectory,time_mean`.
    pub fn write_time_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "trajectory,time_mean")?;
        for (i, m) in self.time_mean_per_traj.iter().enumerate() {
            writeln!(out, "{i},{m}")?;
        }
        Ok(())
    }
}

/// Simulates `n` trajectories of `horizon` steps and compares ensemble
/// averages at `probe_times` with per-trajectory time averages.
pub fn ergodicity_gap<S: TrajectorySource + ?Sized>(
    source: &S,
    horizon: usize,
    n: usize,
    probe_times: &[usize],
    seed: u64,
) -> Result<ErgodicityGapReport> {
    if probe_times.is_empty() {
        return Err(Error::EmptyInput("no probe times"));
    }
    if let Some(&t) = probe_times.iter().find(|&&t| t >= horizon) {
        return Err(Error::Index {
            what: "probe time",
            index: t,
            limit: horizon,
        });
    }
    let trajs = ensemble(source, horizon, n, seed)?;
    gap_from_trajectories(&trajs, probe_times)
}

/// Same comparison on already simulated trajectories.
pub fn gap_from_trajectories(trajs: &[TrajectoryRecord], probe_times: &[usize]) -> Result<ErgodicityGapReport> {
    if trajs.is_empty() {
        return Err(Error::EmptyInput("ensemble is empty"));
    }
    let mut ensemble_mean_at = Vec::with_capacity(probe_times.len());
    let mut ensemble_ci = Vec::with_capacity(probe_times.len());
    for &t in probe_times {
        let (m, ci) = ensemble_average_at(trajs, t)?;
        ensemble_mean_at.push(m);
        ensemble_ci.push(ci);
    }
    let time_mean_per_traj: Vec<f64> = trajs.iter().map(time_average).collect();
    let (time_mean, time_ci) = stats::mean_ci(&time_mean_per_traj);
    let gaps: Vec<f64> = ensemble_mean_at.iter().map(|m| (m - time_mean).abs()).collect();
    Ok(ErgodicityGapReport {
        probe_times: probe_times.to_vec(),
        gap: *gaps.last().expect("non-empty probes"),
        strict_gap: gaps.iter().copied().fold(0.0, f64::max),
        ensemble_mean_at,
        ensemble_ci,
        time_mean_per_traj,
        time_mean,
        time_ci,
        n_trajectories: trajs.len(),
        horizon: trajs[0].horizon(),
    })
}

/// Mean log ratio of successive returns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthEstimate {
    /// `-inf` when any return is non-positive.
    pub per_step_log_growth: f64,
    /// Number of increments in the series.
    pub window: usize,
    /// Increments with both ends positive.
    pub valid_steps: usize,
    /// Non-positive returns seen.
    pub non_positive: usize,
}

impl GrowthEstimate {
    pub fn is_flagged(&self) -> bool {
        self.non_positive > 0
    }

    /// Per-step growth factor `exp(log growth)`.
    pub fn factor(&self) -> f64 {
        self.per_step_log_growth.exp()
    }
}

/// Growth over a return series `R_0, ..., R_T`.
pub fn growth_rate_estimate(returns: &[f64]) -> GrowthEstimate {
    let window = returns.len().saturating_sub(1);
    let non_positive = returns.iter().filter(|&&r| !(r > 0.0)).count();
    let mut acc = CompensatedSum::new();
    let mut valid_steps = 0;
    for w in returns.windows(2) {
        if w[0] > 0.0 && w[1] > 0.0 {
            acc.add((w[1] / w[0]).ln());
            valid_steps += 1;
        }
    }
    let per_step_log_growth = if non_positive > 0 {
        f64::NEG_INFINITY
    } else if valid_steps == 0 {
        0.0
    } else {
        acc.value() / valid_steps as f64
    };
    GrowthEstimate {
        per_step_log_growth,
        window,
        valid_steps,
        non_positive,
    }
}

/// Fraction of trajectories whose final return exceeds their initial one,
/// i.e. with positive time-averaged log growth.
pub fn positive_growth_fraction(trajs: &[TrajectoryRecord]) -> f64 {
    if trajs.is_empty() {
        return f64::NAN;
    }
    let wins = trajs.iter().filter(|t| t.final_return() > t.initial_return).count();
    wins as f64 / trajs.len() as f64
}
