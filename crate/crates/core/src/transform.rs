//! Learned ergodicity transformation.
//!
//! A probe trajectory gives pairs `(R, ln r^2)` of pre-step return and log
//! squared reward. LOESS smooths `ln r^2` as a function of the return, the
//! smooth `y(R)` is read as the log of the squared local reward scale, and
//! the transformation is the variance-stabilizing integral
//! `h(R) = int exp(-y/2) dR`. Increments of `h` then serve as rewards.

use std::io::{self, Write};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::optim::{
    reinforce_train, DiscretizedFractionPolicy, LearningCurve, ReinforceConfig, ReturnTransform,
    RewardChannel,
};
use crate::process::{PolicySpec, TrajectoryRecord};
use crate::rng::RngStream;

/// Minimum usable points for smoothing.
pub const MIN_SCATTER_POINTS: usize = 10;
/// Excluded-step share above which [`ScatterSet::warn`] is raised.
pub const EXCLUSION_WARNING: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterSet {
    /// `(pre-step return, ln r^2)`.
    pub points: Vec<(f64, f64)>,
    pub horizon: usize,
    /// Steps dropped for a zero reward.
    pub excluded: usize,
}

impl ScatterSet {
    pub fn excluded_fraction(&self) -> f64 {
        self.excluded as f64 / self.horizon.max(1) as f64
    }

    pub fn warn(&self) -> bool {
        self.excluded_fraction() > EXCLUSION_WARNING
    }

    /// Rows `R,log_r2`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "R,log_r2")?;
        for (r, y) in &self.points {
            writeln!(out, "{r},{y}")?;
        }
        Ok(())
    }
}

/// Pairs each nonzero reward with the return before it.
pub fn build_scatter(traj: &TrajectoryRecord) -> Result<ScatterSet> {
    let horizon = traj.horizon();
    if horizon < MIN_SCATTER_POINTS {
        return Err(Error::InsufficientData(format!(
            "horizon {horizon} is below {MIN_SCATTER_POINTS}"
        )));
    }
    let mut points = Vec::with_capacity(horizon);
    let mut excluded = 0;
    for (k, &r) in traj.rewards.iter().enumerate() {
        if r == 0.0 {
            excluded += 1;
        } else {
            points.push((traj.return_before(k), (r * r).ln()));
        }
    }
    if points.len() < MIN_SCATTER_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} usable points, need {MIN_SCATTER_POINTS}",
            points.len()
        )));
    }
    Ok(ScatterSet {
        points,
        horizon,
        excluded,
    })
}

/// Coordinate in which the smoothing and the integration happen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothingAxis {
    /// `Log` when every return is positive and they span more than a
    /// decade, else `Linear`.
    Auto,
    Linear,
    Log,
}

impl SmoothingAxis {
    fn resolve(self, xs: &[f64]) -> Result<SmoothingAxis> {
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match self {
            SmoothingAxis::Auto => Ok(if min > 0.0 && max / min > 10.0 {
                SmoothingAxis::Log
            } else {
                SmoothingAxis::Linear
            }),
            SmoothingAxis::Log if min <= 0.0 => {
                Err(Error::Domain("log axis needs positive returns".into()))
            }
            other => Ok(other),
        }
    }

    fn to_coord(self, r: f64) -> f64 {
        match self {
            SmoothingAxis::Log => r.ln(),
            _ => r,
        }
    }

    fn from_coord(self, u: f64) -> f64 {
        match self {
            SmoothingAxis::Log => u.exp(),
            _ => u,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoessConfig {
    pub span: f64,
    /// Only local linear fits are supported.
    pub degree: usize,
    pub grid_points: usize,
    pub robustness_iters: usize,
    pub axis: SmoothingAxis,
}

impl Default for LoessConfig {
    fn default() -> Self {
        Self {
            span: 0.3,
            degree: 1,
            grid_points: 256,
            robustness_iters: 0,
            axis: SmoothingAxis::Auto,
        }
    }
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

/// Local linear fit at `x0` from the `q` nearest of the sorted `xs`.
fn local_fit(xs: &[f64], ys: &[f64], robust: &[f64], q: usize, x0: f64) -> f64 {
    let n = xs.len();
    let mut lo = xs.partition_point(|&x| x < x0);
    let mut hi = lo;
    while hi - lo < q {
        if lo == 0 {
            hi += 1;
        } else if hi == n || x0 - xs[lo - 1] <= xs[hi] - x0 {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    let d = (x0 - xs[lo]).max(xs[hi - 1] - x0);
    while lo > 0 && x0 - xs[lo - 1] == d {
        lo -= 1;
    }
    while hi < n && xs[hi] - x0 == d {
        hi += 1;
    }
    let mut w = Vec::with_capacity(hi - lo);
    for i in lo..hi {
        let base = if d > 0.0 { tricube((xs[i] - x0).abs() / d) } else { 1.0 };
        w.push(base * robust[i]);
    }
    let sw: f64 = w.iter().sum();
    if !(sw > 0.0) {
        // Every neighbour sits at the window edge: fall back to uniform weights.
        return ys[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
    }
    let xm = w.iter().zip(&xs[lo..hi]).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = w.iter().zip(&ys[lo..hi]).map(|(w, y)| w * y).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((w, x), y) in w.iter().zip(&xs[lo..hi]).zip(&ys[lo..hi]) {
        sxx += w * (x - xm) * (x - xm);
        sxy += w * (x - xm) * (y - ym);
    }
    let scale = (xs[hi - 1] - xs[lo]).abs().max(f64::MIN_POSITIVE);
    if sxx <= 1e-12 * sw * scale * scale {
        ym
    } else {
        ym + sxy / sxx * (x0 - xm)
    }
}

/// LOESS with tricube weights and degree 1 at each of `queries`.
pub fn loess(xs: &[f64], ys: &[f64], queries: &[f64], span: f64, robustness_iters: usize) -> Result<Vec<f64>> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!("{} x values and {} y values", xs.len(), ys.len())));
    }
    if !(span > 0.0 && span <= 1.0) {
        return Err(Error::InvalidSpec(format!("span {span} outside (0, 1]")));
    }
    let n = xs.len();
    let q = ((span * n as f64).ceil() as usize).max(3);
    if n < q {
        return Err(Error::InsufficientData(format!("{n} points, need at least {q}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let sx: Vec<f64> = order.iter().map(|&i| xs[i]).collect();
    let sy: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
    if sx.iter().chain(&sy).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite scatter point".into()));
    }
    let mut robust = vec![1.0; n];
    for _ in 0..robustness_iters {
        let resid: Vec<f64> = (0..n).map(|i| sy[i] - local_fit(&sx, &sy, &robust, q, sx[i])).collect();
        let mut abs: Vec<f64> = resid.iter().map(|r| r.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let s = abs[n / 2];
        if s == 0.0 {
            break;
        }
        for (w, r) in robust.iter_mut().zip(&resid) {
            let u = r / (6.0 * s);
            *w = if u.abs() < 1.0 { (1.0 - u * u).powi(2) } else { 0.0 };
        }
    }
    Ok(queries.iter().map(|&x0| local_fit(&sx, &sy, &robust, q, x0)).collect())
}

/// Smoothed `ln r^2` over an evenly spaced grid in the smoothing coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothCurve {
    pub axis: SmoothingAxis,
    /// Grid in the smoothing coordinate.
    pub coords: Vec<f64>,
    /// The same grid as returns.
    pub returns: Vec<f64>,
    pub yhat: Vec<f64>,
}

impl SmoothCurve {
    /// Builds a curve from given values; `axis` must be resolved.
    pub fn from_values(axis: SmoothingAxis, returns: Vec<f64>, yhat: Vec<f64>) -> Result<Self> {
        if axis == SmoothingAxis::Auto {
            return Err(Error::InvalidSpec("axis must be Linear or Log".into()));
        }
        if returns.len() != yhat.len() {
            return Err(Error::Shape("grid and values differ in length".into()));
        }
        let axis = axis.resolve(&returns)?;
        let coords = returns.iter().map(|&r| axis.to_coord(r)).collect();
        Ok(Self {
            axis,
            coords,
            returns,
            yhat,
        })
    }
}

pub fn loess_fit(scatter: &ScatterSet, config: &LoessConfig) -> Result<SmoothCurve> {
    if config.degree != 1 {
        return Err(Error::InvalidSpec("only degree 1 is supported".into()));
    }
    if config.grid_points < 2 {
        return Err(Error::InvalidSpec("need at least 2 grid points".into()));
    }
    let rs: Vec<f64> = scatter.points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = scatter.points.iter().map(|p| p.1).collect();
    let axis = config.axis.resolve(&rs)?;
    let xs: Vec<f64> = rs.iter().map(|&r| axis.to_coord(r)).collect();
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m = config.grid_points;
    let coords: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
    let yhat = loess(&xs, &ys, &coords, config.span, config.robustness_iters)?;
    let returns = coords.iter().map(|&u| axis.from_coord(u)).collect();
    Ok(SmoothCurve {
        axis,
        coords,
        returns,
        yhat,
    })
}

/// Monotone transformation on a grid, extended linearly in the smoothing
/// coordinate with the end slopes held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformationCurve {
    axis: SmoothingAxis,
    coords: Vec<f64>,
    grid: Vec<f64>,
    h_values: Vec<f64>,
    slope_lo: f64,
    slope_hi: f64,
}

impl TransformationCurve {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn h_values(&self) -> &[f64] {
        &self.h_values
    }

    pub fn axis(&self) -> SmoothingAxis {
        self.axis
    }

    pub fn eval(&self, r: f64) -> f64 {
        if self.axis == SmoothingAxis::Log && r <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let u = self.axis.to_coord(r);
        let n = self.coords.len();
        if u <= self.coords[0] {
            return self.h_values[0] + self.slope_lo * (u - self.coords[0]);
        }
        if u >= self.coords[n - 1] {
            return self.h_values[n - 1] + self.slope_hi * (u - self.coords[n - 1]);
        }
        let i = self.coords.partition_point(|&c| c <= u) - 1;
        let t = (u - self.coords[i]) / (self.coords[i + 1] - self.coords[i]);
        self.h_values[i] + t * (self.h_values[i + 1] - self.h_values[i])
    }

    /// Rows `R,h`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "R,h")?;
        for (r, h) in self.grid.iter().zip(&self.h_values) {
            writeln!(out, "{r},{h}")?;
        }
        Ok(())
    }
}

impl ReturnTransform for TransformationCurve {
    fn eval(&self, r: f64) -> f64 {
        TransformationCurve::eval(self, r)
    }
}

/// Trapezoidal integral of `h' = exp(-y/2)`, taken in the smoothing
/// coordinate with its Jacobian, normalized to `h(grid[0]) = 0`.
pub fn integrate_transformation(smooth: &SmoothCurve) -> Result<TransformationCurve> {
    let n = smooth.coords.len();
    if n < 2 {
        return Err(Error::InsufficientData("need at least 2 grid points".into()));
    }
    if smooth.coords.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Fit("grid is not strictly increasing".into()));
    }
    if let Some(y) = smooth.yhat.iter().find(|y| !y.is_finite()) {
        return Err(Error::Fit(format!("non-finite smoothed value {y}")));
    }
    let deriv: Vec<f64> = smooth
        .yhat
        .iter()
        .zip(&smooth.returns)
        .map(|(&y, &r)| {
            let dh_dr = (-0.5 * y).exp();
            match smooth.axis {
                SmoothingAxis::Log => dh_dr * r,
                _ => dh_dr,
            }
        })
        .collect();
    let mut h = Vec::with_capacity(n);
    h.push(0.0);
    for i in 1..n {
        let step = 0.5 * (deriv[i - 1] + deriv[i]) * (smooth.coords[i] - smooth.coords[i - 1]);
        h.push(h[i - 1] + step);
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("transformation overflowed".into()));
    }
    if h.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Fit("transformation is not strictly increasing".into()));
    }
    Ok(TransformationCurve {
        axis: smooth.axis,
        coords: smooth.coords.clone(),
        grid: smooth.returns.clone(),
        h_values: h,
        slope_lo: deriv[0],
        slope_hi: deriv[n - 1],
    })
}

/// `h(R_k) - h(R_{k-1})` for every step.
pub fn transform_increments<H: ReturnTransform + ?Sized>(h: &H, traj: &TrajectoryRecord) -> Vec<f64> {
    let mut prev = h.eval(traj.initial_return);
    traj.returns
        .iter()
        .map(|&r| {
            let cur = h.eval(r);
            let d = cur - prev;
            prev = cur;
            d
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnAndTrainConfig {
    pub probe_horizon: usize,
    pub max_probe_attempts: usize,
    pub loess: LoessConfig,
    pub reinforce: ReinforceConfig,
    pub temperature: f64,
}

impl Default for LearnAndTrainConfig {
    fn default() -> Self {
        Self {
            probe_horizon: 5000,
            max_probe_attempts: 5,
            loess: LoessConfig::default(),
            reinforce: ReinforceConfig::default(),
            temperature: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LearnAndTrainOutcome {
    pub probe: TrajectoryRecord,
    pub probe_attempts: usize,
    pub scatter: ScatterSet,
    pub smooth: SmoothCurve,
    pub transform: TransformationCurve,
    pub policy: DiscretizedFractionPolicy,
    pub curve: LearningCurve,
}

fn probe_probs<E: Environment + ?Sized>(env: &E, policy: &PolicySpec) -> Result<Vec<Vec<f64>>> {
    let (ns, na) = (env.n_states(), env.n_actions());
    match policy {
        PolicySpec::ParametricFraction(alpha) => {
            let grid = env
                .stake_grid()
                .ok_or(Error::UnsupportedPolicy("fraction probe needs a stake grid"))?;
            let mut best = 0;
            for (i, a) in grid.iter().enumerate() {
                if (a - alpha).abs() < (grid[best] - alpha).abs() {
                    best = i;
                }
            }
            let mut row = vec![0.0; na];
            row[best] = 1.0;
            Ok(vec![row; ns])
        }
        PolicySpec::DeterministicTabular(t) if t.len() != ns => {
            Err(Error::Shape(format!("policy covers {} states, environment has {ns}", t.len())))
        }
        PolicySpec::StochasticTabular(t) if t.len() != ns => {
            Err(Error::Shape(format!("policy covers {} states, environment has {ns}", t.len())))
        }
        _ => (0..ns).map(|s| policy.action_probs(s, na)).collect(),
    }
}

/// Runs the probe policy for `horizon` steps; `None` if any return is
/// non-positive.
fn probe_rollout<E: Environment + ?Sized>(
    env: &E,
    probs: &[Vec<f64>],
    horizon: usize,
    rng: &mut RngStream,
) -> Option<TrajectoryRecord> {
    let r0 = env.initial_return();
    let mut rec = TrajectoryRecord::with_capacity(rng.seed(), rng.stream_id(), r0, horizon);
    let mut state = env.reset(rng);
    let mut ret = r0;
    for _ in 0..horizon {
        let action = rng.categorical(&probs[state]);
        let tr = env.step(state, action, ret, rng);
        rec.push(state, action, tr.reward);
        ret += tr.reward;
        if tr.ruined || ret <= 0.0 {
            return None;
        }
        state = tr.next_state;
    }
    Some(rec)
}

/// Fits `h` on one probe trajectory, then runs REINFORCE on its increments.
///
/// Probes that reach a non-positive return are redrawn on a fresh stream,
/// up to `max_probe_attempts` times.
pub fn learn_and_train<E: Environment + ?Sized>(
    env: &E,
    probe_policy: &PolicySpec,
    config: &LearnAndTrainConfig,
    seed: u64,
) -> Result<LearnAndTrainOutcome> {
    let probs = probe_probs(env, probe_policy)?;
    let mut probe = None;
    let mut attempts = 0;
    while attempts < config.max_probe_attempts {
        let mut rng = RngStream::new(seed, u64::MAX - attempts as u64);
        attempts += 1;
        if let Some(t) = probe_rollout(env, &probs, config.probe_horizon, &mut rng) {
            probe = Some(t);
            break;
        }
    }
    let probe = probe.ok_or_else(|| {
        Error::Fit(format!(
            "probe reached a non-positive return in all {attempts} attempts"
        ))
    })?;
    let scatter = build_scatter(&probe)?;
    let smooth = loess_fit(&scatter, &config.loess)?;
    let transform = integrate_transformation(&smooth)?;

    let n = env.n_actions();
    let grid = match env.stake_grid() {
        Some(g) => g.to_vec(),
        None if n == 1 => vec![0.0],
        None => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    };
    let policy = DiscretizedFractionPolicy::new(grid, config.temperature)?;
    let trained = reinforce_train(
        env,
        policy,
        RewardChannel::TransformedIncrements(&transform),
        &config.reinforce,
        seed,
    )?;
    Ok(LearnAndTrainOutcome {
        probe,
        probe_attempts: attempts,
        scatter,
        smooth,
        transform,
        policy: trained.policy,
        curve: trained.curve,
    })
}
