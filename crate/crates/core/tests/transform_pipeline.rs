use ergodic_core::diagnostics::growth_rate_estimate;
use ergodic_core::env::{CoinToss, CoinTossEnv};
use ergodic_core::optim::{
    default_fraction_grid, evaluate_policy, reinforce_train, DiscretizedFractionPolicy, ReinforceConfig,
    RewardChannel,
};
use ergodic_core::process::PolicySpec;
use ergodic_core::stats::{correlation, median};
use ergodic_core::transform::{learn_and_train, LearnAndTrainConfig, SmoothingAxis};

fn coin_env() -> CoinTossEnv {
    CoinTossEnv::new(CoinToss::default(), default_fraction_grid())
}

#[test]
fn learned_transform_yields_winning_policy() {
    let env = coin_env();
    let out = learn_and_train(&env, &PolicySpec::ParametricFraction(1.0), &LearnAndTrainConfig::default(), 7).unwrap();
    let visited = out.probe.return_series();
    let hs: Vec<f64> = visited.iter().map(|&r| out.transform.eval(r)).collect();
    let ls: Vec<f64> = visited.iter().map(|r| r.ln()).collect();
    assert!(correlation(&hs, &ls) >= 0.99);

    let alpha = out.policy.mean_alpha();
    assert!((0.15..=0.35).contains(&alpha), "mean alpha {alpha}");
    let evals = evaluate_policy(&env, &out.policy, 1000, 100, 1234);
    let g: Vec<f64> = evals
        .iter()
        .map(|t| growth_rate_estimate(&t.return_series()).per_step_log_growth)
        .collect();
    assert!(median(&g) > 0.0, "median growth {}", median(&g));
}

#[test]
fn additive_control_learns_affine_transform() {
    let mut game = CoinToss::default();
    game.params.initial_return = 1000.0;
    let env = CoinTossEnv::additive(game, default_fraction_grid());
    let mut cfg = LearnAndTrainConfig::default();
    cfg.reinforce.horizon = 20;
    // Additive returns can cross zero, where a log axis is undefined.
    cfg.loess.axis = SmoothingAxis::Linear;
    let out = learn_and_train(&env, &PolicySpec::ParametricFraction(1.0), &cfg, 3).unwrap();
    let visited = out.probe.return_series();
    let hs: Vec<f64> = visited.iter().map(|&r| out.transform.eval(r)).collect();
    assert!(correlation(&hs, &visited) >= 0.99);

    // Rescale the step size by the fitted slope so both channels take
    // comparable steps, then compare with raw-reward training.
    let lo = visited.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = visited.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slope = (out.transform.eval(hi) - out.transform.eval(lo)) / (hi - lo);
    let raw_cfg = ReinforceConfig {
        episodes: 2000,
        horizon: 20,
        learning_rate: 1e-3,
        ..Default::default()
    };
    let h_cfg = ReinforceConfig {
        learning_rate: 1e-3 / slope / slope,
        ..raw_cfg
    };
    let uniform = DiscretizedFractionPolicy::new(default_fraction_grid(), 1.0).unwrap();
    let raw = reinforce_train(&env, uniform.clone(), RewardChannel::RawRewards, &raw_cfg, 5).unwrap();
    let tr = reinforce_train(&env, uniform, RewardChannel::TransformedIncrements(&out.transform), &h_cfg, 5).unwrap();
    let (a, b) = (raw.policy.mean_alpha(), tr.policy.mean_alpha());
    assert!(a > 0.8 && b > 0.8, "{a} {b}");
    assert!((a - b).abs() < 0.1, "{a} {b}");
}
