use ergodic_core::env::{indifference_expected, indifference_growth, BanditParams, CoinToss};
use ergodic_core::rng::RngStream;
use ergodic_core::stats;
use ergodic_core::temporal::*;

fn p_grid() -> Vec<f64> {
    (0..=20).map(|i| 0.3 + 0.02 * i as f64).collect()
}

#[test]
fn risk_only_log_return_matches_iid_sum() {
    let params = BanditParams::default();
    let mut agent = BanditAgent::new(UpdateRule::TemporalCompounded, StepSize::SampleAverage, 0.0);
    agent.values = [0.0, 1.0];
    let mut rng = RngStream::new(5, 0);
    let logs: Vec<f64> = (0..10_000)
        .map(|_| {
            temporal_episode(&mut agent, &params, 100, 1.0, false, &mut rng)
                .unwrap()
                .log_growth(1.0)
        })
        .collect();
    let expect = 100.0 * (0.5 * 1.5f64.ln() + 0.5 * 0.6f64.ln());
    let (m, se) = (stats::mean(&logs), stats::std_error(&logs));
    assert!((m - expect).abs() <= 3.0 * se, "{m} vs {expect} (se {se})");
}

#[test]
fn boundary_probabilities_pick_dominant_action() {
    for rule in [UpdateRule::OneStepExpected, UpdateRule::TemporalCompounded] {
        let cfg = AgentConfig::new(rule);
        let none = train_preference(&cfg, &BanditParams::default().with_p_loss(0.0), 1).unwrap();
        assert!(none.safe_frequency <= 0.05, "{rule:?}");
        let all = train_preference(&cfg, &BanditParams::default().with_p_loss(1.0), 1).unwrap();
        assert!(all.safe_frequency >= 0.95, "{rule:?}");
    }
}

#[test]
fn fixture_rules_disagree_at_one_half() {
    let params = BanditParams::default();
    let p_t = indifference_growth(&params).unwrap();
    let p_e = indifference_expected(&params).unwrap();
    assert!(p_t < 0.5 && 0.5 < p_e);
    let one = train_preference(&AgentConfig::new(UpdateRule::OneStepExpected), &params, 2).unwrap();
    let tmp = train_preference(&AgentConfig::new(UpdateRule::TemporalCompounded), &params, 2).unwrap();
    assert!(one.safe_frequency < 0.5);
    assert!(tmp.safe_frequency > 0.5);
}

#[test]
fn sweeps_locate_both_indifference_points() {
    let params = BanditParams::default();
    let grid = p_grid();
    let one = preference_sweep(&AgentConfig::new(UpdateRule::OneStepExpected), &params, &grid, 20, 3).unwrap();
    let tmp = preference_sweep(&AgentConfig::new(UpdateRule::TemporalCompounded), &params, &grid, 20, 3).unwrap();
    assert!(one.indifference.in_range() && tmp.indifference.in_range());
    assert!((one.indifference.value() - 0.5556).abs() <= 0.03);
    assert!((tmp.indifference.value() - 0.4425).abs() <= 0.03);
    assert!(one.safe_preference.iter().all(|s| (0.0..=1.0).contains(s)));
}

#[test]
fn monte_carlo_migrates_toward_growth_point() {
    let params = BanditParams::default();
    let p_t = indifference_growth(&params).unwrap();
    let grid = p_grid();
    let at = |h: usize, episodes: usize| {
        let cfg = MonteCarloConfig {
            horizon: h,
            episodes,
            epsilon: 0.1,
            step_size: StepSize::SampleAverage,
        };
        monte_carlo_sweep(&params, &cfg, &grid, 10, 6).unwrap().indifference.value()
    };
    let (one, two, fifty) = (at(1, 20_000), at(2, 20_000), at(50, 20_000));
    assert!((one - indifference_expected(&params).unwrap()).abs() <= 0.03, "{one}");
    assert!((fifty - p_t).abs() < (two - p_t).abs(), "{two} {fifty}");
}

#[test]
fn temporal_fraction_agent_grows_in_both_modes() {
    let game = CoinToss::default();
    let cfg = FractionTrainConfig::default();
    let (temporal, _) = train_fraction_agent(&game, FractionObjective::Temporal, &cfg, 3).unwrap();
    let (standard, _) = train_fraction_agent(&game, FractionObjective::OneStepExpected, &cfg, 3).unwrap();
    for mode in [EvalMode::Fixed, EvalMode::Recursive] {
        let t = stats::median(&evaluate_fraction_agent(&game, &temporal, mode, 1000, 100, 4));
        let s = stats::median(&evaluate_fraction_agent(&game, &standard, mode, 1000, 100, 4));
        assert!(t > 0.0, "{mode:?}: {t}");
        assert!(s < t, "{mode:?}: {s} vs {t}");
    }
    assert!(standard.alpha(1.0) > temporal.alpha(1.0));
}
