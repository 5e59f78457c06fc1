use ergodic_core::chain::{classify_chain, stationary_distribution, RewardTable, TransitionMatrix};
use ergodic_core::env::{bandit_step, BanditAction, BanditParams};
use ergodic_core::growth_q::{geometric_mean_window, WindowBuffer};
use ergodic_core::optim::{LogTransform, ReturnTransform};
use ergodic_core::process::{sample_transition, MdpSpec, TrajectoryRecord};
use ergodic_core::rng::RngStream;
use ergodic_core::transform::transform_increments;
use proptest::prelude::*;

fn normalize(row: Vec<f64>) -> Vec<f64> {
    let s: f64 = row.iter().sum();
    row.into_iter().map(|x| x / s).collect()
}

fn chain_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..7).prop_flat_map(|n| {
        prop::collection::vec(
            prop::collection::vec(prop_oneof![Just(0.0), 0.05f64..1.0], n).prop_map(|mut r| {
                if r.iter().all(|&x| x == 0.0) {
                    r[0] = 1.0;
                }
                normalize(r)
            }),
            n,
        )
    })
}

proptest! {
    #[test]
    fn returns_accumulate_rewards(r0 in -1e3f64..1e3, rewards in prop::collection::vec(-1e3f64..1e3, 1..200)) {
        let mut t = TrajectoryRecord::new(1, 0, r0);
        for &r in &rewards {
            t.push(0, 0, r);
        }
        prop_assert_eq!(t.horizon(), rewards.len());
        prop_assert_eq!(t.states.len(), rewards.len());
        for k in 1..t.horizon() {
            let diff = t.returns[k] - t.returns[k - 1] - t.rewards[k];
            prop_assert!(diff.abs() <= 1e-9 * t.returns[k].abs().max(1.0));
        }
    }

    #[test]
    fn classification_survives_relabeling(rows in chain_strategy(), seed in any::<u64>()) {
        let n = rows.len();
        let mut rng = RngStream::new(seed, 0);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.index(i + 1));
        }
        let mut permuted = vec![vec![0.0; n]; n];
        for s in 0..n {
            for t in 0..n {
                permuted[perm[s]][perm[t]] = rows[s][t];
            }
        }
        let g: Vec<Vec<f64>> = (0..n).map(|s| (0..n).map(|t| (s * n + t) as f64).collect()).collect();
        let mut gp = vec![vec![0.0; n]; n];
        for s in 0..n {
            for t in 0..n {
                gp[perm[s]][perm[t]] = g[s][t];
            }
        }
        let a = classify_chain(&TransitionMatrix::new(rows).unwrap(), Some(&RewardTable::new(g).unwrap())).unwrap();
        let b = classify_chain(&TransitionMatrix::new(permuted).unwrap(), Some(&RewardTable::new(gp).unwrap())).unwrap();
        prop_assert_eq!(a.classification, b.classification);
        prop_assert_eq!(a.recurrent_classes.len(), b.recurrent_classes.len());
        prop_assert_eq!(a.transient_states.len(), b.transient_states.len());
        let mut pa = a.periods.clone();
        let mut pb = b.periods.clone();
        pa.sort();
        pb.sort();
        prop_assert_eq!(pa, pb);
        match (a.stationary, b.stationary) {
            (Some(x), Some(y)) => {
                for s in 0..n {
                    prop_assert!((x[s] - y[perm[s]]).abs() < 1e-9);
                }
                let (ra, rb) = (a.rho.unwrap(), b.rho.unwrap());
                prop_assert!((ra - rb).abs() <= 1e-9 * ra.abs().max(1.0));
            }
            (None, None) => {}
            _ => prop_assert!(false, "stationary presence differs"),
        }
    }

    #[test]
    fn stationary_vector_is_fixed(rows in chain_strategy()) {
        let p = TransitionMatrix::new(rows).unwrap();
        if let Ok(pi) = stationary_distribution(&p) {
            let next = p.step_distribution(&pi);
            for (a, b) in pi.iter().zip(&next) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_transitions_stay_in_support(rows in chain_strategy(), seed in any::<u64>()) {
        let n = rows.len();
        let kernel: Vec<f64> = rows.iter().flatten().copied().collect();
        let mut init = vec![0.0; n];
        init[0] = 1.0;
        let mdp = MdpSpec::new(n, 1, kernel, vec![0.0; n * n], init).unwrap();
        let mut rng = RngStream::new(seed, 0);
        for s in 0..n {
            let (t, _) = sample_transition(&mdp, s, 0, &mut rng).unwrap();
            prop_assert!(rows[s][t] > 0.0);
        }
        prop_assert!(sample_transition(&mdp, n, 0, &mut rng).is_err());
    }

    #[test]
    fn window_mean_telescopes(factors in prop::collection::vec(0.2f64..3.0, 1..60), r0 in 1e-3f64..1e3) {
        let n = factors.len();
        let mut b = WindowBuffer::new(n).unwrap();
        let mut r = r0;
        let mut logs = 0.0;
        b.push(r);
        for f in &factors {
            let next = r * f;
            logs += (next / r).ln();
            r = next;
            b.push(r);
        }
        let gm = geometric_mean_window(&b).unwrap();
        let via_logs = (logs / n as f64).exp();
        prop_assert!((gm - via_logs).abs() <= 1e-12 * gm.max(1.0));
    }

    #[test]
    fn compounding_is_exact(actions in prop::collection::vec(any::<bool>(), 1..300), seed in any::<u64>(), p in 0.0f64..=1.0) {
        let params = BanditParams::default().with_p_loss(p);
        let mut rng = RngStream::new(seed, 0);
        let mut r = 2.5;
        let mut product = 1.0;
        for &risky in &actions {
            let action = if risky { BanditAction::Risk } else { BanditAction::Safe };
            let (next, outcome) = bandit_step(r, action, &params, &mut rng);
            product *= outcome.factor(&params);
            r = next;
        }
        prop_assert!((r - 2.5 * product).abs() <= 1e-12 * r.abs());
    }

    #[test]
    fn increments_telescope(factors in prop::collection::vec(0.5f64..1.6, 1..200)) {
        let mut t = TrajectoryRecord::new(0, 0, 100.0);
        let mut r = 100.0;
        for f in factors {
            let next = r * f;
            t.push(0, 0, next - r);
            r = next;
        }
        let h = LogTransform;
        let sum: f64 = transform_increments(&h, &t).iter().sum();
        let direct = h.eval(t.final_return()) - h.eval(t.initial_return);
        prop_assert!((sum - direct).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn affine_rescaling_keeps_argmax(
        totals in prop::collection::vec(prop::collection::vec(0.1f64..10.0, 2..20), 2..6),
        a in 0.01f64..100.0,
        b in -100f64..100.0,
    ) {
        // Candidate policies as return paths; scores are summed increments.
        let score = |f: &dyn Fn(f64) -> f64, path: &Vec<f64>| f(*path.last().unwrap()) - f(path[0]);
        let ln = |x: f64| x.ln();
        let scaled = |x: f64| a * x.ln() + b;
        let best = |f: &dyn Fn(f64) -> f64| {
            let mut i_best = 0;
            for (i, p) in totals.iter().enumerate() {
                if score(f, p) > score(f, &totals[i_best]) {
                    i_best = i;
                }
            }
            i_best
        };
        let (i, j) = (best(&ln), best(&scaled));
        let gap = score(&ln, &totals[i]) - score(&ln, &totals[j]);
        prop_assert!(i == j || gap.abs() < 1e-9);
    }

    #[test]
    fn rng_streams_reproduce(seed in any::<u64>(), stream in any::<u64>()) {
        let mut a = RngStream::new(seed, stream);
        let mut b = RngStream::new(seed, stream);
        for _ in 0..16 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}
