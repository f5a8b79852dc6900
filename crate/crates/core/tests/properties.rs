use flowswap::baselines::{edd_sort, sa_optimize, sh_schedule, SaConfig, ShConfig};
use flowswap::bench::{buffer_matrix, heatmap_csv, parse_heatmap_csv};
use flowswap::inference::{multirun, InferenceConfig, UniformPolicy};
use flowswap::operators::PairAction;
use flowswap::policy::{forward, NetConfig, PolicyParams};
use flowswap::ppo::{compute_gae, Episode, EpisodeConfig, Transition};
use flowswap::sched::{
    feature_width, network_features, objective_f1, objective_f2, FeatureMatrix, Instance, Job,
    ObjectiveConfig, Permutation, Reference,
};
use flowswap::{par, seed};
use proptest::prelude::*;

fn arb_instance(max_n: usize) -> impl Strategy<Value = Instance> {
    (2..=max_n, 1usize..=4).prop_flat_map(|(n, w)| {
        (
            prop::collection::vec(prop::collection::vec(50.0f64..250.0, w), n),
            prop::collection::vec(100.0f64..5000.0, n),
        )
            .prop_map(move |(p, d)| Instance {
                id: "prop".into(),
                station_time: 250.0,
                jobs: p
                    .into_iter()
                    .zip(d)
                    .map(|(processing_times, due_date)| Job {
                        processing_times,
                        due_date,
                    })
                    .collect(),
            })
    })
}

fn arb_case(max_n: usize) -> impl Strategy<Value = (Instance, Permutation)> {
    arb_instance(max_n).prop_flat_map(|inst| {
        let n = inst.n_jobs();
        (Just(inst), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
            .prop_map(|(inst, order)| (inst, Permutation::new(order).unwrap()))
    })
}

fn arb_objective() -> impl Strategy<Value = ObjectiveConfig> {
    (0.0f64..5.0, 0.0f64..1.0, 100.0f64..10_000.0).prop_map(|(alpha1, alpha2, tardiness_scale)| {
        ObjectiveConfig {
            alpha1,
            alpha2,
            tardiness_scale,
        }
    })
}

fn tiny_net(w: usize) -> NetConfig {
    NetConfig {
        d_in: feature_width(w),
        d_h: 8,
        n_heads: 2,
        n_layers: 1,
        d_ff: 16,
        d_gen: 1,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn f2_reversal_symmetric_and_non_negative((inst, perm) in arb_case(10)) {
        let f2 = objective_f2(&inst, &perm).unwrap();
        prop_assert!(f2 >= 0.0);
        let back = objective_f2(&inst, &perm.reversed()).unwrap();
        prop_assert!((f2 - back).abs() <= 1e-12 * f2.max(1.0));
    }

    #[test]
    fn f2_zero_for_identical_jobs(n in 2usize..8, p in prop::collection::vec(1.0f64..9.0, 3)) {
        let jobs = (0..n).map(|i| Job { processing_times: p.clone(), due_date: 10.0 * (i + 1) as f64 }).collect();
        let inst = Instance { id: "same".into(), station_time: 10.0, jobs };
        prop_assert_eq!(objective_f2(&inst, &Permutation::identity(n)).unwrap(), 0.0);
    }

    #[test]
    fn later_due_date_lowers_f1((inst, perm) in arb_case(8), job in 0usize..8, extra in 1.0f64..2000.0) {
        let cfg = ObjectiveConfig::default();
        let job = job % inst.n_jobs();
        let mut later = inst.clone();
        later.jobs[job].due_date += extra;
        prop_assert!(objective_f1(&later, &perm, &cfg).unwrap() < objective_f1(&inst, &perm, &cfg).unwrap());
    }

    #[test]
    fn fc_of_reference_is_zero((inst, perm) in arb_case(10), cfg in arb_objective()) {
        let r = Reference::of(&inst, &perm, &cfg).unwrap();
        prop_assert_eq!(r.evaluate(&inst, &perm, &cfg).unwrap().fc, 0.0);
    }

    #[test]
    fn edd_sort_is_stable(n in 2usize..10, dues in prop::collection::vec(0u8..3, 10)) {
        let jobs = (0..n).map(|i| Job { processing_times: vec![1.0], due_date: 100.0 + dues[i] as f64 }).collect();
        let inst = Instance { id: "ties".into(), station_time: 1.0, jobs };
        let order = edd_sort(&inst);
        for pair in order.as_slice().windows(2) {
            let (a, b) = (&inst.jobs[pair[0]], &inst.jobs[pair[1]]);
            prop_assert!(a.due_date < b.due_date || (a.due_date == b.due_date && pair[0] < pair[1]));
        }
    }

    #[test]
    fn features_are_deterministic((inst, perm) in arb_case(10), step in 0usize..10) {
        let cfg = ObjectiveConfig::default();
        let a = network_features(&inst, &perm, &cfg, step, 10).unwrap();
        let b = network_features(&inst, &perm, &cfg, step, 10).unwrap();
        let bits = |f: &FeatureMatrix| f.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
        prop_assert_eq!(a.width(), feature_width(inst.n_stations()));
    }

    #[test]
    fn sa_never_loses_and_repeats((inst, _) in arb_case(9), steps in 1u64..300, s in any::<u64>()) {
        let obj = ObjectiveConfig::default();
        let edd = edd_sort(&inst);
        let cfg = SaConfig::with_steps(steps, s);
        let a = sa_optimize(&inst, &edd, &edd, &cfg, &obj).unwrap();
        prop_assert!(a.report.fc >= 0.0);
        prop_assert!(a.best.is_valid());
        prop_assert_eq!(a, sa_optimize(&inst, &edd, &edd, &cfg, &obj).unwrap());
    }

    #[test]
    fn sh_output_is_a_permutation((inst, _) in arb_case(12), window in 1usize..6, max_skip in 0usize..6) {
        let out = sh_schedule(&inst, &ShConfig { window, max_skip }).unwrap();
        prop_assert_eq!(out.len(), inst.n_jobs());
        prop_assert!(out.is_valid());
    }

    #[test]
    fn probability_matrix_for_any_finite_input(
        n in 2usize..12,
        w in 1usize..4,
        s in any::<u64>(),
        scale in 0.0f64..50.0,
    ) {
        let params = PolicyParams::<f32>::init(tiny_net(w), s).unwrap();
        let mut rng = seed::stream(s, 1);
        let rows = (0..n * feature_width(w)).map(|_| scale * (rand::Rng::random::<f64>(&mut rng) - 0.5)).collect();
        let f = FeatureMatrix::new(n, feature_width(w), rows, 0.5).unwrap();
        let out = forward(&f, &params).unwrap();
        let sum: f64 = out.probs.iter().map(|&p| p as f64).sum();
        prop_assert!((sum - 1.0).abs() <= 1e-6);
        for (idx, &p) in out.probs.iter().enumerate() {
            prop_assert!(p >= 0.0);
            if idx % (n + 1) == 0 {
                prop_assert_eq!(p, 0.0);
            }
        }
    }

    #[test]
    fn episode_rewards_and_best_so_far((inst, _) in arb_case(8), s in any::<u64>()) {
        let obj = ObjectiveConfig::default();
        let cfg = EpisodeConfig::default();
        let mut ep = Episode::start(&inst, 0, &obj, &cfg).unwrap();
        let mut rng = seed::stream(s, 0);
        let n = inst.n_jobs();
        let mut best = 0.0;
        while !ep.is_done() {
            let i = rand::Rng::random_range(&mut rng, 0..n);
            let k = (i + rand::Rng::random_range(&mut rng, 1..n)) % n;
            let o = ep.step(PairAction::new(i, k)).unwrap();
            prop_assert!(o.reward.abs() <= o.fc.abs() / cfg.step_budget as f64);
            prop_assert!(ep.best().1 >= best);
            best = ep.best().1;
        }
        prop_assert_eq!(best, ep.fc_log().iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }

    #[test]
    fn multirun_accounting((inst, _) in arb_case(8), runs in 1usize..6, budget in 1usize..8, s in any::<u64>()) {
        let obj = ObjectiveConfig::default();
        let cfg = InferenceConfig { runs_per_policy: runs, step_budget: budget, seed: s, ..InferenceConfig::default() };
        let a = multirun(&inst, &UniformPolicy, &obj, &cfg).unwrap();
        prop_assert!(a.best.is_valid());
        prop_assert!(a.report.fc >= 0.0);
        prop_assert_eq!(a.steps, (runs * budget) as u64);
        prop_assert_eq!(a.per_run_fc.len(), runs);
        let b = multirun(&inst, &UniformPolicy, &obj, &cfg).unwrap();
        prop_assert_eq!(a.best, b.best);
        prop_assert_eq!(a.per_run_fc, b.per_run_fc);
    }

    #[test]
    fn heatmap_csv_round_trips((inst, perm) in arb_case(10)) {
        let text = heatmap_csv(&inst, &perm).unwrap();
        prop_assert_eq!(parse_heatmap_csv(&text).unwrap(), buffer_matrix(&inst, &perm).unwrap());
    }

    #[test]
    fn gae_outputs_align(rewards in prop::collection::vec(-1.0f64..1.0, 1..40), cut in 1usize..10) {
        let f = FeatureMatrix::new(2, 4, vec![0.0; 8], 0.0).unwrap();
        let len = rewards.len();
        let transitions: Vec<Transition> = rewards
            .iter()
            .enumerate()
            .map(|(t, &r)| Transition {
                features: f.clone(),
                action: PairAction::new(0, 1),
                log_prob: -0.7,
                reward: r,
                value: 0.1 * t as f64,
                done: (t + 1) % cut == 0 || t + 1 == len,
                bootstrap: None,
            })
            .collect();
        let batch = compute_gae(transitions, 0.99, 0.95, true).unwrap();
        prop_assert_eq!(batch.advantages.len(), len);
        prop_assert_eq!(batch.targets.len(), len);
        prop_assert!(batch.advantages.iter().chain(&batch.targets).all(|x| x.is_finite()));
    }

    #[test]
    fn par_map_matches_sequential(xs in prop::collection::vec(any::<u32>(), 0..200), chunk in 1usize..9) {
        let f = |x: &u32| (*x as u64).wrapping_mul(2654435761);
        prop_assert_eq!(par::map(&xs, f), xs.iter().map(f).collect::<Vec<_>>());
        let sums = par::map_chunks(&xs, chunk, |c| c.iter().map(|&x| x as u64).sum::<u64>());
        prop_assert_eq!(sums, xs.chunks(chunk).map(|c| c.iter().map(|&x| x as u64).sum::<u64>()).collect::<Vec<_>>());
        prop_assert_eq!(par::map_range(xs.len(), |i| xs[i]), xs.clone());
    }
}
