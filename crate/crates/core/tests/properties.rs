use hess_soc::pipeline::ChannelRange;
use hess_soc::trainer::split_counts;
use hess_soc::{
    build_open_loop_rows, coulomb_count, evaluate, forward, forward_gradient, predict_closed_loop, predict_open_loop,
    segment_by_regime, train_narx, ClosedLoopState, CoulombConfig, Device, NarxConfig, NarxNetwork, NormalizedSeries,
    RegressorRow, SampleSeries, SegmentConfig, TrainConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lag_set() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::btree_set(1usize..5, 1..3).prop_map(|s| s.into_iter().collect())
}

fn config() -> impl Strategy<Value = NarxConfig> {
    (lag_set(), lag_set(), 1usize..6).prop_map(|(input_delays, output_delays, hidden_neurons)| NarxConfig {
        input_delays,
        output_delays,
        hidden_neurons,
        input_channels: 2,
    })
}

fn series_from(seed: u64, n: usize) -> NormalizedSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ch = || (0..n).map(|_| rng.random_range(-1.2..1.2)).collect::<Vec<f64>>();
    let (a, b, c) = (ch(), ch(), ch());
    NormalizedSeries { exogenous: vec![a, b], soc: Some(c) }
}

fn net_from(cfg: NarxConfig, seed: u64) -> NarxNetwork {
    let mut net = NarxNetwork::random(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let p: Vec<f64> = net.mlp.params().iter().map(|w| 3.0 * w).collect();
    net.mlp.set_params(&p);
    net
}

fn battery(current: Vec<f64>) -> SampleSeries {
    let n = current.len();
    SampleSeries::new(SampleSeries::uniform_time(n, 1.0), current, vec![3.7; n], None, Device::Battery).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn window_identity(cfg in config(), seed in any::<u64>(), extra in 1usize..30) {
        let n = cfg.max_lag() + extra;
        let s = series_from(seed, n);
        let rows = build_open_loop_rows(&s, &cfg).unwrap();
        prop_assert_eq!(rows.len(), n - cfg.max_lag());
        let soc = s.soc.as_ref().unwrap();
        for (r, row) in rows.iter().enumerate() {
            let t = r + cfg.max_lag();
            let mut want: Vec<f64> = cfg.output_delays.iter().map(|k| soc[t - k]).collect();
            for ch in &s.exogenous {
                want.extend(cfg.input_delays.iter().map(|k| ch[t - k]));
            }
            prop_assert_eq!(&row.values, &want);
            prop_assert_eq!(row.target, Some(soc[t]));
        }
    }

    #[test]
    fn feedback_independence(cfg in config(), seed in any::<u64>(), n0 in 0usize..12, soc0 in 0.0f64..=1.0) {
        let mut net = net_from(cfg.clone(), seed);
        let ny = cfg.output_delays.len();
        for row in &mut net.mlp.hidden_weights {
            for w in &mut row[..ny] {
                *w = 0.0;
            }
        }
        let s = series_from(seed ^ 1, 40);
        let open = predict_open_loop(&net, &s).unwrap();
        let free = NormalizedSeries { exogenous: s.exogenous.clone(), soc: None };
        let closed = predict_closed_loop(&net, &free, ClosedLoopState::new(soc0, n0)).unwrap();
        let lag = cfg.max_lag();
        prop_assert_eq!(&open[lag..], &closed[lag..]);
    }

    #[test]
    fn bootstrap_slots_hold_soc0(cfg in config(), seed in any::<u64>(), n0 in 0usize..30, soc0 in 0.0f64..=1.0) {
        let net = net_from(cfg.clone(), seed);
        let s = series_from(seed ^ 2, 30);
        let free = NormalizedSeries { exogenous: s.exogenous.clone(), soc: None };
        let out = predict_closed_loop(&net, &free, ClosedLoopState::new(soc0, n0)).unwrap();
        let lag = cfg.max_lag();
        prop_assert!(out[..lag].iter().all(|v| *v == soc0));
        for n in lag..n0.min(30) {
            let mut values = vec![soc0; cfg.output_delays.len()];
            for ch in &s.exogenous {
                values.extend(cfg.input_delays.iter().map(|k| ch[n - k]));
            }
            prop_assert_eq!(out[n], forward(&net, &RegressorRow { values, target: None }).unwrap());
        }
    }

    #[test]
    fn steps_before_n0_ignore_earlier_outputs(cfg in config(), seed in any::<u64>(), soc0 in 0.0f64..=1.0) {
        // Before n0 every output-lag slot holds soc0, so moving the switch
        // later cannot change the earlier outputs.
        let net = net_from(cfg.clone(), seed);
        let s = series_from(seed ^ 3, 25);
        let free = NormalizedSeries { exogenous: s.exogenous, soc: None };
        let n0 = 20;
        let a = predict_closed_loop(&net, &free, ClosedLoopState::new(soc0, n0)).unwrap();
        let b = predict_closed_loop(&net, &free, ClosedLoopState::new(soc0, 25)).unwrap();
        prop_assert_eq!(&a[..n0], &b[..n0]);
    }

    #[test]
    fn closed_loop_is_deterministic(cfg in config(), seed in any::<u64>()) {
        let net = net_from(cfg, seed);
        let s = NormalizedSeries { soc: None, ..series_from(seed, 50) };
        let a = predict_closed_loop(&net, &s, ClosedLoopState::new(0.4, 3)).unwrap();
        let b = predict_closed_loop(&net, &s, ClosedLoopState::new(0.4, 3)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn gradient_matches_finite_differences(cfg in config(), seed in any::<u64>()) {
        let net = net_from(cfg.clone(), seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let row = RegressorRow { values: (0..cfg.regressor_len()).map(|_| rng.random_range(-1.0..1.0)).collect(), target: None };
        let g = forward_gradient(&net, &row).unwrap();
        let p = net.mlp.params();
        let h = 1e-6;
        for k in 0..p.len() {
            let mut q = p.clone();
            q[k] += h;
            let mut plus = net.clone();
            plus.mlp.set_params(&q);
            q[k] -= 2.0 * h;
            let mut minus = net.clone();
            minus.mlp.set_params(&q);
            let fd = (forward(&plus, &row).unwrap() - forward(&minus, &row).unwrap()) / (2.0 * h);
            prop_assert!((g[k] - fd).abs() / g[k].abs().max(fd.abs()).max(1.0) < 1e-6);
        }
    }

    #[test]
    fn split_partitions_in_order(n in 10usize..5000, a in 0.05f64..1.0, b in 0.05f64..1.0, c in 0.05f64..1.0) {
        let sum = a + b + c;
        let ratios = [a / sum, b / sum, 1.0 - a / sum - b / sum];
        prop_assume!(ratios[2] > 0.0);
        let s = split_counts(n, ratios);
        prop_assert_eq!(s.train.start, 0);
        prop_assert_eq!(s.train.end, s.val.start);
        prop_assert_eq!(s.val.end, s.test.start);
        prop_assert_eq!(s.test.end, n);
        prop_assert!((s.train.len() as f64 - ratios[0] * n as f64).abs() < 1.0 + 1e-6);
        prop_assert!((s.val.len() as f64 - ratios[1] * n as f64).abs() < 1.0 + 1e-6);
        prop_assert_eq!(split_counts(n, ratios), s);
    }

    #[test]
    fn metrics_mae_never_exceeds_rmse(errs in prop::collection::vec(-1.0f64..1.0, 1..200)) {
        let truth = vec![0.5; errs.len()];
        let est: Vec<f64> = errs.iter().map(|e| 0.5 + e).collect();
        let m = evaluate(&truth, &est).unwrap();
        prop_assert!(m.mae_pct >= 0.0);
        prop_assert!(m.mae_pct <= m.rmse_pct * (1.0 + 1e-12) + 1e-15);
        prop_assert_eq!(m.n_points, errs.len());
    }

    #[test]
    fn normalize_round_trip(lo in -100.0f64..100.0, width in 1e-3f64..100.0, x in -1e3f64..1e3) {
        let r = ChannelRange { min: lo, max: lo + width };
        prop_assert!((r.inverse(r.forward(x)) - x).abs() <= 1e-9 * x.abs().max(1.0) * (1.0 + (lo.abs() + width) / width));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn coulomb_additive(cur in prop::collection::vec(-3.0f64..3.0, 4..400), cut in 0.1f64..0.9) {
        let n = cur.len();
        let k = ((n - 1) as f64 * cut) as usize;
        prop_assume!(k >= 1 && k < n - 1);
        let cfg = CoulombConfig::new(1e6, 0.5).unwrap();
        let full = coulomb_count(&battery(cur.clone()), &cfg).unwrap().soc;
        let a = coulomb_count(&battery(cur[..=k].to_vec()), &cfg).unwrap().soc;
        let b = coulomb_count(&battery(cur[k..].to_vec()), &CoulombConfig::new(1e6, a[k]).unwrap()).unwrap().soc;
        prop_assert!((full[n - 1] - b[b.len() - 1]).abs() < 1e-12);
    }

    #[test]
    fn coulomb_conserves_charge(half in prop::collection::vec(-3.0f64..3.0, 2..300)) {
        let cur: Vec<f64> = half.iter().copied().chain(half.iter().rev().map(|v| -v)).collect();
        let r = coulomb_count(&battery(cur), &CoulombConfig::new(1e6, 0.5).unwrap()).unwrap();
        prop_assert_eq!(r.clamp_count, 0);
        prop_assert!((r.soc.last().unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn segments_partition_timeline(cur in prop::collection::vec(-2.0f64..2.0, 5..300), min_len in 1usize..6) {
        let s = battery(cur);
        let cfg = SegmentConfig { min_len, ..SegmentConfig::default() };
        match segment_by_regime(&s, &cfg) {
            Ok(segs) => {
                prop_assert_eq!(segs[0].range.start, 0);
                prop_assert_eq!(segs.last().unwrap().range.end, s.len());
                for w in segs.windows(2) {
                    prop_assert_eq!(w[0].range.end, w[1].range.start);
                    prop_assert_ne!(w[0].regime, w[1].regime);
                }
                if segs.len() > 1 {
                    prop_assert!(segs.iter().all(|g| g.range.len() >= min_len));
                }
            }
            Err(e) => prop_assert_eq!(e, hess_soc::Error::NoSegments),
        }
    }

    #[test]
    fn accepted_lm_steps_are_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<RegressorRow> = (0..40)
            .map(|_| {
                let values: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
                let target = (values[0] - 0.5 * values[3]).sin();
                RegressorRow { values, target: Some(target) }
            })
            .collect();
        let net = NarxNetwork::random(NarxConfig::default(), &mut rng).unwrap();
        let cfg = TrainConfig { max_epochs: 15, seed, ..TrainConfig::default() };
        let (_, rep) = train_narx(net.clone(), &rows, &cfg).unwrap();
        let mut prev = rep.initial_train_mse;
        for m in &rep.train_mse {
            prop_assert!(*m <= prev);
            prev = *m;
        }
        let (_, again) = train_narx(net, &rows, &cfg).unwrap();
        prop_assert_eq!(rep.weights_checksum, again.weights_checksum);
    }
}
