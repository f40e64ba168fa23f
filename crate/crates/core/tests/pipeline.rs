use hess_soc::pipeline::{ChannelRange, Networks, OutlierReason};
use hess_soc::sim::ProfileKind;
use hess_soc::{
    cleanse, coulomb_count, denormalize_soc, estimate_soc, evaluate, fit_estimator, holdout_metrics, normalize,
    segment_by_regime, CleanseRules, CoulombConfig, Device, Error, FitOptions, NoiseConfig, NormStats, Phase, Preset,
    Regime, SampleSeries, SegmentConfig, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn series(current: Vec<f64>, dt: f64) -> SampleSeries {
    let n = current.len();
    SampleSeries::new(SampleSeries::uniform_time(n, dt), current, vec![3.7; n], None, Device::Battery).unwrap()
}

#[test]
fn sine_current_matches_fine_grid_integral() {
    let cn = 3600.0;
    let s = series((0..=100).map(|k| (k as f64).sin()).collect(), 1.0);
    let got = coulomb_count(&s, &CoulombConfig::new(cn, 1.0).unwrap()).unwrap().soc;
    // Midpoint rule on a grid 1000 times finer, accumulated per coarse step.
    let sub = 1000;
    let h = 1.0 / sub as f64;
    let mut q = 0.0;
    for k in 0..100 {
        for j in 0..sub {
            q += (k as f64 + (j as f64 + 0.5) * h).sin() * h;
        }
        let oracle = 1.0 - q / cn;
        assert!((got[k + 1] - oracle).abs() < 1e-4, "t={}", k + 1);
    }
}

#[test]
fn one_amp_for_an_hour_empties_one_amp_hour() {
    let s = series(vec![1.0; 3601], 1.0);
    let r = coulomb_count(&s, &CoulombConfig::from_amp_hours(1.0, 1.0).unwrap()).unwrap();
    // Rounding may dip the raw integral a hair below zero at the very end.
    assert!(r.soc[3600].abs() < 1e-12);
    assert!(r.clamp_count <= 1);
}

#[test]
fn counting_is_additive_over_a_split() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cur: Vec<f64> = (0..401).map(|_| rng.random_range(-2.0..2.0)).collect();
    let cfg = CoulombConfig::new(5000.0, 0.5).unwrap();
    let full = coulomb_count(&series(cur.clone(), 1.0), &cfg).unwrap().soc;
    let first = coulomb_count(&series(cur[..201].to_vec(), 1.0), &cfg).unwrap().soc;
    let handoff = CoulombConfig::new(5000.0, first[200]).unwrap();
    let second = coulomb_count(&series(cur[200..].to_vec(), 1.0), &handoff).unwrap().soc;
    for k in 0..201 {
        assert!((full[k] - first[k]).abs() < 1e-12);
        assert!((full[200 + k] - second[k]).abs() < 1e-12);
    }
}

#[test]
fn zero_net_charge_returns_to_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let half: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..3.0)).collect();
    let cur: Vec<f64> = half.iter().copied().chain(half.iter().rev().map(|v| -v)).collect();
    let r = coulomb_count(&series(cur, 1.0), &CoulombConfig::new(1e5, 0.5).unwrap()).unwrap();
    assert_eq!(r.clamp_count, 0);
    assert!((r.soc.last().unwrap() - 0.5).abs() < 1e-9);
}

fn battery_room(noisy: bool) -> SampleSeries {
    let p = Preset::load("battery_room").unwrap();
    let d = &p.devices[0];
    let noise = if noisy { d.noise } else { NoiseConfig::none() };
    d.simulate(ProfileKind::Cccv, None, &noise).unwrap().series
}

#[test]
fn injected_spikes_are_found_exactly() {
    let mut s = battery_room(true);
    let v_spikes = [17, 640, 3001, 9000];
    let i_spikes = [250, 3001, 12000];
    for &k in &v_spikes {
        s.voltage[k] = 9.5;
    }
    s.voltage[5000] = f64::NAN;
    for &k in &i_spikes {
        s.current[k] = -400.0;
    }
    let rules = CleanseRules { v_min: 2.0, v_max: 4.6, i_max: 50.0, ..CleanseRules::default() };
    let (clean, log) = cleanse(&s, &rules).unwrap();
    let mut want_v: Vec<usize> = v_spikes.to_vec();
    want_v.push(5000);
    want_v.sort();
    let got_v: Vec<usize> = log.iter().filter(|r| r.channel == hess_soc::pipeline::Channel::Voltage).map(|r| r.index).collect();
    let got_i: Vec<usize> = log.iter().filter(|r| r.channel == hess_soc::pipeline::Channel::Current).map(|r| r.index).collect();
    assert_eq!(got_v, want_v);
    assert_eq!(got_i, i_spikes.to_vec());
    assert!(log.iter().any(|r| r.index == 5000 && r.reason == OutlierReason::NonFinite));
    assert_eq!(clean.len(), s.len());
    assert!(clean.voltage.iter().all(|v| v.is_finite() && *v < 4.6));
}

#[test]
fn clean_series_passes_untouched_and_nan_midpoint_interpolates() {
    let s = battery_room(false);
    let (out, log) = cleanse(&s, &CleanseRules::default()).unwrap();
    assert!(log.is_empty());
    assert_eq!(out, s);

    let n = 12;
    let mut ramp = SampleSeries::new(
        SampleSeries::uniform_time(n, 1.0),
        vec![1.0; n],
        (0..n).map(|k| 3.0 + 0.1 * k as f64).collect(),
        None,
        Device::Battery,
    )
    .unwrap();
    ramp.voltage[5] = f64::NAN;
    let (out, log) = cleanse(&ramp, &CleanseRules::default()).unwrap();
    assert_eq!(log.len(), 1);
    assert!((out.voltage[5] - 3.5).abs() < 1e-12);
}

#[test]
fn too_many_outliers_rejected() {
    let mut s = battery_room(false);
    let n = s.len();
    for k in (0..n).step_by(5) {
        s.voltage[k] = f64::NAN;
    }
    assert!(matches!(cleanse(&s, &CleanseRules::default()), Err(Error::TooManyOutliers { .. })));
}

#[test]
fn normalization_inverse_pair() {
    let r = ChannelRange { min: 0.0, max: 2.0 };
    assert_eq!(r.forward(1.0), 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let lo = rng.random_range(-10.0..10.0);
        let r = ChannelRange { min: lo, max: lo + rng.random_range(0.01..20.0) };
        let x = rng.random_range(-50.0..50.0);
        assert!((r.inverse(r.forward(x)) - x).abs() <= 1e-12 * x.abs().max(1.0));
        let y = rng.random_range(-3.0..3.0);
        assert!((r.forward(r.inverse(y)) - y).abs() <= 1e-12 * y.abs().max(1.0));
    }
    let s = battery_room(false);
    let stats = NormStats::from_series(&s, 0..s.len()).unwrap();
    let v = 0.3712;
    assert!((denormalize_soc(hess_soc::pipeline::normalize_soc(v, &stats), &stats) - v).abs() < 1e-12);
}

#[test]
fn degenerate_channel_rejected() {
    let mut s = series(vec![1.0; 20], 1.0);
    s.soc = Some((0..20).map(|k| 1.0 - 0.01 * k as f64).collect());
    assert!(matches!(NormStats::from_series(&s, 0..20), Err(Error::DegenerateChannel("current"))));
}

/// Regime implied by the simulator's phase labels; rest continues the
/// previous regime.
fn label_segments(phases: &[Phase]) -> Vec<(Regime, usize)> {
    let mut out: Vec<(Regime, usize)> = Vec::new();
    let first = phases
        .iter()
        .find_map(|p| match p {
            Phase::CcCharge | Phase::CvCharge => Some(Regime::Charge),
            Phase::Discharge => Some(Regime::Discharge),
            _ => None,
        })
        .unwrap();
    let mut cur = first;
    for (k, p) in phases.iter().enumerate() {
        cur = match p {
            Phase::CcCharge | Phase::CvCharge => Regime::Charge,
            Phase::Discharge => Regime::Discharge,
            _ => cur,
        };
        if out.last().is_none_or(|(r, _)| *r != cur) {
            out.push((cur, k));
        }
    }
    out[0].1 = 0;
    out
}

#[test]
fn cccv_segments_follow_phase_labels() {
    let s = battery_room(false);
    let phases = s.phases.clone().unwrap();
    assert!(phases.contains(&Phase::Rest) && phases.contains(&Phase::CvCharge));
    let segs = segment_by_regime(&s, &SegmentConfig::default()).unwrap();
    let got: Vec<(Regime, usize)> = segs.iter().map(|g| (g.regime, g.range.start)).collect();
    assert_eq!(got, label_segments(&phases));
    assert_eq!(segs.last().unwrap().range.end, s.len());
    for w in segs.windows(2) {
        assert_eq!(w[0].range.end, w[1].range.start);
    }
}

#[test]
fn simple_segmentation_cases() {
    let s = series(vec![1.0; 40], 1.0);
    let segs = segment_by_regime(&s, &SegmentConfig::default()).unwrap();
    assert_eq!(segs.len(), 1);
    assert_eq!((segs[0].regime, segs[0].range.clone()), (Regime::Discharge, 0..40));

    let s = series([vec![1.0; 50], vec![-1.0; 50]].concat(), 1.0);
    let segs = segment_by_regime(&s, &SegmentConfig::default()).unwrap();
    assert_eq!(segs.len(), 2);
    assert_eq!(segs[1].range.start, 50);
    assert_eq!(segs[1].regime, Regime::Charge);

    assert!(matches!(segment_by_regime(&series(vec![0.0; 10], 1.0), &SegmentConfig::default()), Err(Error::NoSegments)));
}

#[test]
fn metrics_hand_cases() {
    let a = [0.5, 0.6, 0.7];
    let m = evaluate(&a, &a).unwrap();
    assert_eq!((m.mae_pct, m.rmse_pct, m.n_points), (0.0, 0.0, 3));
    let off: Vec<f64> = a.iter().map(|v| v + 0.001).collect();
    let m = evaluate(&a, &off).unwrap();
    assert!((m.mae_pct - 0.1).abs() < 1e-9 && (m.rmse_pct - 0.1).abs() < 1e-9);
    let base = [0.5; 4];
    let est = [0.51, 0.49, 0.5, 0.5];
    let m = evaluate(&base, &est).unwrap();
    assert!((m.mae_pct - 0.5).abs() < 1e-9);
    assert!((m.rmse_pct - 100.0 * (0.0002f64 / 4.0).sqrt()).abs() < 1e-9);
    assert!((m.rmse_pct - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    assert!(matches!(evaluate(&[0.1], &[0.1, 0.2]), Err(Error::LengthMismatch(1, 2))));
    assert!(evaluate(&[], &[]).is_err());
}

fn short_fit(name: &str, n: usize) -> (SampleSeries, hess_soc::EstimatorBundle, hess_soc::FitReport) {
    let p = Preset::load(name).unwrap();
    let d = &p.devices[0];
    let s = d.simulate(p.default_profile, None, &d.noise).unwrap().series.slice(0..n);
    let train = TrainConfig { max_epochs: 25, ..p.train_config() };
    let (b, r) = fit_estimator(&s, d.kind, &p.narx_config(), &train, &d.fit).unwrap();
    (s, b, r)
}

#[test]
fn supercapacitor_bundle_has_one_network() {
    let (s, b, r) = short_fit("sc_25f", 2500);
    assert_eq!(b.networks.count(), 1);
    assert!(matches!(b.networks, Networks::Single(_)));
    assert_eq!(r.networks.len(), 1);
    let rows = s.len() - 2;
    let net = &r.networks[0];
    assert_eq!(net.train_rows + net.val_rows + net.test_rows, rows);
}

#[test]
fn battery_bundle_has_two_networks_on_disjoint_rows() {
    let (s, b, r) = short_fit("battery_room", 12000);
    let Networks::PerRegime { charge, discharge } = &b.networks else { panic!("expected two networks") };
    assert_ne!(charge, discharge);
    assert_eq!(r.networks.len(), 2);
    let total: usize = r.networks.iter().map(|n| n.train_rows + n.val_rows + n.test_rows).sum();
    assert_eq!(total, s.len() - 2);
    let split = hess_soc::trainer::split_counts(s.len() - 2, [0.7, 0.15, 0.15]);
    assert_eq!(r.networks.iter().map(|n| n.train_rows).sum::<usize>(), split.train.len());
    assert_eq!(r.networks.iter().map(|n| n.val_rows).sum::<usize>(), split.val.len());
    assert!(r.networks.iter().all(|n| n.train_rows > 0));
}

#[test]
fn refit_reproduces_bundle_checksum() {
    let (_, a, _) = short_fit("sc_25f", 1500);
    let (_, b, _) = short_fit("sc_25f", 1500);
    assert_eq!(a.checksum(), b.checksum());
    let back = hess_soc::EstimatorBundle::from_json(&a.to_json().unwrap()).unwrap();
    assert_eq!(back.checksum(), a.checksum());
}

#[test]
fn estimate_checks_device_and_soc0_and_chains_segments() {
    let (s, b, _) = short_fit("battery_room", 12000);
    assert!(matches!(estimate_soc(&b, &s, 1.5), Err(Error::InvalidSoc0(_))));
    let mut other = s.clone();
    other.device = Device::Supercapacitor;
    assert!(matches!(estimate_soc(&b, &other, 0.5), Err(Error::ChannelMismatch(_))));

    let est = estimate_soc(&b, &s.without_soc(), s.soc().unwrap()[0]).unwrap();
    assert_eq!(est.soc.len(), s.len());
    assert!(est.segments.len() >= 2);
    assert!((est.soc[0] - s.soc().unwrap()[0]).abs() < 1e-12);
    assert!(est.soc.iter().all(|v| (0.0..=1.0).contains(v)));
    // Chaining keeps the estimate continuous across regime changes.
    for seg in &est.segments[1..] {
        let k = seg.range.start;
        assert!((est.soc[k] - est.soc[k - 1]).abs() < 0.02, "jump at {k}");
    }
    let again = estimate_soc(&b, &s.without_soc(), s.soc().unwrap()[0]).unwrap();
    assert_eq!(est, again);
}

#[test]
fn out_of_range_test_inputs_still_estimate() {
    let p = Preset::load("sc_25f").unwrap();
    let d = &p.devices[0];
    let s = d.simulate(p.default_profile, None, &d.noise).unwrap().series;
    let (b, r) = fit_estimator(&s, d.kind, &p.narx_config(), &p.train_config(), &d.fit).unwrap();
    let ns = normalize(&s.slice(r.test_start..s.len()), &b.norm).unwrap();
    let outside = ns.exogenous.iter().flatten().filter(|v| v.abs() > 1.0).count();
    assert!(outside > 0, "test split stayed inside the training range");
    let h = holdout_metrics(&b, &s, r.test_start).unwrap();
    assert!(h.metrics.mae_pct < 1.0, "{}", h.metrics.mae_pct);
}

#[test]
fn fit_requires_ground_truth() {
    let s = battery_room(false).without_soc();
    let p = Preset::load("battery_room").unwrap();
    let r = fit_estimator(&s, Device::Battery, &p.narx_config(), &p.train_config(), &FitOptions::default());
    assert!(matches!(r, Err(Error::MissingGroundTruth)));
}
