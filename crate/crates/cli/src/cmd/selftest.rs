//! Invariant checks on the shipped presets and on seeded random networks.
//! Fast enough to run in CI before anything else.

use hess_soc::sim::ProfileKind;
use hess_soc::trainer::split_counts;
use hess_soc::{
    coulomb_count, evaluate, forward, lm_jacobian, predict_closed_loop, predict_open_loop, train_narx,
    ClosedLoopState, CoulombConfig, NarxConfig, NarxNetwork, NoiseConfig, NormalizedSeries, Preset, RegressorRow,
    TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, r: Result<String, String>) -> Check {
    match r {
        Ok(detail) => Check { name, passed: true, detail },
        Err(detail) => Check { name, passed: false, detail },
    }
}

fn random_net(seed: u64) -> NarxNetwork {
    let mut net = NarxNetwork::random(NarxConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed)).expect("default config");
    let p: Vec<f64> = net.mlp.params().iter().map(|w| 3.0 * w).collect();
    net.mlp.set_params(&p);
    net
}

fn random_series(seed: u64, n: usize) -> NormalizedSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ch = || (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    let (i, v, s) = (ch(), ch(), ch());
    NormalizedSeries { exogenous: vec![i, v], soc: Some(s) }
}

fn coulomb_equivalence() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for preset in Preset::all() {
        for dev in &preset.devices {
            for kind in [ProfileKind::Cccv, ProfileKind::Udds].into_iter().filter(|k| dev.has_profile(*k)) {
                let out = dev.simulate(kind, None, &NoiseConfig::none()).map_err(|e| e.to_string())?;
                let cfg = CoulombConfig::new(dev.capacity_c().map_err(|e| e.to_string())?, dev.initial_soc(kind))
                    .map_err(|e| e.to_string())?;
                let cc = coulomb_count(&out.series.without_soc(), &cfg).map_err(|e| e.to_string())?;
                let truth = out.series.soc.as_ref().expect("simulator writes soc");
                let err = truth.iter().zip(&cc.soc).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if err > 1e-9 {
                    return Err(format!("{}/{}: max error {err:e}", preset.name, dev.name));
                }
                worst = worst.max(err);
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} runs, max error {worst:.1e}"))
}

fn gradient() -> Result<String, String> {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let net = random_net(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
        let row = RegressorRow { values: (0..6).map(|_| rng.random_range(-1.0..1.0)).collect(), target: Some(0.0) };
        let j = lm_jacobian(&net, std::slice::from_ref(&row)).map_err(|e| e.to_string())?;
        let p = net.mlp.params();
        for k in 0..p.len() {
            let mut q = p.clone();
            let mut shifted = net.clone();
            q[k] += h;
            shifted.mlp.set_params(&q);
            let plus = forward(&shifted, &row).map_err(|e| e.to_string())?;
            q[k] -= 2.0 * h;
            shifted.mlp.set_params(&q);
            let minus = forward(&shifted, &row).map_err(|e| e.to_string())?;
            // Residual e = target - y, so its derivative is -dy/dw.
            let fd = -(plus - minus) / (2.0 * h);
            let rel = (j[(0, k)] - fd).abs() / j[(0, k)].abs().max(fd.abs()).max(1.0);
            worst = worst.max(rel);
        }
    }
    if worst < 1e-5 {
        Ok(format!("20 nets, max relative error {worst:.1e}"))
    } else {
        Err(format!("max relative error {worst:e}"))
    }
}

fn feedback_independence() -> Result<String, String> {
    for seed in 0..20 {
        let mut net = random_net(seed);
        for row in &mut net.mlp.hidden_weights {
            row[0] = 0.0;
            row[1] = 0.0;
        }
        let s = random_series(seed, 80);
        let open = predict_open_loop(&net, &s).map_err(|e| e.to_string())?;
        let free = NormalizedSeries { soc: None, ..s };
        let closed =
            predict_closed_loop(&net, &free, ClosedLoopState::new(0.5, 7)).map_err(|e| e.to_string())?;
        if open[2..] != closed[2..] {
            return Err(format!("seed {seed}: closed loop differs from open loop"));
        }
    }
    Ok("20 nets, bitwise equal".into())
}

fn bootstrap() -> Result<String, String> {
    for seed in 0..20 {
        let net = random_net(seed);
        let soc0 = 0.05 * seed as f64;
        let free = NormalizedSeries { soc: None, ..random_series(seed + 50, 40) };
        let n0 = 25;
        let out = predict_closed_loop(&net, &free, ClosedLoopState::new(soc0, n0)).map_err(|e| e.to_string())?;
        if out[..2].iter().any(|v| *v != soc0) {
            return Err(format!("seed {seed}: warm-up outputs are not soc0"));
        }
        for n in 2..n0 {
            let x = &free.exogenous;
            let values = vec![soc0, soc0, x[0][n - 1], x[0][n - 2], x[1][n - 1], x[1][n - 2]];
            let want = forward(&net, &RegressorRow { values, target: None }).map_err(|e| e.to_string())?;
            if out[n] != want {
                return Err(format!("seed {seed} step {n}: feedback slot was not soc0"));
            }
        }
    }
    Ok("20 nets, exact".into())
}

fn metrics() -> Result<String, String> {
    let truth = [0.5, 0.6, 0.7, 0.8];
    let offset: Vec<f64> = truth.iter().map(|v| v + 0.001).collect();
    let mixed = [0.51, 0.6, 0.69, 0.8];
    let a = evaluate(&truth, &offset).map_err(|e| e.to_string())?;
    let b = evaluate(&truth, &mixed).map_err(|e| e.to_string())?;
    let close = |x: f64, y: f64| (x - y).abs() < 1e-9;
    if close(a.mae_pct, 0.1) && close(a.rmse_pct, 0.1) && close(b.mae_pct, 0.5) && close(b.rmse_pct, 0.5f64.sqrt()) {
        Ok("offset and mixed cases".into())
    } else {
        Err(format!("got {a:?} and {b:?}"))
    }
}

fn split() -> Result<String, String> {
    let s = split_counts(1000, [0.70, 0.15, 0.15]);
    if (s.train.len(), s.val.len(), s.test.len()) == (700, 150, 150) && s.test.end == 1000 {
        Ok("700/150/150".into())
    } else {
        Err(format!("{s:?}"))
    }
}

fn lm_monotone() -> Result<String, String> {
    let s = random_series(9, 120);
    let rows = hess_soc::build_open_loop_rows(&s, &NarxConfig::default()).map_err(|e| e.to_string())?;
    let net = NarxNetwork::random(NarxConfig::default(), &mut ChaCha8Rng::seed_from_u64(9)).map_err(|e| e.to_string())?;
    let cfg = TrainConfig { max_epochs: 30, ..TrainConfig::default() };
    let (_, rep) = train_narx(net, &rows, &cfg).map_err(|e| e.to_string())?;
    let mut prev = rep.initial_train_mse;
    for m in &rep.train_mse {
        if *m > prev {
            return Err(format!("train MSE rose from {prev} to {m}"));
        }
        prev = *m;
    }
    Ok(format!("{} epochs, {:?}", rep.epochs_run, rep.stop_reason))
}

pub fn checks() -> Vec<Check> {
    vec![
        check("coulomb_equivalence", coulomb_equivalence()),
        check("jacobian_vs_finite_differences", gradient()),
        check("feedback_independence", feedback_independence()),
        check("bootstrap_holds_soc0", bootstrap()),
        check("metrics_hand_cases", metrics()),
        check("split_counts", split()),
        check("lm_accepted_steps_monotone", lm_monotone()),
    ]
}

/// Prints one line per check; fails if any check fails.
pub fn run() -> CliResult<Vec<Check>> {
    let results = checks();
    for c in &results {
        println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    match results.iter().filter(|c| !c.passed).count() {
        0 => Ok(results),
        n => Err(CliError::SelfTest(n)),
    }
}
