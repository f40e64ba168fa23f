//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Thresholds are fixed here and never relaxed at run time.

use std::time::Instant;

use hess_soc::sim::ProfileKind;
use hess_soc::{
    coulomb_count, evaluate, forward, lm_jacobian, predict_closed_loop, predict_open_loop, ClosedLoopState,
    CoulombConfig, ModelKind, NarxConfig, NarxNetwork, NoiseConfig, NormalizedSeries, Preset, RegressorRow, StopReason,
};
use hess_soc_cli::cmd::compare::{self, run_device};
use hess_soc_cli::{DeviceRun, Experiment, ExperimentSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const COULOMB_TOL: f64 = 1e-9;
const COULOMB_BUDGET_S: f64 = 1.0;
const GRADIENT_TOL: f64 = 1e-5;
const GRADIENT_BUDGET_S: f64 = 5.0;
const NOISY_MAE: f64 = 1.0;
const NOISY_RMSE: f64 = 1.5;
const CLEAN_MAE: f64 = 0.1;
const PRESET_BUDGET_S: f64 = 60.0;
const HOT_MAE: f64 = 2.0;
const METRICS_TOL: f64 = 1e-9;

struct Report {
    failed: usize,
    total: usize,
}

impl Report {
    fn line(&mut self, name: &str, pass: bool, detail: String) {
        self.total += 1;
        if !pass {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn experiment(preset: &str) -> Experiment {
    ExperimentSpec { preset: Some(preset.into()), ..ExperimentSpec::default() }.resolve().expect("shipped preset")
}

fn random_net(cfg: NarxConfig, seed: u64, scale: f64) -> NarxNetwork {
    let mut net = NarxNetwork::random(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).expect("valid config");
    let p: Vec<f64> = net.mlp.params().iter().map(|w| scale * w).collect();
    net.mlp.set_params(&p);
    net
}

fn random_series(rng: &mut ChaCha8Rng, n: usize) -> NormalizedSeries {
    let mut ch = || (0..n).map(|_| rng.random_range(-1.2..1.2)).collect::<Vec<f64>>();
    let (i, v, s) = (ch(), ch(), ch());
    NormalizedSeries { exogenous: vec![i, v], soc: Some(s) }
}

fn random_config(rng: &mut ChaCha8Rng) -> NarxConfig {
    let mut lags = |max: usize| {
        let mut v: Vec<usize> = (1..=max).filter(|_| rng.random_bool(0.6)).collect();
        if v.is_empty() {
            v.push(1);
        }
        v
    };
    let input_delays = lags(4);
    let output_delays = lags(4);
    NarxConfig { input_delays, output_delays, hidden_neurons: rng.random_range(1..20), input_channels: 2 }
}

fn coulomb(r: &mut Report) {
    let clock = Instant::now();
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    let mut error = None;
    for preset in Preset::all() {
        for dev in &preset.devices {
            for kind in [ProfileKind::Cccv, ProfileKind::Udds] {
                if !dev.has_profile(kind) {
                    continue;
                }
                let series = dev.simulate(kind, None, &NoiseConfig::none()).expect("preset simulates").series;
                let cfg = CoulombConfig::new(dev.capacity_c().unwrap(), dev.initial_soc(kind)).unwrap();
                match coulomb_count(&series.without_soc(), &cfg) {
                    Ok(cc) => {
                        let truth = series.soc.as_ref().unwrap();
                        let e = truth.iter().zip(&cc.soc).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                        worst = worst.max(e);
                        runs += 1;
                    }
                    Err(e) => error = Some(format!("{}/{}: {e}", preset.name, dev.name)),
                }
            }
        }
    }
    let t = clock.elapsed().as_secs_f64();
    let pass = error.is_none() && worst <= COULOMB_TOL && t < COULOMB_BUDGET_S;
    r.line(
        "coulomb_oracle_equivalence",
        pass,
        format!("{runs} preset runs, max |dSOC| {worst:.2e} (tol {COULOMB_TOL:e}), {t:.3}s (budget {COULOMB_BUDGET_S}s){}", error.map(|e| format!(", error {e}")).unwrap_or_default()),
    );
}

fn gradient(r: &mut Report) {
    let clock = Instant::now();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let net = random_net(NarxConfig::default(), seed, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let row = RegressorRow { values: (0..6).map(|_| rng.random_range(-1.0..1.0)).collect(), target: Some(0.3) };
        let j = lm_jacobian(&net, std::slice::from_ref(&row)).unwrap();
        let p = net.mlp.params();
        for k in 0..p.len() {
            let residual = |delta: f64| {
                let mut q = p.clone();
                q[k] += delta;
                let mut n = net.clone();
                n.mlp.set_params(&q);
                row.target.unwrap() - forward(&n, &row).unwrap()
            };
            let fd = (residual(h) - residual(-h)) / (2.0 * h);
            let rel = (j[(0, k)] - fd).abs() / j[(0, k)].abs().max(fd.abs()).max(1.0);
            worst = worst.max(rel);
        }
    }
    let t = clock.elapsed().as_secs_f64();
    r.line(
        "jacobian_gradient_check",
        worst < GRADIENT_TOL && t < GRADIENT_BUDGET_S,
        format!("20 seeded instances, max relative error {worst:.2e} (tol {GRADIENT_TOL:e}), {t:.3}s (budget {GRADIENT_BUDGET_S}s)"),
    );
}

fn closed_loop(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let instances: usize = 200;
    let mut independence = 0;
    let mut bootstrap = 0;
    for case in 0..instances {
        let cfg = random_config(&mut rng);
        let lag = cfg.max_lag();
        let ny = cfg.output_delays.len();
        let n = lag + rng.random_range(5..60);
        let series = random_series(&mut rng, n);
        let free = NormalizedSeries { exogenous: series.exogenous.clone(), soc: None };
        let soc0: f64 = rng.random_range(0.0..=1.0);
        let n0 = rng.random_range(0..n + 5);

        let mut net = random_net(cfg.clone(), case as u64, 3.0);
        let out = predict_closed_loop(&net, &free, ClosedLoopState::new(soc0, n0)).unwrap();
        let mut exact = out[..lag.min(n)].iter().all(|v| *v == soc0);
        for k in lag..n0.min(n) {
            let mut values = vec![soc0; ny];
            for ch in &free.exogenous {
                values.extend(cfg.input_delays.iter().map(|d| ch[k - d]));
            }
            exact &= out[k] == forward(&net, &RegressorRow { values, target: None }).unwrap();
        }
        bootstrap += exact as usize;

        for w in &mut net.mlp.hidden_weights {
            w[..ny].iter_mut().for_each(|x| *x = 0.0);
        }
        let open = predict_open_loop(&net, &series).unwrap();
        let closed = predict_closed_loop(&net, &free, ClosedLoopState::new(soc0, n0)).unwrap();
        independence += (open[lag..] == closed[lag..]) as usize;
    }
    r.line(
        "closed_loop_feedback_independence",
        independence == instances,
        format!("{independence}/{instances} random instances bitwise equal to open loop"),
    );
    r.line(
        "closed_loop_bootstrap_holds_soc0",
        bootstrap == instances,
        format!("{bootstrap}/{instances} random instances with every pre-n0 feedback slot equal to SOC0"),
    );
}

fn timed_run(exp: &Experiment, noise: &NoiseConfig) -> (hess_soc_cli::CliResult<DeviceRun>, f64) {
    let preset = exp.preset.as_ref().unwrap();
    let dev = &preset.devices[0];
    let clock = Instant::now();
    let run = run_device(dev, ProfileKind::Cccv, None, noise, &exp.narx, &exp.train, ModelKind::Narx);
    (run, clock.elapsed().as_secs_f64())
}

fn cccv(r: &mut Report, runs: &mut Vec<DeviceRun>) {
    for name in ["sc_25f", "battery_room"] {
        let exp = experiment(name);
        let dev = &exp.preset.as_ref().unwrap().devices[0];
        let noise = dev.noise;
        let condition = noise.sigma_v == 0.005 && noise.sigma_i == 0.010 && noise.seed == 42;

        let (noisy, t_noisy) = timed_run(&exp, &noise);
        match noisy {
            Ok(run) => {
                let m = run.holdout;
                r.line(
                    &format!("cccv_noisy_{name}"),
                    condition && m.mae_pct < NOISY_MAE && m.rmse_pct < NOISY_RMSE && t_noisy < PRESET_BUDGET_S,
                    format!(
                        "sigma_v {} V sigma_i {} A seed {}, test MAE {:.4}% (< {NOISY_MAE}), RMSE {:.4}% (< {NOISY_RMSE}), {t_noisy:.1}s (budget {PRESET_BUDGET_S}s)",
                        noise.sigma_v, noise.sigma_i, noise.seed, m.mae_pct, m.rmse_pct
                    ),
                );
                runs.push(run);
            }
            Err(e) => r.line(&format!("cccv_noisy_{name}"), false, format!("error {e}")),
        }

        let (clean, t_clean) = timed_run(&exp, &NoiseConfig::none());
        match clean {
            Ok(run) => {
                let m = run.holdout;
                r.line(
                    &format!("cccv_noiseless_{name}"),
                    m.mae_pct < CLEAN_MAE && t_clean < PRESET_BUDGET_S,
                    format!("test MAE {:.4}% (< {CLEAN_MAE}), RMSE {:.4}%, {t_clean:.1}s (budget {PRESET_BUDGET_S}s)", m.mae_pct, m.rmse_pct),
                );
                runs.push(run);
            }
            Err(e) => r.line(&format!("cccv_noiseless_{name}"), false, format!("error {e}")),
        }
    }
}

/// NARX strictly below ANN on both metrics for every device of `preset`.
fn ordering(r: &mut Report, preset: &str, label: &str, mae_cap: Option<f64>, runs: &mut Vec<DeviceRun>) -> Option<hess_soc_cli::ComparisonTable> {
    let exp = experiment(preset);
    match compare::compare(std::slice::from_ref(&exp)) {
        Ok((table, device_runs)) => {
            let devices: Vec<String> = {
                let mut d: Vec<String> = table.rows.iter().map(|row| row.device.clone()).collect();
                d.dedup();
                d
            };
            for dev in devices {
                let narx = table.row(&exp.name, &dev, ModelKind::Narx).unwrap();
                let ann = table.row(&exp.name, &dev, ModelKind::Ann).unwrap();
                let beats = narx.mae_pct < ann.mae_pct && narx.rmse_pct < ann.rmse_pct;
                let capped = mae_cap.is_none_or(|c| narx.mae_pct < c);
                r.line(
                    &format!("{label}_{preset}_{dev}"),
                    beats && capped,
                    format!(
                        "NARXNN MAE {:.4}% RMSE {:.4}% vs ANN MAE {:.4}% RMSE {:.4}%{}",
                        narx.mae_pct,
                        narx.rmse_pct,
                        ann.mae_pct,
                        ann.rmse_pct,
                        mae_cap.map(|c| format!(", NARXNN MAE cap {c}%")).unwrap_or_default()
                    ),
                );
            }
            runs.extend(device_runs);
            Some(table)
        }
        Err(e) => {
            r.line(&format!("{label}_{preset}"), false, format!("error {e}"));
            None
        }
    }
}

fn lm_monotone(r: &mut Report, runs: &[DeviceRun]) {
    let mut networks = 0;
    let mut bad = Vec::new();
    for run in runs {
        for net in &run.fit.networks {
            networks += 1;
            let rep = &net.report;
            let mut prev = rep.initial_train_mse;
            let mut mono = true;
            for m in &rep.train_mse {
                mono &= *m <= prev;
                prev = *m;
            }
            if !mono || rep.stop_reason == StopReason::MuOverflow {
                bad.push(format!("{}/{} ({:?})", run.device, net.network, rep.stop_reason));
            }
        }
    }
    r.line(
        "lm_monotone_without_mu_overflow",
        bad.is_empty() && networks > 0,
        if bad.is_empty() {
            format!("{networks} networks from {} preset training runs", runs.len())
        } else {
            format!("violations: {}", bad.join(", "))
        },
    );
}

fn determinism(r: &mut Report) {
    let exp = experiment("sc_1f_hot");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut outputs = Vec::new();
    for d in &dirs {
        if let Err(e) = compare::run(std::slice::from_ref(&exp), d.path()) {
            r.line("compare_determinism", false, format!("error {e}"));
            return;
        }
        outputs.push((
            std::fs::read(d.path().join("comparison.json")).unwrap(),
            std::fs::read(d.path().join("comparison.txt")).unwrap(),
        ));
    }
    r.line(
        "compare_determinism",
        outputs[0] == outputs[1],
        format!("two compare runs on sc_1f_hot, comparison.json {} bytes, identical: {}", outputs[0].0.len(), outputs[0] == outputs[1]),
    );
}

fn metrics(r: &mut Report) {
    let truth = [0.2, 0.4, 0.6, 0.8];
    let offset: Vec<f64> = truth.iter().map(|v| v + 0.001).collect();
    let mixed = [0.21, 0.4, 0.59, 0.8];
    let a = evaluate(&truth, &offset).unwrap();
    let b = evaluate(&truth, &mixed).unwrap();
    let close = |x: f64, y: f64| (x - y).abs() <= METRICS_TOL;
    let pass = close(a.mae_pct, 0.1) && close(a.rmse_pct, 0.1) && close(b.mae_pct, 0.5) && close(b.rmse_pct, 0.5f64.sqrt());
    r.line(
        "metrics_arithmetic",
        pass,
        format!(
            "offset 0.001 -> {:.12}%/{:.12}%, mixed +-0.01 -> {:.12}%/{:.12}% (tol {METRICS_TOL:e})",
            a.mae_pct, a.rmse_pct, b.mae_pct, b.rmse_pct
        ),
    );
}

fn main() {
    let clock = Instant::now();
    let mut r = Report { failed: 0, total: 0 };
    let mut runs = Vec::new();
    coulomb(&mut r);
    gradient(&mut r);
    closed_loop(&mut r);
    metrics(&mut r);
    cccv(&mut r, &mut runs);
    ordering(&mut r, "udds_pack", "udds_ordering", None, &mut runs);
    for hot in ["battery_hot", "sc_1f_hot"] {
        ordering(&mut r, hot, "hot_robustness", Some(HOT_MAE), &mut runs);
    }
    lm_monotone(&mut r, &runs);
    determinism(&mut r);
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        r.total - r.failed,
        r.total,
        clock.elapsed().as_secs_f64()
    );
    if r.failed > 0 {
        std::process::exit(1);
    }
}
