//! NARX against the feed-forward baseline, same data, split and seed.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use hess_soc::sim::{DevicePreset, ProfileKind};
use hess_soc::{
    cleanse, fit_estimator, holdout_metrics, Device, FitReport, Metrics, ModelKind, NarxConfig, NoiseConfig,
    TrainConfig,
};
use serde::{Deserialize, Serialize};

use crate::artifact::{write_atomic, write_json};
use crate::error::{CliError, CliResult};
use crate::spec::Experiment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMeta {
    pub name: String,
    pub preset: String,
    pub profile: ProfileKind,
    pub dt: Option<f64>,
    pub seed: u64,
    pub config_checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub experiment: String,
    /// `NARXNN` or `ANN`.
    pub model: String,
    pub device: String,
    pub kind: Device,
    pub mae_pct: f64,
    pub rmse_pct: f64,
    pub n_points: usize,
    pub bundle_checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub experiments: Vec<ExperimentMeta>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, experiment: &str, device: &str, model: ModelKind) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.experiment == experiment && r.device == device && r.model == model_label(model))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for e in &self.experiments {
            let _ = writeln!(
                s,
                "# {}: preset {} profile {} seed {} config {}",
                e.name,
                e.preset,
                e.profile.as_str(),
                e.seed,
                &e.config_checksum[..12]
            );
        }
        let w_exp = self.rows.iter().map(|r| r.experiment.len()).max().unwrap_or(0).max(10);
        let w_dev = self.rows.iter().map(|r| r.device.len()).max().unwrap_or(0).max(6);
        let _ = writeln!(s, "{:<w_exp$}  {:<w_dev$}  {:<6}  {:>10}  {:>10}", "experiment", "device", "model", "MAE (%)", "RMSE (%)");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<w_exp$}  {:<w_dev$}  {:<6}  {:>10.4}  {:>10.4}",
                r.experiment, r.device, r.model, r.mae_pct, r.rmse_pct
            );
        }
        s
    }
}

pub fn model_label(m: ModelKind) -> &'static str {
    match m {
        ModelKind::Narx => "NARXNN",
        ModelKind::Ann => "ANN",
    }
}

/// One trained estimator and its test-split score.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceRun {
    pub device: String,
    pub kind: Device,
    pub model: ModelKind,
    pub holdout: Metrics,
    pub fit: FitReport,
    pub bundle_checksum: String,
    pub elapsed_s: f64,
}

/// Simulates `dev` under `profile` with `noise`, fits `model` and scores
/// the test split in closed loop.
pub fn run_device(
    dev: &DevicePreset,
    profile: ProfileKind,
    dt: Option<f64>,
    noise: &NoiseConfig,
    narx: &NarxConfig,
    train: &TrainConfig,
    model: ModelKind,
) -> CliResult<DeviceRun> {
    let clock = Instant::now();
    let series = dev.simulate(profile, dt, noise)?.series;
    let opts = hess_soc::FitOptions { model, ..dev.fit.clone() };
    let (bundle, fit) = fit_estimator(&series, dev.kind, narx, train, &opts)?;
    let (clean, _) = cleanse(&series, &opts.cleanse)?;
    let holdout = holdout_metrics(&bundle, &clean, fit.test_start)?.metrics;
    Ok(DeviceRun {
        device: dev.name.clone(),
        kind: dev.kind,
        model,
        holdout,
        fit,
        bundle_checksum: bundle.checksum(),
        elapsed_s: clock.elapsed().as_secs_f64(),
    })
}

struct Job<'a> {
    exp: &'a Experiment,
    dev: &'a DevicePreset,
    profile: ProfileKind,
    model: ModelKind,
}

/// Runs every (experiment, device, model) job, in parallel when the host
/// has more than one core. Results do not depend on scheduling.
pub fn compare(exps: &[Experiment]) -> CliResult<(ComparisonTable, Vec<DeviceRun>)> {
    if exps.is_empty() {
        return Err(CliError::usage("compare needs at least one spec"));
    }
    let mut jobs = Vec::new();
    let mut metas = Vec::new();
    for exp in exps {
        let preset = exp.require_preset()?;
        let profile = exp.profile_or_default()?;
        metas.push(ExperimentMeta {
            name: exp.name.clone(),
            preset: preset.name.clone(),
            profile,
            dt: exp.dt,
            seed: exp.seed,
            config_checksum: exp.config_checksum.clone(),
        });
        for dev in preset.devices.iter().filter(|d| d.has_profile(profile)) {
            for model in [ModelKind::Narx, ModelKind::Ann] {
                jobs.push(Job { exp, dev, profile, model });
            }
        }
    }

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CliResult<DeviceRun>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(k) else { break };
                let r = run_device(job.dev, job.profile, job.exp.dt, &job.dev.noise, &job.exp.narx, &job.exp.train, job.model);
                results.lock().expect("no worker panicked")[k] = Some(r);
            });
        }
    });

    let mut rows = Vec::with_capacity(jobs.len());
    let mut runs = Vec::with_capacity(jobs.len());
    for (job, r) in jobs.iter().zip(results.into_inner().expect("no worker panicked")) {
        let run = r.expect("every job ran")?;
        rows.push(ComparisonRow {
            experiment: job.exp.name.clone(),
            model: model_label(job.model).into(),
            device: run.device.clone(),
            kind: run.kind,
            mae_pct: run.holdout.mae_pct,
            rmse_pct: run.holdout.rmse_pct,
            n_points: run.holdout.n_points,
            bundle_checksum: run.bundle_checksum.clone(),
        });
        runs.push(run);
    }
    Ok((ComparisonTable { experiments: metas, rows }, runs))
}

/// Writes `comparison.json` and `comparison.txt`; timings go to
/// `compare.log` so the first two stay byte-identical across runs.
pub fn run(exps: &[Experiment], out: &Path) -> CliResult<ComparisonTable> {
    let clock = Instant::now();
    let (table, runs) = compare(exps)?;
    write_json(&out.join("comparison.json"), &table)?;
    write_atomic(&out.join("comparison.txt"), table.render().as_bytes())?;
    let mut log = String::new();
    for r in &runs {
        let _ = writeln!(log, "{} {} {:.3}s", r.device, model_label(r.model), r.elapsed_s);
    }
    let _ = writeln!(log, "total {:.3}s", clock.elapsed().as_secs_f64());
    write_atomic(&out.join("compare.log"), log.as_bytes())?;
    Ok(table)
}
