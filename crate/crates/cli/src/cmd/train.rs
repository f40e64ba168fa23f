use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use hess_soc::pipeline::{NetworkReport, Removal};
use hess_soc::{cleanse, fit_estimator, holdout_metrics, Device, EstimatorBundle, FitOptions, Metrics, ModelKind, SampleSeries};
use serde::{Deserialize, Serialize};

use super::Provenance;
use crate::artifact::{read_to_string, sha256_hex, write_json};
use crate::error::{CliError, CliResult};
use crate::spec::{Experiment, ExperimentSpec};

/// `bundle.json`: the estimator plus the provenance stamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleFile {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub bundle_checksum: String,
    pub bundle: EstimatorBundle,
}

impl BundleFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read_to_string(path)?;
        let f: BundleFile = serde_json::from_str(&text)
            .map_err(|e| CliError::data(format!("{} is not a bundle file: {e}", path.display())))?;
        f.bundle.validate()?;
        if f.bundle.checksum() != f.bundle_checksum {
            return Err(CliError::data(format!("{}: bundle checksum mismatch", path.display())));
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub data_sha256: String,
    pub device: Device,
    pub model: ModelKind,
    pub bundle_checksum: String,
    pub val_start: usize,
    pub test_start: usize,
    /// Closed-loop error on the test portion.
    pub holdout: Metrics,
    pub removals: Vec<Removal>,
    pub networks: Vec<NetworkReport>,
}

pub fn read_series(path: &Path) -> CliResult<(SampleSeries, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let series = SampleSeries::read_csv(BufReader::new(File::open(path)?), None)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok((series, bytes))
}

/// Fit options for a dataset: the matching device of the experiment's
/// preset (by recorded device name, else by kind), else the defaults.
pub fn fit_options(exp: &Experiment, series: &SampleSeries) -> FitOptions {
    let mut opts = exp
        .preset
        .as_ref()
        .and_then(|p| {
            let named = series.meta.get("device_name");
            p.devices
                .iter()
                .find(|d| d.kind == series.device && named == Some(&d.name))
                .or_else(|| p.devices.iter().find(|d| d.kind == series.device))
        })
        .map(|d| d.fit.clone())
        .unwrap_or_default();
    opts.model = exp.model;
    opts
}

/// Resolves `spec` and trains on `data` (relative to the output
/// directory). A dataset written by `simulate` names its preset, which
/// then supplies the configuration when the spec names none.
pub fn run_spec(spec: &ExperimentSpec, data: &Path) -> CliResult<(Experiment, BundleFile, TrainSummary)> {
    let mut exp = spec.resolve()?;
    let data = crate::artifact::resolve(&exp.out, data);
    if spec.preset.is_none() {
        let (series, _) = read_series(&data)?;
        if let Some(name) = series.meta.get("preset") {
            exp = ExperimentSpec { preset: Some(name.clone()), ..spec.clone() }.resolve()?;
        }
    }
    let (file, summary) = run(&exp, &data)?;
    Ok((exp, file, summary))
}

pub fn run(exp: &Experiment, data: &Path) -> CliResult<(BundleFile, TrainSummary)> {
    let (series, bytes) = read_series(data)?;
    if !series.has_soc() {
        return Err(CliError::data(format!("{} has no soc column; training needs ground truth", data.display())));
    }
    let opts = fit_options(exp, &series);
    let (bundle, report) = fit_estimator(&series, series.device, &exp.narx, &exp.train, &opts)?;
    let (clean, _) = cleanse(&series, &opts.cleanse)?;
    let holdout = holdout_metrics(&bundle, &clean, report.test_start)?.metrics;
    let bundle_checksum = bundle.checksum();
    let summary = TrainSummary {
        provenance: exp.into(),
        data_sha256: sha256_hex(&bytes),
        device: bundle.device,
        model: bundle.model,
        bundle_checksum: bundle_checksum.clone(),
        val_start: report.val_start,
        test_start: report.test_start,
        holdout,
        removals: report.removals,
        networks: report.networks,
    };
    let file = BundleFile { provenance: exp.into(), bundle_checksum, bundle };
    write_json(&exp.out.join("bundle.json"), &file)?;
    write_json(&exp.out.join("train_report.json"), &summary)?;
    Ok((file, summary))
}
