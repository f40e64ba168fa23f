use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use hess_soc::{estimate_soc, evaluate, Regime, SocEstimate};
use serde::{Deserialize, Serialize};

use super::train::{read_series, BundleFile};
use super::Provenance;
use crate::artifact::{sha256_hex, write_atomic, write_json};
use crate::error::{CliError, CliResult};
use crate::spec::Experiment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentMetrics {
    pub regime: Regime,
    pub start: usize,
    pub end: usize,
    pub mae_pct: f64,
    pub rmse_pct: f64,
}

/// `metrics.json`. `elapsed_s` is wall-clock time of the estimation pass
/// and the one field that differs between otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateMetrics {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub bundle_checksum: String,
    pub data_sha256: String,
    pub soc0: f64,
    pub mae_pct: f64,
    pub rmse_pct: f64,
    pub n_points: usize,
    pub clamp_count: usize,
    pub elapsed_s: f64,
    pub segments: Vec<SegmentMetrics>,
}

#[derive(Debug)]
pub struct EstimateOutcome {
    pub estimate: SocEstimate,
    /// `None` when the dataset carries no ground truth.
    pub metrics: Option<EstimateMetrics>,
}

pub fn run(exp: &Experiment, bundle_path: &Path, data: &Path) -> CliResult<EstimateOutcome> {
    let file = BundleFile::load(bundle_path)?;
    let (series, bytes) = read_series(data)?;
    let truth = series.soc.clone();
    let soc0 = match (exp.soc0, &truth) {
        (Some(s), _) => s,
        (None, Some(t)) => t[0].clamp(0.0, 1.0),
        (None, None) => {
            return Err(CliError::usage(format!("{} has no soc column, so --soc0 is required", data.display())))
        }
    };
    let clock = Instant::now();
    let est = estimate_soc(&file.bundle, &series, soc0)?;
    let elapsed_s = clock.elapsed().as_secs_f64();

    let mut csv = String::new();
    let _ = writeln!(csv, "# seed: {}", file.provenance.seed);
    let _ = writeln!(csv, "# config_checksum: {}", file.provenance.config_checksum);
    let _ = writeln!(csv, "# bundle_checksum: {}", file.bundle_checksum);
    match &truth {
        Some(t) => {
            csv.push_str("t,soc_true,soc_est,abs_err\n");
            for k in 0..series.len() {
                let _ = writeln!(csv, "{},{},{},{}", series.t[k], t[k], est.soc[k], (t[k] - est.soc[k]).abs());
            }
        }
        None => {
            csv.push_str("t,soc_est\n");
            for k in 0..series.len() {
                let _ = writeln!(csv, "{},{}", series.t[k], est.soc[k]);
            }
        }
    }
    write_atomic(&exp.out.join("estimate.csv"), csv.as_bytes())?;

    let metrics = match &truth {
        None => None,
        Some(t) => {
            let all = evaluate(t, &est.soc)?;
            let mut segments = Vec::with_capacity(est.segments.len());
            for seg in &est.segments {
                let m = evaluate(&t[seg.range.clone()], &est.soc[seg.range.clone()])?;
                segments.push(SegmentMetrics {
                    regime: seg.regime,
                    start: seg.range.start,
                    end: seg.range.end,
                    mae_pct: m.mae_pct,
                    rmse_pct: m.rmse_pct,
                });
            }
            let m = EstimateMetrics {
                provenance: file.provenance.clone(),
                bundle_checksum: file.bundle_checksum.clone(),
                data_sha256: sha256_hex(&bytes),
                soc0,
                mae_pct: all.mae_pct,
                rmse_pct: all.rmse_pct,
                n_points: all.n_points,
                clamp_count: est.clamp_count,
                elapsed_s,
                segments,
            };
            write_json(&exp.out.join("metrics.json"), &m)?;
            Some(m)
        }
    };
    Ok(EstimateOutcome { estimate: est, metrics })
}
