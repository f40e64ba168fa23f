//! Fitting and running the SOC estimator over whole series.
//!
//! Split protocol: the open-loop rows of the whole series (row `r` targets
//! sample `r + L`, `L` the max lag) are split in time order into
//! train/validation/test. Normalization statistics come from the samples
//! preceding the first validation target, and battery rows are routed by
//! the regime of their target sample.

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cleanse::{cleanse, CleanseRules, Removal};
use super::metrics::{evaluate, Metrics};
use super::normalize::{denormalize_soc, normalize, normalize_soc, NormStats};
use super::segment::{segment_by_regime, Regime, Segment, SegmentConfig};
use crate::baseline::{build_ann_rows, AnnConfig, AnnNetwork};
use crate::error::{Error, Result};
use crate::narx::{build_open_loop_rows, predict_closed_loop, ClosedLoopState, NarxConfig, NarxNetwork, NormalizedSeries, RegressorRow};
use crate::series::{Device, SampleSeries};
use crate::trainer::{split_counts, train_ann_on, train_narx_on, RowSets, TrainConfig, TrainReport};

pub const BUNDLE_FORMAT: &str = "bundle-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Narx,
    Ann,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Narx => "narx",
            ModelKind::Ann => "ann",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "narx" => Ok(ModelKind::Narx),
            "ann" => Ok(ModelKind::Ann),
            other => Err(Error::InvalidConfig(format!("unknown model '{other}'"))),
        }
    }
}

/// How segments after the first are seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Soc0Policy {
    /// Each segment starts from the last estimate of the previous one.
    #[default]
    LastKnown,
    /// Every segment starts from the caller's soc0.
    Provided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SocModel {
    Narx(NarxNetwork),
    Ann(AnnNetwork),
}

impl SocModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            SocModel::Narx(_) => ModelKind::Narx,
            SocModel::Ann(_) => ModelKind::Ann,
        }
    }

    /// Estimate in network units; `soc0` is a fraction, `feedback` the same
    /// value in network units.
    fn run(&self, series: &NormalizedSeries, soc0: f64, feedback: f64, n0: Option<usize>) -> Result<Vec<f64>> {
        match self {
            SocModel::Narx(net) => {
                let n0 = n0.unwrap_or(net.config.default_switch_step());
                predict_closed_loop(net, series, ClosedLoopState::new(soc0, n0).with_feedback(feedback))
            }
            SocModel::Ann(net) => net.predict(series, feedback, 0),
        }
    }

    fn max_lag(&self) -> usize {
        match self {
            SocModel::Narx(net) => net.config.max_lag(),
            SocModel::Ann(net) => net.config.max_lag(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Networks {
    Single(SocModel),
    PerRegime { charge: SocModel, discharge: SocModel },
}

impl Networks {
    pub fn count(&self) -> usize {
        match self {
            Networks::Single(_) => 1,
            Networks::PerRegime { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorBundle {
    pub version: String,
    pub device: Device,
    pub model: ModelKind,
    pub config: NarxConfig,
    pub norm: NormStats,
    pub soc0_policy: Soc0Policy,
    pub segment: SegmentConfig,
    pub networks: Networks,
    pub seed: u64,
}

impl EstimatorBundle {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let b: EstimatorBundle = serde_json::from_str(s)?;
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != BUNDLE_FORMAT {
            return Err(Error::Parse(format!("unsupported bundle version '{}'", self.version)));
        }
        self.norm.validate()?;
        self.config.validate()?;
        let models: Vec<&SocModel> = match &self.networks {
            Networks::Single(m) => vec![m],
            Networks::PerRegime { charge, discharge } => vec![charge, discharge],
        };
        for m in models {
            let ok = match m {
                SocModel::Narx(n) => n.config == self.config,
                SocModel::Ann(a) => *a == AnnNetwork { config: AnnConfig::matching(&self.config), mlp: a.mlp.clone() },
            };
            if !ok || m.kind() != self.model {
                return Err(Error::InvalidConfig("network does not match bundle config".into()));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn checksum(&self) -> String {
        let json = serde_json::to_vec(self).expect("bundle serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub model: ModelKind,
    pub cleanse: CleanseRules,
    pub deadband_fraction: f64,
    pub soc0_policy: Soc0Policy,
    /// Every k-th training row is also added with all output-lag slots set
    /// to the most recent measured SOC, the regressor the closed loop sees
    /// during its bootstrap. 0 disables.
    pub bootstrap_every: usize,
    /// Standard deviation (SOC fraction) of the error added to the SOC₀ of
    /// bootstrap rows, drawn from `train.seed`.
    pub bootstrap_jitter: f64,
    /// Fraction of the SOC₀ error kept in a bootstrap row's target: 0 asks
    /// the network to correct it, 1 to carry it forward.
    pub bootstrap_carry: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            model: ModelKind::Narx,
            cleanse: CleanseRules::default(),
            deadband_fraction: SegmentConfig::default().deadband_fraction,
            soc0_policy: Soc0Policy::default(),
            bootstrap_every: 2,
            bootstrap_jitter: 0.0,
            bootstrap_carry: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkReport {
    /// `"single"`, `"charge"` or `"discharge"`.
    pub network: String,
    pub train_rows: usize,
    pub val_rows: usize,
    pub test_rows: usize,
    pub report: TrainReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub networks: Vec<NetworkReport>,
    pub removals: Vec<Removal>,
    /// First sample whose target belongs to the validation split.
    pub val_start: usize,
    /// First sample whose target belongs to the test split.
    pub test_start: usize,
}

struct Partition {
    train: Vec<RegressorRow>,
    val: Vec<RegressorRow>,
    test: Vec<RegressorRow>,
}

impl Partition {
    fn sets(&self) -> RowSets<'_> {
        RowSets { train: &self.train, val: &self.val, test: &self.test }
    }
}

fn partition(rows: &[RegressorRow], lag: usize, val_start: usize, test_start: usize, keep: impl Fn(usize) -> bool) -> Partition {
    let mut p = Partition { train: Vec::new(), val: Vec::new(), test: Vec::new() };
    for (r, row) in rows.iter().enumerate() {
        let target = r + lag;
        if !keep(target) {
            continue;
        }
        let bucket = if target < val_start {
            &mut p.train
        } else if target < test_start {
            &mut p.val
        } else {
            &mut p.test
        };
        bucket.push(row.clone());
    }
    p
}

#[derive(Debug, Clone, Copy)]
struct Bootstrap {
    every: usize,
    jitter: f64,
    carry: f64,
}

/// Appends bootstrap copies of every `every`-th training row: all output
/// lags replaced by a SOC₀ equal to the latest measured SOC plus Gaussian
/// error of `jitter` (network units).
fn add_bootstrap_rows(part: &mut Partition, cfg: &NarxConfig, boot: Bootstrap, seed: u64) {
    let Bootstrap { every, jitter, carry } = boot;
    if every == 0 {
        return;
    }
    let ny = cfg.output_delays.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb007);
    let noise = Normal::new(0.0, jitter.max(0.0)).expect("finite jitter");
    let extra: Vec<RegressorRow> = part
        .train
        .iter()
        .step_by(every)
        .map(|r| {
            let mut row = r.clone();
            let err = if jitter > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            let soc0 = row.values[0] + err;
            row.values[..ny].iter_mut().for_each(|v| *v = soc0);
            row.target = row.target.map(|t| t + carry * err);
            row
        })
        .collect();
    part.train.extend(extra);
}

fn regime_labels(segments: &[Segment], len: usize) -> Vec<Regime> {
    let mut out = Vec::with_capacity(len);
    for s in segments {
        out.extend(std::iter::repeat_n(s.regime, s.range.len()));
    }
    out
}

fn train_one(
    model: ModelKind,
    cfg: &NarxConfig,
    part: Partition,
    train: &TrainConfig,
    seed: u64,
    bootstrap: Bootstrap,
) -> Result<(SocModel, TrainReport)> {
    let mut part = part;
    if model == ModelKind::Narx {
        add_bootstrap_rows(&mut part, cfg, bootstrap, seed);
    }
    let part = &part;
    if part.train.is_empty() {
        return Err(Error::TooFewRows(0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match model {
        ModelKind::Narx => {
            let net = NarxNetwork::random(cfg.clone(), &mut rng)?;
            let (net, rep) = train_narx_on(net, part.sets(), train)?;
            Ok((SocModel::Narx(net), rep))
        }
        ModelKind::Ann => {
            let net = AnnNetwork::random(AnnConfig::matching(cfg), &mut rng)?;
            let (net, rep) = train_ann_on(net, part.sets(), train)?;
            Ok((SocModel::Ann(net), rep))
        }
    }
}

fn counts(part: &Partition) -> [usize; 3] {
    [part.train.len(), part.val.len(), part.test.len()]
}

fn network_report(name: &str, [train_rows, val_rows, test_rows]: [usize; 3], report: TrainReport) -> NetworkReport {
    NetworkReport { network: name.to_string(), train_rows, val_rows, test_rows, report }
}

/// Cleanses, normalizes, builds rows, and trains one network (supercapacitor)
/// or one per regime (battery). Networks are initialized from
/// `train.seed` (the discharge network from `train.seed + 1`).
pub fn fit_estimator(
    series: &SampleSeries,
    device: Device,
    narx: &NarxConfig,
    train: &TrainConfig,
    opts: &FitOptions,
) -> Result<(EstimatorBundle, FitReport)> {
    narx.validate()?;
    train.validate()?;
    if !series.has_soc() {
        return Err(Error::MissingGroundTruth);
    }
    if narx.input_channels != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: narx.input_channels });
    }
    let (clean, removals) = cleanse(series, &opts.cleanse)?;
    let lag = narx.max_lag();
    if clean.len() <= lag + 1 {
        return Err(Error::SeriesTooShort { len: clean.len(), required: lag + 2 });
    }
    let split = split_counts(clean.len() - lag, train.split_ratios);
    let val_start = split.val.start + lag;
    let test_start = split.test.start + lag;
    let norm = NormStats::from_series(&clean, 0..val_start)?;
    let ns = normalize(&clean, &norm)?;
    let rows = match opts.model {
        ModelKind::Narx => build_open_loop_rows(&ns, narx)?,
        ModelKind::Ann => build_ann_rows(&ns, &AnnConfig::matching(narx), lag)?,
    };
    let boot = Bootstrap {
        every: opts.bootstrap_every,
        jitter: opts.bootstrap_jitter * 2.0 / (norm.soc.max - norm.soc.min),
        carry: opts.bootstrap_carry,
    };
    let segment = SegmentConfig { deadband_fraction: opts.deadband_fraction, min_len: lag + 1 };

    let mut reports = Vec::new();
    let networks = match device {
        Device::Supercapacitor => {
            let part = partition(&rows, lag, val_start, test_start, |_| true);
            let rows_info = counts(&part);
            let (m, rep) = train_one(opts.model, narx, part, train, train.seed, boot)?;
            reports.push(network_report("single", rows_info, rep));
            Networks::Single(m)
        }
        Device::Battery => {
            let labels = regime_labels(&segment_by_regime(&clean, &segment)?, clean.len());
            let mut nets = Vec::with_capacity(2);
            for (name, regime, seed) in [
                ("charge", Regime::Charge, train.seed),
                ("discharge", Regime::Discharge, train.seed.wrapping_add(1)),
            ] {
                let part = partition(&rows, lag, val_start, test_start, |k| labels[k] == regime);
                let rows_info = counts(&part);
                let (m, rep) = train_one(opts.model, narx, part, train, seed, boot)?;
                reports.push(network_report(name, rows_info, rep));
                nets.push(m);
            }
            let discharge = nets.pop().expect("two networks");
            let charge = nets.pop().expect("two networks");
            Networks::PerRegime { charge, discharge }
        }
    };
    let bundle = EstimatorBundle {
        version: BUNDLE_FORMAT.to_string(),
        device,
        model: opts.model,
        config: narx.clone(),
        norm,
        soc0_policy: opts.soc0_policy,
        segment,
        networks,
        seed: train.seed,
    };
    Ok((bundle, FitReport { networks: reports, removals, val_start, test_start }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocEstimate {
    /// Fractional SOC aligned with the input timeline, clamped to `[0, 1]`.
    pub soc: Vec<f64>,
    pub clamp_count: usize,
    pub segments: Vec<Segment>,
}

/// Closed-loop estimate over `series` (its soc channel, if any, is ignored).
pub fn estimate_soc(bundle: &EstimatorBundle, series: &SampleSeries, soc0: f64) -> Result<SocEstimate> {
    if series.device != bundle.device {
        return Err(Error::ChannelMismatch(format!(
            "series is {} but bundle was trained for {}",
            series.device.as_str(),
            bundle.device.as_str()
        )));
    }
    if !soc0.is_finite() || !(0.0..=1.0).contains(&soc0) {
        return Err(Error::InvalidSoc0(soc0));
    }
    let mut ns = normalize(series, &bundle.norm)?;
    ns.soc = None;
    let lag = bundle.config.max_lag();
    if ns.len() <= lag {
        return Err(Error::SeriesTooShort { len: ns.len(), required: lag + 1 });
    }

    let segments = match &bundle.networks {
        Networks::Single(_) => vec![Segment { regime: Regime::Discharge, range: 0..series.len() }],
        Networks::PerRegime { .. } => segment_by_regime(series, &bundle.segment)?,
    };
    let mut soc = Vec::with_capacity(series.len());
    let mut clamp_count = 0;
    let mut seed = soc0;
    for seg in &segments {
        let model = match &bundle.networks {
            Networks::Single(m) => m,
            Networks::PerRegime { charge, discharge } => match seg.regime {
                Regime::Charge => charge,
                Regime::Discharge => discharge,
            },
        };
        let start = if bundle.soc0_policy == Soc0Policy::Provided { soc0 } else { seed };
        // Later segments enter `lag` samples early so that their warm-up
        // prefix overlaps the previous segment and is discarded.
        let ctx = if seg.range.start >= lag { lag } else { 0 };
        let from = seg.range.start - ctx;
        let part = NormalizedSeries {
            exogenous: ns.exogenous.iter().map(|c| c[from..seg.range.end].to_vec()).collect(),
            soc: None,
        };
        let raw = if part.len() > model.max_lag() {
            model.run(&part, start, normalize_soc(start, &bundle.norm), None)?
        } else {
            vec![normalize_soc(start, &bundle.norm); part.len()]
        };
        for y in raw.into_iter().skip(ctx) {
            let v = denormalize_soc(y, &bundle.norm);
            let c = v.clamp(0.0, 1.0);
            if c != v || !v.is_finite() {
                clamp_count += 1;
            }
            soc.push(if v.is_nan() { start } else { c });
        }
        seed = *soc.last().unwrap_or(&start);
    }
    Ok(SocEstimate { soc, clamp_count, segments })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Holdout {
    pub metrics: Metrics,
    /// Sample index of the first compared point.
    pub start: usize,
    pub estimate: SocEstimate,
}

/// Closed-loop error over the test portion `test_start..len`, entered
/// `L` samples early and seeded with the true SOC just before `test_start`.
pub fn holdout_metrics(bundle: &EstimatorBundle, series: &SampleSeries, test_start: usize) -> Result<Holdout> {
    let truth = series.soc()?;
    let lag = bundle.config.max_lag();
    if test_start < lag + 1 || test_start >= series.len() {
        return Err(Error::InvalidConfig(format!("test start {test_start} outside series")));
    }
    let from = test_start - lag;
    let soc0 = truth[test_start - 1].clamp(0.0, 1.0);
    let estimate = estimate_soc(bundle, &series.slice(from..series.len()), soc0)?;
    let metrics = evaluate(&truth[test_start..], &estimate.soc[lag..])?;
    Ok(Holdout { metrics, start: test_start, estimate })
}
