//! NARX network: regressor construction, forward evaluation and the
//! open-loop (measured feedback) and closed-loop (own feedback) modes.
//!
//! Regressor layout for step `n`: the output lags `y(n-k)` for `k` in
//! `output_delays` (ascending), then for each exogenous channel in order
//! the lags `x_c(n-k)` for `k` in `input_delays` (ascending). With the
//! default `{1,2}` / `{1,2}` and channels (current, voltage):
//! `[y(n-1), y(n-2), I(n-1), I(n-2), V(n-1), V(n-2)]`.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::Mlp;

pub const NARX_FORMAT: &str = "narx-v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarxConfig {
    pub input_delays: Vec<usize>,
    pub output_delays: Vec<usize>,
    pub hidden_neurons: usize,
    pub input_channels: usize,
}

impl Default for NarxConfig {
    fn default() -> Self {
        NarxConfig {
            input_delays: vec![1, 2],
            output_delays: vec![1, 2],
            hidden_neurons: 16,
            input_channels: 2,
        }
    }
}

fn check_delays(name: &str, d: &[usize]) -> Result<()> {
    if d.is_empty() {
        return Err(Error::InvalidConfig(format!("{name} is empty")));
    }
    if d.contains(&0) {
        return Err(Error::InvalidConfig(format!("{name} contains lag 0")));
    }
    if d.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(format!("{name} must be strictly ascending")));
    }
    Ok(())
}

impl NarxConfig {
    pub fn validate(&self) -> Result<()> {
        check_delays("input_delays", &self.input_delays)?;
        check_delays("output_delays", &self.output_delays)?;
        if self.hidden_neurons == 0 {
            return Err(Error::InvalidConfig("hidden_neurons must be >= 1".into()));
        }
        if self.input_channels == 0 {
            return Err(Error::InvalidConfig("input_channels must be >= 1".into()));
        }
        Ok(())
    }

    pub fn regressor_len(&self) -> usize {
        self.input_channels * self.input_delays.len() + self.output_delays.len()
    }

    pub fn max_input_lag(&self) -> usize {
        self.input_delays.last().copied().unwrap_or(0)
    }

    pub fn max_output_lag(&self) -> usize {
        self.output_delays.last().copied().unwrap_or(0)
    }

    /// Largest lag over inputs and outputs; the warm-up prefix length.
    pub fn max_lag(&self) -> usize {
        self.max_input_lag().max(self.max_output_lag())
    }

    /// Default closed-loop switch step: one full lag window.
    pub fn default_switch_step(&self) -> usize {
        self.max_lag() + 1
    }
}

/// Normalized channels a network consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSeries {
    /// One vector per exogenous channel (current, voltage), equal lengths.
    pub exogenous: Vec<Vec<f64>>,
    pub soc: Option<Vec<f64>>,
}

impl NormalizedSeries {
    pub fn len(&self) -> usize {
        self.exogenous.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, channels: usize, max_lag: usize) -> Result<()> {
        if self.exogenous.len() != channels {
            return Err(Error::DimensionMismatch {
                expected: channels,
                got: self.exogenous.len(),
            });
        }
        let n = self.len();
        if self.exogenous.iter().any(|c| c.len() != n)
            || self.soc.as_ref().is_some_and(|s| s.len() != n)
        {
            return Err(Error::InvalidSeries("normalized channel lengths differ".into()));
        }
        if n <= max_lag {
            return Err(Error::SeriesTooShort { len: n, required: max_lag });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorRow {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
}

/// Appends the exogenous lags for step `n` in regressor order.
pub(crate) fn push_input_lags(out: &mut Vec<f64>, exo: &[Vec<f64>], delays: &[usize], n: usize) {
    for ch in exo {
        for &k in delays {
            out.push(ch[n - k]);
        }
    }
}

/// Open-loop rows: output lags hold the measured SOC. One row per step
/// `n` in `max_lag..len`, targeting `soc[n]`.
pub fn build_open_loop_rows(series: &NormalizedSeries, config: &NarxConfig) -> Result<Vec<RegressorRow>> {
    config.validate()?;
    let soc = series.soc.as_ref().ok_or(Error::MissingGroundTruth)?;
    series.check(config.input_channels, config.max_lag())?;
    let rows = (config.max_lag()..series.len())
        .map(|n| {
            let mut values = Vec::with_capacity(config.regressor_len());
            values.extend(config.output_delays.iter().map(|&k| soc[n - k]));
            push_input_lags(&mut values, &series.exogenous, &config.input_delays, n);
            RegressorRow {
                values,
                target: Some(soc[n]),
            }
        })
        .collect();
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NarxNetwork {
    pub config: NarxConfig,
    pub mlp: Mlp,
}

impl NarxNetwork {
    pub fn zeros(config: NarxConfig) -> Result<Self> {
        config.validate()?;
        let mlp = Mlp::zeros(config.hidden_neurons, config.regressor_len());
        Ok(NarxNetwork { config, mlp })
    }

    pub fn random<R: Rng + ?Sized>(config: NarxConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mlp = Mlp::random(config.hidden_neurons, config.regressor_len(), rng);
        Ok(NarxNetwork { config, mlp })
    }

    pub fn from_parts(config: NarxConfig, mlp: Mlp) -> Result<Self> {
        config.validate()?;
        if !mlp.shape_is_consistent() || mlp.hidden() != config.hidden_neurons {
            return Err(Error::InvalidConfig("weight shapes do not match hidden_neurons".into()));
        }
        if mlp.inputs() != config.regressor_len() {
            return Err(Error::DimensionMismatch {
                expected: config.regressor_len(),
                got: mlp.inputs(),
            });
        }
        if !mlp.is_finite() {
            return Err(Error::InvalidConfig("non-finite weights".into()));
        }
        Ok(NarxNetwork { config, mlp })
    }

    pub fn n_weights(&self) -> usize {
        self.mlp.n_params()
    }

    /// Indices `0..|output_delays|` of the regressor hold the fed-back output.
    pub fn output_lag_columns(&self) -> std::ops::Range<usize> {
        0..self.config.output_delays.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NarxFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: NarxFile = serde_json::from_str(s)?;
        f.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct NarxFile {
    version: String,
    config: NarxConfig,
    hidden_weights: Vec<Vec<f64>>,
    hidden_bias: Vec<f64>,
    output_weights: Vec<f64>,
    output_bias: f64,
}

impl From<&NarxNetwork> for NarxFile {
    fn from(n: &NarxNetwork) -> Self {
        NarxFile {
            version: NARX_FORMAT.into(),
            config: n.config.clone(),
            hidden_weights: n.mlp.hidden_weights.clone(),
            hidden_bias: n.mlp.hidden_bias.clone(),
            output_weights: n.mlp.output_weights.clone(),
            output_bias: n.mlp.output_bias,
        }
    }
}

impl TryFrom<NarxFile> for NarxNetwork {
    type Error = Error;

    fn try_from(f: NarxFile) -> Result<Self> {
        if f.version != NARX_FORMAT {
            return Err(Error::Parse(format!("unsupported network format `{}`", f.version)));
        }
        let mlp = Mlp {
            hidden_weights: f.hidden_weights,
            hidden_bias: f.hidden_bias,
            output_weights: f.output_weights,
            output_bias: f.output_bias,
        };
        NarxNetwork::from_parts(f.config, mlp)
    }
}

impl Serialize for NarxNetwork {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NarxFile::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for NarxNetwork {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        NarxFile::deserialize(d)?.try_into().map_err(serde::de::Error::custom)
    }
}

pub fn forward(net: &NarxNetwork, row: &RegressorRow) -> Result<f64> {
    let expected = net.config.regressor_len();
    if row.values.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: row.values.len(),
        });
    }
    Ok(net.mlp.forward(&row.values))
}

/// `∂ forward / ∂ weights` in the flat ordering documented in [`crate::mlp`].
pub fn forward_gradient(net: &NarxNetwork, row: &RegressorRow) -> Result<Vec<f64>> {
    let expected = net.config.regressor_len();
    if row.values.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: row.values.len(),
        });
    }
    let mut g = vec![0.0; net.n_weights()];
    net.mlp.forward_with_gradient(&row.values, &mut g);
    Ok(g)
}

/// Open-loop prediction aligned with the input timeline; the first
/// `max_lag` entries are copied from the measured SOC.
pub fn predict_open_loop(net: &NarxNetwork, series: &NormalizedSeries) -> Result<Vec<f64>> {
    let rows = build_open_loop_rows(series, &net.config)?;
    let soc = series.soc.as_ref().ok_or(Error::MissingGroundTruth)?;
    let warm = net.config.max_lag();
    let mut out = soc[..warm].to_vec();
    for r in &rows {
        out.push(forward(net, r)?);
    }
    Ok(out)
}

/// Feedback state for one closed-loop run.
///
/// Steps `n < n0` see `soc0` in every output-lag slot; from `n0` on they see
/// the network's own earlier outputs. The first `max_lag` outputs (before a
/// full regressor exists) are `soc0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopState {
    pub soc0: f64,
    pub n0: usize,
    /// Value written into the output-lag slots during the bootstrap. Equals
    /// `soc0` unless the network works in a different (normalized) scale.
    pub feedback: f64,
    /// Most recent output first.
    pub history_y: VecDeque<f64>,
    /// Most recent input vector first.
    pub history_x: VecDeque<Vec<f64>>,
    step: usize,
}

impl ClosedLoopState {
    pub fn new(soc0: f64, n0: usize) -> Self {
        ClosedLoopState {
            soc0,
            n0,
            feedback: soc0,
            history_y: VecDeque::new(),
            history_x: VecDeque::new(),
            step: 0,
        }
    }

    /// State with the default switch step for `config`.
    pub fn with_default_switch(soc0: f64, config: &NarxConfig) -> Self {
        Self::new(soc0, config.default_switch_step())
    }

    /// Uses `value` (network units) in place of `soc0` in the feedback path.
    pub fn with_feedback(mut self, value: f64) -> Self {
        self.feedback = value;
        self
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    fn push(&mut self, y: f64, x: Vec<f64>, cfg: &NarxConfig) {
        self.history_y.push_front(y);
        self.history_y.truncate(cfg.max_output_lag());
        self.history_x.push_front(x);
        self.history_x.truncate(cfg.max_input_lag());
        self.step += 1;
    }

    /// Produces the output for the next step given that step's measured
    /// inputs (which only enter the regressor from the following step on).
    pub fn advance(&mut self, net: &NarxNetwork, x_now: &[f64]) -> f64 {
        let cfg = &net.config;
        let n = self.step;
        let y = if n < cfg.max_lag() {
            self.feedback
        } else {
            let mut values = Vec::with_capacity(cfg.regressor_len());
            for &k in &cfg.output_delays {
                values.push(if n < self.n0 { self.feedback } else { self.history_y[k - 1] });
            }
            for c in 0..cfg.input_channels {
                for &k in &cfg.input_delays {
                    values.push(self.history_x[k - 1][c]);
                }
            }
            net.mlp.forward(&values)
        };
        self.push(y, x_now.to_vec(), cfg);
        y
    }
}

/// Closed-loop estimation over `series` (normalized SOC units, unclamped).
pub fn predict_closed_loop(
    net: &NarxNetwork,
    series: &NormalizedSeries,
    mut init: ClosedLoopState,
) -> Result<Vec<f64>> {
    let cfg = &net.config;
    series.check(cfg.input_channels, cfg.max_lag())?;
    if !(0.0..=1.0).contains(&init.soc0) {
        return Err(Error::InvalidSoc0(init.soc0));
    }
    let mut x = vec![0.0; cfg.input_channels];
    let mut out = Vec::with_capacity(series.len());
    for n in 0..series.len() {
        for (c, ch) in series.exogenous.iter().enumerate() {
            x[c] = ch[n];
        }
        out.push(init.advance(net, &x));
    }
    Ok(out)
}
