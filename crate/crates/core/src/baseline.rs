//! Static feedforward baseline: the same single-hidden-layer network fed
//! only with lagged current and voltage, no output feedback.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::Mlp;
use crate::narx::{push_input_lags, NarxConfig, NormalizedSeries, RegressorRow};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnConfig {
    pub input_delays: Vec<usize>,
    pub hidden_neurons: usize,
    pub input_channels: usize,
}

impl AnnConfig {
    /// Same input lags and hidden width as `narx`, minus the feedback.
    pub fn matching(narx: &NarxConfig) -> Self {
        AnnConfig {
            input_delays: narx.input_delays.clone(),
            hidden_neurons: narx.hidden_neurons,
            input_channels: narx.input_channels,
        }
    }

    pub fn validate(&self) -> Result<()> {
        // Reuse the NARX lag checks with a dummy output lag.
        NarxConfig {
            input_delays: self.input_delays.clone(),
            output_delays: vec![1],
            hidden_neurons: self.hidden_neurons,
            input_channels: self.input_channels,
        }
        .validate()
    }

    pub fn regressor_len(&self) -> usize {
        self.input_channels * self.input_delays.len()
    }

    pub fn max_lag(&self) -> usize {
        self.input_delays.last().copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnNetwork {
    pub config: AnnConfig,
    #[serde(flatten)]
    pub mlp: Mlp,
}

impl AnnNetwork {
    pub fn zeros(config: AnnConfig) -> Result<Self> {
        config.validate()?;
        let mlp = Mlp::zeros(config.hidden_neurons, config.regressor_len());
        Ok(AnnNetwork { config, mlp })
    }

    pub fn random<R: Rng + ?Sized>(config: AnnConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mlp = Mlp::random(config.hidden_neurons, config.regressor_len(), rng);
        Ok(AnnNetwork { config, mlp })
    }

    /// Row-wise estimate aligned with the timeline; the first `max_lag`
    /// entries are `fill`.
    pub fn predict(&self, series: &NormalizedSeries, fill: f64, warm: usize) -> Result<Vec<f64>> {
        let warm = warm.max(self.config.max_lag());
        if series.len() <= warm {
            return Err(Error::SeriesTooShort { len: series.len(), required: warm });
        }
        let mut out = vec![fill; warm];
        let mut values = Vec::with_capacity(self.config.regressor_len());
        for n in warm..series.len() {
            values.clear();
            push_input_lags(&mut values, &series.exogenous, &self.config.input_delays, n);
            out.push(self.mlp.forward(&values));
        }
        Ok(out)
    }
}

/// Rows of lagged inputs only, for targets `soc[n]`, `n` in `start..len`.
/// `start` must be at least the configured max lag.
pub fn build_ann_rows(series: &NormalizedSeries, config: &AnnConfig, start: usize) -> Result<Vec<RegressorRow>> {
    config.validate()?;
    let soc = series.soc.as_ref().ok_or(Error::MissingGroundTruth)?;
    let start = start.max(config.max_lag());
    if series.exogenous.len() != config.input_channels {
        return Err(Error::DimensionMismatch {
            expected: config.input_channels,
            got: series.exogenous.len(),
        });
    }
    if series.len() <= start {
        return Err(Error::SeriesTooShort { len: series.len(), required: start });
    }
    Ok((start..series.len())
        .map(|n| {
            let mut values = Vec::with_capacity(config.regressor_len());
            push_input_lags(&mut values, &series.exogenous, &config.input_delays, n);
            RegressorRow { values, target: Some(soc[n]) }
        })
        .collect())
}
