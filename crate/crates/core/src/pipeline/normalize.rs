use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::narx::NormalizedSeries;
use crate::series::SampleSeries;

/// Min/max of one channel; maps `[min, max]` affinely onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRange {
    pub min: f64,
    pub max: f64,
}

impl ChannelRange {
    pub fn of(values: &[f64], name: &'static str) -> Result<Self> {
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        let r = ChannelRange { min, max };
        r.check(name)?;
        Ok(r)
    }

    fn check(&self, name: &'static str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.max > self.min) {
            return Err(Error::DegenerateChannel(name));
        }
        Ok(())
    }

    pub fn forward(&self, x: f64) -> f64 {
        2.0 * (x - self.min) / (self.max - self.min) - 1.0
    }

    pub fn inverse(&self, y: f64) -> f64 {
        (y + 1.0) * (self.max - self.min) / 2.0 + self.min
    }
}

/// Per-channel statistics recorded from training data only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub current: ChannelRange,
    pub voltage: ChannelRange,
    pub soc: ChannelRange,
}

impl NormStats {
    /// Statistics of samples `range` of a series carrying ground truth.
    pub fn from_series(series: &SampleSeries, range: std::ops::Range<usize>) -> Result<Self> {
        let soc = series.soc()?;
        Ok(NormStats {
            current: ChannelRange::of(&series.current[range.clone()], "current")?,
            voltage: ChannelRange::of(&series.voltage[range.clone()], "voltage")?,
            soc: ChannelRange::of(&soc[range], "soc")?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.current.check("current")?;
        self.voltage.check("voltage")?;
        self.soc.check("soc")
    }
}

/// Applies `stats` without clamping: values outside the training range
/// land outside `[-1, 1]`.
pub fn normalize(series: &SampleSeries, stats: &NormStats) -> Result<NormalizedSeries> {
    stats.validate()?;
    let map = |v: &[f64], r: &ChannelRange| v.iter().map(|x| r.forward(*x)).collect::<Vec<_>>();
    Ok(NormalizedSeries {
        exogenous: vec![map(&series.current, &stats.current), map(&series.voltage, &stats.voltage)],
        soc: series.soc.as_ref().map(|s| map(s, &stats.soc)),
    })
}

pub fn normalize_soc(value: f64, stats: &NormStats) -> f64 {
    stats.soc.forward(value)
}

pub fn denormalize_soc(value: f64, stats: &NormStats) -> f64 {
    stats.soc.inverse(value)
}
