use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::SampleSeries;

/// Physical plausibility bounds for [`cleanse`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanseRules {
    pub v_min: f64,
    pub v_max: f64,
    /// Ceiling on `|current|`.
    pub i_max: f64,
    /// Fraction of flagged samples above which the input is rejected.
    pub max_outlier_fraction: f64,
}

impl Default for CleanseRules {
    fn default() -> Self {
        CleanseRules {
            v_min: 0.0,
            v_max: f64::INFINITY,
            i_max: f64::INFINITY,
            max_outlier_fraction: 0.10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Current,
    Voltage,
    Soc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierReason {
    NonFinite,
    VoltageOutOfBounds,
    CurrentAboveCeiling,
    SocOutOfRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub index: usize,
    pub channel: Channel,
    pub reason: OutlierReason,
}

fn voltage_reason(v: f64, r: &CleanseRules) -> Option<OutlierReason> {
    if !v.is_finite() {
        Some(OutlierReason::NonFinite)
    } else if v <= r.v_min || v > r.v_max || v <= 0.0 {
        Some(OutlierReason::VoltageOutOfBounds)
    } else {
        None
    }
}

fn current_reason(i: f64, r: &CleanseRules) -> Option<OutlierReason> {
    if !i.is_finite() {
        Some(OutlierReason::NonFinite)
    } else if i.abs() > r.i_max {
        Some(OutlierReason::CurrentAboveCeiling)
    } else {
        None
    }
}

fn soc_reason(s: f64) -> Option<OutlierReason> {
    if !s.is_finite() {
        Some(OutlierReason::NonFinite)
    } else if !(0.0..=1.0).contains(&s) {
        Some(OutlierReason::SocOutOfRange)
    } else {
        None
    }
}

/// Replaces flagged samples by linear interpolation between the nearest
/// good neighbours (nearest value at the ends).
fn repair(values: &mut [f64], bad: &[bool]) {
    let good: Vec<usize> = (0..values.len()).filter(|&k| !bad[k]).collect();
    if good.is_empty() {
        return;
    }
    let mut next_good = 0;
    for k in 0..values.len() {
        if !bad[k] {
            continue;
        }
        while next_good < good.len() && good[next_good] < k {
            next_good += 1;
        }
        let left = next_good.checked_sub(1).map(|g| good[g]);
        let right = good.get(next_good).copied();
        values[k] = match (left, right) {
            (Some(l), Some(r)) => {
                let w = (k - l) as f64 / (r - l) as f64;
                values[l] + w * (values[r] - values[l])
            }
            (Some(l), None) => values[l],
            (None, Some(r)) => values[r],
            (None, None) => unreachable!(),
        };
    }
}

/// Returns the repaired series and one log entry per flagged channel value.
pub fn cleanse(series: &SampleSeries, rules: &CleanseRules) -> Result<(SampleSeries, Vec<Removal>)> {
    let n = series.len();
    let mut log = Vec::new();
    let mut flagged = vec![false; n];
    let mut flag = |values: &[f64], channel: Channel, test: &dyn Fn(f64) -> Option<OutlierReason>| {
        let mut bad = vec![false; values.len()];
        for (k, v) in values.iter().enumerate() {
            if let Some(reason) = test(*v) {
                bad[k] = true;
                flagged[k] = true;
                log.push(Removal { index: k, channel, reason });
            }
        }
        bad
    };
    let bad_i = flag(&series.current, Channel::Current, &|i| current_reason(i, rules));
    let bad_v = flag(&series.voltage, Channel::Voltage, &|v| voltage_reason(v, rules));
    let bad_s = series.soc.as_ref().map(|s| flag(s, Channel::Soc, &soc_reason));

    let count = flagged.iter().filter(|f| **f).count();
    let limit = (rules.max_outlier_fraction * n as f64).floor() as usize;
    if count > limit {
        return Err(Error::TooManyOutliers { flagged: count, len: n, limit });
    }
    log.sort_by_key(|r| (r.index, r.channel as u8));

    let mut out = series.clone();
    repair(&mut out.current, &bad_i);
    repair(&mut out.voltage, &bad_v);
    if let (Some(soc), Some(bad)) = (out.soc.as_mut(), bad_s.as_ref()) {
        repair(soc, bad);
    }
    out.validate()?;
    Ok((out, log))
}
