use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::SampleSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Charge,
    Discharge,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub regime: Regime,
    pub range: Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    /// Deadband as a fraction of the series' RMS current.
    pub deadband_fraction: f64,
    /// Segments shorter than this are merged into a neighbour.
    pub min_len: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig { deadband_fraction: 0.01, min_len: 3 }
    }
}

/// Splits the timeline into maximal charge/discharge runs by current sign.
/// Samples with `|I| < ε` continue the preceding regime (leading ones take
/// the first decided regime).
pub fn segment_by_regime(series: &SampleSeries, cfg: &SegmentConfig) -> Result<Vec<Segment>> {
    let i = &series.current;
    let rms = (i.iter().map(|v| v * v).sum::<f64>() / i.len() as f64).sqrt();
    let eps = cfg.deadband_fraction * rms;
    let decided: Vec<Option<Regime>> = i
        .iter()
        .map(|&v| {
            if v >= eps && v > 0.0 {
                Some(Regime::Discharge)
            } else if v <= -eps && v < 0.0 {
                Some(Regime::Charge)
            } else {
                None
            }
        })
        .collect();
    let first = decided.iter().flatten().next().copied().ok_or(Error::NoSegments)?;

    let mut segments: Vec<Segment> = Vec::new();
    let mut current = first;
    for (k, d) in decided.iter().enumerate() {
        if let Some(r) = d {
            current = *r;
        }
        match segments.last_mut() {
            Some(s) if s.regime == current => s.range.end = k + 1,
            _ => segments.push(Segment { regime: current, range: k..k + 1 }),
        }
    }

    while segments.len() > 1 {
        let Some(idx) = segments.iter().position(|s| s.range.len() < cfg.min_len) else {
            break;
        };
        let short = segments.remove(idx);
        if idx > 0 {
            segments[idx - 1].range.end = short.range.end;
        } else {
            segments[0].range.start = short.range.start;
        }
        // Re-coalesce neighbours that now share a regime.
        let mut merged: Vec<Segment> = Vec::with_capacity(segments.len());
        for s in segments.drain(..) {
            match merged.last_mut() {
                Some(m) if m.regime == s.regime => m.range.end = s.range.end,
                _ => merged.push(s),
            }
        }
        segments = merged;
    }
    Ok(segments)
}
