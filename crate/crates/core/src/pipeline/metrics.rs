use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Errors in percentage points of SOC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae_pct: f64,
    pub rmse_pct: f64,
    pub n_points: usize,
}

/// MAE and RMSE between fractional SOC series, reported in percent.
pub fn evaluate(actual: &[f64], estimated: &[f64]) -> Result<Metrics> {
    if actual.len() != estimated.len() || actual.is_empty() {
        return Err(Error::LengthMismatch(actual.len(), estimated.len()));
    }
    let n = actual.len() as f64;
    let (abs, sq) = actual
        .iter()
        .zip(estimated)
        .fold((0.0, 0.0), |(a, s), (x, y)| {
            let e = x - y;
            (a + e.abs(), s + e * e)
        });
    Ok(Metrics {
        mae_pct: 100.0 * abs / n,
        rmse_pct: 100.0 * (sq / n).sqrt(),
        n_points: actual.len(),
    })
}
