use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::SampleSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoulombConfig {
    /// Nominal capacity `C_n` in coulombs.
    pub nominal_capacity: f64,
    pub soc_init: f64,
}

impl CoulombConfig {
    pub fn new(nominal_capacity: f64, soc_init: f64) -> Result<Self> {
        let c = CoulombConfig { nominal_capacity, soc_init };
        c.validate()?;
        Ok(c)
    }

    pub fn from_amp_hours(ah: f64, soc_init: f64) -> Result<Self> {
        Self::new(ah * 3600.0, soc_init)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nominal_capacity.is_finite() && self.nominal_capacity > 0.0) {
            return Err(Error::InvalidConfig("nominal capacity must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.soc_init) {
            return Err(Error::InvalidSoc0(self.soc_init));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoulombResult {
    pub soc: Vec<f64>,
    /// Samples where the raw integral left `[0, 1]` and was clamped.
    pub clamp_count: usize,
}

/// `SOC(t_k) = soc_init - (trapezoidal ∫ I dt over [t_0, t_k]) / C_n`,
/// clamped to `[0, 1]`. The running integral itself is never clamped.
pub fn coulomb_count(series: &SampleSeries, cfg: &CoulombConfig) -> Result<CoulombResult> {
    cfg.validate()?;
    let dt = series.dt();
    let i = &series.current;
    let mut soc = Vec::with_capacity(i.len());
    let mut clamp_count = 0;
    let mut raw = cfg.soc_init;
    soc.push(raw);
    for k in 1..i.len() {
        raw -= dt * (i[k - 1] + i[k]) / (2.0 * cfg.nominal_capacity);
        if !(0.0..=1.0).contains(&raw) {
            clamp_count += 1;
        }
        soc.push(raw.clamp(0.0, 1.0));
    }
    Ok(CoulombResult { soc, clamp_count })
}
