use serde::{Deserialize, Serialize};

use super::{run_profile, CellModel, CurrentProfile, NoiseConfig, SimOutput};
use crate::error::{Error, Result};
use crate::series::Device;

/// Ideal capacitor with series ESR and a parallel self-discharge resistor.
///
/// Ground-truth SOC is the coulomb count of the terminal current against
/// `C·v_rated`; self-discharge lowers the stored charge (and so the
/// voltage) without appearing in the terminal current.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScParams {
    pub capacitance: f64,
    pub esr: f64,
    pub leak_r: f64,
    pub v_rated: f64,
    /// Discharge cutoff.
    pub v_min: f64,
    #[serde(default)]
    pub temperature_tag: String,
}

impl Default for ScParams {
    fn default() -> Self {
        ScParams {
            capacitance: 25.0,
            esr: 0.042,
            leak_r: 1e5,
            v_rated: 2.7,
            v_min: 0.27,
            temperature_tag: "25C".into(),
        }
    }
}

impl ScParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.capacitance, self.esr, self.leak_r, self.v_rated];
        if pos.iter().any(|v| !(*v > 0.0) || v.is_nan()) || !self.capacitance.is_finite() {
            return Err(Error::InvalidConfig("capacitance, esr, leak_r and v_rated must be positive".into()));
        }
        if !(self.v_min >= 0.0 && self.v_min < self.v_rated) {
            return Err(Error::InvalidConfig("need 0 <= v_min < v_rated".into()));
        }
        Ok(())
    }

    /// `C_n = C · v_rated` in coulombs.
    pub fn capacity_c(&self) -> f64 {
        self.capacitance * self.v_rated
    }

    /// Elevated-temperature variant: capacitance -5 %, ESR +30 %.
    pub fn hot(&self, tag: &str) -> Self {
        ScParams {
            capacitance: self.capacitance * 0.95,
            esr: self.esr * 1.3,
            temperature_tag: tag.to_string(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ScState {
    charge: f64,
    soc: f64,
}

impl ScParams {
    fn leak(&self, q: f64, dt: f64) -> f64 {
        dt * (q / self.capacitance) / self.leak_r
    }
}

impl CellModel for ScParams {
    type State = ScState;

    fn device(&self) -> Device {
        Device::Supercapacitor
    }

    fn start(&self, soc_init: f64) -> ScState {
        ScState { charge: soc_init * self.capacity_c(), soc: soc_init }
    }

    fn step(&self, prev: &ScState, i_prev: f64, i: f64, dt: f64) -> ScState {
        let moved = dt * (i_prev + i) / 2.0;
        ScState {
            charge: prev.charge - moved - self.leak(prev.charge, dt),
            soc: prev.soc - moved / self.capacity_c(),
        }
    }

    fn voltage(&self, s: &ScState, i: f64) -> f64 {
        s.charge / self.capacitance - i * self.esr
    }

    fn soc(&self, s: &ScState) -> f64 {
        s.soc
    }

    fn cv_current(&self, prev: Option<(&ScState, f64)>, init: &ScState, v_set: f64, dt: f64) -> f64 {
        match prev {
            None => (init.charge / self.capacitance - v_set) / self.esr,
            Some((ps, pi)) => {
                let c = self.capacitance;
                (ps.charge - dt * pi / 2.0 - self.leak(ps.charge, dt) - c * v_set) / (dt / 2.0 + c * self.esr)
            }
        }
    }

    fn v_min(&self) -> f64 {
        self.v_min
    }

    fn v_max(&self) -> f64 {
        self.v_rated
    }
}

pub fn simulate_sc(params: &ScParams, profile: &CurrentProfile, soc_init: f64, noise: &NoiseConfig) -> Result<SimOutput> {
    params.validate()?;
    run_profile(params, profile, soc_init, noise)
}
