use serde::{Deserialize, Serialize};

use super::{run_profile, solve_decreasing, CellModel, CurrentProfile, NoiseConfig, OcvCurve, SimOutput};
use crate::error::{Error, Result};
use crate::series::Device;

/// First-order Thevenin cell: OCV source, series `r0`, one `r1 || c1` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcmBatteryParams {
    pub capacity_ah: f64,
    pub r0: f64,
    pub r1: f64,
    pub c1: f64,
    pub ocv: OcvCurve,
    pub v_min: f64,
    pub v_max: f64,
    #[serde(default)]
    pub temperature_tag: String,
}

impl Default for EcmBatteryParams {
    fn default() -> Self {
        EcmBatteryParams {
            capacity_ah: 7.08,
            r0: 0.010,
            r1: 0.008,
            c1: 4000.0,
            ocv: OcvCurve::liion_default(),
            v_min: 2.5,
            v_max: 4.2,
            temperature_tag: "25C".into(),
        }
    }
}

impl EcmBatteryParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.capacity_ah, self.r0, self.r1, self.c1];
        if pos.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig("capacity, r0, r1 and c1 must be positive".into()));
        }
        if !(self.v_min < self.v_max) {
            return Err(Error::InvalidConfig("need v_min < v_max".into()));
        }
        Ok(())
    }

    /// Nominal capacity in coulombs.
    pub fn capacity_c(&self) -> f64 {
        self.capacity_ah * 3600.0
    }

    pub fn tau(&self) -> f64 {
        self.r1 * self.c1
    }

    /// Elevated-temperature variant: capacity -5 %, resistances +30 %.
    pub fn hot(&self, tag: &str) -> Self {
        EcmBatteryParams {
            capacity_ah: self.capacity_ah * 0.95,
            r0: self.r0 * 1.3,
            r1: self.r1 * 1.3,
            temperature_tag: tag.to_string(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BatteryState {
    soc: f64,
    /// Polarization voltage across the RC pair (V, positive on discharge).
    v1: f64,
}

impl CellModel for EcmBatteryParams {
    type State = BatteryState;

    fn device(&self) -> Device {
        Device::Battery
    }

    fn start(&self, soc_init: f64) -> BatteryState {
        BatteryState { soc: soc_init, v1: 0.0 }
    }

    fn step(&self, prev: &BatteryState, i_prev: f64, i: f64, dt: f64) -> BatteryState {
        BatteryState {
            soc: prev.soc - dt * (i_prev + i) / (2.0 * self.capacity_c()),
            v1: prev.v1 + dt * (i_prev / self.c1 - prev.v1 / self.tau()),
        }
    }

    fn voltage(&self, s: &BatteryState, i: f64) -> f64 {
        self.ocv.voltage(s.soc) - i * self.r0 - s.v1
    }

    fn soc(&self, s: &BatteryState) -> f64 {
        s.soc
    }

    fn cv_current(&self, prev: Option<(&BatteryState, f64)>, init: &BatteryState, v_set: f64, dt: f64) -> f64 {
        match prev {
            None => (self.ocv.voltage(init.soc) - init.v1 - v_set) / self.r0,
            Some((ps, pi)) => {
                let k = dt / (2.0 * self.capacity_c());
                let v1 = ps.v1 + dt * (pi / self.c1 - ps.v1 / self.tau());
                solve_decreasing(pi, |i| {
                    let soc = ps.soc - k * (pi + i);
                    let f = self.ocv.voltage(soc) - i * self.r0 - v1 - v_set;
                    (f, -self.ocv.slope(soc) * k - self.r0)
                })
            }
        }
    }

    fn v_min(&self) -> f64 {
        self.v_min
    }

    fn v_max(&self) -> f64 {
        self.v_max
    }
}

/// Forward-Euler simulation of the Thevenin cell over `profile`.
pub fn simulate_battery(
    params: &EcmBatteryParams,
    profile: &CurrentProfile,
    soc_init: f64,
    noise: &NoiseConfig,
) -> Result<SimOutput> {
    params.validate()?;
    run_profile(params, profile, soc_init, noise)
}
