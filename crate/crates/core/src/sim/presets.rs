//! Shipped device/experiment presets (TOML files under `presets/`).

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    profile_cccv, profile_udds_like, simulate_battery, simulate_sc, CccvSpec, CurrentProfile, EcmBatteryParams,
    NoiseConfig, ScParams, SimOutput, UddsSpec,
};
use crate::error::{Error, Result};
use crate::pipeline::FitOptions;
use crate::narx::NarxConfig;
use crate::series::Device;
use crate::trainer::TrainConfig;

pub const PRESET_NAMES: [&str; 5] = ["battery_room", "battery_hot", "sc_25f", "sc_1f_hot", "udds_pack"];

fn preset_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "battery_room" => include_str!("../../presets/battery_room.toml"),
        "battery_hot" => include_str!("../../presets/battery_hot.toml"),
        "sc_25f" => include_str!("../../presets/sc_25f.toml"),
        "sc_1f_hot" => include_str!("../../presets/sc_1f_hot.toml"),
        "udds_pack" => include_str!("../../presets/udds_pack.toml"),
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Cccv,
    Udds,
}

impl ProfileKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileKind::Cccv => "cccv",
            ProfileKind::Udds => "udds",
        }
    }
}

impl FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cccv" => Ok(ProfileKind::Cccv),
            "udds" => Ok(ProfileKind::Udds),
            other => Err(Error::InvalidConfig(format!("unknown profile `{other}` (expected cccv or udds)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeviceModel {
    Battery(EcmBatteryParams),
    Supercapacitor(ScParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevicePreset {
    pub name: String,
    pub kind: Device,
    /// Starting SOC for the CC+CV profile (and the drive profile unless
    /// `udds_soc_init` is set).
    pub soc_init: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub udds_soc_init: Option<f64>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery: Option<EcmBatteryParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supercapacitor: Option<ScParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cccv: Option<CccvSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub udds: Option<UddsSpec>,
    /// Estimator fitting options for this device.
    #[serde(default)]
    pub fit: FitOptions,
}

impl DevicePreset {
    pub fn model(&self) -> Result<DeviceModel> {
        match (self.kind, &self.battery, &self.supercapacitor) {
            (Device::Battery, Some(b), _) => Ok(DeviceModel::Battery(b.clone())),
            (Device::Supercapacitor, _, Some(s)) => Ok(DeviceModel::Supercapacitor(s.clone())),
            _ => Err(Error::InvalidConfig(format!("device `{}` lacks parameters for its kind", self.name))),
        }
    }

    /// Nominal capacity in coulombs.
    pub fn capacity_c(&self) -> Result<f64> {
        Ok(match self.model()? {
            DeviceModel::Battery(b) => b.capacity_c(),
            DeviceModel::Supercapacitor(s) => s.capacity_c(),
        })
    }

    pub fn initial_soc(&self, kind: ProfileKind) -> f64 {
        match kind {
            ProfileKind::Cccv => self.soc_init,
            ProfileKind::Udds => self.udds_soc_init.unwrap_or(self.soc_init),
        }
    }

    pub fn has_profile(&self, kind: ProfileKind) -> bool {
        match kind {
            ProfileKind::Cccv => self.cccv.is_some(),
            ProfileKind::Udds => self.udds.is_some(),
        }
    }

    pub fn profile(&self, kind: ProfileKind, dt: Option<f64>) -> Result<CurrentProfile> {
        match kind {
            ProfileKind::Cccv => {
                let mut spec = self.cccv.clone().ok_or_else(|| self.missing(kind))?;
                if let Some(dt) = dt {
                    spec.dt = dt;
                }
                profile_cccv(&spec)
            }
            ProfileKind::Udds => {
                let mut spec = self.udds.clone().ok_or_else(|| self.missing(kind))?;
                if let Some(dt) = dt {
                    spec.dt = dt;
                }
                profile_udds_like(&spec)
            }
        }
    }

    fn missing(&self, kind: ProfileKind) -> Error {
        Error::InvalidConfig(format!("device `{}` has no `{}` profile", self.name, kind.as_str()))
    }

    pub fn simulate(&self, kind: ProfileKind, dt: Option<f64>, noise: &NoiseConfig) -> Result<SimOutput> {
        let profile = self.profile(kind, dt)?;
        let mut out = match self.model()? {
            DeviceModel::Battery(b) => simulate_battery(&b, &profile, self.initial_soc(kind), noise)?,
            DeviceModel::Supercapacitor(s) => simulate_sc(&s, &profile, self.initial_soc(kind), noise)?,
        };
        out.series.meta.insert("device_name".into(), self.name.clone());
        out.series.meta.insert("profile".into(), kind.as_str().into());
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub default_profile: ProfileKind,
    #[serde(rename = "device")]
    pub devices: Vec<DevicePreset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub narx: Option<NarxConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
}

impl Preset {
    pub fn load(name: &str) -> Result<Self> {
        let text = preset_text(name).ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
        Self::from_toml(text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let p: Preset = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn all() -> Vec<Preset> {
        PRESET_NAMES.iter().map(|n| Self::load(n).expect("shipped preset parses")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.devices.is_empty() {
            return Err(Error::InvalidConfig(format!("preset `{}` has no devices", self.name)));
        }
        for d in &self.devices {
            match d.model()? {
                DeviceModel::Battery(b) => b.validate()?,
                DeviceModel::Supercapacitor(s) => s.validate()?,
            }
            if !(0.0..=1.0).contains(&d.soc_init) || d.udds_soc_init.is_some_and(|s| !(0.0..=1.0).contains(&s)) {
                return Err(Error::InvalidConfig(format!("device `{}`: soc_init outside [0, 1]", d.name)));
            }
        }
        if !self.devices.iter().any(|d| d.has_profile(self.default_profile)) {
            return Err(Error::InvalidConfig(format!(
                "preset `{}`: no device defines the default profile",
                self.name
            )));
        }
        Ok(())
    }

    pub fn narx_config(&self) -> NarxConfig {
        self.narx.clone().unwrap_or_default()
    }

    pub fn train_config(&self) -> TrainConfig {
        self.train.clone().unwrap_or_default()
    }
}
