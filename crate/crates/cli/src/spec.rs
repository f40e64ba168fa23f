//! Experiment specs: a TOML file plus flag overrides, resolved against a
//! shipped preset.
//!
//! ```toml
//! name = "drive"
//! preset = "udds_pack"
//! profile = "udds"
//! seed = 3
//!
//! [train]
//! max_epochs = 200
//! ```

use std::path::{Path, PathBuf};

use hess_soc::sim::ProfileKind;
use hess_soc::{ModelKind, NarxConfig, Preset, TrainConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::artifact::{read_to_string, sha256_hex};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: Option<String>,
    pub preset: Option<String>,
    pub profile: Option<ProfileKind>,
    pub model: Option<ModelKind>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub soc0: Option<f64>,
    pub out: Option<PathBuf>,
    /// Partial override of the preset's network configuration.
    pub narx: Option<toml::Table>,
    /// Partial override of the preset's training configuration.
    pub train: Option<toml::Table>,
}

/// A fully resolved spec. Everything a command needs, plus the checksum
/// recorded in its artifacts.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub name: String,
    pub preset: Option<Preset>,
    pub profile: Option<ProfileKind>,
    pub model: ModelKind,
    pub seed: u64,
    pub dt: Option<f64>,
    pub soc0: Option<f64>,
    pub out: PathBuf,
    pub narx: NarxConfig,
    pub train: TrainConfig,
    pub config_checksum: String,
}

#[derive(Serialize)]
struct Canonical<'a> {
    name: &'a str,
    preset: Option<&'a Preset>,
    profile: Option<ProfileKind>,
    model: ModelKind,
    seed: u64,
    dt: Option<f64>,
    soc0: Option<f64>,
    narx: &'a NarxConfig,
    train: &'a TrainConfig,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("bad spec: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_toml(&read_to_string(path)?)
            .map_err(|e| CliError::usage(format!("{}: {}", path.display(), e.to_string().trim_start_matches("usage error: "))))
    }

    /// Fields set in `top` win; override tables merge key by key.
    pub fn overlay(self, top: &ExperimentSpec) -> ExperimentSpec {
        fn merge(a: Option<toml::Table>, b: &Option<toml::Table>) -> Option<toml::Table> {
            match (a, b) {
                (Some(mut a), Some(b)) => {
                    a.extend(b.iter().map(|(k, v)| (k.clone(), v.clone())));
                    Some(a)
                }
                (a, None) => a,
                (None, b) => b.clone(),
            }
        }
        ExperimentSpec {
            name: top.name.clone().or(self.name),
            preset: top.preset.clone().or(self.preset),
            profile: top.profile.or(self.profile),
            model: top.model.or(self.model),
            seed: top.seed.or(self.seed),
            dt: top.dt.or(self.dt),
            soc0: top.soc0.or(self.soc0),
            out: top.out.clone().or(self.out),
            narx: merge(self.narx, &top.narx),
            train: merge(self.train, &top.train),
        }
    }

    pub fn resolve(&self) -> CliResult<Experiment> {
        let preset = self.preset.as_deref().map(Preset::load).transpose()?;
        let profile = match (self.profile, &preset) {
            (Some(p), Some(pre)) => {
                if !pre.devices.iter().any(|d| d.has_profile(p)) {
                    return Err(CliError::usage(format!("preset `{}` has no `{}` profile", pre.name, p.as_str())));
                }
                Some(p)
            }
            (p, None) => p,
            (None, Some(pre)) => Some(pre.default_profile),
        };
        let base_narx = preset.as_ref().map(Preset::narx_config).unwrap_or_default();
        let base_train = preset.as_ref().map(Preset::train_config).unwrap_or_default();
        let narx: NarxConfig = apply("narx", base_narx, self.narx.as_ref())?;
        let mut train: TrainConfig = apply("train", base_train, self.train.as_ref())?;
        if let Some(seed) = self.seed {
            train.seed = seed;
        }
        narx.validate()?;
        train.validate()?;
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(CliError::usage(format!("--dt must be positive, got {dt}")));
            }
        }
        if let Some(s) = self.soc0 {
            if !(0.0..=1.0).contains(&s) {
                return Err(CliError::usage(format!("--soc0 must lie in [0, 1], got {s}")));
            }
        }
        let name = self
            .name
            .clone()
            .or_else(|| preset.as_ref().map(|p| p.name.clone()))
            .unwrap_or_else(|| "experiment".into());
        let mut exp = Experiment {
            name,
            preset,
            profile,
            model: self.model.unwrap_or_default(),
            seed: train.seed,
            dt: self.dt,
            soc0: self.soc0,
            out: self.out.clone().unwrap_or_else(|| PathBuf::from(".")),
            narx,
            train,
            config_checksum: String::new(),
        };
        exp.config_checksum = exp.checksum()?;
        Ok(exp)
    }
}

fn apply<T: Serialize + DeserializeOwned>(section: &str, base: T, table: Option<&toml::Table>) -> CliResult<T> {
    let Some(table) = table else { return Ok(base) };
    let mut value = serde_json::to_value(base)?;
    let obj = value.as_object_mut().expect("config serializes to an object");
    for (k, v) in table {
        if !obj.contains_key(k) {
            let known: Vec<&str> = obj.keys().map(String::as_str).collect();
            return Err(CliError::usage(format!("unknown key `{k}` in [{section}] (known: {})", known.join(", "))));
        }
        obj.insert(k.clone(), serde_json::to_value(v)?);
    }
    serde_json::from_value(value).map_err(|e| CliError::usage(format!("[{section}]: {e}")))
}

impl Experiment {
    fn checksum(&self) -> CliResult<String> {
        let c = Canonical {
            name: &self.name,
            preset: self.preset.as_ref(),
            profile: self.profile,
            model: self.model,
            seed: self.seed,
            dt: self.dt,
            soc0: self.soc0,
            narx: &self.narx,
            train: &self.train,
        };
        Ok(sha256_hex(&serde_json::to_vec(&c)?))
    }

    pub fn require_preset(&self) -> CliResult<&Preset> {
        self.preset.as_ref().ok_or_else(|| CliError::usage("this command needs --preset (or `preset` in --config)"))
    }

    pub fn profile_or_default(&self) -> CliResult<ProfileKind> {
        Ok(match self.profile {
            Some(p) => p,
            None => self.require_preset()?.default_profile,
        })
    }
}
