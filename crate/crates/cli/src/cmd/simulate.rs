use std::path::PathBuf;

use hess_soc::sim::ProfileKind;
use hess_soc::{Device, EcmBatteryParams, NoiseConfig, ScParams};
use serde::{Deserialize, Serialize};

use super::Provenance;
use crate::artifact::{sha256_hex, write_atomic, write_json};
use crate::error::CliResult;
use crate::spec::Experiment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub device: String,
    pub kind: Device,
    pub file: String,
    pub rows: usize,
    pub sha256: String,
    pub soc_init: f64,
    pub noise: NoiseConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub battery: Option<EcmBatteryParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub supercapacitor: Option<ScParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub name: String,
    pub preset: String,
    pub profile: ProfileKind,
    pub dt: Option<f64>,
    pub files: Vec<ManifestFile>,
}

pub fn csv_name(preset: &str, device: &str, profile: ProfileKind) -> String {
    format!("{preset}_{device}_{}.csv", profile.as_str())
}

/// One CSV per device that defines the profile, plus `manifest.json`.
pub fn run(exp: &Experiment) -> CliResult<(Manifest, Vec<PathBuf>)> {
    let preset = exp.require_preset()?;
    let profile = exp.profile_or_default()?;
    let mut files = Vec::new();
    let mut paths = Vec::new();
    for dev in preset.devices.iter().filter(|d| d.has_profile(profile)) {
        let mut series = dev.simulate(profile, exp.dt, &dev.noise)?.series;
        series.meta.insert("preset".into(), preset.name.clone());
        series.meta.insert("seed".into(), exp.seed.to_string());
        series.meta.insert("config_checksum".into(), exp.config_checksum.clone());
        let mut bytes = Vec::new();
        series.write_csv(&mut bytes)?;
        let file = csv_name(&preset.name, &dev.name, profile);
        let path = exp.out.join(&file);
        write_atomic(&path, &bytes)?;
        files.push(ManifestFile {
            device: dev.name.clone(),
            kind: dev.kind,
            file,
            rows: series.len(),
            sha256: sha256_hex(&bytes),
            soc_init: dev.initial_soc(profile),
            noise: dev.noise,
            battery: dev.battery.clone(),
            supercapacitor: dev.supercapacitor.clone(),
        });
        paths.push(path);
    }
    let manifest = Manifest {
        provenance: exp.into(),
        name: exp.name.clone(),
        preset: preset.name.clone(),
        profile,
        dt: exp.dt,
        files,
    };
    let mpath = exp.out.join("manifest.json");
    write_json(&mpath, &manifest)?;
    paths.push(mpath);
    Ok((manifest, paths))
}
