//! Equivalent-circuit simulator producing measurement series with exact
//! ground-truth SOC, plus the current-profile generators that drive it.

mod battery;
mod ocv;
mod presets;
mod profile;
mod sc;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use battery::{simulate_battery, EcmBatteryParams};
pub use ocv::OcvCurve;
pub use presets::{DevicePreset, DeviceModel, Preset, ProfileKind, PRESET_NAMES};
pub use profile::{profile_cccv, profile_udds_like, CccvSpec, CurrentProfile, UddsSpec};
pub use sc::{simulate_sc, ScParams};

use crate::error::Error;
use crate::series::SampleSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "CC_charge")]
    CcCharge,
    #[serde(rename = "CV_charge")]
    CvCharge,
    Rest,
    Discharge,
    Drive,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::CcCharge => "CC_charge",
            Phase::CvCharge => "CV_charge",
            Phase::Rest => "Rest",
            Phase::Discharge => "Discharge",
            Phase::Drive => "Drive",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "CC_charge" => Phase::CcCharge,
            "CV_charge" => Phase::CvCharge,
            "Rest" => Phase::Rest,
            "Discharge" => Phase::Discharge,
            "Drive" => Phase::Drive,
            other => return Err(Error::Parse(format!("unknown phase `{other}`"))),
        })
    }
}

/// Zero-mean Gaussian sensor noise on the logged channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub sigma_v: f64,
    pub sigma_i: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { sigma_v: 0.0, sigma_i: 0.0, seed: 0 }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.sigma_v == 0.0 && self.sigma_i == 0.0
    }
}

/// Simulator output: the logged (possibly noisy) series plus the noiseless
/// channels it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub series: SampleSeries,
    pub clean_current: Vec<f64>,
    pub clean_voltage: Vec<f64>,
}

/// Noiseless trace assembled by the device models.
#[derive(Debug, Default)]
struct Trace {
    current: Vec<f64>,
    voltage: Vec<f64>,
    soc: Vec<f64>,
    phases: Vec<Phase>,
}

impl Trace {
    fn push(&mut self, i: f64, v: f64, soc: f64, phase: Phase) {
        self.current.push(i);
        self.voltage.push(v);
        self.soc.push(soc);
        self.phases.push(phase);
    }

    fn finish(self, dt: f64, device: crate::series::Device, noise: &NoiseConfig) -> Result<SimOutput, Error> {
        if self.current.len() < 2 {
            return Err(Error::InvalidSpec("simulation produced fewer than 2 samples".into()));
        }
        let n = self.current.len();
        let (mut i_log, mut v_log) = (self.current.clone(), self.voltage.clone());
        if !noise.is_zero() {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            let nv = Normal::new(0.0, noise.sigma_v).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            let ni = Normal::new(0.0, noise.sigma_i).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            for k in 0..n {
                v_log[k] += nv.sample(&mut rng);
                i_log[k] += ni.sample(&mut rng);
            }
        }
        let mut series = SampleSeries::raw(SampleSeries::uniform_time(n, dt), i_log, v_log, Some(self.soc), device)?;
        series.phases = Some(self.phases);
        Ok(SimOutput {
            series,
            clean_current: self.current,
            clean_voltage: self.voltage,
        })
    }
}

/// Contiguous runs of equal phase labels as `(phase, start, end)`.
pub(crate) fn phase_runs(labels: &[Phase]) -> Vec<(Phase, usize, usize)> {
    let mut runs = Vec::new();
    let mut start = 0;
    for k in 1..=labels.len() {
        if k == labels.len() || labels[k] != labels[start] {
            runs.push((labels[start], start, k));
            start = k;
        }
    }
    runs
}

/// Newton solve of a decreasing piecewise-linear scalar equation `f(x) = 0`.
pub(crate) fn solve_decreasing(mut x: f64, f: impl Fn(f64) -> (f64, f64)) -> f64 {
    for _ in 0..50 {
        let (val, d) = f(x);
        if val.abs() < 1e-13 || d == 0.0 {
            break;
        }
        let next = x - val / d;
        if next == x {
            break;
        }
        x = next;
    }
    x
}

/// Lumped device model stepped by [`run_profile`].
pub(crate) trait CellModel {
    type State: Copy;

    fn device(&self) -> crate::series::Device;
    fn start(&self, soc_init: f64) -> Self::State;
    /// State after one step of length `dt`, the current moving linearly
    /// from `i_prev` to `i` over the step.
    fn step(&self, prev: &Self::State, i_prev: f64, i: f64, dt: f64) -> Self::State;
    fn voltage(&self, s: &Self::State, i: f64) -> f64;
    fn soc(&self, s: &Self::State) -> f64;
    /// Current that puts the terminal voltage of the next state at `v_set`.
    fn cv_current(&self, prev: Option<(&Self::State, f64)>, init: &Self::State, v_set: f64, dt: f64) -> f64;
    fn v_min(&self) -> f64;
    fn v_max(&self) -> f64;
}

pub(crate) fn run_profile<C: CellModel>(
    cell: &C,
    profile: &CurrentProfile,
    soc_init: f64,
    noise: &NoiseConfig,
) -> Result<SimOutput, Error> {
    profile.validate()?;
    if !(0.0..=1.0).contains(&soc_init) {
        return Err(Error::CutoffAtStart(format!("soc_init {soc_init} outside [0, 1]")));
    }
    let init = cell.start(soc_init);
    let v0 = cell.voltage(&init, 0.0);
    if v0 < cell.v_min() || v0 > cell.v_max() {
        return Err(Error::CutoffAtStart(format!(
            "open-circuit voltage {v0:.4} V outside [{}, {}] V",
            cell.v_min(),
            cell.v_max()
        )));
    }
    let dt = profile.dt;
    let cc_stop = profile.cv_voltage.unwrap_or(cell.v_max());
    let mut trace = Trace::default();
    let mut prev: Option<(C::State, f64)> = None;

    for (phase, a, b) in phase_runs(&profile.phase_labels) {
        for k in a..b {
            let i = match phase {
                Phase::CvCharge => {
                    let v_set = profile.cv_voltage.expect("validated");
                    cell.cv_current(prev.as_ref().map(|(s, i)| (s, *i)), &init, v_set, dt)
                }
                _ => profile.samples[k],
            };
            let s = match &prev {
                None => init,
                Some((ps, pi)) => cell.step(ps, *pi, i, dt),
            };
            let v = cell.voltage(&s, i);
            let cutoff = match phase {
                Phase::CcCharge => v >= cc_stop,
                Phase::CvCharge => -i <= profile.cv_cutoff_current,
                Phase::Discharge => v <= cell.v_min(),
                Phase::Drive => v <= cell.v_min() || v >= cell.v_max(),
                Phase::Rest => false,
            };
            if cutoff {
                break;
            }
            trace.push(i, v, cell.soc(&s), phase);
            prev = Some((s, i));
        }
    }
    trace.finish(dt, cell.device(), noise)
}
