use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Phase;
use crate::error::{Error, Result};

/// Sampled current program (A, discharge positive) with per-sample phase
/// labels. During `CV_charge` samples the simulator replaces the current
/// with the value that holds the terminal voltage at `cv_voltage`; phases
/// may end early when the device hits a cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentProfile {
    pub dt: f64,
    pub samples: Vec<f64>,
    pub phase_labels: Vec<Phase>,
    pub cv_voltage: Option<f64>,
    /// CV ends once the charge current magnitude falls to this value.
    pub cv_cutoff_current: f64,
}

impl CurrentProfile {
    pub fn new(dt: f64, samples: Vec<f64>, phase_labels: Vec<Phase>) -> Result<Self> {
        let p = CurrentProfile {
            dt,
            samples,
            phase_labels,
            cv_voltage: None,
            cv_cutoff_current: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn constant(dt: f64, len: usize, current: f64, phase: Phase) -> Result<Self> {
        Self::new(dt, vec![current; len], vec![phase; len])
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidSpec(format!("dt must be positive, got {}", self.dt)));
        }
        if self.samples.len() != self.phase_labels.len() {
            return Err(Error::InvalidSpec("samples and labels differ in length".into()));
        }
        if self.samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite current sample".into()));
        }
        if self.phase_labels.contains(&Phase::CvCharge) && self.cv_voltage.is_none() {
            return Err(Error::InvalidSpec("CV phase without a CV voltage".into()));
        }
        Ok(())
    }

    /// Same program at `dt / factor`, each sample repeated `factor` times.
    pub fn refined(&self, factor: usize) -> Self {
        let factor = factor.max(1);
        fn rep<T: Copy>(v: &[T], factor: usize) -> Vec<T> {
            v.iter().flat_map(|x| std::iter::repeat_n(*x, factor)).collect()
        }
        CurrentProfile {
            dt: self.dt / factor as f64,
            samples: rep(&self.samples, factor),
            phase_labels: rep(&self.phase_labels, factor),
            cv_voltage: self.cv_voltage,
            cv_cutoff_current: self.cv_cutoff_current,
        }
    }

    pub fn concat(mut self, other: &CurrentProfile) -> Result<Self> {
        if (self.dt - other.dt).abs() > 1e-12 * self.dt {
            return Err(Error::InvalidSpec("cannot join profiles with different dt".into()));
        }
        self.samples.extend_from_slice(&other.samples);
        self.phase_labels.extend_from_slice(&other.phase_labels);
        self.cv_voltage = self.cv_voltage.or(other.cv_voltage);
        self.cv_cutoff_current = self.cv_cutoff_current.max(other.cv_cutoff_current);
        Ok(self)
    }
}

/// Constant-current / constant-voltage cycling program. Durations are
/// upper bounds in seconds; a zero duration drops that phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CccvSpec {
    pub dt: f64,
    pub cycles: usize,
    /// Charge current magnitude (A).
    pub cc_current: f64,
    pub cc_max_s: f64,
    pub cv_voltage: f64,
    pub cv_cutoff_current: f64,
    pub cv_max_s: f64,
    pub rest_s: f64,
    /// Discharge current magnitude (A).
    pub discharge_current: f64,
    pub discharge_max_s: f64,
    pub rest_after_s: f64,
}

impl Default for CccvSpec {
    fn default() -> Self {
        CccvSpec {
            dt: 1.0,
            cycles: 1,
            cc_current: 1.0,
            cc_max_s: 3600.0,
            cv_voltage: 4.2,
            cv_cutoff_current: 0.05,
            cv_max_s: 3600.0,
            rest_s: 600.0,
            discharge_current: 1.0,
            discharge_max_s: 3600.0,
            rest_after_s: 0.0,
        }
    }
}

impl CccvSpec {
    pub fn discharge_only(dt: f64, current: f64, max_s: f64) -> Self {
        CccvSpec {
            dt,
            cycles: 1,
            cc_max_s: 0.0,
            cv_max_s: 0.0,
            rest_s: 0.0,
            discharge_current: current,
            discharge_max_s: max_s,
            rest_after_s: 0.0,
            ..Default::default()
        }
    }
}

fn steps(duration: f64, dt: f64) -> usize {
    (duration / dt).round() as usize
}

pub fn profile_cccv(spec: &CccvSpec) -> Result<CurrentProfile> {
    let vals = [
        spec.cc_current,
        spec.cc_max_s,
        spec.cv_cutoff_current,
        spec.cv_max_s,
        spec.rest_s,
        spec.discharge_current,
        spec.discharge_max_s,
        spec.rest_after_s,
    ];
    if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidSpec("CC+CV values must be finite and non-negative".into()));
    }
    if !(spec.dt.is_finite() && spec.dt > 0.0) || spec.cycles == 0 {
        return Err(Error::InvalidSpec("need dt > 0 and at least one cycle".into()));
    }
    if spec.cv_max_s > 0.0 && !(spec.cv_voltage > 0.0) {
        return Err(Error::InvalidSpec("CV phase needs a positive CV voltage".into()));
    }
    if (spec.cc_max_s > 0.0 && spec.cc_current == 0.0) || (spec.discharge_max_s > 0.0 && spec.discharge_current == 0.0) {
        return Err(Error::InvalidSpec("CC and discharge phases need a non-zero current".into()));
    }
    let phases = [
        (Phase::CcCharge, spec.cc_max_s, -spec.cc_current),
        (Phase::CvCharge, spec.cv_max_s, -spec.cc_current),
        (Phase::Rest, spec.rest_s, 0.0),
        (Phase::Discharge, spec.discharge_max_s, spec.discharge_current),
        (Phase::Rest, spec.rest_after_s, 0.0),
    ];
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..spec.cycles {
        for &(phase, dur, current) in &phases {
            let n = steps(dur, spec.dt);
            samples.extend(std::iter::repeat_n(current, n));
            labels.extend(std::iter::repeat_n(phase, n));
        }
    }
    if samples.len() < 2 {
        return Err(Error::InvalidSpec("CC+CV program is empty".into()));
    }
    let has_cv = labels.contains(&Phase::CvCharge);
    let p = CurrentProfile {
        dt: spec.dt,
        samples,
        phase_labels: labels,
        cv_voltage: has_cv.then_some(spec.cv_voltage),
        cv_cutoff_current: spec.cv_cutoff_current,
    };
    p.validate()?;
    Ok(p)
}

/// Seeded urban-drive-like program: discharge bursts, regenerative pulses
/// and idle gaps joined by slew-limited ramps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UddsSpec {
    pub seed: u64,
    pub duration_s: f64,
    pub peak_current: f64,
    pub dt: f64,
    /// Fraction of each burst's charge the following regen pulse returns.
    pub regen_balance: f64,
    /// Time for a full 0 -> peak swing; bounds the slew rate.
    pub rise_s: f64,
}

impl Default for UddsSpec {
    fn default() -> Self {
        UddsSpec {
            seed: 0,
            duration_s: 1369.0,
            peak_current: 10.0,
            dt: 1.0,
            regen_balance: 0.4,
            rise_s: 4.0,
        }
    }
}


pub fn profile_udds_like(spec: &UddsSpec) -> Result<CurrentProfile> {
    if !(spec.duration_s > 0.0 && spec.dt > 0.0 && spec.peak_current > 0.0 && spec.rise_s > 0.0) {
        return Err(Error::InvalidSpec("need positive duration, dt, peak current and rise time".into()));
    }
    let peak = spec.peak_current;
    let slew = peak / spec.rise_s;
    let balance = spec.regen_balance.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Waypoints (time, current) of a piecewise-linear trace.
    let mut pts: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let mut t = 0.0;
    while t < spec.duration_s {
        // idle gap
        t += rng.random_range(2.0..10.0);
        pts.push((t, 0.0));
        // discharge burst: ramp up, drift, ramp down
        let a = peak * rng.random_range(0.3..1.0);
        let b = a * rng.random_range(0.5..1.0);
        let hold = rng.random_range(3.0..12.0);
        let up = a / slew;
        let down = b / slew;
        let q_burst = 0.5 * a * up + 0.5 * (a + b) * hold + 0.5 * b * down;
        t += up;
        pts.push((t, a));
        t += hold;
        pts.push((t, b));
        t += down;
        pts.push((t, 0.0));
        // coast
        t += rng.random_range(0.5..3.0);
        pts.push((t, 0.0));
        // regen pulse sized to return `balance` of the burst charge
        // (amplitude drawn, flat length solved so the pulse charge is exact)
        let q = balance * q_burst;
        let r = (peak * rng.random_range(0.3..0.8)).min((q * slew).sqrt());
        if r <= 0.0 {
            continue;
        }
        let flat = (q - r * r / slew) / r;
        t += r / slew;
        pts.push((t, -r));
        t += flat;
        pts.push((t, -r));
        t += r / slew;
        pts.push((t, 0.0));
    }

    let n = (spec.duration_s / spec.dt).round() as usize + 1;
    let mut samples = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let tk = k as f64 * spec.dt;
        while seg + 1 < pts.len() - 1 && pts[seg + 1].0 <= tk {
            seg += 1;
        }
        let (t0, i0) = pts[seg];
        let (t1, i1) = pts[seg + 1];
        let i = if t1 > t0 { i0 + (i1 - i0) * ((tk - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { i1 };
        samples.push(i.clamp(-peak, peak));
    }
    CurrentProfile::new(spec.dt, samples, vec![Phase::Drive; n])
}
