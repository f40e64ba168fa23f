//! Uniformly sampled device measurements and their CSV form.
//!
//! CSV layout: optional `# key: value` comment lines, a header
//! `t,current,voltage[,soc]`, then one sample per line. A trailing
//! `# label` on a data line carries the simulator's phase label. Current is
//! positive on discharge.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Phase;

/// Which kind of storage device a series was recorded from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Device {
    Battery,
    Supercapacitor,
}

impl Device {
    pub fn as_str(self) -> &'static str {
        match self {
            Device::Battery => "battery",
            Device::Supercapacitor => "supercapacitor",
        }
    }
}

impl FromStr for Device {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "battery" | "bat" => Ok(Device::Battery),
            "supercapacitor" | "sc" | "ultracapacitor" => Ok(Device::Supercapacitor),
            other => Err(Error::Parse(format!("unknown device `{other}`"))),
        }
    }
}

/// One device's time series: current (A, discharge positive), terminal
/// voltage (V) and optionally ground-truth SOC as a fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSeries {
    pub t: Vec<f64>,
    pub current: Vec<f64>,
    pub voltage: Vec<f64>,
    pub soc: Option<Vec<f64>>,
    pub device: Device,
    pub meta: BTreeMap<String, String>,
    /// Simulator phase labels, when known.
    pub phases: Option<Vec<Phase>>,
}

const DT_REL_TOL: f64 = 1e-9;

impl SampleSeries {
    /// Builds a fully validated series.
    pub fn new(
        t: Vec<f64>,
        current: Vec<f64>,
        voltage: Vec<f64>,
        soc: Option<Vec<f64>>,
        device: Device,
    ) -> Result<Self> {
        let s = Self::raw(t, current, voltage, soc, device)?;
        s.validate()?;
        Ok(s)
    }

    /// Builds a series checking only lengths and the time grid; channel
    /// values may still hold outliers (see [`crate::pipeline::cleanse`]).
    pub fn raw(
        t: Vec<f64>,
        current: Vec<f64>,
        voltage: Vec<f64>,
        soc: Option<Vec<f64>>,
        device: Device,
    ) -> Result<Self> {
        let s = SampleSeries {
            t,
            current,
            voltage,
            soc,
            device,
            meta: BTreeMap::new(),
            phases: None,
        };
        s.check_shape()?;
        Ok(s)
    }

    /// Uniform time axis `t_k = k * dt` starting at zero.
    pub fn uniform_time(len: usize, dt: f64) -> Vec<f64> {
        (0..len).map(|k| k as f64 * dt).collect()
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.t[1] - self.t[0]
    }

    pub fn has_soc(&self) -> bool {
        self.soc.is_some()
    }

    pub fn soc(&self) -> Result<&[f64]> {
        self.soc.as_deref().ok_or(Error::MissingGroundTruth)
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.t.len();
        if n < 2 {
            return Err(Error::InvalidSeries(format!("need at least 2 samples, got {n}")));
        }
        if self.current.len() != n || self.voltage.len() != n {
            return Err(Error::InvalidSeries("channel lengths differ".into()));
        }
        if let Some(soc) = &self.soc {
            if soc.len() != n {
                return Err(Error::InvalidSeries("soc length differs".into()));
            }
        }
        if let Some(p) = &self.phases {
            if p.len() != n {
                return Err(Error::InvalidSeries("phase label length differs".into()));
            }
        }
        let dt = self.t[1] - self.t[0];
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidSeries(format!("time step {dt} is not positive")));
        }
        for k in 1..n {
            let step = self.t[k] - self.t[k - 1];
            if !step.is_finite() || (step - dt).abs() > DT_REL_TOL * dt.max(self.t[k].abs()) {
                return Err(Error::InvalidSeries(format!(
                    "non-uniform time step at index {k}: {step} vs {dt}"
                )));
            }
        }
        Ok(())
    }

    /// Checks every invariant including channel values.
    pub fn validate(&self) -> Result<()> {
        self.check_shape()?;
        if let Some(k) = self.current.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!("non-finite current at index {k}")));
        }
        if let Some(k) = self.voltage.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidSeries(format!(
                "voltage at index {k} is not finite and positive"
            )));
        }
        if let Some(soc) = &self.soc {
            if let Some(k) = soc.iter().position(|v| !(v.is_finite() && (0.0..=1.0).contains(v))) {
                return Err(Error::InvalidSeries(format!("soc at index {k} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Copy of samples `range`, with the time axis kept as-is.
    pub fn slice(&self, range: std::ops::Range<usize>) -> SampleSeries {
        SampleSeries {
            t: self.t[range.clone()].to_vec(),
            current: self.current[range.clone()].to_vec(),
            voltage: self.voltage[range.clone()].to_vec(),
            soc: self.soc.as_ref().map(|s| s[range.clone()].to_vec()),
            device: self.device,
            meta: self.meta.clone(),
            phases: self.phases.as_ref().map(|p| p[range].to_vec()),
        }
    }

    pub fn without_soc(&self) -> SampleSeries {
        SampleSeries {
            soc: None,
            ..self.clone()
        }
    }

    /// Parses the CSV format described in the module docs. The device comes
    /// from a `# device:` comment, falling back to `default_device`.
    pub fn read_csv<R: BufRead>(reader: R, default_device: Option<Device>) -> Result<Self> {
        let mut meta = BTreeMap::new();
        let mut header: Option<Vec<String>> = None;
        let (mut t, mut current, mut voltage, mut soc) = (vec![], vec![], vec![], vec![]);
        let mut phases: Vec<Option<Phase>> = vec![];

        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some((k, v)) = comment.split_once(':') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            let (data, trailing) = match trimmed.split_once('#') {
                Some((d, c)) => (d.trim(), Some(c.trim())),
                None => (trimmed, None),
            };
            let fields: Vec<&str> = data.split(',').map(str::trim).collect();
            let Some(cols) = &header else {
                let cols: Vec<String> = fields.iter().map(|f| f.to_ascii_lowercase()).collect();
                let ok = cols.len() >= 3
                    && cols[0] == "t"
                    && cols[1] == "current"
                    && cols[2] == "voltage"
                    && (cols.len() == 3 || (cols.len() == 4 && cols[3] == "soc"));
                if !ok {
                    return Err(Error::Parse(format!(
                        "line {}: expected header `t,current,voltage[,soc]`, got `{data}`",
                        lineno + 1
                    )));
                }
                header = Some(cols);
                continue;
            };
            if fields.len() != cols.len() {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields, got {}",
                    lineno + 1,
                    cols.len(),
                    fields.len()
                )));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: `{s}`: {e}", lineno + 1)))
            };
            t.push(num(fields[0])?);
            current.push(num(fields[1])?);
            voltage.push(num(fields[2])?);
            if cols.len() == 4 {
                soc.push(num(fields[3])?);
            }
            phases.push(trailing.and_then(|c| c.parse().ok()));
        }

        let header = header.ok_or_else(|| Error::Parse("missing header".into()))?;
        let device = match meta.get("device") {
            Some(d) => d.parse()?,
            None => default_device
                .ok_or_else(|| Error::Parse("no `# device:` comment and no device given".into()))?,
        };
        let soc = (header.len() == 4).then_some(soc);
        let mut s = SampleSeries::raw(t, current, voltage, soc, device)?;
        s.meta = meta;
        if !phases.is_empty() && phases.iter().all(Option::is_some) {
            s.phases = Some(phases.into_iter().flatten().collect());
        }
        Ok(s)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "# device: {}", self.device.as_str());
        for (k, v) in &self.meta {
            if k != "device" {
                let _ = writeln!(out, "# {k}: {v}");
            }
        }
        out.push_str(if self.soc.is_some() { "t,current,voltage,soc\n" } else { "t,current,voltage\n" });
        for k in 0..self.len() {
            let _ = write!(out, "{},{},{}", self.t[k], self.current[k], self.voltage[k]);
            if let Some(soc) = &self.soc {
                let _ = write!(out, ",{}", soc[k]);
            }
            if let Some(p) = &self.phases {
                let _ = write!(out, " # {}", p[k]);
            }
            out.push('\n');
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }
}
