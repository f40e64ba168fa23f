use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LIION_DEFAULT: &str = include_str!("../../presets/ocv_liion.csv");

/// Monotone piecewise-linear open-circuit voltage map `SOC -> volts`.
/// Outside the knot range the end segments are extended linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OcvSource", into = "OcvSource")]
pub struct OcvCurve {
    soc: Vec<f64>,
    volts: Vec<f64>,
    name: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum OcvSource {
    Named(String),
    Knots(Vec<[f64; 2]>),
}

impl TryFrom<OcvSource> for OcvCurve {
    type Error = Error;

    fn try_from(src: OcvSource) -> Result<Self> {
        match src {
            OcvSource::Named(name) => OcvCurve::named(&name),
            OcvSource::Knots(k) => OcvCurve::new(k.iter().map(|[s, v]| (*s, *v)).collect()),
        }
    }
}

impl From<OcvCurve> for OcvSource {
    fn from(c: OcvCurve) -> Self {
        match c.name {
            Some(n) => OcvSource::Named(n),
            None => OcvSource::Knots(c.soc.iter().zip(&c.volts).map(|(s, v)| [*s, *v]).collect()),
        }
    }
}

impl OcvCurve {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidConfig("OCV curve needs at least two knots".into()));
        }
        let strictly_up = knots.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1);
        if !strictly_up || knots.iter().any(|(s, v)| !(s.is_finite() && v.is_finite())) {
            return Err(Error::InvalidConfig("OCV knots must be finite and strictly increasing".into()));
        }
        let (soc, volts) = knots.into_iter().unzip();
        Ok(OcvCurve { soc, volts, name: None })
    }

    /// Built-in curves; currently only `liion_default`.
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "liion_default" => {
                let mut c = parse_knots(LIION_DEFAULT)?;
                c.name = Some(name.to_string());
                Ok(c)
            }
            other => Err(Error::InvalidConfig(format!("unknown OCV curve `{other}`"))),
        }
    }

    pub fn liion_default() -> Self {
        Self::named("liion_default").expect("shipped OCV curve parses")
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.soc.iter().copied().zip(self.volts.iter().copied())
    }

    fn segment(&self, soc: f64) -> usize {
        let last = self.soc.len() - 2;
        match self.soc.iter().position(|&s| s > soc) {
            Some(0) => 0,
            Some(i) => (i - 1).min(last),
            None => last,
        }
    }

    pub fn voltage(&self, soc: f64) -> f64 {
        let i = self.segment(soc);
        self.volts[i] + self.slope_of(i) * (soc - self.soc[i])
    }

    /// `dV/dSOC` of the segment containing `soc`.
    pub fn slope(&self, soc: f64) -> f64 {
        self.slope_of(self.segment(soc))
    }

    fn slope_of(&self, i: usize) -> f64 {
        (self.volts[i + 1] - self.volts[i]) / (self.soc[i + 1] - self.soc[i])
    }

    pub fn v_at_empty(&self) -> f64 {
        self.voltage(0.0)
    }

    pub fn v_at_full(&self) -> f64 {
        self.voltage(1.0)
    }
}

fn parse_knots(text: &str) -> Result<OcvCurve> {
    let mut knots = Vec::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (s, v) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("bad OCV line `{line}`")))?;
        let p = |x: &str| x.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string()));
        knots.push((p(s)?, p(v)?));
    }
    OcvCurve::new(knots)
}
