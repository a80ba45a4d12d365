//! Experiment configuration: built-in defaults, then an optional flat
//! `key = value` file, then command-line flags.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use wstate_core::{ChannelConfig, Engine, Strategy, TorqueOptions};

/// Everything a command needs, echoed verbatim into the run report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub n: Option<usize>,
    pub q: Option<usize>,
    pub kd: f64,
    pub kd0: f64,
    pub gamma: f64,
    pub omega: f64,
    /// Exchange constant for the ideal model.
    pub j: f64,
    pub strategy: Strategy,
    pub engine: Engine,
    /// Prepare the first excitation with a y-polarized channel.
    pub torque_flip: bool,
    pub cap: usize,
    pub fidelity_threshold: f64,
    /// Relative tolerance on the diag-product peak against `(1/n)^n`.
    pub peak_tolerance: f64,
    /// Relative tolerance on predicted electron counts.
    pub electron_tolerance: f64,
    pub points: usize,
    pub axes: (String, String),
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
    pub fast: bool,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let c = ChannelConfig::reference(1);
        let t = TorqueOptions::default();
        Self {
            experiment: String::new(),
            n: None,
            q: None,
            kd: c.kd,
            kd0: c.kd0,
            gamma: c.gamma,
            omega: c.omega,
            j: 1.0,
            strategy: Strategy::default(),
            engine: t.engine,
            torque_flip: t.torque_flip,
            cap: t.cap,
            fidelity_threshold: t.flip_threshold,
            peak_tolerance: 0.01,
            electron_tolerance: 0.10,
            points: 64,
            axes: ("kd".into(), "kd0".into()),
            x_range: None,
            y_range: None,
            fast: false,
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn channel(&self, n: usize) -> ChannelConfig {
        ChannelConfig {
            n,
            kd: self.kd,
            kd0: self.kd0,
            gamma: self.gamma,
            omega: self.omega,
            ..ChannelConfig::reference(n)
        }
    }

    pub fn torque(&self) -> TorqueOptions {
        TorqueOptions {
            template: self.channel(1),
            engine: self.engine,
            torque_flip: self.torque_flip,
            flip_threshold: self.fidelity_threshold,
            cap: self.cap,
        }
    }

    /// Apply every key of a config file on top of the current values.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        for (key, (line, value)) in parse_flat(&text)? {
            self.set(&key, &value)
                .with_context(|| format!("{}:{line}: bad value for {key:?}", path.display()))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = value.to_string(),
            "n" => self.n = Some(value.parse()?),
            "q" => self.q = Some(value.parse()?),
            "kd" => self.kd = parse_number(value)?,
            "kd0" => self.kd0 = parse_number(value)?,
            "gamma" => self.gamma = parse_number(value)?,
            "omega" => self.omega = parse_number(value)?,
            "j" => self.j = parse_number(value)?,
            "strategy" => self.strategy = value.parse()?,
            "engine" => self.engine = value.parse()?,
            "torque_flip" => self.torque_flip = parse_bool(value)?,
            "cap" => self.cap = value.parse()?,
            "fidelity_threshold" => self.fidelity_threshold = parse_number(value)?,
            "peak_tolerance" => self.peak_tolerance = parse_number(value)?,
            "electron_tolerance" => self.electron_tolerance = parse_number(value)?,
            "points" => self.points = value.parse()?,
            "axes" => self.axes = parse_axes(value)?,
            "x_range" => self.x_range = Some(parse_range(value)?),
            "y_range" => self.y_range = Some(parse_range(value)?),
            "fast" => self.fast = parse_bool(value)?,
            "out" => self.out = PathBuf::from(value),
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }
}

/// `key = value` lines. `#` and `;` start comments, `[section]` headers are
/// accepted and ignored. Returns each key with its line number.
pub fn parse_flat(text: &str) -> Result<BTreeMap<String, (usize, String)>> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() || (line.starts_with('[') && line.ends_with(']')) {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key = value, got {raw:?}", idx + 1);
        };
        let key = k.trim().to_ascii_lowercase().replace('-', "_");
        if key.is_empty() {
            bail!("line {}: empty key", idx + 1);
        }
        if out.insert(key.clone(), (idx + 1, v.trim().to_string())).is_some() {
            bail!("line {}: duplicate key {key:?}", idx + 1);
        }
    }
    Ok(out)
}

/// A float, or a multiple of pi such as `pi`, `pi/2`, `3pi/2`, `-0.5*pi`.
pub fn parse_number(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase().replace(' ', "");
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a, b.parse::<f64>().with_context(|| format!("bad denominator in {s:?}"))?),
        None => (t.as_str(), 1.0),
    };
    let Some(coef) = num.strip_suffix("pi") else {
        bail!("not a number: {s:?}");
    };
    let coef = coef.strip_suffix('*').unwrap_or(coef);
    let c = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => other.parse::<f64>().with_context(|| format!("bad coefficient in {s:?}"))?,
    };
    Ok(c * PI / den)
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        other => bail!("not a boolean: {other:?}"),
    }
}

pub fn parse_range(s: &str) -> Result<(f64, f64)> {
    let Some((a, b)) = s.split_once(':') else {
        bail!("range must look like lo:hi, got {s:?}");
    };
    Ok((parse_number(a)?, parse_number(b)?))
}

pub fn parse_axes(s: &str) -> Result<(String, String)> {
    let Some((a, b)) = s.split_once(',') else {
        bail!("axes must look like x,y, got {s:?}");
    };
    Ok((a.trim().to_ascii_lowercase(), b.trim().to_ascii_lowercase()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers() {
        assert_eq!(parse_number("1e-4").unwrap(), 1e-4);
        assert_eq!(parse_number("pi").unwrap(), PI);
        assert_eq!(parse_number("pi/2").unwrap(), PI / 2.0);
        assert_eq!(parse_number("3pi/2").unwrap(), 1.5 * PI);
        assert_eq!(parse_number("-0.5*pi").unwrap(), -0.5 * PI);
        assert!(parse_number("tau").is_err());
    }

    #[test]
    fn flat_file() {
        let text = "# comment\n[channel]\nkd = pi\nGamma = 100 ; inline\n\nstrategy=max-forward\n";
        let map = parse_flat(text).unwrap();
        assert_eq!(map["kd"], (3, "pi".to_string()));
        assert_eq!(map["gamma"].1, "100");
        assert!(parse_flat("kd = 1\nkd = 2\n").is_err());
        assert!(parse_flat("just words\n").is_err());
    }

    #[test]
    fn set_keys() {
        let mut c = ExperimentConfig::default();
        c.set("strategy", "max-forward").unwrap();
        c.set("x_range", "0:pi").unwrap();
        c.set("axes", "Gamma, omega").unwrap();
        assert_eq!(c.strategy, Strategy::MaxForward);
        assert_eq!(c.x_range, Some((0.0, PI)));
        assert_eq!(c.axes, ("gamma".into(), "omega".into()));
        assert!(c.set("colour", "red").is_err());
        assert!(c.set("fast", "maybe").is_err());
    }
}
