//! Experiment configuration: a flat `key = value` file, overridden by flags.
//!
//! Grid values accept a single number, a list `[a, b, c]`, or an inclusive
//! range `start:stop:count`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cvswap::optomech::KappaConvention;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown experiment '{0}' (expected one of: {list})", list = Experiment::NAMES.join(", "))]
    UnknownExperiment(String),
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SwapCheck,
    Fig2a,
    Fig2b,
    NetworkSweep,
    Fig2c,
    Fig2d,
    GhzLimit,
}

impl Experiment {
    pub const NAMES: [&'static str; 7] = [
        "swap-check",
        "fig2a",
        "fig2b",
        "network-sweep",
        "fig2c",
        "fig2d",
        "ghz-limit",
    ];
    pub const ALL: [Experiment; 7] = [
        Experiment::SwapCheck,
        Experiment::Fig2a,
        Experiment::Fig2b,
        Experiment::NetworkSweep,
        Experiment::Fig2c,
        Experiment::Fig2d,
        Experiment::GhzLimit,
    ];

    pub fn name(self) -> &'static str {
        let i = Self::ALL.iter().position(|&e| e == self).unwrap();
        Self::NAMES[i]
    }
}

impl FromStr for Experiment {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Self::NAMES
            .iter()
            .position(|&n| n == s)
            .map(|i| Self::ALL[i])
            .ok_or_else(|| ConfigError::UnknownExperiment(s.to_string()))
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(invalid(format!("format must be csv or json, got '{other}'"))),
        }
    }
}

/// Keys understood in config files and as `--flag` overrides.
pub const KEYS: [&str; 18] = [
    "seed",
    "out",
    "format",
    "kappa_convention",
    "local_preprocessing",
    "n_max",
    "samples",
    "x_max",
    "mu",
    "eta",
    "omega",
    "n",
    "d",
    "delta",
    "g_eff",
    "temp",
    "workers",
    "experiment",
];

pub const DEFAULT_SEED: u64 = 20_240_517;

/// Raw string settings, before typing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(invalid(format!("unknown config key '{key}'")));
        }
        self.0.insert(key, value.into().trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut s = Self::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("line {}: expected 'key = value'", lineno + 1)))?;
            s.set(k, v).map_err(|e| invalid(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// `other` wins on conflicts.
    pub fn merge(&mut self, other: &Settings) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }
}

/// Expands a grid expression into its values.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, ConfigError> {
    let t = text.trim();
    let number = |s: &str| -> Result<f64, ConfigError> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| invalid(format!("'{}' is not a number", s.trim())))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(invalid(format!("'{}' is not finite", s.trim())))
        }
    };
    let values = if let Some(inner) = t.strip_prefix('[') {
        let inner = inner
            .strip_suffix(']')
            .ok_or_else(|| invalid(format!("unterminated list '{t}'")))?;
        if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner.split(',').map(number).collect::<Result<_, _>>()?
        }
    } else if t.contains(':') {
        let parts: Vec<&str> = t.split(':').collect();
        if parts.len() != 3 {
            return Err(invalid(format!("range '{t}' must be start:stop:count")));
        }
        let (a, b) = (number(parts[0])?, number(parts[1])?);
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| invalid(format!("range count '{}' is not a positive integer", parts[2])))?;
        match count {
            0 => Vec::new(),
            1 => vec![a],
            _ => (0..count)
                .map(|i| {
                    if i == count - 1 {
                        b
                    } else {
                        a + (b - a) * i as f64 / (count - 1) as f64
                    }
                })
                .collect(),
        }
    } else {
        vec![number(t)?]
    };
    if values.is_empty() {
        return Err(invalid(format!("grid '{t}' is empty")));
    }
    Ok(values)
}

fn parse_int_grid(text: &str, key: &str) -> Result<Vec<usize>, ConfigError> {
    parse_grid(text)?
        .into_iter()
        .map(|v| {
            if v.fract() == 0.0 && v >= 0.0 {
                Ok(v as usize)
            } else {
                Err(invalid(format!("{key} values must be non-negative integers, got {v}")))
            }
        })
        .collect()
}

fn parse_on_off(text: &str) -> Result<bool, ConfigError> {
    match text {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        other => Err(invalid(format!("expected on or off, got '{other}'"))),
    }
}

fn parse_scalar<T: FromStr>(text: &str, key: &str) -> Result<T, ConfigError> {
    text.parse()
        .map_err(|_| invalid(format!("invalid value '{text}' for {key}")))
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub kappa_convention: KappaConvention,
    pub local_preprocessing: bool,
    pub n_max: usize,
    pub samples: usize,
    pub x_max: f64,
    pub mu: Vec<f64>,
    pub eta: Vec<f64>,
    pub omega: Vec<f64>,
    pub n: Vec<usize>,
    /// Asymmetry grid for `fig2b`.
    pub d: Vec<f64>,
    /// Detuning in units of `ω_m`.
    pub delta: Vec<f64>,
    /// Effective coupling as an ordinary frequency in Hz.
    pub g_eff: Vec<f64>,
    /// Bath temperature in K.
    pub temp: Vec<f64>,
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn resolve(experiment: Experiment, s: &Settings) -> Result<Self, ConfigError> {
        use Experiment::*;
        let grid = |key: &str, default: &str| parse_grid(s.get(key).unwrap_or(default))
            .map_err(|e| invalid(format!("{key}: {e}")));

        let x_max: f64 = parse_scalar(s.get("x_max").unwrap_or("10"), "x_max")?;
        if !(x_max > 1.0 && x_max.is_finite()) {
            return Err(invalid(format!("x_max must be > 1, got {x_max}")));
        }
        let d_span = (x_max - 1.0) / 2.0;
        let d_default = format!("{}:{}:19", -d_span, d_span);

        let (mu_default, n_default, delta_default) = match experiment {
            GhzLimit => ("[2, 10, 100]", "2:8:7", "0"),
            Fig2c => ("1", "[2]", "0:1.5:61"),
            Fig2d => ("1", "2:5:4", "0:1.5:151"),
            _ => ("[1, 2, 5, 10]", "[2, 3, 4, 5, 8]", "0"),
        };
        let samples_default = if experiment == Fig2a { "10000" } else { "200" };

        let cfg = Self {
            experiment,
            seed: parse_scalar(s.get("seed").unwrap_or(&DEFAULT_SEED.to_string()), "seed")?,
            out: s.get("out").map(PathBuf::from),
            format: s.get("format").unwrap_or("csv").parse()?,
            kappa_convention: s
                .get("kappa_convention")
                .unwrap_or("angular")
                .parse()
                .map_err(|e: cvswap::Error| invalid(e.to_string()))?,
            local_preprocessing: parse_on_off(s.get("local_preprocessing").unwrap_or("on"))?,
            n_max: parse_scalar(s.get("n_max").unwrap_or("8"), "n_max")?,
            samples: parse_scalar(s.get("samples").unwrap_or(samples_default), "samples")?,
            x_max,
            mu: grid("mu", mu_default)?,
            eta: grid("eta", "[0.5, 1]")?,
            omega: grid("omega", "[1, 3]")?,
            n: parse_int_grid(s.get("n").unwrap_or(n_default), "n")?,
            d: grid("d", &d_default)?,
            delta: grid("delta", delta_default)?,
            g_eff: grid("g_eff", "8e6")?,
            temp: grid("temp", "4e-4")?,
            workers: s.get("workers").map(|w| parse_scalar(w, "workers")).transpose()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(invalid(msg)) };
        check(self.n_max >= 2, format!("n_max must be >= 2, got {}", self.n_max))?;
        check(self.samples >= 1, "samples must be >= 1".into())?;
        for &v in &self.mu {
            check(v >= 1.0, format!("mu values must be >= 1, got {v}"))?;
        }
        for &v in &self.eta {
            check(v > 0.0 && v <= 1.0, format!("eta values must lie in (0, 1], got {v}"))?;
        }
        for &v in &self.omega {
            check(v >= 1.0, format!("omega values must be >= 1, got {v}"))?;
        }
        for &v in &self.n {
            check(v >= 2, format!("n values must be >= 2, got {v}"))?;
        }
        for &v in &self.g_eff {
            check(v >= 0.0, format!("g_eff values must be >= 0, got {v}"))?;
        }
        for &v in &self.temp {
            check(v >= 0.0, format!("temp values must be >= 0, got {v}"))?;
        }
        if let Some(w) = self.workers {
            check(w >= 1, "workers must be >= 1".into())?;
        }
        Ok(())
    }
}
