//! Flat `key = value` experiment files.
//!
//! ```text
//! # aligned sender, five gaussian anecdotes
//! noise = gaussian
//! scale = 1
//! n = 5
//! m_sender = 0
//! m_receiver = 0
//! mode = foresight
//! replicates = 1000000
//! seed = 7
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown keys are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::equilibrium::SolverParams;
use crate::game::GameConfig;
use crate::noise::{NoiseDistribution, PosteriorMode};
use crate::report::Format;
use crate::stream::McParams;

pub const KEYS: [&str; 20] = [
    "noise",
    "scale",
    "n",
    "m_sender",
    "m_receiver",
    "mode",
    "replicates",
    "seed",
    "r_min",
    "r_max",
    "r_step",
    "delta_min",
    "delta_max",
    "delta_step",
    "bracket_lo",
    "bracket_hi",
    "tol_r",
    "max_iter",
    "output",
    "format",
];

const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn new(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            message: message.into(),
        }
    }

    fn at(line: Option<usize>, message: impl Into<String>) -> Self {
        ConfigError {
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError {
                line: Some(line),
                message,
            } => write!(f, "line {line}: {message}"),
            ConfigError { line: None, message } => f.write_str(message),
        }
    }
}

/// An inclusive `min, max, step` grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>, ConfigError> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(ConfigError::new(format!("grid step must be positive, got {}", self.step)));
        }
        if !(self.max >= self.min) {
            return Err(ConfigError::new(format!(
                "grid max {} is below min {}",
                self.max, self.min
            )));
        }
        let span = (self.max - self.min) / self.step;
        let count = (span + 1e-9).floor() as usize + 1;
        if count > MAX_GRID_POINTS {
            return Err(ConfigError::new(format!("grid has {count} points")));
        }
        Ok((0..count).map(|k| self.min + k as f64 * self.step).collect())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentConfig {
    pub noise: Option<String>,
    pub scale: Option<f64>,
    pub n: Option<usize>,
    pub m_sender: Option<f64>,
    pub m_receiver: Option<f64>,
    pub mode: Option<PosteriorMode>,
    pub replicates: Option<usize>,
    pub seed: Option<u64>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub r_step: Option<f64>,
    pub delta_min: Option<f64>,
    pub delta_max: Option<f64>,
    pub delta_step: Option<f64>,
    pub bracket_lo: Option<f64>,
    pub bracket_hi: Option<f64>,
    pub tol_r: Option<f64>,
    pub max_iter: Option<usize>,
    pub output: Option<String>,
    pub format: Option<Format>,
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: Option<usize>) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::at(line, format!("cannot parse '{value}' for key '{key}'")))
}

fn parse_real(key: &str, value: &str, line: Option<usize>) -> Result<f64, ConfigError> {
    let v: f64 = parse_value(key, value, line)?;
    if !v.is_finite() {
        return Err(ConfigError::at(line, format!("'{key}' must be finite")));
    }
    Ok(v)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = Some(idx + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::at(lineno, format!("expected 'key = value', got '{line}'")))?;
            config.set_at(key.trim(), value.trim(), lineno)?;
        }
        Ok(config)
    }

    /// Sets one key, as a command-line override would.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.set_at(key, value, None)
    }

    fn set_at(&mut self, key: &str, value: &str, line: Option<usize>) -> Result<(), ConfigError> {
        match key {
            "noise" => {
                NoiseDistribution::from_name(value, 1.0)
                    .map_err(|e| ConfigError::at(line, e.to_string()))?;
                self.noise = Some(value.to_string());
            }
            "scale" => {
                let v = parse_real(key, value, line)?;
                if v <= 0.0 {
                    return Err(ConfigError::at(line, format!("scale must be positive, got {v}")));
                }
                self.scale = Some(v);
            }
            "n" => {
                let v: usize = parse_value(key, value, line)?;
                if v == 0 {
                    return Err(ConfigError::at(line, "n must be at least 1"));
                }
                self.n = Some(v);
            }
            "m_sender" => self.m_sender = Some(parse_real(key, value, line)?),
            "m_receiver" => self.m_receiver = Some(parse_real(key, value, line)?),
            "mode" => {
                self.mode = Some(
                    PosteriorMode::from_name(value)
                        .map_err(|e| ConfigError::at(line, e.to_string()))?,
                )
            }
            "replicates" => {
                let v: usize = parse_value(key, value, line)?;
                if v < 2 {
                    return Err(ConfigError::at(line, "replicates must be at least 2"));
                }
                self.replicates = Some(v);
            }
            "seed" => self.seed = Some(parse_value(key, value, line)?),
            "r_min" => self.r_min = Some(parse_real(key, value, line)?),
            "r_max" => self.r_max = Some(parse_real(key, value, line)?),
            "r_step" => self.r_step = Some(parse_real(key, value, line)?),
            "delta_min" => self.delta_min = Some(parse_real(key, value, line)?),
            "delta_max" => self.delta_max = Some(parse_real(key, value, line)?),
            "delta_step" => self.delta_step = Some(parse_real(key, value, line)?),
            "bracket_lo" => self.bracket_lo = Some(parse_real(key, value, line)?),
            "bracket_hi" => self.bracket_hi = Some(parse_real(key, value, line)?),
            "tol_r" => {
                let v = parse_real(key, value, line)?;
                if v <= 0.0 {
                    return Err(ConfigError::at(line, "tol_r must be positive"));
                }
                self.tol_r = Some(v);
            }
            "max_iter" => {
                let v: usize = parse_value(key, value, line)?;
                if v == 0 {
                    return Err(ConfigError::at(line, "max_iter must be at least 1"));
                }
                self.max_iter = Some(v);
            }
            "output" => self.output = Some(value.to_string()),
            "format" => {
                self.format = Some(
                    Format::from_str(value).map_err(|e| ConfigError::at(line, e))?,
                )
            }
            other => return Err(ConfigError::at(line, format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Every key that is set, in canonical order, rendered as it will be used.
    pub fn entries(&self) -> Vec<(String, String)> {
        KEYS.iter()
            .filter_map(|&k| self.get(k).map(|v| (k.to_string(), v)))
            .collect()
    }

    pub fn get(&self, key: &str) -> Option<String> {
        fn s<T: ToString>(v: &Option<T>) -> Option<String> {
            v.as_ref().map(ToString::to_string)
        }
        match key {
            "noise" => self.noise.clone(),
            "scale" => s(&self.scale),
            "n" => s(&self.n),
            "m_sender" => s(&self.m_sender),
            "m_receiver" => s(&self.m_receiver),
            "mode" => self.mode.map(|m| m.name().to_string()),
            "replicates" => s(&self.replicates),
            "seed" => s(&self.seed),
            "r_min" => s(&self.r_min),
            "r_max" => s(&self.r_max),
            "r_step" => s(&self.r_step),
            "delta_min" => s(&self.delta_min),
            "delta_max" => s(&self.delta_max),
            "delta_step" => s(&self.delta_step),
            "bracket_lo" => s(&self.bracket_lo),
            "bracket_hi" => s(&self.bracket_hi),
            "tol_r" => s(&self.tol_r),
            "max_iter" => s(&self.max_iter),
            "output" => self.output.clone(),
            "format" => self.format.map(|f| f.name().to_string()),
            _ => None,
        }
    }

    fn require<T: Clone>(value: &Option<T>, key: &str) -> Result<T, ConfigError> {
        value
            .clone()
            .ok_or_else(|| ConfigError::new(format!("missing required key '{key}'")))
    }

    pub fn noise(&self) -> Result<NoiseDistribution, ConfigError> {
        let name = Self::require(&self.noise, "noise")?;
        let scale = self.scale.unwrap_or(1.0);
        NoiseDistribution::from_name(&name, scale).map_err(|e| ConfigError::new(e.to_string()))
    }

    /// Game instance; preferences default to 0 and the mode to foresight.
    pub fn game(&self) -> Result<GameConfig, ConfigError> {
        GameConfig::new(
            Self::require(&self.n, "n")?,
            self.m_sender.unwrap_or(0.0),
            self.m_receiver.unwrap_or(0.0),
            self.noise()?,
            self.mode.unwrap_or(PosteriorMode::Foresight),
        )
        .map_err(|e| ConfigError::new(e.to_string()))
    }

    /// Replicates and seed are both mandatory.
    pub fn mc(&self) -> Result<McParams, ConfigError> {
        McParams::new(
            Self::require(&self.replicates, "replicates")?,
            Self::require(&self.seed, "seed")?,
        )
        .map_err(|e| ConfigError::new(e.to_string()))
    }

    pub fn solver(&self) -> Result<SolverParams, ConfigError> {
        let mut params = SolverParams::new(self.mc()?);
        match (self.bracket_lo, self.bracket_hi) {
            (Some(lo), Some(hi)) => params = params.with_bracket(lo, hi),
            (None, None) => {}
            _ => {
                return Err(ConfigError::new(
                    "bracket_lo and bracket_hi must be given together",
                ))
            }
        }
        if let Some(tol) = self.tol_r {
            params.tol_r = tol;
        }
        if let Some(max_iter) = self.max_iter {
            params.max_iter = max_iter;
        }
        params.validate().map_err(|e| ConfigError::new(e.to_string()))?;
        Ok(params)
    }

    pub fn r_grid(&self) -> Result<Vec<f64>, ConfigError> {
        GridSpec {
            min: Self::require(&self.r_min, "r_min")?,
            max: Self::require(&self.r_max, "r_max")?,
            step: Self::require(&self.r_step, "r_step")?,
        }
        .points()
    }

    pub fn delta_grid(&self) -> Result<Vec<f64>, ConfigError> {
        GridSpec {
            min: Self::require(&self.delta_min, "delta_min")?,
            max: Self::require(&self.delta_max, "delta_max")?,
            step: Self::require(&self.delta_step, "delta_step")?,
        }
        .points()
    }
}

/// Reads and parses a config file. I/O failures are kept separate from
/// content errors so callers can map them to different exit codes.
pub fn load_config(path: &Path) -> Result<Result<ExperimentConfig, ConfigError>, std::io::Error> {
    let text = std::fs::read_to_string(path)?;
    Ok(ExperimentConfig::parse(&text))
}
