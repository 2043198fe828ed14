//! `key = value` configuration files and `--set` overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use phasespace_core::config::g0;
use phasespace_core::{validate, GridSpec, Method, PhysicalParams, RunConfig, ValidatedConfig, ValidationError};

/// Every accepted key, in manifest order.
pub const KEYS: &[&str] = &[
    "method",
    "trajectories",
    "master_seed",
    "output_dir",
    "divergence_threshold",
    "batches",
    "g2_floor",
    "g2_bin_halfwidth",
    "m_a",
    "m_m",
    "chi_1d",
    "delta",
    "u_aa",
    "u_am",
    "u_mm",
    "n0",
    "sigma",
    "hbar",
    "box_length",
    "num_points",
    "dt",
    "t_final",
    "save_stride",
];

/// Problem with a single key or line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for KeyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}", join_lines(.0))]
    Keys(Vec<KeyError>),
    #[error("{0}")]
    Validation(#[from] ValidationError),
}

fn join_lines(errors: &[KeyError]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n")
}

/// Unvalidated settings as read from files and overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub params: PhysicalParams,
    pub grid: GridSpec,
    pub run: RunConfig,
    trajectories_set: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            params: PhysicalParams::default(),
            grid: GridSpec::default(),
            run: RunConfig::default(),
            trajectories_set: false,
        }
    }
}

fn parse_f64(value: &str) -> Result<f64, String> {
    value
        .parse::<f64>()
        .map_err(|_| format!("expected a number, got '{value}'"))
}

/// Interaction strengths also accept `g0` and `<factor>*g0`.
fn parse_coupling(value: &str) -> Result<f64, String> {
    let v = value.replace(' ', "");
    if v == "g0" {
        return Ok(g0());
    }
    if let Some(factor) = v.strip_suffix("*g0") {
        return parse_f64(factor).map(|f| f * g0());
    }
    parse_f64(&v)
}

fn parse_int<T: std::str::FromStr>(value: &str) -> Result<T, String> {
    value
        .parse::<T>()
        .map_err(|_| format!("expected a non-negative integer, got '{value}'"))
}

impl Settings {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        let p = &mut self.params;
        let g = &mut self.grid;
        let r = &mut self.run;
        match key {
            "method" => r.method = value.parse()?,
            "trajectories" => {
                r.trajectories = parse_int(value)?;
                self.trajectories_set = true;
            }
            "master_seed" => r.master_seed = parse_int(value)?,
            "output_dir" => {
                if value.is_empty() {
                    return Err("output_dir must not be empty".into());
                }
                r.output_dir = value.to_string();
            }
            "divergence_threshold" => r.divergence_threshold = parse_f64(value)?,
            "batches" => r.batches = parse_int(value)?,
            "g2_floor" => r.g2_floor = parse_f64(value)?,
            "g2_bin_halfwidth" => r.g2_bin_halfwidth = parse_int(value)?,
            "m_a" => p.m_a = parse_f64(value)?,
            "m_m" => p.m_m = parse_f64(value)?,
            "chi_1d" => p.chi_1d = parse_f64(value)?,
            "delta" => p.delta = parse_f64(value)?,
            "u_aa" => p.u_aa = parse_coupling(value)?,
            "u_am" => p.u_am = parse_coupling(value)?,
            "u_mm" => p.u_mm = parse_coupling(value)?,
            "n0" => p.n0 = parse_f64(value)?,
            "sigma" => p.sigma = parse_f64(value)?,
            "hbar" => p.hbar = parse_f64(value)?,
            "box_length" => g.box_length = parse_f64(value)?,
            "num_points" => g.num_points = parse_int(value)?,
            "dt" => g.dt = parse_f64(value)?,
            "t_final" => g.t_final = parse_f64(value)?,
            "save_stride" => g.save_stride = parse_int(value)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Textual value of a key; floats use the shortest round-trip form.
    pub fn get(&self, key: &str) -> Option<String> {
        let p = &self.params;
        let g = &self.grid;
        let r = &self.run;
        let f = |x: f64| format!("{x:?}");
        Some(match key {
            "method" => r.method.name().to_string(),
            "trajectories" => self.effective_trajectories().to_string(),
            "master_seed" => r.master_seed.to_string(),
            "output_dir" => r.output_dir.clone(),
            "divergence_threshold" => f(r.divergence_threshold),
            "batches" => r.batches.to_string(),
            "g2_floor" => f(r.g2_floor),
            "g2_bin_halfwidth" => r.g2_bin_halfwidth.to_string(),
            "m_a" => f(p.m_a),
            "m_m" => f(p.m_m),
            "chi_1d" => f(p.chi_1d),
            "delta" => f(p.delta),
            "u_aa" => f(p.u_aa),
            "u_am" => f(p.u_am),
            "u_mm" => f(p.u_mm),
            "n0" => f(p.n0),
            "sigma" => f(p.sigma),
            "hbar" => f(p.hbar),
            "box_length" => f(g.box_length),
            "num_points" => g.num_points.to_string(),
            "dt" => f(g.dt),
            "t_final" => f(g.t_final),
            "save_stride" => g.save_stride.to_string(),
            _ => return None,
        })
    }

    /// Reads `key = value` lines; `#` starts a comment. All bad lines are reported together.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut s = Settings::default();
        s.apply_text(text)?;
        Ok(s)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(KeyError {
                    line: Some(i + 1),
                    key: line.to_string(),
                    message: "expected key = value".into(),
                });
                continue;
            };
            let key = key.trim();
            if let Err(message) = self.set(key, value) {
                errors.push(KeyError {
                    line: Some(i + 1),
                    key: key.to_string(),
                    message,
                });
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Keys(errors))
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, sets: &[S]) -> Result<(), ConfigError> {
        let mut errors = Vec::new();
        for item in sets {
            let item = item.as_ref();
            match item.split_once('=') {
                Some((key, value)) => {
                    if let Err(message) = self.set(key.trim(), value) {
                        errors.push(KeyError {
                            line: None,
                            key: key.trim().to_string(),
                            message,
                        });
                    }
                }
                None => errors.push(KeyError {
                    line: None,
                    key: item.to_string(),
                    message: "expected key=value".into(),
                }),
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Keys(errors))
        }
    }

    /// Deterministic methods default to one trajectory unless the count was set explicitly.
    pub fn effective_trajectories(&self) -> usize {
        if !self.trajectories_set && !self.run.method.is_stochastic() {
            1
        } else {
            self.run.trajectories
        }
    }

    /// Switches the method, keeping an explicit trajectory count only for stochastic methods.
    pub fn with_method(&self, method: Method) -> Self {
        let mut s = self.clone();
        s.run.method = method;
        if !method.is_stochastic() {
            s.trajectories_set = false;
        }
        s
    }

    pub fn validate(&self) -> Result<ValidatedConfig, ValidationError> {
        let mut run = self.run.clone();
        run.trajectories = self.effective_trajectories();
        validate(self.params, self.grid, run)
    }

    /// Resolved configuration as `key = value` lines in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", self.get(k).unwrap_or_default()))
            .collect()
    }
}
