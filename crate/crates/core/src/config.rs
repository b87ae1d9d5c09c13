//! Run configuration: a flat `key = value` file with explicit units.
//!
//! ```text
//! # comments start with '#'
//! dt = 16ns
//! measurement_rate = 1.97/us     # or: tau = 507.6ns
//! rabi = 2.16MHz                 # Ω/2π
//! eta = 0.4
//! duration = 0.08us, 0.16us, 0.32us
//! initial_state = x+             # z+ z- x+ x- mixed, or "x, y, z"
//! ```
//!
//! Times take `ns`, `us`, `ms` or `s`; rates take `/ns`, `/us`, `/ms` or
//! `/s`; the Rabi frequency takes `Hz`, `kHz` or `MHz`. Values are stored in
//! SI units and written back with `s`, `/s` and `Hz` suffixes.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{unmonitored_rate, QubitState, SimParams};
use crate::stats::{DEFAULT_BIN_WIDTH, DEFAULT_FT_WINDOW, DEFAULT_MIN_COUNT};
use crate::unravel::{Basis, UnravelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Driven,
    Qnd,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "driven" => Ok(Mode::Driven),
            "qnd" => Ok(Mode::Qnd),
            other => Err(Error::invalid("mode", format!("expected driven or qnd, got `{other}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Driven => "driven",
            Mode::Qnd => "qnd",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    PlusZ,
    MinusZ,
    PlusX,
    MinusX,
    Mixed,
    Custom(f64, f64, f64),
}

impl InitialState {
    pub fn state(&self) -> QubitState {
        match *self {
            InitialState::PlusZ => QubitState::PLUS_Z,
            InitialState::MinusZ => QubitState::MINUS_Z,
            InitialState::PlusX => QubitState::PLUS_X,
            InitialState::MinusX => QubitState::MINUS_X,
            InitialState::Mixed => QubitState::MIXED,
            InitialState::Custom(x, y, z) => QubitState { x, y, z },
        }
    }
}

impl FromStr for InitialState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "z+" => InitialState::PlusZ,
            "z-" => InitialState::MinusZ,
            "x+" => InitialState::PlusX,
            "x-" => InitialState::MinusX,
            "mixed" => InitialState::Mixed,
            _ => {
                let parts: Vec<&str> = s.split(',').map(str::trim).collect();
                let bad = || {
                    Error::invalid(
                        "initial_state",
                        format!("expected z+, z-, x+, x-, mixed or `x, y, z`, got `{s}`"),
                    )
                };
                if parts.len() != 3 {
                    return Err(bad());
                }
                let v: Vec<f64> = parts
                    .iter()
                    .map(|p| p.parse::<f64>().map_err(|_| bad()))
                    .collect::<Result<_>>()?;
                InitialState::Custom(v[0], v[1], v[2])
            }
        })
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialState::PlusZ => f.write_str("z+"),
            InitialState::MinusZ => f.write_str("z-"),
            InitialState::PlusX => f.write_str("x+"),
            InitialState::MinusX => f.write_str("x-"),
            InitialState::Mixed => f.write_str("mixed"),
            InitialState::Custom(x, y, z) => write!(f, "{x}, {y}, {z}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dt: f64,
    pub tau: f64,
    pub eta: f64,
    /// Rabi frequency Ω/2π in Hz.
    pub rabi_hz: f64,
    /// Unset rates are derived from η and the basis.
    pub gamma_z: Option<f64>,
    pub gamma_phi: Option<f64>,
    pub durations: Vec<f64>,
    pub seed: u64,
    pub n_traj: usize,
    pub n_samples: usize,
    pub initial_state: InitialState,
    pub mode: Mode,
    pub basis: Basis,
    pub output_dir: PathBuf,
    pub bin_width: f64,
    pub q_max: f64,
    pub min_bin_count: u64,
    pub ft_window: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = SimParams::paper_defaults();
        RunConfig {
            dt: p.dt,
            tau: p.tau,
            eta: p.eta,
            rabi_hz: 2.16e6,
            gamma_z: None,
            gamma_phi: None,
            durations: vec![p.duration],
            seed: 0,
            n_traj: 280_000,
            n_samples: 1_000,
            initial_state: InitialState::PlusX,
            mode: Mode::Driven,
            basis: Basis::CompatibleZ,
            output_dir: PathBuf::from("out"),
            bin_width: DEFAULT_BIN_WIDTH,
            q_max: 10.0,
            min_bin_count: DEFAULT_MIN_COUNT,
            ft_window: DEFAULT_FT_WINDOW,
        }
    }
}

pub const KEYS: &[&str] = &[
    "dt",
    "tau",
    "measurement_rate",
    "eta",
    "rabi",
    "gamma_z",
    "gamma_phi",
    "duration",
    "seed",
    "n_traj",
    "n_samples",
    "initial_state",
    "mode",
    "basis",
    "output_dir",
    "bin_width",
    "q_max",
    "min_bin_count",
    "ft_window",
];

fn config_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

/// Units carry a decimal exponent; scaling by an exact power of ten keeps
/// `250ns` equal to the literal `2.5e-7`.
fn split_unit(key: &str, value: &str, units: &[(&str, i32)]) -> Result<f64> {
    let v = value.trim();
    for (suffix, exp) in units {
        if let Some(num) = v.strip_suffix(suffix) {
            let num = num.trim();
            let x: f64 = num
                .parse()
                .map_err(|_| config_err(key, format!("cannot parse number `{num}`")))?;
            let p = 10f64.powi(exp.abs());
            return Ok(if *exp < 0 { x / p } else { x * p });
        }
    }
    let names: Vec<&str> = units.iter().map(|u| u.0).collect();
    Err(config_err(
        key,
        format!("`{v}` needs a unit, one of {}", names.join(" ")),
    ))
}

const TIME_UNITS: &[(&str, i32)] = &[
    ("ns", -9),
    ("us", -6),
    ("µs", -6),
    ("μs", -6),
    ("ms", -3),
    ("s", 0),
];

const RATE_UNITS: &[(&str, i32)] = &[
    ("/ns", 9),
    ("/us", 6),
    ("/µs", 6),
    ("/μs", 6),
    ("/ms", 3),
    ("/s", 0),
];

const FREQ_UNITS: &[(&str, i32)] = &[("MHz", 6), ("kHz", 3), ("Hz", 0)];

pub fn parse_time(key: &str, value: &str) -> Result<f64> {
    split_unit(key, value, TIME_UNITS)
}

pub fn parse_rate(key: &str, value: &str) -> Result<f64> {
    split_unit(key, value, RATE_UNITS)
}

pub fn parse_frequency(key: &str, value: &str) -> Result<f64> {
    split_unit(key, value, FREQ_UNITS)
}

fn parse_plain<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| config_err(key, format!("cannot parse `{}`", value.trim())))
}

impl RunConfig {
    /// Set one key from its textual value.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let relabel = |e: Error| match e {
            Error::InvalidParameter { reason, .. } => config_err(key, reason),
            other => other,
        };
        match key {
            "dt" => self.dt = parse_time(key, value)?,
            "tau" => self.tau = parse_time(key, value)?,
            "measurement_rate" => self.tau = 1.0 / parse_rate(key, value)?,
            "eta" => self.eta = parse_plain(key, value)?,
            "rabi" => self.rabi_hz = parse_frequency(key, value)?,
            "gamma_z" => self.gamma_z = Some(parse_rate(key, value)?),
            "gamma_phi" => self.gamma_phi = Some(parse_rate(key, value)?),
            "duration" => {
                self.durations = value
                    .split(',')
                    .map(|v| parse_time(key, v))
                    .collect::<Result<_>>()?
            }
            "seed" => self.seed = parse_plain(key, value)?,
            "n_traj" => self.n_traj = parse_plain(key, value)?,
            "n_samples" => self.n_samples = parse_plain(key, value)?,
            "initial_state" => self.initial_state = value.parse().map_err(relabel)?,
            "mode" => self.mode = value.trim().parse().map_err(relabel)?,
            "basis" => self.basis = value.trim().parse().map_err(relabel)?,
            "output_dir" => self.output_dir = PathBuf::from(value.trim()),
            "bin_width" => self.bin_width = parse_plain(key, value)?,
            "q_max" => self.q_max = parse_plain(key, value)?,
            "min_bin_count" => self.min_bin_count = parse_plain(key, value)?,
            "ft_window" => self.ft_window = parse_plain(key, value)?,
            other => {
                return Err(config_err(
                    other,
                    format!("unknown key; expected one of {}", KEYS.join(", ")),
                ))
            }
        }
        Ok(())
    }

    /// Apply every `key = value` line of `text` on top of `self`.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        self.apply_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_str_with_defaults(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_str(text)?;
        Ok(cfg)
    }

    /// Write every key back; `from_str_with_defaults` of the result
    /// reproduces `self` exactly.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let durations: Vec<String> = self.durations.iter().map(|d| format!("{d}s")).collect();
        let _ = writeln!(s, "dt = {}s", self.dt);
        let _ = writeln!(s, "tau = {}s", self.tau);
        let _ = writeln!(s, "eta = {}", self.eta);
        let _ = writeln!(s, "rabi = {}Hz", self.rabi_hz);
        if let Some(g) = self.gamma_z {
            let _ = writeln!(s, "gamma_z = {g}/s");
        }
        if let Some(g) = self.gamma_phi {
            let _ = writeln!(s, "gamma_phi = {g}/s");
        }
        let _ = writeln!(s, "duration = {}", durations.join(", "));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "n_traj = {}", self.n_traj);
        let _ = writeln!(s, "n_samples = {}", self.n_samples);
        let _ = writeln!(s, "initial_state = {}", self.initial_state);
        let _ = writeln!(s, "mode = {}", self.mode);
        let _ = writeln!(s, "basis = {}", self.basis);
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        let _ = writeln!(s, "bin_width = {}", self.bin_width);
        let _ = writeln!(s, "q_max = {}", self.q_max);
        let _ = writeln!(s, "min_bin_count = {}", self.min_bin_count);
        let _ = writeln!(s, "ft_window = {}", self.ft_window);
        s
    }

    /// Ω in rad/s; zero in QND mode.
    pub fn rabi(&self) -> f64 {
        match self.mode {
            Mode::Qnd => 0.0,
            Mode::Driven => 2.0 * std::f64::consts::PI * self.rabi_hz,
        }
    }

    /// Unmonitored rates `(γ_z, γ_φ)`: explicit values win, otherwise the
    /// whole `(1−η)/(2ητ)` goes to the configured basis (half each for split).
    pub fn unmonitored_rates(&self) -> (f64, f64) {
        let rest = unmonitored_rate(self.eta, self.tau);
        match (self.gamma_z, self.gamma_phi) {
            (Some(z), Some(phi)) => (z, phi),
            (Some(z), None) => (z, (rest - z).max(0.0)),
            (None, Some(phi)) => ((rest - phi).max(0.0), phi),
            (None, None) => match self.basis {
                Basis::CompatibleZ => (rest, 0.0),
                Basis::IncompatiblePhi => (0.0, rest),
                Basis::Split => (0.5 * rest, 0.5 * rest),
            },
        }
    }

    pub fn max_duration(&self) -> f64 {
        self.durations.iter().copied().fold(0.0, f64::max)
    }

    /// Parameters at the configured efficiency, running to the longest duration.
    pub fn sim_params(&self) -> SimParams {
        let (gamma_z, gamma_phi) = self.unmonitored_rates();
        SimParams {
            dt: self.dt,
            tau: self.tau,
            eta: self.eta,
            rabi: self.rabi(),
            gamma_z,
            gamma_phi,
            duration: self.max_duration(),
            seed: self.seed,
        }
    }

    pub fn unravel_config(&self) -> UnravelConfig {
        UnravelConfig {
            eta: self.eta,
            basis: self.basis,
            n_samples: self.n_samples,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::invalid("eta", format!("must lie in (0, 1], got {}", self.eta)));
        }
        if self.n_traj == 0 {
            return Err(Error::invalid("n_traj", "must be at least 1"));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples", "must be at least 1"));
        }
        if self.durations.is_empty() {
            return Err(Error::invalid("duration", "at least one duration is required"));
        }
        if let Some(d) = self.durations.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::invalid("duration", format!("must be non-negative, got {d}")));
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return Err(Error::invalid("bin_width", format!("must be positive, got {}", self.bin_width)));
        }
        if !(self.q_max > 0.0 && self.q_max.is_finite()) {
            return Err(Error::invalid("q_max", format!("must be positive, got {}", self.q_max)));
        }
        if self.ft_window.is_nan() || self.ft_window <= 0.0 {
            return Err(Error::invalid("ft_window", format!("must be positive, got {}", self.ft_window)));
        }
        self.initial_state.state().validate()?;
        self.sim_params().validate()
    }
}
