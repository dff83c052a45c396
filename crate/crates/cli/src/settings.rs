//! Run configuration merged from built-in defaults, the environment, a preset,
//! a `key = value` file and command-line flags, in increasing priority.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nhtopo::invariants::{SpectrumKind, DEFAULT_GRID, DEFAULT_ZERO_MODE_FRACTION};
use nhtopo::model::{Boundary, ModelParams};
use nhtopo::statmech::MetricOptions;
use nhtopo::symmetry::DEFAULT_DEGENERACY_TOL;

use crate::error::{CliError, Result};

pub const THREADS_ENV: &str = "NHTOPO_THREADS";

pub struct Key {
    pub name: &'static str,
    pub value_name: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, value_name: &'static str, help: &'static str) -> Key {
    Key {
        name,
        value_name,
        help,
    }
}

/// Every setting accepted as `--name VALUE` and as `name = value` in a config file.
pub const KEYS: &[Key] = &[
    key("onsite", "U", "staggered onsite potential"),
    key("hopping", "T", "intra-orbital hopping t"),
    key("coupling", "J", "inter-orbital coupling"),
    key("gamma", "G", "dissipative coupling, |gamma| < J"),
    key("temperature", "T", "temperature; 0 selects the ground state"),
    key("cells", "L", "number of unit cells"),
    key("sin-offset", "D", "constant added to sin k in the coupling terms"),
    key("u-start", "U", "first U of the sweep"),
    key("u-stop", "U", "last U of the sweep"),
    key("u-count", "N", "number of U values"),
    key("gamma-start", "G", "first gamma of the sweep"),
    key("gamma-stop", "G", "last gamma of the sweep"),
    key("gamma-count", "N", "number of gamma values"),
    key("grid", "N", "k-points per winding loop"),
    key("bc", "open|periodic", "boundary condition"),
    key("which", "bands|effective", "spectrum to scan"),
    key("particles", "N", "particle number [default: L+1]"),
    key("window", "CELLS", "cells summed at each edge [default: max(5, L/10)]"),
    key("beta", "B", "inverse temperature for general systems"),
    key("alpha", "A,A,..", "alpha values for theorem3-demo"),
    key("systems", "N", "random systems in theorem3-demo"),
    key("size", "N", "dimension of the random systems"),
    key("retained", "N", "modes at the maximal imaginary part in random systems"),
    key("seed", "S", "seed of the first random system"),
    key("matrix", "PATH", "matrix file to analyse"),
    key("time-reversal", "PATH", "unitary part of a time-reversal candidate"),
    key("particle-hole", "PATH", "unitary part of a particle-hole candidate"),
    key("chiral", "PATH", "chiral candidate"),
    key("sublattice", "PATH", "sublattice candidate"),
    key("model-ops", "BOOL", "use the model's per-cell candidates"),
    key("tol-zero-mode", "X", "zero-mode threshold relative to the spectral scale"),
    key("tol-degeneracy", "X", "degeneracy tolerance of the conjugated spectrum"),
    key("tol-real", "X", "largest relative |Im E| treated as real"),
    key("tol-cluster", "X", "relative eigenvalue clustering tolerance"),
    key("tol-null", "X", "relative nullspace threshold of the metric constraints"),
    key("tol-defect", "X", "inverse condition number below which H counts as defective"),
    key("tol-max-im", "X", "relative window of retained modes"),
    key("format", "csv|json", "output format"),
    key("out", "PATH", "output file [default: stdout]"),
    key("threads", "N", "worker threads [default: $NHTOPO_THREADS, else all cores]"),
];

pub const PRESETS: &[&str] = &["phase-map", "open-chain", "edge-accumulation", "edge-depletion", "winding-steps"];

fn preset(name: &str) -> Result<Vec<(&'static str, String)>> {
    let standard_sweep = |u_start: f64, u_stop: f64, count: usize| {
        vec![
            ("hopping", "1".to_string()),
            ("coupling", "1".to_string()),
            ("gamma", "0.5".to_string()),
            ("temperature", "1".to_string()),
            ("u-start", u_start.to_string()),
            ("u-stop", u_stop.to_string()),
            ("u-count", count.to_string()),
        ]
    };
    let strong_dissipation = |onsite: f64, temperature: f64, sign: f64| {
        let j = 1.6e4f64.sqrt();
        let gamma = sign * (j - 2.5e-10f64.sqrt());
        vec![
            ("onsite", onsite.to_string()),
            ("hopping", "1".to_string()),
            ("coupling", format!("{j:?}")),
            ("gamma", format!("{gamma:?}")),
            ("temperature", temperature.to_string()),
            ("cells", "500".to_string()),
            ("bc", "open".to_string()),
        ]
    };
    Ok(match name {
        "phase-map" => vec![
            ("hopping", "0.5".to_string()),
            ("coupling", "1".to_string()),
            ("temperature", "0.2".to_string()),
            ("u-start", "-1.5".to_string()),
            ("u-stop", "2".to_string()),
            ("u-count", "101".to_string()),
            ("gamma-start", "-0.99".to_string()),
            ("gamma-stop", "0.99".to_string()),
            ("gamma-count", "101".to_string()),
        ],
        "open-chain" => {
            let mut v = standard_sweep(-2.0, 2.0, 200);
            v.extend([("cells", "50".to_string()), ("bc", "open".to_string())]);
            v
        }
        "edge-accumulation" => strong_dissipation(1.2, 0.1, 1.0),
        "edge-depletion" => strong_dissipation(0.0, 0.15, -1.0),
        "winding-steps" => standard_sweep(-2.0, 2.5, 451),
        other => {
            return Err(CliError::Usage(format!(
                "unknown preset '{other}' (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    })
}

/// Raw `key -> value` strings.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn insert(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KEYS.iter().any(|k| k.name == key) && key != "preset" {
            return Err(CliError::Usage(format!("unknown setting '{key}'")));
        }
        self.values.insert(key.to_string(), value.into());
        Ok(())
    }

    /// Entries of `other` replace those of `self`.
    pub fn overlay(mut self, other: Settings) -> Self {
        self.values.extend(other.values);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn parse_file(text: &str, path: &Path) -> Result<Self> {
        let mut settings = Self::default();
        for (i, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fail = |message: String| CliError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| fail(format!("expected 'key = value', found '{content}'")))?;
            settings
                .insert(key.trim(), value.trim())
                .map_err(|e| fail(e.to_string()))?;
        }
        Ok(settings)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_file(&text, path)
    }

    /// Layers `defaults < environment < preset < file < flags`; the preset
    /// itself may be named in the file or on the command line.
    pub fn merge(file: Settings, env_threads: Option<String>, flags: Settings) -> Result<Self> {
        let mut base = Settings::default();
        if let Some(threads) = env_threads {
            base.insert("threads", threads)?;
        }
        let explicit = file.overlay(flags);
        if let Some(name) = explicit.get("preset") {
            for (k, v) in preset(name)? {
                base.insert(k, v)?;
            }
        }
        Ok(base.overlay(explicit))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|raw| {
                raw.parse()
                    .map_err(|_| CliError::Usage(format!("invalid value '{raw}' for {key}")))
            })
            .transpose()
    }

    fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse(key)?.unwrap_or(default))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        nhtopo::sweep::linspace(self.start, self.stop, self.count)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    pub zero_mode: f64,
    pub degeneracy: f64,
    pub metric: MetricOptions,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OperatorPaths {
    pub time_reversal: Option<PathBuf>,
    pub particle_hole: Option<PathBuf>,
    pub chiral: Option<PathBuf>,
    pub sublattice: Option<PathBuf>,
    pub model: bool,
}

/// Fully typed settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Not validated here: sweeps report invalid points row by row.
    pub params: ModelParams,
    pub u_range: Range,
    pub gamma_range: Range,
    pub grid: usize,
    pub boundary: Boundary,
    pub which: SpectrumKind,
    pub particles: Option<usize>,
    pub window: Option<usize>,
    pub beta: f64,
    pub alphas: Vec<f64>,
    pub systems: usize,
    pub size: usize,
    pub retained: usize,
    pub seed: u64,
    pub matrix: Option<PathBuf>,
    pub operators: OperatorPaths,
    pub tolerances: Tolerances,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let params = ModelParams {
            onsite: s.parse_or("onsite", 0.0)?,
            hopping: s.parse_or("hopping", 1.0)?,
            coupling: s.parse_or("coupling", 1.0)?,
            gamma: s.parse_or("gamma", 0.5)?,
            temperature: s.parse_or("temperature", 1.0)?,
            cells: s.parse_or("cells", 50)?,
            sin_offset: s.parse_or("sin-offset", 0.0)?,
        };
        let range = |prefix: &str, start: f64, stop: f64, count: usize| -> Result<Range> {
            let range = Range {
                start: s.parse_or(&format!("{prefix}-start"), start)?,
                stop: s.parse_or(&format!("{prefix}-stop"), stop)?,
                count: s.parse_or(&format!("{prefix}-count"), count)?,
            };
            if range.count == 0 || !range.start.is_finite() || !range.stop.is_finite() {
                return Err(CliError::Usage(format!("{prefix} range must be finite with count >= 1")));
            }
            Ok(range)
        };
        let boundary = match s.get("bc").unwrap_or("open") {
            "open" | "obc" => Boundary::Open,
            "periodic" | "pbc" => Boundary::Periodic,
            other => return Err(CliError::Usage(format!("invalid value '{other}' for bc"))),
        };
        let which = s
            .get("which")
            .unwrap_or("bands")
            .parse()
            .map_err(|e: nhtopo::Error| CliError::Usage(e.to_string()))?;
        let alphas = s
            .get("alpha")
            .unwrap_or("1e2,1e3,1e4")
            .split(',')
            .map(|a| {
                a.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("invalid alpha '{a}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let defaults = MetricOptions::default();
        let tolerances = Tolerances {
            zero_mode: positive(s, "tol-zero-mode", DEFAULT_ZERO_MODE_FRACTION)?,
            degeneracy: positive(s, "tol-degeneracy", DEFAULT_DEGENERACY_TOL)?,
            metric: MetricOptions {
                real_tol: positive(s, "tol-real", defaults.real_tol)?,
                cluster_tol: positive(s, "tol-cluster", defaults.cluster_tol)?,
                null_tol: positive(s, "tol-null", defaults.null_tol)?,
                defect_tol: positive(s, "tol-defect", defaults.defect_tol)?,
                max_im_tol: positive(s, "tol-max-im", defaults.max_im_tol)?,
            },
        };
        let threads = s.parse::<usize>("threads")?;
        if threads == Some(0) {
            return Err(CliError::Usage("threads must be at least 1".into()));
        }
        let config = Self {
            params,
            u_range: range("u", -2.0, 2.0, 201)?,
            gamma_range: range("gamma", -0.9, 0.9, 19)?,
            grid: s.parse_or("grid", DEFAULT_GRID)?,
            boundary,
            which,
            particles: s.parse("particles")?,
            window: s.parse("window")?,
            beta: s.parse_or("beta", 1.0)?,
            alphas,
            systems: s.parse_or("systems", 5)?,
            size: s.parse_or("size", 6)?,
            retained: s.parse_or("retained", 2)?,
            seed: s.parse_or("seed", 0)?,
            matrix: s.get("matrix").map(PathBuf::from),
            operators: OperatorPaths {
                time_reversal: s.get("time-reversal").map(PathBuf::from),
                particle_hole: s.get("particle-hole").map(PathBuf::from),
                chiral: s.get("chiral").map(PathBuf::from),
                sublattice: s.get("sublattice").map(PathBuf::from),
                model: s.parse_or("model-ops", false)?,
            },
            tolerances,
            format: s.parse_or("format", Format::Csv)?,
            out: s.get("out").map(PathBuf::from),
            threads,
        };
        if !(config.beta.is_finite() && config.beta >= 0.0) {
            return Err(CliError::Usage("beta must be finite and non-negative".into()));
        }
        Ok(config)
    }
}

fn positive(s: &Settings, key: &str, default: f64) -> Result<f64> {
    let value = s.parse_or(key, default)?;
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::Usage(format!("{key} must be positive, got {value}")))
    }
}
