//! Run configuration: per-command defaults, a JSON document on top, then
//! individual `--key value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::CliError;
use crate::estimator::{generate_candidates, CandidateSet};
use crate::fock::{SystemConfig, C64, FIGURE_DIM};
use crate::optimize::{AxisRange, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// `[start, stop, count]` in rescaled time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64, usize)", into = "(f64, f64, usize)")]
pub struct TauGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl From<(f64, f64, usize)> for TauGrid {
    fn from((start, stop, count): (f64, f64, usize)) -> Self {
        Self { start, stop, count }
    }
}

impl From<TauGrid> for (f64, f64, usize) {
    fn from(g: TauGrid) -> Self {
        (g.start, g.stop, g.count)
    }
}

impl TauGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let last = self.count - 1;
        let step = (self.stop - self.start) / last as f64;
        (0..self.count)
            .map(|k| {
                if k == last {
                    self.stop
                } else {
                    self.start + k as f64 * step
                }
            })
            .collect()
    }
}

/// Candidate rates for `estimate`: an explicit list, or `count` draws around
/// `center` (default: `gamma`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateConfig {
    pub rates: Option<Vec<f64>>,
    pub center: Option<f64>,
    pub spread: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub gamma: f64,
    pub u1: f64,
    pub u2: f64,
    pub dim: usize,
    pub tau_grid: TauGrid,
    pub grid: GridSpec,
    pub epsilons: Vec<f64>,
    pub seed: u64,
    pub efficiency: f64,
    pub duration: f64,
    pub dt: f64,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    pub candidates: CandidateConfig,
}

/// Keys whose override value is taken verbatim rather than parsed as JSON.
const STRING_KEYS: [&str; 3] = ["scenario", "out_dir", "format"];

impl RunConfig {
    /// Defaults for `command` (the subcommand name).
    pub fn defaults_for(command: &str) -> Self {
        let mut grid = GridSpec::controls(0.99, 201, 0.2);
        if command == "scan-alpha" {
            grid = GridSpec {
                u1_range: AxisRange::fixed(0.0),
                u2_range: AxisRange::new(0.0, 0.99, 201),
                alpha2_range: AxisRange::new(0.0, 0.99, 201),
            };
        }
        Self {
            scenario: command.to_string(),
            alpha_re: 1.0,
            alpha_im: 0.0,
            gamma: 1.0,
            u1: 0.05,
            u2: 0.05,
            dim: FIGURE_DIM,
            tau_grid: TauGrid {
                start: 0.0,
                stop: 6.0,
                count: 121,
            },
            grid,
            epsilons: vec![0.10, 0.15],
            seed: 0,
            efficiency: 1.0,
            duration: 10.0,
            dt: 1e-3,
            out_dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
            candidates: CandidateConfig {
                rates: None,
                center: None,
                spread: 0.75,
                count: 5,
            },
        }
    }

    /// Defaults, then `document` (if any), then `overrides`.
    pub fn load(
        command: &str,
        document: Option<&Path>,
        overrides: &[(&str, String)],
    ) -> Result<Self, CliError> {
        let mut merged =
            serde_json::to_value(Self::defaults_for(command)).expect("defaults serialise");
        if let Some(path) = document {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let doc: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if !doc.is_object() {
                return Err(CliError::Config(format!(
                    "{}: top level must be an object",
                    path.display()
                )));
            }
            merge(&mut merged, doc);
        }
        let mut layer = Map::new();
        for (key, raw) in overrides {
            let value = if STRING_KEYS.contains(key) {
                Value::String(raw.clone())
            } else {
                serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()))
            };
            layer.insert((*key).to_string(), value);
        }
        merge(&mut merged, Value::Object(layer));
        let config: Self =
            serde_json::from_value(merged).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.system()?;
        self.grid.validate().map_err(config_error)?;
        let g = self.tau_grid;
        if !(g.start >= 0.0 && g.stop >= g.start && g.stop.is_finite() && g.count >= 1) {
            return Err(CliError::Config(format!(
                "tau_grid: need 0 ≤ start ≤ stop and count ≥ 1, got [{}, {}, {}]",
                g.start, g.stop, g.count
            )));
        }
        if let Some(&e) = self.epsilons.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
            return Err(CliError::Config(format!("epsilons: {e} is outside (0, 1]")));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(CliError::Config(format!(
                "efficiency: {} is outside [0, 1]",
                self.efficiency
            )));
        }
        if !(self.dt > 0.0 && self.duration > 0.0) {
            return Err(CliError::Config("dt and duration must be positive".into()));
        }
        Ok(())
    }

    pub fn alpha(&self) -> C64 {
        C64::new(self.alpha_re, self.alpha_im)
    }

    pub fn system(&self) -> Result<SystemConfig, CliError> {
        SystemConfig::new(self.alpha(), self.gamma, self.u1, self.u2, self.dim)
            .map_err(config_error)
    }

    pub fn candidate_set(&self) -> Result<CandidateSet, CliError> {
        let c = &self.candidates;
        match &c.rates {
            Some(rates) => CandidateSet::uniform(rates.clone()),
            None => {
                generate_candidates(c.center.unwrap_or(self.gamma), c.spread, c.count, self.seed)
            }
        }
        .map_err(config_error)
    }
}

fn config_error(e: crate::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Recursive object merge; non-object values replace.
fn merge(base: &mut Value, layer: Value) {
    match (base, layer) {
        (Value::Object(b), Value::Object(l)) => {
            for (k, v) in l {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, l) => *b = l,
    }
}
