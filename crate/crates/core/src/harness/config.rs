//! JSON experiment configuration.
//!
//! Sub-band indices are 1-based in files and 0-based in memory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::channel::{derive_mean_rewards, BandPlan, ChannelDistortion, MeanRewardMatrix};
use crate::env::Scenario;
use crate::error::{Error, Result};
use crate::matching::ENUMERATION_MAX_ARMS;
use crate::policies::{Algorithm, PolicyParams};

/// Default reference PRI (0.1024 ms).
pub const DEFAULT_PRI_SECONDS: f64 = 1.024e-4;

/// Rewards derived from per-node channel responses instead of listed means.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelRewardSpec {
    pub band_plan: BandPlan,
    /// One row per player (a single row is broadcast), one entry per sub-band.
    pub distortions: Vec<Vec<ChannelDistortion>>,
    #[serde(default = "unit")]
    pub ideal_gain: f64,
    #[serde(default)]
    pub ideal_delay: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    name: Option<String>,
    players: usize,
    arms: usize,
    #[serde(default)]
    means: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    channels: Option<ChannelRewardSpec>,
    #[serde(default)]
    comm_bands: Vec<usize>,
    variance: f64,
    horizon: u64,
    #[serde(default = "default_pri")]
    pri_seconds: f64,
    #[serde(default)]
    eta_sinr: Option<f64>,
    #[serde(default)]
    policy: PolicyParams,
    #[serde(default)]
    algorithms: Option<Vec<String>>,
    #[serde(default = "default_runs")]
    n_runs: usize,
    #[serde(default)]
    seed_base: u64,
    #[serde(default = "default_decimation")]
    decimation: u64,
    #[serde(default)]
    out_dir: Option<PathBuf>,
    #[serde(default)]
    plots: bool,
}

fn default_pri() -> f64 {
    DEFAULT_PRI_SECONDS
}

fn default_runs() -> usize {
    20
}

fn default_decimation() -> u64 {
    100
}

/// Validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    /// Scenario template; its seed is replaced per run.
    pub scenario: Scenario,
    pub algorithms: Vec<Algorithm>,
    pub n_runs: usize,
    pub seed_base: u64,
    /// Grid step for aggregate curves and CSV retention stride.
    pub decimation: u64,
    pub out_dir: Option<PathBuf>,
    pub plots: bool,
    pub params: PolicyParams,
    pub pri_seconds: f64,
}

fn broadcast_rows<T: Clone>(rows: Vec<Vec<T>>, players: usize, field: &str) -> Result<Vec<Vec<T>>> {
    match rows.len() {
        1 => Ok(vec![rows[0].clone(); players]),
        n if n == players => Ok(rows),
        n => Err(Error::config(
            field,
            format!("expected 1 or {players} rows, got {n}"),
        )),
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text)?;
        Self::from_raw(raw)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        if raw.players == 0 {
            return Err(Error::config("players", "must be positive"));
        }
        if raw.arms == 0 {
            return Err(Error::config("arms", "must be positive"));
        }
        let means = match (raw.means, raw.channels) {
            (Some(_), Some(_)) => {
                return Err(Error::config("means", "give either `means` or `channels`, not both"))
            }
            (None, None) => return Err(Error::config("means", "missing (or give `channels`)")),
            (Some(rows), None) => {
                let rows = broadcast_rows(rows, raw.players, "means")?;
                if rows.iter().any(|r| r.len() != raw.arms) {
                    return Err(Error::config(
                        "means",
                        format!("every row needs {} entries", raw.arms),
                    ));
                }
                MeanRewardMatrix::new(rows).map_err(|e| Error::config("means", e.to_string()))?
            }
            (None, Some(ch)) => {
                let rows = broadcast_rows(ch.distortions.clone(), raw.players, "channels.distortions")?;
                if rows.iter().any(|r| r.len() != raw.arms) {
                    return Err(Error::config(
                        "channels.distortions",
                        format!("every row needs {} entries", raw.arms),
                    ));
                }
                derive_mean_rewards(&ch.band_plan, &rows, ch.ideal_gain, ch.ideal_delay)
                    .map_err(|e| Error::config("channels", e.to_string()))?
            }
        };

        let mut comm_bands = std::collections::BTreeSet::new();
        for &b in &raw.comm_bands {
            if b == 0 || b > raw.arms {
                return Err(Error::config(
                    "comm_bands",
                    format!("sub-band {b} out of range 1..={}", raw.arms),
                ));
            }
            comm_bands.insert(b - 1);
        }
        if !(raw.variance >= 0.0 && raw.variance.is_finite()) {
            return Err(Error::config("variance", "must be finite and non-negative"));
        }
        if !(raw.pri_seconds > 0.0 && raw.pri_seconds.is_finite()) {
            return Err(Error::config("pri_seconds", "must be positive"));
        }

        let scenario = Scenario {
            players: raw.players,
            arms: raw.arms,
            means,
            comm_bands,
            sigma: raw.variance.sqrt(),
            horizon: raw.horizon,
            eta_sinr: raw.eta_sinr,
            seed: raw.seed_base,
        };
        scenario.validate()?;
        raw.policy.validate()?;

        let algorithms = match raw.algorithms {
            None => Algorithm::ALL.to_vec(),
            Some(names) => names.iter().map(|n| n.parse()).collect::<Result<Vec<_>>>()?,
        };
        let config = Self {
            name: raw.name.unwrap_or_else(|| "experiment".to_string()),
            scenario,
            algorithms,
            n_runs: raw.n_runs,
            seed_base: raw.seed_base,
            decimation: raw.decimation,
            out_dir: raw.out_dir,
            plots: raw.plots,
            params: raw.policy,
            pri_seconds: raw.pri_seconds,
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks that hold for any config, including ones edited after parsing.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.params.validate()?;
        if self.n_runs == 0 {
            return Err(Error::config("n_runs", "must be at least 1"));
        }
        if self.decimation == 0 {
            return Err(Error::config("decimation", "must be positive"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("algorithms", "list is empty"));
        }
        if self.algorithms.contains(&Algorithm::MEtcElim) && self.scenario.arms > ENUMERATION_MAX_ARMS {
            return Err(Error::config(
                "arms",
                format!(
                    "m_etc_elim tracks every matching explicitly; at most {ENUMERATION_MAX_ARMS} sub-bands"
                ),
            ));
        }
        Ok(())
    }

    /// Seed of run `i` (shared by all algorithms).
    pub fn seed(&self, i: usize) -> u64 {
        self.seed_base.wrapping_add(i as u64)
    }
}
