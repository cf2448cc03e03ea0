//! Run configuration shared by all CLI subcommands ("hopmap-config/1").

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::ControlParams;
use crate::error::{HopmapError, Result};
use crate::graph::GraphConfig;
use crate::ingest::{DEFAULT_MIN_AREA_FRAC, DEFAULT_TAU_STUFF};
use crate::localization::{DEFAULT_RECALL_RADIUS, DEFAULT_THETA_LOC};
use crate::planning::{PlanStrategy, DEFAULT_CANDIDATES};
use crate::simworld::{ControlMode, WorldSpec};

pub const CONFIG_FORMAT: &str = "hopmap-config/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestSettings {
    /// Drop segments whose semantic vector matches a stuff vector above
    /// `tau_stuff` (needs `--stuff` vectors).
    pub tau_stuff: f64,
    /// Drop segments smaller than this fraction of their image.
    pub min_area_frac: f64,
    pub filter_small: bool,
}

impl Default for IngestSettings {
    fn default() -> Self {
        IngestSettings {
            tau_stuff: DEFAULT_TAU_STUFF,
            min_area_frac: DEFAULT_MIN_AREA_FRAC,
            filter_small: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalizationSettings {
    pub theta_loc: f64,
    /// Descriptor layer compared by `localize`.
    pub layer: usize,
    pub radius: usize,
    /// Rows of the recall table.
    pub layers: Vec<usize>,
    /// Columns of the recall table.
    pub thetas: Vec<f64>,
}

impl Default for LocalizationSettings {
    fn default() -> Self {
        LocalizationSettings {
            theta_loc: DEFAULT_THETA_LOC,
            layer: 0,
            radius: DEFAULT_RECALL_RADIUS,
            layers: vec![0, 1, 2],
            thetas: vec![0.5, 0.7, 0.9, 1.1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanSettings {
    pub strategy: PlanStrategy,
    /// Candidates retrieved per text vector in relational queries.
    pub k: usize,
}

impl Default for PlanSettings {
    fn default() -> Self {
        PlanSettings {
            strategy: PlanStrategy::IntraDt,
            k: DEFAULT_CANDIDATES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavSettings {
    pub mode: ControlMode,
    pub trials: usize,
    pub max_steps: usize,
    /// Minimum frame gap between start and goal.
    pub min_gap: usize,
}

impl Default for NavSettings {
    fn default() -> Self {
        NavSettings {
            mode: ControlMode::Continuous,
            trials: 10,
            max_steps: 500,
            min_gap: 12,
        }
    }
}

/// Every tunable of every subcommand. Missing keys take their defaults;
/// `seed` overrides `world.seed` and seeds start/goal sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub format: String,
    pub seed: u64,
    pub graph: GraphConfig,
    pub ingest: IngestSettings,
    pub localization: LocalizationSettings,
    pub plan: PlanSettings,
    pub control: ControlParams,
    pub world: WorldSpec,
    pub nav: NavSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            format: CONFIG_FORMAT.to_string(),
            seed: 42,
            graph: GraphConfig::default(),
            ingest: IngestSettings::default(),
            localization: LocalizationSettings::default(),
            plan: PlanSettings::default(),
            control: ControlParams::default(),
            world: WorldSpec::default(),
            nav: NavSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| HopmapError::Config(e.to_string()))?;
        if cfg.format != CONFIG_FORMAT {
            return Err(HopmapError::Format {
                found: cfg.format,
                expected: CONFIG_FORMAT,
            });
        }
        cfg.world.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.graph.validate()?;
        self.control.validate()?;
        self.world.validate()?;
        if self.localization.thetas.iter().any(|t| t.is_nan()) {
            return Err(HopmapError::Config(
                "recall thresholds must not be NaN".into(),
            ));
        }
        if self.plan.k == 0 {
            return Err(HopmapError::Config("plan.k must be at least 1".into()));
        }
        Ok(())
    }
}
