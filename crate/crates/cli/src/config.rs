use std::fs;
use std::path::Path;

use bevkit_core::annotate::AnnotatorConfig;
use bevkit_core::motion::{ConditionConfig, PlannerConfig};
use bevkit_core::render::RenderConfig;
use bevkit_core::{Error, Result};
use serde::Deserialize;

use crate::args::EgoSelection;

/// Settings file contents. Every key is optional; command-line flags take
/// precedence over it.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    pub annotator: Option<AnnotatorConfig>,
    pub render: Option<RenderConfig>,
    pub planner: Option<PlannerConfig>,
    pub condition: Option<ConditionConfig>,
    pub rate: Option<f64>,
    pub balance_factor: Option<f64>,
    pub test_fraction: Option<f64>,
    pub samples: Option<usize>,
    pub timesteps: Option<Vec<i64>>,
    pub egos: Option<String>,
    pub max_shift: Option<f64>,
    pub horizon: Option<usize>,
}

pub const DEFAULT_BALANCE_FACTOR: f64 = 3.0;
pub const DEFAULT_TEST_FRACTION: f64 = 0.157;
pub const DEFAULT_TIMESTEPS: [i64; 1] = [0];

impl Defaults {
    pub fn load(path: Option<&Path>) -> Result<Defaults> {
        let Some(path) = path else {
            return Ok(Defaults::default());
        };
        read_json(path)
    }

    pub fn egos(&self) -> Result<Option<EgoSelection>> {
        match self.egos.as_deref() {
            None => Ok(None),
            Some("all") => Ok(Some(EgoSelection::All)),
            Some("scene") => Ok(Some(EgoSelection::Scene)),
            Some(other) => Err(Error::validation("egos", format!("expected `all` or `scene`, got `{other}`"))),
        }
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Flag, then file value, then built-in default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: impl FnOnce() -> T) -> T {
    flag.or(file).unwrap_or_else(default)
}
