use std::fs;
use std::path::Path;

use serde::Deserialize;

use faultnet_core::classifiers::ModelParams;
use faultnet_core::features::FeatureSpec;
use faultnet_core::pipeline::StageLearners;
use faultnet_core::sim::SimConfig;
use faultnet_core::store::{ExperimentGrid, SplitConfig};
use faultnet_core::{Error, Result};

/// Everything a run can be configured with. Each section is optional and
/// falls back to the library defaults; unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub grid: ExperimentGrid,
    /// Defaults to one-cycle windows derived from `[sim]`.
    pub features: Option<FeatureSpec>,
    pub split: SplitConfig,
    pub pipeline: StageLearners,
    pub models: ModelParams,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.sim.validate()?;
        cfg.grid.validate()?;
        cfg.split.validate()?;
        cfg.feature_spec().validate()?;
        Ok(cfg)
    }

    pub fn feature_spec(&self) -> FeatureSpec {
        self.features
            .clone()
            .unwrap_or_else(|| FeatureSpec::for_sim(&self.sim))
    }
}
