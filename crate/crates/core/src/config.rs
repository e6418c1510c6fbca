//! TOML scenario files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::active::SignalConfig;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scenario::{NoiseModel, Scenario, Wall};
use crate::slam::SlamParams;

/// Everything a run needs besides the seed and mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// `[ax, ay, bx, by]` per wall.
    pub walls: Vec<[f64; 4]>,
    pub pas: Vec<[f64; 2]>,
    pub waypoints: Vec<[f64; 2]>,
    pub step_length: f64,
    pub sample_period: f64,
    pub noise: NoiseModel,
    pub signal: SignalConfig,
    pub n_beams: usize,
    /// Filter overrides; anything omitted keeps its default.
    #[serde(default)]
    pub slam: SlamParams,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Config { path: path.to_path_buf(), message: describe(&text, &e) })?;
        cfg.validate().map_err(|e| Error::Config { path: path.to_path_buf(), message: e.to_string() })?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::Config { path: "<string>".into(), message: describe(text, &e) })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario()?.validate()?;
        self.noise.validate()?;
        self.signal.validate()?;
        self.slam.validate()?;
        if self.n_beams == 0 {
            return Err(Error::InvalidParameter("n_beams must be at least 1".into()));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let walls = self
            .walls
            .iter()
            .map(|w| Wall::new(Point2::new(w[0], w[1]), Point2::new(w[2], w[3])))
            .collect::<Result<Vec<_>>>()?;
        Ok(Scenario {
            walls,
            pas: self.pas.iter().map(|&p| p.into()).collect(),
            waypoints: self.waypoints.iter().map(|&p| p.into()).collect(),
            step_length: self.step_length,
            sample_period: self.sample_period,
        })
    }

    /// Filter parameters with the measurement model taken from `noise`.
    pub fn slam_params(&self) -> SlamParams {
        SlamParams {
            p_detect: self.noise.p_detect,
            mu_false: self.noise.mu_false,
            toa_sigma: self.noise.toa_sigma,
            roi_radius: self.noise.roi_radius,
            ..self.slam
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }
}

fn describe(text: &str, err: &toml::de::Error) -> String {
    let msg = err.message().trim();
    match err.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {msg}")
        }
        None => msg.to_string(),
    }
}
