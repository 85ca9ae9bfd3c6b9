//! Pipeline configuration, loaded from TOML. Every field has a default and
//! unknown keys are rejected.
//!
//! ```toml
//! resolution = 0.2
//! margin = 5.0
//! sync_tolerance = 0.005
//! accumulation = "fused"      # or "per_agent"
//! refine_with_classes = true
//! filtered_stride = 10
//!
//! [segmentation]
//! h_ground = 0.2
//! s_max = 0.25
//! max_range = 80.0
//! sectors = 3600              # no wider than the azimuth step
//!
//! [background]
//! t_f = 30
//! t_o = 5
//! run_mode = "merged"         # or "sum"
//!
//! [dbscan]
//! min_pts = 4                 # eps defaults to 3 x resolution
//!
//! [evaluation]
//! gate = 2.0
//! zero_denominator = "one"    # or "zero"
//! include_static = false
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::background::BackgroundParams;
use crate::error::{Error, Result};
use crate::evaluation::EvalParams;
use crate::grid::DEFAULT_RESOLUTION;
use crate::observation::{ObservationParams, SegmentationParams};

/// How simultaneous observations of several agents enter the map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accumulation {
    /// Agents observed at the same time step are fused first; the map sees
    /// one observation per time step.
    #[default]
    Fused,
    /// Each agent's observation is appended to the cell histories on its own.
    PerAgent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DbscanParams {
    /// Neighborhood radius (m); three cells when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        DbscanParams { eps: None, min_pts: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Cell size (m).
    pub resolution: f64,
    /// Padding around the observed area (m).
    pub margin: f64,
    /// Frames of different agents closer than this share a time step (s).
    pub sync_tolerance: f64,
    pub accumulation: Accumulation,
    /// Use per-point classes from the frame files to split occupancy into
    /// immovable and movable evidence.
    pub refine_with_classes: bool,
    /// Write every n-th filtered grid; 0 writes none.
    pub filtered_stride: usize,
    /// Worker threads; all available cores when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub segmentation: SegmentationParams,
    pub observation: ObservationParams,
    pub background: BackgroundParams,
    pub dbscan: DbscanParams,
    pub evaluation: EvalParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            resolution: DEFAULT_RESOLUTION,
            margin: 5.0,
            sync_tolerance: 0.005,
            accumulation: Accumulation::Fused,
            refine_with_classes: true,
            filtered_stride: 10,
            threads: None,
            segmentation: SegmentationParams::default(),
            observation: ObservationParams::default(),
            background: BackgroundParams::default(),
            dbscan: DbscanParams::default(),
            evaluation: EvalParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, source: &Path) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::parse(source, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn eps(&self) -> f64 {
        self.dbscan.eps.unwrap_or(3.0 * self.resolution)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |what: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{what} must be positive, got {v}")))
            }
        };
        positive("resolution", self.resolution)?;
        positive("eps", self.eps())?;
        positive("gate", self.evaluation.gate)?;
        if !(self.margin >= 0.0) {
            return Err(Error::InvalidParameter("margin must be non-negative".into()));
        }
        if !(self.sync_tolerance >= 0.0) {
            return Err(Error::InvalidParameter("sync_tolerance must be non-negative".into()));
        }
        if self.dbscan.min_pts == 0 {
            return Err(Error::InvalidParameter("min_pts must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter("threads must be at least 1".into()));
        }
        self.segmentation.validate()?;
        self.observation.validate()?;
        self.background.validate()
    }
}

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("cannot start {n} threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::RunMode;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = PipelineConfig::from_toml("", Path::new("c.toml")).unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!((cfg.background.t_f, cfg.background.t_o), (30, 5));
        assert!((cfg.eps() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = PipelineConfig::default();
        let back = PipelineConfig::from_toml(&cfg.to_toml(), Path::new("c.toml")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let text = "resolution = 0.5\n[background]\nt_f = 12\nrun_mode = \"sum\"\n[dbscan]\neps = 1.0\n";
        let cfg = PipelineConfig::from_toml(text, Path::new("c.toml")).unwrap();
        assert_eq!(cfg.resolution, 0.5);
        assert_eq!((cfg.background.t_f, cfg.background.t_o), (12, 5));
        assert_eq!(cfg.background.run_mode, RunMode::Sum);
        assert_eq!(cfg.eps(), 1.0);
        assert_eq!(cfg.dbscan.min_pts, 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["resolutoin = 0.2\n", "[background]\nt_x = 3\n", "[nope]\n"] {
            assert!(PipelineConfig::from_toml(text, Path::new("c.toml")).is_err(), "{text}");
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in ["resolution = -1.0\n", "[dbscan]\nmin_pts = 0\n", "[background]\nsmoothing_window = 2\n"] {
            assert!(PipelineConfig::from_toml(text, Path::new("c.toml")).is_err(), "{text}");
        }
    }
}
