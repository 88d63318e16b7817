//! Pipeline configuration, read from TOML. Every field has a default and
//! unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anchors::{ScoreOptions, ScoreWeights};
use crate::geometry::{Vec3, DEFAULT_NORMAL_K};
use crate::planner_local::{CostMode, CostModel};
use crate::reconstruct::ReconstructOptions;
use crate::scenegraph::GraphOptions;
use crate::sim::{GaitConfig, LidarConfig, LoadModel};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config value: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalsConfig {
    pub k: usize,
    /// Thin the scan to one point per cube of this side first; 0 keeps every point.
    pub voxel: f64,
}

impl Default for NormalsConfig {
    fn default() -> Self {
        Self { k: DEFAULT_NORMAL_K, voxel: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    /// Lattice nodes along the longest axis (per axis, as an upper bound).
    pub dims: [usize; 3],
    pub padding: f64,
    pub screening_factor: f64,
    pub tol: f64,
    pub max_iterations: Option<usize>,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        let d = ReconstructOptions::<f64>::default();
        Self {
            dims: d.dims,
            padding: d.padding,
            screening_factor: d.screening_factor,
            tol: d.tol,
            max_iterations: d.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnchorsConfig {
    pub flatness_radius: f64,
    pub height_window: f64,
    pub weight_flatness: f64,
    pub weight_height: f64,
    pub keep_fraction: f64,
    /// When set, keep anchors with `r <= threshold` instead of a fraction.
    pub threshold: Option<f64>,
    /// Drop anchors farther than this from every scan sample; 0 disables.
    pub support_radius: f64,
    pub up: [f64; 3],
}

impl Default for AnchorsConfig {
    fn default() -> Self {
        let d = ScoreOptions::<f64>::default();
        Self {
            flatness_radius: d.flatness_radius,
            height_window: d.height_window,
            weight_flatness: d.weights.flatness,
            weight_height: d.weights.height,
            keep_fraction: 0.15,
            threshold: None,
            support_radius: 0.3,
            up: [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// Defaults to the planner's `h_max`.
    pub neighbor_radius: Option<f64>,
    /// 0 means uncapped.
    pub max_out_degree: usize,
    pub l_base: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            neighbor_radius: None,
            max_out_degree: 16,
            l_base: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub h_max: f64,
    pub r_max: f64,
    pub lambda: f64,
    pub mode: CostMode,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            h_max: 2.0,
            r_max: 3.0,
            lambda: 10.0,
            mode: CostMode::DistancePlusLoss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub cell_size: f64,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self { cell_size: 5.6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitSection {
    pub hop_duration: f64,
    pub failure_beta: f64,
    pub max_retries: usize,
}

impl Default for GaitSection {
    fn default() -> Self {
        let g = GaitConfig::default();
        Self {
            hop_duration: 2.5,
            failure_beta: g.failure_beta,
            max_retries: g.max_retries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionConfig {
    /// Hops, retries included, before the mission gives up.
    pub hop_budget: usize,
    /// Scanner height above the hub.
    pub sensor_height: f64,
    /// Side of the square robot formation.
    pub formation_side: f64,
    /// How far ahead of the hub each round aims the formation.
    pub stride: f64,
    /// Goal anchors are picked within this distance of the hub.
    pub plan_radius: f64,
    /// Rounds without the hub getting `progress_epsilon` closer to the next
    /// cell before the way is reported blocked.
    pub stall_rounds: usize,
    pub progress_epsilon: f64,
    /// Reconstruction lattice used for mission scans.
    pub scene_dims: [usize; 3],
    /// Scan thinning for mission scans, about one lattice spacing, so the
    /// dense patch under the sensor does not outweigh the rest of the scene.
    pub voxel: f64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            hop_budget: 600,
            sensor_height: 1.0,
            formation_side: 1.0,
            stride: 1.2,
            plan_radius: 2.0,
            stall_rounds: 3,
            progress_epsilon: 0.05,
            scene_dims: [64, 64, 64],
            voxel: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub normals: NormalsConfig,
    pub reconstruct: ReconstructConfig,
    pub anchors: AnchorsConfig,
    pub graph: GraphConfig,
    pub planner: PlannerConfig,
    pub global: GlobalConfig,
    pub lidar: LidarConfig,
    pub gait: GaitSection,
    pub load: LoadModel,
    pub mission: MissionConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.normals.voxel >= 0.0) || !(self.mission.voxel >= 0.0) {
            return bad("voxel sizes must be non-negative".into());
        }
        if self.normals.k < 3 {
            return bad(format!("normals.k must be at least 3, got {}", self.normals.k));
        }
        if self.reconstruct.dims.iter().any(|&d| d < 8) {
            return bad(format!("reconstruct.dims must each be at least 8, got {:?}", self.reconstruct.dims));
        }
        if !(self.reconstruct.tol > 0.0) || self.reconstruct.padding < 0.0 || self.reconstruct.screening_factor < 0.0 {
            return bad("reconstruct.tol must be positive; padding and screening_factor non-negative".into());
        }
        let a = &self.anchors;
        ScoreWeights::new(a.weight_flatness, a.weight_height).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(a.keep_fraction > 0.0 && a.keep_fraction <= 1.0) {
            return bad(format!("anchors.keep_fraction must be in (0, 1], got {}", a.keep_fraction));
        }
        if !(a.flatness_radius > 0.0 && a.height_window > 0.0) || a.support_radius < 0.0 {
            return bad("anchor radii must be positive".into());
        }
        if Vec3::from(a.up).normalized().is_none() {
            return bad("anchors.up must be non-zero".into());
        }
        let p = &self.planner;
        if !(p.h_max > 0.0 && p.r_max > 0.0 && p.lambda >= 0.0) {
            return bad("planner.h_max and r_max must be positive, lambda non-negative".into());
        }
        if self.graph.neighbor_radius.is_some_and(|r| !(r > 0.0)) {
            return bad("graph.neighbor_radius must be positive".into());
        }
        if !(self.global.cell_size > 0.0) {
            return bad("global.cell_size must be positive".into());
        }
        self.lidar.validate().map_err(ConfigError::Invalid)?;
        self.load.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.gait.hop_duration >= 0.0 && self.gait.failure_beta >= 0.0) {
            return bad("gait.hop_duration and failure_beta must be non-negative".into());
        }
        let m = &self.mission;
        if !(m.formation_side > 0.0 && m.stride > 0.0 && m.plan_radius > 0.0 && m.progress_epsilon >= 0.0 && m.sensor_height >= 0.0) {
            return bad("mission distances must be positive".into());
        }
        if m.stall_rounds == 0 || m.scene_dims.iter().any(|&d| d < 8) {
            return bad("mission.stall_rounds must be positive and scene_dims at least 8".into());
        }
        Ok(())
    }

    pub fn reconstruct_options(&self) -> ReconstructOptions<f64> {
        let r = &self.reconstruct;
        ReconstructOptions {
            dims: r.dims,
            padding: r.padding,
            screening_factor: r.screening_factor,
            tol: r.tol,
            max_iterations: r.max_iterations,
        }
    }

    pub fn score_options(&self) -> ScoreOptions<f64> {
        let a = &self.anchors;
        ScoreOptions {
            weights: ScoreWeights { flatness: a.weight_flatness, height: a.weight_height },
            flatness_radius: a.flatness_radius,
            height_window: a.height_window,
            up: a.up.into(),
        }
    }

    pub fn neighbor_radius(&self) -> f64 {
        self.graph.neighbor_radius.unwrap_or(self.planner.h_max)
    }

    pub fn graph_options(&self) -> GraphOptions<f64> {
        GraphOptions {
            l_base: self.graph.l_base,
            max_out_degree: (self.graph.max_out_degree > 0).then_some(self.graph.max_out_degree),
        }
    }

    pub fn cost_model(&self) -> CostModel<f64> {
        CostModel { lambda: self.planner.lambda, mode: self.planner.mode }
    }

    pub fn gait_config(&self) -> GaitConfig {
        GaitConfig {
            h_max: self.planner.h_max,
            failure_beta: self.gait.failure_beta,
            max_retries: self.gait.max_retries,
        }
    }
}
