//! JSON interchange between stages. Every document is pretty-printed with a
//! trailing newline; floats round-trip exactly.

use std::fs;
use std::path::Path;

use hopclimb::anchors::AnchorPoint;
use hopclimb::geometry::Vec3;
use hopclimb::planner_local::{CostModel, HopPlan};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Output of `plan-local`: one entry per robot, in `--start` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDocument {
    pub hub: Vec3<f64>,
    pub r_max: f64,
    pub h_max: f64,
    pub cost: CostModel<f64>,
    pub goal: usize,
    pub robots: Vec<RobotPlan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotPlan {
    pub start: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<HopPlan<f64>>,
    /// Error name when this robot has no plan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub type AnchorSet = Vec<AnchorPoint<f64>>;

pub fn to_string<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

pub fn write<T: Serialize>(path: &Path, doc: &T) -> Result<(), CliError> {
    fs::write(path, to_string(doc)).map_err(|e| CliError::write(path, e))
}

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(path, e))
}
