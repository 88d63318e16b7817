//! Static microspine load arithmetic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadModel {
    /// kg per robot.
    pub robot_mass: f64,
    /// kg per tether.
    pub tether_mass: f64,
    pub tether_count: u32,
    pub robot_count: u32,
    /// m/s^2; 3.7 is Mars.
    pub g: f64,
    /// Newtons one spine/asperity contact holds.
    pub spine_capacity: f64,
}

impl Default for LoadModel {
    fn default() -> Self {
        Self {
            robot_mass: 3.0,
            tether_mass: 0.15,
            tether_count: 4,
            robot_count: 4,
            g: 3.7,
            spine_capacity: 1.7,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoadError {
    #[error("at least one robot must share the load")]
    NoSharingRobots,
    #[error("load model parameters must be finite, masses and capacity positive, g non-negative")]
    InvalidModel,
}

impl LoadModel {
    pub fn validate(&self) -> Result<(), LoadError> {
        let ok = self.robot_mass > 0.0
            && self.tether_mass >= 0.0
            && self.g >= 0.0
            && self.spine_capacity > 0.0
            && [self.robot_mass, self.tether_mass, self.g, self.spine_capacity]
                .iter()
                .all(|v| v.is_finite());
        ok.then_some(()).ok_or(LoadError::InvalidModel)
    }

    /// kg.
    pub fn system_mass(&self) -> f64 {
        self.robot_count as f64 * self.robot_mass + self.tether_count as f64 * self.tether_mass
    }

    /// Newtons.
    pub fn system_weight(&self) -> f64 {
        self.system_mass() * self.g
    }
}

/// Spines that must be engaged on each of `sharing_robots` anchored robots.
pub fn required_spines(load: &LoadModel, sharing_robots: u32) -> Result<u64, LoadError> {
    if sharing_robots == 0 {
        return Err(LoadError::NoSharingRobots);
    }
    load.validate()?;
    let per_robot = load.system_weight() / sharing_robots as f64;
    Ok((per_robot / load.spine_capacity).ceil() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spine_counts() {
        let m = LoadModel::default();
        assert!((m.system_mass() - 12.6).abs() < 1e-12);
        assert!((m.system_weight() - 46.62).abs() < 1e-9);
        assert_eq!(required_spines(&m, 1), Ok(28));
        assert_eq!(required_spines(&m, 3), Ok(10));
        assert_eq!(required_spines(&LoadModel { g: 0.0, ..m }, 1), Ok(0));
        assert_eq!(required_spines(&m, 0), Err(LoadError::NoSharingRobots));
    }
}
