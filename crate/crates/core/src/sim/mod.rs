//! Simulated sensing and motion: LIDAR scans of synthetic terrain, the load
//! model, the hop gait and the closed mission loop.

pub mod gait;
pub mod lidar;
pub mod load;
pub mod log;
pub mod mission;
pub mod scenarios;
pub mod terrain;

pub use gait::{step_gait, GaitConfig, GaitError, RobotState, StepOutcome, TeamState};
pub use lidar::{simulate_scan, Bvh, Lidar, LidarConfig};
pub use load::{required_spines, LoadError, LoadModel};
pub use log::{Event, EventKind, MissionLog, MissionStatus, PlanSummary, TeamSnapshot};
pub use mission::{run_mission, MissionError, MissionOutcome, MissionSetup};
pub use terrain::GridFrame;
