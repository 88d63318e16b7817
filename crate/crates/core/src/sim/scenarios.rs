//! Ready-made mission setups on trenched flat ground.

use super::mission::MissionSetup;
use super::terrain::{trenched_ground, GridFrame};
use crate::planner_global::{Cell, GlobalGrid};

/// Trenches this wide cannot be crossed with 2 m hops.
pub const TRENCH_WIDTH: f64 = 3.0;
const MARGIN: f64 = 3.0;
const SPACING: f64 = 0.25;

fn setup(cell_size: f64, width: usize, height: usize, start: Cell, goal: Cell, trenches: &[(Cell, Cell)]) -> MissionSetup {
    let frame = GridFrame::new((0.0, 0.0), cell_size);
    MissionSetup {
        terrain: trenched_ground(&frame, width, height, trenches, TRENCH_WIDTH, MARGIN, SPACING),
        frame,
        grid: GlobalGrid::new(width, height, cell_size, start, goal),
    }
}

/// 4 x 5 cells; a crevasse between (1, 2) and (1, 3) cuts the straight route
/// from (1, 1) to (1, 3).
pub fn crevasse(cell_size: f64) -> MissionSetup {
    setup(cell_size, 4, 5, Cell::new(1, 1), Cell::new(1, 3), &[(Cell::new(1, 2), Cell::new(1, 3))])
}

/// 3 x 3 cells; the start (1, 1) is ringed by trenches, so the goal (2, 2) is out of reach.
pub fn box_canyon(cell_size: f64) -> MissionSetup {
    let c = Cell::new(1, 1);
    let ring = [Cell::new(1, 0), Cell::new(1, 2), Cell::new(0, 1), Cell::new(2, 1)].map(|n| (c, n));
    setup(cell_size, 3, 3, c, Cell::new(2, 2), &ring)
}

/// Two open cells side by side, start west, goal east.
pub fn open_ground(cell_size: f64) -> MissionSetup {
    setup(cell_size, 2, 1, Cell::new(0, 0), Cell::new(1, 0), &[])
}

/// Looks a scenario up by name.
pub fn by_name(name: &str, cell_size: f64) -> Option<MissionSetup> {
    match name {
        "crevasse" => Some(crevasse(cell_size)),
        "box-canyon" => Some(box_canyon(cell_size)),
        "open-ground" => Some(open_ground(cell_size)),
        _ => None,
    }
}

pub const NAMES: [&str; 3] = ["crevasse", "box-canyon", "open-ground"];
