//! Closed mission loop: scan, build the scene, plan each robot, hop, and
//! turn local dead ends into walls for the global planner.
//!
//! The team works in rounds. Each round scans from above the hub, aims every
//! robot at the anchor nearest to its formation slot a stride toward the next
//! cell, and hops until no robot has a hop left. A cell counts as reached once
//! the hub is within a quarter cell of its centre (horizontally). When the hub
//! stops closing on the next cell for `stall_rounds` rounds, the way is
//! reported blocked.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::gait::{step_gait, GaitError, StepOutcome, TeamState};
use super::lidar::Lidar;
use super::log::{EventKind, MissionLog, MissionStatus, PlanSummary};
use super::terrain::GridFrame;
use crate::anchors::AnchorPoint;
use crate::config::PipelineConfig;
use crate::geometry::Vec3;
use crate::pipeline::{self, PipelineError};
use crate::planner_global::{Cell, GlobalGrid, GlobalPlanError, GlobalPlanner, Route};
use crate::planner_local::{bounded_leg_astar, HopPlan, PlanError, TetherConstraint};
use crate::reconstruct::TriangleMesh;
use crate::scalar::cmp_real;
use crate::scenegraph::{SceneGraph, SceneGraphError};

type V = Vec3<f64>;

#[derive(Debug, Clone)]
pub struct MissionSetup {
    pub terrain: TriangleMesh<f64>,
    pub frame: GridFrame,
    pub grid: GlobalGrid,
}

#[derive(Debug, Clone)]
pub struct MissionOutcome {
    pub status: MissionStatus,
    pub log: MissionLog,
    pub team: TeamState,
    /// Last route from the global planner, if any.
    pub route: Option<Route>,
    pub scans: usize,
    pub hops: usize,
}

#[derive(Debug, Error)]
pub enum MissionError {
    #[error(transparent)]
    Global(#[from] GlobalPlanError),
    #[error(transparent)]
    Team(#[from] GaitError),
    #[error("no terrain under the start formation at ({0}, {1})")]
    NoGround(f64, f64),
}

fn horizontal(v: V) -> V {
    V::new(v.x, v.y, 0.0)
}

fn scan_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn next_target(plan: &HopPlan<f64>, at: Option<usize>) -> Option<usize> {
    let i = plan.anchors.iter().position(|&a| Some(a) == at)?;
    plan.anchors.get(i + 1).copied()
}

struct Mission<'a> {
    cfg: &'a PipelineConfig,
    frame: GridFrame,
    lidar: Lidar,
    team: TeamState,
    offsets: Vec<V>,
    log: MissionLog,
    rng: ChaCha8Rng,
    scans: usize,
    hops: usize,
}

enum Round {
    Continue,
    Done(MissionStatus),
}

impl Mission<'_> {
    fn distance_to(&self, cell: Cell) -> f64 {
        let (x, y) = self.frame.center(cell);
        horizontal(self.team.hub).distance(V::new(x, y, 0.0))
    }

    fn scene(&mut self, cell: Cell) -> Result<(SceneGraph<f64>, usize), PipelineError> {
        let mut cfg = self.cfg.clone();
        cfg.reconstruct.dims = self.cfg.mission.scene_dims;
        cfg.normals.voxel = self.cfg.mission.voxel;
        let up = V::from(cfg.anchors.up).normalized().unwrap_or(V::axis(2));
        let pose = self.team.hub + up * cfg.mission.sensor_height;
        let cloud = self.lidar.scan(pose, &cfg.lidar, scan_seed(cfg.seed, self.scans));
        self.scans += 1;
        let points = cloud.points.len();
        let built = (|| {
            let (samples, _) = pipeline::normals(&cloud, &cfg)?;
            let recon = pipeline::surface(&samples, &cfg)?;
            let surface = pipeline::supported_surface(&recon, &samples, &cfg);
            let mut anchors = pipeline::select_anchors(&surface, &cfg)?;
            let base = surface.vertices.len();
            let scene_anchors = anchors.len();
            // the robots' current grips join the graph so plans can start there
            for (k, r) in self.team.robots.iter().enumerate() {
                anchors.push(AnchorPoint {
                    id: base + k,
                    position: r.position,
                    normal: up,
                    flatness: 0.0,
                    flatness_norm: 0.0,
                    height_risk: 0.0,
                    r: 0.0,
                });
            }
            let graph = pipeline::graph(&anchors, &cfg)?;
            Ok::<_, PipelineError>((graph, base, scene_anchors))
        })();
        match built {
            Ok((graph, base, scene_anchors)) => {
                self.log.record(
                    EventKind::Scan { cell, points, anchors: scene_anchors, edges: graph.edges().len() },
                    &self.team,
                );
                Ok((graph, base))
            }
            Err(e) => {
                self.log.record(EventKind::Scan { cell, points, anchors: 0, edges: 0 }, &self.team);
                Err(e)
            }
        }
    }

    /// Goal anchor per robot: nearest free scene anchor within the planning
    /// radius to the robot's formation slot, or where it stands if that is nearer.
    ///
    /// The formation is led along the straight line between the two cell
    /// centres: one stride past the hub's projection onto it, never beyond `toward`.
    fn goals(&self, graph: &SceneGraph<f64>, base: usize, from: Cell, toward: Cell) -> Vec<usize> {
        let m = &self.cfg.mission;
        let hub = self.team.hub;
        let centre = |c: Cell| {
            let (x, y) = self.frame.center(c);
            V::new(x, y, hub.z)
        };
        let (a, b) = (centre(from), centre(toward));
        let along = b - a;
        let len = along.norm();
        let s = if len > 0.0 { ((hub - a).dot(along) / len).clamp(0.0, len) } else { 0.0 };
        let lead = a + along.normalized().map_or(V::zero(), |d| d * (s + m.stride).min(len));
        let candidates: Vec<&AnchorPoint<f64>> = graph
            .vertices()
            .iter()
            .filter(|a| a.id < base && a.position.distance(hub) <= m.plan_radius)
            .collect();
        let mut taken = Vec::new();
        let mut goals = Vec::new();
        for (k, r) in self.team.robots.iter().enumerate() {
            let slot = horizontal(lead + self.offsets[k]);
            let key = |p: V| horizontal(p).distance(slot);
            let best = candidates
                .iter()
                .filter(|a| !taken.contains(&a.id))
                .min_by(|a, b| cmp_real(&key(a.position), &key(b.position)).then(a.id.cmp(&b.id)));
            let goal = match best {
                Some(a) if key(a.position) < key(r.position) => a.id,
                _ => base + k,
            };
            taken.push(goal);
            goals.push(goal);
        }
        goals
    }

    fn round(&mut self, current: Cell, toward: Cell) -> Round {
        let (graph, base) = match self.scene(current) {
            Ok(s) => s,
            Err(e) => {
                let reason = match &e {
                    PipelineError::Graph(SceneGraphError::NoEdges(_)) => "NoEdges".to_string(),
                    e => format!("{}: {e}", e.name()),
                };
                self.log.record(EventKind::SceneFailure { cell: current, reason }, &self.team);
                return Round::Continue;
            }
        };
        for (k, r) in self.team.robots.iter_mut().enumerate() {
            r.anchor = Some(base + k);
        }
        let goals = self.goals(&graph, base, current, toward);
        // goals sit within plan_radius; paths may use the full tether so a robot
        // left further out can still find its way back
        let tether = TetherConstraint::new(self.team.hub, self.team.r_max);
        let cost = self.cfg.cost_model();
        let h_max = self.cfg.planner.h_max;
        let plans: Vec<Result<HopPlan<f64>, PlanError>> = goals
            .iter()
            .enumerate()
            .map(|(k, &goal)| bounded_leg_astar(&graph, base + k, goal, h_max, &tether, &cost))
            .collect();
        let summaries = plans
            .iter()
            .zip(&self.team.robots)
            .map(|(p, r)| match p {
                Ok(p) => PlanSummary {
                    robot: r.id,
                    status: "ok".into(),
                    cost: Some(p.cost),
                    path: p.anchors.iter().map(|&a| graph.anchor(a).expect("planned anchor").position).collect(),
                },
                Err(e) => PlanSummary { robot: r.id, status: e.name().into(), cost: None, path: Vec::new() },
            })
            .collect();
        self.log.record(EventKind::Plan { target_cell: toward, plans: summaries }, &self.team);

        let gait = self.cfg.gait_config();
        loop {
            if self.hops >= self.cfg.mission.hop_budget {
                return Round::Done(MissionStatus::HopBudgetExhausted);
            }
            // only offer hops that land on a free anchor and keep the tether
            let usable: Vec<Option<&HopPlan<f64>>> = (0..self.team.robots.len())
                .map(|k| {
                    let plan = plans[k].as_ref().ok()?;
                    let to = next_target(plan, self.team.robots[k].anchor)?;
                    let free = self.team.robots.iter().all(|r| r.anchor != Some(to));
                    let pos = graph.anchor(to)?.position;
                    (free && self.team.hop_keeps_tether(k, pos)).then_some(plan)
                })
                .collect();
            match step_gait(&mut self.team, &usable, &graph, &gait, &mut self.rng, &mut self.log) {
                Ok(StepOutcome::Idle) => return Round::Continue,
                Ok(StepOutcome::Hopped { retries, .. }) => self.hops += 1 + retries,
                Err(GaitError::Stranded { robot }) => return Round::Done(MissionStatus::Stranded { robot }),
                Err(GaitError::TetherViolation { robot, .. }) => {
                    return Round::Done(MissionStatus::TetherViolation { robot })
                }
                Err(e) => unreachable!("plans match the team: {e}"),
            }
        }
    }
}

/// Runs the team from `grid.start` to `grid.goal` over `terrain`.
pub fn run_mission(setup: &MissionSetup, cfg: &PipelineConfig) -> Result<MissionOutcome, MissionError> {
    let frame = setup.frame;
    let grid = &setup.grid;
    let lidar = Lidar::new(&setup.terrain);

    let (sx, sy) = frame.center(grid.start);
    let side = cfg.mission.formation_side;
    let mut positions = TeamState::square_layout(V::new(sx - side / 2.0, sy - side / 2.0, 0.0), side);
    for p in &mut positions {
        // drop each robot onto the surface below its slot
        let top = setup.terrain.vertices.iter().map(|v| v.z).fold(0.0, f64::max) + 10.0;
        let t = lidar
            .bvh()
            .cast(V::new(p.x, p.y, top), V::new(0.0, 0.0, -1.0), f64::INFINITY)
            .ok_or(MissionError::NoGround(p.x, p.y))?;
        p.z = top - t;
    }
    let team = TeamState::new(&positions, cfg.planner.r_max, cfg.gait.hop_duration)?;
    let offsets = positions.iter().map(|&p| horizontal(p - team.hub)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut m = Mission {
        cfg,
        frame,
        lidar,
        team,
        offsets,
        log: MissionLog::new(),
        rng,
        scans: 0,
        hops: 0,
    };

    let mut planner = GlobalPlanner::new(grid.clone())?;
    let mut current = grid.start;
    let first = planner.plan_route(current);
    m.log.record(
        EventKind::Start {
            cell: current,
            goal: grid.goal,
            route: first.as_ref().map(|r| r.cells.clone()).unwrap_or_default(),
        },
        &m.team,
    );
    let mut route = match first {
        Ok(r) => Some(r),
        Err(GlobalPlanError::NoRoute { .. }) => None,
        Err(e) => return Err(e.into()),
    };

    let arrive = frame.cell_size / 4.0;
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    let status = loop {
        let Some(r) = &route else { break MissionStatus::NoRoute };
        let i = r.cells.iter().position(|&c| c == current).expect("routes start at the current cell");
        // cells are only entered on arrival, so being at the goal is success
        let Some(&toward) = r.cells.get(i + 1) else { break MissionStatus::Success };
        if best.is_infinite() {
            best = m.distance_to(toward);
        }
        if let Round::Done(s) = m.round(current, toward) {
            break s;
        }
        let d = m.distance_to(toward);
        if d <= arrive {
            current = toward;
            m.log.record(EventKind::CellReached { cell: current }, &m.team);
            best = f64::INFINITY;
            stalled = 0;
            continue;
        }
        if d < best - cfg.mission.progress_epsilon {
            best = d;
            stalled = 0;
        } else {
            stalled += 1;
        }
        if stalled >= cfg.mission.stall_rounds {
            m.log.record(EventKind::WallReport { a: current, b: toward }, &m.team);
            best = f64::INFINITY;
            stalled = 0;
            match planner.report_blocked(current, toward) {
                Ok(r) => {
                    m.log.record(EventKind::Reroute { route: r.cells.clone() }, &m.team);
                    route = Some(r);
                }
                Err(GlobalPlanError::NoRoute { .. }) => route = None,
                Err(e) => return Err(e.into()),
            }
        }
    };
    m.log.record(EventKind::End { status: status.clone() }, &m.team);
    Ok(MissionOutcome {
        status,
        log: m.log,
        team: m.team,
        route,
        scans: m.scans,
        hops: m.hops,
    })
}
