//! Kinematic hop gait: robots hop one at a time in cyclic order while the
//! rest stay gripped. A hop teleports the robot to its next anchor.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::log::{EventKind, MissionLog};
use crate::geometry::Vec3;
use crate::planner_local::HopPlan;
use crate::scalar::cmp_real;
use crate::scenegraph::SceneGraph;

type V = Vec3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    /// 1-based.
    pub id: usize,
    pub position: V,
    pub anchored: bool,
    /// Anchor id in the scene graph the robot last planned on.
    pub anchor: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamState {
    pub robots: Vec<RobotState>,
    /// Tether junction, kept at the centroid of the robot positions.
    pub hub: V,
    pub r_max: f64,
    /// Seconds per hop.
    pub hop_duration: f64,
    pub clock: f64,
    /// Index into `robots` of the robot that hops next.
    pub next: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaitError {
    #[error("TetherViolation: robot {robot} would end {distance} m from the hub (limit {r_max} m)")]
    TetherViolation { robot: usize, distance: f64, r_max: f64 },
    #[error("Stranded: robot {robot} found no anchor it could grip")]
    Stranded { robot: usize },
    #[error("team needs 1 to 4 robots, got {0}")]
    TeamSize(usize),
    #[error("{0} plans given for {1} robots")]
    PlanCount(usize, usize),
}

impl TeamState {
    /// All robots gripped at `positions`; fails if any is out of tether reach.
    pub fn new(positions: &[V], r_max: f64, hop_duration: f64) -> Result<Self, GaitError> {
        if positions.is_empty() || positions.len() > 4 {
            return Err(GaitError::TeamSize(positions.len()));
        }
        let robots: Vec<RobotState> = positions
            .iter()
            .enumerate()
            .map(|(i, &p)| RobotState {
                id: i + 1,
                position: p,
                anchored: true,
                anchor: None,
            })
            .collect();
        let team = Self {
            hub: centroid(&robots),
            robots,
            r_max,
            hop_duration,
            clock: 0.0,
            next: 0,
        };
        team.check_tether()?;
        Ok(team)
    }

    /// The x-configuration start: robots 1-3 at (1,1,0), (1,0,0), (0,1,0)
    /// and robot 4 at the origin, scaled by `side` and shifted by `origin`.
    pub fn square_layout(origin: V, side: f64) -> [V; 4] {
        [(1.0, 1.0), (1.0, 0.0), (0.0, 1.0), (0.0, 0.0)]
            .map(|(x, y)| origin + V::new(x * side, y * side, 0.0))
    }

    pub fn anchored_count(&self) -> usize {
        self.robots.iter().filter(|r| r.anchored).count()
    }

    /// Every anchored robot within `r_max` of the hub.
    pub fn check_tether(&self) -> Result<(), GaitError> {
        for r in self.robots.iter().filter(|r| r.anchored) {
            let distance = r.position.distance(self.hub);
            if distance > self.r_max {
                return Err(GaitError::TetherViolation {
                    robot: r.id,
                    distance,
                    r_max: self.r_max,
                });
            }
        }
        Ok(())
    }

    /// Whether moving robot `index` to `target` keeps the tether limits, both
    /// for the target against the current hub and for everyone against the new hub.
    pub fn hop_keeps_tether(&self, index: usize, target: V) -> bool {
        self.hop_violation(index, target).is_none()
    }

    fn hop_violation(&self, index: usize, target: V) -> Option<GaitError> {
        let id = self.robots[index].id;
        let d = target.distance(self.hub);
        if d > self.r_max {
            return Some(GaitError::TetherViolation { robot: id, distance: d, r_max: self.r_max });
        }
        let mut moved = self.robots.clone();
        moved[index].position = target;
        let hub = centroid(&moved);
        moved.iter().find_map(|r| {
            let d = r.position.distance(hub);
            (d > self.r_max).then_some(GaitError::TetherViolation { robot: r.id, distance: d, r_max: self.r_max })
        })
    }
}

fn centroid(robots: &[RobotState]) -> V {
    V::centroid(robots.iter().map(|r| r.position)).expect("teams are never empty")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitConfig {
    pub h_max: f64,
    /// Grip failure probability is `min(1, failure_beta * r)`.
    pub failure_beta: f64,
    /// Hops a robot may make after failed grips before it counts as stranded.
    pub max_retries: usize,
}

impl Default for GaitConfig {
    fn default() -> Self {
        Self {
            h_max: 2.0,
            failure_beta: 0.5,
            max_retries: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    /// Robot `index` gripped `anchor` after `retries` failed grips.
    Hopped { index: usize, anchor: usize, retries: usize },
    /// No robot had a hop left in its plan.
    Idle,
}

fn next_target(robot: &RobotState, plan: Option<&HopPlan<f64>>) -> Option<usize> {
    let plan = plan?;
    let at = plan.anchors.iter().position(|&a| Some(a) == robot.anchor)?;
    plan.anchors.get(at + 1).copied()
}

/// Advances the next robot in cyclic order that still has a hop to make.
///
/// `plans[i]` belongs to `team.robots[i]`; robots without a plan, or already
/// at its end, are passed over. A failed grip is followed by hops to the
/// lowest-loss free neighbour within `h_max` and tether reach until one holds.
pub fn step_gait<R: Rng>(
    team: &mut TeamState,
    plans: &[Option<&HopPlan<f64>>],
    graph: &SceneGraph<f64>,
    cfg: &GaitConfig,
    rng: &mut R,
    log: &mut MissionLog,
) -> Result<StepOutcome, GaitError> {
    let n = team.robots.len();
    if plans.len() != n {
        return Err(GaitError::PlanCount(plans.len(), n));
    }
    for _ in 0..n {
        let index = team.next;
        team.next = (index + 1) % n;
        let Some(target) = next_target(&team.robots[index], plans[index]) else {
            continue;
        };
        return hop(team, index, target, graph, cfg, rng, log);
    }
    Ok(StepOutcome::Idle)
}

fn hop<R: Rng>(
    team: &mut TeamState,
    index: usize,
    target: usize,
    graph: &SceneGraph<f64>,
    cfg: &GaitConfig,
    rng: &mut R,
    log: &mut MissionLog,
) -> Result<StepOutcome, GaitError> {
    let robot_id = team.robots[index].id;
    let position_of = |id: usize| graph.anchor(id).map(|a| a.position);
    let target_pos = position_of(target).ok_or(GaitError::Stranded { robot: robot_id })?;
    if let Some(e) = team.hop_violation(index, target_pos) {
        return Err(e);
    }
    let from = team.robots[index].position;
    let mut occupied: BTreeSet<usize> = team.robots.iter().filter_map(|r| r.anchor).collect();
    team.robots[index].anchored = false;
    log.record(
        EventKind::Hop { robot: robot_id, from, to: target_pos, d: from.distance(target_pos) },
        team,
    );
    team.clock += team.hop_duration;

    let mut current = target;
    let mut retries = 0;
    loop {
        let here = position_of(current).expect("candidates come from the graph");
        let r = graph.anchor(current).map_or(0.0, |a| a.r);
        let p_fail = (cfg.failure_beta * r).clamp(0.0, 1.0);
        let u: f64 = rng.random();
        if u >= p_fail {
            let robot = &mut team.robots[index];
            robot.position = here;
            robot.anchored = true;
            robot.anchor = Some(current);
            team.hub = centroid(&team.robots);
            team.check_tether()?;
            log.record(EventKind::GripSuccess { robot: robot_id, position: here }, team);
            return Ok(StepOutcome::Hopped { index, anchor: current, retries });
        }
        log.record(EventKind::GripFailure { robot: robot_id, position: here }, team);
        occupied.insert(current);
        if retries == cfg.max_retries {
            return Err(GaitError::Stranded { robot: robot_id });
        }
        let next = graph
            .out_edges(current)
            .iter()
            .filter(|e| e.d <= cfg.h_max && !occupied.contains(&e.to))
            .filter(|e| team.hop_keeps_tether(index, position_of(e.to).expect("edge target")))
            .min_by(|a, b| cmp_real(&a.loss, &b.loss).then(cmp_real(&a.d, &b.d)).then(a.to.cmp(&b.to)))
            .ok_or(GaitError::Stranded { robot: robot_id })?;
        let to = position_of(next.to).expect("edge target");
        log.record(EventKind::Retry { robot: robot_id, from: here, to, d: next.d }, team);
        team.clock += team.hop_duration;
        retries += 1;
        current = next.to;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchors::AnchorPoint;
    use crate::scenegraph::{build_graph, GraphOptions};
    use rand::SeedableRng;

    #[test]
    fn layout_matches_x_configuration() {
        let p = TeamState::square_layout(V::zero(), 1.0);
        assert_eq!(p[3], V::zero());
        assert_eq!(p[0], V::new(1.0, 1.0, 0.0));
        let team = TeamState::new(&p, 1.0, 2.5).unwrap();
        assert_eq!(team.hub, V::new(0.5, 0.5, 0.0));
        assert!(TeamState::new(&p, 0.5, 2.5).is_err());
    }

    #[test]
    fn idle_when_no_plans() {
        let p = TeamState::square_layout(V::zero(), 1.0);
        let mut team = TeamState::new(&p, 2.0, 2.5).unwrap();
        let a: Vec<_> = p
            .iter()
            .enumerate()
            .map(|(i, &q)| AnchorPoint { id: i, position: q, normal: V::axis(2), flatness: 0.0, flatness_norm: 0.0, height_risk: 0.0, r: 0.0 })
            .collect();
        let g = build_graph(&a, 2.0, &GraphOptions::default()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut log = MissionLog::new();
        let out = step_gait(&mut team, &[None, None, None, None], &g, &GaitConfig::default(), &mut rng, &mut log).unwrap();
        assert_eq!(out, StepOutcome::Idle);
        assert_eq!(team.clock, 0.0);
        assert!(log.events.is_empty());
    }
}
