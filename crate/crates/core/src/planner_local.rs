//! Bounded-leg A*: cheapest anchor path using only hops no longer than
//! `h_max` and anchors within `r_max` of the tether hub.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point3;
use crate::scalar::{cmp_real, Real};
use crate::scenegraph::{SceneEdge, SceneGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct TetherConstraint<T> {
    pub hub: Point3<T>,
    pub r_max: T,
}

impl<T: Real> TetherConstraint<T> {
    pub fn new(hub: Point3<T>, r_max: T) -> Self {
        Self { hub, r_max }
    }

    #[inline]
    pub fn allows(&self, p: Point3<T>) -> bool {
        p.distance(self.hub) <= self.r_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// `d + lambda * loss`, searched with the straight-line heuristic.
    #[default]
    DistancePlusLoss,
    /// `loss` alone, searched with a zero heuristic.
    LossOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct CostModel<T> {
    /// Meters per unit of loss.
    pub lambda: T,
    pub mode: CostMode,
}

impl<T: Real> Default for CostModel<T> {
    fn default() -> Self {
        Self {
            lambda: T::lit(10.0),
            mode: CostMode::DistancePlusLoss,
        }
    }
}

impl<T: Real> CostModel<T> {
    #[inline]
    pub fn edge_cost(&self, e: &SceneEdge<T>) -> T {
        match self.mode {
            CostMode::DistancePlusLoss => e.d + self.lambda * e.loss,
            CostMode::LossOnly => e.loss,
        }
    }

    #[inline]
    fn heuristic(&self, p: Point3<T>, goal: Point3<T>) -> T {
        match self.mode {
            // Shrunk a hair so rounding in the sqrt can never make it overestimate.
            CostMode::DistancePlusLoss => p.distance(goal) * T::lit(1.0 - 1e-9),
            CostMode::LossOnly => T::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct HopPlan<T> {
    /// Start first, goal last.
    pub anchors: Vec<usize>,
    pub cost: T,
    /// `hops[i]` is the length of the hop `anchors[i] -> anchors[i + 1]`.
    pub hops: Vec<T>,
}

impl<T: Real> HopPlan<T> {
    pub fn start(&self) -> usize {
        self.anchors[0]
    }

    pub fn goal(&self) -> usize {
        *self.anchors.last().expect("plans are never empty")
    }

    pub fn hop_count(&self) -> usize {
        self.anchors.len() - 1
    }

    /// Checks the plan against the graph and limits without re-planning.
    pub fn satisfies(&self, graph: &SceneGraph<T>, h_max: T, tether: &TetherConstraint<T>) -> bool {
        if self.anchors.is_empty() || self.hops.len() + 1 != self.anchors.len() {
            return false;
        }
        let within = self
            .anchors
            .iter()
            .all(|&id| graph.anchor(id).is_some_and(|a| tether.allows(a.position)));
        let linked = self.anchors.windows(2).zip(&self.hops).all(|(w, &h)| {
            graph
                .edge(w[0], w[1])
                .is_some_and(|e| e.d == h && e.d <= h_max)
        });
        within && linked
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("NoPath: anchor {goal} unreachable from {start} under hop and tether limits")]
    NoPath { start: usize, goal: usize },
    #[error("GoalOutsideTether: goal anchor {0} is beyond tether reach of the hub")]
    GoalOutsideTether(usize),
    #[error("StartOutsideTether: start anchor {0} is beyond tether reach of the hub")]
    StartOutsideTether(usize),
    #[error("UnknownAnchor: anchor {0} is not in the scene graph")]
    UnknownAnchor(usize),
}

impl PlanError {
    /// Short machine-readable name.
    pub fn name(&self) -> &'static str {
        match self {
            Self::NoPath { .. } => "NoPath",
            Self::GoalOutsideTether(_) => "GoalOutsideTether",
            Self::StartOutsideTether(_) => "StartOutsideTether",
            Self::UnknownAnchor(_) => "UnknownAnchor",
        }
    }
}

#[derive(Clone, Copy)]
struct Open<T> {
    f: T,
    id: usize,
    slot: usize,
}

impl<T: Real> PartialEq for Open<T> {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl<T: Real> Eq for Open<T> {}
impl<T: Real> PartialOrd for Open<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T: Real> Ord for Open<T> {
    // Reversed: the heap pops the lowest (f, id).
    fn cmp(&self, o: &Self) -> Ordering {
        cmp_real(&o.f, &self.f).then(o.id.cmp(&self.id))
    }
}

/// Minimum-cost path from `start` to `goal` over edges with `d <= h_max`
/// whose endpoints lie within the tether radius. Ties on `f` go to the lower
/// anchor id, so identical inputs give identical plans.
pub fn bounded_leg_astar<T: Real>(
    graph: &SceneGraph<T>,
    start: usize,
    goal: usize,
    h_max: T,
    tether: &TetherConstraint<T>,
    cost: &CostModel<T>,
) -> Result<HopPlan<T>, PlanError> {
    let s_slot = graph.slot(start).ok_or(PlanError::UnknownAnchor(start))?;
    let g_slot = graph.slot(goal).ok_or(PlanError::UnknownAnchor(goal))?;
    if !tether.allows(graph.vertex_at(s_slot).position) {
        return Err(PlanError::StartOutsideTether(start));
    }
    let goal_pos = graph.vertex_at(g_slot).position;
    if !tether.allows(goal_pos) {
        return Err(PlanError::GoalOutsideTether(goal));
    }

    let n = graph.len();
    let mut g = vec![T::infinity(); n];
    let mut parent = vec![usize::MAX; n];
    let mut inside: Vec<Option<bool>> = vec![None; n];
    let mut allowed = |slot: usize| {
        *inside[slot].get_or_insert_with(|| tether.allows(graph.vertex_at(slot).position))
    };
    let mut heap = BinaryHeap::new();
    g[s_slot] = T::zero();
    heap.push(Open {
        f: cost.heuristic(graph.vertex_at(s_slot).position, goal_pos),
        id: start,
        slot: s_slot,
    });

    while let Some(Open { f, slot, .. }) = heap.pop() {
        let h = cost.heuristic(graph.vertex_at(slot).position, goal_pos);
        if f > g[slot] + h {
            continue; // stale entry
        }
        if slot == g_slot {
            return Ok(reconstruct_plan(graph, &parent, s_slot, g_slot, g[g_slot]));
        }
        for e in graph.out_edges_at(slot) {
            if e.d > h_max {
                continue;
            }
            let to = graph.slot(e.to).expect("edge targets exist");
            if !allowed(to) {
                continue;
            }
            let cand = g[slot] + cost.edge_cost(e);
            if cand < g[to] {
                g[to] = cand;
                parent[to] = slot;
                heap.push(Open {
                    f: cand + cost.heuristic(graph.vertex_at(to).position, goal_pos),
                    id: e.to,
                    slot: to,
                });
            }
        }
    }
    Err(PlanError::NoPath { start, goal })
}

fn reconstruct_plan<T: Real>(
    graph: &SceneGraph<T>,
    parent: &[usize],
    s_slot: usize,
    g_slot: usize,
    total: T,
) -> HopPlan<T> {
    let mut slots = vec![g_slot];
    while *slots.last().unwrap() != s_slot {
        slots.push(parent[*slots.last().unwrap()]);
    }
    slots.reverse();
    let anchors: Vec<usize> = slots.iter().map(|&s| graph.vertex_at(s).id).collect();
    let hops = anchors
        .windows(2)
        .map(|w| graph.edge(w[0], w[1]).expect("path follows edges").d)
        .collect();
    HopPlan {
        anchors,
        cost: total,
        hops,
    }
}

/// Independent searches for each robot toward a shared goal.
pub fn plan_team<T: Real>(
    graph: &SceneGraph<T>,
    starts: &[usize],
    goal: usize,
    h_max: T,
    tether: &TetherConstraint<T>,
    cost: &CostModel<T>,
) -> Vec<Result<HopPlan<T>, PlanError>> {
    starts
        .par_iter()
        .map(|&s| bounded_leg_astar(graph, s, goal, h_max, tether, cost))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchors::AnchorPoint;
    use crate::geometry::Vec3;
    use crate::scenegraph::{build_graph, GraphOptions};

    fn anchor(id: usize, x: f64, y: f64, r: f64) -> AnchorPoint<f64> {
        AnchorPoint {
            id,
            position: Vec3::new(x, y, 0.0),
            normal: Vec3::axis(2),
            flatness: 0.0,
            flatness_norm: 0.0,
            height_risk: r,
            r,
        }
    }

    fn open_graph(a: &[AnchorPoint<f64>], radius: f64) -> SceneGraph<f64> {
        build_graph(a, radius, &GraphOptions { l_base: 0.0, max_out_degree: None }).unwrap()
    }

    #[test]
    fn chain() {
        let g = open_graph(&[anchor(0, 0.0, 0.0, 0.0), anchor(1, 1.0, 0.0, 0.0), anchor(2, 2.0, 0.0, 0.0)], 1.5);
        let t = TetherConstraint::new(Vec3::new(1.0, 0.0, 0.0), 5.0);
        let p = bounded_leg_astar(&g, 0, 2, 1.5, &t, &CostModel::default()).unwrap();
        assert_eq!(p.anchors, vec![0, 1, 2]);
        assert_eq!(p.cost, 2.0);
        assert_eq!(p.hops, vec![1.0, 1.0]);
        assert!(p.satisfies(&g, 1.5, &t));
    }

    #[test]
    fn start_equals_goal() {
        let g = open_graph(&[anchor(0, 0.0, 0.0, 0.0), anchor(1, 1.0, 0.0, 0.0)], 1.5);
        let t = TetherConstraint::new(Vec3::zero(), 5.0);
        let p = bounded_leg_astar(&g, 1, 1, 1.5, &t, &CostModel::default()).unwrap();
        assert_eq!(p.anchors, vec![1]);
        assert_eq!(p.cost, 0.0);
    }

    #[test]
    fn errors() {
        let g = open_graph(&[anchor(0, 0.0, 0.0, 0.0), anchor(1, 1.0, 0.0, 0.0), anchor(2, 9.0, 0.0, 0.0)], 10.0);
        let t = TetherConstraint::new(Vec3::zero(), 5.0);
        let c = CostModel::default();
        assert_eq!(bounded_leg_astar(&g, 0, 2, 10.0, &t, &c), Err(PlanError::GoalOutsideTether(2)));
        assert_eq!(bounded_leg_astar(&g, 2, 0, 10.0, &t, &c), Err(PlanError::StartOutsideTether(2)));
        assert_eq!(bounded_leg_astar(&g, 0, 5, 10.0, &t, &c), Err(PlanError::UnknownAnchor(5)));
        assert_eq!(bounded_leg_astar(&g, 0, 1, 0.5, &t, &c), Err(PlanError::NoPath { start: 0, goal: 1 }));
    }

    #[test]
    fn loss_only_prefers_safe_detour() {
        // direct hop lands on the risky goal either way; the middle choice differs
        let a = [
            anchor(0, 0.0, 0.0, 0.0),
            anchor(1, 1.0, 0.0, 0.9),
            anchor(2, 1.0, 1.5, 0.1),
            anchor(3, 2.0, 0.0, 0.2),
        ];
        let g = open_graph(&a, 1.9);
        let t = TetherConstraint::new(Vec3::new(1.0, 0.0, 0.0), 5.0);
        let loss = CostModel { lambda: 10.0, mode: CostMode::LossOnly };
        let p = bounded_leg_astar(&g, 0, 3, 1.9, &t, &loss).unwrap();
        assert_eq!(p.anchors, vec![0, 2, 3]);
        assert!((p.cost - 0.3).abs() < 1e-15);
        let short = CostModel { lambda: 0.0, mode: CostMode::DistancePlusLoss };
        assert_eq!(bounded_leg_astar(&g, 0, 3, 1.9, &t, &short).unwrap().anchors, vec![0, 1, 3]);
    }
}
