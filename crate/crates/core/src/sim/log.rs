//! Mission event log, written as one JSON object per line.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::gait::{RobotState, TeamState};
use crate::geometry::Vec3;
use crate::planner_global::Cell;

type V = Vec3<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamSnapshot {
    pub hub: V,
    pub robots: Vec<RobotState>,
}

impl From<&TeamState> for TeamSnapshot {
    fn from(t: &TeamState) -> Self {
        Self {
            hub: t.hub,
            robots: t.robots.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub robot: usize,
    /// `"ok"` or the planner error name.
    pub status: String,
    pub cost: Option<f64>,
    /// Anchor positions, start first.
    pub path: Vec<V>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MissionStatus {
    Success,
    NoRoute,
    HopBudgetExhausted,
    Stranded { robot: usize },
    TetherViolation { robot: usize },
}

impl MissionStatus {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Success => "Success",
            Self::NoRoute => "NoRoute",
            Self::HopBudgetExhausted => "HopBudgetExhausted",
            Self::Stranded { .. } => "Stranded",
            Self::TetherViolation { .. } => "TetherViolation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Start { cell: Cell, goal: Cell, route: Vec<Cell> },
    Scan { cell: Cell, points: usize, anchors: usize, edges: usize },
    Plan { target_cell: Cell, plans: Vec<PlanSummary> },
    /// The robot detaches and flies toward `to`.
    Hop { robot: usize, from: V, to: V, d: f64 },
    GripSuccess { robot: usize, position: V },
    GripFailure { robot: usize, position: V },
    /// After a failed grip the robot hops on from `from` to `to`.
    Retry { robot: usize, from: V, to: V, d: f64 },
    /// A scene could not be turned into a usable graph.
    SceneFailure { cell: Cell, reason: String },
    WallReport { a: Cell, b: Cell },
    Reroute { route: Vec<Cell> },
    CellReached { cell: Cell },
    End { status: MissionStatus },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    /// Mission clock, seconds.
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
    pub team: TeamSnapshot,
}

/// Events are ordered by `(t, seq)`: `t` never decreases and `seq` counts up
/// from 0, so events sharing a timestamp keep a strict order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MissionLog {
    pub events: Vec<Event>,
}

impl MissionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, kind: EventKind, team: &TeamState) {
        let t = team.clock;
        debug_assert!(self.events.last().is_none_or(|e| e.t <= t), "clock went backwards");
        self.events.push(Event {
            seq: self.events.len() as u64,
            t,
            kind,
            team: team.into(),
        });
    }

    /// Final status, once the mission has ended.
    pub fn status(&self) -> Option<&MissionStatus> {
        self.events.iter().rev().find_map(|e| match &e.kind {
            EventKind::End { status } => Some(status),
            _ => None,
        })
    }

    pub fn count(&self, pred: impl Fn(&EventKind) -> bool) -> usize {
        self.events.iter().filter(|e| pred(&e.kind)).count()
    }

    pub fn wall_reports(&self) -> Vec<(Cell, Cell)> {
        self.events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::WallReport { a, b } => Some((a, b)),
                _ => None,
            })
            .collect()
    }

    /// Cells in the order the team reached them, starting cell first.
    pub fn visited_cells(&self) -> Vec<Cell> {
        self.events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::Start { cell, .. } | EventKind::CellReached { cell } => Some(*cell),
                _ => None,
            })
            .collect()
    }

    /// Strictly increasing `(t, seq)` with `seq` dense from 0.
    pub fn is_ordered(&self) -> bool {
        self.events.iter().enumerate().all(|(i, e)| e.seq == i as u64)
            && self.events.windows(2).all(|w| w[0].t <= w[1].t)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, serde_json::Error> {
        let mut events = Vec::new();
        for line in r.lines() {
            let line = line.map_err(serde_json::Error::io)?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line)?);
        }
        Ok(Self { events })
    }
}
