//! Global cell-grid routing with D* Lite. Cells are `(x, y)` with `x` the
//! column (east positive) and `y` the row (south positive). Local planning
//! failures become permanent walls between neighbouring cells.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn is_adjacent(self, o: Cell) -> bool {
        self.x.abs_diff(o.x) + self.y.abs_diff(o.y) == 1
    }

    pub fn manhattan(self, o: Cell) -> usize {
        self.x.abs_diff(o.x) + self.y.abs_diff(o.y)
    }

    /// Neighbour in direction `h`, if it stays non-negative.
    pub fn step(self, h: Heading) -> Option<Cell> {
        let (dx, dy) = h.delta();
        Some(Cell::new(
            self.x.checked_add_signed(dx)?,
            self.y.checked_add_signed(dy)?,
        ))
    }
}

impl From<[usize; 2]> for Cell {
    fn from(a: [usize; 2]) -> Self {
        Cell::new(a[0], a[1])
    }
}

impl From<Cell> for [usize; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Heading {
    N,
    S,
    E,
    W,
}

impl Heading {
    /// Priority order used to break route ties.
    pub const ALL: [Heading; 4] = [Heading::N, Heading::S, Heading::E, Heading::W];

    pub fn delta(self) -> (isize, isize) {
        match self {
            Heading::N => (0, -1),
            Heading::S => (0, 1),
            Heading::E => (1, 0),
            Heading::W => (-1, 0),
        }
    }

    pub fn between(a: Cell, b: Cell) -> Option<Heading> {
        Heading::ALL.into_iter().find(|&h| a.step(h) == Some(b))
    }
}

impl fmt::Display for Heading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Unordered pair of adjacent cells, stored lower cell first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[Cell; 2]", into = "[Cell; 2]")]
pub struct Wall(Cell, Cell);

impl Wall {
    pub fn new(a: Cell, b: Cell) -> Option<Self> {
        a.is_adjacent(b).then(|| if a <= b { Wall(a, b) } else { Wall(b, a) })
    }

    pub fn cells(self) -> (Cell, Cell) {
        (self.0, self.1)
    }
}

impl TryFrom<[Cell; 2]> for Wall {
    type Error = String;
    fn try_from(c: [Cell; 2]) -> Result<Self, String> {
        Wall::new(c[0], c[1]).ok_or_else(|| format!("wall between non-adjacent cells {} and {}", c[0], c[1]))
    }
}

impl From<Wall> for [Cell; 2] {
    fn from(w: Wall) -> Self {
        [w.0, w.1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalGrid {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    #[serde(default)]
    pub walls: BTreeSet<Wall>,
    pub start: Cell,
    pub goal: Cell,
}

impl GlobalGrid {
    /// Empty grid; `cell_size` defaults to one LIDAR range in the configs.
    pub fn new(width: usize, height: usize, cell_size: f64, start: Cell, goal: Cell) -> Self {
        Self {
            width,
            height,
            cell_size,
            walls: BTreeSet::new(),
            start,
            goal,
        }
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn blocked(&self, a: Cell, b: Cell) -> bool {
        Wall::new(a, b).is_some_and(|w| self.walls.contains(&w))
    }

    fn index(&self, c: Cell) -> usize {
        c.y * self.width + c.x
    }

    fn cell(&self, i: usize) -> Cell {
        Cell::new(i % self.width, i / self.width)
    }

    /// Open neighbours in N, S, E, W order.
    pub fn neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        Heading::ALL
            .into_iter()
            .filter_map(move |h| c.step(h))
            .filter(move |&n| self.contains(n) && !self.blocked(c, n))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    /// Current cell first, goal last.
    pub cells: Vec<Cell>,
    pub steps: usize,
}

impl Route {
    /// Adjacent steps, no wall crossings, no repeats.
    pub fn is_valid_on(&self, grid: &GlobalGrid) -> bool {
        let mut seen = BTreeSet::new();
        !self.cells.is_empty()
            && self.steps + 1 == self.cells.len()
            && self.cells.iter().all(|&c| grid.contains(c) && seen.insert(c))
            && self
                .cells
                .windows(2)
                .all(|w| w[0].is_adjacent(w[1]) && !grid.blocked(w[0], w[1]))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GlobalPlanError {
    #[error("NoRoute: goal {goal} unreachable from {from}")]
    NoRoute { from: Cell, goal: Cell },
    #[error("cell {0} is outside the grid")]
    OutsideGrid(Cell),
    #[error("cells {0} and {1} are not 4-adjacent")]
    NotAdjacent(Cell, Cell),
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum HeadingError {
    #[error("OffRoute: cell {0} is not on the route")]
    OffRoute(Cell),
    #[error("OffRoute: already at the goal {0}")]
    AtGoal(Cell),
}

/// Compass direction from `current` to the next cell of `route`.
pub fn next_heading(route: &Route, current: Cell) -> Result<Heading, HeadingError> {
    let i = route
        .cells
        .iter()
        .position(|&c| c == current)
        .ok_or(HeadingError::OffRoute(current))?;
    let next = route.cells.get(i + 1).ok_or(HeadingError::AtGoal(current))?;
    Heading::between(current, *next).ok_or(HeadingError::OffRoute(current))
}

const INF: u32 = u32::MAX / 4;

type Key = (u32, u32);

/// Incremental planner rooted at the goal; keeps its search state between calls.
#[derive(Debug, Clone)]
pub struct GlobalPlanner {
    grid: GlobalGrid,
    g: Vec<u32>,
    rhs: Vec<u32>,
    /// Current key of every queued cell; heap entries that disagree are stale.
    queued: Vec<Option<Key>>,
    heap: BinaryHeap<Reverse<(Key, usize)>>,
    km: u32,
    s_start: usize,
    s_last: usize,
    expansions: usize,
}

impl GlobalPlanner {
    pub fn new(grid: GlobalGrid) -> Result<Self, GlobalPlanError> {
        for c in [grid.start, grid.goal] {
            if !grid.contains(c) {
                return Err(GlobalPlanError::OutsideGrid(c));
            }
        }
        let n = grid.width * grid.height;
        let start = grid.index(grid.start);
        let goal = grid.index(grid.goal);
        let mut p = Self {
            grid,
            g: vec![INF; n],
            rhs: vec![INF; n],
            queued: vec![None; n],
            heap: BinaryHeap::new(),
            km: 0,
            s_start: start,
            s_last: start,
            expansions: 0,
        };
        p.rhs[goal] = 0;
        let k = p.key(goal);
        p.push(goal, k);
        Ok(p)
    }

    pub fn grid(&self) -> &GlobalGrid {
        &self.grid
    }

    /// Cells expanded so far, across all calls.
    pub fn expansions(&self) -> usize {
        self.expansions
    }

    fn h(&self, a: usize, b: usize) -> u32 {
        self.grid.cell(a).manhattan(self.grid.cell(b)) as u32
    }

    fn key(&self, s: usize) -> Key {
        let m = self.g[s].min(self.rhs[s]);
        (m.saturating_add(self.h(self.s_start, s)).saturating_add(self.km).min(INF), m)
    }

    fn push(&mut self, s: usize, k: Key) {
        self.queued[s] = Some(k);
        self.heap.push(Reverse((k, s)));
    }

    fn top(&mut self) -> Option<(Key, usize)> {
        while let Some(&Reverse((k, s))) = self.heap.peek() {
            if self.queued[s] == Some(k) {
                return Some((k, s));
            }
            self.heap.pop();
        }
        None
    }

    fn neighbors(&self, s: usize) -> Vec<usize> {
        let c = self.grid.cell(s);
        self.grid.neighbors(c).map(|n| self.grid.index(n)).collect()
    }

    fn best_successor_cost(&self, s: usize) -> u32 {
        self.neighbors(s)
            .into_iter()
            .map(|n| self.g[n].saturating_add(1).min(INF))
            .min()
            .unwrap_or(INF)
    }

    fn update_vertex(&mut self, s: usize) {
        if self.g[s] != self.rhs[s] {
            let k = self.key(s);
            self.push(s, k);
        } else {
            self.queued[s] = None;
        }
    }

    fn compute_shortest_path(&mut self) {
        let goal = self.grid.index(self.grid.goal);
        while let Some((k_old, u)) = self.top() {
            let start_key = self.key(self.s_start);
            if k_old >= start_key && self.rhs[self.s_start] <= self.g[self.s_start] {
                break;
            }
            let k_new = self.key(u);
            if k_old < k_new {
                self.push(u, k_new);
            } else if self.g[u] > self.rhs[u] {
                self.expansions += 1;
                self.g[u] = self.rhs[u];
                self.queued[u] = None;
                for s in self.neighbors(u) {
                    if s != goal {
                        self.rhs[s] = self.rhs[s].min(self.g[u].saturating_add(1).min(INF));
                    }
                    self.update_vertex(s);
                }
            } else {
                self.expansions += 1;
                let g_old = self.g[u];
                self.g[u] = INF;
                let mut affected = self.neighbors(u);
                affected.push(u);
                for s in affected {
                    if s != goal && (self.rhs[s] == g_old.saturating_add(1).min(INF) || s == u) {
                        self.rhs[s] = self.best_successor_cost(s);
                    }
                    self.update_vertex(s);
                }
            }
        }
    }

    fn move_start(&mut self, from: Cell) -> Result<(), GlobalPlanError> {
        if !self.grid.contains(from) {
            return Err(GlobalPlanError::OutsideGrid(from));
        }
        let s = self.grid.index(from);
        if s != self.s_start {
            self.s_start = s;
            self.km = self.km.saturating_add(self.h(self.s_last, s));
            self.s_last = s;
        }
        Ok(())
    }

    /// Shortest route from `from` to the goal.
    pub fn plan_route(&mut self, from: Cell) -> Result<Route, GlobalPlanError> {
        self.move_start(from)?;
        self.compute_shortest_path();
        self.extract(from)
    }

    /// Inserts a permanent wall between `a` and `b` and repairs the route from `a`.
    pub fn report_blocked(&mut self, a: Cell, b: Cell) -> Result<Route, GlobalPlanError> {
        for c in [a, b] {
            if !self.grid.contains(c) {
                return Err(GlobalPlanError::OutsideGrid(c));
            }
        }
        let wall = Wall::new(a, b).ok_or(GlobalPlanError::NotAdjacent(a, b))?;
        self.move_start(a)?;
        if self.grid.walls.insert(wall) {
            let goal = self.grid.index(self.grid.goal);
            let (ia, ib) = (self.grid.index(a), self.grid.index(b));
            for (u, v) in [(ia, ib), (ib, ia)] {
                // the u -> v step cost rose from 1 to infinity
                if u != goal && self.rhs[u] == self.g[v].saturating_add(1).min(INF) {
                    self.rhs[u] = self.best_successor_cost(u);
                }
                self.update_vertex(u);
            }
        }
        self.compute_shortest_path();
        self.extract(a)
    }

    fn extract(&self, from: Cell) -> Result<Route, GlobalPlanError> {
        let goal = self.grid.goal;
        let no_route = GlobalPlanError::NoRoute { from, goal };
        let mut s = self.grid.index(from);
        if self.rhs[s] >= INF {
            return Err(no_route);
        }
        let mut cells = vec![from];
        let limit = self.grid.width * self.grid.height;
        while self.grid.cell(s) != goal {
            // Neighbours come in N, S, E, W order; min_by_key keeps the first minimum.
            let next = self
                .neighbors(s)
                .into_iter()
                .min_by_key(|&n| self.g[n])
                .filter(|&n| self.g[n] < INF)
                .ok_or_else(|| no_route.clone())?;
            s = next;
            cells.push(self.grid.cell(s));
            if cells.len() > limit {
                return Err(no_route);
            }
        }
        let steps = cells.len() - 1;
        Ok(Route { cells, steps })
    }
}

/// From-scratch shortest route on `grid`.
pub fn plan_route(grid: &GlobalGrid, from: Cell) -> Result<Route, GlobalPlanError> {
    let mut g = grid.clone();
    if !g.contains(from) {
        return Err(GlobalPlanError::OutsideGrid(from));
    }
    g.start = from;
    GlobalPlanner::new(g)?.plan_route(from)
}
