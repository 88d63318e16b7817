use hopclimb::anchors::AnchorPoint;
use hopclimb::geometry::Vec3;
use hopclimb::planner_local::*;
use hopclimb::scenegraph::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn anchor(id: usize, p: Vec3<f64>, r: f64) -> AnchorPoint<f64> {
    AnchorPoint { id, position: p, normal: Vec3::axis(2), flatness: 0.0, flatness_norm: 0.0, height_risk: r, r }
}

fn edge(a: &[AnchorPoint<f64>], from: usize, to: usize) -> SceneEdge<f64> {
    SceneEdge { from, to, d: a[from].position.distance(a[to].position), loss: a[to].r }
}

/// O(n^2) Dijkstra over an explicitly pruned edge list.
fn dijkstra_oracle(
    g: &SceneGraph<f64>,
    start: usize,
    goal: usize,
    h_max: f64,
    tether: &TetherConstraint<f64>,
    cost: &CostModel<f64>,
) -> Option<f64> {
    let ok: Vec<usize> = g.vertices().iter().filter(|a| a.position.distance(tether.hub) <= tether.r_max).map(|a| a.id).collect();
    if !ok.contains(&start) || !ok.contains(&goal) {
        return None;
    }
    let edges: Vec<_> = g.edges().iter().filter(|e| e.d <= h_max && ok.contains(&e.from) && ok.contains(&e.to)).collect();
    let max_id = g.vertices().iter().map(|a| a.id).max().unwrap();
    let mut dist = vec![f64::INFINITY; max_id + 1];
    let mut done = vec![false; max_id + 1];
    dist[start] = 0.0;
    loop {
        let u = ok.iter().copied().filter(|&v| !done[v] && dist[v].is_finite()).min_by(|&a, &b| dist[a].partial_cmp(&dist[b]).unwrap())?;
        if u == goal {
            return Some(dist[u]);
        }
        done[u] = true;
        for e in edges.iter().filter(|e| e.from == u) {
            let c = match cost.mode {
                CostMode::DistancePlusLoss => e.d + cost.lambda * e.loss,
                CostMode::LossOnly => e.loss,
            };
            if dist[u] + c < dist[e.to] {
                dist[e.to] = dist[u] + c;
            }
        }
    }
}

fn path_cost(g: &SceneGraph<f64>, path: &[usize], cost: &CostModel<f64>) -> f64 {
    path.windows(2).fold(0.0, |acc, w| acc + cost.edge_cost(g.edge(w[0], w[1]).unwrap()))
}

struct Instance {
    graph: SceneGraph<f64>,
    start: usize,
    goal: usize,
    h_max: f64,
    tether: TetherConstraint<f64>,
}

fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=200);
    let side = rng.random_range(5.0..40.0);
    // ids deliberately sparse and shuffled
    let anchors: Vec<_> = (0..n)
        .map(|i| {
            let p = Vec3::new(rng.random_range(0.0..side), rng.random_range(0.0..side), rng.random_range(0.0..side * 0.3));
            // coarse scores make equal-cost ties common
            let r = (rng.random_range(0..5) as f64) * 0.25;
            anchor(3 * i + 1, p, r)
        })
        .collect();
    let radius = rng.random_range(side * 0.1..side * 0.6);
    let cap = if rng.random_bool(0.5) { None } else { Some(rng.random_range(2..20)) };
    let graph = match build_graph(&anchors, radius, &GraphOptions { l_base: 0.0, max_out_degree: cap }) {
        Ok(g) => g,
        Err(SceneGraphError::NoEdges(g)) => *g,
        Err(e) => panic!("{e}"),
    };
    let start = anchors[rng.random_range(0..n)].id;
    let goal = anchors[rng.random_range(0..n)].id;
    let h_max = rng.random_range(0.05..1.2) * radius;
    let sp = graph.anchor(start).unwrap().position;
    let hub = sp + Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 0.0);
    let r_max = sp.distance(hub) + rng.random_range(0.0..side);
    Instance { graph, start, goal, h_max, tether: TetherConstraint::new(hub, r_max) }
}

#[test]
fn matches_dijkstra_on_random_graphs() {
    let modes = [CostModel { lambda: 10.0, mode: CostMode::DistancePlusLoss }, CostModel { lambda: 10.0, mode: CostMode::LossOnly }];
    let mut found = 0;
    for seed in 0..1000 {
        let inst = random_instance(seed);
        for cost in &modes {
            let oracle = dijkstra_oracle(&inst.graph, inst.start, inst.goal, inst.h_max, &inst.tether, cost);
            match bounded_leg_astar(&inst.graph, inst.start, inst.goal, inst.h_max, &inst.tether, cost) {
                Ok(plan) => {
                    found += 1;
                    assert_eq!(Some(plan.cost), oracle, "seed {seed} {cost:?}");
                    assert!(plan.satisfies(&inst.graph, inst.h_max, &inst.tether));
                    assert_eq!(path_cost(&inst.graph, &plan.anchors, cost), plan.cost);
                }
                Err(PlanError::NoPath { .. }) | Err(PlanError::GoalOutsideTether(_)) => {
                    assert_eq!(oracle, None, "seed {seed}")
                }
                Err(e) => panic!("seed {seed}: {e}"),
            }
        }
    }
    assert!(found > 500, "only {found} solvable instances");
}

#[test]
fn relaxing_limits_never_raises_cost() {
    let cost = CostModel::default();
    for seed in 0..300 {
        let inst = random_instance(50_000 + seed);
        let base = bounded_leg_astar(&inst.graph, inst.start, inst.goal, inst.h_max, &inst.tether, &cost).ok();
        let wider = TetherConstraint::new(inst.tether.hub, inst.tether.r_max * 1.5);
        for (h, t) in [(inst.h_max * 1.5, inst.tether), (inst.h_max, wider)] {
            let relaxed = bounded_leg_astar(&inst.graph, inst.start, inst.goal, h, &t, &cost).ok();
            if let Some(b) = &base {
                assert!(relaxed.unwrap().cost <= b.cost, "seed {seed}");
            }
        }
    }
}

#[test]
fn deterministic_plans() {
    for seed in 0..50 {
        let inst = random_instance(90_000 + seed);
        let a = bounded_leg_astar(&inst.graph, inst.start, inst.goal, inst.h_max, &inst.tether, &CostModel::default());
        let copy: SceneGraph<f64> = serde_json::from_str(&serde_json::to_string(&inst.graph).unwrap()).unwrap();
        let b = bounded_leg_astar(&copy, inst.start, inst.goal, inst.h_max, &inst.tether, &CostModel::default());
        assert_eq!(a, b);
    }
}

/// Start 0, goal 4; node 2 is a dead end, nodes 1 and 3 both reach the goal.
fn dead_end_scene() -> SceneGraph<f64> {
    let a = vec![
        anchor(0, Vec3::new(0.0, 0.0, 0.0), 0.1),
        anchor(1, Vec3::new(5.0, 4.0, 0.0), 0.1),
        anchor(2, Vec3::new(4.0, 0.0, 0.0), 0.1),
        anchor(3, Vec3::new(5.0, -2.0, 0.0), 0.1),
        anchor(4, Vec3::new(10.0, 0.0, 0.0), 0.1),
    ];
    let mut edges = Vec::new();
    for (x, y) in [(0, 1), (1, 4), (0, 2), (0, 3), (3, 4)] {
        edges.push(edge(&a, x, y));
        edges.push(edge(&a, y, x));
    }
    SceneGraph::from_parts(10.0, a, edges).unwrap()
}

fn simple_paths(g: &SceneGraph<f64>, at: usize, goal: usize, seen: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    seen.push(at);
    if at == goal {
        out.push(seen.clone());
    } else {
        for e in g.out_edges(at) {
            if !seen.contains(&e.to) {
                simple_paths(g, e.to, goal, seen, out);
            }
        }
    }
    seen.pop();
}

#[test]
fn dead_end_scene_takes_shorter_branch() {
    let g = dead_end_scene();
    let tether = TetherConstraint::new(Vec3::new(5.0, 0.0, 0.0), 20.0);
    for cost in [CostModel::default(), CostModel { lambda: 0.0, mode: CostMode::DistancePlusLoss }] {
        let plan = bounded_leg_astar(&g, 0, 4, 10.0, &tether, &cost).unwrap();
        assert_eq!(plan.anchors, vec![0, 3, 4]);
        let mut all = Vec::new();
        simple_paths(&g, 0, 4, &mut Vec::new(), &mut all);
        assert_eq!(all.len(), 2);
        let best = all.iter().map(|p| path_cost(&g, p, &cost)).fold(f64::INFINITY, f64::min);
        assert_eq!(plan.cost, best);
        assert!(all.iter().any(|p| p.contains(&1) && path_cost(&g, p, &cost) > plan.cost));
    }
}

#[test]
fn team_of_four_on_square_layout() {
    // robots on the corners of a 1 m square, goal three meters up-slope
    let mut a = vec![
        anchor(0, Vec3::new(1.0, 1.0, 0.0), 0.0),
        anchor(1, Vec3::new(1.0, 0.0, 0.0), 0.0),
        anchor(2, Vec3::new(0.0, 1.0, 0.0), 0.0),
        anchor(3, Vec3::new(0.0, 0.0, 0.0), 0.0),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for i in 4..60 {
        a.push(anchor(i, Vec3::new(rng.random_range(-1.0..2.0), rng.random_range(-1.0..4.0), 0.0), rng.random_range(0.0..1.0)));
    }
    a.push(anchor(60, Vec3::new(0.5, 3.5, 0.0), 0.0));
    let g = build_graph(&a, 1.2, &GraphOptions { l_base: 0.0, max_out_degree: None }).unwrap();
    let tether = TetherConstraint::new(Vec3::new(0.5, 0.5, 0.0), 4.0);
    let cost = CostModel::default();
    let plans = plan_team(&g, &[0, 1, 2, 3], 60, 1.0, &tether, &cost);
    assert_eq!(plans.len(), 4);
    for (start, p) in [0, 1, 2, 3].iter().zip(&plans) {
        let p = p.as_ref().unwrap();
        assert_eq!(p.start(), *start);
        assert_eq!(Some(p.cost), dijkstra_oracle(&g, *start, 60, 1.0, &tether, &cost));
    }
    let single = plan_team(&g, &[2], 60, 1.0, &tether, &cost);
    assert_eq!(single[0], plans[2]);
}

#[test]
fn isolated_robot_fails_alone() {
    let a = vec![
        anchor(0, Vec3::new(0.0, 0.0, 0.0), 0.0),
        anchor(1, Vec3::new(1.0, 0.0, 0.0), 0.0),
        anchor(2, Vec3::new(0.0, 1.0, 0.0), 0.0),
        anchor(3, Vec3::new(1.0, 1.0, 0.0), 0.0),
        anchor(4, Vec3::new(-2.9, 0.0, 0.0), 0.0),
        anchor(5, Vec3::new(0.5, 2.0, 0.0), 0.0),
    ];
    let g = build_graph(&a, 1.6, &GraphOptions { l_base: 0.0, max_out_degree: None }).unwrap();
    let tether = TetherConstraint::new(Vec3::new(0.0, 0.5, 0.0), 3.0);
    let plans = plan_team(&g, &[0, 1, 4, 3], 5, 1.6, &tether, &CostModel::default());
    assert!(plans[0].is_ok() && plans[1].is_ok() && plans[3].is_ok());
    assert_eq!(plans[2], Err(PlanError::NoPath { start: 4, goal: 5 }));
}
