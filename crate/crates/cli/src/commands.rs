use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use hopclimb::config::PipelineConfig;
use hopclimb::geometry::{load_cloud, load_oriented_ply, write_oriented_ply, write_ply, write_xyz, CloudFormat, Vec3};
use hopclimb::pipeline::{self, PipelineError};
use hopclimb::planner_global::{Cell, GlobalGrid, GlobalPlanError, GlobalPlanner};
use hopclimb::planner_local::{plan_team, TetherConstraint};
use hopclimb::reconstruct::TriangleMesh;
use hopclimb::scenegraph::{nearest_anchor, SceneGraph};
use hopclimb::sim::{run_mission, scenarios, simulate_scan, MissionStatus};

use crate::docs::{self, AnchorSet, PlanDocument, RobotPlan};
use crate::error::CliError;
use crate::Common;

pub fn load_config(common: &Common) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path).map_err(|e| CliError::input(path, e))?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.k {
        cfg.normals.k = v;
    }
    if let Some(v) = common.dims {
        cfg.reconstruct.dims = [v; 3];
    }
    if let Some(v) = common.keep_fraction {
        cfg.anchors.keep_fraction = v;
    }
    if let Some(v) = common.h_max {
        cfg.planner.h_max = v;
    }
    if let Some(v) = common.r_max {
        cfg.planner.r_max = v;
    }
    if let Some(v) = common.lambda {
        cfg.planner.lambda = v;
    }
    if let Some(v) = common.cost_mode {
        cfg.planner.mode = v.into();
    }
    if let Some(v) = common.cell_size {
        cfg.global.cell_size = v;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn parse_point(s: &str) -> Option<Vec3<f64>> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse().ok()).collect::<Option<_>>()?;
    match v[..] {
        [x, y, z] if v.iter().all(|c| c.is_finite()) => Some(Vec3::new(x, y, z)),
        _ => None,
    }
}

fn parse_cell(s: &str) -> Option<Cell> {
    let (x, y) = s.split_once(',')?;
    Some(Cell::new(x.trim().parse().ok()?, y.trim().parse().ok()?))
}

fn cloud_format(path: &Path) -> Result<CloudFormat, CliError> {
    CloudFormat::from_path(path)
        .ok_or_else(|| CliError::Usage(format!("{}: expected a .xyz or .ply file", path.display())))
}

fn pipeline_err(e: PipelineError) -> CliError {
    CliError::pipeline(e.name(), e)
}

pub fn scan(cfg: &PipelineConfig, terrain: &Path, pose: &str, out: &Path) -> Result<(), CliError> {
    let pose = parse_point(pose).ok_or_else(|| CliError::Usage(format!("bad pose {pose:?}, expected x,y,z")))?;
    let format = cloud_format(out)?;
    let mesh = TriangleMesh::<f64>::read_obj(terrain).map_err(|e| CliError::input(terrain, e))?;
    let cloud = simulate_scan(&mesh, pose, &cfg.lidar, cfg.seed);
    if cloud.is_empty() {
        return Err(CliError::pipeline("EmptyScan", "no ray hit the terrain"));
    }
    match format {
        CloudFormat::Xyz => write_xyz(out, &cloud),
        CloudFormat::Ply => write_ply(out, &cloud),
    }
    .map_err(|e| CliError::write(out, e))
}

pub fn normals(cfg: &PipelineConfig, input: &Path, out: &Path) -> Result<(), CliError> {
    let cloud = load_cloud(input, cloud_format(input)?).map_err(|e| CliError::input(input, e))?;
    let (points, dropped) = pipeline::normals(&cloud, cfg).map_err(pipeline_err)?;
    if dropped > 0 {
        eprintln!("{dropped} degenerate neighbourhoods dropped");
    }
    write_oriented_ply(out, &points, cloud.sensor_origin).map_err(|e| CliError::write(out, e))
}

pub fn reconstruct(cfg: &PipelineConfig, input: &Path, out: &Path, dump: Option<&Path>) -> Result<(), CliError> {
    let (points, _) = load_oriented_ply::<f64>(input).map_err(|e| CliError::input(input, e))?;
    let recon = pipeline::surface(&points, cfg).map_err(pipeline_err)?;
    if let Some(prefix) = dump {
        recon.indicator.write_dump(prefix).map_err(|e| CliError::write(prefix, e))?;
    }
    let mesh = pipeline::supported_surface(&recon, &points, cfg);
    mesh.write_obj(out).map_err(|e| CliError::write(out, e))
}

pub fn anchors(cfg: &PipelineConfig, mesh: &Path, out: &Path) -> Result<(), CliError> {
    let surface = TriangleMesh::<f64>::read_obj(mesh).map_err(|e| CliError::input(mesh, e))?;
    let anchors: AnchorSet = pipeline::select_anchors(&surface, cfg).map_err(pipeline_err)?;
    docs::write(out, &anchors)
}

pub fn graph(cfg: &PipelineConfig, anchors: &Path, out: &Path) -> Result<(), CliError> {
    let anchors: AnchorSet = docs::read(anchors)?;
    let graph = pipeline::graph(&anchors, cfg).map_err(pipeline_err)?;
    docs::write(out, &graph)
}

/// An anchor id, or a point resolved to the nearest anchor.
fn resolve(graph: &SceneGraph<f64>, arg: &str) -> Result<usize, CliError> {
    if let Ok(id) = arg.trim().parse::<usize>() {
        return Ok(id);
    }
    let p = parse_point(arg).ok_or_else(|| CliError::Usage(format!("bad anchor {arg:?}, expected an id or x,y,z")))?;
    nearest_anchor(graph, p).ok_or_else(|| CliError::pipeline("EmptyGraph", "scene graph has no anchors"))
}

pub fn plan_local(
    cfg: &PipelineConfig,
    graph_path: &Path,
    starts: &[String],
    goal: &str,
    hub: Option<&str>,
    out: &Path,
) -> Result<(), CliError> {
    let graph: SceneGraph<f64> = docs::read(graph_path)?;
    let starts = starts.iter().map(|s| resolve(&graph, s)).collect::<Result<Vec<_>, _>>()?;
    let goal = resolve(&graph, goal)?;
    let hub = match hub {
        Some(h) => parse_point(h).ok_or_else(|| CliError::Usage(format!("bad hub {h:?}, expected x,y,z")))?,
        None => {
            let positions = starts
                .iter()
                .map(|&s| graph.anchor(s).map(|a| a.position))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| CliError::pipeline("UnknownAnchor", "a start anchor is not in the scene graph"))?;
            Vec3::centroid(positions).expect("at least one start")
        }
    };
    let cost = cfg.cost_model();
    let tether = TetherConstraint::new(hub, cfg.planner.r_max);
    let results = plan_team(&graph, &starts, goal, cfg.planner.h_max, &tether, &cost);
    let mut first_error = None;
    let robots = starts
        .iter()
        .zip(results)
        .map(|(&start, r)| match r {
            Ok(plan) => RobotPlan {
                start,
                plan: Some(plan),
                error: None,
            },
            Err(e) => {
                first_error.get_or_insert_with(|| CliError::pipeline(e.name(), &e));
                RobotPlan {
                    start,
                    plan: None,
                    error: Some(e.name().to_string()),
                }
            }
        })
        .collect();
    docs::write(
        out,
        &PlanDocument {
            hub,
            r_max: cfg.planner.r_max,
            h_max: cfg.planner.h_max,
            cost,
            goal,
            robots,
        },
    )?;
    first_error.map_or(Ok(()), Err)
}

pub fn plan_global(grid_path: &Path, walls: &[String], from: Option<&str>, out: &Path) -> Result<(), CliError> {
    let grid: GlobalGrid = docs::read(grid_path)?;
    let cell = |s: &str| parse_cell(s).ok_or_else(|| CliError::Usage(format!("bad cell {s:?}, expected x,y")));
    let from = from.map(cell).transpose()?.unwrap_or(grid.start);
    let mut planner = GlobalPlanner::new(grid).map_err(|e| CliError::input(grid_path, e))?;
    for w in walls {
        let (a, b) = w
            .split_once(':')
            .ok_or_else(|| CliError::Usage(format!("bad wall {w:?}, expected x,y:x,y")))?;
        match planner.report_blocked(cell(a)?, cell(b)?) {
            // A wall that disconnects the goal is reported by the final plan below.
            Ok(_) | Err(GlobalPlanError::NoRoute { .. }) => {}
            Err(e) => return Err(CliError::Usage(e.to_string())),
        }
    }
    let route = planner.plan_route(from).map_err(|e| match e {
        GlobalPlanError::NoRoute { .. } => CliError::pipeline("NoRoute", e),
        e => CliError::Usage(e.to_string()),
    })?;
    docs::write(out, &route)
}

pub fn simulate(cfg: &PipelineConfig, scenario: &str, out: &Path) -> Result<(), CliError> {
    let setup = scenarios::by_name(scenario, cfg.global.cell_size)
        .ok_or_else(|| CliError::Usage(format!("unknown scenario {scenario:?}")))?;
    let outcome = run_mission(&setup, cfg).map_err(|e| CliError::pipeline("MissionError", e))?;
    let file = File::create(out).map_err(|e| CliError::write(out, e))?;
    outcome.log.write_jsonl(BufWriter::new(file)).map_err(|e| CliError::write(out, e))?;
    eprintln!(
        "{}: {} scans, {} hops, {} wall reports",
        outcome.status.name(),
        outcome.scans,
        outcome.hops,
        outcome.log.wall_reports().len()
    );
    match outcome.status {
        MissionStatus::Success => Ok(()),
        s => Err(CliError::pipeline(s.name(), format!("mission ended with {}", s.name()))),
    }
}
