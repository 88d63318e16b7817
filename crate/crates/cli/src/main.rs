//! `hopclimb`: one subcommand per pipeline stage, each reading the previous
//! stage's file and writing exactly one artifact.

mod commands;
mod docs;
mod error;
mod overlay;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hopclimb::planner_local::CostMode;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "hopclimb", version, about = "Scan-to-hop-plan pipeline for tethered climbing robot teams")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Config file plus per-run overrides. Flags win over the file.
#[derive(Debug, Args)]
pub struct Common {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Neighbourhood size for normals.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Poisson grid nodes along the longest axis (all three axes capped at this).
    #[arg(long, global = true)]
    pub dims: Option<usize>,
    #[arg(long, global = true)]
    pub keep_fraction: Option<f64>,
    #[arg(long, global = true)]
    pub h_max: Option<f64>,
    #[arg(long, global = true)]
    pub r_max: Option<f64>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub cost_mode: Option<CostModeArg>,
    #[arg(long, global = true)]
    pub cell_size: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CostModeArg {
    DistancePlusLoss,
    LossOnly,
}

impl From<CostModeArg> for CostMode {
    fn from(m: CostModeArg) -> Self {
        match m {
            CostModeArg::DistancePlusLoss => CostMode::DistancePlusLoss,
            CostModeArg::LossOnly => CostMode::LossOnly,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulated LIDAR scan of an OBJ terrain; writes XYZ or PLY.
    Scan {
        #[arg(long)]
        terrain: PathBuf,
        /// Sensor position `x,y,z`.
        #[arg(long, allow_hyphen_values = true)]
        pose: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Oriented normals of a cloud; writes PLY with nx ny nz.
    Normals {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Poisson surface trimmed to the samples' support; writes OBJ.
    Reconstruct {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also dump the indicator grid to `<prefix>.raw` and `<prefix>.json`.
        #[arg(long)]
        dump_grid: Option<PathBuf>,
    },
    /// Scored and culled anchor set of a mesh; writes JSON.
    Anchors {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scene graph over an anchor set; writes JSON.
    Graph {
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bounded-leg A* for each start toward one goal; writes a plan JSON.
    PlanLocal {
        #[arg(long)]
        graph: PathBuf,
        /// Anchor id or point `x,y,z` (resolved to the nearest anchor); repeat per robot.
        #[arg(long, required = true, allow_hyphen_values = true)]
        start: Vec<String>,
        /// Anchor id or point `x,y,z` (resolved to the nearest anchor).
        #[arg(long, allow_hyphen_values = true)]
        goal: String,
        /// Tether hub `x,y,z`; defaults to the centroid of the starts.
        #[arg(long, allow_hyphen_values = true)]
        hub: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// D* Lite route over a grid of scenes; writes a route JSON.
    PlanGlobal {
        /// Grid JSON: width, height, cell_size, start, goal, walls.
        #[arg(long)]
        grid: PathBuf,
        /// Extra wall `x,y:x,y` between adjacent cells; repeatable.
        #[arg(long)]
        wall: Vec<String>,
        /// Cell to plan from `x,y`; defaults to the grid's start.
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full mission on a named scenario; writes the JSONL mission log.
    Simulate {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(hopclimb::sim::scenarios::NAMES))]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// OBJ overlay with per-vertex colours: mesh, anchor markers and plan polylines.
    Export {
        #[arg(long)]
        mesh: Option<PathBuf>,
        #[arg(long)]
        anchors: Option<PathBuf>,
        /// Plan JSON; needs `--graph` or `--anchors` for positions.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Marker size in meters.
        #[arg(long, default_value_t = 0.04)]
        marker: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = commands::load_config(&cli.common)?;
    match cli.command {
        Command::Scan { terrain, pose, out } => commands::scan(&cfg, &terrain, &pose, &out),
        Command::Normals { input, out } => commands::normals(&cfg, &input, &out),
        Command::Reconstruct { input, out, dump_grid } => commands::reconstruct(&cfg, &input, &out, dump_grid.as_deref()),
        Command::Anchors { mesh, out } => commands::anchors(&cfg, &mesh, &out),
        Command::Graph { anchors, out } => commands::graph(&cfg, &anchors, &out),
        Command::PlanLocal { graph, start, goal, hub, out } => {
            commands::plan_local(&cfg, &graph, &start, &goal, hub.as_deref(), &out)
        }
        Command::PlanGlobal { grid, wall, from, out } => commands::plan_global(&grid, &wall, from.as_deref(), &out),
        Command::Simulate { scenario, out } => commands::simulate(&cfg, &scenario, &out),
        Command::Export { mesh, anchors, plan, graph, marker, out } => {
            overlay::export(mesh.as_deref(), anchors.as_deref(), plan.as_deref(), graph.as_deref(), marker, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
