//! One scan to one scene graph, wired from a [`PipelineConfig`].

use thiserror::Error;

use crate::anchors::{self, AnchorError, AnchorPoint};
use crate::config::PipelineConfig;
use crate::geometry::{estimate_normals, oriented_points, NormalError, OrientedPoint, PointCloud, SpatialIndex};
use crate::reconstruct::{reconstruct, ReconstructError, Reconstruction, TriangleMesh};
use crate::scenegraph::{build_graph, SceneGraph, SceneGraphError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Normals(#[from] NormalError),
    #[error("no usable normals: every neighbourhood was degenerate")]
    NoNormals,
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error(transparent)]
    Anchors(#[from] AnchorError),
    #[error(transparent)]
    Graph(#[from] SceneGraphError<f64>),
}

impl PipelineError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Normals(_) | Self::NoNormals => "NormalError",
            Self::Reconstruct(ReconstructError::NoConvergence { .. }) => "NoConvergence",
            Self::Reconstruct(ReconstructError::EmptySurface { .. }) => "EmptySurface",
            Self::Reconstruct(ReconstructError::DegenerateBounds) => "DegenerateBounds",
            Self::Reconstruct(_) => "ReconstructError",
            Self::Anchors(_) => "AnchorError",
            Self::Graph(SceneGraphError::NoEdges(_)) => "NoEdges",
            Self::Graph(_) => "GraphError",
        }
    }
}

/// Oriented samples with degenerate neighbourhoods removed, plus how many were
/// removed. The cloud is voxel-thinned first when `normals.voxel` is set.
pub fn normals(cloud: &PointCloud<f64>, cfg: &PipelineConfig) -> Result<(Vec<OrientedPoint<f64>>, usize), PipelineError> {
    let thinned;
    let cloud = if cfg.normals.voxel > 0.0 {
        thinned = cloud.voxel_downsample(cfg.normals.voxel);
        &thinned
    } else {
        cloud
    };
    let est = estimate_normals(cloud, cfg.normals.k)?;
    let pts = oriented_points(&est);
    if pts.is_empty() {
        return Err(PipelineError::NoNormals);
    }
    let dropped = est.len() - pts.len();
    Ok((pts, dropped))
}

pub fn surface(points: &[OrientedPoint<f64>], cfg: &PipelineConfig) -> Result<Reconstruction<f64>, PipelineError> {
    Ok(reconstruct(points, &cfg.reconstruct_options())?)
}

/// Cuts away surface with no scan sample within `radius`: the Poisson solve
/// bridges occlusions and curls up past the edge of the data, and neither is
/// anything to grip or to judge relative height against.
pub fn trim_unsupported(mesh: &TriangleMesh<f64>, samples: &[OrientedPoint<f64>], radius: f64) -> TriangleMesh<f64> {
    let positions: Vec<_> = samples.iter().map(|p| p.position).collect();
    let index = SpatialIndex::new(&positions);
    mesh.retain_vertices(|&v| index.nearest(v).is_some_and(|n| n.distance <= radius))
}

/// Scores every vertex of `surface` and culls to the configured fraction or threshold.
pub fn select_anchors(surface: &TriangleMesh<f64>, cfg: &PipelineConfig) -> Result<Vec<AnchorPoint<f64>>, PipelineError> {
    let scored = anchors::score_anchors(surface, &cfg.score_options())?;
    Ok(match cfg.anchors.threshold {
        Some(t) => anchors::cull_threshold(&scored, t),
        None => anchors::cull(&scored, cfg.anchors.keep_fraction)?,
    })
}

/// The reconstruction trimmed to the scan's support, or untrimmed when the
/// support radius is 0.
pub fn supported_surface(recon: &Reconstruction<f64>, samples: &[OrientedPoint<f64>], cfg: &PipelineConfig) -> TriangleMesh<f64> {
    if cfg.anchors.support_radius > 0.0 {
        trim_unsupported(&recon.mesh, samples, cfg.anchors.support_radius)
    } else {
        recon.mesh.clone()
    }
}

pub fn graph(anchors: &[AnchorPoint<f64>], cfg: &PipelineConfig) -> Result<SceneGraph<f64>, PipelineError> {
    Ok(build_graph(anchors, cfg.neighbor_radius(), &cfg.graph_options())?)
}

/// Everything built from one scan.
#[derive(Debug, Clone)]
pub struct Scene {
    pub samples: Vec<OrientedPoint<f64>>,
    pub degenerate: usize,
    pub reconstruction: Reconstruction<f64>,
    /// Reconstructed mesh trimmed to the scan's support; anchor ids index its vertices.
    pub surface: TriangleMesh<f64>,
    pub anchors: Vec<AnchorPoint<f64>>,
    pub graph: SceneGraph<f64>,
}

/// Scan to scene graph. A graph without edges is returned as is, not as an error.
pub fn build_scene(cloud: &PointCloud<f64>, cfg: &PipelineConfig) -> Result<Scene, PipelineError> {
    let (samples, degenerate) = normals(cloud, cfg)?;
    let reconstruction = surface(&samples, cfg)?;
    let surface = supported_surface(&reconstruction, &samples, cfg);
    let anchors = select_anchors(&surface, cfg)?;
    let graph = match graph(&anchors, cfg) {
        Ok(g) => g,
        Err(PipelineError::Graph(SceneGraphError::NoEdges(g))) => *g,
        Err(e) => return Err(e),
    };
    Ok(Scene {
        samples,
        degenerate,
        reconstruction,
        surface,
        anchors,
        graph,
    })
}
