//! Surface reconstruction: splat oriented samples, solve a screened Poisson
//! problem on a regular lattice, and extract the indicator's level set.

mod grid;
mod marching;
mod mesh;
mod poisson;
mod tables;

use thiserror::Error;

use crate::geometry::OrientedPoint;
use crate::scalar::Real;

pub use grid::{splat_normals, GridDumpHeader, GridGeometry, ScalarGrid, VectorGrid};
pub use marching::{choose_isovalue, extract_isosurface};
pub use mesh::{ObjError, TriangleMesh};
pub use poisson::{
    poisson_residual, solve_poisson, solve_poisson_with, PoissonOptions, PoissonSolution,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructError {
    #[error("samples have zero extent")]
    DegenerateBounds,
    #[error("grid dimensions {0:?} must each be at least 8")]
    InvalidDims([usize; 3]),
    #[error("vector field or screening weight is not finite")]
    NonFiniteInput,
    #[error("solver stopped after {iterations} iterations at relative residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("isovalue {iso} outside field range [{min}, {max}]")]
    EmptySurface { iso: f64, min: f64, max: f64 },
}

/// Parameters of [`reconstruct`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructOptions<T> {
    pub dims: [usize; 3],
    /// Meters added around the sample bounds.
    pub padding: T,
    /// Screening weight is `screening_factor / spacing`; zero disables screening.
    pub screening_factor: T,
    pub tol: T,
    pub max_iterations: Option<usize>,
}

impl<T: Real> Default for ReconstructOptions<T> {
    fn default() -> Self {
        Self {
            dims: [128, 128, 128],
            padding: T::lit(0.3),
            screening_factor: T::lit(4.0),
            tol: T::lit(1e-6),
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction<T> {
    pub indicator: ScalarGrid<T>,
    pub isovalue: T,
    pub mesh: TriangleMesh<T>,
    pub iterations: usize,
    pub residual: T,
}

/// Oriented samples to triangle mesh.
pub fn reconstruct<T: Real>(
    points: &[OrientedPoint<T>],
    opts: &ReconstructOptions<T>,
) -> Result<Reconstruction<T>, ReconstructError> {
    let field = splat_normals(points, opts.dims, opts.padding)?;
    let screening = opts.screening_factor / field.geometry.spacing;
    let solution = solve_poisson_with(
        &field,
        &PoissonOptions {
            screening,
            tol: opts.tol,
            max_iterations: opts.max_iterations,
        },
    )?;
    let isovalue = choose_isovalue(&solution.grid, points.iter().map(|p| p.position));
    let mesh = extract_isosurface(&solution.grid, isovalue)?;
    Ok(Reconstruction {
        indicator: solution.grid,
        isovalue,
        mesh,
        iterations: solution.iterations,
        residual: solution.residual,
    })
}
