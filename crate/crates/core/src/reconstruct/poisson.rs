//! Screened Poisson solve on the node lattice.
//!
//! The indicator `chi` minimises
//!
//! ```text
//! sum over lattice edges ((chi_j - chi_i) / h - v_e)^2  +  w * sum over sampled nodes (chi_i - 1)^2
//! ```
//!
//! where `v_e` is the edge-averaged component of the splatted field. The normal
//! equations are the 7-point Laplacian against the central-difference divergence
//! in the interior, with natural (Neumann) conditions on the lattice boundary.
//! Everything is scaled by `h^2` so the operator has unit off-diagonal entries.

use rayon::prelude::*;

use super::{ReconstructError, ScalarGrid, VectorGrid};
use crate::scalar::Real;

const CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonOptions<T> {
    /// Data-term weight `w` (per unit `chi^2`, in 1/m^2 units of the unscaled energy).
    pub screening: T,
    /// Relative residual target.
    pub tol: T,
    /// Defaults to ten times the node count.
    pub max_iterations: Option<usize>,
}

impl<T: Real> Default for PoissonOptions<T> {
    fn default() -> Self {
        Self {
            screening: T::zero(),
            tol: T::lit(1e-6),
            max_iterations: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PoissonSolution<T> {
    pub grid: ScalarGrid<T>,
    pub iterations: usize,
    pub residual: T,
}

/// Solves with default iteration cap; see [`solve_poisson_with`].
pub fn solve_poisson<T: Real>(
    v: &VectorGrid<T>,
    screening: T,
    tol: T,
) -> Result<ScalarGrid<T>, ReconstructError> {
    solve_poisson_with(
        v,
        &PoissonOptions {
            screening,
            tol,
            max_iterations: None,
        },
    )
    .map(|s| s.grid)
}

struct System<'a, T> {
    dims: [usize; 3],
    mask: &'a [bool],
    shift: T,
    rhs: Vec<T>,
}

impl<'a, T: Real> System<'a, T> {
    fn new(v: &'a VectorGrid<T>, screening: T) -> Self {
        let g = &v.geometry;
        let h = g.spacing;
        let shift = screening * h * h;
        let [nx, ny, nz] = g.dims;
        let mut rhs = vec![T::zero(); g.node_count()];
        let half_h = h * T::lit(0.5);
        let strides = [1, nx, nx * ny];
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let idx = g.index(i, j, k);
                    let c = [i, j, k];
                    for a in 0..3 {
                        if c[a] + 1 < g.dims[a] {
                            let nb = idx + strides[a];
                            let flux = (v.values[idx][a] + v.values[nb][a]) * half_h;
                            rhs[idx] = rhs[idx] - flux;
                            rhs[nb] = rhs[nb] + flux;
                        }
                    }
                }
            }
        }
        if shift > T::zero() {
            for (b, &m) in rhs.iter_mut().zip(&v.sampled) {
                if m {
                    *b = *b + shift;
                }
            }
        } else {
            // pure Neumann problem: keep the right-hand side in the operator's range
            let mean = parallel_sum(&rhs) / T::from_usize_lossy(rhs.len());
            rhs.par_iter_mut().for_each(|b| *b = *b - mean);
        }
        Self {
            dims: g.dims,
            mask: &v.sampled,
            shift,
            rhs,
        }
    }

    fn diagonal(&self) -> Vec<T> {
        let [nx, ny, nz] = self.dims;
        let mut d = Vec::with_capacity(nx * ny * nz);
        let deg = |c: usize, n: usize| (c > 0) as usize + (c + 1 < n) as usize;
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let mut v = T::from_usize_lossy(deg(i, nx) + deg(j, ny) + deg(k, nz));
                    if self.mask[d.len()] {
                        v = v + self.shift;
                    }
                    d.push(v);
                }
            }
        }
        d
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let [nx, ny, nz] = self.dims;
        let slab = nx * ny;
        y.par_chunks_mut(slab).enumerate().for_each(|(k, out)| {
            let base = k * slab;
            for j in 0..ny {
                for i in 0..nx {
                    let local = j * nx + i;
                    let idx = base + local;
                    let c = x[idx];
                    let mut acc = T::zero();
                    if i > 0 {
                        acc = acc + c - x[idx - 1];
                    }
                    if i + 1 < nx {
                        acc = acc + c - x[idx + 1];
                    }
                    if j > 0 {
                        acc = acc + c - x[idx - nx];
                    }
                    if j + 1 < ny {
                        acc = acc + c - x[idx + nx];
                    }
                    if k > 0 {
                        acc = acc + c - x[idx - slab];
                    }
                    if k + 1 < nz {
                        acc = acc + c - x[idx + slab];
                    }
                    if self.mask[idx] {
                        acc = acc + self.shift * c;
                    }
                    out[local] = acc;
                }
            }
        });
    }

    fn residual_norm(&self, x: &[T], scratch: &mut [T]) -> T {
        self.apply(x, scratch);
        scratch
            .par_iter_mut()
            .zip(self.rhs.par_iter())
            .for_each(|(r, &b)| *r = b - *r);
        dot(scratch, scratch).sqrt()
    }
}

/// Chunked so the reduction order, and hence the result, never depends on scheduling.
fn parallel_sum<T: Real>(a: &[T]) -> T {
    let partial: Vec<T> = a
        .par_chunks(CHUNK)
        .map(|c| c.iter().fold(T::zero(), |s, &v| s + v))
        .collect();
    partial.into_iter().fold(T::zero(), |s, v| s + v)
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let partial: Vec<T> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).fold(T::zero(), |s, (&u, &v)| s + u * v))
        .collect();
    partial.into_iter().fold(T::zero(), |s, v| s + v)
}

/// `||A chi - b|| / ||b||` for the system assembled from `v` and `screening`.
pub fn poisson_residual<T: Real>(v: &VectorGrid<T>, screening: T, chi: &ScalarGrid<T>) -> T {
    let sys = System::new(v, screening);
    let mut scratch = vec![T::zero(); chi.values.len()];
    let r = sys.residual_norm(&chi.values, &mut scratch);
    let b = dot(&sys.rhs, &sys.rhs).sqrt();
    if b > T::zero() {
        r / b
    } else {
        r
    }
}

/// Jacobi-preconditioned conjugate gradients on the (semi)definite system.
pub fn solve_poisson_with<T: Real>(
    v: &VectorGrid<T>,
    opts: &PoissonOptions<T>,
) -> Result<PoissonSolution<T>, ReconstructError> {
    if v.values.iter().any(|x| !x.is_finite()) || !opts.screening.is_finite() {
        return Err(ReconstructError::NonFiniteInput);
    }
    let screening = opts.screening.max(T::zero());
    let sys = System::new(v, screening);
    let n = sys.rhs.len();
    let max_iter = opts.max_iterations.unwrap_or(10 * n);
    let b_norm = dot(&sys.rhs, &sys.rhs).sqrt();
    let mut x = vec![T::zero(); n];
    if b_norm == T::zero() {
        return Ok(PoissonSolution {
            grid: ScalarGrid {
                geometry: v.geometry,
                values: x,
            },
            iterations: 0,
            residual: T::zero(),
        });
    }
    let target = opts.tol * b_norm;
    let inv_diag: Vec<T> = sys.diagonal().into_iter().map(|d| T::one() / d).collect();

    let mut r = sys.rhs.clone();
    let mut z = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    let mut iterations = 0usize;
    let mut residual = b_norm;

    // Restart whenever the recurrence claims convergence but the true residual disagrees.
    'outer: while iterations < max_iter {
        z.par_iter_mut()
            .zip(r.par_iter().zip(inv_diag.par_iter()))
            .for_each(|(z, (&r, &d))| *z = r * d);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        loop {
            if iterations >= max_iter {
                break 'outer;
            }
            sys.apply(&p, &mut q);
            let pq = dot(&p, &q);
            if pq <= T::zero() {
                break;
            }
            let alpha = rz / pq;
            x.par_iter_mut()
                .zip(p.par_iter())
                .for_each(|(x, &p)| *x = *x + alpha * p);
            r.par_iter_mut()
                .zip(q.par_iter())
                .for_each(|(r, &q)| *r = *r - alpha * q);
            iterations += 1;
            if dot(&r, &r).sqrt() <= target {
                break;
            }
            z.par_iter_mut()
                .zip(r.par_iter().zip(inv_diag.par_iter()))
                .for_each(|(z, (&r, &d))| *z = r * d);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            p.par_iter_mut()
                .zip(z.par_iter())
                .for_each(|(p, &z)| *p = z + beta * *p);
        }
        residual = sys.residual_norm(&x, &mut q);
        if residual <= target {
            break;
        }
        r.copy_from_slice(&q);
    }

    if screening == T::zero() {
        let mean = parallel_sum(&x) / T::from_usize_lossy(n);
        x.par_iter_mut().for_each(|v| *v = *v - mean);
    }
    let relative = residual / b_norm;
    if residual > target {
        return Err(ReconstructError::NoConvergence {
            iterations,
            residual: relative.to_f64_lossy(),
        });
    }
    Ok(PoissonSolution {
        grid: ScalarGrid {
            geometry: v.geometry,
            values: x,
        },
        iterations,
        residual: relative,
    })
}
