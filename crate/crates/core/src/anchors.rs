//! Anchor scoring: every surface vertex gets a risk score `r`, 0 being the
//! safest place to grip, built from local flatness and relative height.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{symmetric_eigen3, Point3, SpatialIndex, Vec3};
use crate::reconstruct::TriangleMesh;
use crate::scalar::{cmp_real, Real};

/// Flatness given to vertices without enough neighbours to fit a plane.
///
/// No point set inside a ball of radius `R` has an RMS plane residual above
/// `R / sqrt(3)`, so this is the largest score a real fit can produce.
pub fn max_flatness<T: Real>() -> T {
    T::one() / T::lit(3.0).sqrt()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnchorError {
    #[error("score weights ({flatness}, {height}) must be non-negative and sum to 1")]
    InvalidWeights { flatness: f64, height: f64 },
    #[error("keep fraction {0} outside (0, 1]")]
    InvalidKeepFraction(f64),
    #[error("radius {0} must be positive and finite")]
    InvalidRadius(f64),
    #[error("up axis must be a non-zero finite vector")]
    InvalidUp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct AnchorPoint<T> {
    /// Index of the source vertex in the reconstructed mesh.
    pub id: usize,
    pub position: Point3<T>,
    pub normal: Vec3<T>,
    /// Plane-fit RMS residual over the flatness radius, divided by the radius.
    pub flatness: T,
    /// `flatness` divided by the scene's 95th percentile, clamped to 1.
    pub flatness_norm: T,
    pub height_risk: T,
    pub r: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreWeights<T> {
    pub flatness: T,
    pub height: T,
}

impl<T: Real> ScoreWeights<T> {
    pub fn new(flatness: T, height: T) -> Result<Self, AnchorError> {
        let ok = flatness >= T::zero()
            && height >= T::zero()
            && ((flatness + height) - T::one()).abs() <= T::lit(1e-6);
        if ok {
            Ok(Self { flatness, height })
        } else {
            Err(AnchorError::InvalidWeights {
                flatness: flatness.to_f64_lossy(),
                height: height.to_f64_lossy(),
            })
        }
    }
}

impl<T: Real> Default for ScoreWeights<T> {
    fn default() -> Self {
        Self {
            flatness: T::lit(0.5),
            height: T::lit(0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreOptions<T> {
    pub weights: ScoreWeights<T>,
    pub flatness_radius: T,
    /// Horizontal radius of the relative-height window.
    pub height_window: T,
    pub up: Vec3<T>,
}

impl<T: Real> Default for ScoreOptions<T> {
    fn default() -> Self {
        Self {
            weights: ScoreWeights::default(),
            flatness_radius: T::lit(0.3),
            height_window: T::lit(2.0),
            up: Vec3::axis(2),
        }
    }
}

/// RMS orthogonal distance of the best-fit plane through all `points` within
/// `radius` of `points[vertex]` (the vertex included), divided by `radius`.
///
/// Fewer than three other points in range gives [`max_flatness`].
pub fn score_flatness<T: Real>(index: &SpatialIndex<T>, vertex: usize, radius: T) -> T {
    let center = index.points()[vertex];
    let hood = index.within_radius(center, radius);
    if hood.len() < 4 {
        return max_flatness();
    }
    let pts: Vec<Point3<T>> = hood.iter().map(|n| index.points()[n.id]).collect();
    plane_rms(&pts) / radius
}

/// RMS distance of `pts` to their total-least-squares plane.
pub fn plane_rms<T: Real>(pts: &[Point3<T>]) -> T {
    let Some(c) = Vec3::centroid(pts.iter().copied()) else {
        return T::zero();
    };
    let mut m = [[T::zero(); 3]; 3];
    for p in pts {
        let d = *p - c;
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] = m[a][b] + d[a] * d[b];
            }
        }
    }
    let n = T::from_usize_lossy(pts.len());
    for row in m.iter_mut() {
        for v in row.iter_mut() {
            *v = *v / n;
        }
    }
    symmetric_eigen3(m).values[0].max(T::zero()).sqrt()
}

/// Horizontal-window index used by [`score_relative_height`].
///
/// Vertices are bucketed on a square grid in the plane normal to `up`, each
/// cell keeping its height range. A query takes the range of every cell lying
/// wholly inside the window and tests points only in cells on its rim.
pub struct HeightWindow<T> {
    up: Vec3<T>,
    window: T,
    heights: Vec<T>,
    /// Points projected along `up` onto the plane through the origin.
    flat: Vec<Point3<T>>,
    /// In-plane coordinates of `flat`.
    uv: Vec<[T; 2]>,
    origin: [T; 2],
    cell: T,
    nx: usize,
    ny: usize,
    /// Vertex ids grouped by cell; cell `c` owns `order[starts[c]..starts[c + 1]]`.
    order: Vec<usize>,
    starts: Vec<usize>,
    cells: Vec<CellRange<T>>,
}

#[derive(Clone, Copy)]
struct CellRange<T> {
    lo: [T; 2],
    hi: [T; 2],
    h_min: T,
    h_max: T,
}

impl<T: Real> HeightWindow<T> {
    pub fn new(points: &[Point3<T>], up: Vec3<T>, window: T) -> Result<Self, AnchorError> {
        let up = up.normalized().ok_or(AnchorError::InvalidUp)?;
        if !(window >= T::zero() && window.is_finite()) {
            return Err(AnchorError::InvalidRadius(window.to_f64_lossy()));
        }
        let heights: Vec<T> = points.iter().map(|p| p.dot(up)).collect();
        let flat: Vec<Point3<T>> = points.iter().zip(&heights).map(|(p, &h)| *p - up * h).collect();
        // any unit vector orthogonal to up, then the third axis
        let helper = if up.x.abs() < T::lit(0.9) { Vec3::axis(0) } else { Vec3::axis(1) };
        let e1 = up.cross(helper).normalized().expect("helper is not parallel to up");
        let e2 = up.cross(e1);
        let uv: Vec<[T; 2]> = flat.iter().map(|p| [p.dot(e1), p.dot(e2)]).collect();

        let mut origin = [T::infinity(); 2];
        let mut top = [T::neg_infinity(); 2];
        for q in &uv {
            for a in 0..2 {
                origin[a] = origin[a].min(q[a]);
                top[a] = top[a].max(q[a]);
            }
        }
        let n = points.len().max(1);
        let (mut cell, mut nx, mut ny) = (T::one(), 1, 1);
        if !points.is_empty() {
            let extent = (top[0] - origin[0]).max(top[1] - origin[1]);
            // half the window, but never more cells than a few per point
            cell = (window / T::lit(2.0)).max(extent / T::from_usize_lossy(2 * n)).max(T::min_positive_value());
            let count = |cell: T| {
                let along = |a: usize| ((top[a] - origin[a]) / cell).floor().to_f64_lossy() as usize + 1;
                (along(0), along(1))
            };
            (nx, ny) = count(cell);
            while nx * ny > 4 * n + 16 {
                cell = cell * T::lit(2.0);
                (nx, ny) = count(cell);
            }
        }
        let key = |q: &[T; 2]| {
            let i = ((q[0] - origin[0]) / cell).floor().to_f64_lossy() as usize;
            let j = ((q[1] - origin[1]) / cell).floor().to_f64_lossy() as usize;
            j.min(ny - 1) * nx + i.min(nx - 1)
        };
        let keys: Vec<usize> = uv.iter().map(key).collect();
        let mut starts = vec![0; nx * ny + 1];
        for &k in &keys {
            starts[k + 1] += 1;
        }
        for c in 0..nx * ny {
            starts[c + 1] += starts[c];
        }
        let mut fill = starts.clone();
        let mut order = vec![0; points.len()];
        for (id, &k) in keys.iter().enumerate() {
            order[fill[k]] = id;
            fill[k] += 1;
        }
        let empty = CellRange {
            lo: [T::infinity(); 2],
            hi: [T::neg_infinity(); 2],
            h_min: T::infinity(),
            h_max: T::neg_infinity(),
        };
        let mut cells = vec![empty; nx * ny];
        for (id, &k) in keys.iter().enumerate() {
            let c = &mut cells[k];
            for a in 0..2 {
                c.lo[a] = c.lo[a].min(uv[id][a]);
                c.hi[a] = c.hi[a].max(uv[id][a]);
            }
            c.h_min = c.h_min.min(heights[id]);
            c.h_max = c.h_max.max(heights[id]);
        }
        Ok(Self {
            up,
            window,
            heights,
            flat,
            uv,
            origin,
            cell,
            nx,
            ny,
            order,
            starts,
            cells,
        })
    }

    pub fn up(&self) -> Vec3<T> {
        self.up
    }

    pub fn height(&self, vertex: usize) -> T {
        self.heights[vertex]
    }

    /// `(h_max - h) / (h_max - h_min)` over the vertices whose horizontal
    /// distance to `vertex` is at most the window; 0 when the window is level.
    pub fn score(&self, vertex: usize) -> T {
        let (lo, hi) = self.range(vertex);
        if hi <= lo {
            return T::zero();
        }
        ((hi - self.heights[vertex]) / (hi - lo)).max(T::zero()).min(T::one())
    }

    /// Height range over the window around `vertex`.
    fn range(&self, vertex: usize) -> (T, T) {
        let r = self.window;
        let r2 = r * r;
        let q = self.uv[vertex];
        let centre = self.flat[vertex];
        // slack for rounding between in-plane and projected distances
        let slack = T::lit(1e-9) * (r + q[0].abs() + q[1].abs() + T::one());
        let span = |a: usize, n: usize| {
            let lo = ((q[a] - r - self.origin[a]) / self.cell).floor().max(T::zero()).to_f64_lossy() as usize;
            let hi = ((q[a] + r - self.origin[a]) / self.cell).floor().max(T::zero()).to_f64_lossy() as usize;
            lo.min(n - 1)..=hi.min(n - 1)
        };
        let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
        for j in span(1, self.ny) {
            for i in span(0, self.nx) {
                let c = j * self.nx + i;
                let cell = &self.cells[c];
                if cell.h_min > cell.h_max || (cell.h_min >= lo && cell.h_max <= hi) {
                    continue; // empty, or cannot widen the range
                }
                let (mut near, mut far) = (T::zero(), T::zero());
                for a in 0..2 {
                    let gap = (cell.lo[a] - q[a]).max(q[a] - cell.hi[a]).max(T::zero());
                    let reach = (q[a] - cell.lo[a]).abs().max((cell.hi[a] - q[a]).abs());
                    near = near + gap * gap;
                    far = far + reach * reach;
                }
                if near.sqrt() > r + slack {
                    continue;
                }
                if far.sqrt() < r - slack {
                    lo = lo.min(cell.h_min);
                    hi = hi.max(cell.h_max);
                    continue;
                }
                for &id in &self.order[self.starts[c]..self.starts[c + 1]] {
                    if self.flat[id].distance_squared(centre) <= r2 {
                        lo = lo.min(self.heights[id]);
                        hi = hi.max(self.heights[id]);
                    }
                }
            }
        }
        (lo, hi)
    }
}

/// One-off relative height score of `points[vertex]`.
pub fn score_relative_height<T: Real>(
    points: &[Point3<T>],
    vertex: usize,
    window: T,
    up: Vec3<T>,
) -> Result<T, AnchorError> {
    Ok(HeightWindow::new(points, up, window)?.score(vertex))
}

/// Scores every mesh vertex. Output is in vertex order with `id` = vertex index.
pub fn score_anchors<T: Real>(
    mesh: &TriangleMesh<T>,
    opts: &ScoreOptions<T>,
) -> Result<Vec<AnchorPoint<T>>, AnchorError> {
    for r in [opts.flatness_radius, opts.height_window] {
        if !(r > T::zero() && r.is_finite()) {
            return Err(AnchorError::InvalidRadius(r.to_f64_lossy()));
        }
    }
    let w = ScoreWeights::new(opts.weights.flatness, opts.weights.height)?;
    let verts = &mesh.vertices;
    let window = HeightWindow::new(verts, opts.up, opts.height_window)?;
    let index = SpatialIndex::new(verts);
    let normals = mesh.vertex_normals();

    let raw: Vec<(T, T)> = (0..verts.len())
        .into_par_iter()
        .map(|i| {
            (
                score_flatness(&index, i, opts.flatness_radius),
                window.score(i),
            )
        })
        .collect();

    let p95 = percentile_95(raw.iter().map(|r| r.0).collect());
    let up = window.up();
    Ok(raw
        .into_iter()
        .enumerate()
        .map(|(id, (flatness, height_risk))| {
            let flatness_norm = if p95 > T::zero() {
                (flatness / p95).min(T::one())
            } else if flatness > T::zero() {
                T::one()
            } else {
                T::zero()
            };
            AnchorPoint {
                id,
                position: verts[id],
                normal: normals[id].unwrap_or(up),
                flatness,
                flatness_norm,
                height_risk,
                r: w.flatness * flatness_norm + w.height * height_risk,
            }
        })
        .collect())
}

/// Nearest-rank 95th percentile; 0 for an empty list.
fn percentile_95<T: Real>(mut v: Vec<T>) -> T {
    if v.is_empty() {
        return T::zero();
    }
    v.sort_by(cmp_real);
    let rank = (0.95 * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

fn by_score<T: Real>(a: &AnchorPoint<T>, b: &AnchorPoint<T>) -> std::cmp::Ordering {
    cmp_real(&a.r, &b.r).then(a.id.cmp(&b.id))
}

/// Number of anchors [`cull`] keeps out of `n`.
pub fn keep_count(n: usize, keep_fraction: f64) -> usize {
    // 0.15 * 100 evaluates to 15.000000000000002; do not let that round up to 16.
    let raw = keep_fraction * n as f64;
    ((raw - 1e-9 * raw.max(1.0)).ceil().max(0.0) as usize).min(n)
}

/// Keeps the `ceil(keep_fraction * N)` lowest-scoring anchors, sorted by `(r, id)`.
pub fn cull<T: Real>(
    anchors: &[AnchorPoint<T>],
    keep_fraction: f64,
) -> Result<Vec<AnchorPoint<T>>, AnchorError> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(AnchorError::InvalidKeepFraction(keep_fraction));
    }
    let mut sorted = anchors.to_vec();
    sorted.sort_by(by_score);
    sorted.truncate(keep_count(anchors.len(), keep_fraction));
    Ok(sorted)
}

/// Keeps anchors with `r <= max_r`, sorted by `(r, id)`.
pub fn cull_threshold<T: Real>(anchors: &[AnchorPoint<T>], max_r: T) -> Vec<AnchorPoint<T>> {
    let mut kept: Vec<_> = anchors.iter().copied().filter(|a| a.r <= max_r).collect();
    kept.sort_by(by_score);
    kept
}

/// Drops anchors with no scan sample within `radius`.
///
/// The Poisson surface bridges occluded gaps; vertices on such a bridge have
/// nothing physical underneath them and must not be offered as grips.
pub fn supported<T: Real>(
    anchors: &[AnchorPoint<T>],
    samples: &SpatialIndex<T>,
    radius: T,
) -> Vec<AnchorPoint<T>> {
    anchors
        .iter()
        .copied()
        .filter(|a| {
            samples
                .nearest(a.position)
                .is_some_and(|n| n.distance <= radius)
        })
        .collect()
}
