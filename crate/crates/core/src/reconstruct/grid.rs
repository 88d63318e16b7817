use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ReconstructError;
use crate::geometry::{Aabb, OrientedPoint, Point3, Vec3};
use crate::scalar::Real;

/// Node lattice shared by scalar and vector grids: `dims` nodes per axis,
/// cubic cells of edge `spacing`, node `(0,0,0)` at `origin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real", deserialize = "T: Real"))]
pub struct GridGeometry<T> {
    pub dims: [usize; 3],
    pub origin: Point3<T>,
    pub spacing: T,
}

impl<T: Real> GridGeometry<T> {
    pub fn new(dims: [usize; 3], origin: Point3<T>, spacing: T) -> Self {
        assert!(spacing > T::zero(), "grid spacing must be positive");
        assert!(dims.iter().all(|&d| d >= 2), "grid needs at least two nodes per axis");
        Self {
            dims,
            origin,
            spacing,
        }
    }

    /// Fits a cubic-cell lattice around `bounds` grown by `padding`.
    ///
    /// The longest padded axis receives exactly `max_dims` nodes; the other axes
    /// receive just enough nodes (at least `min(8, max_dims)`) to cover their
    /// extent, centred on the box.
    pub fn fit(bounds: &Aabb<T>, max_dims: [usize; 3], padding: T) -> Result<Self, ReconstructError> {
        if max_dims.iter().any(|&d| d < 8) {
            return Err(ReconstructError::InvalidDims(max_dims));
        }
        if bounds.is_empty() || bounds.extent().max_component() <= T::zero() {
            return Err(ReconstructError::DegenerateBounds);
        }
        let padded = bounds.expanded(padding.max(T::zero()));
        let extent = padded.extent();
        let mut spacing = T::zero();
        for a in 0..3 {
            spacing = spacing.max(extent[a] / T::from_usize_lossy(max_dims[a] - 1));
        }
        let center = padded.center();
        let mut dims = [0usize; 3];
        let mut origin = Vec3::zero();
        for a in 0..3 {
            let needed = (extent[a] / spacing - T::lit(1e-9)).ceil().to_usize().unwrap_or(0) + 1;
            dims[a] = needed.clamp(8, max_dims[a]);
            origin[a] = center[a] - spacing * T::from_usize_lossy(dims[a] - 1) * T::lit(0.5);
        }
        Ok(Self::new(dims, origin, spacing))
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let i = index % self.dims[0];
        let j = (index / self.dims[0]) % self.dims[1];
        let k = index / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    #[inline]
    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Point3<T> {
        self.origin
            + Vec3::new(
                T::from_usize_lossy(i),
                T::from_usize_lossy(j),
                T::from_usize_lossy(k),
            ) * self.spacing
    }

    /// Cell containing `p` (clamped to the lattice) and the local coordinates in `[0,1]^3`.
    pub fn locate(&self, p: Point3<T>) -> ([usize; 3], [T; 3]) {
        let mut cell = [0usize; 3];
        let mut frac = [T::zero(); 3];
        for a in 0..3 {
            let u = (p[a] - self.origin[a]) / self.spacing;
            let max_cell = self.dims[a] - 2;
            let c = u.floor().max(T::zero()).to_usize().unwrap_or(0).min(max_cell);
            cell[a] = c;
            frac[a] = (u - T::from_usize_lossy(c)).max(T::zero()).min(T::one());
        }
        (cell, frac)
    }

    /// The 8 trilinear (node index, weight) pairs for `p`.
    pub fn trilinear(&self, p: Point3<T>) -> [(usize, T); 8] {
        let (c, f) = self.locate(p);
        let mut out = [(0usize, T::zero()); 8];
        for (n, slot) in out.iter_mut().enumerate() {
            let (di, dj, dk) = (n & 1, (n >> 1) & 1, (n >> 2) & 1);
            let w = |d: usize, t: T| if d == 1 { t } else { T::one() - t };
            *slot = (
                self.index(c[0] + di, c[1] + dj, c[2] + dk),
                w(di, f[0]) * w(dj, f[1]) * w(dk, f[2]),
            );
        }
        out
    }

    pub fn translated(&self, offset: Vec3<T>) -> Self {
        Self {
            origin: self.origin + offset,
            ..*self
        }
    }
}

/// Indicator field sampled at grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid<T> {
    pub geometry: GridGeometry<T>,
    pub values: Vec<T>,
}

impl<T: Real> ScalarGrid<T> {
    pub fn zeros(geometry: GridGeometry<T>) -> Self {
        Self {
            values: vec![T::zero(); geometry.node_count()],
            geometry,
        }
    }

    pub fn from_fn(geometry: GridGeometry<T>, f: impl Fn(Point3<T>) -> T) -> Self {
        let mut values = Vec::with_capacity(geometry.node_count());
        for k in 0..geometry.dims[2] {
            for j in 0..geometry.dims[1] {
                for i in 0..geometry.dims[0] {
                    values.push(f(geometry.node_position(i, j, k)));
                }
            }
        }
        Self { geometry, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> T {
        self.values[self.geometry.index(i, j, k)]
    }

    /// Trilinear interpolation; positions outside the lattice are clamped.
    pub fn sample(&self, p: Point3<T>) -> T {
        self.geometry
            .trilinear(p)
            .iter()
            .fold(T::zero(), |acc, &(i, w)| acc + self.values[i] * w)
    }

    pub fn min_max(&self) -> (T, T) {
        self.values.iter().fold(
            (T::infinity(), T::neg_infinity()),
            |(lo, hi), &v| (lo.min(v), hi.max(v)),
        )
    }

    pub fn mean(&self) -> T {
        self.values.iter().copied().sum::<T>() / T::from_usize_lossy(self.values.len())
    }

    /// Writes `<prefix>.raw` (little-endian values, x fastest) and `<prefix>.json` (header).
    pub fn write_dump(&self, prefix: &Path) -> io::Result<()> {
        let raw = prefix.with_extension("raw");
        let mut w = BufWriter::new(File::create(&raw)?);
        let wide = std::mem::size_of::<T>() == 8;
        for v in &self.values {
            if wide {
                w.write_all(&v.to_f64_lossy().to_le_bytes())?;
            } else {
                w.write_all(&(v.to_f64_lossy() as f32).to_le_bytes())?;
            }
        }
        w.flush()?;
        let header = GridDumpHeader {
            dims: self.geometry.dims,
            origin: self.geometry.origin.cast::<f64>(),
            spacing: self.geometry.spacing.to_f64_lossy(),
            dtype: if wide { "f64le" } else { "f32le" }.to_string(),
            layout: "x-fastest".to_string(),
            raw_file: raw
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
        };
        let text = serde_json::to_string_pretty(&header).map_err(io::Error::other)?;
        std::fs::write(prefix.with_extension("json"), text + "\n")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDumpHeader {
    pub dims: [usize; 3],
    pub origin: Point3<f64>,
    pub spacing: f64,
    pub dtype: String,
    pub layout: String,
    pub raw_file: String,
}

/// Splatted normal field plus the mask of nodes that received sample weight.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGrid<T> {
    pub geometry: GridGeometry<T>,
    pub values: Vec<Vec3<T>>,
    pub sampled: Vec<bool>,
}

impl<T: Real> VectorGrid<T> {
    pub fn zeros(geometry: GridGeometry<T>) -> Self {
        let n = geometry.node_count();
        Self {
            geometry,
            values: vec![Vec3::zero(); n],
            sampled: vec![false; n],
        }
    }

    /// Distributes each normal over its 8 surrounding nodes with trilinear weights.
    pub fn splat(geometry: GridGeometry<T>, points: &[OrientedPoint<T>]) -> Self {
        let mut grid = Self::zeros(geometry);
        for p in points {
            for (idx, w) in geometry.trilinear(p.position) {
                if w > T::zero() {
                    grid.values[idx] += p.normal * w;
                    grid.sampled[idx] = true;
                }
            }
        }
        grid
    }

    pub fn sum(&self) -> Vec3<T> {
        self.values.iter().fold(Vec3::zero(), |a, &v| a + v)
    }
}

/// Builds the lattice around the samples and splats their normals onto it.
pub fn splat_normals<T: Real>(
    points: &[OrientedPoint<T>],
    dims: [usize; 3],
    padding: T,
) -> Result<VectorGrid<T>, ReconstructError> {
    let bounds = Aabb::from_points(points.iter().map(|p| &p.position));
    let geometry = GridGeometry::fit(&bounds, dims, padding)?;
    Ok(VectorGrid::splat(geometry, points))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_geometry() -> GridGeometry<f64> {
        GridGeometry::new([8, 8, 8], Vec3::zero(), 0.5)
    }

    fn op(p: Vec3<f64>, n: Vec3<f64>) -> OrientedPoint<f64> {
        OrientedPoint { position: p, normal: n }
    }

    #[test]
    fn point_on_node_goes_to_that_node() {
        let g = unit_geometry();
        let n = Vec3::new(0.0, 0.6, 0.8);
        let v = VectorGrid::splat(g, &[op(g.node_position(2, 3, 4), n)]);
        for (i, val) in v.values.iter().enumerate() {
            if i == g.index(2, 3, 4) {
                assert_eq!(*val, n);
            } else {
                assert_eq!(*val, Vec3::zero());
            }
        }
        assert_eq!(v.sampled.iter().filter(|&&s| s).count(), 1);
    }

    #[test]
    fn point_on_last_node_stays_on_grid() {
        let g = unit_geometry();
        let n = Vec3::new(1.0, 0.0, 0.0);
        let v = VectorGrid::splat(g, &[op(g.node_position(7, 7, 7), n)]);
        assert_eq!(v.values[g.index(7, 7, 7)], n);
    }

    #[test]
    fn cell_center_splits_evenly() {
        let g = unit_geometry();
        let n = Vec3::new(0.0, 0.0, 1.0);
        let p = g.node_position(1, 1, 1) + Vec3::splat(0.25);
        let v = VectorGrid::splat(g, &[op(p, n)]);
        for di in 0..2 {
            for dj in 0..2 {
                for dk in 0..2 {
                    assert_eq!(v.values[g.index(1 + di, 1 + dj, 1 + dk)], n / 8.0);
                }
            }
        }
        assert_eq!(v.sampled.iter().filter(|&&s| s).count(), 8);
    }

    #[test]
    fn splat_preserves_total() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<_> = (0..500)
            .map(|_| {
                let p = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-2.0..0.5), rng.random_range(0.0..3.0));
                let n = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalized().unwrap();
                op(p, n)
            })
            .collect();
        let v = splat_normals(&pts, [16, 16, 16], 0.1).unwrap();
        // direct summation oracle
        let expected = pts.iter().fold(Vec3::zero(), |a, p| a + p.normal);
        assert!((v.sum() - expected).norm() < 1e-10);
    }

    #[test]
    fn degenerate_bounds() {
        let p = op(Vec3::new(1.0, 1.0, 1.0), Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(splat_normals(&[p, p, p, p], [16, 16, 16], 0.5), Err(ReconstructError::DegenerateBounds));
        assert_eq!(splat_normals::<f64>(&[], [16, 16, 16], 0.5), Err(ReconstructError::DegenerateBounds));
        let q = op(Vec3::new(2.0, 1.0, 1.0), Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(splat_normals(&[p, q], [4, 16, 16], 0.5), Err(ReconstructError::InvalidDims([4, 16, 16])));
    }

    #[test]
    fn fit_uses_cubic_cells_and_covers_bounds() {
        let b = Aabb { min: Vec3::new(0.0, 0.0, 0.0), max: Vec3::new(10.0, 1.0, 4.0) };
        let g = GridGeometry::fit(&b, [64, 64, 64], 0.5).unwrap();
        assert_eq!(g.dims[0], 64);
        assert!(g.dims[1] >= 8 && g.dims[1] < 64);
        let far = g.node_position(g.dims[0] - 1, g.dims[1] - 1, g.dims[2] - 1);
        for a in 0..3 {
            assert!(g.origin[a] <= b.min[a] - 0.5 + 1e-9);
            assert!(far[a] >= b.max[a] + 0.5 - 1e-9);
        }
    }

    #[test]
    fn linear_field_interpolates_exactly() {
        let g = unit_geometry();
        let s = ScalarGrid::from_fn(g, |p| 2.0 * p.z - 0.5 * p.x + 1.0);
        for p in [Vec3::new(0.3, 1.1, 2.2), Vec3::new(3.49, 0.01, 0.77)] {
            assert!((s.sample(p) - (2.0 * p.z - 0.5 * p.x + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn dump_writes_header_and_raw() {
        let dir = tempfile::tempdir().unwrap();
        let s = ScalarGrid::from_fn(unit_geometry(), |p| p.x);
        let prefix = dir.path().join("chi");
        s.write_dump(&prefix).unwrap();
        let raw = std::fs::read(prefix.with_extension("raw")).unwrap();
        assert_eq!(raw.len(), 8 * 512);
        assert_eq!(f64::from_le_bytes(raw[8..16].try_into().unwrap()), 0.5);
        let header: GridDumpHeader = serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("json")).unwrap()).unwrap();
        assert_eq!(header.dims, [8, 8, 8]);
        assert_eq!(header.spacing, 0.5);
    }
}
