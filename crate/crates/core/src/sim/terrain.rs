//! Synthetic ground-truth terrains.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::planner_global::Cell;
use crate::reconstruct::TriangleMesh;

type V = Vec3<f64>;

/// Regular height field `z = f(x, y)` with `nx * ny` vertices, triangles facing +z.
pub fn heightfield(
    nx: usize,
    ny: usize,
    spacing: f64,
    origin: (f64, f64),
    f: impl Fn(f64, f64) -> f64,
) -> TriangleMesh<f64> {
    heightfield_masked(nx, ny, spacing, origin, f, |_, _| true)
}

/// Like [`heightfield`], keeping only quads whose centre passes `keep`.
pub fn heightfield_masked(
    nx: usize,
    ny: usize,
    spacing: f64,
    origin: (f64, f64),
    f: impl Fn(f64, f64) -> f64,
    keep: impl Fn(f64, f64) -> bool,
) -> TriangleMesh<f64> {
    let at = |i: usize, j: usize| (origin.0 + i as f64 * spacing, origin.1 + j as f64 * spacing);
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (x, y) = at(i, j);
            vertices.push(V::new(x, y, f(x, y)));
        }
    }
    let mut triangles = Vec::new();
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let (x, y) = at(i, j);
            if !keep(x + 0.5 * spacing, y + 0.5 * spacing) {
                continue;
            }
            let a = j * nx + i;
            triangles.push([a, a + 1, a + nx + 1]);
            triangles.push([a, a + nx + 1, a + nx]);
        }
    }
    TriangleMesh::new(vertices, triangles).compacted()
}

/// Smooth pseudo-random field: a seeded sum of plane waves.
#[derive(Debug, Clone)]
pub struct Ripples {
    waves: Vec<(f64, f64, f64, f64)>,
}

impl Ripples {
    /// `count` waves with wavelengths in `[min_wavelength, 4 * min_wavelength]`.
    pub fn new(seed: u64, count: usize, min_wavelength: f64, amplitude: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves = (0..count)
            .map(|_| {
                let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let k = std::f64::consts::TAU / (min_wavelength * rng.random_range(1.0..4.0));
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                let a = amplitude * rng.random_range(0.3..1.0) / (count as f64).sqrt();
                (k * theta.cos(), k * theta.sin(), phase, a)
            })
            .collect();
        Self { waves }
    }

    pub fn at(&self, u: f64, v: f64) -> f64 {
        self.waves.iter().map(|&(ku, kv, p, a)| a * (ku * u + kv * v + p).sin()).sum()
    }
}

/// Maps global-grid cells to the world: row `y` grows toward -y, column `x` toward +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridFrame {
    /// World (x, y) of the north-west corner of cell (0, 0).
    pub origin: (f64, f64),
    pub cell_size: f64,
}

impl GridFrame {
    pub fn new(origin: (f64, f64), cell_size: f64) -> Self {
        Self { origin, cell_size }
    }

    pub fn center(&self, c: Cell) -> (f64, f64) {
        (
            self.origin.0 + (c.x as f64 + 0.5) * self.cell_size,
            self.origin.1 - (c.y as f64 + 0.5) * self.cell_size,
        )
    }

    /// Rectangle `(xmin, ymin, xmax, ymax)` straddling the shared edge of
    /// adjacent cells `a` and `b`, `width` across the edge and one cell plus
    /// `width` along it, so trenches around a cell close at the corners.
    pub fn trench(&self, a: Cell, b: Cell, width: f64) -> (f64, f64, f64, f64) {
        let (ca, cb) = (self.center(a), self.center(b));
        let (mx, my) = ((ca.0 + cb.0) / 2.0, (ca.1 + cb.1) / 2.0);
        let half_len = (self.cell_size + width) / 2.0;
        if a.x == b.x {
            (mx - half_len, my - width / 2.0, mx + half_len, my + width / 2.0)
        } else {
            (mx - width / 2.0, my - half_len, mx + width / 2.0, my + half_len)
        }
    }
}

/// Flat ground at z = 0 over a `width x height` cell grid plus `margin`, with
/// bottomless trenches cut along the listed cell edges.
pub fn trenched_ground(
    frame: &GridFrame,
    width: usize,
    height: usize,
    trenches: &[(Cell, Cell)],
    trench_width: f64,
    margin: f64,
    spacing: f64,
) -> TriangleMesh<f64> {
    let x0 = frame.origin.0 - margin;
    let y1 = frame.origin.1 + margin;
    let x1 = frame.origin.0 + width as f64 * frame.cell_size + margin;
    let y0 = frame.origin.1 - height as f64 * frame.cell_size - margin;
    let nx = ((x1 - x0) / spacing).ceil() as usize + 1;
    let ny = ((y1 - y0) / spacing).ceil() as usize + 1;
    let rects: Vec<_> = trenches.iter().map(|&(a, b)| frame.trench(a, b, trench_width)).collect();
    heightfield_masked(
        nx,
        ny,
        spacing,
        (x0, y0),
        |_, _| 0.0,
        |x, y| !rects.iter().any(|&(a, b, c, d)| x >= a && x <= c && y >= b && y <= d),
    )
}

/// Rough near-vertical rock face in the plane y = 0, facing -y, with a ledge
/// band; `width` along x and `height` along z.
pub fn cliff(width: f64, height: f64, spacing: f64, seed: u64) -> TriangleMesh<f64> {
    let rough = Ripples::new(seed, 24, 0.6, 0.25);
    let nx = (width / spacing).ceil() as usize + 1;
    let nz = (height / spacing).ceil() as usize + 1;
    let x0 = -width / 2.0;
    let mut vertices = Vec::with_capacity(nx * nz);
    for k in 0..nz {
        for i in 0..nx {
            let (x, z) = (x0 + i as f64 * spacing, k as f64 * spacing);
            // a ledge set back into the face about halfway up
            let ledge = 0.4 * (1.0 / (1.0 + (-(z - height * 0.55) * 6.0).exp()));
            vertices.push(V::new(x, rough.at(x, z) + ledge, z));
        }
    }
    let mut triangles = Vec::new();
    for k in 0..nz - 1 {
        for i in 0..nx - 1 {
            let a = k * nx + i;
            // wound to face -y, toward a sensor standing in front of the wall
            triangles.push([a, a + 1, a + nx + 1]);
            triangles.push([a, a + nx + 1, a + nx]);
        }
    }
    TriangleMesh::new(vertices, triangles)
}

/// Closed, lumpy ellipsoid with semi-axes `radii`, outward winding.
pub fn bumpy_ellipsoid(radii: V, rings: usize, seed: u64, bumpiness: f64) -> TriangleMesh<f64> {
    let rough = Ripples::new(seed, 32, 0.5, bumpiness);
    let segments = 2 * rings;
    let mut vertices = vec![V::new(0.0, 0.0, radii.z * (1.0 + rough.at(0.0, 1.0)))];
    for i in 1..rings {
        let theta = std::f64::consts::PI * i as f64 / rings as f64;
        for j in 0..segments {
            let phi = std::f64::consts::TAU * j as f64 / segments as f64;
            let dir = V::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            let s = 1.0 + rough.at(dir.x * 2.0 + dir.z, dir.y * 2.0 - dir.z);
            vertices.push(dir.mul_by_component(radii) * s);
        }
    }
    vertices.push(V::new(0.0, 0.0, -radii.z * (1.0 + rough.at(0.0, -1.0))));
    let south = vertices.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * segments + (j % segments);
    let mut triangles = Vec::new();
    for j in 0..segments {
        triangles.push([0, ring(1, j), ring(1, j + 1)]);
        triangles.push([south, ring(rings - 1, j + 1), ring(rings - 1, j)]);
    }
    for i in 1..rings - 1 {
        for j in 0..segments {
            let (a, b, c, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1));
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    TriangleMesh::new(vertices, triangles)
}

/// Rocky outcrop on an 8 m x 8 m patch: a ridge, a boulder field and a pit.
pub fn crag(seed: u64) -> TriangleMesh<f64> {
    let rough = Ripples::new(seed, 20, 0.8, 0.25);
    heightfield(81, 81, 0.1, (-4.0, -4.0), |x, y| {
        let ridge = 1.2 * (-((x - 0.5 * y - 1.0).powi(2)) / 1.5).exp();
        let pit = -0.8 * (-((x + 2.0).powi(2) + (y - 1.5).powi(2)) / 0.6).exp();
        ridge + pit + rough.at(x, y)
    })
}
