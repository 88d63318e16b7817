//! Ray-cast range sensor over a triangle mesh.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, PointCloud, Vec3};
use crate::reconstruct::TriangleMesh;

type V = Vec3<f64>;

/// Angles in radians; azimuth from +x toward +y, elevation from the xy-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarConfig {
    pub max_range: f64,
    pub noise_sigma: f64,
    pub azimuth_step: f64,
    pub elevation_step: f64,
    pub azimuth_min: f64,
    pub azimuth_max: f64,
    pub elevation_min: f64,
    pub elevation_max: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            max_range: 5.6,
            noise_sigma: 0.03,
            azimuth_step: 1f64.to_radians(),
            elevation_step: 1f64.to_radians(),
            azimuth_min: -std::f64::consts::PI,
            azimuth_max: std::f64::consts::PI,
            elevation_min: -std::f64::consts::FRAC_PI_2,
            elevation_max: std::f64::consts::FRAC_PI_4,
        }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(format!("max_range must be positive, got {}", self.max_range));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        if !(self.azimuth_step > 0.0 && self.elevation_step > 0.0) {
            return Err("angular steps must be positive".into());
        }
        if self.azimuth_max < self.azimuth_min || self.elevation_max < self.elevation_min {
            return Err("field of view limits are reversed".into());
        }
        Ok(())
    }

    /// Unit ray directions in scan order: elevation-major, azimuth-minor.
    pub fn directions(&self) -> Vec<V> {
        let full_circle = self.azimuth_max - self.azimuth_min >= std::f64::consts::TAU - 1e-9;
        let span = |lo: f64, hi: f64, step: f64| ((hi - lo) / step + 1e-9).floor() as usize + 1;
        let mut n_az = span(self.azimuth_min, self.azimuth_max, self.azimuth_step);
        if full_circle && self.azimuth_min + (n_az - 1) as f64 * self.azimuth_step >= self.azimuth_max - 1e-9 {
            n_az -= 1; // do not scan the seam twice
        }
        let n_el = span(self.elevation_min, self.elevation_max, self.elevation_step);
        let mut dirs = Vec::with_capacity(n_az * n_el);
        for i in 0..n_el {
            let el = self.elevation_min + i as f64 * self.elevation_step;
            let (se, ce) = el.sin_cos();
            for j in 0..n_az {
                let az = self.azimuth_min + j as f64 * self.azimuth_step;
                let (sa, ca) = az.sin_cos();
                dirs.push(V::new(ce * ca, ce * sa, se));
            }
        }
        dirs
    }
}

#[derive(Debug, Clone)]
enum BvhNode {
    Leaf { bounds: Aabb<f64>, start: usize, end: usize },
    Inner { bounds: Aabb<f64>, left: usize, right: usize },
}

impl BvhNode {
    fn bounds(&self) -> &Aabb<f64> {
        match self {
            BvhNode::Leaf { bounds, .. } | BvhNode::Inner { bounds, .. } => bounds,
        }
    }
}

const BVH_LEAF: usize = 4;

/// Bounding-volume hierarchy over the triangles of a mesh.
#[derive(Debug, Clone)]
pub struct Bvh {
    tris: Vec<[V; 3]>,
    order: Vec<usize>,
    nodes: Vec<BvhNode>,
}

impl Bvh {
    pub fn new(mesh: &TriangleMesh<f64>) -> Self {
        let tris: Vec<[V; 3]> = mesh
            .triangles
            .iter()
            .map(|t| t.map(|i| mesh.vertices[i]))
            .collect();
        let centroids: Vec<V> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut bvh = Self {
            order: (0..tris.len()).collect(),
            tris,
            nodes: Vec::new(),
        };
        if !bvh.tris.is_empty() {
            let n = bvh.tris.len();
            bvh.build(&centroids, 0, n);
        }
        bvh
    }

    fn build(&mut self, centroids: &[V], start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        for &t in &self.order[start..end] {
            for p in self.tris[t] {
                bounds.grow(p);
            }
        }
        let me = self.nodes.len();
        if end - start <= BVH_LEAF {
            self.nodes.push(BvhNode::Leaf { bounds, start, end });
            return me;
        }
        let cb = Aabb::from_points(self.order[start..end].iter().map(|&t| &centroids[t]));
        let axis = cb.longest_axis();
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        self.nodes.push(BvhNode::Leaf { bounds, start: 0, end: 0 });
        let left = self.build(centroids, start, mid);
        let right = self.build(centroids, mid, end);
        self.nodes[me] = BvhNode::Inner { bounds, left, right };
        me
    }

    /// Distance to the nearest hit along the unit ray, if within `t_max`.
    pub fn cast(&self, origin: V, dir: V, t_max: f64) -> Option<f64> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = V::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best = t_max;
        let mut hit = false;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !slab(node.bounds(), origin, inv, best) {
                continue;
            }
            match *node {
                BvhNode::Leaf { start, end, .. } => {
                    for &t in &self.order[start..end] {
                        if let Some(d) = intersect(&self.tris[t], origin, dir) {
                            if d <= best {
                                best = d;
                                hit = true;
                            }
                        }
                    }
                }
                BvhNode::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        hit.then_some(best)
    }
}

fn slab(b: &Aabb<f64>, o: V, inv: V, t_max: f64) -> bool {
    let mut t0 = 0.0f64;
    let mut t1 = t_max;
    for a in 0..3 {
        let mut near = (b.min[a] - o[a]) * inv[a];
        let mut far = (b.max[a] - o[a]) * inv[a];
        if near > far {
            std::mem::swap(&mut near, &mut far);
        }
        // NaN from 0 * inf means the ray lies in the slab plane; keep it
        if near.is_nan() || far.is_nan() {
            if o[a] < b.min[a] || o[a] > b.max[a] {
                return false;
            }
            continue;
        }
        t0 = t0.max(near);
        t1 = t1.min(far);
        if t0 > t1 * (1.0 + 4.0 * f64::EPSILON) {
            return false;
        }
    }
    true
}

/// Moller-Trumbore, two-sided.
fn intersect(tri: &[V; 3], o: V, d: V) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = d.cross(e2);
    let det = e1.dot(p);
    if det.abs() <= 1e-14 * e1.norm() * e2.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - tri[0];
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = d.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > 1e-9).then_some(t)
}

/// A terrain prepared for repeated scanning.
#[derive(Debug, Clone)]
pub struct Lidar {
    bvh: Bvh,
}

impl Lidar {
    pub fn new(terrain: &TriangleMesh<f64>) -> Self {
        Self {
            bvh: Bvh::new(terrain),
        }
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    /// One return per ray that hits within range, in ray order. Noise is added
    /// along the ray after the hit is found, so it never creates or removes returns.
    pub fn scan(&self, pose: V, cfg: &LidarConfig, seed: u64) -> PointCloud<f64> {
        let dirs = cfg.directions();
        let hits: Vec<Option<f64>> = dirs
            .par_iter()
            .map(|&d| self.bvh.cast(pose, d, cfg.max_range))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, cfg.noise_sigma).expect("validated sigma");
        let points = dirs
            .iter()
            .zip(&hits)
            .filter_map(|(&d, h)| {
                h.map(|t| {
                    let e = if cfg.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                    pose + d * (t + e)
                })
            })
            .collect();
        PointCloud::new(points, pose)
    }
}

/// Scans `terrain` from `pose`. Occluded and out-of-range rays give no point.
pub fn simulate_scan(
    terrain: &TriangleMesh<f64>,
    pose: V,
    cfg: &LidarConfig,
    seed: u64,
) -> PointCloud<f64> {
    Lidar::new(terrain).scan(pose, cfg, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(x: f64, half: f64) -> TriangleMesh<f64> {
        let v = vec![
            V::new(x, -half, -half),
            V::new(x, half, -half),
            V::new(x, half, half),
            V::new(x, -half, half),
        ];
        TriangleMesh::new(v, vec![[0, 1, 2], [0, 2, 3]])
    }

    #[test]
    fn ray_grid_counts() {
        let cfg = LidarConfig {
            azimuth_step: 90f64.to_radians(),
            elevation_step: 45f64.to_radians(),
            elevation_min: -std::f64::consts::FRAC_PI_4,
            elevation_max: std::f64::consts::FRAC_PI_4,
            ..LidarConfig::default()
        };
        assert_eq!(cfg.directions().len(), 4 * 3);
        for d in cfg.directions() {
            assert!((d.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn bvh_matches_brute_force() {
        let mut mesh = TriangleMesh::default();
        for i in 0..40 {
            mesh.append(&quad(1.0 + i as f64 * 0.1, 0.3 + 0.02 * i as f64));
        }
        let bvh = Bvh::new(&mesh);
        let cfg = LidarConfig { azimuth_step: 0.02, elevation_step: 0.02, ..LidarConfig::default() };
        for d in cfg.directions() {
            let brute = mesh
                .triangles
                .iter()
                .filter_map(|t| intersect(&t.map(|i| mesh.vertices[i]), V::zero(), d))
                .filter(|&t| t <= 10.0)
                .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))));
            assert_eq!(bvh.cast(V::zero(), d, 10.0), brute);
        }
    }

    #[test]
    fn out_of_range_and_exact_hits() {
        let far = quad(6.0, 50.0);
        let cfg = LidarConfig::default();
        assert!(simulate_scan(&far, V::zero(), &cfg, 1).is_empty());

        let near = quad(2.0, 0.5);
        let exact = LidarConfig { noise_sigma: 0.0, azimuth_step: 0.01, elevation_step: 0.01, ..cfg };
        let cloud = simulate_scan(&near, V::zero(), &exact, 1);
        assert!(cloud.len() > 100);
        for p in &cloud.points {
            assert!((p.x - 2.0).abs() < 1e-12, "{p:?}");
        }
        assert_eq!(cloud.sensor_origin, V::zero());
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let wall = quad(2.0, 1.0);
        let cfg = LidarConfig { azimuth_step: 0.05, elevation_step: 0.05, ..LidarConfig::default() };
        let a = simulate_scan(&wall, V::zero(), &cfg, 7);
        let b = simulate_scan(&wall, V::zero(), &cfg, 7);
        let c = simulate_scan(&wall, V::zero(), &cfg, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let spread = a.points.iter().map(|p| (p.norm() - p.norm() / p.x * 2.0).abs()).fold(0.0, f64::max);
        assert!(spread > 0.01 && spread < 0.2);
    }
}
