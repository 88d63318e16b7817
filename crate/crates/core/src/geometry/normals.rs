//! Normal recovery by least-squares plane fitting over k-nearest neighborhoods.

use rayon::prelude::*;
use thiserror::Error;

use super::{symmetric_eigen3, OrientedPoint, PointCloud, SpatialIndex, Vec3};
use crate::scalar::Real;

pub const DEFAULT_NORMAL_K: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalError {
    #[error("neighborhood size k = {0} is below the minimum of 3")]
    KTooSmall(usize),
    #[error("cloud of {len} points cannot supply {needed} points per neighborhood")]
    CloudTooSmall { len: usize, needed: usize },
}

/// The plane normal at this vertex is not determined (collinear or coincident neighborhood).
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("vertex {vertex} has a degenerate neighborhood")]
pub struct DegenerateNeighborhood {
    pub vertex: usize,
}

pub type NormalEstimate<T> = Result<OrientedPoint<T>, DegenerateNeighborhood>;

/// One estimate per input vertex, in input order.
pub fn estimate_normals<T: Real>(
    cloud: &PointCloud<T>,
    k: usize,
) -> Result<Vec<NormalEstimate<T>>, NormalError> {
    if k < 3 {
        return Err(NormalError::KTooSmall(k));
    }
    if cloud.len() < k + 1 {
        return Err(NormalError::CloudTooSmall {
            len: cloud.len(),
            needed: k + 1,
        });
    }
    let index = SpatialIndex::new(&cloud.points);
    let origin = cloud.sensor_origin;
    Ok((0..cloud.len())
        .into_par_iter()
        .map(|i| fit_vertex(&index, i, k, origin))
        .collect())
}

/// Drops degenerate vertices.
pub fn oriented_points<T: Real>(estimates: &[NormalEstimate<T>]) -> Vec<OrientedPoint<T>> {
    estimates.iter().filter_map(|e| e.ok()).collect()
}

fn fit_vertex<T: Real>(
    index: &SpatialIndex<T>,
    vertex: usize,
    k: usize,
    sensor_origin: Vec3<T>,
) -> NormalEstimate<T> {
    let points = index.points();
    let position = points[vertex];
    let neighbors = index.knn(position, k + 1).expect("cloud holds k + 1 points");
    let mut members: Vec<usize> = neighbors
        .iter()
        .map(|n| n.id)
        .filter(|&id| id != vertex)
        .take(k)
        .collect();
    members.push(vertex);

    let centroid = Vec3::centroid(members.iter().map(|&i| points[i])).expect("non-empty");
    let mut cov = [[T::zero(); 3]; 3];
    for &i in &members {
        let d = points[i] - centroid;
        for r in 0..3 {
            for c in r..3 {
                cov[r][c] = cov[r][c] + d[r] * d[c];
            }
        }
    }
    let n = T::from_usize_lossy(members.len());
    for r in 0..3 {
        for c in r..3 {
            cov[r][c] = cov[r][c] / n;
            cov[c][r] = cov[r][c];
        }
    }

    let eig = symmetric_eigen3(cov);
    let [l0, l1, l2] = eig.values;
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
    if l2 <= T::zero() || (l1 - l0) <= tol * l2 {
        return Err(DegenerateNeighborhood { vertex });
    }
    let mut normal = eig.vectors[0]
        .normalized()
        .ok_or(DegenerateNeighborhood { vertex })?;
    if normal.dot(sensor_origin - position) < T::zero() {
        normal = -normal;
    }
    Ok(OrientedPoint { position, normal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn plane_cloud(n: usize, seed: u64, sigma: f64) -> PointCloud<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma.max(1e-300)).unwrap();
        let pts = (0..n)
            .map(|_| {
                let z = if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), z)
            })
            .collect();
        PointCloud::new(pts, Vec3::new(0.0, 0.0, 5.0))
    }

    #[test]
    fn exact_plane() {
        let cloud = plane_cloud(100, 3, 0.0);
        let est = estimate_normals(&cloud, 8).unwrap();
        for e in est {
            let p = e.unwrap();
            assert!(p.normal.angle_to(Vec3::new(0.0, 0.0, 1.0)) < 1e-6);
        }
    }

    #[test]
    fn oriented_toward_sensor() {
        let mut cloud = plane_cloud(60, 4, 0.0);
        cloud.sensor_origin = Vec3::new(0.3, -0.2, -4.0);
        for e in estimate_normals(&cloud, 6).unwrap() {
            let p = e.unwrap();
            assert!((p.normal.norm() - 1.0).abs() <= 1e-9);
            assert!(p.normal.dot(cloud.sensor_origin - p.position) >= 0.0);
            assert!(p.normal.z < 0.0);
        }
    }

    #[test]
    fn collinear_neighborhood_is_flagged() {
        let pts = (0..10).map(|i| Vec3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        let cloud = PointCloud::new(pts, Vec3::new(0.0, 0.0, 1.0));
        let est = estimate_normals(&cloud, 4).unwrap();
        assert!(est.iter().all(|e| e.is_err()));
        assert_eq!(est[3], Err(DegenerateNeighborhood { vertex: 3 }));
        assert!(oriented_points(&est).is_empty());
    }

    #[test]
    fn size_preconditions() {
        let cloud = plane_cloud(5, 1, 0.0);
        assert_eq!(estimate_normals(&cloud, 2), Err(NormalError::KTooSmall(2)));
        assert_eq!(
            estimate_normals(&cloud, 5),
            Err(NormalError::CloudTooSmall { len: 5, needed: 6 })
        );
    }

    #[test]
    fn single_precision_plane() {
        let c = plane_cloud(80, 9, 0.0);
        let cloud = PointCloud::new(c.points.iter().map(|p| p.cast::<f32>()).collect(), c.sensor_origin.cast());
        for e in estimate_normals(&cloud, 8).unwrap() {
            assert!(e.unwrap().normal.angle_to(Vec3::new(0.0, 0.0, 1.0)) < 1e-3);
        }
    }
}
