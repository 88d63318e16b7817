//! Marching cubes over a [`ScalarGrid`].

use super::tables::{CORNER_OFFSETS, EDGE_CORNERS, TRI_TABLE};
use super::{ReconstructError, ScalarGrid, TriangleMesh};
use crate::geometry::Vec3;
use crate::scalar::Real;

const UNSET: u32 = u32::MAX;

/// Extracts the `iso` level set.
///
/// Corners with value `< iso` count as inside. Triangles are wound so their
/// normals point toward increasing field values. Vertices on lattice edges are
/// shared between neighbouring cells, so a level set that does not touch the
/// lattice boundary yields a closed mesh. Output order follows cell index order.
pub fn extract_isosurface<T: Real>(
    grid: &ScalarGrid<T>,
    iso: T,
) -> Result<TriangleMesh<T>, ReconstructError> {
    let (lo, hi) = grid.min_max();
    if !(lo < iso && iso <= hi) {
        return Err(ReconstructError::EmptySurface {
            iso: iso.to_f64_lossy(),
            min: lo.to_f64_lossy(),
            max: hi.to_f64_lossy(),
        });
    }
    let g = &grid.geometry;
    let [nx, ny, nz] = g.dims;
    let mut edge_vertex = vec![UNSET; 3 * g.node_count()];
    let mut mesh = TriangleMesh::default();

    let mut corner_idx = [0usize; 8];
    let mut corner_val = [T::zero(); 8];
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut case = 0usize;
                for (c, off) in CORNER_OFFSETS.iter().enumerate() {
                    let idx = g.index(i + off[0], j + off[1], k + off[2]);
                    corner_idx[c] = idx;
                    corner_val[c] = grid.values[idx];
                    if corner_val[c] < iso {
                        case |= 1 << c;
                    }
                }
                let row = &TRI_TABLE[case];
                if row[0] < 0 {
                    continue;
                }
                let mut vertex_of_edge = |e: usize, mesh: &mut TriangleMesh<T>| -> usize {
                    let [ca, cb] = EDGE_CORNERS[e];
                    let (oa, ob) = (CORNER_OFFSETS[ca], CORNER_OFFSETS[cb]);
                    let axis = (0..3).find(|&a| oa[a] != ob[a]).expect("edge spans one axis");
                    let (lower, upper) = if oa[axis] < ob[axis] { (ca, cb) } else { (cb, ca) };
                    let key = 3 * corner_idx[lower] + axis;
                    if edge_vertex[key] == UNSET {
                        let (va, vb) = (corner_val[lower], corner_val[upper]);
                        let t = (iso - va) / (vb - va);
                        let pa = g.node_position(i + CORNER_OFFSETS[lower][0], j + CORNER_OFFSETS[lower][1], k + CORNER_OFFSETS[lower][2]);
                        let mut p = pa;
                        p[axis] = pa[axis] + t * g.spacing;
                        edge_vertex[key] = mesh.vertices.len() as u32;
                        mesh.vertices.push(p);
                    }
                    edge_vertex[key] as usize
                };
                for tri in row.chunks(3).take_while(|t| t[0] >= 0) {
                    let a = vertex_of_edge(tri[0] as usize, &mut mesh);
                    let b = vertex_of_edge(tri[1] as usize, &mut mesh);
                    let c = vertex_of_edge(tri[2] as usize, &mut mesh);
                    mesh.triangles.push([a, c, b]);
                }
            }
        }
    }
    Ok(mesh)
}

/// Mean of the trilinearly interpolated field at the sample positions.
pub fn choose_isovalue<T: Real>(
    grid: &ScalarGrid<T>,
    positions: impl IntoIterator<Item = Vec3<T>>,
) -> T {
    let mut sum = T::zero();
    let mut n = 0usize;
    for p in positions {
        sum = sum + grid.sample(p);
        n += 1;
    }
    if n == 0 {
        T::zero()
    } else {
        sum / T::from_usize_lossy(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reconstruct::GridGeometry;
    use proptest::prelude::*;

    fn centered(n: usize, half: f64) -> GridGeometry<f64> {
        let h = 2.0 * half / (n - 1) as f64;
        GridGeometry::new([n, n, n], Vec3::splat(-half), h)
    }

    #[test]
    fn sphere_from_distance_field() {
        let g = centered(33, 1.0);
        let f = ScalarGrid::from_fn(g, |p| p.norm());
        let m = extract_isosurface(&f, 0.5).unwrap();
        for v in &m.vertices {
            let r = v.norm();
            assert!((r - 0.5).abs() <= g.spacing, "radius {r}");
        }
        assert!(m.is_closed());
        assert_eq!(m.euler_characteristic(), 2);
        assert!(!m.has_duplicate_triangles());
        // normals point toward increasing field, i.e. outward
        for t in 0..m.triangles.len() {
            let a = m.vertices[m.triangles[t][0]];
            assert!(m.face_normal(t).dot(a) > 0.0);
        }
    }

    #[test]
    fn iso_outside_range_is_empty() {
        let g = centered(9, 1.0);
        let f = ScalarGrid::from_fn(g, |p| p.norm());
        assert!(matches!(extract_isosurface(&f, -0.1), Err(ReconstructError::EmptySurface { .. })));
        assert!(matches!(extract_isosurface(&f, 0.0), Err(ReconstructError::EmptySurface { .. })));
        assert!(matches!(extract_isosurface(&f, 10.0), Err(ReconstructError::EmptySurface { .. })));
    }

    #[test]
    fn isovalue_of_constant_and_linear_fields() {
        let g = centered(9, 1.0);
        let c = ScalarGrid::from_fn(g, |_| 0.7);
        assert_eq!(choose_isovalue(&c, [Vec3::new(0.1, 0.2, 0.3), Vec3::new(-0.5, 0.0, 0.9)]), 0.7);
        let lin = ScalarGrid::from_fn(g, |p| 3.0 * p.z + 1.0);
        let z0 = 0.37;
        let samples = (0..10).map(|i| Vec3::new(-0.9 + 0.17 * i as f64, 0.3 - 0.05 * i as f64, z0));
        assert!((choose_isovalue(&lin, samples) - (3.0 * z0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn torus_has_zero_euler_characteristic() {
        let g = centered(41, 1.0);
        let f = ScalarGrid::from_fn(g, |p| {
            let q = (p.x * p.x + p.y * p.y).sqrt() - 0.6;
            (q * q + p.z * p.z).sqrt()
        });
        let m = extract_isosurface(&f, 0.25).unwrap();
        assert!(m.is_closed());
        assert_eq!(m.euler_characteristic(), 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Arbitrary fields, including every ambiguous face configuration.
        #[test]
        fn edges_never_shared_by_more_than_two_triangles(
            vals in prop::collection::vec(-1.0f64..1.0, 6 * 6 * 6),
            iso in -0.5f64..0.5,
        ) {
            let g = GridGeometry::new([6, 6, 6], Vec3::zero(), 1.0);
            let mut f = ScalarGrid { geometry: g, values: vals };
            // pad with a high boundary so the surface is never clipped
            for k in 0..6 { for j in 0..6 { for i in 0..6 {
                if [i, j, k].iter().any(|&c| c == 0 || c == 5) {
                    let idx = g.index(i, j, k);
                    f.values[idx] = 2.0;
                }
            }}}
            if let Ok(m) = extract_isosurface(&f, iso) {
                prop_assert!(m.max_edge_valence() <= 2);
                prop_assert!(!m.has_duplicate_triangles());
                prop_assert!(m.is_closed());
            }
        }

        #[test]
        fn binary_fields_stay_manifold(bits in prop::collection::vec(any::<bool>(), 5 * 5 * 5)) {
            let g = GridGeometry::new([5, 5, 5], Vec3::zero(), 1.0);
            let f = ScalarGrid { geometry: g, values: bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect() };
            if let Ok(m) = extract_isosurface(&f, 0.5) {
                prop_assert!(m.max_edge_valence() <= 2);
            }
        }
    }
}
