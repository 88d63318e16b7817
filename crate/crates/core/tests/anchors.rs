use hopclimb::anchors::*;
use hopclimb::geometry::{SpatialIndex, Vec3};
use hopclimb::reconstruct::TriangleMesh;
use proptest::prelude::*;

/// Regular triangulated height field over `[x0, x0 + (n-1) s] x [y0, ...]`.
fn heightfield(n: usize, s: f64, x0: f64, y0: f64, f: impl Fn(f64, f64) -> f64) -> TriangleMesh<f64> {
    let mut v = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let (x, y) = (x0 + i as f64 * s, y0 + j as f64 * s);
            v.push(Vec3::new(x, y, f(x, y)));
        }
    }
    let mut t = Vec::new();
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let a = j * n + i;
            t.push([a, a + 1, a + n + 1]);
            t.push([a, a + n + 1, a + n]);
        }
    }
    TriangleMesh::new(v, t)
}

fn rotate(p: Vec3<f64>, ax: f64, az: f64) -> Vec3<f64> {
    let (s, c) = ax.sin_cos();
    let q = Vec3::new(p.x, c * p.y - s * p.z, s * p.y + c * p.z);
    let (s, c) = az.sin_cos();
    Vec3::new(c * q.x - s * q.y, s * q.x + c * q.y, q.z)
}

/// Total-least-squares residual by direct search over plane normals.
fn brute_force_plane_rms(pts: &[Vec3<f64>]) -> f64 {
    let c = Vec3::centroid(pts.iter().copied()).unwrap();
    let msd = |theta: f64, phi: f64| {
        let n = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        pts.iter().map(|p| (*p - c).dot(n).powi(2)).sum::<f64>() / pts.len() as f64
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let steps = 180;
    for i in 0..=steps {
        for j in 0..2 * steps {
            let (t, p) = (i as f64 * std::f64::consts::PI / steps as f64, j as f64 * std::f64::consts::PI / steps as f64);
            let m = msd(t, p);
            if m < best.0 {
                best = (m, t, p);
            }
        }
    }
    let mut step = std::f64::consts::PI / steps as f64;
    while step > 1e-12 {
        let mut improved = false;
        for (dt, dp) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let (t, p) = (best.1 + dt * step, best.2 + dp * step);
            let m = msd(t, p);
            if m < best.0 {
                best = (m, t, p);
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best.0.sqrt()
}

#[test]
fn right_angle_ridge_matches_brute_force_plane_fit() {
    // two planes at 45 degrees either side of the apex line: a 90 degree ridge
    let mesh = heightfield(21, 0.1, -1.0, -1.0, |_, y| -y.abs());
    let apex = 10 * 21 + 10;
    assert_eq!(mesh.vertices[apex], Vec3::new(0.0, 0.0, 0.0));
    let index = SpatialIndex::new(&mesh.vertices);
    let score = score_flatness(&index, apex, 1.0);
    let hood: Vec<_> = mesh.vertices.iter().copied().filter(|p| p.norm() <= 1.0).collect();
    let oracle = brute_force_plane_rms(&hood);
    assert!(oracle > 0.05);
    assert!((score - oracle).abs() < 1e-9, "{score} vs {oracle}");
}

#[test]
fn flatness_rotation_invariant() {
    let mesh = heightfield(15, 0.1, 0.0, 0.0, |x, y| (3.0 * x).sin() * 0.2 + y * y * 0.3);
    let rotated: Vec<_> = mesh.vertices.iter().map(|&p| rotate(p, 0.7, -1.3) + Vec3::new(4.0, -2.0, 9.0)).collect();
    let (a, b) = (SpatialIndex::new(&mesh.vertices), SpatialIndex::new(&rotated));
    for v in (0..mesh.vertices.len()).step_by(7) {
        let (fa, fb) = (score_flatness(&a, v, 0.35), score_flatness(&b, v, 0.35));
        assert!((fa - fb).abs() < 1e-9, "vertex {v}: {fa} vs {fb}");
    }
}

#[test]
fn plateau_scores_zero_and_weights_degenerate() {
    let plateau = heightfield(12, 0.2, 0.0, 0.0, |_, _| 3.0);
    let scored = score_anchors(&plateau, &ScoreOptions::default()).unwrap();
    assert_eq!(scored.len(), plateau.vertices.len());
    for a in &scored {
        assert!(a.flatness < 1e-12);
        assert_eq!(a.height_risk, 0.0);
        assert_eq!(a.r, ScoreOptions::<f64>::default().weights.height * a.height_risk + 0.5 * a.flatness_norm);
    }

    let bumpy = heightfield(20, 0.1, 0.0, 0.0, |x, y| ((7.0 * x).sin() * (5.0 * y).cos()) * 0.3);
    let opts = ScoreOptions { weights: ScoreWeights::new(1.0, 0.0).unwrap(), ..ScoreOptions::default() };
    let scored = score_anchors(&bumpy, &opts).unwrap();
    let mut positive = 0;
    for a in &scored {
        assert_eq!(a.r, a.flatness_norm);
        assert!(a.r >= 0.0 && a.r <= 1.0);
        assert!((a.normal.norm() - 1.0).abs() < 1e-9);
        positive += (a.r > 0.0) as usize;
    }
    assert!(positive > scored.len() / 2);
    let default_scored = score_anchors(&bumpy, &ScoreOptions::default()).unwrap();
    assert!(default_scored.iter().all(|a| (0.0..=1.0).contains(&a.r)));
    assert!(default_scored.iter().any(|a| a.r > 0.5));
}

#[test]
fn crater_rim_ranks_safer_than_floor() {
    let crater = |x: f64, y: f64| {
        let r = (x * x + y * y).sqrt();
        if r < 2.0 {
            0.0
        } else if r < 3.0 {
            r - 2.0
        } else {
            1.0
        }
    };
    let mesh = heightfield(81, 0.1, -4.0, -4.0, crater);
    let opts = ScoreOptions { height_window: 10.0, ..ScoreOptions::default() };
    let scored = score_anchors(&mesh, &opts).unwrap();
    let radius = |a: &AnchorPoint<f64>| (a.position.x.powi(2) + a.position.y.powi(2)).sqrt();
    let rim: Vec<_> = scored.iter().filter(|a| (3.4..3.9).contains(&radius(a))).collect();
    let floor: Vec<_> = scored.iter().filter(|a| radius(a) < 1.6).collect();
    assert!(!rim.is_empty() && !floor.is_empty());
    let worst_rim = rim.iter().map(|a| a.r).fold(f64::NEG_INFINITY, f64::max);
    let best_floor = floor.iter().map(|a| a.r).fold(f64::INFINITY, f64::min);
    assert!(worst_rim < best_floor, "{worst_rim} vs {best_floor}");
}

#[test]
fn support_filter_drops_unobserved_vertices() {
    let mesh = heightfield(10, 1.0, 0.0, 0.0, |_, _| 0.0);
    let scored = score_anchors(&mesh, &ScoreOptions::default()).unwrap();
    let samples: Vec<_> = mesh.vertices.iter().copied().filter(|p| p.x < 4.5).collect();
    let kept = supported(&scored, &SpatialIndex::new(&samples), 0.1);
    assert_eq!(kept.len(), 50);
    assert!(kept.iter().all(|a| a.position.x < 4.5));
}

fn anchors_from(scores: &[u8]) -> Vec<AnchorPoint<f64>> {
    scores
        .iter()
        .enumerate()
        .map(|(i, &s)| AnchorPoint {
            id: i,
            position: Vec3::new(i as f64, 0.0, 0.0),
            normal: Vec3::axis(2),
            flatness: 0.0,
            flatness_norm: 0.0,
            height_risk: s as f64 / 10.0,
            r: s as f64 / 10.0,
        })
        .collect()
}

proptest! {
    #[test]
    fn cull_is_sorted_subset_and_deterministic(scores in prop::collection::vec(0u8..10, 1..300), keep in 0.01f64..=1.0) {
        let a = anchors_from(&scores);
        let kept = cull(&a, keep).unwrap();
        prop_assert_eq!(kept.len(), keep_count(a.len(), keep));
        prop_assert!(kept.len() >= 1);
        for w in kept.windows(2) {
            prop_assert!(w[0].r < w[1].r || (w[0].r == w[1].r && w[0].id < w[1].id));
        }
        for k in &kept {
            prop_assert_eq!(a[k.id], *k);
        }
        // nothing dropped is strictly better than something kept
        let worst = kept.last().unwrap().r;
        for x in &a {
            if x.r < worst {
                prop_assert!(kept.iter().any(|k| k.id == x.id));
            }
        }
        let mut shuffled = a.clone();
        shuffled.reverse();
        prop_assert_eq!(cull(&shuffled, keep).unwrap(), kept);
    }

    #[test]
    fn raising_a_vertex_never_raises_its_height_risk(
        pts in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -2.0f64..2.0), 2..60),
        pick in 0usize..60,
        lift in 0.0f64..3.0,
        window in 0.5f64..4.0,
    ) {
        let mut v: Vec<_> = pts.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect();
        let i = pick % v.len();
        let up = Vec3::axis(2);
        let before = score_relative_height(&v, i, window, up).unwrap();
        v[i].z += lift;
        let after = score_relative_height(&v, i, window, up).unwrap();
        prop_assert!(after <= before + 1e-12);
        prop_assert!((0.0..=1.0).contains(&after));
    }

    #[test]
    fn height_window_matches_linear_scan(
        // coarse coordinates put many points exactly on the window rim
        pts in prop::collection::vec((-12i32..12, -12i32..12, -8i32..8), 1..250),
        up in (-1.0f64..1.0, -1.0f64..1.0, 0.2f64..1.0),
        window in prop_oneof![Just(0.0), Just(1.0), Just(2.5), 0.0f64..30.0],
    ) {
        let v: Vec<_> = pts.iter().map(|&(x, y, z)| Vec3::new(x as f64 * 0.25, y as f64 * 0.25, z as f64 * 0.25)).collect();
        let up = Vec3::new(up.0, up.1, up.2).normalized().unwrap();
        let w = HeightWindow::new(&v, up, window).unwrap();
        let up = w.up();
        let flat: Vec<_> = v.iter().map(|p| *p - up * p.dot(up)).collect();
        for i in 0..v.len() {
            let inside: Vec<f64> = (0..v.len()).filter(|&j| flat[j].distance_squared(flat[i]) <= window * window).map(|j| v[j].dot(up)).collect();
            let lo = inside.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = inside.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let expected = if hi <= lo { 0.0 } else { ((hi - v[i].dot(up)) / (hi - lo)).clamp(0.0, 1.0) };
            prop_assert_eq!(w.score(i), expected, "vertex {}", i);
        }
    }
}
