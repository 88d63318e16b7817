use super::Vec3;
use crate::scalar::Real;

/// Eigen-decomposition of a symmetric 3x3 matrix.
///
/// `values` are ascending; `vectors[i]` is the unit eigenvector of `values[i]`.
#[derive(Debug, Clone, Copy)]
pub struct SymmetricEigen3<T> {
    pub values: [T; 3],
    pub vectors: [Vec3<T>; 3],
}

/// Cyclic Jacobi rotations on a symmetric 3x3 matrix (row-major `m`).
pub fn symmetric_eigen3<T: Real>(m: [[T; 3]; 3]) -> SymmetricEigen3<T> {
    let mut a = m;
    let mut v = [[T::zero(); 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = T::one();
    }
    let two = T::lit(2.0);

    for _sweep in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == T::zero() {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (two * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = T::one() / (t * t + T::one()).sqrt();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vkp = row[p];
                let vkq = row[q];
                row[p] = c * vkp - s * vkq;
                row[q] = s * vkp + c * vkq;
            }
        }
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| crate::scalar::cmp_real(&a[i][i], &a[j][j]));
    let column = |j: usize| Vec3::new(v[0][j], v[1][j], v[2][j]);
    SymmetricEigen3 {
        values: order.map(|i| a[i][i]),
        vectors: order.map(column),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(m: &[[f64; 3]; 3], v: Vec3<f64>) -> Vec3<f64> {
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    #[test]
    fn diagonal_matrix_sorted() {
        let e = symmetric_eigen3::<f64>([[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]);
        assert_eq!(e.values, [1.0, 2.0, 3.0]);
        assert!((e.vectors[0].y.abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigenpairs_satisfy_definition() {
        let m: [[f64; 3]; 3] = [[4.0, 1.0, -2.0], [1.0, 2.0, 0.5], [-2.0, 0.5, 3.0]];
        let e = symmetric_eigen3(m);
        for i in 0..3 {
            let v = e.vectors[i];
            assert!((v.norm() - 1.0).abs() < 1e-12);
            let r = apply(&m, v) - v * e.values[i];
            assert!(r.norm() < 1e-10, "residual {}", r.norm());
        }
        assert!(e.values[0] <= e.values[1] && e.values[1] <= e.values[2]);
        let trace: f64 = e.values.iter().sum();
        assert!((trace - 9.0).abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let m = [[2.0f32, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        let e = symmetric_eigen3(m);
        assert!((e.values[0] - 1.0).abs() < 1e-5);
        assert!((e.values[1] - 3.0).abs() < 1e-5);
        assert!((e.values[2] - 5.0).abs() < 1e-5);
    }
}
