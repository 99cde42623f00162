//! Small dense linear-algebra helpers.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching eigenvectors as columns.
pub fn hermitian_eigen(m: &Array2<C64>) -> (Vec<f64>, Array2<C64>) {
    let n = m.nrows();
    let mat = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)].conj()));
    let eig = mat.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, col)] = eig.eigenvectors[(row, k)];
        }
    }
    (values, vectors)
}

/// Matrix exponential by scaling and squaring of a Taylor series.
pub fn expm(m: &Array2<C64>) -> Array2<C64> {
    let n = m.nrows();
    let norm = m.rows().into_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = m * C64::from(0.5f64.powi(squarings));
    let mut result = Array2::<C64>::eye(n);
    let mut term = Array2::<C64>::eye(n);
    for k in 1..=30 {
        term = term.dot(&scaled) * C64::from(1.0 / k as f64);
        result += &term;
        if term.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

pub(crate) fn vdot(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{sigma_x, sigma_z};

    #[test]
    fn expm_of_pauli_rotation() {
        let theta = 1.234;
        let u = expm(&(sigma_x() * C64::new(0.0, -theta)));
        assert!((u[(0, 0)] - C64::from(theta.cos())).norm() < 1e-14);
        assert!((u[(0, 1)] - C64::new(0.0, -theta.sin())).norm() < 1e-14);
        let big = expm(&(sigma_z() * C64::new(0.0, -40.0)));
        assert!((big[(0, 0)] - C64::from_polar(1.0, -40.0)).norm() < 1e-12);
    }

    #[test]
    fn eigen_of_sigma_x() {
        let (vals, vecs) = hermitian_eigen(&sigma_x());
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        let v = vecs.column(1);
        assert!((v[0].norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
    }
}
