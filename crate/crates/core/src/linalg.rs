//! Small dense helpers shared by fitting and conditioning.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

/// `(A + Aᵀ) / 2` in place.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Symmetrizes and clips negative eigenvalues to zero.
///
/// Returns the magnitude of the clipped mass (sum of the removed negative
/// eigenvalues). The matrix is left bitwise untouched apart from
/// symmetrization when nothing needs clipping.
pub fn floor_psd(a: &mut DMatrix<f64>) -> f64 {
    symmetrize(a);
    if a.nrows() == 0 {
        return 0.0;
    }
    let eig = SymmetricEigen::new(a.clone());
    let negative: f64 = eig.eigenvalues.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    if negative == 0.0 {
        return 0.0;
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    *a = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    symmetrize(a);
    negative
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let mut s = a.clone();
    symmetrize(&mut s);
    SymmetricEigen::new(s).eigenvalues.min()
}

pub fn cholesky(a: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    Cholesky::new(a.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_clips_negative_eigenvalues() {
        // eigenvalues 3 and -1
        let mut a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let removed = floor_psd(&mut a);
        assert!((removed - 1.0).abs() < 1e-12);
        assert!(min_eigenvalue(&a) > -1e-12);
        let expected = DMatrix::from_row_slice(2, 2, &[1.5, 1.5, 1.5, 1.5]);
        assert!((a - expected).norm() < 1e-12);
    }

    #[test]
    fn floor_leaves_psd_matrix_alone() {
        let mut a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let before = a.clone();
        assert_eq!(floor_psd(&mut a), 0.0);
        assert_eq!(a, before);
    }
}
