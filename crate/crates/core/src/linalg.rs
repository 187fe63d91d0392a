//! Dense symmetric linear algebra used throughout the crate.
//!
//! Networks are desk-scale (m up to a few hundred), so every spectral
//! quantity is obtained from a full symmetric eigendecomposition.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Eigenvalues within this distance of a bound are snapped onto it.
pub const SNAP_TOL: f64 = 1e-12;

/// Margin required for strict matrix inequalities.
pub const STRICT_TOL: f64 = 1e-9;

/// Symmetric eigendecomposition with eigenvalues in increasing order.
#[derive(Debug, Clone)]
pub struct SymSpectrum {
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector of `values[i]`.
    pub vectors: Mat,
}

impl SymSpectrum {
    pub fn of(m: &Mat) -> Self {
        let sym = symmetrize(m);
        let eig = sym.symmetric_eigen();
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = Mat::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        SymSpectrum { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Rebuilds `V f(Λ) Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for i in 0..n {
            let s = f(self.values[i]);
            scaled.column_mut(i).scale_mut(s);
        }
        &scaled * self.vectors.transpose()
    }
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn eigenvalues(m: &Mat) -> Vec<f64> {
    SymSpectrum::of(m).values
}

pub fn lambda_min(m: &Mat) -> f64 {
    SymSpectrum::of(m).min()
}

pub fn lambda_max(m: &Mat) -> f64 {
    SymSpectrum::of(m).max()
}

/// Moves `value` onto `bound` when it lies within [`SNAP_TOL`] of it.
pub fn snap(value: f64, bound: f64) -> f64 {
    if (value - bound).abs() <= SNAP_TOL {
        bound
    } else {
        value
    }
}

/// Principal square root of a positive semidefinite matrix. Negative
/// eigenvalues are clipped to zero.
pub fn sqrt_psd(m: &Mat) -> Mat {
    SymSpectrum::of(m).map(|v| if v > 0.0 { v.sqrt() } else { 0.0 })
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix, discarding
/// eigenvalues with magnitude below `tol`.
pub fn pinv_sym(m: &Mat, tol: f64) -> Mat {
    SymSpectrum::of(m).map(|v| if v.abs() > tol { 1.0 / v } else { 0.0 })
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    (a - b).amax()
}

pub fn is_symmetric(m: &Mat, tol: f64) -> bool {
    m.is_square() && max_abs_diff(m, &m.transpose()) <= tol
}

/// `J = 1 1ᵀ / m`.
pub fn averaging(m: usize) -> Mat {
    Mat::from_element(m, m, 1.0 / m as f64)
}

pub fn matrix_power(m: &Mat, k: usize) -> Mat {
    let n = m.nrows();
    let mut result = Mat::identity(n, n);
    let mut base = m.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
        }
    }
    result
}

pub fn column_sums(m: &Mat) -> Vector {
    Vector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum()))
}

pub fn row_sums(m: &Mat) -> Vector {
    Vector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum()))
}

/// `‖X‖²_M = ⟨MX, X⟩` for `M` symmetric.
pub fn weighted_norm_sq(m: &Mat, x: &Mat) -> f64 {
    (m * x).dot(x)
}

/// Replicates a row vector `m` times: `1 vᵀ`.
pub fn consensus_matrix(m: usize, v: &Vector) -> Mat {
    Mat::from_fn(m, v.len(), |_, j| v[j])
}

/// Row average `x̄ = Xᵀ1/m`.
pub fn row_mean(x: &Mat) -> Vector {
    let m = x.nrows() as f64;
    Vector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / m))
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_is_sorted_and_reconstructs() {
        let m = Mat::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let s = SymSpectrum::of(&m);
        assert!(s.values.windows(2).all(|w| w[0] <= w[1]));
        assert!(max_abs_diff(&s.map(|v| v), &m) < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let m = Mat::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let r = sqrt_psd(&m);
        assert!(max_abs_diff(&(&r * &r), &m) < 1e-12);
    }

    #[test]
    fn pinv_of_laplacian_inverts_on_range() {
        let l = Mat::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let p = pinv_sym(&l, 1e-12);
        let proj = &l * &p;
        let expected = Mat::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!(max_abs_diff(&proj, &expected) < 1e-12);
    }

    #[test]
    fn power_matches_repeated_product() {
        let m = Mat::from_row_slice(2, 2, &[0.5, 0.25, 0.25, 0.75]);
        let direct = &m * &m * &m * &m * &m;
        assert!(max_abs_diff(&matrix_power(&m, 5), &direct) < 1e-15);
        assert_eq!(matrix_power(&m, 0), Mat::identity(2, 2));
    }

    #[test]
    fn snapping() {
        assert_eq!(snap(1.0 - 1e-13, 1.0), 1.0);
        assert_eq!(snap(0.9, 1.0), 0.9);
    }
}
