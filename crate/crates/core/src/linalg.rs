//! Small dense linear-algebra helpers shared by the filter and the M-step.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Regularization added to an innovation covariance that fails to factor.
pub const SINGULAR_JITTER: f64 = 1e-8;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn max_asymmetry(m: &Mat) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    symmetrize(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric square root of a positive semi-definite matrix. Negative
/// eigenvalues (round-off at the PSD boundary) are clamped to zero.
pub fn psd_sqrt(m: &Mat) -> Mat {
    let eig = symmetrize(m).symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * Mat::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Re-symmetrize and raise every eigenvalue to at least `floor`.
pub fn floor_eigenvalues(m: &Mat, floor: f64) -> Mat {
    let eig = symmetrize(m).symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return symmetrize(m);
    }
    let clamped = eig.eigenvalues.map(|l| l.max(floor));
    symmetrize(&(&eig.eigenvectors * Mat::from_diagonal(&clamped) * eig.eigenvectors.transpose()))
}

pub fn spectral_radius(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &Mat) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_inf_norm(v: &Vector) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Cholesky factor of a symmetric matrix, retrying once with `jitter * I`.
/// The flag reports whether regularization was needed.
pub fn cholesky_regularized(m: &Mat, jitter: f64) -> Option<(Cholesky<f64, Dyn>, bool)> {
    let sym = symmetrize(m);
    if let Some(c) = Cholesky::new(sym.clone()) {
        return Some((c, false));
    }
    let n = sym.nrows();
    Cholesky::new(sym + Mat::identity(n, n) * jitter).map(|c| (c, true))
}

pub fn log_det_from_cholesky(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Gaussian log-density of residual `r` under covariance with Cholesky `c`.
pub fn gaussian_logpdf(r: &Vector, c: &Cholesky<f64, Dyn>) -> f64 {
    let n = r.len() as f64;
    let maha = r.dot(&c.solve(r));
    -0.5 * (n * LN_2PI + log_det_from_cholesky(c) + maha)
}

/// `-0.5 * (n ln 2π + ln|S|)`: the log normalizing constant of N(·; 0, S).
pub fn gaussian_log_norm(dim: usize, c: &Cholesky<f64, Dyn>) -> f64 {
    -0.5 * (dim as f64 * LN_2PI + log_det_from_cholesky(c))
}

pub fn is_finite_mat(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn is_finite_vec(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_squares_back() {
        let m = Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r = psd_sqrt(&m);
        assert!((&r * &r - &m).abs().max() < 1e-12);
    }

    #[test]
    fn sqrt_of_zero_is_zero() {
        assert_eq!(psd_sqrt(&Mat::zeros(3, 3)), Mat::zeros(3, 3));
    }

    #[test]
    fn radius_of_rotation_scaled() {
        let m = Mat::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert!((spectral_radius(&m) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn floor_lifts_only_small_eigenvalues() {
        let m = Mat::from_diagonal(&Vector::from_vec(vec![3.0, 0.0]));
        let f = floor_eigenvalues(&m, 1e-8);
        assert!((f[(0, 0)] - 3.0).abs() < 1e-12);
        assert!((f[(1, 1)] - 1e-8).abs() < 1e-15);
    }

    #[test]
    fn logpdf_standard_normal_at_mean() {
        let c = Cholesky::new(Mat::identity(1, 1)).unwrap();
        let v = gaussian_logpdf(&Vector::zeros(1), &c);
        assert!((v + 0.5 * LN_2PI).abs() < 1e-15);
    }

    #[test]
    fn inf_norm_is_max_row_sum() {
        let m = Mat::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 0.5]);
        assert_eq!(inf_norm(&m), 3.0);
    }
}
