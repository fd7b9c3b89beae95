use crate::linalg::{cholesky_regularized, Mat, SINGULAR_JITTER};
use crate::{Error, Result};

/// Kalman gains of both subsystems for one measurement update.
#[derive(Debug, Clone, PartialEq)]
pub struct Gains {
    pub k_c: Mat,
    pub k_a: Mat,
    /// Innovation covariance `C_c P⁻_c C_cᵀ + C_a P⁻_a C_aᵀ + Σ_m`.
    pub s: Mat,
    /// `s` needed `SINGULAR_JITTER * I` to factor.
    pub regularized: bool,
}

/// Trace-minimizing gains under independent prior errors and measurement noise.
///
/// `K = P⁻ Cᵀ S⁻¹` for each subsystem, with the innovation covariance shared.
pub fn kalman_gains(c_c: &Mat, c_a: &Mat, p_c_prior: &Mat, p_a_prior: &Mat, sigma_m: &Mat) -> Result<Gains> {
    let s = c_c * p_c_prior * c_c.transpose() + c_a * p_a_prior * c_a.transpose() + sigma_m;
    let (chol, regularized) = cholesky_regularized(&s, SINGULAR_JITTER).ok_or_else(|| Error::SingularCovariance {
        name: "innovation covariance".into(),
    })?;
    // K = P Cᵀ S⁻¹ = (S⁻¹ C P)ᵀ for symmetric S and P
    let k_c = chol.solve(&(c_c * p_c_prior)).transpose();
    let k_a = chol.solve(&(c_a * p_a_prior)).transpose();
    Ok(Gains { k_c, k_a, s, regularized })
}

/// Posterior error covariance of one subsystem for an arbitrary gain `k`:
///
/// `P = P⁻ - P⁻CᵀKᵀ - KCP⁻ + KCP⁻CᵀKᵀ + K C_o P⁻_o C_oᵀ Kᵀ + K Σ_m Kᵀ`
///
/// where `(c, p_prior)` belong to the subsystem being updated and
/// `(c_other, p_other_prior)` to the other one. At the optimal gain this
/// collapses to `(I - KC) P⁻`.
pub fn posterior_covariance(
    k: &Mat,
    c: &Mat,
    p_prior: &Mat,
    c_other: &Mat,
    p_other_prior: &Mat,
    sigma_m: &Mat,
) -> Mat {
    let kt = k.transpose();
    let kc = k * c;
    p_prior - p_prior * c.transpose() * &kt - &kc * p_prior
        + &kc * p_prior * c.transpose() * &kt
        + k * c_other * p_other_prior * c_other.transpose() * &kt
        + k * sigma_m * &kt
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_output_hand_values() {
        let g = kalman_gains(
            &Mat::from_row_slice(1, 2, &[1.0, 0.0]),
            &Mat::zeros(1, 2),
            &Mat::identity(2, 2),
            &Mat::identity(2, 2),
            &Mat::identity(1, 1),
        )
        .unwrap();
        assert!((g.s[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((g.k_c[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(g.k_c[(1, 0)], 0.0);
        assert_eq!(g.k_a, Mat::zeros(2, 1));
        assert!(!g.regularized);
    }

    #[test]
    fn unobserved_causal_state_gets_zero_gain() {
        let g = kalman_gains(
            &Mat::zeros(1, 2),
            &Mat::from_row_slice(1, 2, &[0.3, 0.1]),
            &Mat::identity(2, 2),
            &Mat::identity(2, 2),
            &Mat::identity(1, 1),
        )
        .unwrap();
        assert_eq!(g.k_c, Mat::zeros(2, 1));
    }

    #[test]
    fn huge_measurement_noise_ignores_data() {
        let g = kalman_gains(
            &Mat::from_row_slice(1, 2, &[0.3, 0.7]),
            &Mat::from_row_slice(1, 2, &[0.2, 0.6]),
            &Mat::identity(2, 2),
            &Mat::identity(2, 2),
            &Mat::from_element(1, 1, 1e12),
        )
        .unwrap();
        assert!(g.k_c.amax() <= 1e-11);
    }

    #[test]
    fn singular_innovation_is_regularized() {
        let g = kalman_gains(
            &Mat::zeros(1, 1),
            &Mat::zeros(1, 1),
            &Mat::identity(1, 1),
            &Mat::identity(1, 1),
            &Mat::zeros(1, 1),
        )
        .unwrap();
        assert!(g.regularized);
    }

    #[test]
    fn quadratic_form_collapses_at_optimal_gain() {
        let c_c = Mat::from_row_slice(2, 2, &[0.3, 0.7, -0.2, 0.4]);
        let c_a = Mat::from_row_slice(2, 1, &[0.5, 0.1]);
        let p_c = Mat::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let p_a = Mat::from_element(1, 1, 0.7);
        let sm = Mat::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]);
        let g = kalman_gains(&c_c, &c_a, &p_c, &p_a, &sm).unwrap();
        let full = posterior_covariance(&g.k_c, &c_c, &p_c, &c_a, &p_a, &sm);
        let short = (Mat::identity(2, 2) - &g.k_c * &c_c) * &p_c;
        assert!((full - short).amax() < 1e-12);
    }
}
