use nalgebra::{Cholesky, Dyn};

use super::filter::FilterResult;
use super::modes::ModeAssignment;
use crate::linalg::{gaussian_logpdf, Mat, Vector};
use crate::model::ModelParams;
use crate::simulate::Trajectory;
use crate::{Error, Result};

/// Expected complete-data log-likelihood and its three parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QValue {
    pub q_total: f64,
    /// Output term.
    pub q1: f64,
    /// Causal state and mode term.
    pub q2: f64,
    /// Anticausal state and mode term.
    pub q3: f64,
}

fn factor(m: &Mat, name: String) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or(Error::SingularCovariance { name })
}

/// `tr(Σ⁻¹ M)` through an existing factorization.
fn trace_solve(c: &Cholesky<f64, Dyn>, m: &Mat) -> f64 {
    c.solve(m).trace()
}

/// Evaluate `Q(θ, θᵏ)` for candidate parameters `params` with the hard
/// assignment and Gaussian state posteriors of the E-step at `θᵏ`.
///
/// Quadratic forms are evaluated at the posterior means. With
/// `trace_correction` the expectation of each quadratic form also gets its
/// `tr(Σ⁻¹ P)` term; the lag-one cross-covariance is taken as zero and the
/// boundary states are exact.
pub fn evaluate_q(
    params: &ModelParams,
    assignment: &ModeAssignment,
    filter: &FilterResult,
    data: &Trajectory,
    trace_correction: bool,
) -> Result<QValue> {
    let t_len = data.len();
    if filter.len() != t_len || assignment.len() != t_len {
        return Err(Error::Dimension("filter, assignment and data lengths differ".into()));
    }
    let chol_m = factor(&params.sigma_m, "sigma_m".into())?;
    let chol_c = params
        .sigma_c
        .iter()
        .enumerate()
        .map(|(j, s)| factor(s, format!("sigma_c({})", j + 1)))
        .collect::<Result<Vec<_>>>()?;
    let chol_a = params
        .sigma_a
        .iter()
        .enumerate()
        .map(|(l, s)| factor(s, format!("sigma_a({})", l + 1)))
        .collect::<Result<Vec<_>>>()?;

    let (s_c, s_a) = (&assignment.s_c_hat, &assignment.s_a_hat);
    let (mut q1, mut q2, mut q3) = (0.0, 0.0, 0.0);
    for t in 0..t_len {
        let (j, l) = (s_c[t], s_a[t]);
        let (cc, ca) = (&params.c_c[j], &params.c_a[l]);
        let r = &data.y[t] - cc * &filter.x_c_hat[t] - ca * &filter.x_a_hat[t];
        q1 += gaussian_logpdf(&r, &chol_m);
        if trace_correction {
            let spread = cc * &filter.p_c[t] * cc.transpose() + ca * &filter.p_a[t] * ca.transpose();
            q1 -= 0.5 * trace_solve(&chol_m, &spread);
        }

        let ac = &params.a_c[j];
        let prev: &Vector = if t == 0 { &data.x_c0 } else { &filter.x_c_hat[t - 1] };
        let rc = &filter.x_c_hat[t] - ac * prev;
        q2 += gaussian_logpdf(&rc, &chol_c[j]) + params.pi_c[j].ln();
        if trace_correction {
            let mut spread = filter.p_c[t].clone();
            if t > 0 {
                spread += ac * &filter.p_c[t - 1] * ac.transpose();
            }
            q2 -= 0.5 * trace_solve(&chol_c[j], &spread);
        }

        let aa = &params.a_a[l];
        let next: &Vector = if t + 1 == t_len { &data.x_a_end } else { &filter.x_a_hat[t + 1] };
        let ra = &filter.x_a_hat[t] - aa * next;
        q3 += gaussian_logpdf(&ra, &chol_a[l]) + params.pi_a[l].ln();
        if trace_correction {
            let mut spread = filter.p_a[t].clone();
            if t + 1 < t_len {
                spread += aa * &filter.p_a[t + 1] * aa.transpose();
            }
            q3 -= 0.5 * trace_solve(&chol_a[l], &spread);
        }
    }
    Ok(QValue {
        q_total: q1 + q2 + q3,
        q1,
        q2,
        q3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estep::filter_sweep;
    use crate::simulate::{draw_switching, simulate};
    use std::f64::consts::PI;

    fn scalar(ac: f64, aa: f64, cc: f64, ca: f64, sc: f64, sa: f64, sm: f64) -> ModelParams {
        let s = |v: f64| Mat::from_element(1, 1, v);
        ModelParams {
            a_c: vec![s(ac)],
            a_a: vec![s(aa)],
            c_c: vec![s(cc)],
            c_a: vec![s(ca)],
            sigma_c: vec![s(sc)],
            sigma_a: vec![s(sa)],
            sigma_m: s(sm),
            pi_c: vec![1.0],
            pi_a: vec![1.0],
        }
    }

    fn log_n(r: f64, var: f64) -> f64 {
        -0.5 * ((2.0 * PI).ln() + var.ln() + r * r / var)
    }

    #[test]
    fn two_steps_by_hand() {
        let p = scalar(0.8, 0.5, 1.0, 0.6, 0.7, 0.4, 0.3);
        let data = Trajectory::observed(
            vec![Vector::from_element(1, 1.2), Vector::from_element(1, -0.4)],
            Vector::from_element(1, 0.5),
            Vector::from_element(1, -1.0),
        );
        let asg = ModeAssignment::from_sequences(vec![0, 0], vec![0, 0], 1, 1);
        let f = filter_sweep(&p, &asg, &data, None, 2.0).unwrap();
        let xc = [f.x_c_hat[0][0], f.x_c_hat[1][0]];
        let xa = [f.x_a_hat[0][0], f.x_a_hat[1][0]];
        let pc = [f.p_c[0][(0, 0)], f.p_c[1][(0, 0)]];
        let pa = [f.p_a[0][(0, 0)], f.p_a[1][(0, 0)]];
        let y = [1.2, -0.4];

        let q1: f64 = (0..2).map(|t| log_n(y[t] - xc[t] - 0.6 * xa[t], 0.3)).sum();
        let q2 = log_n(xc[0] - 0.8 * 0.5, 0.7) + log_n(xc[1] - 0.8 * xc[0], 0.7);
        let q3 = log_n(xa[1] + 0.5, 0.4) + log_n(xa[0] - 0.5 * xa[1], 0.4);
        let q = evaluate_q(&p, &asg, &f, &data, false).unwrap();
        assert!((q.q1 - q1).abs() < 1e-12);
        assert!((q.q2 - q2).abs() < 1e-12);
        assert!((q.q3 - q3).abs() < 1e-12);
        assert!((q.q_total - (q1 + q2 + q3)).abs() < 1e-12);

        let t1: f64 = (0..2).map(|t| (pc[t] + 0.36 * pa[t]) / 0.3).sum();
        let t2 = (pc[0] + pc[1] + 0.64 * pc[0]) / 0.7;
        let t3 = (pa[0] + pa[1] + 0.25 * pa[1]) / 0.4;
        let qt = evaluate_q(&p, &asg, &f, &data, true).unwrap();
        assert!((qt.q1 - (q1 - 0.5 * t1)).abs() < 1e-12);
        assert!((qt.q2 - (q2 - 0.5 * t2)).abs() < 1e-12);
        assert!((qt.q3 - (q3 - 0.5 * t3)).abs() < 1e-12);
    }

    #[test]
    fn mode_probabilities_enter_as_counts_times_log() {
        let s = |v: f64| Mat::from_element(1, 1, v);
        let mut p = scalar(0.8, 0.5, 1.0, 0.6, 0.7, 0.4, 0.3);
        p.a_c.push(s(-0.3));
        p.c_c.push(s(0.4));
        p.sigma_c.push(s(0.2));
        p.pi_c = vec![0.5, 0.5];
        let seq = draw_switching(&p, 60, 2);
        let data = simulate(&p, &seq, &Vector::zeros(1), &Vector::zeros(1), 2).unwrap();
        let asg = ModeAssignment::from_sequences(seq.s_c.clone(), seq.s_a.clone(), 2, 1);
        let f = filter_sweep(&p, &asg, &data, None, 1.0).unwrap();
        let base = evaluate_q(&p, &asg, &f, &data, true).unwrap();
        let mut shifted = p.clone();
        shifted.pi_c = vec![0.25, 0.75];
        let moved = evaluate_q(&shifted, &asg, &f, &data, true).unwrap();
        let counts = asg.counts_c();
        let expected = counts[0] as f64 * 0.5_f64.ln() + counts[1] as f64 * 1.5_f64.ln();
        assert!((moved.q2 - base.q2 - expected).abs() < 1e-9);
        assert_eq!(moved.q1, base.q1);
        assert_eq!(moved.q3, base.q3);
    }

    #[test]
    fn singular_covariance_is_an_error() {
        let p = scalar(0.8, 0.5, 1.0, 0.6, 0.0, 0.4, 0.3);
        let data = Trajectory::observed(vec![Vector::from_element(1, 1.0)], Vector::zeros(1), Vector::zeros(1));
        let asg = ModeAssignment::from_sequences(vec![0], vec![0], 1, 1);
        let f = filter_sweep(&p, &asg, &data, None, 1.0).unwrap();
        assert!(matches!(
            evaluate_q(&p, &asg, &f, &data, false),
            Err(Error::SingularCovariance { .. })
        ));
    }
}
