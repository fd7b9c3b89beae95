use super::gains::kalman_gains;
use super::modes::ModeAssignment;
use crate::linalg::{is_finite_mat, is_finite_vec, symmetrize, Mat, Vector};
use crate::model::ModelParams;
use crate::simulate::Trajectory;
use crate::{Error, Result};

/// Default scale of the initial prior covariances `P⁻_c(1)` and `P⁻_a(T)`.
pub const DEFAULT_INITIAL_COV: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub x_c_hat: Vec<Vector>,
    pub x_a_hat: Vec<Vector>,
    pub x_c_prior: Vec<Vector>,
    pub x_a_prior: Vec<Vector>,
    pub p_c: Vec<Mat>,
    pub p_a: Vec<Mat>,
    pub p_c_prior: Vec<Mat>,
    pub p_a_prior: Vec<Mat>,
    /// Forward-pass gains.
    pub k_c: Vec<Mat>,
    /// Backward-pass gains.
    pub k_a: Vec<Mat>,
    /// Forward-pass innovations `y - C_c x⁻_c - C_a x⁻_a`.
    pub innovations: Vec<Vector>,
    /// Forward-pass innovation covariances.
    pub innovation_cov: Vec<Mat>,
    /// 1-based times at which an innovation covariance was regularized.
    pub regularized: Vec<usize>,
}

impl FilterResult {
    pub fn len(&self) -> usize {
        self.x_c_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_c_hat.is_empty()
    }

    /// Output reconstruction `C_c x̂_c + C_a x̂_a` at the assigned modes.
    pub fn smoothed_output(&self, params: &ModelParams, assignment: &ModeAssignment) -> Vec<Vector> {
        (0..self.len())
            .map(|t| {
                &params.c_c[assignment.s_c_hat[t]] * &self.x_c_hat[t]
                    + &params.c_a[assignment.s_a_hat[t]] * &self.x_a_hat[t]
            })
            .collect()
    }
}

/// One backward sweep for the anticausal state followed by one forward sweep
/// for the causal state, with modes fixed by `assignment`.
///
/// The backward sweep needs the causal prior at every `t`; it is taken from
/// `prev` (the previous sweep), or zero mean with `initial_cov * I`
/// covariance when there is none. The forward sweep then uses the fresh
/// anticausal priors. Cross-covariance between the two estimation errors is
/// taken to be zero.
pub fn filter_sweep(
    params: &ModelParams,
    assignment: &ModeAssignment,
    data: &Trajectory,
    prev: Option<&FilterResult>,
    initial_cov: f64,
) -> Result<FilterResult> {
    let t_len = data.len();
    let dims = params.dims();
    if assignment.len() != t_len {
        return Err(Error::Dimension(format!(
            "assignment has {} steps, data {t_len}",
            assignment.len()
        )));
    }
    if let Some(p) = prev {
        if p.len() != t_len {
            return Err(Error::Dimension("previous filter result has a different length".into()));
        }
    }
    let (s_c, s_a) = (&assignment.s_c_hat, &assignment.s_a_hat);
    let mut regularized = Vec::new();

    let zero_c = Vector::zeros(dims.n_xc);
    let diffuse_c = Mat::identity(dims.n_xc, dims.n_xc) * initial_cov;
    let causal_prior = |t: usize| -> (&Vector, &Mat) {
        match prev {
            Some(p) => (&p.x_c_prior[t], &p.p_c_prior[t]),
            None => (&zero_c, &diffuse_c),
        }
    };

    // Backward sweep.
    let mut x_a_hat = vec![Vector::zeros(dims.n_xa); t_len];
    let mut x_a_prior = vec![Vector::zeros(dims.n_xa); t_len];
    let mut p_a = vec![Mat::zeros(dims.n_xa, dims.n_xa); t_len];
    let mut p_a_prior = vec![Mat::zeros(dims.n_xa, dims.n_xa); t_len];
    let mut k_a = vec![Mat::zeros(dims.n_xa, dims.n_y); t_len];
    for t in (0..t_len).rev() {
        let a = &params.a_a[s_a[t]];
        let (prior, cov) = if t + 1 == t_len {
            (a * &data.x_a_end, Mat::identity(dims.n_xa, dims.n_xa) * initial_cov)
        } else {
            (
                a * &x_a_hat[t + 1],
                symmetrize(&(a * &p_a[t + 1] * a.transpose() + &params.sigma_a[s_a[t]])),
            )
        };
        let (c_c, c_a) = (&params.c_c[s_c[t]], &params.c_a[s_a[t]]);
        let (xc_prior, pc_prior) = causal_prior(t);
        let g = kalman_gains(c_c, c_a, pc_prior, &cov, &params.sigma_m)?;
        if g.regularized {
            regularized.push(t + 1);
        }
        let innovation = &data.y[t] - c_a * &prior - c_c * xc_prior;
        let post = &prior + &g.k_a * innovation;
        let post_cov = symmetrize(&((Mat::identity(dims.n_xa, dims.n_xa) - &g.k_a * c_a) * &cov));
        if !is_finite_vec(&post) || !is_finite_mat(&post_cov) {
            return Err(Error::divergence(t + 1, "anticausal estimate is not finite"));
        }
        x_a_hat[t] = post;
        x_a_prior[t] = prior;
        p_a[t] = post_cov;
        p_a_prior[t] = cov;
        k_a[t] = g.k_a;
    }

    // Forward sweep.
    let mut x_c_hat = Vec::with_capacity(t_len);
    let mut x_c_prior = Vec::with_capacity(t_len);
    let mut p_c: Vec<Mat> = Vec::with_capacity(t_len);
    let mut p_c_prior = Vec::with_capacity(t_len);
    let mut k_c = Vec::with_capacity(t_len);
    let mut innovations = Vec::with_capacity(t_len);
    let mut innovation_cov = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let a = &params.a_c[s_c[t]];
        let (prior, cov) = if t == 0 {
            (a * &data.x_c0, Mat::identity(dims.n_xc, dims.n_xc) * initial_cov)
        } else {
            (
                a * &x_c_hat[t - 1],
                symmetrize(&(a * &p_c[t - 1] * a.transpose() + &params.sigma_c[s_c[t]])),
            )
        };
        let (c_c, c_a) = (&params.c_c[s_c[t]], &params.c_a[s_a[t]]);
        let g = kalman_gains(c_c, c_a, &cov, &p_a_prior[t], &params.sigma_m)?;
        if g.regularized && !regularized.contains(&(t + 1)) {
            regularized.push(t + 1);
        }
        let innovation = &data.y[t] - c_a * &x_a_prior[t] - c_c * &prior;
        let post = &prior + &g.k_c * &innovation;
        let post_cov = symmetrize(&((Mat::identity(dims.n_xc, dims.n_xc) - &g.k_c * c_c) * &cov));
        if !is_finite_vec(&post) || !is_finite_mat(&post_cov) {
            return Err(Error::divergence(t + 1, "causal estimate is not finite"));
        }
        x_c_hat.push(post);
        x_c_prior.push(prior);
        p_c.push(post_cov);
        p_c_prior.push(cov);
        k_c.push(g.k_c);
        innovations.push(innovation);
        innovation_cov.push(g.s);
    }
    regularized.sort_unstable();

    Ok(FilterResult {
        x_c_hat,
        x_a_hat,
        x_c_prior,
        x_a_prior,
        p_c,
        p_a,
        p_c_prior,
        p_a_prior,
        k_c,
        k_a,
        innovations,
        innovation_cov,
        regularized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acceptance::random;
    use crate::linalg::min_eigenvalue;
    use crate::model::Dims;
    use crate::simulate::{draw_switching, rng_stream, simulate};
    use proptest::prelude::*;

    fn model(seed: u64, d: &Dims) -> ModelParams {
        random::stable_model(&mut rng_stream(seed, 0), d)
    }

    fn true_assignment(data: &Trajectory, d: &Dims) -> ModeAssignment {
        let seq = data.seq_true.as_ref().unwrap();
        ModeAssignment::from_sequences(seq.s_c.clone(), seq.s_a.clone(), d.m_c, d.m_a)
    }

    #[test]
    fn exact_without_process_noise() {
        let d = Dims::new(2, 2, 1, 2, 2);
        let mut p = model(1, &d);
        for s in p.sigma_c.iter_mut().chain(p.sigma_a.iter_mut()) {
            s.fill(0.0);
        }
        let seq = draw_switching(&p, 100, 1);
        let x_c0 = Vector::from_vec(vec![1.0, -2.0]);
        let x_a_end = Vector::from_vec(vec![3.0]);
        let data = simulate(&p, &seq, &x_c0, &x_a_end, 1).unwrap();
        let f = filter_sweep(&p, &true_assignment(&data, &d), &data, None, 0.0).unwrap();
        for t in 0..data.len() {
            assert!((&f.x_c_hat[t] - &data.x_c_true.as_ref().unwrap()[t]).amax() < 1e-8);
            assert!((&f.x_a_hat[t] - &data.x_a_true.as_ref().unwrap()[t]).amax() < 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn update_never_increases_covariance(seed in 0u64..10_000) {
            let d = Dims::new(2, 2, 2, 2, 2);
            let p = model(seed, &d);
            let seq = draw_switching(&p, 80, seed);
            let data = simulate(&p, &seq, &Vector::zeros(2), &Vector::zeros(2), seed).unwrap();
            let asg = true_assignment(&data, &d);
            let first = filter_sweep(&p, &asg, &data, None, 10.0).unwrap();
            let f = filter_sweep(&p, &asg, &data, Some(&first), 10.0).unwrap();
            for t in 0..data.len() {
                prop_assert!(min_eigenvalue(&(&f.p_c_prior[t] - &f.p_c[t])) > -1e-10);
                prop_assert!(min_eigenvalue(&(&f.p_a_prior[t] - &f.p_a[t])) > -1e-10);
                prop_assert!(min_eigenvalue(&f.p_c[t]) > -1e-10);
            }
        }
    }

    #[test]
    fn unobserved_states_keep_their_prediction() {
        let d = Dims::new(1, 1, 1, 1, 1);
        let mut p = model(3, &d);
        p.c_c[0].fill(0.0);
        p.c_a[0].fill(0.0);
        let seq = draw_switching(&p, 20, 3);
        let x_c0 = Vector::from_element(1, 2.0);
        let data = simulate(&p, &seq, &x_c0, &Vector::from_element(1, -1.0), 3).unwrap();
        let f = filter_sweep(&p, &true_assignment(&data, &d), &data, None, 10.0).unwrap();
        let a = p.a_c[0][(0, 0)];
        for t in 0..data.len() {
            assert!((f.x_c_hat[t][0] - 2.0 * a.powi(t as i32 + 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let d = Dims::new(1, 1, 1, 1, 1);
        let p = model(0, &d);
        let data = simulate(&p, &draw_switching(&p, 10, 0), &Vector::zeros(1), &Vector::zeros(1), 0).unwrap();
        let asg = ModeAssignment::from_sequences(vec![0; 9], vec![0; 9], 1, 1);
        assert!(matches!(filter_sweep(&p, &asg, &data, None, 1.0), Err(Error::Dimension(_))));
    }
}
