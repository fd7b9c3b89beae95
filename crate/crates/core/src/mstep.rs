//! M-step: switching least squares.
//!
//! With hard weights every update is a per-mode (or, for the output
//! matrices, a joint) least-squares problem on the E-step state means.
//! Modes that received no samples keep their previous estimates and are
//! reported in [`MStepFlags`].

use nalgebra::Cholesky;

use crate::estep::{FilterResult, ModeAssignment};
use crate::linalg::{floor_eigenvalues, Mat, Vector};
use crate::model::ModelParams;
use crate::simulate::Trajectory;
use crate::{Error, Result};

/// Ridge added to every Gram matrix.
pub const RIDGE: f64 = 1e-9;
/// Eigenvalue floor applied to updated covariances.
pub const COVARIANCE_FLOOR: f64 = 1e-8;
/// Probability given to a mode that received no samples, before renormalizing.
pub const PROBABILITY_FLOOR: f64 = 1e-6;

/// State sequences used as regressors. Usually E-step means, but true
/// states work too.
#[derive(Debug, Clone, Copy)]
pub struct States<'a> {
    pub x_c: &'a [Vector],
    pub x_a: &'a [Vector],
}

impl<'a> From<&'a FilterResult> for States<'a> {
    fn from(f: &'a FilterResult) -> Self {
        States {
            x_c: &f.x_c_hat,
            x_a: &f.x_a_hat,
        }
    }
}

/// Modes (1-based) that had no samples in an update.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MStepFlags {
    pub empty_causal: Vec<usize>,
    pub empty_anticausal: Vec<usize>,
}

impl MStepFlags {
    pub fn is_clean(&self) -> bool {
        self.empty_causal.is_empty() && self.empty_anticausal.is_empty()
    }
}

fn empty_modes(counts: &[usize]) -> Vec<usize> {
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == 0)
        .map(|(i, _)| i + 1)
        .collect()
}

fn frequencies(counts: &[usize], t_len: usize) -> Vec<f64> {
    let raw: Vec<f64> = counts.iter().map(|&c| c as f64 / t_len as f64).collect();
    if counts.iter().all(|&c| c > 0) {
        return raw;
    }
    let floored: Vec<f64> = raw.iter().map(|&p| p.max(PROBABILITY_FLOOR)).collect();
    let s: f64 = floored.iter().sum();
    floored.into_iter().map(|p| p / s).collect()
}

/// Mode probabilities as assignment frequencies.
pub fn update_pi(assignment: &ModeAssignment) -> (Vec<f64>, Vec<f64>, MStepFlags) {
    let t_len = assignment.len().max(1);
    let (cc, ca) = (assignment.counts_c(), assignment.counts_a());
    let flags = MStepFlags {
        empty_causal: empty_modes(&cc),
        empty_anticausal: empty_modes(&ca),
    };
    (frequencies(&cc, t_len), frequencies(&ca, t_len), flags)
}

/// Solve `X G = R` for `X` with symmetric positive definite `G`.
fn solve_right(r: &Mat, g: &Mat, block: impl Fn() -> String) -> Result<Mat> {
    let chol = Cholesky::new(g.clone()).ok_or_else(|| Error::RankDeficient { block: block() })?;
    Ok(chol.solve(&r.transpose()).transpose())
}

/// Per-mode least squares `x(t) ≈ A x(t∓1)` for both subsystems.
pub fn update_a(
    assignment: &ModeAssignment,
    states: States<'_>,
    data: &Trajectory,
    previous: &ModelParams,
) -> Result<(Vec<Mat>, Vec<Mat>, MStepFlags)> {
    let t_len = data.len();
    let n_xc = data.x_c0.len();
    let n_xa = data.x_a_end.len();
    let mut a_c = previous.a_c.clone();
    let mut a_a = previous.a_a.clone();
    let mut flags = MStepFlags::default();

    let mut gram_c = vec![Mat::identity(n_xc, n_xc) * RIDGE; assignment.m_c];
    let mut cross_c = vec![Mat::zeros(n_xc, n_xc); assignment.m_c];
    let mut gram_a = vec![Mat::identity(n_xa, n_xa) * RIDGE; assignment.m_a];
    let mut cross_a = vec![Mat::zeros(n_xa, n_xa); assignment.m_a];
    for t in 0..t_len {
        let j = assignment.s_c_hat[t];
        let prev = if t == 0 { &data.x_c0 } else { &states.x_c[t - 1] };
        gram_c[j] += prev * prev.transpose();
        cross_c[j] += &states.x_c[t] * prev.transpose();

        let l = assignment.s_a_hat[t];
        let next = if t + 1 == t_len { &data.x_a_end } else { &states.x_a[t + 1] };
        gram_a[l] += next * next.transpose();
        cross_a[l] += &states.x_a[t] * next.transpose();
    }
    for (j, count) in assignment.counts_c().into_iter().enumerate() {
        if count == 0 {
            flags.empty_causal.push(j + 1);
        } else {
            a_c[j] = solve_right(&cross_c[j], &gram_c[j], || format!("A_c({})", j + 1))?;
        }
    }
    for (l, count) in assignment.counts_a().into_iter().enumerate() {
        if count == 0 {
            flags.empty_anticausal.push(l + 1);
        } else {
            a_a[l] = solve_right(&cross_a[l], &gram_a[l], || format!("A_a({})", l + 1))?;
        }
    }
    Ok((a_c, a_a, flags))
}

/// All output matrices from one joint least-squares problem.
///
/// Unknown `[C_c(1..m_c), C_a(1..m_a)]`; at time `t` the regressor holds
/// `x_c(t)` in the block of the assigned causal mode and `x_a(t)` in the block
/// of the assigned anticausal mode. Blocks of modes with no samples are
/// determined by the ridge alone and come out as zero.
pub fn update_c(
    assignment: &ModeAssignment,
    states: States<'_>,
    data: &Trajectory,
) -> Result<(Vec<Mat>, Vec<Mat>, MStepFlags)> {
    let t_len = data.len();
    let n_y = data.n_y();
    let n_xc = data.x_c0.len();
    let n_xa = data.x_a_end.len();
    let (m_c, m_a) = (assignment.m_c, assignment.m_a);
    let dim = m_c * n_xc + m_a * n_xa;
    let mut gram = Mat::identity(dim, dim) * RIDGE;
    let mut rhs = Mat::zeros(dim, n_y);
    for t in 0..t_len {
        let bc = assignment.s_c_hat[t] * n_xc;
        let ba = m_c * n_xc + assignment.s_a_hat[t] * n_xa;
        let (xc, xa) = (&states.x_c[t], &states.x_a[t]);
        let yt = data.y[t].transpose();
        add_block(&mut gram, (bc, bc), xc * xc.transpose());
        add_block(&mut gram, (ba, ba), xa * xa.transpose());
        let cross = xc * xa.transpose();
        add_block(&mut gram, (bc, ba), &cross);
        add_block(&mut gram, (ba, bc), cross.transpose());
        add_block(&mut rhs, (bc, 0), xc * &yt);
        add_block(&mut rhs, (ba, 0), xa * &yt);
    }
    let chol = Cholesky::new(gram).ok_or_else(|| Error::RankDeficient {
        block: "joint output regression".into(),
    })?;
    let w = chol.solve(&rhs);
    let c_c = (0..m_c)
        .map(|j| w.view((j * n_xc, 0), (n_xc, n_y)).transpose())
        .collect();
    let c_a = (0..m_a)
        .map(|l| w.view((m_c * n_xc + l * n_xa, 0), (n_xa, n_y)).transpose())
        .collect();
    let flags = MStepFlags {
        empty_causal: empty_modes(&assignment.counts_c()),
        empty_anticausal: empty_modes(&assignment.counts_a()),
    };
    Ok((c_c, c_a, flags))
}

fn add_block(target: &mut Mat, at: (usize, usize), block: impl std::borrow::Borrow<Mat>) {
    let block = block.borrow();
    let mut view = target.view_mut(at, block.shape());
    view += block;
}

/// Noise covariances as weight-normalized residual outer products,
/// re-symmetrized and floored at [`COVARIANCE_FLOOR`].
pub struct SigmaUpdate {
    pub sigma_c: Vec<Mat>,
    pub sigma_a: Vec<Mat>,
    pub sigma_m: Mat,
    pub flags: MStepFlags,
}

#[allow(clippy::too_many_arguments)]
pub fn update_sigma(
    assignment: &ModeAssignment,
    states: States<'_>,
    data: &Trajectory,
    a_c: &[Mat],
    a_a: &[Mat],
    c_c: &[Mat],
    c_a: &[Mat],
    previous: &ModelParams,
) -> SigmaUpdate {
    let t_len = data.len();
    let n_y = data.n_y();
    let mut acc_c: Vec<Mat> = previous.sigma_c.iter().map(|s| Mat::zeros(s.nrows(), s.ncols())).collect();
    let mut acc_a: Vec<Mat> = previous.sigma_a.iter().map(|s| Mat::zeros(s.nrows(), s.ncols())).collect();
    let mut acc_m = Mat::zeros(n_y, n_y);
    for t in 0..t_len {
        let (j, l) = (assignment.s_c_hat[t], assignment.s_a_hat[t]);
        let prev = if t == 0 { &data.x_c0 } else { &states.x_c[t - 1] };
        let next = if t + 1 == t_len { &data.x_a_end } else { &states.x_a[t + 1] };
        let rc = &states.x_c[t] - &a_c[j] * prev;
        let ra = &states.x_a[t] - &a_a[l] * next;
        let rm = &data.y[t] - &c_c[j] * &states.x_c[t] - &c_a[l] * &states.x_a[t];
        acc_c[j] += &rc * rc.transpose();
        acc_a[l] += &ra * ra.transpose();
        acc_m += &rm * rm.transpose();
    }
    let mut flags = MStepFlags::default();
    let finish = |acc: &Mat, n: usize, prev: &Mat| -> Mat {
        if n == 0 {
            prev.clone()
        } else {
            floor_eigenvalues(&(acc / n as f64), COVARIANCE_FLOOR)
        }
    };
    let counts_c = assignment.counts_c();
    let counts_a = assignment.counts_a();
    let sigma_c = (0..acc_c.len())
        .map(|j| finish(&acc_c[j], counts_c[j], &previous.sigma_c[j]))
        .collect();
    let sigma_a = (0..acc_a.len())
        .map(|l| finish(&acc_a[l], counts_a[l], &previous.sigma_a[l]))
        .collect();
    flags.empty_causal = empty_modes(&counts_c);
    flags.empty_anticausal = empty_modes(&counts_a);
    SigmaUpdate {
        sigma_c,
        sigma_a,
        sigma_m: finish(&acc_m, t_len, &previous.sigma_m),
        flags,
    }
}

/// Full M-step: π, then A, then C, then the covariances with the new A and C.
pub fn m_step(
    previous: &ModelParams,
    assignment: &ModeAssignment,
    states: States<'_>,
    data: &Trajectory,
) -> Result<(ModelParams, MStepFlags)> {
    let (pi_c, pi_a, flags) = update_pi(assignment);
    let (a_c, a_a, _) = update_a(assignment, states, data, previous)?;
    let (c_c, c_a, _) = update_c(assignment, states, data)?;
    let sig = update_sigma(assignment, states, data, &a_c, &a_a, &c_c, &c_a, previous);
    // empty modes keep their previous output matrices too
    let c_c = c_c
        .into_iter()
        .enumerate()
        .map(|(j, c)| if flags.empty_causal.contains(&(j + 1)) { previous.c_c[j].clone() } else { c })
        .collect();
    let c_a = c_a
        .into_iter()
        .enumerate()
        .map(|(l, c)| if flags.empty_anticausal.contains(&(l + 1)) { previous.c_a[l].clone() } else { c })
        .collect();
    Ok((
        ModelParams {
            a_c,
            a_a,
            c_c,
            c_a,
            sigma_c: sig.sigma_c,
            sigma_a: sig.sigma_a,
            sigma_m: sig.sigma_m,
            pi_c,
            pi_a,
        },
        flags,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acceptance::random;
    use crate::estep::{evaluate_q, run_estep, EStepOptions};
    use crate::model::Dims;
    use crate::simulate::{draw_switching, rng_stream, simulate};
    use proptest::prelude::*;
    use rand::Rng;

    fn s(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    fn v(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    fn scalar_prev(m_c: usize, m_a: usize) -> ModelParams {
        ModelParams {
            a_c: vec![s(0.1); m_c],
            a_a: vec![s(0.1); m_a],
            c_c: vec![s(0.1); m_c],
            c_a: vec![s(0.1); m_a],
            sigma_c: vec![s(1.0); m_c],
            sigma_a: vec![s(1.0); m_a],
            sigma_m: s(1.0),
            pi_c: vec![1.0 / m_c as f64; m_c],
            pi_a: vec![1.0 / m_a as f64; m_a],
        }
    }

    #[test]
    fn three_step_scalar_closed_form() {
        let x_c = [v(1.0), v(2.0), v(3.5)];
        let x_a = [v(0.5), v(-1.0), v(2.0)];
        let data = Trajectory::observed(vec![v(0.0); 3], v(0.5), v(1.5));
        let asg = ModeAssignment::from_sequences(vec![0; 3], vec![0; 3], 1, 1);
        let (a_c, a_a, _) = update_a(&asg, States { x_c: &x_c, x_a: &x_a }, &data, &scalar_prev(1, 1)).unwrap();
        let expected_c = (1.0 * 0.5 + 2.0 * 1.0 + 3.5 * 2.0) / (0.25 + 1.0 + 4.0 + RIDGE);
        let expected_a = (2.0 * 1.5 - 2.0 - 0.5) / (2.25 + 4.0 + 1.0 + RIDGE);
        assert!((a_c[0][(0, 0)] - expected_c).abs() < 1e-14);
        assert!((a_a[0][(0, 0)] - expected_a).abs() < 1e-14);
    }

    #[test]
    fn single_mode_output_fit_is_ordinary_least_squares() {
        let mut rng = rng_stream(5, 0);
        let t_len = 40;
        let x_c: Vec<Vector> = (0..t_len).map(|_| v(rng.random_range(-1.0..1.0))).collect();
        let x_a: Vec<Vector> = (0..t_len).map(|_| v(rng.random_range(-1.0..1.0))).collect();
        let y: Vec<Vector> = (0..t_len).map(|_| v(rng.random_range(-1.0..1.0))).collect();
        let data = Trajectory::observed(y.clone(), v(0.0), v(0.0));
        let asg = ModeAssignment::from_sequences(vec![0; t_len], vec![0; t_len], 1, 1);
        let (c_c, c_a, _) = update_c(&asg, States { x_c: &x_c, x_a: &x_a }, &data).unwrap();
        // 2x2 normal equations by Cramer's rule
        let dot = |a: &[Vector], b: &[Vector]| a.iter().zip(b).map(|(p, q)| p[0] * q[0]).sum::<f64>();
        let (scc, saa, sca) = (dot(&x_c, &x_c), dot(&x_a, &x_a), dot(&x_c, &x_a));
        let (scy, say) = (dot(&x_c, &y), dot(&x_a, &y));
        let det = scc * saa - sca * sca;
        assert!((c_c[0][(0, 0)] - (scy * saa - say * sca) / det).abs() < 1e-8);
        assert!((c_a[0][(0, 0)] - (say * scc - scy * sca) / det).abs() < 1e-8);
    }

    #[test]
    fn unit_residuals_give_unit_covariance() {
        let x_c = [v(1.0), v(-1.0)];
        let x_a = [v(0.0), v(0.0)];
        let data = Trajectory::observed(vec![v(1.0), v(-1.0)], v(0.0), v(0.0));
        let asg = ModeAssignment::from_sequences(vec![0; 2], vec![0; 2], 1, 1);
        let zero = [s(0.0)];
        let sig = update_sigma(
            &asg,
            States { x_c: &x_c, x_a: &x_a },
            &data,
            &zero,
            &zero,
            &zero,
            &zero,
            &scalar_prev(1, 1),
        );
        assert!((sig.sigma_c[0][(0, 0)] - 1.0).abs() < 1e-15);
        assert!((sig.sigma_m[(0, 0)] - 1.0).abs() < 1e-15);
        // anticausal residuals are all zero
        assert_eq!(sig.sigma_a[0][(0, 0)], COVARIANCE_FLOOR);
    }

    #[test]
    fn empty_mode_keeps_previous_values() {
        let x = [v(1.0), v(0.5), v(0.25)];
        let data = Trajectory::observed(vec![v(1.0); 3], v(2.0), v(0.0));
        let asg = ModeAssignment::from_sequences(vec![0; 3], vec![0; 3], 2, 1);
        let prev = scalar_prev(2, 1);
        let (p, flags) = m_step(&prev, &asg, States { x_c: &x, x_a: &x }, &data).unwrap();
        assert_eq!(flags.empty_causal, vec![2]);
        assert_eq!(p.a_c[1], prev.a_c[1]);
        assert_eq!(p.c_c[1], prev.c_c[1]);
        assert_eq!(p.sigma_c[1], prev.sigma_c[1]);
        assert!((p.a_c[0][(0, 0)] - 0.5).abs() < 1e-8);
        assert!((p.pi_c.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.pi_c[1] > 0.0 && p.pi_c[1] < 1e-5);
    }

    struct Instance {
        theta: ModelParams,
        data: Trajectory,
        estep: crate::estep::EStep,
    }

    fn instance(seed: u64) -> Instance {
        let mut rng = rng_stream(seed, 3);
        let d = Dims::new(rng.random_range(1..=2), rng.random_range(1..=2), rng.random_range(1..=2), 2, 2);
        let truth = random::stable_model(&mut rng, &d);
        let seq = draw_switching(&truth, 300, seed);
        let data = simulate(&truth, &seq, &Vector::zeros(d.n_xc), &Vector::zeros(d.n_xa), seed).unwrap();
        let estep = run_estep(&truth, &data, &EStepOptions::default()).unwrap();
        Instance {
            theta: truth,
            data,
            estep,
        }
    }

    fn perturb(p: &ModelParams, rng: &mut rand_chacha::ChaCha8Rng, step: f64) -> ModelParams {
        let mut q = p.clone();
        let mut nudge = |m: &mut Mat| {
            for x in m.iter_mut() {
                *x += step * rng.random_range(-1.0..1.0);
            }
        };
        q.a_c.iter_mut().chain(q.a_a.iter_mut()).for_each(&mut nudge);
        q.c_c.iter_mut().chain(q.c_a.iter_mut()).for_each(&mut nudge);
        let mut sym = |m: &mut Mat| {
            let e = Mat::from_fn(m.nrows(), m.ncols(), |_, _| step * rng.random_range(-1.0..1.0));
            *m += &e + e.transpose();
        };
        q.sigma_c.iter_mut().chain(q.sigma_a.iter_mut()).for_each(&mut sym);
        sym(&mut q.sigma_m);
        q
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn update_does_not_lower_q(seed in 0u64..10_000) {
            let inst = instance(seed);
            let (f, asg) = (&inst.estep.filter, &inst.estep.assignment);
            let (next, _) = m_step(&inst.theta, asg, States::from(f), &inst.data).unwrap();
            let before = evaluate_q(&inst.theta, asg, f, &inst.data, false).unwrap().q_total;
            let after = evaluate_q(&next, asg, f, &inst.data, false).unwrap().q_total;
            prop_assert!(after >= before - 1e-9 * before.abs(), "seed {}: {} -> {}", seed, before, after);
        }
    }

    #[test]
    fn update_is_a_local_maximum_of_q() {
        for seed in 0..5 {
            let inst = instance(seed);
            let (f, asg) = (&inst.estep.filter, &inst.estep.assignment);
            let (next, _) = m_step(&inst.theta, asg, States::from(f), &inst.data).unwrap();
            let best = evaluate_q(&next, asg, f, &inst.data, false).unwrap().q_total;
            let mut rng = rng_stream(seed, 4);
            for _ in 0..50 {
                let q = perturb(&next, &mut rng, 1e-3);
                if let Ok(v) = evaluate_q(&q, asg, f, &inst.data, false) {
                    assert!(v.q_total <= best + 1e-9 * best.abs(), "seed {seed}: {} > {best}", v.q_total);
                }
            }
        }
    }

    #[test]
    fn relabelling_modes_relabels_the_update() {
        let inst = instance(7);
        let (f, asg) = (&inst.estep.filter, &inst.estep.assignment);
        let (plain, _) = m_step(&inst.theta, asg, States::from(f), &inst.data).unwrap();
        let swap = |s: &[usize]| s.iter().map(|&m| 1 - m).collect::<Vec<_>>();
        let swapped = ModeAssignment::from_sequences(swap(&asg.s_c_hat), swap(&asg.s_a_hat), 2, 2);
        let prev = inst.theta.permute_causal(&[1, 0]).permute_anticausal(&[1, 0]);
        let (relabelled, _) = m_step(&prev, &swapped, States::from(f), &inst.data).unwrap();
        let expected = plain.permute_causal(&[1, 0]).permute_anticausal(&[1, 0]);
        let close = |a: &[Mat], b: &[Mat]| a.iter().zip(b).all(|(x, y)| (x - y).amax() < 1e-10);
        assert!(close(&relabelled.a_c, &expected.a_c) && close(&relabelled.a_a, &expected.a_a));
        assert!(close(&relabelled.c_c, &expected.c_c) && close(&relabelled.c_a, &expected.c_a));
        assert!(close(&relabelled.sigma_c, &expected.sigma_c) && close(&relabelled.sigma_a, &expected.sigma_a));
        assert!((&relabelled.sigma_m - &expected.sigma_m).amax() < 1e-10);
        assert_eq!(relabelled.pi_c, expected.pi_c);
    }
}
