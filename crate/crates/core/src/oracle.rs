//! Reference implementations used to cross-check the main code paths.
//!
//! Everything here works on plain `Vec<Vec<f64>>` matrices with its own
//! elimination routine and shares no numerical code with the rest of the
//! crate. Speed is not a goal; loops index matrices the way the formulas do.

#![allow(clippy::needless_range_loop)]

use crate::linalg::{Mat, Vector};
use crate::model::{ModelParams, SwitchingSequence};
use crate::simulate::NoiseDraw;

pub type Dense = Vec<Vec<f64>>;

pub fn dense(m: &Mat) -> Dense {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn column(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

pub fn to_mat(d: &Dense) -> Mat {
    let cols = d.first().map_or(0, Vec::len);
    Mat::from_fn(d.len(), cols, |i, j| d[i][j])
}

pub fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

pub fn eye(n: usize) -> Dense {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

pub fn transpose(a: &Dense) -> Dense {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn add(a: &Dense, b: &Dense) -> Dense {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

pub fn sub(a: &Dense, b: &Dense) -> Dense {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect()).collect()
}

fn vadd(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn vsub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn outer(a: &[f64], b: &[f64]) -> Dense {
    a.iter().map(|x| b.iter().map(|y| x * y).collect()).collect()
}

/// Solve `A X = B` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `1e-300`.
pub fn solve(a: &Dense, b: &Dense) -> Option<Dense> {
    let n = a.len();
    let m = b.first().map_or(0, Vec::len);
    let mut aug: Dense = a.iter().zip(b).map(|(r, s)| r.iter().chain(s).copied().collect()).collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))?;
        if aug[pivot][col].abs() < 1e-300 {
            return None;
        }
        aug.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = aug[row][col] / aug[col][col];
                if f != 0.0 {
                    for k in col..n + m {
                        aug[row][k] -= f * aug[col][k];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| (0..m).map(|k| aug[i][n + k] / aug[i][i]).collect()).collect())
}

pub fn inverse(a: &Dense) -> Option<Dense> {
    solve(a, &eye(a.len()))
}

/// States and outputs computed by direct loops over the model equations.
pub struct ReferencePath {
    pub x_c: Vec<Vec<f64>>,
    pub x_a: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

pub fn simulate_reference(
    params: &ModelParams,
    seq: &SwitchingSequence,
    noise: &NoiseDraw,
    x_c0: &Vector,
    x_a_end: &Vector,
) -> ReferencePath {
    let t_len = seq.len();
    let a_c: Vec<Dense> = params.a_c.iter().map(dense).collect();
    let a_a: Vec<Dense> = params.a_a.iter().map(dense).collect();
    let c_c: Vec<Dense> = params.c_c.iter().map(dense).collect();
    let c_a: Vec<Dense> = params.c_a.iter().map(dense).collect();

    let mut x_c = Vec::with_capacity(t_len);
    let mut state = column(x_c0);
    for t in 0..t_len {
        state = vadd(&matvec(&a_c[seq.s_c[t]], &state), &column(&noise.v_c[t]));
        x_c.push(state.clone());
    }
    let mut x_a = vec![Vec::new(); t_len];
    let mut state = column(x_a_end);
    for t in (0..t_len).rev() {
        state = vadd(&matvec(&a_a[seq.s_a[t]], &state), &column(&noise.v_a[t]));
        x_a[t] = state.clone();
    }
    let y = (0..t_len)
        .map(|t| {
            let out = vadd(&matvec(&c_c[seq.s_c[t]], &x_c[t]), &matvec(&c_a[seq.s_a[t]], &x_a[t]));
            vadd(&out, &column(&noise.v_m[t]))
        })
        .collect();
    ReferencePath { x_c, x_a, y }
}

/// Switching least-squares estimates from explicit design matrices.
/// Covariances are the raw residual averages, without any eigenvalue floor.
pub struct ReferenceLs {
    pub a_c: Vec<Option<Dense>>,
    pub a_a: Vec<Option<Dense>>,
    pub c: Dense,
    pub sigma_c: Vec<Option<Dense>>,
    pub sigma_a: Vec<Option<Dense>>,
    pub sigma_m: Dense,
    pub pi_c: Vec<f64>,
    pub pi_a: Vec<f64>,
}

/// Input to [`switching_ls_reference`]; states are plain vectors.
pub struct LsProblem<'a> {
    pub s_c: &'a [usize],
    pub s_a: &'a [usize],
    pub m_c: usize,
    pub m_a: usize,
    pub x_c: &'a [Vec<f64>],
    pub x_a: &'a [Vec<f64>],
    pub y: &'a [Vec<f64>],
    pub x_c0: &'a [f64],
    pub x_a_end: &'a [f64],
    pub ridge: f64,
}

fn ridge_normal_solve(phi: &Dense, target: &Dense, ridge: f64) -> Option<Dense> {
    // min ‖Φ W − Y‖² + ridge ‖W‖²  ⇒  (ΦᵀΦ + ridge I) W = ΦᵀY
    let pt = transpose(phi);
    let gram = add(&matmul(&pt, phi), &eye(pt.len()).iter().map(|r| r.iter().map(|v| v * ridge).collect()).collect());
    solve(&gram, &matmul(&pt, target))
}

pub fn switching_ls_reference(p: &LsProblem<'_>) -> ReferenceLs {
    let t_len = p.y.len();
    let n_xc = p.x_c0.len();
    let n_xa = p.x_a_end.len();
    let prev = |t: usize| if t == 0 { p.x_c0.to_vec() } else { p.x_c[t - 1].clone() };
    let next = |t: usize| if t + 1 == t_len { p.x_a_end.to_vec() } else { p.x_a[t + 1].clone() };

    let dynamics = |m: usize, labels: &[usize], reg: &dyn Fn(usize) -> Vec<f64>, xs: &[Vec<f64>]| {
        (0..m)
            .map(|j| {
                let times: Vec<usize> = (0..t_len).filter(|&t| labels[t] == j).collect();
                if times.is_empty() {
                    return (None, None);
                }
                let phi: Dense = times.iter().map(|&t| reg(t)).collect();
                let target: Dense = times.iter().map(|&t| xs[t].clone()).collect();
                let Some(w) = ridge_normal_solve(&phi, &target, p.ridge) else {
                    return (None, None);
                };
                let a = transpose(&w);
                let n = xs[0].len();
                let mut cov = zeros(n, n);
                for &t in &times {
                    let r = vsub(&xs[t], &matvec(&a, &reg(t)));
                    cov = add(&cov, &outer(&r, &r));
                }
                let cov = cov.iter().map(|row| row.iter().map(|v| v / times.len() as f64).collect()).collect();
                (Some(a), Some(cov))
            })
            .unzip::<_, _, Vec<_>, Vec<_>>()
    };
    let (a_c, sigma_c) = dynamics(p.m_c, p.s_c, &prev, p.x_c);
    let (a_a, sigma_a) = dynamics(p.m_a, p.s_a, &next, p.x_a);

    let width = p.m_c * n_xc + p.m_a * n_xa;
    let phi: Dense = (0..t_len)
        .map(|t| {
            let mut row = vec![0.0; width];
            for (k, v) in p.x_c[t].iter().enumerate() {
                row[p.s_c[t] * n_xc + k] = *v;
            }
            for (k, v) in p.x_a[t].iter().enumerate() {
                row[p.m_c * n_xc + p.s_a[t] * n_xa + k] = *v;
            }
            row
        })
        .collect();
    let target: Dense = p.y.to_vec();
    let w = ridge_normal_solve(&phi, &target, p.ridge).expect("ridge keeps the output regression solvable");
    let c = transpose(&w);
    let n_y = p.y[0].len();
    let mut sigma_m = zeros(n_y, n_y);
    for t in 0..t_len {
        let r = vsub(&p.y[t], &matvec(&c, &phi[t]));
        sigma_m = add(&sigma_m, &outer(&r, &r));
    }
    let sigma_m = sigma_m.iter().map(|row| row.iter().map(|v| v / t_len as f64).collect()).collect();
    let freq = |m: usize, labels: &[usize]| (0..m).map(|j| labels.iter().filter(|&&s| s == j).count() as f64 / t_len as f64).collect();
    ReferenceLs {
        a_c,
        a_a,
        c,
        sigma_c,
        sigma_a,
        sigma_m,
        pi_c: freq(p.m_c, p.s_c),
        pi_a: freq(p.m_a, p.s_a),
    }
}

/// Standard Kalman measurement update `(x⁺, P⁺, K)` for `z = H x + w`,
/// `w ~ N(0, R)`.
pub fn kalman_update(x: &[f64], p: &Dense, h: &Dense, r: &Dense, z: &[f64]) -> (Vec<f64>, Dense, Dense) {
    let ht = transpose(h);
    let s = add(&matmul(&matmul(h, p), &ht), r);
    let k = matmul(&matmul(p, &ht), &inverse(&s).expect("innovation covariance is invertible"));
    let x_new = vadd(x, &matvec(&k, &vsub(z, &matvec(h, x))));
    let p_new = matmul(&sub(&eye(x.len()), &matmul(&k, h)), p);
    (x_new, p_new, k)
}

/// Output of [`bidirectional_reference`].
pub struct ReferenceSweep {
    pub x_c_hat: Vec<Vec<f64>>,
    pub x_a_hat: Vec<Vec<f64>>,
    pub x_c_prior: Vec<Vec<f64>>,
    pub p_c_prior: Vec<Dense>,
}

/// Single-mode bidirectional filter built from two ordinary Kalman filters.
///
/// The anticausal filter runs on the time-reversed record and treats
/// `C_c x_c(t)` as extra measurement noise with mean `C_c x⁻_c(t)` and
/// covariance `C_c P⁻_c(t) C_cᵀ` taken from `causal_prior` (zero mean and
/// `initial_cov * I` when absent). The causal filter then runs forward with
/// the anticausal priors folded in the same way. Repeating with the returned
/// causal priors gives the next sweep.
pub fn bidirectional_reference(
    params: &ModelParams,
    y: &[Vec<f64>],
    x_c0: &[f64],
    x_a_end: &[f64],
    causal_prior: Option<(&[Vec<f64>], &[Dense])>,
    initial_cov: f64,
) -> ReferenceSweep {
    let t_len = y.len();
    let (a_c, a_a) = (dense(&params.a_c[0]), dense(&params.a_a[0]));
    let (c_c, c_a) = (dense(&params.c_c[0]), dense(&params.c_a[0]));
    let (q_c, q_a, r) = (dense(&params.sigma_c[0]), dense(&params.sigma_a[0]), dense(&params.sigma_m));
    let (n_xc, n_xa) = (x_c0.len(), x_a_end.len());
    let diffuse = |n: usize| eye(n).iter().map(|row| row.iter().map(|v| v * initial_cov).collect()).collect::<Dense>();

    let mut x_a_hat = vec![Vec::new(); t_len];
    let mut x_a_prior = vec![Vec::new(); t_len];
    let mut p_a_prior = vec![Dense::new(); t_len];
    let (mut x, mut p) = (x_a_end.to_vec(), Dense::new());
    for t in (0..t_len).rev() {
        let prior_mean = matvec(&a_a, &x);
        let prior_cov = if t + 1 == t_len { diffuse(n_xa) } else { add(&matmul(&matmul(&a_a, &p), &transpose(&a_a)), &q_a) };
        let (mc, pc) = match causal_prior {
            Some((m, c)) => (m[t].clone(), c[t].clone()),
            None => (vec![0.0; n_xc], diffuse(n_xc)),
        };
        let z = vsub(&y[t], &matvec(&c_c, &mc));
        let noise = add(&matmul(&matmul(&c_c, &pc), &transpose(&c_c)), &r);
        let (xn, pn, _) = kalman_update(&prior_mean, &prior_cov, &c_a, &noise, &z);
        x_a_prior[t] = prior_mean;
        p_a_prior[t] = prior_cov;
        x_a_hat[t] = xn.clone();
        x = xn;
        p = pn;
    }

    let mut x_c_hat = Vec::with_capacity(t_len);
    let mut x_c_prior = Vec::with_capacity(t_len);
    let mut p_c_prior = Vec::with_capacity(t_len);
    let (mut x, mut p) = (x_c0.to_vec(), Dense::new());
    for t in 0..t_len {
        let prior_mean = matvec(&a_c, &x);
        let prior_cov = if t == 0 { diffuse(n_xc) } else { add(&matmul(&matmul(&a_c, &p), &transpose(&a_c)), &q_c) };
        let z = vsub(&y[t], &matvec(&c_a, &x_a_prior[t]));
        let noise = add(&matmul(&matmul(&c_a, &p_a_prior[t]), &transpose(&c_a)), &r);
        let (xn, pn, _) = kalman_update(&prior_mean, &prior_cov, &c_c, &noise, &z);
        x_c_prior.push(prior_mean);
        p_c_prior.push(prior_cov);
        x_c_hat.push(xn.clone());
        x = xn;
        p = pn;
    }
    ReferenceSweep {
        x_c_hat,
        x_a_hat,
        x_c_prior,
        p_c_prior,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elimination_solves_small_system() {
        let a = vec![vec![0.0, 2.0], vec![3.0, 1.0]];
        let b = vec![vec![4.0], vec![5.0]];
        let x = solve(&a, &b).unwrap();
        assert!((x[0][0] - 1.0).abs() < 1e-15 && (x[1][0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_system_is_reported() {
        assert!(solve(&vec![vec![1.0, 2.0], vec![2.0, 4.0]], &vec![vec![1.0], vec![2.0]]).is_none());
    }

    #[test]
    fn kalman_update_scalar() {
        let (x, p, k) = kalman_update(&[0.0], &vec![vec![1.0]], &vec![vec![1.0]], &vec![vec![1.0]], &[2.0]);
        assert_eq!((x[0], p[0][0], k[0][0]), (1.0, 0.5, 0.5));
    }
}
