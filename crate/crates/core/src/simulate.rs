//! Trajectory generator: forward causal recursion, backward anticausal
//! recursion, then the output equation.
//!
//! Random streams are derived from a `(seed, stream)` pair: the seed keys a
//! ChaCha8 generator and the stream index selects one of its independent
//! 64-bit streams (see [`rng_stream`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{is_finite_vec, psd_sqrt, Mat, Vector};
use crate::model::{validate_with, Definiteness, ModelParams, SwitchingSequence};
use crate::{Error, Result};

/// Stream used by [`draw_switching`].
pub const STREAM_SWITCHING: u64 = 0;
/// Stream used by [`draw_noise`].
pub const STREAM_NOISE: u64 = 1;

/// Default cap on the time-averaged squared state norm.
pub const DEFAULT_STATE_NORM_CAP: f64 = 1e6;

pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Observed outputs plus whatever ground truth is known.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub y: Vec<Vector>,
    pub x_c_true: Option<Vec<Vector>>,
    pub x_a_true: Option<Vec<Vector>>,
    pub seq_true: Option<SwitchingSequence>,
    /// Known causal boundary state `x_c(0)`.
    pub x_c0: Vector,
    /// Known anticausal boundary state `x_a(T+1)`.
    pub x_a_end: Vector,
}

impl Trajectory {
    pub fn observed(y: Vec<Vector>, x_c0: Vector, x_a_end: Vector) -> Self {
        Trajectory {
            y,
            x_c_true: None,
            x_a_true: None,
            seq_true: None,
            x_c0,
            x_a_end,
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_y(&self) -> usize {
        self.y.first().map_or(0, |v| v.len())
    }

    /// Every present sequence has length `T`.
    pub fn check(&self) -> Result<()> {
        let t = self.len();
        let ok = self.x_c_true.as_ref().is_none_or(|x| x.len() == t)
            && self.x_a_true.as_ref().is_none_or(|x| x.len() == t)
            && self.seq_true.as_ref().is_none_or(|s| s.s_c.len() == t && s.s_a.len() == t);
        if !ok {
            return Err(Error::Dimension(format!("trajectory sequences must all have length {t}")));
        }
        let ny = self.n_y();
        if self.y.iter().any(|v| v.len() != ny) {
            return Err(Error::Dimension("ragged output vectors".into()));
        }
        Ok(())
    }
}

/// Per-time noise vectors with the mode-dependent covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub v_c: Vec<Vector>,
    pub v_a: Vec<Vector>,
    pub v_m: Vec<Vector>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub state_norm_cap: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            state_norm_cap: DEFAULT_STATE_NORM_CAP,
        }
    }
}

/// Draw i.i.d. causal then anticausal mode labels from `pi_c`, `pi_a`.
pub fn draw_switching(params: &ModelParams, t: usize, seed: u64) -> SwitchingSequence {
    let mut rng = rng_stream(seed, STREAM_SWITCHING);
    let s_c = (0..t).map(|_| sample_categorical(&params.pi_c, &mut rng)).collect();
    let s_a = (0..t).map(|_| sample_categorical(&params.pi_a, &mut rng)).collect();
    SwitchingSequence { s_c, s_a }
}

fn sample_categorical<R: Rng>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // u landed in the round-off gap above the cumulative sum
    p.iter().rposition(|&pi| pi > 0.0).unwrap_or(0)
}

/// Draw `v_c(1..T)`, then `v_a(1..T)`, then `v_m(1..T)`, each as
/// `sqrt(Σ) z` with `z` standard normal. Semi-definite covariances are fine.
pub fn draw_noise(params: &ModelParams, seq: &SwitchingSequence, seed: u64) -> NoiseDraw {
    let mut rng = rng_stream(seed, STREAM_NOISE);
    let root_c: Vec<Mat> = params.sigma_c.iter().map(psd_sqrt).collect();
    let root_a: Vec<Mat> = params.sigma_a.iter().map(psd_sqrt).collect();
    let root_m = psd_sqrt(&params.sigma_m);
    let mut gaussian = |root: &Mat| -> Vector {
        let z = Vector::from_fn(root.ncols(), |_, _| rng.sample(StandardNormal));
        root * z
    };
    let v_c = seq.s_c.iter().map(|&j| gaussian(&root_c[j])).collect();
    let v_a = seq.s_a.iter().map(|&l| gaussian(&root_a[l])).collect();
    let v_m = (0..seq.len()).map(|_| gaussian(&root_m)).collect();
    NoiseDraw { v_c, v_a, v_m }
}

pub fn simulate(
    params: &ModelParams,
    seq: &SwitchingSequence,
    x_c0: &Vector,
    x_a_end: &Vector,
    seed: u64,
) -> Result<Trajectory> {
    simulate_with(params, seq, x_c0, x_a_end, seed, &SimOptions::default())
}

pub fn simulate_with(
    params: &ModelParams,
    seq: &SwitchingSequence,
    x_c0: &Vector,
    x_a_end: &Vector,
    seed: u64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let dims = params.dims();
    validate_with(params, &dims, Definiteness::SemiDefinite).into_result()?;
    seq.check(&dims)?;
    let noise = draw_noise(params, seq, seed);
    simulate_with_noise(params, seq, &noise, x_c0, x_a_end, opts)
}

/// Run the three recursions on pre-drawn noise.
pub fn simulate_with_noise(
    params: &ModelParams,
    seq: &SwitchingSequence,
    noise: &NoiseDraw,
    x_c0: &Vector,
    x_a_end: &Vector,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let dims = params.dims();
    let t_len = seq.len();
    if x_c0.len() != dims.n_xc || x_a_end.len() != dims.n_xa {
        return Err(Error::Dimension("boundary state dimension mismatch".into()));
    }
    if noise.v_c.len() != t_len || noise.v_a.len() != t_len || noise.v_m.len() != t_len {
        return Err(Error::Dimension("noise draw length differs from sequence".into()));
    }

    let mut x_c = Vec::with_capacity(t_len);
    let mut prev = x_c0.clone();
    for t in 0..t_len {
        let next = &params.a_c[seq.s_c[t]] * &prev + &noise.v_c[t];
        x_c.push(next.clone());
        prev = next;
    }

    let mut x_a = vec![Vector::zeros(dims.n_xa); t_len];
    let mut next = x_a_end.clone();
    for t in (0..t_len).rev() {
        let cur = &params.a_a[seq.s_a[t]] * &next + &noise.v_a[t];
        x_a[t] = cur.clone();
        next = cur;
    }

    check_average_stability(&x_c, "causal", opts.state_norm_cap)?;
    check_average_stability(&x_a, "anticausal", opts.state_norm_cap)?;

    let y = (0..t_len)
        .map(|t| {
            &params.c_c[seq.s_c[t]] * &x_c[t] + &params.c_a[seq.s_a[t]] * &x_a[t] + &noise.v_m[t]
        })
        .collect();

    Ok(Trajectory {
        y,
        x_c_true: Some(x_c),
        x_a_true: Some(x_a),
        seq_true: Some(seq.clone()),
        x_c0: x_c0.clone(),
        x_a_end: x_a_end.clone(),
    })
}

fn check_average_stability(x: &[Vector], which: &str, cap: f64) -> Result<()> {
    if let Some(t) = x.iter().position(|v| !is_finite_vec(v)) {
        return Err(Error::divergence(t + 1, format!("{which} state is not finite")));
    }
    if x.is_empty() {
        return Ok(());
    }
    let avg = x.iter().map(|v| v.norm_squared()).sum::<f64>() / x.len() as f64;
    if avg.is_nan() || avg > cap {
        return Err(Error::Divergence {
            t: None,
            what: format!("{which} time-averaged squared state norm {avg:e} exceeds cap {cap:e}"),
        });
    }
    Ok(())
}

/// Largest squared residuals of the state and output equations when the
/// true states are paired with an estimated mode sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualBounds {
    pub eta_c: f64,
    pub eta_a: f64,
    pub eta_m: f64,
}

pub fn residual_bounds(
    params: &ModelParams,
    traj: &Trajectory,
    estimated: &SwitchingSequence,
) -> Result<ResidualBounds> {
    let (Some(x_c), Some(x_a)) = (&traj.x_c_true, &traj.x_a_true) else {
        return Err(Error::Validation("residual bounds need true states".into()));
    };
    let t_len = traj.len();
    let mut out = ResidualBounds {
        eta_c: 0.0,
        eta_a: 0.0,
        eta_m: 0.0,
    };
    for t in 0..t_len {
        let (j, l) = (estimated.s_c[t], estimated.s_a[t]);
        let prev = if t == 0 { &traj.x_c0 } else { &x_c[t - 1] };
        let next = if t + 1 == t_len { &traj.x_a_end } else { &x_a[t + 1] };
        out.eta_c = out.eta_c.max((&x_c[t] - &params.a_c[j] * prev).norm_squared());
        out.eta_a = out.eta_a.max((&x_a[t] - &params.a_a[l] * next).norm_squared());
        let pred = &params.c_c[j] * &x_c[t] + &params.c_a[l] * &x_a[t];
        out.eta_m = out.eta_m.max((&traj.y[t] - pred).norm_squared());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless_half() -> ModelParams {
        let mut p = ModelParams::example1().with_process_noise(0.0);
        p.sigma_m = Mat::zeros(1, 1);
        for a in p.a_c.iter_mut().chain(p.a_a.iter_mut()) {
            *a = Mat::identity(2, 2) * 0.5;
        }
        p
    }

    #[test]
    fn degenerate_probabilities_give_constant_sequence() {
        let p = ModelParams::example1().with_probabilities(vec![1.0, 0.0], vec![0.5, 0.5]);
        for t in [1, 7, 1000] {
            let s = draw_switching(&p, t, 3);
            assert!(s.s_c.iter().all(|&m| m == 0));
        }
    }

    #[test]
    fn mode_frequencies_concentrate() {
        let p = ModelParams::example1();
        let s = draw_switching(&p, 10_000, 11);
        let fc = s.s_c.iter().filter(|&&m| m == 0).count() as f64 / 1e4;
        let fa = s.s_a.iter().filter(|&&m| m == 0).count() as f64 / 1e4;
        assert!((0.68..=0.72).contains(&fc), "{fc}");
        assert!((0.48..=0.52).contains(&fa), "{fa}");
    }

    #[test]
    fn noiseless_causal_decay() {
        let p = noiseless_half();
        let seq = SwitchingSequence::constant(2, 0, 0);
        let ones = Vector::from_element(2, 1.0);
        let tr = simulate(&p, &seq, &ones, &Vector::zeros(2), 0).unwrap();
        let x = tr.x_c_true.unwrap();
        assert_eq!(x[0], Vector::from_element(2, 0.5));
        assert_eq!(x[1], Vector::from_element(2, 0.25));
    }

    #[test]
    fn noiseless_anticausal_runs_backward() {
        let p = noiseless_half();
        let seq = SwitchingSequence::constant(2, 0, 1);
        let ones = Vector::from_element(2, 1.0);
        let tr = simulate(&p, &seq, &Vector::zeros(2), &ones, 0).unwrap();
        let x = tr.x_a_true.unwrap();
        assert_eq!(x[1], Vector::from_element(2, 0.5));
        assert_eq!(x[0], Vector::from_element(2, 0.25));
    }

    #[test]
    fn residual_identity_with_truth() {
        let p = ModelParams::example1().with_process_noise(0.1);
        let mut p = p;
        p.a_c = vec![Mat::identity(2, 2) * 0.6, Mat::identity(2, 2) * 0.3];
        let seq = draw_switching(&p, 200, 4);
        let noise = draw_noise(&p, &seq, 4);
        let tr = simulate_with_noise(&p, &seq, &noise, &Vector::zeros(2), &Vector::zeros(2), &SimOptions::default())
            .unwrap();
        let (xc, xa) = (tr.x_c_true.as_ref().unwrap(), tr.x_a_true.as_ref().unwrap());
        for t in 0..200 {
            let r = &tr.y[t] - &p.c_c[seq.s_c[t]] * &xc[t] - &p.c_a[seq.s_a[t]] * &xa[t];
            assert!((r - &noise.v_m[t]).amax() < 1e-12);
        }
    }

    #[test]
    fn unstable_example_is_rejected() {
        let p = ModelParams::example1();
        let seq = draw_switching(&p, 10_000, 1);
        let err = simulate(&p, &seq, &Vector::zeros(2), &Vector::zeros(2), 1).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn same_seed_same_trajectory() {
        let mut p = ModelParams::example1();
        p.a_c[0] *= 0.7;
        let seq = draw_switching(&p, 500, 9);
        let a = simulate(&p, &seq, &Vector::zeros(2), &Vector::zeros(2), 9).unwrap();
        let b = simulate(&p, &seq, &Vector::zeros(2), &Vector::zeros(2), 9).unwrap();
        assert_eq!(a, b);
        let c = simulate(&p, &seq, &Vector::zeros(2), &Vector::zeros(2), 10).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn residual_bounds_finite_for_true_sequence() {
        let mut p = ModelParams::example1();
        p.a_c[0] *= 0.7;
        let seq = draw_switching(&p, 300, 2);
        let tr = simulate(&p, &seq, &Vector::zeros(2), &Vector::zeros(2), 2).unwrap();
        let b = residual_bounds(&p, &tr, &seq).unwrap();
        assert!(b.eta_c.is_finite() && b.eta_a.is_finite() && b.eta_m.is_finite());
    }

    #[test]
    fn matches_direct_loops() {
        let mut p = ModelParams::example1();
        p.a_c[0] *= 0.7;
        let seq = draw_switching(&p, 200, 4);
        let noise = draw_noise(&p, &seq, 4);
        let x_c0 = Vector::from_vec(vec![0.5, -1.0]);
        let x_a_end = Vector::from_vec(vec![2.0, 0.25]);
        let tr = simulate_with_noise(&p, &seq, &noise, &x_c0, &x_a_end, &SimOptions::default()).unwrap();
        let reference = crate::oracle::simulate_reference(&p, &seq, &noise, &x_c0, &x_a_end);
        let gap = |a: &[Vector], b: &[Vec<f64>]| {
            a.iter()
                .zip(b)
                .flat_map(|(u, v)| u.iter().zip(v).map(|(x, y)| (x - y).abs()))
                .fold(0.0_f64, f64::max)
        };
        assert!(gap(tr.x_c_true.as_ref().unwrap(), &reference.x_c) < 1e-12);
        assert!(gap(tr.x_a_true.as_ref().unwrap(), &reference.x_a) < 1e-12);
        assert!(gap(&tr.y, &reference.y) < 1e-12);
    }
}
