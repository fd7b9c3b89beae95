//! EM driver: initialization, alternating E/M steps, ascent enforcement,
//! stopping and multi-restart selection.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use crate::estep::{evaluate_q, run_estep, EStep, EStepOptions, FilterResult, ModeAssignment, QValue, DEFAULT_INITIAL_COV};
use crate::linalg::{cholesky_regularized, gaussian_logpdf, is_finite_vec, Mat, Vector, SINGULAR_JITTER};
use crate::model::{validate, Dims, ModelParams};
use crate::mstep::{m_step, MStepFlags, RIDGE};
use crate::simulate::{rng_stream, Trajectory};
use crate::{Error, Result};

/// Allowed relative decrease of the log-likelihood between accepted iterates.
pub const MONOTONE_TOL: f64 = 1e-8;

/// First random stream used for restart initializations; restart `r` uses
/// stream `INIT_STREAM_BASE + r` of the configured seed.
pub const INIT_STREAM_BASE: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    RandomPerturb,
    UserSupplied,
    DataDriven,
}

impl InitScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            InitScheme::RandomPerturb => "random-perturb",
            InitScheme::UserSupplied => "user-supplied",
            InitScheme::DataDriven => "data-driven",
        }
    }
}

impl std::str::FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-perturb" => Ok(InitScheme::RandomPerturb),
            "user-supplied" => Ok(InitScheme::UserSupplied),
            "data-driven" => Ok(InitScheme::DataDriven),
            other => Err(Error::Config(format!("unknown init scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Relative log-likelihood change below which the run has converged.
    pub tol_loglik: f64,
    pub restarts: usize,
    /// Scheme of restart 0; later restarts always use random perturbation.
    pub init_scheme: InitScheme,
    /// Starting point for [`InitScheme::UserSupplied`].
    pub init_params: Option<ModelParams>,
    pub inner_sweeps: usize,
    pub initial_cov: f64,
    /// Step halvings tried when a full EM step lowers the log-likelihood.
    pub max_backtracks: usize,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iters: 200,
            tol_loglik: 1e-7,
            restarts: 5,
            init_scheme: InitScheme::RandomPerturb,
            init_params: None,
            inner_sweeps: 1,
            initial_cov: DEFAULT_INITIAL_COV,
            max_backtracks: 8,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn check(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.restarts < 1 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.init_scheme == InitScheme::UserSupplied && self.init_params.is_none() {
            return Err(Error::Config("user-supplied initialization needs init_params".into()));
        }
        Ok(())
    }

    fn estep_options(&self) -> EStepOptions {
        EStepOptions {
            inner_sweeps: self.inner_sweeps,
            initial_cov: self.initial_cov,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIters,
    Divergence,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Converged => "converged",
            StopReason::MaxIters => "max-iters",
            StopReason::Divergence => "divergence",
        })
    }
}

/// A full EM step that lowered the log-likelihood beyond [`MONOTONE_TOL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectedStep {
    pub iteration: usize,
    pub loglik_before: f64,
    pub loglik_full_step: f64,
    /// Step fraction finally accepted, if any halving restored ascent.
    pub accepted_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmReport {
    /// Observed log-likelihood of every accepted iterate, starting at θ⁰.
    pub loglik_trace: Vec<f64>,
    /// `Q(θᵏ⁺¹, θᵏ)` with trace correction, one per M-step.
    pub q_trace: Vec<QValue>,
    pub final_params: ModelParams,
    pub final_assignment: ModeAssignment,
    pub final_filter: FilterResult,
    pub stop_reason: StopReason,
    pub restart_index_chosen: usize,
    /// Final log-likelihood per restart; `None` if that restart failed.
    pub restart_logliks: Vec<Option<f64>>,
    pub rejected_steps: Vec<RejectedStep>,
    pub last_flags: MStepFlags,
    /// Human-readable note when the run stopped on divergence.
    pub diagnostics: Option<String>,
}

impl EmReport {
    pub fn iterations(&self) -> usize {
        self.loglik_trace.len().saturating_sub(1)
    }

    /// Pairs `(k, ℓₖ, ℓₖ₊₁)` in the trace that drop by more than the tolerance.
    pub fn ascent_violations(&self) -> Vec<(usize, f64, f64)> {
        self.loglik_trace
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] < w[0] - MONOTONE_TOL * w[0].abs())
            .map(|(k, w)| (k, w[0], w[1]))
            .collect()
    }
}

/// Gaussian innovation log-likelihood at the assigned modes,
/// `Σ_t log N(y(t); C_c x⁻_c + C_a x⁻_a, S_t)`, recomputed from `params`
/// and the filter's priors.
pub fn observed_loglik(
    params: &ModelParams,
    assignment: &ModeAssignment,
    filter: &FilterResult,
    data: &Trajectory,
) -> Result<f64> {
    let mut total = 0.0;
    for t in 0..data.len() {
        let (cc, ca) = (&params.c_c[assignment.s_c_hat[t]], &params.c_a[assignment.s_a_hat[t]]);
        let e = &data.y[t] - cc * &filter.x_c_prior[t] - ca * &filter.x_a_prior[t];
        let s = cc * &filter.p_c_prior[t] * cc.transpose() + ca * &filter.p_a_prior[t] * ca.transpose() + &params.sigma_m;
        let (chol, _) = cholesky_regularized(&s, SINGULAR_JITTER).ok_or_else(|| Error::divergence(t + 1, "innovation covariance cannot be factored"))?;
        let v = gaussian_logpdf(&e, &chol);
        if !v.is_finite() {
            return Err(Error::divergence(t + 1, "log-likelihood term is not finite"));
        }
        total += v;
    }
    Ok(total)
}

fn sample_variance(y: &[Vector]) -> f64 {
    let n = y.len() as f64;
    let ny = y[0].len();
    let mean = y.iter().fold(Vector::zeros(ny), |acc, v| acc + v) / n;
    let var: f64 = y.iter().map(|v| (v - &mean).norm_squared()).sum::<f64>() / n;
    var / ny as f64
}

/// Causal embedding `[y(t-1); y(t-2); …]` and anticausal `[y(t+1); …]`,
/// truncated to the state dimensions, zero outside the record.
fn lag_embedding(y: &[Vector], t: usize, n: usize, forward: bool) -> Vector {
    let ny = y[0].len();
    Vector::from_fn(n, |i, _| {
        let lag = i / ny + 1;
        let idx = if forward { t.checked_sub(lag) } else { Some(t + lag).filter(|&s| s < y.len()) };
        idx.map_or(0.0, |s| y[s][i % ny])
    })
}

/// Least-squares fit of `y(t)` on lagged and leading outputs, giving base
/// output matrices of the right shapes.
fn lagged_output_fit(y: &[Vector], dims: &Dims) -> Result<(Mat, Mat)> {
    let d = dims.n_xc + dims.n_xa;
    let mut gram = Mat::identity(d, d) * RIDGE;
    let mut rhs = Mat::zeros(d, dims.n_y);
    for t in 0..y.len() {
        let z = Vector::from_iterator(
            d,
            lag_embedding(y, t, dims.n_xc, true)
                .iter()
                .chain(lag_embedding(y, t, dims.n_xa, false).iter())
                .copied(),
        );
        gram += &z * z.transpose();
        rhs += &z * y[t].transpose();
    }
    let chol = nalgebra::Cholesky::new(gram).ok_or_else(|| Error::RankDeficient {
        block: "initial output regression".into(),
    })?;
    let w = chol.solve(&rhs).transpose();
    Ok((w.columns(0, dims.n_xc).into_owned(), w.columns(dims.n_xc, dims.n_xa).into_owned()))
}

/// Starting parameters for restart `restart`.
///
/// Random perturbation: `A = 0.5 I + U(-0.2, 0.2)`, `C` = lagged-output fit
/// plus `U(-0.5, 0.5)` per entry and mode. Data-driven: `A(j) = ρ_j I` with
/// `ρ` spread over `[0.3, 0.8]` and `C` = fit plus a fixed `±0.5` pattern.
/// Both set every covariance to the average output variance times `I` and
/// the probabilities to uniform.
pub fn initialize(data: &Trajectory, dims: &Dims, config: &EmConfig, restart: usize) -> Result<ModelParams> {
    let t_len = data.len();
    let min_len = 10 * (dims.n_xc + dims.n_xa);
    if t_len < min_len {
        return Err(Error::Validation(format!(
            "need at least {min_len} samples to initialize, got {t_len}"
        )));
    }
    let scheme = if restart == 0 { config.init_scheme } else { InitScheme::RandomPerturb };
    if scheme == InitScheme::UserSupplied {
        let p = config
            .init_params
            .clone()
            .ok_or_else(|| Error::Config("user-supplied initialization needs init_params".into()))?;
        validate(&p, dims).into_result()?;
        return Ok(p);
    }

    let var = sample_variance(&data.y).max(crate::mstep::COVARIANCE_FLOOR);
    let (base_c, base_a) = lagged_output_fit(&data.y, dims)?;
    let mut rng = rng_stream(config.seed, INIT_STREAM_BASE + restart as u64);
    let spread = |j: usize, m: usize| if m == 1 { 0.5 } else { 0.3 + 0.5 * j as f64 / (m - 1) as f64 };

    let mut dynamics = |n: usize, m: usize| -> Vec<Mat> {
        (0..m)
            .map(|j| match scheme {
                InitScheme::DataDriven => Mat::identity(n, n) * spread(j, m),
                _ => Mat::identity(n, n) * 0.5 + Mat::from_fn(n, n, |_, _| rng.random_range(-0.2..0.2)),
            })
            .collect()
    };
    let a_c = dynamics(dims.n_xc, dims.m_c);
    let a_a = dynamics(dims.n_xa, dims.m_a);

    let mut outputs = |base: &Mat, m: usize| -> Vec<Mat> {
        (0..m)
            .map(|_| match scheme {
                InitScheme::DataDriven => base + Mat::from_fn(base.nrows(), base.ncols(), |_, k| if k % 2 == 0 { 0.5 } else { -0.5 }),
                _ => base + Mat::from_fn(base.nrows(), base.ncols(), |_, _| rng.random_range(-0.5..0.5)),
            })
            .collect()
    };
    let c_c = outputs(&base_c, dims.m_c);
    let c_a = outputs(&base_a, dims.m_a);

    Ok(ModelParams {
        a_c,
        a_a,
        c_c,
        c_a,
        sigma_c: vec![Mat::identity(dims.n_xc, dims.n_xc) * var; dims.m_c],
        sigma_a: vec![Mat::identity(dims.n_xa, dims.n_xa) * var; dims.m_a],
        sigma_m: Mat::identity(dims.n_y, dims.n_y) * var,
        pi_c: vec![1.0 / dims.m_c as f64; dims.m_c],
        pi_a: vec![1.0 / dims.m_a as f64; dims.m_a],
    })
}

struct Evaluated {
    params: ModelParams,
    estep: EStep,
    loglik: f64,
}

fn evaluate(params: ModelParams, data: &Trajectory, opts: &EStepOptions) -> Result<Evaluated> {
    let estep = run_estep(&params, data, opts)?;
    let loglik = observed_loglik(&params, &estep.assignment, &estep.filter, data)?;
    Ok(Evaluated { params, estep, loglik })
}

/// Run EM from a fixed starting point.
pub fn run_from(theta0: ModelParams, data: &Trajectory, config: &EmConfig) -> Result<EmReport> {
    config.check()?;
    let opts = config.estep_options();
    let mut current = evaluate(theta0, data, &opts)?;
    let mut trace = vec![current.loglik];
    let mut q_trace = Vec::new();
    let mut rejected = Vec::new();
    let mut last_flags = MStepFlags::default();
    let mut stop = StopReason::MaxIters;
    let mut diagnostics = None;

    for k in 0..config.max_iters {
        let states = (&current.estep.filter).into();
        let (proposal, flags) = m_step(&current.params, &current.estep.assignment, states, data)?;
        last_flags = flags;
        q_trace.push(evaluate_q(&proposal, &current.estep.assignment, &current.estep.filter, data, true)?);

        let floor = current.loglik - MONOTONE_TOL * current.loglik.abs();
        let full = match evaluate(proposal.clone(), data, &opts) {
            Ok(e) => e,
            Err(Error::Divergence { .. }) => Evaluated {
                params: proposal.clone(),
                estep: current.estep.clone(),
                loglik: f64::NEG_INFINITY,
            },
            Err(e) => return Err(e),
        };
        let next = if full.loglik >= floor {
            Some(full)
        } else {
            let mut step = RejectedStep {
                iteration: k + 1,
                loglik_before: current.loglik,
                loglik_full_step: full.loglik,
                accepted_fraction: None,
            };
            let mut found = None;
            let mut best_drop = current.loglik - full.loglik;
            let mut alpha = 0.5;
            for _ in 0..config.max_backtracks {
                if let Ok(e) = evaluate(current.params.interpolate(&proposal, alpha), data, &opts) {
                    best_drop = best_drop.min(current.loglik - e.loglik);
                    if e.loglik >= floor {
                        step.accepted_fraction = Some(alpha);
                        found = Some(e);
                        break;
                    }
                }
                alpha *= 0.5;
            }
            rejected.push(step);
            if found.is_none() {
                if best_drop <= config.tol_loglik * current.loglik.abs() {
                    // flat within the stopping tolerance: stationary point
                    stop = StopReason::Converged;
                } else {
                    stop = StopReason::Divergence;
                    diagnostics = Some(format!(
                        "iteration {}: log-likelihood fell from {} to {} and {} step halvings did not restore ascent",
                        k + 1,
                        current.loglik,
                        full.loglik,
                        config.max_backtracks
                    ));
                    log::warn!("{}", diagnostics.as_deref().unwrap_or_default());
                }
                break;
            }
            found
        };
        let next = next.expect("accepted iterate");
        let delta = next.loglik - current.loglik;
        log::info!("iter {} loglik {:.10e} delta {:.3e}", k + 1, next.loglik, delta);
        trace.push(next.loglik);
        let rel = delta.abs() / current.loglik.abs().max(f64::MIN_POSITIVE);
        current = next;
        if rel < config.tol_loglik {
            stop = StopReason::Converged;
            break;
        }
    }

    Ok(EmReport {
        loglik_trace: trace,
        q_trace,
        final_params: current.params,
        final_assignment: current.estep.assignment,
        final_filter: current.estep.filter,
        stop_reason: stop,
        restart_index_chosen: 0,
        restart_logliks: Vec::new(),
        rejected_steps: rejected,
        last_flags,
        diagnostics,
    })
}

/// Identify parameters from `data` with `config.restarts` independent
/// restarts, returning the one with the highest final log-likelihood.
pub fn run(data: &Trajectory, dims: &Dims, config: &EmConfig) -> Result<EmReport> {
    config.check()?;
    data.check()?;
    if data.n_y() != dims.n_y || data.x_c0.len() != dims.n_xc || data.x_a_end.len() != dims.n_xa {
        return Err(Error::Dimension(format!("data does not match dims {dims}")));
    }
    if data.y.iter().any(|v| !is_finite_vec(v)) {
        return Err(Error::Validation("observations contain non-finite values".into()));
    }
    let outcomes: Vec<Result<EmReport>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let theta0 = initialize(data, dims, config, r)?;
            run_from(theta0, data, config)
        })
        .collect();

    let restart_logliks: Vec<Option<f64>> = outcomes
        .iter()
        .map(|o| o.as_ref().ok().and_then(|r| r.loglik_trace.last().copied()))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (r, ll) in restart_logliks.iter().enumerate() {
        if let Some(ll) = *ll {
            if best.is_none_or(|(_, b)| ll > b) {
                best = Some((r, ll));
            }
        }
    }
    let Some((chosen, _)) = best else {
        // every restart failed; surface the first error
        return Err(outcomes.into_iter().find_map(|o| o.err()).expect("at least one restart"));
    };
    for (r, o) in outcomes.iter().enumerate() {
        if let Err(e) = o {
            log::warn!("restart {r} failed: {e}");
        }
    }
    let mut report = outcomes.into_iter().nth(chosen).expect("chosen restart").expect("successful restart");
    report.restart_index_chosen = chosen;
    report.restart_logliks = restart_logliks;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::simulate::{draw_switching, simulate};

    fn single_mode() -> ModelParams {
        let m = |r: usize, c: usize, v: &[f64]| Mat::from_row_slice(r, c, v);
        ModelParams {
            a_c: vec![m(1, 1, &[0.8])],
            a_a: vec![m(1, 1, &[0.5])],
            c_c: vec![m(1, 1, &[1.0])],
            c_a: vec![m(1, 1, &[0.6])],
            sigma_c: vec![m(1, 1, &[1.0])],
            sigma_a: vec![m(1, 1, &[0.5])],
            sigma_m: m(1, 1, &[0.2]),
            pi_c: vec![1.0],
            pi_a: vec![1.0],
        }
    }

    fn data(p: &ModelParams, t: usize, seed: u64) -> Trajectory {
        let d = p.dims();
        let seq = draw_switching(p, t, seed);
        simulate(p, &seq, &Vector::zeros(d.n_xc), &Vector::zeros(d.n_xa), seed).unwrap()
    }

    fn quick(seed: u64) -> EmConfig {
        EmConfig {
            max_iters: 15,
            restarts: 2,
            seed,
            ..EmConfig::default()
        }
    }

    #[test]
    fn zero_innovation_loglik_is_normalizer() {
        let mut p = single_mode();
        p.sigma_m = Mat::identity(1, 1);
        let t_len = 4;
        let traj = Trajectory::observed(vec![Vector::zeros(1); t_len], Vector::zeros(1), Vector::zeros(1));
        let mut f = crate::estep::filter_sweep(&p, &crate::estep::bootstrap_assignment(&p, t_len), &traj, None, 0.0).unwrap();
        for t in 0..t_len {
            f.p_c_prior[t] = Mat::zeros(1, 1);
            f.p_a_prior[t] = Mat::zeros(1, 1);
        }
        let a = crate::estep::bootstrap_assignment(&p, t_len);
        let ll = observed_loglik(&p, &a, &f, &traj).unwrap();
        let want = -(t_len as f64) / 2.0 * (2.0 * std::f64::consts::PI).ln();
        assert!((ll - want).abs() < 1e-12);
    }

    #[test]
    fn two_point_loglik_by_hand() {
        let p = single_mode();
        let traj = Trajectory::observed(
            vec![Vector::from_vec(vec![1.0]), Vector::from_vec(vec![-0.5])],
            Vector::from_vec(vec![0.5]),
            Vector::from_vec(vec![1.0]),
        );
        let a = crate::estep::bootstrap_assignment(&p, 2);
        let f = crate::estep::filter_sweep(&p, &a, &traj, None, 2.0).unwrap();
        let ll = observed_loglik(&p, &a, &f, &traj).unwrap();
        let mut want = 0.0;
        for t in 0..2 {
            let e = traj.y[t][0] - f.x_c_prior[t][0] - 0.6 * f.x_a_prior[t][0];
            let s = f.p_c_prior[t][(0, 0)] + 0.36 * f.p_a_prior[t][(0, 0)] + 0.2;
            want += -0.5 * ((2.0 * std::f64::consts::PI * s).ln() + e * e / s);
        }
        assert!((ll - want).abs() < 1e-12, "{ll} vs {want}");
    }

    #[test]
    fn loglik_depends_on_measurement_noise() {
        let p = single_mode();
        let traj = data(&p, 200, 1);
        let e = run_estep(&p, &traj, &EStepOptions::default()).unwrap();
        let base = observed_loglik(&p, &e.assignment, &e.filter, &traj).unwrap();
        let mut q = p.clone();
        q.sigma_m *= 2.0;
        assert_ne!(base, observed_loglik(&q, &e.assignment, &e.filter, &traj).unwrap());
    }

    #[test]
    fn initialization_needs_enough_samples() {
        let p = single_mode();
        let traj = data(&p, 19, 1);
        assert!(initialize(&traj, &p.dims(), &EmConfig::default(), 0).is_err());
        assert!(initialize(&data(&p, 20, 1), &p.dims(), &EmConfig::default(), 0).is_ok());
    }

    #[test]
    fn initialization_is_deterministic_and_uniform() {
        let p = ModelParams::example1();
        let mut stable = p.clone();
        stable.a_c[0] *= 0.8;
        stable.a_a[0] *= 0.9;
        let traj = data(&stable, 300, 2);
        let cfg = EmConfig { seed: 9, ..EmConfig::default() };
        let a = initialize(&traj, &p.dims(), &cfg, 1).unwrap();
        let b = initialize(&traj, &p.dims(), &cfg, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, initialize(&traj, &p.dims(), &cfg, 2).unwrap());
        assert_eq!(a.pi_c, vec![0.5, 0.5]);
        let one = initialize(&data(&single_mode(), 300, 2), &single_mode().dims(), &cfg, 0).unwrap();
        assert_eq!(one.pi_c, vec![1.0]);
    }

    #[test]
    fn data_driven_noise_scale_matches_white_output() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rng_stream(4, 0);
        let y: Vec<Vector> = (0..10_000).map(|_| Vector::from_vec(vec![StandardNormal.sample(&mut rng)])).collect();
        let traj = Trajectory::observed(y, Vector::zeros(2), Vector::zeros(2));
        let cfg = EmConfig {
            init_scheme: InitScheme::DataDriven,
            ..EmConfig::default()
        };
        let p = initialize(&traj, &Dims::new(1, 2, 2, 2, 2), &cfg, 0).unwrap();
        assert!((0.8..=1.2).contains(&p.sigma_m[(0, 0)]));
    }

    #[test]
    fn single_iteration_gives_two_trace_entries() {
        let p = single_mode();
        let traj = data(&p, 300, 3);
        let cfg = EmConfig {
            max_iters: 1,
            restarts: 1,
            ..EmConfig::default()
        };
        let r = run(&traj, &p.dims(), &cfg).unwrap();
        assert_eq!(r.q_trace.len(), 1);
        assert!(r.loglik_trace.len() == 2 || r.stop_reason != StopReason::MaxIters);
        assert_eq!(r.loglik_trace.len(), 2);
    }

    #[test]
    fn runs_are_deterministic() {
        let p = single_mode();
        let traj = data(&p, 300, 5);
        let a = run(&traj, &p.dims(), &quick(7)).unwrap();
        let b = run(&traj, &p.dims(), &quick(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn accepted_trace_never_descends() {
        let mut p = ModelParams::example1();
        p.a_c[0] *= 0.8;
        p.a_a[0] *= 0.9;
        let traj = data(&p, 400, 11);
        let r = run(&traj, &p.dims(), &quick(3)).unwrap();
        if r.stop_reason != StopReason::Divergence {
            assert!(r.ascent_violations().is_empty(), "{:?}", r.loglik_trace);
        }
        assert!(r.restart_logliks.len() == 2);
    }

    #[test]
    fn user_supplied_start_is_used_verbatim() {
        let p = single_mode();
        let traj = data(&p, 300, 5);
        let cfg = EmConfig {
            init_scheme: InitScheme::UserSupplied,
            init_params: Some(p.clone()),
            ..EmConfig::default()
        };
        assert_eq!(initialize(&traj, &p.dims(), &cfg, 0).unwrap(), p);
        let missing = EmConfig {
            init_scheme: InitScheme::UserSupplied,
            ..EmConfig::default()
        };
        assert!(missing.check().is_err());
    }

    #[test]
    fn relabelled_start_gives_relabelled_result() {
        let mut p = ModelParams::example1();
        p.a_c[0] *= 0.8;
        p.a_a[0] *= 0.9;
        let traj = data(&p, 300, 8);
        let cfg = |theta0: ModelParams| EmConfig {
            init_scheme: InitScheme::UserSupplied,
            init_params: Some(theta0),
            restarts: 1,
            max_iters: 10,
            ..EmConfig::default()
        };
        let mut start = initialize(&traj, &p.dims(), &EmConfig::default(), 1).unwrap();
        // distinct probabilities keep the bootstrap assignment label-covariant
        start.pi_c = vec![0.6, 0.4];
        start.pi_a = vec![0.45, 0.55];
        let swapped = start.permute_causal(&[1, 0]).permute_anticausal(&[1, 0]);
        let a = run(&traj, &p.dims(), &cfg(start)).unwrap();
        let b = run(&traj, &p.dims(), &cfg(swapped)).unwrap();
        let d = crate::metrics::param_error(&a.final_params, &b.final_params).unwrap();
        assert!(d.total() <= 1e-6, "{d:?}");
    }
}
