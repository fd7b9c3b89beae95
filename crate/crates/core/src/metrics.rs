//! Evaluation: mode match rates, relative state errors, parameter errors
//! under the best label permutation, and the parameter-error rate experiment.

use itertools::Itertools;
use rayon::prelude::*;

use crate::em::{self, EmConfig};
use crate::estep::ModeAssignment;
use crate::linalg::{inf_norm, Mat, Vector};
use crate::model::{Dims, ModelParams};
use crate::mstep::{m_step, States};
use crate::simulate::{draw_switching, simulate, Trajectory};
use crate::{Error, Result};

/// Largest supported mode count for exhaustive permutation search.
pub const MAX_MODES: usize = 5;

fn permutations(m: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..m).permutations(m)
}

/// Fraction of time steps where `est`, relabelled by the best permutation,
/// equals `truth`. Labels are 0-based and below `n_modes`.
pub fn match_rate(truth: &[usize], est: &[usize], n_modes: usize) -> Result<f64> {
    if truth.len() != est.len() {
        return Err(Error::Dimension(format!(
            "sequence lengths differ: {} vs {}",
            truth.len(),
            est.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Validation("match rate of an empty sequence".into()));
    }
    if n_modes == 0 || n_modes > MAX_MODES {
        return Err(Error::Validation(format!("n_modes must be in 1..={MAX_MODES}")));
    }
    if let Some(&bad) = truth.iter().chain(est).find(|&&s| s >= n_modes) {
        return Err(Error::Validation(format!("label {} out of range 1..={n_modes}", bad + 1)));
    }
    // confusion counts make each permutation O(m)
    let mut confusion = vec![vec![0usize; n_modes]; n_modes];
    for (&s, &e) in truth.iter().zip(est) {
        confusion[s][e] += 1;
    }
    let best = permutations(n_modes)
        .map(|perm| (0..n_modes).map(|e| confusion[perm[e]][e]).sum::<usize>())
        .max()
        .unwrap_or(0);
    Ok(best as f64 / truth.len() as f64)
}

/// `‖x − x̂‖² / ‖x‖²` over the whole stacked sequence.
pub fn rel_state_error(x_true: &[Vector], x_hat: &[Vector]) -> Result<f64> {
    if x_true.len() != x_hat.len() || x_true.iter().zip(x_hat).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::Dimension("state sequences differ in shape".into()));
    }
    let den: f64 = x_true.iter().map(|v| v.norm_squared()).sum();
    if den == 0.0 {
        return Err(Error::Validation("true state sequence has zero norm".into()));
    }
    let num: f64 = x_true.iter().zip(x_hat).map(|(a, b)| (a - b).norm_squared()).sum();
    Ok(num / den)
}

/// Per-matrix max-row-sum errors under the label permutation minimizing
/// their total.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamError {
    /// `perm_c[j]` is the estimated mode matched to true mode `j`.
    pub perm_c: Vec<usize>,
    pub perm_a: Vec<usize>,
    pub a_c: Vec<f64>,
    pub a_a: Vec<f64>,
    pub c_c: Vec<f64>,
    pub c_a: Vec<f64>,
    pub sigma_c: Vec<f64>,
    pub sigma_a: Vec<f64>,
    pub sigma_m: f64,
    pub pi_c: f64,
    pub pi_a: f64,
}

impl ParamError {
    pub fn total(&self) -> f64 {
        [&self.a_c, &self.a_a, &self.c_c, &self.c_a, &self.sigma_c, &self.sigma_a]
            .iter()
            .flat_map(|v| v.iter())
            .sum::<f64>()
            + self.sigma_m
    }

    /// Largest dynamics error over both sides.
    pub fn max_a(&self) -> f64 {
        self.a_c.iter().chain(&self.a_a).fold(0.0, |m, &v| m.max(v))
    }

    pub fn max_c(&self) -> f64 {
        self.c_c.iter().chain(&self.c_a).fold(0.0, |m, &v| m.max(v))
    }
}

fn list_error(truth: &[Mat], est: &[Mat]) -> Vec<f64> {
    truth.iter().zip(est).map(|(a, b)| inf_norm(&(a - b))).collect()
}

fn pi_error(truth: &[f64], est: &[f64]) -> f64 {
    truth.iter().zip(est).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

pub fn param_error(truth: &ModelParams, est: &ModelParams) -> Result<ParamError> {
    let dims = truth.dims();
    if est.dims() != dims {
        return Err(Error::Dimension(format!("dims {} vs {}", dims, est.dims())));
    }
    if dims.m_c > MAX_MODES || dims.m_a > MAX_MODES {
        return Err(Error::Validation(format!("at most {MAX_MODES} modes per side")));
    }
    // causal and anticausal terms are separable, so each side is minimized alone
    let side = |m: usize, causal: bool| -> Vec<usize> {
        permutations(m)
            .map(|perm| {
                let p = if causal { est.permute_causal(&perm) } else { est.permute_anticausal(&perm) };
                let cost: f64 = if causal {
                    [list_error(&truth.a_c, &p.a_c), list_error(&truth.c_c, &p.c_c), list_error(&truth.sigma_c, &p.sigma_c)]
                        .concat()
                        .iter()
                        .sum()
                } else {
                    [list_error(&truth.a_a, &p.a_a), list_error(&truth.c_a, &p.c_a), list_error(&truth.sigma_a, &p.sigma_a)]
                        .concat()
                        .iter()
                        .sum()
                };
                (perm, cost)
            })
            .fold((Vec::new(), f64::INFINITY), |best, cand| if cand.1 < best.1 { cand } else { best })
            .0
    };
    let perm_c = side(dims.m_c, true);
    let perm_a = side(dims.m_a, false);
    let p = est.permute_causal(&perm_c).permute_anticausal(&perm_a);
    Ok(ParamError {
        a_c: list_error(&truth.a_c, &p.a_c),
        a_a: list_error(&truth.a_a, &p.a_a),
        c_c: list_error(&truth.c_c, &p.c_c),
        c_a: list_error(&truth.c_a, &p.c_a),
        sigma_c: list_error(&truth.sigma_c, &p.sigma_c),
        sigma_a: list_error(&truth.sigma_a, &p.sigma_a),
        sigma_m: inf_norm(&(&truth.sigma_m - &p.sigma_m)),
        pi_c: pi_error(&truth.pi_c, &p.pi_c),
        pi_a: pi_error(&truth.pi_a, &p.pi_a),
        perm_c,
        perm_a,
    })
}

/// `√(log T / T)`.
pub fn rate_bound(t: usize) -> f64 {
    let t = t as f64;
    (t.ln() / t).sqrt()
}

/// Extreme eigenvalues of the per-mode regressor Gram matrix
/// `W = Σ_{t: s(t)=j} x(t∓1) x(t∓1)ᵀ` built from true states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramDiag {
    pub samples: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRun {
    pub t: usize,
    pub seed: u64,
    /// `None` when simulation or identification failed.
    pub errors: Option<ParamError>,
    pub failure: Option<String>,
    pub gram_c: Vec<GramDiag>,
    pub gram_a: Vec<GramDiag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateExperiment {
    pub t_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub oracle_mode: bool,
    /// One entry per `(T, seed)`, ordered by `T` then seed.
    pub runs: Vec<RateRun>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

impl RateExperiment {
    pub fn failed_runs(&self) -> impl Iterator<Item = &RateRun> {
        self.runs.iter().filter(|r| r.errors.is_none())
    }

    /// Median over successful seeds of the largest dynamics error, per `T`.
    pub fn median_errors(&self) -> Vec<Option<f64>> {
        self.t_grid
            .iter()
            .map(|&t| {
                median(
                    self.runs
                        .iter()
                        .filter(|r| r.t == t)
                        .filter_map(|r| r.errors.as_ref().map(ParamError::max_a))
                        .collect(),
                )
            })
            .collect()
    }

    /// Median error divided by `√(log T / T)`, per `T`.
    pub fn median_ratios(&self) -> Vec<Option<f64>> {
        self.t_grid
            .iter()
            .zip(self.median_errors())
            .map(|(&t, e)| e.map(|e| e / rate_bound(t)))
            .collect()
    }

    /// `max r / min r` over the grid; `None` if any grid point has no data.
    pub fn ratio_spread(&self) -> Option<f64> {
        let r: Option<Vec<f64>> = self.median_ratios().into_iter().collect();
        let r = r?;
        let max = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = r.iter().cloned().fold(f64::INFINITY, f64::min);
        Some(max / min)
    }

    /// Median error strictly decreases along the grid.
    pub fn median_decreasing(&self) -> bool {
        let m: Option<Vec<f64>> = self.median_errors().into_iter().collect();
        m.is_some_and(|m| m.windows(2).all(|w| w[1] < w[0]))
    }

    /// Fraction of seeds whose error at the largest `T` is below that at the smallest.
    pub fn fraction_improving(&self) -> f64 {
        let (first, last) = (self.t_grid[0], *self.t_grid.last().expect("non-empty grid"));
        let err = |t: usize, s: u64| {
            self.runs
                .iter()
                .find(|r| r.t == t && r.seed == s)
                .and_then(|r| r.errors.as_ref().map(ParamError::max_a))
        };
        let improving = self
            .seeds
            .iter()
            .filter(|&&s| matches!((err(first, s), err(last, s)), (Some(a), Some(b)) if b < a))
            .count();
        improving as f64 / self.seeds.len() as f64
    }

    /// Rows `T, seed, mode, err_Ac, err_Aa, err_Cc, err_Ca, err_Sc, err_Sa,
    /// err_Sm, bound, ratio`; one per mode index, `NaN` where a side has
    /// fewer modes or the run failed.
    pub fn table(&self) -> Vec<RateRow> {
        let mut rows = Vec::new();
        for run in &self.runs {
            let bound = rate_bound(run.t);
            let n = run.errors.as_ref().map_or(1, |e| e.a_c.len().max(e.a_a.len()));
            for j in 0..n {
                let get = |v: &Vec<f64>| v.get(j).copied().unwrap_or(f64::NAN);
                let row = match &run.errors {
                    Some(e) => {
                        let (ac, aa) = (get(&e.a_c), get(&e.a_a));
                        RateRow {
                            t: run.t,
                            seed: run.seed,
                            mode: j + 1,
                            err_ac: ac,
                            err_aa: aa,
                            err_cc: get(&e.c_c),
                            err_ca: get(&e.c_a),
                            err_sc: get(&e.sigma_c),
                            err_sa: get(&e.sigma_a),
                            err_sm: e.sigma_m,
                            bound,
                            ratio: ac.max(aa) / bound,
                        }
                    }
                    None => RateRow::failed(run.t, run.seed, j + 1, bound),
                };
                rows.push(row);
            }
        }
        rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub t: usize,
    pub seed: u64,
    pub mode: usize,
    pub err_ac: f64,
    pub err_aa: f64,
    pub err_cc: f64,
    pub err_ca: f64,
    pub err_sc: f64,
    pub err_sa: f64,
    pub err_sm: f64,
    pub bound: f64,
    pub ratio: f64,
}

impl RateRow {
    fn failed(t: usize, seed: u64, mode: usize, bound: f64) -> Self {
        let nan = f64::NAN;
        RateRow {
            t,
            seed,
            mode,
            err_ac: nan,
            err_aa: nan,
            err_cc: nan,
            err_ca: nan,
            err_sc: nan,
            err_sa: nan,
            err_sm: nan,
            bound,
            ratio: nan,
        }
    }
}

fn gram_diagnostics(x: &[Vector], boundary: &Vector, labels: &[usize], m: usize, forward: bool) -> Vec<GramDiag> {
    let t_len = x.len();
    let n = boundary.len();
    (0..m)
        .map(|j| {
            let mut w = Mat::zeros(n, n);
            let mut samples = 0;
            for t in (0..t_len).filter(|&t| labels[t] == j) {
                let r = if forward {
                    if t == 0 { boundary } else { &x[t - 1] }
                } else if t + 1 == t_len {
                    boundary
                } else {
                    &x[t + 1]
                };
                w += r * r.transpose();
                samples += 1;
            }
            let eig = nalgebra::SymmetricEigen::new(w).eigenvalues;
            GramDiag {
                samples,
                lambda_min: eig.min(),
                lambda_max: eig.max(),
            }
        })
        .collect()
}

/// Oracle identification: the switching least-squares M-step fed the true
/// sequences and true states.
pub fn oracle_estimate(truth: &ModelParams, traj: &Trajectory) -> Result<ModelParams> {
    let (Some(seq), Some(x_c), Some(x_a)) = (&traj.seq_true, &traj.x_c_true, &traj.x_a_true) else {
        return Err(Error::Validation("oracle estimate needs true sequences and states".into()));
    };
    let dims = truth.dims();
    let assignment = ModeAssignment::from_sequences(seq.s_c.clone(), seq.s_a.clone(), dims.m_c, dims.m_a);
    let (est, _) = m_step(truth, &assignment, States { x_c, x_a }, traj)?;
    Ok(est)
}

fn rate_run(truth: &ModelParams, dims: &Dims, t: usize, seed: u64, oracle_mode: bool, config: &EmConfig) -> RateRun {
    let mut run = RateRun {
        t,
        seed,
        errors: None,
        failure: None,
        gram_c: Vec::new(),
        gram_a: Vec::new(),
    };
    let seq = draw_switching(truth, t, seed);
    let traj = match simulate(truth, &seq, &Vector::zeros(dims.n_xc), &Vector::zeros(dims.n_xa), seed) {
        Ok(traj) => traj,
        Err(e) => {
            run.failure = Some(format!("simulation: {e}"));
            return run;
        }
    };
    let (x_c, x_a) = (traj.x_c_true.as_ref().expect("simulated"), traj.x_a_true.as_ref().expect("simulated"));
    run.gram_c = gram_diagnostics(x_c, &traj.x_c0, &seq.s_c, dims.m_c, true);
    run.gram_a = gram_diagnostics(x_a, &traj.x_a_end, &seq.s_a, dims.m_a, false);
    let est = if oracle_mode {
        oracle_estimate(truth, &traj)
    } else {
        let cfg = EmConfig { seed, ..config.clone() };
        em::run(&traj, dims, &cfg).map(|r| r.final_params)
    };
    match est.and_then(|e| param_error(truth, &e)) {
        Ok(e) => run.errors = Some(e),
        Err(e) => run.failure = Some(format!("identification: {e}")),
    }
    if let Some(f) = &run.failure {
        log::warn!("rate run T={t} seed={seed} failed: {f}");
    }
    run
}

/// Simulate and identify at every `(T, seed)` pair, concurrently.
/// `config` is used only when `oracle_mode` is false; its seed is replaced
/// by the run seed.
pub fn rate_experiment(
    truth: &ModelParams,
    t_grid: &[usize],
    seeds: &[u64],
    oracle_mode: bool,
    config: &EmConfig,
) -> Result<RateExperiment> {
    if t_grid.len() < 3 {
        return Err(Error::Validation("rate experiment needs at least 3 sample sizes".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("sample sizes must be strictly increasing".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Validation("rate experiment needs at least one seed".into()));
    }
    let dims = truth.dims();
    let pairs: Vec<(usize, u64)> = t_grid.iter().flat_map(|&t| seeds.iter().map(move |&s| (t, s))).collect();
    let runs = pairs
        .par_iter()
        .map(|&(t, s)| rate_run(truth, &dims, t, s, oracle_mode, config))
        .collect();
    Ok(RateExperiment {
        t_grid: t_grid.to_vec(),
        seeds: seeds.to_vec(),
        oracle_mode,
        runs,
    })
}
