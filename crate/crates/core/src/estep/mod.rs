//! E-step: hard mode assignment and the bidirectional Kalman filter.
//!
//! Each E-step is a deterministic function of the parameters:
//!
//! 1. bootstrap with every step assigned to the most probable mode pair and
//!    run one sweep with a zero causal prior;
//! 2. `inner_sweeps` times: build the per-time mode tables from the latest
//!    sweep, take the joint argmax, and sweep again reusing the latest causal
//!    priors in the backward pass.
//!
//! Mode tables at time `t` use mode-specific one-step predictions
//! `A_c(j) x̂_c(t-1)` and `A_a(l) x̂_a(t+1)` from the latest sweep, so `y(t)`
//! itself never enters its own prediction, and the shared innovation
//! covariance of that sweep.

mod filter;
mod gains;
mod modes;
mod q;

pub use filter::{filter_sweep, FilterResult, DEFAULT_INITIAL_COV};
pub use gains::{kalman_gains, posterior_covariance, Gains};
pub use modes::{assign_modes, mode_loglik_table, ModeAssignment, ModeTable};
pub use q::{evaluate_q, QValue};

use rayon::prelude::*;

use crate::linalg::Vector;
use crate::model::ModelParams;
use crate::simulate::Trajectory;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EStepOptions {
    /// Number of assign-then-sweep rounds after the bootstrap sweep.
    pub inner_sweeps: usize,
    pub initial_cov: f64,
}

impl Default for EStepOptions {
    fn default() -> Self {
        EStepOptions {
            inner_sweeps: 1,
            initial_cov: DEFAULT_INITIAL_COV,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EStep {
    pub assignment: ModeAssignment,
    pub filter: FilterResult,
}

fn argmax_lowest(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Every step assigned to the most probable causal and anticausal modes.
pub fn bootstrap_assignment(params: &ModelParams, t_len: usize) -> ModeAssignment {
    ModeAssignment::from_sequences(
        vec![argmax_lowest(&params.pi_c); t_len],
        vec![argmax_lowest(&params.pi_a); t_len],
        params.a_c.len(),
        params.a_a.len(),
    )
}

/// Per-time mode tables built from the predictions of `filter`.
pub fn tables_from_filter(params: &ModelParams, data: &Trajectory, filter: &FilterResult) -> Result<Vec<ModeTable>> {
    let t_len = data.len();
    (0..t_len)
        .into_par_iter()
        .map(|t| {
            let prev: &Vector = if t == 0 { &data.x_c0 } else { &filter.x_c_hat[t - 1] };
            let next: &Vector = if t + 1 == t_len { &data.x_a_end } else { &filter.x_a_hat[t + 1] };
            let x_c_prior: Vec<Vector> = params.a_c.iter().map(|a| a * prev).collect();
            let x_a_prior: Vec<Vector> = params.a_a.iter().map(|a| a * next).collect();
            mode_loglik_table(params, &data.y[t], &x_c_prior, &x_a_prior, &filter.innovation_cov[t])
        })
        .collect()
}

pub fn run_estep(params: &ModelParams, data: &Trajectory, opts: &EStepOptions) -> Result<EStep> {
    if data.is_empty() {
        return Err(Error::Validation("no observations".into()));
    }
    let boot = bootstrap_assignment(params, data.len());
    let mut filter = filter_sweep(params, &boot, data, None, opts.initial_cov)?;
    let mut assignment = boot;
    for _ in 0..opts.inner_sweeps.max(1) {
        let tables: Vec<_> = tables_from_filter(params, data, &filter)?
            .into_iter()
            .map(|t| t.table)
            .collect();
        assignment = assign_modes(&tables);
        filter = filter_sweep(params, &assignment, data, Some(&filter), opts.initial_cov)?;
    }
    Ok(EStep { assignment, filter })
}
