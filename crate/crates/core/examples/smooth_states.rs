// Estimate modes and states under known parameters and score them
// against the simulated truth.

use std::error::Error;

use ncrsm::estep::{run_estep, EStepOptions};
use ncrsm::linalg::{Mat, Vector};
use ncrsm::metrics::{match_rate, rel_state_error};
use ncrsm::simulate::{draw_switching, simulate};
use ncrsm::ModelParams;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let s = |v: f64| Mat::from_element(1, 1, v);
    // opposite-sign dynamics make the causal modes easy to tell apart
    let params = ModelParams {
        a_c: vec![s(0.95), s(-0.95)],
        a_a: vec![s(0.5), s(0.5)],
        c_c: vec![s(1.0), s(1.0)],
        c_a: vec![s(0.2), s(0.2)],
        sigma_c: vec![s(0.1), s(0.1)],
        sigma_a: vec![s(0.1), s(0.1)],
        sigma_m: s(0.01),
        pi_c: vec![0.5, 0.5],
        pi_a: vec![0.5, 0.5],
    };
    let seq = draw_switching(&params, 1000, 5);
    let data = simulate(&params, &seq, &Vector::zeros(1), &Vector::zeros(1), 5)?;
    for sweeps in [1, 2, 4] {
        let opts = EStepOptions {
            inner_sweeps: sweeps,
            ..EStepOptions::default()
        };
        let e = run_estep(&params, &data, &opts)?;
        println!(
            "{sweeps} sweep(s): causal match {:.3}, causal state error {:.3}, anticausal state error {:.3}",
            match_rate(&seq.s_c, &e.assignment.s_c_hat, 2)?,
            rel_state_error(data.x_c_true.as_ref().unwrap(), &e.filter.x_c_hat)?,
            rel_state_error(data.x_a_true.as_ref().unwrap(), &e.filter.x_a_hat)?,
        );
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
