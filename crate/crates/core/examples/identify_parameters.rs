// Run hard EM with several restarts on simulated data and compare the
// estimate with the generating model.

use std::error::Error;

use ncrsm::em::{self, EmConfig};
use ncrsm::linalg::{Mat, Vector};
use ncrsm::metrics::param_error;
use ncrsm::simulate::{draw_switching, simulate};
use ncrsm::ModelParams;

fn scalar_model() -> ModelParams {
    let s = |v: f64| Mat::from_element(1, 1, v);
    ModelParams {
        a_c: vec![s(0.9), s(-0.5)],
        a_a: vec![s(0.7), s(-0.3)],
        c_c: vec![s(1.0), s(0.5)],
        c_a: vec![s(0.8), s(1.2)],
        sigma_c: vec![s(0.5), s(0.5)],
        sigma_a: vec![s(0.5), s(0.5)],
        sigma_m: s(0.1),
        pi_c: vec![0.6, 0.4],
        pi_a: vec![0.5, 0.5],
    }
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let truth = scalar_model();
    let seq = draw_switching(&truth, 800, 11);
    let data = simulate(&truth, &seq, &Vector::zeros(1), &Vector::zeros(1), 11)?;
    let config = EmConfig {
        max_iters: 30,
        restarts: 3,
        seed: 11,
        ..EmConfig::default()
    };
    let report = em::run(&data, &truth.dims(), &config)?;
    println!(
        "stop: {} after {} iterations, restart {} chosen",
        report.stop_reason,
        report.iterations(),
        report.restart_index_chosen
    );
    println!("log-likelihood trace: {:?}", report.loglik_trace);
    for step in &report.rejected_steps {
        println!(
            "  iteration {}: full step {:.2} -> {:.2}, accepted fraction {:?}",
            step.iteration, step.loglik_before, step.loglik_full_step, step.accepted_fraction
        );
    }
    let err = param_error(&truth, &report.final_params)?;
    println!("parameter error: max A {:.3}, max C {:.3}, Sigma_m {:.3}", err.max_a(), err.max_c(), err.sigma_m);
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    env_logger::init();
    run_example()
}
