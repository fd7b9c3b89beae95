// Draw a trajectory from a two-mode scalar model, then show why the
// two-dimensional academic system cannot be simulated for long.

use std::error::Error;

use ncrsm::linalg::{Mat, Vector};
use ncrsm::model::spectral_stability_hint;
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
    let params = scalar_model();
    let seq = draw_switching(&params, 1000, 3);
    let traj = simulate(&params, &seq, &Vector::zeros(1), &Vector::zeros(1), 3)?;
    let share = seq.s_c.iter().filter(|&&s| s == 0).count() as f64 / seq.len() as f64;
    let mean_sq = |x: &[Vector]| x.iter().map(|v| v.norm_squared()).sum::<f64>() / x.len() as f64;
    println!("scalar model: T = {}, causal mode 1 share {share:.3}", traj.len());
    println!(
        "  mean squared states: causal {:.3}, anticausal {:.3}",
        mean_sq(traj.x_c_true.as_ref().unwrap()),
        mean_sq(traj.x_a_true.as_ref().unwrap())
    );

    let example1 = ModelParams::example1();
    let hint = spectral_stability_hint(&example1);
    println!(
        "example 1 spectral radii: causal {:?}, anticausal {:?}",
        hint.causal, hint.anticausal
    );
    let seq = draw_switching(&example1, 10_000, 1);
    match simulate(&example1, &seq, &Vector::zeros(2), &Vector::zeros(2), 1) {
        Ok(_) => println!("example 1: simulated 10000 steps"),
        Err(e) => println!("example 1: {e} (exit code {})", e.exit_code()),
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
