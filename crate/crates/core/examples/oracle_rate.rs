// Oracle rate experiment: least squares on true modes and states, with the
// error tracked against sqrt(ln T / T).

use std::error::Error;

use ncrsm::em::EmConfig;
use ncrsm::linalg::Mat;
use ncrsm::metrics::{rate_bound, rate_experiment};
use ncrsm::ModelParams;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let s = |v: f64| Mat::from_element(1, 1, v);
    let truth = ModelParams {
        a_c: vec![s(0.9), s(-0.5)],
        a_a: vec![s(0.7), s(-0.3)],
        c_c: vec![s(1.0), s(0.5)],
        c_a: vec![s(0.8), s(1.2)],
        sigma_c: vec![s(0.5), s(0.5)],
        sigma_a: vec![s(0.5), s(0.5)],
        sigma_m: s(0.1),
        pi_c: vec![0.6, 0.4],
        pi_a: vec![0.5, 0.5],
    };
    let grid = [250, 1000, 4000];
    let seeds: Vec<u64> = (0..6).collect();
    let exp = rate_experiment(&truth, &grid, &seeds, true, &EmConfig::default())?;
    println!("{:>6} {:>12} {:>12} {:>8}", "T", "median err", "bound", "ratio");
    for ((t, err), ratio) in grid.iter().zip(exp.median_errors()).zip(exp.median_ratios()) {
        println!(
            "{t:>6} {:>12.5} {:>12.5} {:>8.3}",
            err.unwrap_or(f64::NAN),
            rate_bound(*t),
            ratio.unwrap_or(f64::NAN)
        );
    }
    println!("median error decreasing: {}", exp.median_decreasing());
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
