// Compare the M-step and the bidirectional filter with brute-force
// reference implementations on random instances.

use std::error::Error;

use ncrsm::acceptance::{kf_oracle_gap, ls_oracle_gap, A10_TOL, A9_TOL};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut ls_worst = 0.0_f64;
    let mut kf_worst = 0.0_f64;
    for seed in 0..5 {
        ls_worst = ls_worst.max(ls_oracle_gap(seed)?);
        kf_worst = kf_worst.max(kf_oracle_gap(seed)?);
    }
    println!("switching least squares vs dense solve: {ls_worst:.2e} (tolerance {A9_TOL:.0e})");
    println!("bidirectional filter vs textbook filters: {kf_worst:.2e} (tolerance {A10_TOL:.0e})");
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
