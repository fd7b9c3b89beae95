//! One line per acceptance criterion; exits non-zero if any fails.
//! `NCRSM_SEED` selects the seed (default 1).

use std::process::ExitCode;

use ncrsm::acceptance::{Runner, ALL};

fn main() -> ExitCode {
    let seed = std::env::var("NCRSM_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(1);
    let runner = Runner::new(seed);
    let mut failed = Vec::new();
    for id in ALL {
        match runner.run(id) {
            Ok(outcome) => {
                println!("{outcome}");
                if !outcome.passed {
                    failed.push(id);
                }
            }
            Err(e) => {
                println!("{id:<4} FAIL {e}");
                failed.push(id);
            }
        }
    }
    println!("acceptance: {} passed, {} failed {:?}", ALL.len() - failed.len(), failed.len(), failed);
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
