// Run a suite of acceptance checks and print one line per criterion.
// Pass a suite name (`all`, `fast`, `example1`, or an id such as `A9`).

use std::error::Error;

use ncrsm::acceptance::Runner;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    report("A9", 1)
}

fn report(suite: &str, seed: u64) -> Result<(), Box<dyn Error>> {
    let runner = Runner::new(seed);
    for outcome in runner.run_suite(suite)? {
        println!("{outcome}");
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    let suite = std::env::args().nth(1).unwrap_or_else(|| "fast".into());
    report(&suite, 1)
}
