macro_rules! example {
    ($module:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(simulate_trajectory, "simulate_trajectory.rs");
example!(identify_parameters, "identify_parameters.rs");
example!(smooth_states, "smooth_states.rs");
example!(oracle_rate, "oracle_rate.rs");
example!(check_oracles, "check_oracles.rs");
example!(file_formats, "file_formats.rs");
example!(acceptance_report, "acceptance_report.rs");

#[test]
fn simulate_trajectory_runs() {
    simulate_trajectory::run_example().expect("simulate example should run");
}

#[test]
fn identify_parameters_runs() {
    identify_parameters::run_example().expect("identify example should run");
}

#[test]
fn smooth_states_runs() {
    smooth_states::run_example().expect("smooth example should run");
}

#[test]
fn oracle_rate_runs() {
    oracle_rate::run_example().expect("rate example should run");
}

#[test]
fn check_oracles_runs() {
    check_oracles::run_example().expect("oracle example should run");
}

#[test]
fn file_formats_runs() {
    file_formats::run_example().expect("format example should run");
}

#[test]
fn acceptance_report_runs() {
    acceptance_report::run_example().expect("acceptance example should run");
}
