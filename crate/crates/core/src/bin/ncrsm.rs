use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use ncrsm::acceptance::Runner;
use ncrsm::em::{self, StopReason};
use ncrsm::estep::{run_estep, EStepOptions, DEFAULT_INITIAL_COV};
use ncrsm::io::{self, IdentifyConfig, MetricRow, RunManifest, SimulateConfig};
use ncrsm::metrics::{match_rate, param_error, rel_state_error};
use ncrsm::simulate::{draw_switching, simulate_with, SimOptions, DEFAULT_STATE_NORM_CAP};
use ncrsm::{Error, Result};

const SEED_VAR: &str = "NCRSM_SEED";

#[derive(Parser)]
#[command(name = "ncrsm", version, about = "Non-causal switching state-space identification")]
struct Cli {
    /// Worker threads for restarts and per-time work (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a trajectory from a model.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output prefix; writes <out>.csv, <out>.truth.json, <out>.manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate parameters from observed outputs with hard EM.
    Identify {
        #[arg(long)]
        data: PathBuf,
        /// n_y,n_xc,n_xa,m_c,m_a
        #[arg(long)]
        dims: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output prefix; writes <out>.report.json, <out>.params.json, <out>.manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare estimated parameters and E-step output against ground truth.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate modes, states and outputs under a fixed model.
    Smooth {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_INITIAL_COV)]
        initial_cov: f64,
        #[arg(long, default_value_t = 1)]
        inner_sweeps: usize,
    },
    /// Run acceptance criteria: all, fast, example1, or a single id such as A8.
    Benchmark {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate { config, out } => simulate_cmd(&config, &out),
        Command::Identify {
            data,
            dims,
            config,
            out,
        } => identify_cmd(&data, &dims, config.as_deref(), &out),
        Command::Evaluate {
            truth,
            estimate,
            data,
            out,
        } => evaluate_cmd(&truth, &estimate, &data, &out),
        Command::Smooth {
            data,
            model,
            out,
            initial_cov,
            inner_sweeps,
        } => smooth_cmd(&data, &model, &out, initial_cov, inner_sweeps),
        Command::Benchmark { suite, seed } => benchmark_cmd(&suite, env_seed()?.unwrap_or(seed)),
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_VAR) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_VAR}=`{s}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn to_json_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn simulate_cmd(config_path: &Path, out: &Path) -> Result<u8> {
    let start = Instant::now();
    let mut cfg = SimulateConfig::read(config_path)?;
    if let Some(seed) = env_seed()? {
        cfg.seed = seed;
    }
    let params = cfg.resolve_model(base_dir(config_path))?;
    let dims = params.dims();
    let (x_c0, x_a_end) = cfg.boundaries(&dims)?;
    let opts = SimOptions {
        state_norm_cap: cfg.state_norm_cap.unwrap_or(DEFAULT_STATE_NORM_CAP),
    };
    let seq = draw_switching(&params, cfg.samples, cfg.seed);
    let traj = simulate_with(&params, &seq, &x_c0, &x_a_end, cfg.seed, &opts)?;

    let csv_path = io::with_suffix(out, ".csv");
    let truth_path = io::with_suffix(out, ".truth.json");
    let manifest_path = io::with_suffix(out, ".manifest.json");
    let manifest_name = io::file_name(&manifest_path);
    io::write_trajectory(&csv_path, &traj, Some(&manifest_name))?;
    io::write_params(&truth_path, &params, Some(&manifest_name))?;

    let mut manifest = RunManifest::new("simulate", to_json_value(&cfg));
    manifest.seeds.push(cfg.seed);
    manifest.hash_input(config_path)?;
    manifest.outputs = vec![io::file_name(&csv_path), io::file_name(&truth_path)];
    manifest.notes.push(format!("dims {dims}, T={}", cfg.samples));
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&manifest_path)?;
    log::info!("wrote {} samples to {}", cfg.samples, csv_path.display());
    Ok(0)
}

fn identify_cmd(data_path: &Path, dims: &str, config_path: Option<&Path>, out: &Path) -> Result<u8> {
    let start = Instant::now();
    let dims = io::parse_dims(dims)?;
    let mut cfg = match config_path {
        Some(p) => IdentifyConfig::read(p)?,
        None => IdentifyConfig::default(),
    };
    if let Some(seed) = env_seed()? {
        cfg.seed = seed;
    }
    let em_cfg = cfg.to_em_config(config_path.map_or(Path::new("."), base_dir))?;
    let data = io::read_trajectory(data_path, Some(&dims))?;
    let report = em::run(&data, &dims, &em_cfg)?;

    let report_path = io::with_suffix(out, ".report.json");
    let params_path = io::with_suffix(out, ".params.json");
    let manifest_path = io::with_suffix(out, ".manifest.json");
    let manifest_name = io::file_name(&manifest_path);
    fs::write(&report_path, io::report_to_json(&report, Some(&manifest_name))?)?;
    io::write_params(&params_path, &report.final_params, Some(&manifest_name))?;

    let mut manifest = RunManifest::new("identify", to_json_value(&cfg));
    manifest.seeds.push(em_cfg.seed);
    manifest.hash_input(data_path)?;
    if let Some(p) = config_path {
        manifest.hash_input(p)?;
    }
    manifest.outputs = vec![io::file_name(&report_path), io::file_name(&params_path)];
    manifest.stop_reason = Some(report.stop_reason.to_string());
    manifest.notes.push(format!(
        "dims {dims}, restart {} chosen, {} iterations, final loglik {:e}",
        report.restart_index_chosen,
        report.iterations(),
        report.loglik_trace.last().copied().unwrap_or(f64::NAN)
    ));
    if let Some(d) = &report.diagnostics {
        manifest.notes.push(d.clone());
    }
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&manifest_path)?;
    log::info!("stop reason: {}", report.stop_reason);

    if report.stop_reason == StopReason::Divergence {
        eprintln!("error: EM diverged: {}", report.diagnostics.as_deref().unwrap_or("no detail"));
        return Ok(2);
    }
    Ok(0)
}

fn evaluate_cmd(truth_path: &Path, estimate_path: &Path, data_path: &Path, out: &Path) -> Result<u8> {
    let start = Instant::now();
    let truth = io::read_params(truth_path)?.0;
    let estimate = io::read_params(estimate_path)?.0;
    let dims = truth.dims();
    if estimate.dims() != dims {
        return Err(Error::Dimension(format!("estimate has dims {}, truth has {dims}", estimate.dims())));
    }
    let data = io::read_trajectory(data_path, Some(&dims))?;

    let mut rows = Vec::new();
    let err = param_error(&truth, &estimate)?;
    let per_mode = |rows: &mut Vec<MetricRow>, name: &str, v: &[f64]| {
        rows.extend(v.iter().enumerate().map(|(j, &value)| MetricRow {
            metric: name.into(),
            mode: j + 1,
            value,
        }));
    };
    per_mode(&mut rows, "err_A_c", &err.a_c);
    per_mode(&mut rows, "err_A_a", &err.a_a);
    per_mode(&mut rows, "err_C_c", &err.c_c);
    per_mode(&mut rows, "err_C_a", &err.c_a);
    per_mode(&mut rows, "err_Sigma_c", &err.sigma_c);
    per_mode(&mut rows, "err_Sigma_a", &err.sigma_a);
    let scalar = |metric: &str, value: f64| MetricRow {
        metric: metric.into(),
        mode: 0,
        value,
    };
    rows.push(scalar("err_Sigma_m", err.sigma_m));
    rows.push(scalar("err_pi_c", err.pi_c));
    rows.push(scalar("err_pi_a", err.pi_a));

    let estep = run_estep(&estimate, &data, &EStepOptions::default())?;
    let ll = em::observed_loglik(&estimate, &estep.assignment, &estep.filter, &data)?;
    rows.push(scalar("loglik", ll));
    if let Some(seq) = &data.seq_true {
        rows.push(scalar("match_c", match_rate(&seq.s_c, &estep.assignment.s_c_hat, dims.m_c)?));
        rows.push(scalar("match_a", match_rate(&seq.s_a, &estep.assignment.s_a_hat, dims.m_a)?));
    }
    if let Some(x) = &data.x_c_true {
        rows.push(scalar("delta_c", rel_state_error(x, &estep.filter.x_c_hat)?));
    }
    if let Some(x) = &data.x_a_true {
        rows.push(scalar("delta_a", rel_state_error(x, &estep.filter.x_a_hat)?));
    }

    let manifest_path = io::with_suffix(out, ".manifest.json");
    fs::write(out, io::metrics_to_csv(&rows, Some(&io::file_name(&manifest_path))))?;
    let mut manifest = RunManifest::new("evaluate", serde_json::Value::Null);
    manifest.hash_input(truth_path)?;
    manifest.hash_input(estimate_path)?;
    manifest.hash_input(data_path)?;
    manifest.outputs = vec![io::file_name(out)];
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&manifest_path)?;
    for r in &rows {
        println!("{:<12} {:>2} {:.6e}", r.metric, r.mode, r.value);
    }
    Ok(0)
}

fn smooth_cmd(data_path: &Path, model_path: &Path, out: &Path, initial_cov: f64, inner_sweeps: usize) -> Result<u8> {
    let start = Instant::now();
    if !(initial_cov.is_finite() && initial_cov >= 0.0) {
        return Err(Error::Config(format!("initial_cov must be finite and non-negative, got {initial_cov}")));
    }
    let params = io::read_params(model_path)?.0;
    let data = io::read_trajectory(data_path, Some(&params.dims()))?;
    let opts = EStepOptions {
        inner_sweeps,
        initial_cov,
    };
    let estep = run_estep(&params, &data, &opts)?;
    let y_hat = estep.filter.smoothed_output(&params, &estep.assignment);

    let manifest_path = io::with_suffix(out, ".manifest.json");
    let text = io::smoothed_to_csv(
        &y_hat,
        &estep.filter.x_c_hat,
        &estep.filter.x_a_hat,
        &estep.assignment.s_c_hat,
        &estep.assignment.s_a_hat,
        Some(&io::file_name(&manifest_path)),
    );
    fs::write(out, text)?;
    let mut manifest = RunManifest::new(
        "smooth",
        serde_json::json!({ "initial_cov": initial_cov, "inner_sweeps": inner_sweeps }),
    );
    manifest.hash_input(data_path)?;
    manifest.hash_input(model_path)?;
    manifest.outputs = vec![io::file_name(out)];
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(&manifest_path)?;
    Ok(0)
}

fn benchmark_cmd(suite: &str, seed: u64) -> Result<u8> {
    let runner = Runner::new(seed);
    let mut failed = 0;
    for id in ncrsm::acceptance::suite(suite)? {
        let outcome = runner.run(id)?;
        println!("{outcome}");
        failed += usize::from(!outcome.passed);
    }
    Ok(if failed == 0 { 0 } else { 1 })
}
