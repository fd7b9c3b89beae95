//! File formats: parameters and reports as JSON, time series as CSV,
//! configurations as TOML, and run manifests.
//!
//! Mode labels are 1-based in every file and 0-based in memory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::em::{EmConfig, EmReport, InitScheme};
use crate::linalg::{is_finite_mat, Mat, Vector};
use crate::metrics::RateExperiment;
use crate::model::{validate_with, Definiteness, Dims, ModelParams, SwitchingSequence};
use crate::{Error, Result};

/// Dense matrix with explicit shape; `data` is row-major nested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<f64>>,
}

impl From<&Mat> for MatrixJson {
    fn from(m: &Mat) -> Self {
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data: (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect(),
        }
    }
}

impl MatrixJson {
    pub fn to_mat(&self, name: &str) -> Result<Mat> {
        if self.data.len() != self.rows || self.data.iter().any(|r| r.len() != self.cols) {
            return Err(Error::Dimension(format!(
                "{name}: data does not match declared shape {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(Mat::from_fn(self.rows, self.cols, |i, j| self.data[i][j]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsJson {
    pub a_c: Vec<MatrixJson>,
    pub a_a: Vec<MatrixJson>,
    pub c_c: Vec<MatrixJson>,
    pub c_a: Vec<MatrixJson>,
    pub sigma_c: Vec<MatrixJson>,
    pub sigma_a: Vec<MatrixJson>,
    pub sigma_m: MatrixJson,
    pub pi_c: Vec<f64>,
    pub pi_a: Vec<f64>,
    /// File name of the manifest of the run that produced this file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}

fn mats(list: &[Mat]) -> Vec<MatrixJson> {
    list.iter().map(MatrixJson::from).collect()
}

fn unmats(list: &[MatrixJson], name: &str) -> Result<Vec<Mat>> {
    list.iter()
        .enumerate()
        .map(|(i, m)| m.to_mat(&format!("{name}({})", i + 1)))
        .collect()
}

impl ParamsJson {
    pub fn new(p: &ModelParams, manifest: Option<String>) -> Self {
        ParamsJson {
            a_c: mats(&p.a_c),
            a_a: mats(&p.a_a),
            c_c: mats(&p.c_c),
            c_a: mats(&p.c_a),
            sigma_c: mats(&p.sigma_c),
            sigma_a: mats(&p.sigma_a),
            sigma_m: (&p.sigma_m).into(),
            pi_c: p.pi_c.clone(),
            pi_a: p.pi_a.clone(),
            manifest,
        }
    }

    pub fn to_params(&self) -> Result<ModelParams> {
        Ok(ModelParams {
            a_c: unmats(&self.a_c, "a_c")?,
            a_a: unmats(&self.a_a, "a_a")?,
            c_c: unmats(&self.c_c, "c_c")?,
            c_a: unmats(&self.c_a, "c_a")?,
            sigma_c: unmats(&self.sigma_c, "sigma_c")?,
            sigma_a: unmats(&self.sigma_a, "sigma_a")?,
            sigma_m: self.sigma_m.to_mat("sigma_m")?,
            pi_c: self.pi_c.clone(),
            pi_a: self.pi_a.clone(),
        })
    }
}

fn all_finite(p: &ModelParams) -> bool {
    [&p.a_c, &p.a_a, &p.c_c, &p.c_a, &p.sigma_c, &p.sigma_a]
        .iter()
        .all(|l| l.iter().all(is_finite_mat))
        && is_finite_mat(&p.sigma_m)
        && p.pi_c.iter().chain(&p.pi_a).all(|v| v.is_finite())
}

fn json_error(path: &Path, e: serde_json::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        column: e.column() as u64,
        message: e.to_string(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Validation(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn params_to_json(p: &ModelParams, manifest: Option<&str>) -> Result<String> {
    if !all_finite(p) {
        return Err(Error::Validation("parameters contain non-finite values".into()));
    }
    let mut s = serde_json::to_string_pretty(&ParamsJson::new(p, manifest.map(str::to_owned)))
        .map_err(|e| Error::Validation(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Parse parameters and check them for structural validity (covariances may
/// be semi-definite).
pub fn params_from_json(text: &str, path: &Path) -> Result<(ModelParams, Option<String>)> {
    let raw: ParamsJson = serde_json::from_str(text).map_err(|e| json_error(path, e))?;
    let p = raw.to_params()?;
    validate_with(&p, &p.dims(), Definiteness::SemiDefinite).into_result()?;
    Ok((p, raw.manifest))
}

pub fn write_params(path: &Path, p: &ModelParams, manifest: Option<&str>) -> Result<()> {
    fs::write(path, params_to_json(p, manifest)?)?;
    Ok(())
}

pub fn read_params(path: &Path) -> Result<(ModelParams, Option<String>)> {
    params_from_json(&fs::read_to_string(path)?, path)
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_vec(v: &Vector) -> String {
    v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
}

/// Render a trajectory as CSV. Boundary states go in leading `#` comment
/// lines; the manifest reference, if any, in another.
pub fn trajectory_to_csv(traj: &crate::Trajectory, manifest: Option<&str>) -> Result<String> {
    traj.check()?;
    let n_y = traj.n_y();
    let mut out = String::new();
    if let Some(m) = manifest {
        writeln!(out, "# manifest={m}").expect("write to string");
    }
    writeln!(out, "# x_c0={}", fmt_vec(&traj.x_c0)).expect("write to string");
    writeln!(out, "# x_aT1={}", fmt_vec(&traj.x_a_end)).expect("write to string");
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=n_y).map(|i| format!("y_{i}")));
    if let Some(x) = &traj.x_c_true {
        header.extend((1..=x.first().map_or(traj.x_c0.len(), |v| v.len())).map(|i| format!("xc_{i}")));
    }
    if let Some(x) = &traj.x_a_true {
        header.extend((1..=x.first().map_or(traj.x_a_end.len(), |v| v.len())).map(|i| format!("xa_{i}")));
    }
    if traj.seq_true.is_some() {
        header.push("sc".into());
        header.push("sa".into());
    }
    writeln!(out, "{}", header.join(",")).expect("write to string");
    for t in 0..traj.len() {
        let mut row = vec![(t + 1).to_string(), fmt_vec(&traj.y[t])];
        if let Some(x) = &traj.x_c_true {
            row.push(fmt_vec(&x[t]));
        }
        if let Some(x) = &traj.x_a_true {
            row.push(fmt_vec(&x[t]));
        }
        if let Some(s) = &traj.seq_true {
            row.push((s.s_c[t] + 1).to_string());
            row.push((s.s_a[t] + 1).to_string());
        }
        writeln!(out, "{}", row.join(",")).expect("write to string");
    }
    Ok(out)
}

pub fn write_trajectory(path: &Path, traj: &crate::Trajectory, manifest: Option<&str>) -> Result<()> {
    fs::write(path, trajectory_to_csv(traj, manifest)?)?;
    Ok(())
}

struct Columns {
    y: Vec<usize>,
    xc: Vec<usize>,
    xa: Vec<usize>,
    sc: Option<usize>,
    sa: Option<usize>,
}

fn parse_header(header: &csv::StringRecord, path: &Path, line: u64) -> Result<Columns> {
    let err = |column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column: column as u64 + 1,
        message,
    };
    if header.get(0) != Some("t") {
        return Err(err(0, "first column must be `t`".into()));
    }
    let mut cols = Columns {
        y: Vec::new(),
        xc: Vec::new(),
        xa: Vec::new(),
        sc: None,
        sa: None,
    };
    for (i, name) in header.iter().enumerate().skip(1) {
        let indexed = |prefix: &str, list: &mut Vec<usize>| -> Result<bool> {
            match name.strip_prefix(prefix) {
                Some(k) if k.parse::<usize>().ok() == Some(list.len() + 1) => {
                    list.push(i);
                    Ok(true)
                }
                Some(_) => Err(err(i, format!("column `{name}` out of order"))),
                None => Ok(false),
            }
        };
        if indexed("y_", &mut cols.y)? || indexed("xc_", &mut cols.xc)? || indexed("xa_", &mut cols.xa)? {
            continue;
        }
        match name {
            "sc" => cols.sc = Some(i),
            "sa" => cols.sa = Some(i),
            _ => return Err(err(i, format!("unknown column `{name}`"))),
        }
    }
    if cols.y.is_empty() {
        return Err(err(0, "no output columns `y_1..`".into()));
    }
    if cols.sc.is_some() != cols.sa.is_some() {
        return Err(err(0, "columns `sc` and `sa` must appear together".into()));
    }
    Ok(cols)
}

fn parse_boundary(text: &str, path: &Path, line: u64) -> Result<Vector> {
    let values: std::result::Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if v.iter().all(|x| x.is_finite()) => Ok(Vector::from_vec(v)),
        _ => Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            column: 1,
            message: format!("bad boundary state `{text}`"),
        }),
    }
}

/// Parse a trajectory CSV. Boundary states come from the `# x_c0=` and
/// `# x_aT1=` comment lines; when absent they default to zero vectors of the
/// size given by the truth columns or by `dims`.
pub fn trajectory_from_csv(text: &str, path: &Path, dims: Option<&Dims>) -> Result<crate::Trajectory> {
    let mut x_c0 = None;
    let mut x_a_end = None;
    for (i, line) in text.lines().enumerate() {
        let Some(comment) = line.strip_prefix('#') else { continue };
        let comment = comment.trim();
        if let Some(v) = comment.strip_prefix("x_c0=") {
            x_c0 = Some(parse_boundary(v, path, i as u64 + 1)?);
        } else if let Some(v) = comment.strip_prefix("x_aT1=") {
            x_a_end = Some(parse_boundary(v, path, i as u64 + 1)?);
        }
    }

    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header_line = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let header_pos = reader.position().line();
    let cols = parse_header(&header_line, path, header_pos)?;
    let width = header_line.len();

    let mut y = Vec::new();
    let mut xc = Vec::new();
    let mut xa = Vec::new();
    let mut sc = Vec::new();
    let mut sa = Vec::new();
    let mut record = csv::StringRecord::new();
    while reader.read_record(&mut record).map_err(|e| csv_error(path, e))? {
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                column: record.len().min(width) as u64 + 1,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        let num = |i: usize| -> Result<f64> {
            let cell = record[i].trim();
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: i as u64 + 1,
                    message: format!("`{cell}` is not a finite number"),
                }),
            }
        };
        let label = |i: usize| -> Result<usize> {
            let cell = record[i].trim();
            match cell.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: i as u64 + 1,
                    message: format!("`{cell}` is not a 1-based mode label"),
                }),
            }
        };
        let expected_t = y.len() + 1;
        if record[0].trim().parse::<usize>().ok() != Some(expected_t) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                column: 1,
                message: format!("expected t = {expected_t}"),
            });
        }
        let vector = |idx: &[usize]| -> Result<Vector> { Ok(Vector::from_vec(idx.iter().map(|&i| num(i)).collect::<Result<_>>()?)) };
        y.push(vector(&cols.y)?);
        if !cols.xc.is_empty() {
            xc.push(vector(&cols.xc)?);
        }
        if !cols.xa.is_empty() {
            xa.push(vector(&cols.xa)?);
        }
        if let (Some(i), Some(j)) = (cols.sc, cols.sa) {
            sc.push(label(i)?);
            sa.push(label(j)?);
        }
    }
    if y.is_empty() {
        return Err(Error::Validation(format!("{}: no data rows", path.display())));
    }

    let resolve = |given: Option<Vector>, truth_dim: usize, dim: Option<usize>, name: &str| -> Result<Vector> {
        let want = if truth_dim > 0 { Some(truth_dim) } else { dim };
        match (given, want) {
            (Some(v), Some(n)) if v.len() != n => Err(Error::Dimension(format!(
                "{name} has {} entries, expected {n}",
                v.len()
            ))),
            (Some(v), _) => Ok(v),
            (None, Some(n)) => Ok(Vector::zeros(n)),
            (None, None) => Err(Error::Validation(format!(
                "{}: {name} missing and state dimension unknown",
                path.display()
            ))),
        }
    };
    let x_c0 = resolve(x_c0, cols.xc.len(), dims.map(|d| d.n_xc), "x_c0")?;
    let x_a_end = resolve(x_a_end, cols.xa.len(), dims.map(|d| d.n_xa), "x_aT1")?;
    if let Some(d) = dims {
        if d.n_y != cols.y.len() {
            return Err(Error::Dimension(format!("file has {} outputs, dims say {}", cols.y.len(), d.n_y)));
        }
    }
    let traj = crate::Trajectory {
        y,
        x_c_true: (!xc.is_empty()).then_some(xc),
        x_a_true: (!xa.is_empty()).then_some(xa),
        seq_true: (!sc.is_empty()).then_some(SwitchingSequence { s_c: sc, s_a: sa }),
        x_c0,
        x_a_end,
    };
    traj.check()?;
    Ok(traj)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let (line, message) = match e.kind() {
        csv::ErrorKind::UnequalLengths { pos, expected_len, len } => (
            pos.as_ref().map_or(0, |p| p.line()),
            format!("expected {expected_len} fields, found {len}"),
        ),
        _ => (e.position().map_or(0, |p| p.line()), e.to_string()),
    };
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column: 1,
        message,
    }
}

pub fn read_trajectory(path: &Path, dims: Option<&Dims>) -> Result<crate::Trajectory> {
    trajectory_from_csv(&fs::read_to_string(path)?, path, dims)
}

/// Parse `n_y,n_xc,n_xa,m_c,m_a`.
pub fn parse_dims(s: &str) -> Result<Dims> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("dims `{s}`: expected five comma-separated counts")))?;
    match v[..] {
        [n_y, n_xc, n_xa, m_c, m_a] if v.iter().all(|&x| x > 0) => Ok(Dims::new(n_y, n_xc, n_xa, m_c, m_a)),
        _ => Err(Error::Config(format!("dims `{s}`: expected five positive counts n_y,n_xc,n_xa,m_c,m_a"))),
    }
}

fn toml_error(path: &Path, text: &str, e: toml::de::Error) -> Error {
    let (line, column) = e.span().map_or((0, 0), |span| {
        let before = &text[..span.start.min(text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        (line as u64, column as u64)
    });
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: e.message().to_string(),
    }
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| toml_error(path, &text, e))
}

/// Configuration of the `simulate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub seed: u64,
    pub samples: usize,
    /// `"example1"` or a path to a parameter file, relative to the config.
    pub model: String,
    /// Replace every process-noise covariance by this multiple of `I`.
    #[serde(default)]
    pub process_noise: Option<f64>,
    /// Replace the measurement-noise covariance by this multiple of `I`.
    #[serde(default)]
    pub measurement_noise: Option<f64>,
    #[serde(default)]
    pub pi_c: Option<Vec<f64>>,
    #[serde(default)]
    pub pi_a: Option<Vec<f64>>,
    /// Causal boundary state; zero when omitted.
    #[serde(default)]
    pub x_c0: Option<Vec<f64>>,
    /// Anticausal boundary state; zero when omitted.
    #[serde(default, rename = "x_aT1")]
    pub x_a_end: Option<Vec<f64>>,
    #[serde(default)]
    pub state_norm_cap: Option<f64>,
}

impl SimulateConfig {
    pub fn read(path: &Path) -> Result<Self> {
        read_toml(path)
    }

    /// Model named by the config with the overrides applied.
    pub fn resolve_model(&self, base_dir: &Path) -> Result<ModelParams> {
        let mut p = match self.model.as_str() {
            "example1" => ModelParams::example1(),
            file => read_params(&base_dir.join(file))?.0,
        };
        if let Some(level) = self.process_noise {
            p = p.with_process_noise(level);
        }
        if let Some(level) = self.measurement_noise {
            p.sigma_m = Mat::identity(p.sigma_m.nrows(), p.sigma_m.ncols()) * level;
        }
        if let Some(pi) = &self.pi_c {
            p.pi_c = pi.clone();
        }
        if let Some(pi) = &self.pi_a {
            p.pi_a = pi.clone();
        }
        validate_with(&p, &p.dims(), Definiteness::SemiDefinite).into_result()?;
        Ok(p)
    }

    pub fn boundaries(&self, dims: &Dims) -> Result<(Vector, Vector)> {
        let pick = |v: &Option<Vec<f64>>, n: usize, name: &str| match v {
            None => Ok(Vector::zeros(n)),
            Some(v) if v.len() == n => Ok(Vector::from_vec(v.clone())),
            Some(v) => Err(Error::Config(format!("{name} has {} entries, expected {n}", v.len()))),
        };
        Ok((pick(&self.x_c0, dims.n_xc, "x_c0")?, pick(&self.x_a_end, dims.n_xa, "x_aT1")?))
    }
}

/// Configuration of the `identify` command; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentifyConfig {
    pub seed: u64,
    pub max_iters: usize,
    pub tol_loglik: f64,
    pub restarts: usize,
    pub init_scheme: String,
    /// Parameter file for the `user-supplied` scheme, relative to the config.
    pub init_params: Option<String>,
    pub inner_sweeps: usize,
    pub initial_cov: f64,
    pub max_backtracks: usize,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        let d = EmConfig::default();
        IdentifyConfig {
            seed: d.seed,
            max_iters: d.max_iters,
            tol_loglik: d.tol_loglik,
            restarts: d.restarts,
            init_scheme: d.init_scheme.as_str().into(),
            init_params: None,
            inner_sweeps: d.inner_sweeps,
            initial_cov: d.initial_cov,
            max_backtracks: d.max_backtracks,
        }
    }
}

impl IdentifyConfig {
    pub fn read(path: &Path) -> Result<Self> {
        read_toml(path)
    }

    pub fn to_em_config(&self, base_dir: &Path) -> Result<EmConfig> {
        let init_params = match &self.init_params {
            Some(f) => Some(read_params(&base_dir.join(f))?.0),
            None => None,
        };
        let cfg = EmConfig {
            max_iters: self.max_iters,
            tol_loglik: self.tol_loglik,
            restarts: self.restarts,
            init_scheme: self.init_scheme.parse::<InitScheme>()?,
            init_params,
            inner_sweeps: self.inner_sweeps,
            initial_cov: self.initial_cov,
            max_backtracks: self.max_backtracks,
            seed: self.seed,
        };
        cfg.check()?;
        Ok(cfg)
    }
}

/// Provenance of one command invocation. Everything except
/// `wall_clock_seconds` is a function of the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    /// SHA-256 of each input file, keyed by the path as given.
    pub input_hashes: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
    pub stop_reason: Option<String>,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            seeds: Vec::new(),
            input_hashes: BTreeMap::new(),
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
            stop_reason: None,
            notes: Vec::new(),
        }
    }

    pub fn hash_input(&mut self, path: &Path) -> Result<()> {
        self.input_hashes.insert(path.display().to_string(), file_sha256(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| json_error(path, e))
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// `<prefix><suffix>` as a path.
pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// File name part of `path`, for cross-references between artifacts.
pub fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct QJson {
    q_total: f64,
    q1: f64,
    q2: f64,
    q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct RejectedJson {
    iteration: usize,
    loglik_before: f64,
    loglik_full_step: f64,
    accepted_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ReportJson<'a> {
    stop_reason: String,
    iterations: usize,
    restart_index_chosen: usize,
    restart_logliks: &'a [Option<f64>],
    loglik_trace: &'a [f64],
    q_trace: Vec<QJson>,
    rejected_steps: Vec<RejectedJson>,
    diagnostics: Option<&'a str>,
    empty_causal_modes: &'a [usize],
    empty_anticausal_modes: &'a [usize],
    final_params: ParamsJson,
    s_c_hat: Vec<usize>,
    s_a_hat: Vec<usize>,
    x_c_hat: Vec<Vec<f64>>,
    x_a_hat: Vec<Vec<f64>>,
    regularized_times: &'a [usize],
    manifest: Option<&'a str>,
}

/// Machine-readable EM report. Mode labels are 1-based.
pub fn report_to_json(r: &EmReport, manifest: Option<&str>) -> Result<String> {
    let rows = |xs: &[Vector]| xs.iter().map(|v| v.iter().copied().collect()).collect();
    let json = ReportJson {
        stop_reason: r.stop_reason.to_string(),
        iterations: r.iterations(),
        restart_index_chosen: r.restart_index_chosen,
        restart_logliks: &r.restart_logliks,
        loglik_trace: &r.loglik_trace,
        q_trace: r
            .q_trace
            .iter()
            .map(|q| QJson {
                q_total: q.q_total,
                q1: q.q1,
                q2: q.q2,
                q3: q.q3,
            })
            .collect(),
        rejected_steps: r
            .rejected_steps
            .iter()
            .map(|s| RejectedJson {
                iteration: s.iteration,
                loglik_before: s.loglik_before,
                loglik_full_step: s.loglik_full_step,
                accepted_fraction: s.accepted_fraction,
            })
            .collect(),
        diagnostics: r.diagnostics.as_deref(),
        empty_causal_modes: &r.last_flags.empty_causal,
        empty_anticausal_modes: &r.last_flags.empty_anticausal,
        final_params: ParamsJson::new(&r.final_params, None),
        s_c_hat: r.final_assignment.s_c_hat.iter().map(|s| s + 1).collect(),
        s_a_hat: r.final_assignment.s_a_hat.iter().map(|s| s + 1).collect(),
        x_c_hat: rows(&r.final_filter.x_c_hat),
        x_a_hat: rows(&r.final_filter.x_a_hat),
        regularized_times: &r.final_filter.regularized,
        manifest,
    };
    let mut s = serde_json::to_string_pretty(&json).map_err(|e| Error::Validation(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// One row of an evaluation table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub metric: String,
    /// 1-based mode, or 0 for quantities without a mode.
    pub mode: usize,
    pub value: f64,
}

/// Evaluation table `metric,mode,value`, preceded by the manifest reference.
pub fn metrics_to_csv(rows: &[MetricRow], manifest: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(m) = manifest {
        writeln!(out, "# manifest={m}").expect("write to string");
    }
    out.push_str("metric,mode,value\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.metric, r.mode, fmt_f64(r.value)).expect("write to string");
    }
    out
}

/// Rate-experiment table with columns `T, seed, mode, err_Ac, err_Aa,
/// err_Cc, err_Ca, err_Sc, err_Sa, err_Sm, bound, ratio`.
pub fn rate_table_to_csv(exp: &RateExperiment) -> String {
    let mut out = String::from("T,seed,mode,err_Ac,err_Aa,err_Cc,err_Ca,err_Sc,err_Sa,err_Sm,bound,ratio\n");
    for r in exp.table() {
        let f = [r.err_ac, r.err_aa, r.err_cc, r.err_ca, r.err_sc, r.err_sa, r.err_sm, r.bound, r.ratio]
            .iter()
            .map(|&v| fmt_f64(v))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{},{},{},{f}", r.t, r.seed, r.mode).expect("write to string");
    }
    out
}

/// Smoothing output: `t, yhat_*, xc_hat_*, xa_hat_*, sc_hat, sa_hat`.
pub fn smoothed_to_csv(
    y_hat: &[Vector],
    x_c_hat: &[Vector],
    x_a_hat: &[Vector],
    s_c_hat: &[usize],
    s_a_hat: &[usize],
    manifest: Option<&str>,
) -> String {
    let mut out = String::new();
    if let Some(m) = manifest {
        writeln!(out, "# manifest={m}").expect("write to string");
    }
    let width = |v: &[Vector]| v.first().map_or(0, |x| x.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=width(y_hat)).map(|i| format!("yhat_{i}")));
    header.extend((1..=width(x_c_hat)).map(|i| format!("xc_hat_{i}")));
    header.extend((1..=width(x_a_hat)).map(|i| format!("xa_hat_{i}")));
    header.push("sc_hat".into());
    header.push("sa_hat".into());
    writeln!(out, "{}", header.join(",")).expect("write to string");
    for t in 0..y_hat.len() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            t + 1,
            fmt_vec(&y_hat[t]),
            fmt_vec(&x_c_hat[t]),
            fmt_vec(&x_a_hat[t]),
            s_c_hat[t] + 1,
            s_a_hat[t] + 1
        )
        .expect("write to string");
    }
    out
}
