//! Parameter object, dimensions and switching sequences.
//!
//! Mode indices are 0-based everywhere in memory. The serialized formats in
//! [`crate::io`] use 1-based labels and convert at the parser.

use std::fmt;

use crate::linalg::{max_asymmetry, min_eigenvalue, spectral_radius, symmetrize, Mat};

/// Tolerance on probability normalization and covariance symmetry.
pub const STRUCTURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n_y: usize,
    pub n_xc: usize,
    pub n_xa: usize,
    pub m_c: usize,
    pub m_a: usize,
}

impl Dims {
    pub fn new(n_y: usize, n_xc: usize, n_xa: usize, m_c: usize, m_a: usize) -> Self {
        Dims { n_y, n_xc, n_xa, m_c, m_a }
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{},{}", self.n_y, self.n_xc, self.n_xa, self.m_c, self.m_a)
    }
}

/// Full parameter set of the switching non-causal model.
///
/// Per-mode lists are indexed by 0-based mode label. `sigma_*` are
/// covariances, `pi_*` the i.i.d. mode probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub a_c: Vec<Mat>,
    pub a_a: Vec<Mat>,
    pub c_c: Vec<Mat>,
    pub c_a: Vec<Mat>,
    pub sigma_c: Vec<Mat>,
    pub sigma_a: Vec<Mat>,
    pub sigma_m: Mat,
    pub pi_c: Vec<f64>,
    pub pi_a: Vec<f64>,
}

/// Causal and anticausal mode labels, one per time step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchingSequence {
    pub s_c: Vec<usize>,
    pub s_a: Vec<usize>,
}

impl SwitchingSequence {
    pub fn len(&self) -> usize {
        self.s_c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_c.is_empty()
    }

    pub fn constant(t: usize, causal: usize, anticausal: usize) -> Self {
        SwitchingSequence {
            s_c: vec![causal; t],
            s_a: vec![anticausal; t],
        }
    }

    pub fn check(&self, dims: &Dims) -> crate::Result<()> {
        if self.s_c.len() != self.s_a.len() {
            return Err(crate::Error::Dimension(format!(
                "causal sequence has {} entries, anticausal {}",
                self.s_c.len(),
                self.s_a.len()
            )));
        }
        if let Some(t) = self.s_c.iter().position(|&s| s >= dims.m_c) {
            return Err(crate::Error::Validation(format!(
                "causal mode {} at t={} outside 1..={}",
                self.s_c[t] + 1,
                t + 1,
                dims.m_c
            )));
        }
        if let Some(t) = self.s_a.iter().position(|&s| s >= dims.m_a) {
            return Err(crate::Error::Validation(format!(
                "anticausal mode {} at t={} outside 1..={}",
                self.s_a[t] + 1,
                t + 1,
                dims.m_a
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Parameter name, e.g. `sigma_c`.
    pub field: String,
    /// 1-based mode index for per-mode lists.
    pub mode: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            Some(i) => write!(f, "{}({}): {}", self.field, i, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, field: &str, mode: Option<usize>, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.to_string(),
            mode,
            message: message.into(),
        });
    }

    pub fn into_result(self) -> crate::Result<()> {
        if self.passed() {
            Ok(())
        } else {
            let joined: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
            Err(crate::Error::Validation(joined.join("; ")))
        }
    }
}

/// How strictly covariances are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    /// Minimum eigenvalue strictly positive. Required for identification.
    Positive,
    /// Zero covariances allowed. Used by the simulator for noiseless runs.
    SemiDefinite,
}

/// Check every structural invariant of `params` against `dims`.
pub fn validate(params: &ModelParams, dims: &Dims) -> ValidationReport {
    validate_with(params, dims, Definiteness::Positive)
}

pub fn validate_with(params: &ModelParams, dims: &Dims, definiteness: Definiteness) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (name, v) in [
        ("n_y", dims.n_y),
        ("n_xc", dims.n_xc),
        ("n_xa", dims.n_xa),
        ("m_c", dims.m_c),
        ("m_a", dims.m_a),
    ] {
        if v == 0 {
            report.push("dims", None, format!("{name} must be at least 1"));
        }
    }
    if !report.passed() {
        return report;
    }

    check_list(&mut report, "a_c", &params.a_c, dims.m_c, (dims.n_xc, dims.n_xc));
    check_list(&mut report, "a_a", &params.a_a, dims.m_a, (dims.n_xa, dims.n_xa));
    check_list(&mut report, "c_c", &params.c_c, dims.m_c, (dims.n_y, dims.n_xc));
    check_list(&mut report, "c_a", &params.c_a, dims.m_a, (dims.n_y, dims.n_xa));
    check_list(&mut report, "sigma_c", &params.sigma_c, dims.m_c, (dims.n_xc, dims.n_xc));
    check_list(&mut report, "sigma_a", &params.sigma_a, dims.m_a, (dims.n_xa, dims.n_xa));
    check_shape(&mut report, "sigma_m", None, &params.sigma_m, (dims.n_y, dims.n_y));

    for (name, list) in [("sigma_c", &params.sigma_c), ("sigma_a", &params.sigma_a)] {
        for (i, s) in list.iter().enumerate() {
            if s.is_square() {
                check_covariance(&mut report, name, Some(i + 1), s, definiteness);
            }
        }
    }
    if params.sigma_m.is_square() {
        check_covariance(&mut report, "sigma_m", None, &params.sigma_m, definiteness);
    }

    check_probabilities(&mut report, "pi_c", &params.pi_c, dims.m_c);
    check_probabilities(&mut report, "pi_a", &params.pi_a, dims.m_a);
    report
}

fn check_list(report: &mut ValidationReport, name: &str, list: &[Mat], modes: usize, shape: (usize, usize)) {
    if list.len() != modes {
        report.push(name, None, format!("expected {modes} matrices, found {}", list.len()));
    }
    for (i, m) in list.iter().enumerate() {
        check_shape(report, name, Some(i + 1), m, shape);
    }
}

fn check_shape(report: &mut ValidationReport, name: &str, mode: Option<usize>, m: &Mat, shape: (usize, usize)) {
    if m.shape() != shape {
        report.push(
            name,
            mode,
            format!("shape {}x{}, expected {}x{}", m.nrows(), m.ncols(), shape.0, shape.1),
        );
    } else if m.iter().any(|v| !v.is_finite()) {
        report.push(name, mode, "non-finite entry");
    }
}

fn check_covariance(
    report: &mut ValidationReport,
    name: &str,
    mode: Option<usize>,
    s: &Mat,
    definiteness: Definiteness,
) {
    if s.iter().any(|v| !v.is_finite()) {
        return;
    }
    let asym = max_asymmetry(s);
    if asym > STRUCTURE_TOL {
        report.push(name, mode, format!("not symmetric (max asymmetry {asym:e})"));
        return;
    }
    let lmin = min_eigenvalue(s);
    match definiteness {
        Definiteness::Positive if lmin <= 0.0 => {
            report.push(name, mode, format!("not positive definite (min eigenvalue {lmin})"))
        }
        Definiteness::SemiDefinite if lmin < -STRUCTURE_TOL => {
            report.push(name, mode, format!("not positive semi-definite (min eigenvalue {lmin})"))
        }
        _ => {}
    }
}

fn check_probabilities(report: &mut ValidationReport, name: &str, p: &[f64], modes: usize) {
    if p.len() != modes {
        report.push(name, None, format!("expected {modes} probabilities, found {}", p.len()));
        return;
    }
    if let Some(i) = p.iter().position(|v| !v.is_finite() || *v < 0.0) {
        report.push(name, Some(i + 1), format!("probability {} is negative or non-finite", p[i]));
        return;
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > STRUCTURE_TOL {
        report.push(name, None, format!("probabilities sum to {sum}, not 1"));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityHint {
    pub causal: Vec<f64>,
    pub anticausal: Vec<f64>,
    /// Set when any mode matrix has spectral radius of at least one.
    pub flagged: bool,
}

/// Per-mode spectral radii of the dynamics matrices.
///
/// Switching between individually unstable modes can still be stable in the
/// time-averaged sense, so this is only a warning; the simulator enforces the
/// real constraint empirically.
pub fn spectral_stability_hint(params: &ModelParams) -> StabilityHint {
    let causal: Vec<f64> = params.a_c.iter().map(spectral_radius).collect();
    let anticausal: Vec<f64> = params.a_a.iter().map(spectral_radius).collect();
    let flagged = causal.iter().chain(anticausal.iter()).any(|&r| r >= 1.0);
    StabilityHint {
        causal,
        anticausal,
        flagged,
    }
}

impl ModelParams {
    pub fn dims(&self) -> Dims {
        Dims {
            n_y: self.sigma_m.nrows(),
            n_xc: self.a_c.first().map_or(0, |m| m.nrows()),
            n_xa: self.a_a.first().map_or(0, |m| m.nrows()),
            m_c: self.a_c.len(),
            m_a: self.a_a.len(),
        }
    }

    /// The two-mode academic system with unit covariances
    /// (`n_y = 1`, two-dimensional causal and anticausal states).
    pub fn example1() -> Self {
        let m = |r: usize, c: usize, v: &[f64]| Mat::from_row_slice(r, c, v);
        ModelParams {
            a_c: vec![m(2, 2, &[1.0, 0.2, 0.3, 0.8]), m(2, 2, &[0.8, 0.2, 0.3, 0.5])],
            a_a: vec![m(2, 2, &[1.0, 0.0, 0.0, 1.0]), m(2, 2, &[0.6, 0.2, 0.3, 0.8])],
            c_c: vec![m(1, 2, &[0.3, 0.7]), m(1, 2, &[0.7, 0.2])],
            c_a: vec![m(1, 2, &[0.2, 0.6]), m(1, 2, &[0.3, 0.76])],
            sigma_c: vec![Mat::identity(2, 2), Mat::identity(2, 2)],
            sigma_a: vec![Mat::identity(2, 2), Mat::identity(2, 2)],
            sigma_m: Mat::identity(1, 1),
            pi_c: vec![0.7, 0.3],
            pi_a: vec![0.5, 0.5],
        }
    }

    /// Replace every process-noise covariance by `level * I`.
    pub fn with_process_noise(mut self, level: f64) -> Self {
        for s in self.sigma_c.iter_mut().chain(self.sigma_a.iter_mut()) {
            *s = Mat::identity(s.nrows(), s.ncols()) * level;
        }
        self
    }

    pub fn with_probabilities(mut self, pi_c: Vec<f64>, pi_a: Vec<f64>) -> Self {
        self.pi_c = pi_c;
        self.pi_a = pi_a;
        self
    }

    /// Relabel causal modes: new mode `i` takes the parameters of old mode `perm[i]`.
    pub fn permute_causal(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        out.a_c = perm.iter().map(|&p| self.a_c[p].clone()).collect();
        out.c_c = perm.iter().map(|&p| self.c_c[p].clone()).collect();
        out.sigma_c = perm.iter().map(|&p| self.sigma_c[p].clone()).collect();
        out.pi_c = perm.iter().map(|&p| self.pi_c[p]).collect();
        out
    }

    /// Relabel anticausal modes, as [`ModelParams::permute_causal`].
    pub fn permute_anticausal(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        out.a_a = perm.iter().map(|&p| self.a_a[p].clone()).collect();
        out.c_a = perm.iter().map(|&p| self.c_a[p].clone()).collect();
        out.sigma_a = perm.iter().map(|&p| self.sigma_a[p].clone()).collect();
        out.pi_a = perm.iter().map(|&p| self.pi_a[p]).collect();
        out
    }

    /// Convex combination `(1 - alpha) * self + alpha * other`, entrywise.
    /// Covariances stay symmetric PSD and probabilities stay normalized.
    pub fn interpolate(&self, other: &ModelParams, alpha: f64) -> Self {
        let mix = |a: &Mat, b: &Mat| a * (1.0 - alpha) + b * alpha;
        let mix_list = |a: &[Mat], b: &[Mat]| a.iter().zip(b).map(|(x, y)| mix(x, y)).collect::<Vec<_>>();
        let mix_cov = |a: &[Mat], b: &[Mat]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| symmetrize(&mix(x, y)))
                .collect::<Vec<_>>()
        };
        let mix_p = |a: &[f64], b: &[f64]| {
            let v: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * (1.0 - alpha) + y * alpha).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<_>>()
        };
        ModelParams {
            a_c: mix_list(&self.a_c, &other.a_c),
            a_a: mix_list(&self.a_a, &other.a_a),
            c_c: mix_list(&self.c_c, &other.c_c),
            c_a: mix_list(&self.c_a, &other.c_a),
            sigma_c: mix_cov(&self.sigma_c, &other.sigma_c),
            sigma_a: mix_cov(&self.sigma_a, &other.sigma_a),
            sigma_m: symmetrize(&mix(&self.sigma_m, &other.sigma_m)),
            pi_c: mix_p(&self.pi_c, &other.pi_c),
            pi_a: mix_p(&self.pi_a, &other.pi_a),
        }
    }
}
