use crate::linalg::{cholesky_regularized, gaussian_logpdf, Mat, Vector, SINGULAR_JITTER};
use crate::model::ModelParams;
use crate::{Error, Result};

/// Joint log-likelihood grid for one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTable {
    /// Entry `(j, l)`: `log N(y; C_c(j) x⁻_c(j) + C_a(l) x⁻_a(l), S) + ln π_c(j) + ln π_a(l)`.
    pub table: Mat,
    /// The innovation covariance needed `λI` to factor.
    pub regularized: bool,
}

/// Hard (MAP) assignment of both switching sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeAssignment {
    pub s_c_hat: Vec<usize>,
    pub s_a_hat: Vec<usize>,
    pub m_c: usize,
    pub m_a: usize,
    /// Per-time joint tables, when the assignment came from tables.
    pub tables: Vec<Mat>,
}

impl ModeAssignment {
    /// Assignment with given labels and no tables.
    pub fn from_sequences(s_c_hat: Vec<usize>, s_a_hat: Vec<usize>, m_c: usize, m_a: usize) -> Self {
        ModeAssignment {
            s_c_hat,
            s_a_hat,
            m_c,
            m_a,
            tables: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.s_c_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_c_hat.is_empty()
    }

    /// One-hot weight `w^c_{tj}`.
    pub fn w_c(&self, t: usize, j: usize) -> f64 {
        if self.s_c_hat[t] == j {
            1.0
        } else {
            0.0
        }
    }

    pub fn w_a(&self, t: usize, l: usize) -> f64 {
        if self.s_a_hat[t] == l {
            1.0
        } else {
            0.0
        }
    }

    /// `T × m_c` one-hot weight matrix.
    pub fn weights_c(&self) -> Mat {
        Mat::from_fn(self.len(), self.m_c, |t, j| self.w_c(t, j))
    }

    pub fn weights_a(&self) -> Mat {
        Mat::from_fn(self.len(), self.m_a, |t, l| self.w_a(t, l))
    }

    pub fn counts_c(&self) -> Vec<usize> {
        count(&self.s_c_hat, self.m_c)
    }

    pub fn counts_a(&self) -> Vec<usize> {
        count(&self.s_a_hat, self.m_a)
    }
}

fn count(s: &[usize], m: usize) -> Vec<usize> {
    let mut c = vec![0; m];
    for &v in s {
        c[v] += 1;
    }
    c
}

/// Mode log-likelihood grid at one time step.
///
/// `x_c_prior` and `x_a_prior` hold either one predicted state per mode or a
/// single prediction shared by all modes.
pub fn mode_loglik_table(
    params: &ModelParams,
    y_t: &Vector,
    x_c_prior: &[Vector],
    x_a_prior: &[Vector],
    s_t: &Mat,
) -> Result<ModeTable> {
    let (m_c, m_a) = (params.a_c.len(), params.a_a.len());
    let pick = |list: &[Vector], i: usize, m: usize, what: &str| -> Result<Vector> {
        match list.len() {
            1 => Ok(list[0].clone()),
            n if n == m => Ok(list[i].clone()),
            n => Err(Error::Dimension(format!("{what}: {n} predictions for {m} modes"))),
        }
    };
    let (chol, regularized) = cholesky_regularized(s_t, SINGULAR_JITTER).ok_or_else(|| Error::SingularCovariance {
        name: "innovation covariance".into(),
    })?;
    let out_c: Vec<Vector> = (0..m_c)
        .map(|j| Ok(&params.c_c[j] * pick(x_c_prior, j, m_c, "causal")?))
        .collect::<Result<_>>()?;
    let out_a: Vec<Vector> = (0..m_a)
        .map(|l| Ok(&params.c_a[l] * pick(x_a_prior, l, m_a, "anticausal")?))
        .collect::<Result<_>>()?;
    let table = Mat::from_fn(m_c, m_a, |j, l| {
        let r = y_t - &out_c[j] - &out_a[l];
        gaussian_logpdf(&r, &chol) + params.pi_c[j].ln() + params.pi_a[l].ln()
    });
    Ok(ModeTable { table, regularized })
}

/// Joint argmax of each table, ties going to the lowest `(j, l)` in
/// lexicographic order. NaN entries never win.
pub fn assign_modes(tables: &[Mat]) -> ModeAssignment {
    let (m_c, m_a) = tables.first().map_or((1, 1), |t| t.shape());
    let mut s_c = Vec::with_capacity(tables.len());
    let mut s_a = Vec::with_capacity(tables.len());
    for table in tables {
        let mut best = (0, 0);
        let mut best_val = f64::NEG_INFINITY;
        for j in 0..m_c {
            for l in 0..m_a {
                let v = table[(j, l)];
                if v > best_val {
                    best_val = v;
                    best = (j, l);
                }
            }
        }
        s_c.push(best.0);
        s_a.push(best.1);
    }
    ModeAssignment {
        s_c_hat: s_c,
        s_a_hat: s_a,
        m_c,
        m_a,
        tables: tables.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar_params(pi_c: Vec<f64>) -> ModelParams {
        let one = Mat::identity(1, 1);
        let m = pi_c.len();
        ModelParams {
            a_c: vec![one.clone(); m],
            a_a: vec![one.clone()],
            c_c: vec![one.clone(); m],
            c_a: vec![Mat::zeros(1, 1)],
            sigma_c: vec![one.clone(); m],
            sigma_a: vec![one.clone()],
            sigma_m: one,
            pi_c,
            pi_a: vec![1.0],
        }
    }

    #[test]
    fn single_mode_is_trivial() {
        let p = scalar_params(vec![1.0]);
        let t = mode_loglik_table(&p, &Vector::from_element(1, 0.3), &[Vector::zeros(1)], &[Vector::zeros(1)], &Mat::identity(1, 1))
            .unwrap();
        assert_eq!(t.table.shape(), (1, 1));
        let a = assign_modes(&[t.table]);
        assert_eq!((a.s_c_hat[0], a.s_a_hat[0]), (0, 0));
    }

    #[test]
    fn closer_prediction_wins_by_half_squared_gap() {
        let p = scalar_params(vec![0.5, 0.5]);
        let preds = [Vector::from_element(1, 0.9), Vector::from_element(1, 0.1)];
        let t = mode_loglik_table(&p, &Vector::from_element(1, 1.0), &preds, &[Vector::zeros(1)], &Mat::identity(1, 1))
            .unwrap();
        let gap = t.table[(0, 0)] - t.table[(1, 0)];
        assert!((gap - 0.4).abs() < 1e-12, "{gap}");
        assert_eq!(assign_modes(&[t.table]).s_c_hat, vec![0]);
    }

    #[test]
    fn identical_modes_tie_to_lowest() {
        let p = scalar_params(vec![0.5, 0.5]);
        let t = mode_loglik_table(&p, &Vector::from_element(1, 1.0), &[Vector::zeros(1)], &[Vector::zeros(1)], &Mat::identity(1, 1))
            .unwrap();
        assert_eq!(t.table[(0, 0)], t.table[(1, 0)]);
        assert_eq!(assign_modes(&[t.table]).s_c_hat, vec![0]);
        assert_eq!(assign_modes(&[Mat::from_element(3, 2, -1.5)]).s_a_hat, vec![0]);
    }

    #[test]
    fn zero_prior_mode_never_selected() {
        let p = scalar_params(vec![0.0, 1.0]);
        let preds = [Vector::from_element(1, 1.0), Vector::from_element(1, -5.0)];
        let t = mode_loglik_table(&p, &Vector::from_element(1, 1.0), &preds, &[Vector::zeros(1)], &Mat::identity(1, 1))
            .unwrap();
        assert_eq!(t.table[(0, 0)], f64::NEG_INFINITY);
        assert_eq!(assign_modes(&[t.table]).s_c_hat, vec![1]);
    }

    #[test]
    fn singular_innovation_flagged() {
        let p = scalar_params(vec![1.0]);
        let t = mode_loglik_table(&p, &Vector::zeros(1), &[Vector::zeros(1)], &[Vector::zeros(1)], &Mat::zeros(1, 1))
            .unwrap();
        assert!(t.regularized);
        assert!(t.table[(0, 0)].is_finite());
    }

    #[test]
    fn weights_are_one_hot() {
        let a = ModeAssignment::from_sequences(vec![0, 1, 1], vec![2, 0, 1], 2, 3);
        let w = a.weights_c();
        for t in 0..3 {
            assert_eq!(w.row(t).sum(), 1.0);
            assert_eq!(w[(t, a.s_c_hat[t])], 1.0);
        }
        assert_eq!(a.weights_a().row(0).iter().filter(|&&v| v != 0.0).count(), 1);
    }

    proptest! {
        #[test]
        fn argmax_invariant_under_shift(vals in proptest::collection::vec(-50.0f64..50.0, 6), shift in -1e3f64..1e3) {
            let t = Mat::from_row_slice(2, 3, &vals);
            let shifted = t.map(|v| v + shift);
            let a = assign_modes(std::slice::from_ref(&t));
            let b = assign_modes(std::slice::from_ref(&shifted));
            // exact ties can be broken by rounding after the shift, so compare values
            let va = t[(a.s_c_hat[0], a.s_a_hat[0])];
            let vb = t[(b.s_c_hat[0], b.s_a_hat[0])];
            prop_assert!((va - vb).abs() <= 1e-9 * (1.0 + shift.abs()));
            if vals.iter().filter(|&&v| (v - va).abs() < 1e-6).count() == 1 {
                prop_assert_eq!((a.s_c_hat[0], a.s_a_hat[0]), (b.s_c_hat[0], b.s_a_hat[0]));
            }
        }
    }
}
