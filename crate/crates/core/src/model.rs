//! Problem data, objective evaluation and the optimality conditions used to
//! certify candidate solutions.
//!
//! The objective is
//!
//! ```text
//! f(x) = Σ_i |(Ax - b)_i|^q + λ · penalty(x)
//! ```
//!
//! where `penalty(x)` is the number of nonzero entries when `p = 0`,
//! `Σ |x_i|^p` when `ε = 0`, and `Σ (|x_i| + ε)^p` otherwise.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::sum;

/// A fully validated problem instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub p: f64,
    pub q: f64,
    pub lambda: f64,
    pub epsilon: f64,
}

/// On-disk form of an [`Instance`]. `A` is row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub p: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    pub lambda: f64,
    #[serde(default)]
    pub epsilon: f64,
}

fn default_q() -> f64 {
    2.0
}

impl Instance {
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        p: f64,
        q: f64,
        lambda: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let inst = Instance {
            a,
            b,
            p,
            q,
            lambda,
            epsilon,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Builds an instance from row-major data.
    pub fn from_rows(
        rows: &[Vec<f64>],
        b: &[f64],
        p: f64,
        q: f64,
        lambda: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::Dimension("A has no rows".into()));
        }
        let n = rows[0].len();
        if n == 0 {
            return Err(Error::Dimension("A has no columns".into()));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Dimension(format!(
                "row {i} has {} entries, expected {n}",
                r.len()
            )));
        }
        if b.len() != m {
            return Err(Error::Dimension(format!(
                "b has length {}, A has {m} rows",
                b.len()
            )));
        }
        let a = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
        Instance::new(a, DVector::from_column_slice(b), p, q, lambda, epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        let (m, n) = self.a.shape();
        if m == 0 || n == 0 {
            return Err(Error::Dimension(format!("A is {m}x{n}")));
        }
        if self.b.len() != m {
            return Err(Error::Dimension(format!(
                "b has length {}, A has {m} rows",
                self.b.len()
            )));
        }
        if self.a.iter().chain(self.b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("A and b must be finite".into()));
        }
        if self.b.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroRhs);
        }
        if !(self.p >= 0.0 && self.p < 1.0) {
            return Err(Error::InvalidParameter(format!("p = {} not in [0, 1)", self.p)));
        }
        if !(self.q >= 1.0 && self.q.is_finite()) {
            return Err(Error::InvalidParameter(format!("q = {} must be >= 1", self.q)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda = {} must be > 0",
                self.lambda
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} must be >= 0",
                self.epsilon
            )));
        }
        if self.epsilon > 0.0 && self.p == 0.0 {
            return Err(Error::InvalidParameter(
                "smoothing (epsilon > 0) requires p > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn norm_b(&self) -> f64 {
        self.b.norm()
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut out = self.clone();
        out.lambda = lambda;
        out.validate()?;
        Ok(out)
    }

    pub fn column_sq_norms(&self) -> Vec<f64> {
        self.a.column_iter().map(|c| c.norm_squared()).collect()
    }

    pub fn to_doc(&self) -> InstanceDoc {
        InstanceDoc {
            a: self
                .a
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            b: self.b.iter().copied().collect(),
            p: self.p,
            q: self.q,
            lambda: self.lambda,
            epsilon: self.epsilon,
        }
    }

    pub fn from_doc(doc: &InstanceDoc) -> Result<Self> {
        Instance::from_rows(&doc.a, &doc.b, doc.p, doc.q, doc.lambda, doc.epsilon)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("instance serializes")
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::Dimension(format!(
                "x has length {}, instance has n = {}",
                x.len(),
                self.n()
            )));
        }
        Ok(())
    }

    /// `Ax - b`.
    pub fn residual(&self, x: &[f64]) -> DVector<f64> {
        &self.a * DVector::from_column_slice(x) - &self.b
    }

    /// `Σ |r_i|^q`.
    pub fn data_term(&self, r: &DVector<f64>) -> f64 {
        let q = self.q;
        if q == 2.0 {
            sum(r.iter().map(|v| v * v))
        } else if q == 1.0 {
            sum(r.iter().map(|v| v.abs()))
        } else {
            sum(r.iter().map(|v| v.abs().powf(q)))
        }
    }

    /// Penalty without the λ factor.
    pub fn penalty(&self, x: &[f64]) -> f64 {
        penalty(x, self.p, self.epsilon)
    }
}

/// Parses and validates an instance document.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let doc: InstanceDoc = serde_json::from_str(text)?;
    Instance::from_doc(&doc)
}

/// `‖x‖_0` when `p = 0`, `Σ|x_i|^p` when `epsilon = 0`, `Σ(|x_i|+ε)^p` otherwise.
pub fn penalty(x: &[f64], p: f64, epsilon: f64) -> f64 {
    if p == 0.0 {
        x.iter().filter(|v| **v != 0.0).count() as f64
    } else if epsilon == 0.0 {
        sum(x.iter().map(|v| v.abs().powf(p)))
    } else {
        sum(x.iter().map(|v| (v.abs() + epsilon).powf(p)))
    }
}

/// Objective value: residual term first, then the penalty.
pub fn objective(inst: &Instance, x: &[f64]) -> Result<f64> {
    inst.check_len(x)?;
    Ok(objective_unchecked(inst, x))
}

pub(crate) fn objective_unchecked(inst: &Instance, x: &[f64]) -> f64 {
    let r = inst.residual(x);
    inst.data_term(&r) + inst.lambda * inst.penalty(x)
}

/// Sorted indices of the exactly-nonzero entries.
pub fn support(x: &[f64]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// A solution vector together with its objective and support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub x: Vec<f64>,
    pub objective: f64,
    pub support: Vec<usize>,
    /// `‖Ax - b‖_q^q`.
    #[serde(default)]
    pub residual_norm: f64,
}

impl Candidate {
    pub fn new(inst: &Instance, x: Vec<f64>) -> Result<Self> {
        inst.check_len(&x)?;
        let r = inst.residual(&x);
        let residual_norm = inst.data_term(&r);
        let objective = residual_norm + inst.lambda * inst.penalty(&x);
        let support = support(&x);
        Ok(Candidate {
            x,
            objective,
            support,
            residual_norm,
        })
    }

    pub fn zero(inst: &Instance) -> Self {
        Candidate::new(inst, vec![0.0; inst.n()]).expect("zero vector has length n")
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }
}

/// First-order stationarity residual on the support of `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stationarity {
    pub support: Vec<usize>,
    pub residual: Vec<f64>,
    pub norm: f64,
    pub zero_vector: bool,
}

fn require_smooth_support_condition(inst: &Instance) -> Result<()> {
    if inst.p == 0.0 {
        return Err(Error::Unsupported(
            "p = 0 has no smooth optimality condition".into(),
        ));
    }
    if inst.epsilon != 0.0 {
        return Err(Error::Unsupported(
            "optimality conditions require epsilon = 0".into(),
        ));
    }
    Ok(())
}

/// Gradient of the data term `Σ|r_i|^q` with respect to `x`, as `Aᵀ w` with
/// `w_i = q |r_i|^{q-1} sign(r_i)`.
pub(crate) fn data_gradient(inst: &Instance, r: &DVector<f64>) -> DVector<f64> {
    let q = inst.q;
    let w = if q == 2.0 {
        r * 2.0
    } else {
        r.map(|v| q * v.abs().powf(q - 1.0) * v.signum())
    };
    inst.a.tr_mul(&w)
}

/// Left-hand side of the first-order condition restricted to the support:
/// `q·B_Tᵀ(|r|^{q-1}·sign r) + pλ|x_T|^{p-2}·x_T` with `r = Ax - b`.
pub fn stationarity_residual(inst: &Instance, x: &[f64]) -> Result<Stationarity> {
    inst.check_len(x)?;
    require_smooth_support_condition(inst)?;
    if inst.q <= 1.0 {
        return Err(Error::Unsupported(
            "q = 1 has no smooth optimality condition".into(),
        ));
    }
    let support = support(x);
    if support.is_empty() {
        return Ok(Stationarity {
            support,
            residual: Vec::new(),
            norm: 0.0,
            zero_vector: true,
        });
    }
    let r = inst.residual(x);
    let g = data_gradient(inst, &r);
    let (p, lambda) = (inst.p, inst.lambda);
    let residual: Vec<f64> = support
        .iter()
        .map(|&i| g[i] + p * lambda * x[i].signum() * x[i].abs().powf(p - 1.0))
        .collect();
    let norm = sum(residual.iter().map(|v| v * v)).sqrt();
    Ok(Stationarity {
        support,
        residual,
        norm,
        zero_vector: false,
    })
}

/// Restricted Hessian on the support and its smallest eigenvalue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondOrder {
    pub support: Vec<usize>,
    pub matrix: Vec<Vec<f64>>,
    pub min_eigenvalue: f64,
}

/// `2BᵀB + λp(p-1)·diag(|x_T|^{p-2})` with `B = A_T`.
pub fn second_order_matrix(inst: &Instance, x: &[f64]) -> Result<SecondOrder> {
    inst.check_len(x)?;
    require_smooth_support_condition(inst)?;
    if inst.q != 2.0 {
        return Err(Error::Unsupported(
            "second-order matrix is available for q = 2 only".into(),
        ));
    }
    let support = support(x);
    if support.is_empty() {
        return Err(Error::Unsupported(
            "second-order matrix needs a nonempty support".into(),
        ));
    }
    let b = inst.a.select_columns(support.iter());
    let mut h = b.tr_mul(&b) * 2.0;
    let (p, lambda) = (inst.p, inst.lambda);
    for (k, &i) in support.iter().enumerate() {
        h[(k, k)] += lambda * p * (p - 1.0) * x[i].abs().powf(p - 2.0);
    }
    let min_eigenvalue = min_eigenvalue(&h);
    let matrix = h.row_iter().map(|r| r.iter().copied().collect()).collect();
    Ok(SecondOrder {
        support,
        matrix,
        min_eigenvalue,
    })
}

pub(crate) fn min_eigenvalue(h: &DMatrix<f64>) -> f64 {
    if h.nrows() == 1 {
        return h[(0, 0)];
    }
    SymmetricEigen::new(h.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example21(lambda: f64) -> Instance {
        Instance::from_rows(&[vec![1.0, 1.0]], &[1.0], 0.5, 2.0, lambda, 0.0).unwrap()
    }

    #[test]
    fn parses_example_instance() {
        let inst = parse_instance(
            r#"{"A":[[1,1]],"b":[1],"p":0.5,"q":2,"lambda":1,"epsilon":0}"#,
        )
        .unwrap();
        assert_eq!((inst.m(), inst.n()), (1, 2));
        assert_eq!(inst.p, 0.5);
    }

    #[test]
    fn rejects_invalid_documents() {
        let zero_b = parse_instance(
            r#"{"A":[[1,0],[0,1]],"b":[0,0],"p":0.5,"q":2,"lambda":1,"epsilon":0}"#,
        );
        assert!(matches!(zero_b, Err(Error::ZeroRhs)));
        let smoothed_p0 =
            parse_instance(r#"{"A":[[1]],"b":[1],"p":0,"q":2,"lambda":0.5,"epsilon":0.1}"#);
        assert!(matches!(smoothed_p0, Err(Error::InvalidParameter(_))));
        assert!(matches!(
            parse_instance(r#"{"A":[[1,2],[1]],"b":[1,1],"p":0.5,"lambda":1}"#),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            parse_instance(r#"{"A":[[1]],"b":[1,1],"p":0.5,"lambda":1}"#),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            parse_instance(r#"{"A":[[1]],"b":[1],"p":1.0,"lambda":1}"#),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            parse_instance(r#"{"A":[[1]],"b":[1],"p":0.5,"q":0.5,"lambda":1}"#),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            parse_instance(r#"{"A":[[1]],"b":[1],"p":0.5,"lambda":0}"#),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(parse_instance("{not json"), Err(Error::Json(_))));
    }

    #[test]
    fn objective_at_zero_is_data_norm() {
        let inst = example21(1.0);
        assert_eq!(objective(&inst, &[0.0, 0.0]).unwrap(), 1.0);
        let smoothed =
            Instance::from_rows(&[vec![1.0, 1.0]], &[2.0], 0.5, 2.0, 3.0, 0.04).unwrap();
        let expected = 4.0 + 3.0 * 2.0 * 0.04f64.sqrt();
        assert!((objective(&smoothed, &[0.0, 0.0]).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn objective_example_values() {
        let lambda = 8.0 / (3.0 * 3f64.sqrt());
        let f = objective(&example21(lambda), &[1.0 / 3.0, 0.0]).unwrap();
        assert!((f - 4.0 / 3.0).abs() < 1e-14);

        let ident = Instance::from_rows(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[1.0, 1.0],
            0.0,
            2.0,
            0.5,
            0.0,
        )
        .unwrap();
        assert_eq!(objective(&ident, &[1.0, 0.0]).unwrap(), 1.5);
        assert!(matches!(objective(&ident, &[1.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn stationary_points_of_example() {
        let inst = example21(8.0 / (3.0 * 3f64.sqrt()));
        for x in [[1.0 / 3.0, 0.0], [0.0, 1.0 / 3.0]] {
            let s = stationarity_residual(&inst, &x).unwrap();
            assert!(s.norm <= 1e-10, "norm {}", s.norm);
            let h = second_order_matrix(&inst, &x).unwrap();
            assert_eq!(h.support.len(), 1);
            assert!(h.min_eigenvalue.abs() <= 1e-10, "{}", h.min_eigenvalue);
        }
        let z = stationarity_residual(&inst, &[0.0, 0.0]).unwrap();
        assert!(z.zero_vector && z.norm == 0.0 && z.residual.is_empty());
    }

    #[test]
    fn second_order_tends_to_data_hessian() {
        let inst = Instance::from_rows(&[vec![1.0]], &[1.0], 0.5, 2.0, 1e-12, 0.0).unwrap();
        let h = second_order_matrix(&inst, &[1.0 - 1e-6]).unwrap();
        assert!((h.min_eigenvalue - 2.0).abs() < 1e-9);
    }

    #[test]
    fn second_order_matches_finite_difference_along_axis() {
        let inst = example21(1.0);
        let x = [0.71, 0.0];
        let h = second_order_matrix(&inst, &x).unwrap().min_eigenvalue;
        let step = 1e-4;
        let f = |t: f64| objective(&inst, &[t, 0.0]).unwrap();
        let fd = (f(x[0] + step) - 2.0 * f(x[0]) + f(x[0] - step)) / (step * step);
        assert!((h - fd).abs() <= 1e-4 * h.abs(), "{h} vs {fd}");
    }

    #[test]
    fn conditions_reject_unsupported_settings() {
        let p0 = Instance::from_rows(&[vec![1.0]], &[1.0], 0.0, 2.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            stationarity_residual(&p0, &[1.0]),
            Err(Error::Unsupported(_))
        ));
        let q1 = Instance::from_rows(&[vec![1.0]], &[1.0], 0.5, 1.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            stationarity_residual(&q1, &[1.0]),
            Err(Error::Unsupported(_))
        ));
        let q3 = Instance::from_rows(&[vec![1.0]], &[1.0], 0.5, 3.0, 1.0, 0.0).unwrap();
        assert!(stationarity_residual(&q3, &[0.5]).is_ok());
        assert!(matches!(
            second_order_matrix(&q3, &[0.5]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn general_q_residual_matches_finite_difference() {
        let inst = Instance::from_rows(
            &[vec![1.0, -0.5], vec![0.3, 2.0]],
            &[1.0, -0.7],
            0.4,
            3.0,
            0.6,
            0.0,
        )
        .unwrap();
        let x = [0.8, -0.3];
        let s = stationarity_residual(&inst, &x).unwrap();
        for i in 0..2 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (objective(&inst, &xp).unwrap() - objective(&inst, &xm).unwrap()) / (2.0 * h);
            assert!((fd - s.residual[i]).abs() <= 1e-6 * s.residual[i].abs().max(1.0));
        }
    }
}
