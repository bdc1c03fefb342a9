use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

/// Convex function with first-order oracle and a Hessian (finite differences
/// of the gradient unless overridden).
pub trait SmoothConvex: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>) -> f64;

    /// Gradient, or any subgradient at kinks.
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        let mut h = DMatrix::zeros(n, n);
        let mut v = x.clone();
        for j in 0..n {
            let step = 1e-6 * (1.0 + x[j].abs());
            v[j] = x[j] + step;
            let gp = self.gradient(&v);
            v[j] = x[j] - step;
            let gm = self.gradient(&v);
            v[j] = x[j];
            h.set_column(j, &((gp - gm) / (2.0 * step)));
        }
        (&h + h.transpose()) * 0.5
    }

    /// `(c, d)` when the function is `c · x + d`.
    fn as_linear(&self) -> Option<(DVector<f64>, f64)> {
        None
    }

    fn describe(&self) -> String {
        "smooth convex function".into()
    }
}

impl fmt::Debug for dyn SmoothConvex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// `c · x + d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub coef: DVector<f64>,
    pub constant: f64,
}

impl Linear {
    pub fn new(coef: DVector<f64>, constant: f64) -> Self {
        Self { coef, constant }
    }

    /// `x ↦ x_i`.
    pub fn coordinate(n: usize, i: usize) -> Self {
        let mut coef = DVector::zeros(n);
        coef[i] = 1.0;
        Self { coef, constant: 0.0 }
    }
}

impl SmoothConvex for Linear {
    fn dim(&self) -> usize {
        self.coef.len()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.coef.dot(x) + self.constant
    }
    fn gradient(&self, _x: &DVector<f64>) -> DVector<f64> {
        self.coef.clone()
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(x.len(), x.len())
    }
    fn as_linear(&self) -> Option<(DVector<f64>, f64)> {
        Some((self.coef.clone(), self.constant))
    }
    fn describe(&self) -> String {
        format!("linear {:?} + {}", self.coef.as_slice(), self.constant)
    }
}

/// `½ Σ w_i (x_i − a_i)²` with positive weights: the regularizers.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    pub center: DVector<f64>,
    pub weights: DVector<f64>,
}

impl Quadratic {
    pub fn new(center: DVector<f64>, weights: DVector<f64>) -> Self {
        assert_eq!(center.len(), weights.len());
        Self { center, weights }
    }

    /// `½ ‖x − a‖²`.
    pub fn isotropic(center: DVector<f64>) -> Self {
        let n = center.len();
        Self::new(center, DVector::from_element(n, 1.0))
    }
}

impl SmoothConvex for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x - &self.center)
            .iter()
            .zip(self.weights.iter())
            .map(|(d, w)| w * d * d)
            .sum::<f64>()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (x - &self.center).component_mul(&self.weights)
    }
    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.weights)
    }
    fn describe(&self) -> String {
        format!(
            "quadratic centered at {:?} with weights {:?}",
            self.center.as_slice(),
            self.weights.as_slice()
        )
    }
}

/// `Σ c_k f_k(x)` with nonnegative coefficients.
#[derive(Clone)]
pub struct WeightedSum {
    terms: Vec<(f64, Arc<dyn SmoothConvex>)>,
}

impl WeightedSum {
    pub fn new(terms: Vec<(f64, Arc<dyn SmoothConvex>)>) -> Self {
        assert!(!terms.is_empty());
        let n = terms[0].1.dim();
        assert!(terms.iter().all(|(c, f)| *c >= 0.0 && f.dim() == n));
        Self { terms }
    }

    /// `f + ε ψ`.
    pub fn regularized(f: Arc<dyn SmoothConvex>, eps: f64, psi: Arc<dyn SmoothConvex>) -> Self {
        Self::new(vec![(1.0, f), (eps, psi)])
    }
}

impl SmoothConvex for WeightedSum {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.terms.iter().map(|(c, f)| c * f.value(x)).sum()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        for (c, f) in &self.terms {
            g += f.gradient(x) * *c;
        }
        g
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(x.len(), x.len());
        for (c, f) in &self.terms {
            if *c != 0.0 {
                h += f.hessian(x) * *c;
            }
        }
        h
    }
    fn as_linear(&self) -> Option<(DVector<f64>, f64)> {
        let mut coef = DVector::zeros(self.dim());
        let mut constant = 0.0;
        for (c, f) in &self.terms {
            if *c == 0.0 {
                continue;
            }
            let (a, d) = f.as_linear()?;
            coef += a * *c;
            constant += c * d;
        }
        Some((coef, constant))
    }
    fn describe(&self) -> String {
        self.terms
            .iter()
            .map(|(c, f)| format!("{c} * ({})", f.describe()))
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// `f(x) − level`, used to turn a function into the constraint `f ≤ level`.
pub(crate) struct Shifted {
    pub inner: Arc<dyn SmoothConvex>,
    pub level: f64,
}

impl SmoothConvex for Shifted {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.inner.value(x) - self.level
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.inner.gradient(x)
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.inner.hessian(x)
    }
    fn describe(&self) -> String {
        format!("{} - {}", self.inner.describe(), self.level)
    }
}

/// Function of the leading `inner.dim()` coordinates of a longer vector.
pub(crate) struct Padded {
    pub inner: Arc<dyn SmoothConvex>,
    pub extra: usize,
}

impl SmoothConvex for Padded {
    fn dim(&self) -> usize {
        self.inner.dim() + self.extra
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.inner.value(&x.rows(0, self.inner.dim()).into_owned())
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.inner.dim();
        let g = self.inner.gradient(&x.rows(0, n).into_owned());
        let mut out = DVector::zeros(n + self.extra);
        out.rows_mut(0, n).copy_from(&g);
        out
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.inner.dim();
        let h = self.inner.hessian(&x.rows(0, n).into_owned());
        let mut out = DMatrix::zeros(n + self.extra, n + self.extra);
        out.view_mut((0, 0), (n, n)).copy_from(&h);
        out
    }
    fn as_linear(&self) -> Option<(DVector<f64>, f64)> {
        let (c, d) = self.inner.as_linear()?;
        let mut coef = DVector::zeros(self.dim());
        coef.rows_mut(0, c.len()).copy_from(&c);
        Some((coef, d))
    }
    fn describe(&self) -> String {
        self.inner.describe()
    }
}
