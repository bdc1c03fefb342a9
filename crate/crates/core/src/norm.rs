//! Norms on `R^n` with subgradient access.
//!
//! Five kinds are supported: `ℓ1`, `ℓ2`, `ℓ∞`, and two matrix-induced norms
//! `‖v‖_M = sqrt(vᵀ M v)` (a user weighting matrix or a Gram matrix of a
//! function basis). Matrix-induced norms keep a square-root factor `R` with
//! `RᵀR = M` so that `‖v‖_M = ‖R v‖₂`; the inner solver uses the factor to
//! write norm balls as second-order cones.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalue floor used by the positive-definiteness check.
pub const SPD_RELATIVE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L1,
    L2,
    Linf,
    WeightedL2,
    GramL2,
}

#[derive(Clone, Debug)]
pub struct Norm {
    kind: NormKind,
    matrix: Option<DMatrix<f64>>,
    factor: Option<DMatrix<f64>>,
    inverse: Option<DMatrix<f64>>,
    scale: f64,
}

impl Norm {
    pub fn l1() -> Self {
        Self::plain(NormKind::L1)
    }

    pub fn l2() -> Self {
        Self::plain(NormKind::L2)
    }

    pub fn linf() -> Self {
        Self::plain(NormKind::Linf)
    }

    /// `‖v‖_M = sqrt(⟨v, M v⟩)` for a symmetric positive definite `M`.
    pub fn weighted(m: DMatrix<f64>) -> Result<Self> {
        Self::with_matrix(NormKind::WeightedL2, m)
    }

    /// Norm induced by the Gram matrix of a function basis.
    pub fn gram(g: DMatrix<f64>) -> Result<Self> {
        Self::with_matrix(NormKind::GramL2, g)
    }

    fn plain(kind: NormKind) -> Self {
        Self {
            kind,
            matrix: None,
            factor: None,
            inverse: None,
            scale: 1.0,
        }
    }

    fn with_matrix(kind: NormKind, m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument("empty norm matrix".into()));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("norm matrix".into()));
        }
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-12 * m.amax().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "norm matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let sym = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let max_eig = eig.eigenvalues.max();
        let min_eig = eig.eigenvalues.min();
        if max_eig <= 0.0 || min_eig <= SPD_RELATIVE_TOL * max_eig {
            return Err(Error::NotPositiveDefinite { min_eig, max_eig });
        }
        // R = Λ^{1/2} Qᵀ, so RᵀR = Q Λ Qᵀ = M.
        let n = sym.nrows();
        let mut factor = eig.eigenvectors.transpose();
        let mut inverse = DMatrix::zeros(n, n);
        for i in 0..n {
            let lam = eig.eigenvalues[i];
            factor.row_mut(i).scale_mut(lam.sqrt());
            let q = eig.eigenvectors.column(i);
            inverse += (&q * q.transpose()) / lam;
        }
        Ok(Self {
            kind,
            matrix: Some(sym),
            factor: Some(factor),
            inverse: Some(inverse),
            scale: 1.0,
        })
    }

    /// The same norm multiplied by `c > 0`.
    pub fn scaled(mut self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidArgument(format!("norm scale must be positive, got {c}")));
        }
        self.scale *= c;
        Ok(self)
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        self.matrix.as_ref()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Dimension fixed by the weight matrix, if any.
    pub fn dim(&self) -> Option<usize> {
        self.matrix.as_ref().map(|m| m.nrows())
    }

    /// `ℓ1` and `ℓ∞` balls are polytopes.
    pub fn is_polyhedral(&self) -> bool {
        matches!(self.kind, NormKind::L1 | NormKind::Linf)
    }

    pub fn is_strictly_convex(&self) -> bool {
        !self.is_polyhedral()
    }

    /// Factor `S` with `‖v‖ = ‖S v‖₂` for the Euclidean-type kinds (scale folded in).
    /// `None` for polyhedral norms.
    pub fn euclidean_factor(&self, n: usize) -> Option<DMatrix<f64>> {
        match self.kind {
            NormKind::L2 => Some(DMatrix::identity(n, n) * self.scale),
            NormKind::WeightedL2 | NormKind::GramL2 => {
                self.factor.as_ref().map(|f| f * self.scale)
            }
            _ => None,
        }
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidArgument("zero-dimensional vector".into()));
        }
        match self.dim() {
            Some(d) if d != n => Err(Error::DimensionMismatch { expected: d, got: n }),
            _ => Ok(()),
        }
    }

    /// `‖v‖`, with dimension checking.
    pub fn eval(&self, v: &DVector<f64>) -> Result<f64> {
        self.check_dim(v.len())?;
        Ok(self.apply(v.as_slice()))
    }

    /// `‖v‖` without dimension checks; callers guarantee the length.
    pub fn apply(&self, v: &[f64]) -> f64 {
        let raw = match self.kind {
            NormKind::L1 => v.iter().map(|x| x.abs()).sum(),
            NormKind::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormKind::Linf => v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
            NormKind::WeightedL2 | NormKind::GramL2 => {
                let r = self.factor.as_ref().expect("matrix norm without factor");
                debug_assert_eq!(r.ncols(), v.len());
                let mut acc = 0.0;
                for i in 0..r.nrows() {
                    let mut s = 0.0;
                    for (j, x) in v.iter().enumerate() {
                        s += r[(i, j)] * x;
                    }
                    acc += s * s;
                }
                acc.sqrt()
            }
        };
        self.scale * raw
    }

    /// An element of the subdifferential of `‖·‖` at `v`.
    ///
    /// At `v = 0` the zero vector is returned. For `ℓ1` zero coordinates get
    /// a zero entry; for `ℓ∞` the first coordinate of maximal magnitude is used.
    pub fn subgradient(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(v.len())?;
        let n = v.len();
        let mut s = DVector::zeros(n);
        if v.iter().all(|x| *x == 0.0) {
            return Ok(s);
        }
        match self.kind {
            NormKind::L1 => {
                for i in 0..n {
                    s[i] = sign(v[i]);
                }
            }
            NormKind::L2 => {
                s = v / v.norm();
            }
            NormKind::Linf => {
                let mut best = 0;
                for i in 1..n {
                    if v[i].abs() > v[best].abs() {
                        best = i;
                    }
                }
                s[best] = sign(v[best]);
            }
            NormKind::WeightedL2 | NormKind::GramL2 => {
                let m = self.matrix.as_ref().expect("matrix norm without matrix");
                let mv = m * v;
                let nv = v.dot(&mv).sqrt();
                s = mv / nv;
            }
        }
        Ok(s * self.scale)
    }

    /// Dual norm `sup{⟨s, v⟩ : ‖v‖ ≤ 1}`.
    pub fn dual(&self, s: &DVector<f64>) -> Result<f64> {
        self.check_dim(s.len())?;
        let raw = match self.kind {
            NormKind::L1 => s.amax(),
            NormKind::L2 => s.norm(),
            NormKind::Linf => s.iter().map(|x| x.abs()).sum(),
            NormKind::WeightedL2 | NormKind::GramL2 => {
                let inv = self.inverse.as_ref().expect("matrix norm without inverse");
                s.dot(&(inv * s)).max(0.0).sqrt()
            }
        };
        Ok(raw / self.scale)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    fn triangle_metric() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[4.01933, -2.038, -2.038, 14.6273])
    }

    #[test]
    fn l1_value() {
        assert_eq!(Norm::l1().eval(&dvector![1.0, -2.0]).unwrap(), 3.0);
    }

    #[test]
    fn weighted_identity_is_euclidean() {
        let n = Norm::weighted(DMatrix::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(n.eval(&dvector![3.0, 4.0]).unwrap(), 5.0, epsilon = 1e-14);
    }

    #[test]
    fn weighted_triangle_matrix() {
        let n = Norm::weighted(triangle_metric()).unwrap();
        let v = n.eval(&dvector![1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(v, 4.01933_f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(v, 2.004827, epsilon = 1e-6);
    }

    #[test]
    fn subgradients_of_examples() {
        let s = Norm::l2().subgradient(&dvector![3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(s, dvector![0.6, 0.8], epsilon = 1e-15);
        let s = Norm::l1().subgradient(&dvector![1.0, -2.0]).unwrap();
        assert_eq!(s, dvector![1.0, -1.0]);
        let s = Norm::l1().subgradient(&dvector![0.0, 5.0]).unwrap();
        assert_eq!(s, dvector![0.0, 1.0]);
        // subgradient inequality on a grid of w
        let v = dvector![0.0, 5.0];
        for i in -10..=10 {
            for j in -10..=10 {
                let w = dvector![i as f64 * 0.7, j as f64 * 0.9];
                let lhs = Norm::l1().eval(&w).unwrap();
                let rhs = 5.0 + s.dot(&(&w - &v));
                assert!(lhs >= rhs - 1e-12);
            }
        }
    }

    #[test]
    fn zero_subgradient_is_zero() {
        for n in [Norm::l1(), Norm::l2(), Norm::linf()] {
            assert_eq!(n.subgradient(&dvector![0.0, 0.0]).unwrap(), dvector![0.0, 0.0]);
        }
    }

    #[test]
    fn rejects_bad_matrices() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(Norm::weighted(m), Err(Error::NotPositiveDefinite { .. })));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(Norm::weighted(m).is_err());
        let n = Norm::weighted(triangle_metric()).unwrap();
        assert!(matches!(
            n.eval(&dvector![1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn factor_reproduces_matrix() {
        let n = Norm::weighted(triangle_metric()).unwrap();
        let r = n.euclidean_factor(2).unwrap();
        assert_abs_diff_eq!(r.transpose() * &r, triangle_metric(), epsilon = 1e-12);
    }

    #[test]
    fn dual_pairs() {
        let v = dvector![1.0, -3.0];
        assert_eq!(Norm::l1().dual(&v).unwrap(), 3.0);
        assert_eq!(Norm::linf().dual(&v).unwrap(), 4.0);
        let n = Norm::l2().scaled(2.0).unwrap();
        assert_abs_diff_eq!(n.dual(&v).unwrap(), 10f64.sqrt() / 2.0, epsilon = 1e-15);
    }
}
