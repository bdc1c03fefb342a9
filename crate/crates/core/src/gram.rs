//! Gram matrices of function bases under `L²` inner products.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Number of Gauss–Legendre nodes used for every Gram entry.
pub const GRAM_NODES: usize = 64;

#[derive(Clone)]
pub enum BasisFunction {
    /// `x ↦ x^degree`
    Monomial(u32),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for BasisFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisFunction::Monomial(d) => write!(f, "Monomial({d})"),
            BasisFunction::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl BasisFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            BasisFunction::Monomial(d) => x.powi(*d as i32),
            BasisFunction::Custom(g) => g(x),
        }
    }

    pub fn monomials(count: usize) -> Vec<BasisFunction> {
        (0..count as u32).map(BasisFunction::Monomial).collect()
    }
}

/// `⟨f, g⟩ = ∫_a^b f g dx`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct L2InnerProduct {
    pub lower: f64,
    pub upper: f64,
}

impl L2InnerProduct {
    pub fn unit_interval() -> Self {
        Self { lower: 0.0, upper: 1.0 }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `G_ij = ⟨b_i, b_j⟩` by fixed 64-node Gauss–Legendre quadrature.
pub fn gram_matrix(basis: &[BasisFunction], ip: &L2InnerProduct) -> Result<DMatrix<f64>> {
    if basis.is_empty() {
        return Err(Error::InvalidArgument("empty basis".into()));
    }
    if !(ip.lower.is_finite() && ip.upper.is_finite() && ip.lower < ip.upper) {
        return Err(Error::InvalidArgument("invalid integration interval".into()));
    }
    let (nodes, weights) = gauss_legendre(GRAM_NODES);
    let half = 0.5 * (ip.upper - ip.lower);
    let mid = 0.5 * (ip.upper + ip.lower);
    let values: Vec<Vec<f64>> = basis
        .iter()
        .map(|b| nodes.iter().map(|t| b.eval(mid + half * t)).collect())
        .collect();
    let n = basis.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s: f64 = (0..GRAM_NODES)
                .map(|k| weights[k] * values[i][k] * values[j][k])
                .sum::<f64>()
                * half;
            if !s.is_finite() {
                return Err(Error::NonFinite(format!("Gram entry ({i}, {j})")));
            }
            g[(i, j)] = s;
            g[(j, i)] = s;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn monomials_degree_one() {
        let g = gram_matrix(&BasisFunction::monomials(2), &L2InnerProduct::unit_interval()).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0 / 3.0]);
        assert_abs_diff_eq!(g, expect, epsilon = 1e-14);
    }

    #[test]
    fn constant_basis() {
        let g = gram_matrix(&[BasisFunction::Monomial(0)], &L2InnerProduct::unit_interval()).unwrap();
        assert_abs_diff_eq!(g[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn orthonormal_basis_gives_identity() {
        // shifted Legendre P0, P1, P2 normalized on [0, 1]
        let basis = vec![
            BasisFunction::Custom(Arc::new(|_| 1.0)),
            BasisFunction::Custom(Arc::new(|x| 3f64.sqrt() * (2.0 * x - 1.0))),
            BasisFunction::Custom(Arc::new(|x| 5f64.sqrt() * (6.0 * x * x - 6.0 * x + 1.0))),
        ];
        let g = gram_matrix(&basis, &L2InnerProduct::unit_interval()).unwrap();
        assert_abs_diff_eq!(g, DMatrix::identity(3, 3), epsilon = 1e-13);
    }

    #[test]
    fn hilbert_entries_up_to_degree_eight() {
        let g = gram_matrix(&BasisFunction::monomials(9), &L2InnerProduct::unit_interval()).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                assert_abs_diff_eq!(g[(i, j)], 1.0 / (i + j + 1) as f64, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn quadrature_weights_sum_to_two() {
        let (x, w) = gauss_legendre(GRAM_NODES);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn non_finite_basis_is_reported() {
        let basis = vec![BasisFunction::Custom(Arc::new(|x| 1.0 / (x - x)))];
        assert!(matches!(
            gram_matrix(&basis, &L2InnerProduct::unit_interval()),
            Err(Error::NonFinite(_))
        ));
    }
}
