use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nlp::Constraint;
use crate::norm::Norm;

/// Constraint map `g(x, u)`, convex in `x` for every index point `u`.
pub trait ConstraintFamily: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_u(&self) -> usize;

    /// The constraint `g(·, u) ≤ 0` as a finite-program constraint.
    fn constraint(&self, u: &DVector<f64>) -> Constraint;

    fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        self.constraint(u).value(x)
    }

    fn describe(&self) -> String;

    /// `u ↦ g(x, u)` is convex for every `x`.
    fn convex_in_index(&self) -> bool {
        false
    }
}

impl fmt::Debug for dyn ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// Scalar feature of an index point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum IndexFeature {
    Const {},
    Coord { index: usize },
    Cos { index: usize },
    Sin { index: usize },
    Pow { index: usize, exponent: i32 },
}

impl IndexFeature {
    pub fn eval(&self, u: &DVector<f64>) -> f64 {
        match *self {
            IndexFeature::Const {} => 1.0,
            IndexFeature::Coord { index } => u[index],
            IndexFeature::Cos { index } => u[index].cos(),
            IndexFeature::Sin { index } => u[index].sin(),
            IndexFeature::Pow { index, exponent } => u[index].powi(exponent),
        }
    }

    fn max_index(&self) -> Option<usize> {
        match *self {
            IndexFeature::Const {} => None,
            IndexFeature::Coord { index }
            | IndexFeature::Cos { index }
            | IndexFeature::Sin { index }
            | IndexFeature::Pow { index, .. } => Some(index),
        }
    }
}

/// One term `φ(u) (a · x + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineTerm {
    pub feature: IndexFeature,
    pub a: DVector<f64>,
    pub b: f64,
}

/// `g(x, u) = Σ_k φ_k(u) (a_k · x + b_k)`: affine in `x` with
/// index-dependent coefficients.
#[derive(Clone, Debug)]
pub struct AffineFamily {
    dim_x: usize,
    dim_u: usize,
    terms: Vec<AffineTerm>,
}

impl AffineFamily {
    pub fn new(dim_x: usize, dim_u: usize, terms: Vec<AffineTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("affine family without terms".into()));
        }
        for t in &terms {
            if t.a.len() != dim_x {
                return Err(Error::DimensionMismatch { expected: dim_x, got: t.a.len() });
            }
            if let Some(i) = t.feature.max_index() {
                if i >= dim_u {
                    return Err(Error::DimensionMismatch { expected: dim_u, got: i + 1 });
                }
            }
            if !(t.b.is_finite() && t.a.iter().all(|v| v.is_finite())) {
                return Err(Error::NonFinite("affine family coefficient".into()));
            }
        }
        Ok(Self { dim_x, dim_u, terms })
    }

    pub fn terms(&self) -> &[AffineTerm] {
        &self.terms
    }
}

impl ConstraintFamily for AffineFamily {
    fn dim_x(&self) -> usize {
        self.dim_x
    }
    fn dim_u(&self) -> usize {
        self.dim_u
    }
    fn constraint(&self, u: &DVector<f64>) -> Constraint {
        let mut a = DVector::zeros(self.dim_x);
        let mut b = 0.0;
        for t in &self.terms {
            let phi = t.feature.eval(u);
            a.axpy(phi, &t.a, 1.0);
            b += phi * t.b;
        }
        Constraint::Affine { a, b: -b }
    }
    fn describe(&self) -> String {
        format!("affine family with {} terms", self.terms.len())
    }
}

/// `g(x, u) = ‖S x − P u − c₀‖ − q · x − r`.
#[derive(Clone, Debug)]
pub struct NormBallFamily {
    pub norm: Norm,
    pub map: DMatrix<f64>,
    pub index_map: DMatrix<f64>,
    pub shift: DVector<f64>,
    pub slope: DVector<f64>,
    pub offset: f64,
}

impl NormBallFamily {
    pub fn new(
        norm: Norm,
        map: DMatrix<f64>,
        index_map: DMatrix<f64>,
        shift: DVector<f64>,
        slope: DVector<f64>,
        offset: f64,
    ) -> Result<Self> {
        let m = map.nrows();
        if index_map.nrows() != m || shift.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: index_map.nrows() });
        }
        if slope.len() != map.ncols() {
            return Err(Error::DimensionMismatch { expected: map.ncols(), got: slope.len() });
        }
        if let Some(d) = norm.dim() {
            if d != m {
                return Err(Error::DimensionMismatch { expected: d, got: m });
            }
        }
        Ok(Self { norm, map, index_map, shift, slope, offset })
    }

    /// `‖x_sel − u‖ ≤ t` for the decision `x = (t, x_sel)`.
    pub fn cover(norm: Norm, dim: usize) -> Self {
        let mut map = DMatrix::zeros(dim, dim + 1);
        map.view_mut((0, 1), (dim, dim)).fill_with_identity();
        let mut slope = DVector::zeros(dim + 1);
        slope[0] = 1.0;
        Self {
            norm,
            map,
            index_map: DMatrix::identity(dim, dim),
            shift: DVector::zeros(dim),
            slope,
            offset: 0.0,
        }
    }
}

impl ConstraintFamily for NormBallFamily {
    fn dim_x(&self) -> usize {
        self.map.ncols()
    }
    fn dim_u(&self) -> usize {
        self.index_map.ncols()
    }
    fn constraint(&self, u: &DVector<f64>) -> Constraint {
        Constraint::NormBall {
            norm: self.norm.clone(),
            map: self.map.clone(),
            center: &self.index_map * u + &self.shift,
            slope: self.slope.clone(),
            offset: self.offset,
        }
    }
    fn value(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let v = &self.map * x - &self.index_map * u - &self.shift;
        self.norm.apply(v.as_slice()) - self.slope.dot(x) - self.offset
    }
    fn describe(&self) -> String {
        format!("{:?} norm-ball family", self.norm.kind())
    }
    fn convex_in_index(&self) -> bool {
        true
    }
}
