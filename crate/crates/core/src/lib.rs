//! Convex semi-infinite programming through sampled-constraint relaxations,
//! with Chebyshev centers and worst-case optimal recovery built on top.

pub mod bench;
pub mod chebyshev;
pub mod domain;
pub mod error;
pub mod global;
pub mod gram;
pub mod nlp;
pub mod norm;
pub mod sampling;
pub mod sip;

pub use domain::{affine_parametrize, coordinate_parametrize, feasibility_residual, AffineParametrization, BoxDomain, ConstraintSet, Inequality};
pub use error::{Error, Result};
pub use norm::{Norm, NormKind};
