//! Optimal recovery from linear measurements: the worst-case optimal
//! coefficients of a model given data `Λ w = y` and a coefficient box `Q`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{build_chebyshev_sip, default_regularizer, solve_chebyshev_sip, ChebyshevResult, ChebyshevTask};
use crate::domain::{BoxDomain, ConstraintSet};
use crate::error::{Error, Result};
use crate::global::GlobalConfig;
use crate::gram::BasisFunction;
use crate::nlp::SmoothConvex;
use crate::norm::Norm;
use crate::sip::{PathOptions, SipProblem};

/// How the distance between the center `c` and a model `w` is measured.
#[derive(Clone, Debug)]
pub enum LearningMetric {
    /// A norm on `c − w`; center and model share one basis.
    Coefficient(Norm),
    /// Gram matrix of the stacked bases `(φ, ψ)`, applied to `(c, −w)`.
    JointGram(DMatrix<f64>),
}

#[derive(Clone, Debug)]
pub struct LearningTask {
    pub search_basis: Vec<BasisFunction>,
    pub model_basis: Vec<BasisFunction>,
    /// `Λ_ij = λ_i(ψ_j)`.
    pub measurements: DMatrix<f64>,
    pub data: DVector<f64>,
    /// The coefficient box `Q`.
    pub coeff_bounds: BoxDomain,
    pub metric: LearningMetric,
    /// Keep the center on the data slice `Λ c = y` (shared basis only).
    pub center_on_data: bool,
    pub center_box: Option<BoxDomain>,
}

impl LearningTask {
    /// Shared basis, coefficient-space norm, center kept on the data slice.
    pub fn shared_basis(
        basis: Vec<BasisFunction>,
        measurements: DMatrix<f64>,
        data: DVector<f64>,
        coeff_bounds: BoxDomain,
        norm: Norm,
    ) -> Self {
        Self {
            search_basis: basis.clone(),
            model_basis: basis,
            measurements,
            data,
            coeff_bounds,
            metric: LearningMetric::Coefficient(norm),
            center_on_data: true,
            center_box: None,
        }
    }

    pub fn with_center_box(mut self, bx: BoxDomain) -> Self {
        self.center_box = Some(bx);
        self
    }

    pub fn with_center_on_data(mut self, on: bool) -> Self {
        self.center_on_data = on;
        self
    }

    fn validate(&self) -> Result<()> {
        let d = self.model_basis.len();
        let l = self.search_basis.len();
        if self.measurements.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.measurements.ncols() });
        }
        if self.measurements.nrows() != self.data.len() {
            return Err(Error::DimensionMismatch { expected: self.measurements.nrows(), got: self.data.len() });
        }
        if self.coeff_bounds.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.coeff_bounds.dim() });
        }
        match &self.metric {
            LearningMetric::Coefficient(_) if l != d => {
                return Err(Error::InvalidArgument("a coefficient norm needs one shared basis".into()))
            }
            LearningMetric::JointGram(g) if g.nrows() != l + d || g.ncols() != l + d => {
                return Err(Error::DimensionMismatch { expected: l + d, got: g.nrows() })
            }
            _ => {}
        }
        if self.center_on_data && l != d {
            return Err(Error::InvalidArgument("the center can only be kept on the data slice with a shared basis".into()));
        }
        Ok(())
    }

    /// The model class `{w ∈ Q : Λ w = y}`.
    pub fn model_class(&self) -> Result<ConstraintSet> {
        self.validate()?;
        if self.data.is_empty() {
            return Ok(ConstraintSet::boxed(self.coeff_bounds.clone()));
        }
        ConstraintSet::new(
            self.coeff_bounds.clone(),
            Vec::new(),
            Some((self.measurements.clone(), self.data.clone())),
        )
        .map_err(|e| match e {
            Error::InconsistentSystem(r) => Error::InconsistentSystem(r),
            Error::EmptySet(m) => Error::EmptySet(format!("the data admit no coefficients in the box: {m}")),
            other => other,
        })
    }

    /// The equivalent Chebyshev task.
    pub fn chebyshev_task(&self) -> Result<ChebyshevTask> {
        let set = self.model_class()?;
        let l = self.search_basis.len();
        let d = self.model_basis.len();
        let mut task = match &self.metric {
            LearningMetric::Coefficient(norm) => ChebyshevTask::new(set, norm.clone()),
            LearningMetric::JointGram(g) => {
                let mut s = DMatrix::zeros(l + d, l);
                s.view_mut((0, 0), (l, l)).fill_with_identity();
                let mut p = DMatrix::zeros(l + d, d);
                p.view_mut((l, 0), (d, d)).fill_with_identity();
                let bx = match &self.center_box {
                    Some(b) => b.clone(),
                    None if l == d => ChebyshevTask::new(set.clone(), Norm::l2()).search_box()?,
                    None => return Err(Error::InvalidArgument("a center box is required for distinct bases".into())),
                };
                ChebyshevTask::new(set, Norm::gram(g.clone())?).with_maps(s, p).with_search(bx)
            }
        };
        if let Some(b) = &self.center_box {
            task = task.with_search(b.clone());
        }
        if self.center_on_data && !self.data.is_empty() {
            task = task.with_center_equalities(self.measurements.clone(), self.data.clone());
        }
        Ok(task)
    }
}

/// Point-evaluation data through a kernel-evaluation matrix.
#[derive(Clone, Debug)]
pub struct RkhsTask {
    pub points: Vec<f64>,
    pub data: DVector<f64>,
    pub search_basis: Vec<BasisFunction>,
    pub model_basis: Vec<BasisFunction>,
    pub coeff_bounds: BoxDomain,
    pub metric: LearningMetric,
    pub center_on_data: bool,
    pub center_box: Option<BoxDomain>,
}

impl RkhsTask {
    pub fn shared_basis(points: Vec<f64>, data: DVector<f64>, basis: Vec<BasisFunction>, coeff_bounds: BoxDomain, norm: Norm) -> Self {
        Self {
            points,
            data,
            search_basis: basis.clone(),
            model_basis: basis,
            coeff_bounds,
            metric: LearningMetric::Coefficient(norm),
            center_on_data: true,
            center_box: None,
        }
    }

    pub fn learning_task(&self) -> LearningTask {
        LearningTask {
            search_basis: self.search_basis.clone(),
            model_basis: self.model_basis.clone(),
            measurements: evaluation_matrix(&self.points, &self.model_basis),
            data: self.data.clone(),
            coeff_bounds: self.coeff_bounds.clone(),
            metric: self.metric.clone(),
            center_on_data: self.center_on_data,
            center_box: self.center_box.clone(),
        }
    }
}

/// `K_ij = ψ_j(x_i)`.
pub fn evaluation_matrix(points: &[f64], basis: &[BasisFunction]) -> DMatrix<f64> {
    DMatrix::from_fn(points.len(), basis.len(), |i, j| basis[j].eval(points[i]))
}

pub fn build_learning_sip(task: &LearningTask) -> Result<SipProblem> {
    build_chebyshev_sip(&task.chebyshev_task()?)
}

pub fn build_rkhs_sip(task: &RkhsTask) -> Result<SipProblem> {
    build_learning_sip(&task.learning_task())
}

/// Coefficient box where the last `D − S` coefficients range over `free`
/// and the first `S` are whatever the data force, bounded exactly by
/// interval arithmetic on `w_pinned = A⁻¹(y − B w_free)`.
pub fn free_coefficient_box(measurements: &DMatrix<f64>, data: &DVector<f64>, free: &BoxDomain) -> Result<BoxDomain> {
    let s = measurements.nrows();
    let d = measurements.ncols();
    if free.dim() != d - s.min(d) || s > d {
        return Err(Error::DimensionMismatch { expected: d.saturating_sub(s), got: free.dim() });
    }
    let a = measurements.columns(0, s).into_owned();
    let b = measurements.columns(s, d - s).into_owned();
    let lu = a.lu();
    let base = lu
        .solve(data)
        .ok_or_else(|| Error::InvalidArgument("the pinned block of the measurements is singular".into()))?;
    let m = lu
        .solve(&b)
        .ok_or_else(|| Error::InvalidArgument("the pinned block of the measurements is singular".into()))?;
    let mut lo = DVector::zeros(d);
    let mut hi = DVector::zeros(d);
    for i in 0..s {
        let (mut l, mut h) = (base[i], base[i]);
        for j in 0..d - s {
            let e1 = -m[(i, j)] * free.lower()[j];
            let e2 = -m[(i, j)] * free.upper()[j];
            l += e1.min(e2);
            h += e1.max(e2);
        }
        // the interval is attained, a hair of slack keeps vertices inside
        let pad = 1e-9 * (1.0 + l.abs().max(h.abs()));
        lo[i] = l - pad;
        hi[i] = h + pad;
    }
    for j in 0..d - s {
        lo[s + j] = free.lower()[j];
        hi[s + j] = free.upper()[j];
    }
    BoxDomain::new(lo, hi)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LearningResult {
    pub chebyshev: ChebyshevResult,
    /// `max |Λ c − y|` at the center (shared basis).
    pub interpolation_residual: Option<f64>,
}

impl LearningResult {
    pub fn coefficients(&self) -> &DVector<f64> {
        &self.chebyshev.center
    }
}

/// Worst-case optimal coefficients; `psi` defaults to [`default_regularizer`].
pub fn learning_center(
    task: &LearningTask,
    psi: Option<Arc<dyn SmoothConvex>>,
    opts: &PathOptions,
    cfg: &GlobalConfig,
) -> Result<LearningResult> {
    let ct = task.chebyshev_task()?;
    let sip = build_chebyshev_sip(&ct)?;
    let psi = match psi {
        Some(p) => p,
        None => default_regularizer(&ct)?,
    };
    let res = solve_chebyshev_sip(&sip, psi, opts, cfg)?;
    let interpolation_residual = (task.search_basis.len() == task.model_basis.len() && !task.data.is_empty())
        .then(|| (&task.measurements * &res.center - &task.data).amax());
    Ok(LearningResult { chebyshev: res, interpolation_residual })
}
