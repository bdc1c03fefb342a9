//! Chebyshev centers of compact sets and worst-case optimal recovery from
//! linear measurements, both posed as convex SIPs
//! `min t s.t. ‖S x − P k‖ ≤ t for all k ∈ K`.

mod circumscription;
mod learning;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{BoxDomain, ConstraintSet};
use crate::error::{Error, Result};
use crate::global::{GlobalConfig, GlobalResult};
use crate::nlp::{Linear, Quadratic, SmoothConvex};
use crate::norm::Norm;
use crate::sip::{
    extract_optimizer_with, extreme, solve_sip_value, NormBallFamily, PathOptions, RegPath, SipProblem,
};

pub use circumscription::{check_ball, circumscription_check, worst_violation, Circumscription, CIRCUMSCRIPTION_TOL, MIN_PROBES};
pub use learning::{
    build_learning_sip, build_rkhs_sip, evaluation_matrix, free_coefficient_box, learning_center,
    LearningMetric, LearningResult, LearningTask, RkhsTask,
};

/// Relative inflation of the bounding box of `K` used as the default center box.
pub const SEARCH_INFLATION: f64 = 0.5;
/// `t_max` is this multiple of the center-box diameter.
pub const RADIUS_CAP_FACTOR: f64 = 1.1;
/// Polytope vertices seed the outer search up to this dimension.
pub const VERTEX_SEEDING_MAX_DIM: usize = 4;

#[derive(Clone, Debug)]
pub struct ChebyshevTask {
    /// The set `K` in index coordinates.
    pub set: ConstraintSet,
    pub norm: Norm,
    /// Box over center coordinates; defaults to the inflated bounding box of `K`.
    pub search: Option<BoxDomain>,
    /// `(S, P)` for the residual `S x − P k`; identity maps when absent.
    pub maps: Option<(DMatrix<f64>, DMatrix<f64>)>,
    /// Affine equalities `A x = b` imposed on the center.
    pub center_equalities: Option<(DMatrix<f64>, DVector<f64>)>,
    pub vertex_seeding: bool,
    pub tuple_size: Option<usize>,
}

impl ChebyshevTask {
    pub fn new(set: ConstraintSet, norm: Norm) -> Self {
        Self {
            set,
            norm,
            search: None,
            maps: None,
            center_equalities: None,
            vertex_seeding: true,
            tuple_size: None,
        }
    }

    pub fn with_search(mut self, bx: BoxDomain) -> Self {
        self.search = Some(bx);
        self
    }

    pub fn with_maps(mut self, s: DMatrix<f64>, p: DMatrix<f64>) -> Self {
        self.maps = Some((s, p));
        self
    }

    pub fn with_center_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.center_equalities = Some((a, b));
        self
    }

    pub fn with_vertex_seeding(mut self, on: bool) -> Self {
        self.vertex_seeding = on;
        self
    }

    pub fn with_tuple_size(mut self, n: usize) -> Self {
        self.tuple_size = Some(n);
        self
    }

    /// Dimension of the center.
    pub fn center_dim(&self) -> usize {
        match &self.maps {
            Some((s, _)) => s.ncols(),
            None => self.set.dim(),
        }
    }

    fn validate(&self) -> Result<()> {
        let l = self.center_dim();
        let m = match &self.maps {
            Some((s, p)) => {
                if p.nrows() != s.nrows() {
                    return Err(Error::DimensionMismatch { expected: s.nrows(), got: p.nrows() });
                }
                if p.ncols() != self.set.dim() {
                    return Err(Error::DimensionMismatch { expected: self.set.dim(), got: p.ncols() });
                }
                s.nrows()
            }
            None => self.set.dim(),
        };
        if let Some(d) = self.norm.dim() {
            if d != m {
                return Err(Error::DimensionMismatch { expected: m, got: d });
            }
        }
        if let Some(bx) = &self.search {
            if bx.dim() != l {
                return Err(Error::DimensionMismatch { expected: l, got: bx.dim() });
            }
        }
        if let Some((a, b)) = &self.center_equalities {
            if a.ncols() != l || a.nrows() != b.len() {
                return Err(Error::DimensionMismatch { expected: l, got: a.ncols() });
            }
        }
        Ok(())
    }

    /// Center box: the given one, else the (tight, when computable)
    /// bounding box of `K` inflated by [`SEARCH_INFLATION`].
    pub fn search_box(&self) -> Result<BoxDomain> {
        if let Some(bx) = &self.search {
            return Ok(bx.clone());
        }
        if self.maps.is_some() {
            return Err(Error::InvalidArgument("a center box is required when the residual maps are not identities".into()));
        }
        let tight = if self.set.inequalities().is_empty() && self.set.equalities().is_none() {
            None
        } else {
            extreme::tight_bbox(&self.set)
        };
        Ok(tight.unwrap_or_else(|| self.set.bbox().clone()).inflated(SEARCH_INFLATION))
    }
}

/// `max ‖a − b‖` over `a, b` in the box: exact by sign enumeration in low
/// dimension, a triangle-inequality bound otherwise.
pub fn box_diameter(norm: &Norm, bx: &BoxDomain) -> f64 {
    let w = bx.width();
    let n = w.len();
    if n <= 12 {
        let mut best: f64 = 0.0;
        let mut v = w.clone();
        // the sign of one coordinate can be fixed by symmetry
        for mask in 0..(1usize << n.saturating_sub(1)) {
            for i in 0..n {
                v[i] = if i > 0 && mask >> (i - 1) & 1 == 1 { -w[i] } else { w[i] };
            }
            best = best.max(norm.apply(v.as_slice()));
        }
        best
    } else {
        let mut e = DVector::zeros(n);
        let mut total = 0.0;
        for i in 0..n {
            e[i] = w[i];
            total += norm.apply(e.as_slice());
            e[i] = 0.0;
        }
        total
    }
}

/// Bound on `‖S x − P k‖` over the center box and `K`'s bounding box.
fn residual_bound(norm: &Norm, s: &DMatrix<f64>, p: &DMatrix<f64>, search: &BoxDomain, kbox: &BoxDomain) -> f64 {
    let mid = s * search.center() - p * kbox.center();
    let mut total = norm.apply(mid.as_slice());
    for (j, h) in search.width().iter().enumerate() {
        total += 0.5 * h * norm.apply(s.column(j).clone_owned().as_slice());
    }
    for (j, h) in kbox.width().iter().enumerate() {
        total += 0.5 * h * norm.apply(p.column(j).clone_owned().as_slice());
    }
    total
}

/// Chebyshev SIP in the decision `(t, x)`: minimize `t` subject to
/// `‖S x − P k‖ ≤ t` for all `k ∈ K`.
pub fn build_chebyshev_sip(task: &ChebyshevTask) -> Result<SipProblem> {
    task.validate()?;
    let l = task.center_dim();
    let search = task.search_box()?;
    let (s, p) = match &task.maps {
        Some((s, p)) => (s.clone(), p.clone()),
        None => (DMatrix::identity(l, l), DMatrix::identity(l, l)),
    };
    let reach = if task.maps.is_none() {
        box_diameter(&task.norm, &search)
    } else {
        residual_bound(&task.norm, &s, &p, &search, task.set.bbox())
    };
    let t_max = if reach > 0.0 { RADIUS_CAP_FACTOR * reach } else { 1.0 };

    let m = s.nrows();
    let mut map = DMatrix::zeros(m, l + 1);
    map.view_mut((0, 1), (m, l)).copy_from(&s);
    let mut slope = DVector::zeros(l + 1);
    slope[0] = 1.0;
    let family = NormBallFamily::new(task.norm.clone(), map, p, DVector::zeros(m), slope, 0.0)?;

    let mut bounds = vec![(0.0, t_max)];
    bounds.extend(search.lower().iter().zip(search.upper().iter()).map(|(a, b)| (*a, *b)));
    let state_box = BoxDomain::from_bounds(&bounds)?;

    // Slater point: the largest radius at a point of K (or the box center)
    let mut x0 = if task.maps.is_none() { task.set.feasible_point().clone() } else { search.center() };
    search.clip(&mut x0);
    let mut slater = DVector::zeros(l + 1);
    slater[0] = t_max;
    slater.rows_mut(1, l).copy_from(&x0);

    let objective: Arc<dyn SmoothConvex> = Arc::new(Linear::coordinate(l + 1, 0));
    let mut sip = SipProblem::new(objective, Arc::new(family), state_box, task.set.clone(), slater)?;
    let mut decision_dim = l + 1;
    if let Some((a, b)) = &task.center_equalities {
        let mut ax = DMatrix::zeros(a.nrows(), l + 1);
        ax.view_mut((0, 1), (a.nrows(), l)).copy_from(a);
        let rank = a.clone().svd(false, false).rank(1e-10 * a.amax().max(1e-300));
        decision_dim = 1 + l - rank;
        sip = sip.with_state_equalities(ax, b.clone())?;
    }
    let n = task.tuple_size.unwrap_or(decision_dim);
    sip = sip.with_tuple_size(n)?;
    if task.vertex_seeding {
        let seeds = vertex_seeds(&sip, n);
        if !seeds.is_empty() {
            sip = sip.with_seed_tuples(seeds)?;
        }
    }
    Ok(sip)
}

/// Tuples of polytope vertices (search coordinates) for seeding.
fn vertex_seeds(sip: &SipProblem, n: usize) -> Vec<Vec<DVector<f64>>> {
    let set = sip.search_set();
    if set.dim() > VERTEX_SEEDING_MAX_DIM {
        return Vec::new();
    }
    let Some(verts) = set.polytope_vertices() else {
        return Vec::new();
    };
    if verts.is_empty() {
        return Vec::new();
    }
    let v = verts.len();
    let mut out = Vec::new();
    // every n-subset when there are few, else cyclic windows
    let mut idx: Vec<usize> = (0..n).collect();
    if v >= n && binomial(v, n) <= 64 {
        loop {
            out.push(idx.iter().map(|&i| verts[i].clone()).collect());
            let mut i = n;
            let mut advanced = false;
            while i > 0 {
                i -= 1;
                if idx[i] < v - n + i {
                    idx[i] += 1;
                    for j in i + 1..n {
                        idx[j] = idx[j - 1] + 1;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
    } else {
        for start in 0..v.min(64) {
            out.push((0..n).map(|j| verts[(start + j) % v].clone()).collect());
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> usize {
    let mut r: usize = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChebyshevResult {
    /// Chebyshev radius from the outer maximization of the relaxed value.
    pub radius: f64,
    /// Limit of the regularization path (center coordinates only).
    pub center: DVector<f64>,
    /// Radius component of the path limit.
    pub path_radius: f64,
    /// Certificate tuple of the value run, in index coordinates.
    pub active_points: Vec<DVector<f64>>,
    pub path: RegPath,
    /// Center returned by the unregularized relaxation at the certificate.
    pub unregularized_center: DVector<f64>,
    pub global: GlobalResult,
}

/// `ψ(t, x) = ½ t² + ½‖x − m‖²` with `m` the center of the search box, so
/// translating the task translates the regularized path with it.
pub fn default_regularizer(task: &ChebyshevTask) -> Result<Arc<dyn SmoothConvex>> {
    let m = task.search_box()?.center();
    let mut c = DVector::zeros(m.len() + 1);
    c.rows_mut(1, m.len()).copy_from(&m);
    Ok(Arc::new(Quadratic::isotropic(c)))
}

/// Radius by the value run, center by the regularization path.
pub fn chebyshev_center(
    task: &ChebyshevTask,
    psi: Arc<dyn SmoothConvex>,
    opts: &PathOptions,
    cfg: &GlobalConfig,
) -> Result<ChebyshevResult> {
    let sip = build_chebyshev_sip(task)?;
    solve_chebyshev_sip(&sip, psi, opts, cfg)
}

pub fn solve_chebyshev_sip(
    sip: &SipProblem,
    psi: Arc<dyn SmoothConvex>,
    opts: &PathOptions,
    cfg: &GlobalConfig,
) -> Result<ChebyshevResult> {
    let l = sip.dim_x() - 1;
    let value = solve_sip_value(sip, cfg)?;
    let path = extract_optimizer_with(sip, psi, opts, cfg)?;
    let limit = &path.limit;
    Ok(ChebyshevResult {
        radius: value.value,
        center: limit.rows(1, l).into_owned(),
        path_radius: limit[0],
        active_points: value.certificate.tuple.clone(),
        unregularized_center: value.certificate.x_relaxed.rows(1, l).into_owned(),
        path,
        global: value.global,
    })
}
