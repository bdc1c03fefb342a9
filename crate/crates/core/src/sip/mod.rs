//! Convex semi-infinite programs solved through the relaxed value function
//! `ρ(u₁, …, u_N)`: the optimum of the program that keeps only the sampled
//! constraints `g(·, u_i) ≤ 0`. Globally maximizing `ρ` over index tuples
//! gives the SIP value; a vanishing strictly convex regularization picks an
//! optimizer out of the relaxed argmin.

mod exchange;
pub mod extreme;
mod family;
mod path;

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

pub use exchange::{most_violated, Refined, EXCHANGE_TOL};
pub use family::{AffineFamily, AffineTerm, ConstraintFamily, IndexFeature, NormBallFamily};
pub use path::{
    default_schedule, extract_optimizer, extract_optimizer_with, MonotonicityViolation, PathOptions, PathPoint, PathQuantity,
    RegPath,
};

use crate::domain::{BoxDomain, ConstraintSet, FEASIBILITY_TOL};
use crate::error::{Error, Result};
use crate::global::{maximize_with_restarts, GlobalConfig, GlobalResult};
use crate::nlp::{
    solve_finite_convex, Constraint, FiniteConvexProgram, InnerSolution, InnerStatus, Linear, Shifted,
    SmoothConvex, WeightedSum, DEFAULT_TOL,
};
use crate::sampling::ScrambledHalton;

/// Tolerance of the re-verification solve at the certificate tuple.
pub const CERTIFICATE_TOL: f64 = 1e-10;
/// Index points farther than this from the index set are rejected by `rho_eval`.
pub const TUPLE_FEASIBILITY_TOL: f64 = 1e-8;
/// Slope of the exact penalty on the distance of a tuple from the index set.
pub const DEFAULT_PENALTY: f64 = 1e4;
/// Value given to tuples that cannot be restored onto the index set.
const UNRESTORABLE: f64 = -1e12;

/// Declared standing hypotheses, with the parts that were checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hypotheses {
    pub state_set_has_interior: bool,
    pub slater_validated: bool,
    pub index_set_compact: bool,
}

#[derive(Clone)]
pub struct SipProblem {
    objective: Arc<dyn SmoothConvex>,
    family: Arc<dyn ConstraintFamily>,
    state_box: BoxDomain,
    state_equalities: Option<(DMatrix<f64>, DVector<f64>)>,
    state_constraints: Vec<Constraint>,
    index_set: ConstraintSet,
    /// The index set in the coordinates searched by the global optimizer
    /// (its own equality slice when it has equalities).
    search_set: ConstraintSet,
    slater: DVector<f64>,
    tuple_size: usize,
    seed_tuples: Vec<Vec<DVector<f64>>>,
    penalty: f64,
    inner_tol: f64,
    hypotheses: Hypotheses,
    probes: OnceLock<Arc<Vec<DVector<f64>>>>,
    search_convex: bool,
    exchange_polish: bool,
}

impl std::fmt::Debug for SipProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SipProblem")
            .field("dim_x", &self.dim_x())
            .field("objective", &self.objective.describe())
            .field("family", &self.family.describe())
            .field("tuple_size", &self.tuple_size)
            .field("search_dim", &self.search_set.dim())
            .finish()
    }
}

impl SipProblem {
    pub fn new(
        objective: Arc<dyn SmoothConvex>,
        family: Arc<dyn ConstraintFamily>,
        state_box: BoxDomain,
        index_set: ConstraintSet,
        slater: DVector<f64>,
    ) -> Result<Self> {
        let n = state_box.dim();
        for d in [objective.dim(), family.dim_x(), slater.len()] {
            if d != n {
                return Err(Error::DimensionMismatch { expected: n, got: d });
            }
        }
        if index_set.dim() != family.dim_u() {
            return Err(Error::DimensionMismatch { expected: family.dim_u(), got: index_set.dim() });
        }
        let mut search_set = index_set.parametrized()?;
        if !search_set.inequalities().is_empty() {
            if let Some(bx) = extreme::tight_bbox(&search_set) {
                search_set = search_set.with_tighter_bbox(&bx)?;
            }
        }
        let mut sip = Self {
            objective,
            family,
            state_box,
            state_equalities: None,
            state_constraints: Vec::new(),
            index_set,
            search_set,
            slater,
            tuple_size: n,
            seed_tuples: Vec::new(),
            penalty: DEFAULT_PENALTY,
            inner_tol: DEFAULT_TOL,
            hypotheses: Hypotheses {
                state_set_has_interior: false,
                slater_validated: false,
                index_set_compact: true,
            },
            probes: OnceLock::new(),
            search_convex: false,
            exchange_polish: true,
        };
        sip.search_convex = extreme::is_convex(&sip.search_set);
        sip.refresh_hypotheses()?;
        Ok(sip)
    }

    /// Affine equalities `E x = e` on the decision.
    pub fn with_state_equalities(mut self, a: DMatrix<f64>, e: DVector<f64>) -> Result<Self> {
        if a.ncols() != self.dim_x() || a.nrows() != e.len() {
            return Err(Error::DimensionMismatch { expected: self.dim_x(), got: a.ncols() });
        }
        self.state_equalities = Some((a, e));
        self.refresh_hypotheses()?;
        Ok(self)
    }

    pub fn with_state_constraint(mut self, c: Constraint) -> Result<Self> {
        if c.dim() != self.dim_x() {
            return Err(Error::DimensionMismatch { expected: self.dim_x(), got: c.dim() });
        }
        self.state_constraints.push(c);
        self.refresh_hypotheses()?;
        Ok(self)
    }

    /// Number of index points per tuple (`N`).
    pub fn with_tuple_size(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("tuple size must be positive".into()));
        }
        self.tuple_size = n;
        Ok(self)
    }

    /// Candidate tuples (search coordinates) seeding the global optimizer.
    pub fn with_seed_tuples(mut self, seeds: Vec<Vec<DVector<f64>>>) -> Result<Self> {
        for t in &seeds {
            if t.len() != self.tuple_size || t.iter().any(|u| u.len() != self.search_set.dim()) {
                return Err(Error::DimensionMismatch { expected: self.tuple_size, got: t.len() });
            }
        }
        self.seed_tuples = seeds;
        Ok(self)
    }

    /// Whether value solves finish with the exchange refinement (on by
    /// default). Turning it off reports the raw outer maximum.
    pub fn with_exchange_polish(mut self, on: bool) -> Self {
        self.exchange_polish = on;
        self
    }

    pub fn with_penalty(mut self, penalty: f64) -> Result<Self> {
        if !(penalty > 0.0 && penalty.is_finite()) {
            return Err(Error::InvalidArgument("penalty slope must be positive".into()));
        }
        self.penalty = penalty;
        Ok(self)
    }

    pub fn with_inner_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument("inner tolerance must be positive".into()));
        }
        self.inner_tol = tol;
        Ok(self)
    }

    /// The same problem with another objective (used for regularization).
    pub fn with_objective(&self, objective: Arc<dyn SmoothConvex>) -> Result<Self> {
        if objective.dim() != self.dim_x() {
            return Err(Error::DimensionMismatch { expected: self.dim_x(), got: objective.dim() });
        }
        let mut s = self.clone();
        s.objective = objective;
        Ok(s)
    }

    pub fn dim_x(&self) -> usize {
        self.state_box.dim()
    }

    pub fn objective(&self) -> &Arc<dyn SmoothConvex> {
        &self.objective
    }

    pub fn family(&self) -> &Arc<dyn ConstraintFamily> {
        &self.family
    }

    pub fn state_box(&self) -> &BoxDomain {
        &self.state_box
    }

    pub fn state_equalities(&self) -> Option<&(DMatrix<f64>, DVector<f64>)> {
        self.state_equalities.as_ref()
    }

    pub fn index_set(&self) -> &ConstraintSet {
        &self.index_set
    }

    pub fn search_set(&self) -> &ConstraintSet {
        &self.search_set
    }

    pub fn slater(&self) -> &DVector<f64> {
        &self.slater
    }

    pub fn tuple_size(&self) -> usize {
        self.tuple_size
    }

    /// The search set is described by halfspaces and convex quadratics.
    pub fn search_set_is_convex(&self) -> bool {
        self.search_convex
    }

    pub fn seed_tuples(&self) -> &[Vec<DVector<f64>>] {
        &self.seed_tuples
    }

    pub fn hypotheses(&self) -> Hypotheses {
        self.hypotheses
    }

    /// Box of concatenated tuples searched by the global optimizer.
    pub fn tuple_box(&self) -> BoxDomain {
        self.search_set.bbox().power(self.tuple_size)
    }

    pub fn split_tuple(&self, v: &DVector<f64>) -> Vec<DVector<f64>> {
        let k = self.search_set.dim();
        (0..self.tuple_size).map(|i| v.rows(i * k, k).into_owned()).collect()
    }

    pub fn join_tuple(&self, points: &[DVector<f64>]) -> DVector<f64> {
        let k = self.search_set.dim();
        let mut v = DVector::zeros(k * points.len());
        for (i, p) in points.iter().enumerate() {
            v.rows_mut(i * k, k).copy_from(p);
        }
        v
    }

    /// Ambient index point of search coordinates `z`.
    pub fn index_point(&self, z: &DVector<f64>) -> DVector<f64> {
        self.search_set.to_ambient(z)
    }

    /// `g(x, u)` at search coordinates `z`.
    pub fn constraint_value(&self, x: &DVector<f64>, z: &DVector<f64>) -> f64 {
        self.family.value(x, &self.index_point(z))
    }

    /// Deterministic feasible probe points of the index set (search coordinates).
    pub fn probe_points(&self, count: usize, seed: u64) -> Vec<DVector<f64>> {
        let set = &self.search_set;
        let mut out = vec![set.feasible_point().clone()];
        let mut h = ScrambledHalton::new(set.dim(), seed);
        for _ in 0..count {
            let z = set.bbox().from_unit(&h.next_point());
            if set.contains(&z) {
                out.push(z);
            }
        }
        out
    }

    /// Feasible probes of the search set used by the exchange refinement:
    /// Halton points (restored when slightly outside) plus polytope vertices
    /// in low dimension.
    pub(crate) fn cached_probes(&self) -> Arc<Vec<DVector<f64>>> {
        self.probes
            .get_or_init(|| {
                let set = &self.search_set;
                let mut out = vec![set.feasible_point().clone()];
                if set.dim() <= 4 {
                    if let Some(v) = set.polytope_vertices() {
                        out.extend(v);
                    }
                }
                let mut h = ScrambledHalton::new(set.dim(), 0x9e37);
                for _ in 0..2048 {
                    let z = set.bbox().from_unit(&h.next_point());
                    let z = if set.contains(&z) { z } else { set.restore(&z) };
                    if set.contains(&z) {
                        out.push(z);
                    }
                }
                Arc::new(out)
            })
            .clone()
    }

    fn refresh_hypotheses(&mut self) -> Result<()> {
        let n = self.dim_x();
        let in_state = self.state_box.contains(&self.slater)
            && self
                .state_equalities
                .as_ref()
                .is_none_or(|(a, e)| (a * &self.slater - e).amax() <= 1e-8)
            && self.state_constraints.iter().all(|c| c.value(&self.slater) < 0.0);
        let strictly = in_state
            && self
                .probe_points(256, 1)
                .iter()
                .all(|z| self.constraint_value(&self.slater, z) < 0.0);
        self.hypotheses = Hypotheses {
            state_set_has_interior: (0..n).any(|i| !self.state_box.is_degenerate(i)),
            slater_validated: strictly,
            index_set_compact: true,
        };
        Ok(())
    }

    /// The finite program keeping the constraints at the given ambient index points.
    pub fn relaxed_program(
        &self,
        objective: &Arc<dyn SmoothConvex>,
        points: &[DVector<f64>],
    ) -> Result<FiniteConvexProgram> {
        let mut cons = self.state_constraints.clone();
        cons.extend(points.iter().map(|u| self.family.constraint(u)));
        let p = FiniteConvexProgram::new(objective.clone(), cons, self.state_box.clone())?;
        match &self.state_equalities {
            Some((a, e)) => p.with_equalities(a.clone(), e.clone()),
            None => Ok(p),
        }
    }

    /// Exact-penalty version of `ρ` on a concatenated tuple: points off the
    /// index set are restored onto it and the distance is charged at slope
    /// `penalty`.
    fn penalized_rho(&self, objective: &Arc<dyn SmoothConvex>, v: &DVector<f64>) -> f64 {
        let (points, dist) = match self.restore_tuple(v) {
            Some(r) => r,
            None => return UNRESTORABLE,
        };
        let ambient: Vec<DVector<f64>> = points.iter().map(|z| self.index_point(z)).collect();
        let Ok(p) = self.relaxed_program(objective, &ambient) else {
            return f64::NEG_INFINITY;
        };
        match solve_finite_convex(&p, &self.slater, self.inner_tol) {
            Ok(s) if s.status != InnerStatus::Infeasible => s.value - self.penalty * dist,
            _ => f64::NEG_INFINITY,
        }
    }

    /// Restored tuple points and their total distance from the originals.
    fn restore_tuple(&self, v: &DVector<f64>) -> Option<(Vec<DVector<f64>>, f64)> {
        let mut dist = 0.0;
        let mut out = Vec::with_capacity(self.tuple_size);
        for z in self.split_tuple(v) {
            if self.search_set.residual(&z) <= FEASIBILITY_TOL {
                out.push(z);
                continue;
            }
            let r = self.search_set.restore(&z);
            if self.search_set.residual(&r) > TUPLE_FEASIBILITY_TOL {
                return None;
            }
            dist += (&r - &z).norm();
            out.push(r);
        }
        Some((out, dist))
    }
}

/// `ρ` at one tuple together with the relaxed solution.
#[derive(Clone, Debug)]
pub struct RhoResult {
    /// Index points in ambient coordinates.
    pub tuple: Vec<DVector<f64>>,
    /// Index points in search coordinates.
    pub coords: Vec<DVector<f64>>,
    /// `−∞` when the relaxation is infeasible.
    pub value: f64,
    pub x_relaxed: DVector<f64>,
    pub inner: InnerSolution,
}

fn rho_with(
    sip: &SipProblem,
    objective: &Arc<dyn SmoothConvex>,
    coords: &[DVector<f64>],
    x0: &DVector<f64>,
    tol: f64,
) -> Result<RhoResult> {
    if coords.is_empty() {
        return Err(Error::InvalidArgument("empty tuple".into()));
    }
    for z in coords {
        if z.len() != sip.search_set.dim() {
            return Err(Error::DimensionMismatch { expected: sip.search_set.dim(), got: z.len() });
        }
        let r = sip.search_set.residual(z);
        if r > TUPLE_FEASIBILITY_TOL {
            return Err(Error::InvalidArgument(format!("tuple point outside the index set (residual {r:e})")));
        }
    }
    let tuple: Vec<DVector<f64>> = coords.iter().map(|z| sip.index_point(z)).collect();
    let p = sip.relaxed_program(objective, &tuple)?;
    let inner = solve_finite_convex(&p, x0, tol)?;
    let value = if inner.status == InnerStatus::Infeasible { f64::NEG_INFINITY } else { inner.value };
    Ok(RhoResult {
        tuple,
        coords: coords.to_vec(),
        value,
        x_relaxed: inner.x_star.clone(),
        inner,
    })
}

/// `ρ(tuple)` with the tuple given in search coordinates of the index set.
pub fn rho_eval(sip: &SipProblem, tuple: &[DVector<f64>], x0: &DVector<f64>) -> Result<RhoResult> {
    if x0.len() != sip.dim_x() {
        return Err(Error::DimensionMismatch { expected: sip.dim_x(), got: x0.len() });
    }
    rho_with(sip, &sip.objective, tuple, x0, sip.inner_tol)
}

/// Result of the outer maximization of `ρ`.
#[derive(Clone, Debug)]
pub struct SipSolution {
    /// Best relaxation value found: the certificate value, raised by the
    /// exchange refinement when that is enabled.
    pub value: f64,
    pub certificate: RhoResult,
    pub global: GlobalResult,
    /// Index points (search coordinates) of the refined relaxation; empty
    /// without refinement.
    pub cuts: Vec<DVector<f64>>,
}

/// SIP value by global maximization of `ρ` (single run).
pub fn solve_sip_value(sip: &SipProblem, cfg: &GlobalConfig) -> Result<SipSolution> {
    solve_sip_value_restarts(sip, cfg, 1)
}

/// SIP value, best of `restarts` global runs with derived seeds.
pub fn solve_sip_value_restarts(sip: &SipProblem, cfg: &GlobalConfig, restarts: usize) -> Result<SipSolution> {
    let mut s = solve_objective(sip, &sip.objective, cfg, restarts, &[])?;
    if sip.exchange_polish {
        let c = &s.certificate;
        let r = exchange::refine(sip, &sip.objective, &c.coords, c.x_relaxed.clone(), c.value)?;
        if r.value > s.value {
            s.value = r.value;
        }
        s.cuts = r.cuts;
    }
    Ok(s)
}

fn solve_objective(
    sip: &SipProblem,
    objective: &Arc<dyn SmoothConvex>,
    cfg: &GlobalConfig,
    restarts: usize,
    warm: &[Vec<DVector<f64>>],
) -> Result<SipSolution> {
    let bx = sip.tuple_box();
    let mut cfg = cfg.clone();
    let mut guesses: Vec<DVector<f64>> = warm.iter().map(|t| sip.join_tuple(t)).collect();
    guesses.extend(sip.seed_tuples.iter().map(|t| sip.join_tuple(t)));
    guesses.append(&mut cfg.initial_guesses);
    cfg.initial_guesses = guesses;
    if cfg.strategy == crate::global::Strategy::DifferentialEvolution {
        cfg.population = cfg.population.max(cfg.initial_guesses.len().min(4 * cfg.population));
        cfg.max_evals = cfg.max_evals.max(cfg.population);
    }
    let f = |v: &DVector<f64>| sip.penalized_rho(objective, v);
    let global = maximize_with_restarts(&f, &bx, &cfg, restarts)?;
    if global.value <= UNRESTORABLE {
        return Err(Error::GlobalFailure("no tuple on the index set was found".into()));
    }
    let (coords, _) = sip
        .restore_tuple(&global.u_star)
        .ok_or_else(|| Error::GlobalFailure("best tuple cannot be restored onto the index set".into()))?;
    let mut certificate = rho_with(sip, objective, &coords, &sip.slater, CERTIFICATE_TOL)?;
    if certificate.inner.status == InnerStatus::IterLimit {
        let coarse = rho_with(sip, objective, &coords, &sip.slater, sip.inner_tol)?;
        if coarse.inner.status == InnerStatus::Optimal {
            certificate = coarse;
        }
    }
    if !certificate.value.is_finite() {
        return Err(Error::GlobalFailure("relaxation at the certificate tuple is infeasible".into()));
    }
    Ok(SipSolution {
        value: certificate.value,
        certificate,
        global,
        cuts: Vec::new(),
    })
}

/// Checks `ψ(mid) < mean − 1e-12` on deterministic pairs in the state box.
pub fn check_strict_convexity(psi: &dyn SmoothConvex, bx: &BoxDomain) -> Result<()> {
    let n = bx.dim();
    if psi.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: psi.dim() });
    }
    let mut h = ScrambledHalton::new(2 * n, 17);
    for _ in 0..64 {
        let t = h.next_point();
        let a = bx.from_unit(&t[..n]);
        let b = bx.from_unit(&t[n..]);
        if (&a - &b).amax() < 1e-6 * (1.0 + bx.width().amax()) {
            continue;
        }
        let mid = (&a + &b) * 0.5;
        let lhs = psi.value(&mid);
        let rhs = 0.5 * (psi.value(&a) + psi.value(&b));
        if !(lhs < rhs - 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "regularizer is not strictly convex: psi(mid) = {lhs} vs mean {rhs}"
            )));
        }
    }
    Ok(())
}

/// Solution of the regularized SIP `min f + ε ψ`.
#[derive(Clone, Debug)]
pub struct RegularizedSolution {
    pub eps: f64,
    pub x: DVector<f64>,
    /// `f(x) + ε ψ(x)`
    pub value: f64,
    pub f_value: f64,
    pub psi_value: f64,
    /// Outer maximization result; its certificate is the `N`-point tuple.
    pub solution: SipSolution,
    /// Index points of the refined relaxation that produced `x`.
    pub cuts: Vec<DVector<f64>>,
    /// Largest constraint value found at `x` over the index set.
    pub max_violation: f64,
}

pub fn solve_sip_regularized(
    sip: &SipProblem,
    psi: Arc<dyn SmoothConvex>,
    eps: f64,
    cfg: &GlobalConfig,
) -> Result<RegularizedSolution> {
    check_strict_convexity(psi.as_ref(), &sip.state_box)?;
    regularized_step(sip, &psi, eps, cfg, &[])
}

pub(crate) fn regularized_step(
    sip: &SipProblem,
    psi: &Arc<dyn SmoothConvex>,
    eps: f64,
    cfg: &GlobalConfig,
    warm: &[Vec<DVector<f64>>],
) -> Result<RegularizedSolution> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("regularization weight must be positive, got {eps}")));
    }
    let obj: Arc<dyn SmoothConvex> = Arc::new(WeightedSum::regularized(sip.objective.clone(), eps, psi.clone()));
    let solution = solve_objective(sip, &obj, cfg, 1, warm)?;
    let cert = &solution.certificate;
    let refined = exchange::refine(sip, &obj, &cert.coords, cert.x_relaxed.clone(), cert.value)?;
    let x = refined.x;
    Ok(RegularizedSolution {
        eps,
        f_value: sip.objective.value(&x),
        psi_value: psi.value(&x),
        value: refined.value,
        x,
        solution,
        cuts: refined.cuts,
        max_violation: refined.max_violation,
    })
}

/// Adds `f(x) ≤ f(x̃) + 1` to the state set.
pub fn compactify(sip: &SipProblem, x_tilde: &DVector<f64>) -> Result<SipProblem> {
    if x_tilde.len() != sip.dim_x() {
        return Err(Error::DimensionMismatch { expected: sip.dim_x(), got: x_tilde.len() });
    }
    if !sip.state_box.contains(x_tilde) {
        return Err(Error::InvalidArgument("reference point outside the state set".into()));
    }
    let level = sip.objective.value(x_tilde) + 1.0;
    let c = match sip.objective.as_linear() {
        Some((a, d)) => Constraint::Affine { a, b: level - d },
        None => Constraint::Smooth(Arc::new(Shifted { inner: sip.objective.clone(), level })),
    };
    let mut out = sip.clone().with_state_constraint(c)?;
    if !out.hypotheses.slater_validated {
        let mut alt = out.clone();
        alt.slater = x_tilde.clone();
        alt.refresh_hypotheses()?;
        if alt.hypotheses.slater_validated {
            out = alt;
        }
    }
    Ok(out)
}

/// `x ↦ x_i` as an objective.
pub fn coordinate_objective(n: usize, i: usize) -> Arc<dyn SmoothConvex> {
    Arc::new(Linear::coordinate(n, i))
}

#[cfg(test)]
mod tests;
