//! Finitely constrained convex programs: the problem solved at every
//! evaluation of the relaxed value function.
//!
//! `minimize F(x)  s.t.  G_i(x) ≤ 0,  x ∈ box,  E x = e`
//!
//! Constraints come in three shapes: affine cuts, norm balls
//! `‖S x − c‖ ≤ q·x + r`, and generic smooth convex functions. Balls under
//! `ℓ1`/`ℓ∞` are rewritten into affine cuts by [`polyhedral_reformulate`];
//! Euclidean-type balls are handled as second-order cones.

mod barrier;
mod functions;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use functions::{Linear, Quadratic, SmoothConvex, WeightedSum};
pub(crate) use functions::{Padded, Shifted};

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::norm::{Norm, NormKind};

/// Default optimality/feasibility tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Clone)]
pub enum Constraint {
    /// `a · x ≤ b`
    Affine { a: DVector<f64>, b: f64 },
    /// `‖S x − c‖ ≤ q · x + r`
    NormBall {
        norm: Norm,
        map: DMatrix<f64>,
        center: DVector<f64>,
        slope: DVector<f64>,
        offset: f64,
    },
    /// `g(x) ≤ 0`
    Smooth(Arc<dyn SmoothConvex>),
}

impl std::fmt::Debug for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Constraint::Affine { a, b } => write!(f, "Affine({:?} <= {b})", a.as_slice()),
            Constraint::NormBall { norm, center, .. } => {
                write!(f, "NormBall({:?}, center {:?})", norm.kind(), center.as_slice())
            }
            Constraint::Smooth(g) => write!(f, "Smooth({})", g.describe()),
        }
    }
}

impl Constraint {
    /// `‖x_sel − center‖ ≤ t` where `x = (t, x_sel)`: the Chebyshev cover constraint.
    pub fn cover(norm: Norm, center: DVector<f64>) -> Self {
        let l = center.len();
        let mut map = DMatrix::zeros(l, l + 1);
        map.view_mut((0, 1), (l, l)).fill_with_identity();
        let mut slope = DVector::zeros(l + 1);
        slope[0] = 1.0;
        Constraint::NormBall {
            norm,
            map,
            center,
            slope,
            offset: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Constraint::Affine { a, .. } => a.len(),
            Constraint::NormBall { map, .. } => map.ncols(),
            Constraint::Smooth(g) => g.dim(),
        }
    }

    /// `G(x)`; the constraint holds iff this is `≤ 0`.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            Constraint::Affine { a, b } => a.dot(x) - b,
            Constraint::NormBall {
                norm,
                map,
                center,
                slope,
                offset,
            } => {
                let v = map * x - center;
                norm.apply(v.as_slice()) - slope.dot(x) - offset
            }
            Constraint::Smooth(g) => g.value(x),
        }
    }

    /// A subgradient of `G` at `x`.
    pub fn subgradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Constraint::Affine { a, .. } => a.clone(),
            Constraint::NormBall {
                norm,
                map,
                center,
                slope,
                ..
            } => {
                let v = map * x - center;
                let s = norm.subgradient(&v).expect("dimension checked at construction");
                map.transpose() * s - slope
            }
            Constraint::Smooth(g) => g.gradient(x),
        }
    }
}

/// `minimize objective(x)  s.t.  constraints, x ∈ state_box, E x = e`.
#[derive(Clone)]
pub struct FiniteConvexProgram {
    pub objective: Arc<dyn SmoothConvex>,
    pub constraints: Vec<Constraint>,
    pub state_box: BoxDomain,
    pub equalities: Option<(DMatrix<f64>, DVector<f64>)>,
}

impl FiniteConvexProgram {
    pub fn new(
        objective: Arc<dyn SmoothConvex>,
        constraints: Vec<Constraint>,
        state_box: BoxDomain,
    ) -> Result<Self> {
        let p = Self {
            objective,
            constraints,
            state_box,
            equalities: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, e: DVector<f64>) -> Result<Self> {
        self.equalities = Some((a, e));
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.state_box.dim()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.objective.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.objective.dim() });
        }
        for c in &self.constraints {
            if c.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: c.dim() });
            }
            if let Constraint::NormBall { norm, map, center, slope, .. } = c {
                if map.nrows() != center.len() || slope.len() != n {
                    return Err(Error::DimensionMismatch { expected: map.nrows(), got: center.len() });
                }
                if let Some(d) = norm.dim() {
                    if d != map.nrows() {
                        return Err(Error::DimensionMismatch { expected: d, got: map.nrows() });
                    }
                }
            }
        }
        if let Some((a, e)) = &self.equalities {
            if a.ncols() != n || a.nrows() != e.len() {
                return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
            }
        }
        Ok(())
    }

    /// Largest constraint violation at `x` (box and equalities included).
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut v = self.state_box.residual(x);
        for c in &self.constraints {
            v = v.max(c.value(x));
        }
        if let Some((a, e)) = &self.equalities {
            v = v.max((a * x - e).amax());
        }
        v.max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InnerStatus {
    Optimal,
    Infeasible,
    IterLimit,
}

#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub x_star: DVector<f64>,
    pub value: f64,
    /// Relative duality-gap bound of the final barrier stage.
    pub kkt_residual: f64,
    pub max_violation: f64,
    pub status: InnerStatus,
    pub newton_steps: usize,
    /// `(stage, barrier merit)` after every accepted Newton step, when requested.
    pub merit_trace: Vec<(usize, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub record_merit: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_outer: 500,
            max_inner: 200,
            record_merit: false,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Solves `p` from the start `x0` to tolerance `tol`.
pub fn solve_finite_convex(
    p: &FiniteConvexProgram,
    x0: &DVector<f64>,
    tol: f64,
) -> Result<InnerSolution> {
    solve_with_options(p, x0, &SolverOptions::with_tol(tol))
}

pub fn solve_with_options(
    p: &FiniteConvexProgram,
    x0: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<InnerSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if x0.len() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: x0.len() });
    }
    let n = p.dim();
    let has_polyhedral = p.constraints.iter().any(
        |c| matches!(c, Constraint::NormBall { norm, .. } if norm.is_polyhedral()),
    );
    if has_polyhedral {
        let (q, start) = expand_polyhedral(p, x0, false)?;
        let mut sol = barrier::solve(&q, &start, opts)?;
        sol.x_star = sol.x_star.rows(0, n).into_owned();
        sol.max_violation = p.max_violation(&sol.x_star).max(if sol.status == InnerStatus::Infeasible {
            sol.max_violation
        } else {
            0.0
        });
        return Ok(sol);
    }
    barrier::solve(p, x0, opts)
}

/// Rewrites every `ℓ1`/`ℓ∞` norm-ball constraint as affine cuts.
///
/// `ℓ∞`: two cuts per component. `ℓ1`: one auxiliary variable per component
/// with two cuts each, plus one summing cut. Auxiliary variables are appended
/// after the original coordinates. Any constraint that is neither affine nor a
/// polyhedral ball is rejected.
pub fn polyhedral_reformulate(p: &FiniteConvexProgram) -> Result<FiniteConvexProgram> {
    let x0 = p.state_box.center();
    Ok(expand_polyhedral(p, &x0, true)?.0)
}

fn expand_polyhedral(
    p: &FiniteConvexProgram,
    x0: &DVector<f64>,
    strict: bool,
) -> Result<(FiniteConvexProgram, DVector<f64>)> {
    let n = p.dim();
    let aux: usize = p
        .constraints
        .iter()
        .map(|c| match c {
            Constraint::NormBall { norm, map, .. } if norm.kind() == NormKind::L1 => map.nrows(),
            _ => 0,
        })
        .sum();
    let total = n + aux;
    let pad = |a: &DVector<f64>| {
        let mut out = DVector::zeros(total);
        out.rows_mut(0, n).copy_from(a);
        out
    };
    let mut lower: Vec<f64> = p.state_box.lower().iter().copied().collect();
    let mut upper: Vec<f64> = p.state_box.upper().iter().copied().collect();
    let mut start: Vec<f64> = x0.iter().copied().collect();
    let mut cons = Vec::new();
    let mut next_aux = n;
    for c in &p.constraints {
        match c {
            Constraint::Affine { a, b } => cons.push(Constraint::Affine { a: pad(a), b: *b }),
            Constraint::NormBall {
                norm,
                map,
                center,
                slope,
                offset,
            } if norm.is_polyhedral() => {
                let s = norm.scale();
                let rows = map.nrows();
                match norm.kind() {
                    NormKind::Linf => {
                        for j in 0..rows {
                            let row = map.row(j).transpose();
                            // ±s (S_j x − c_j) ≤ q·x + r
                            cons.push(Constraint::Affine {
                                a: pad(&(&row * s - slope)),
                                b: offset + s * center[j],
                            });
                            cons.push(Constraint::Affine {
                                a: pad(&(&row * -s - slope)),
                                b: offset - s * center[j],
                            });
                        }
                    }
                    NormKind::L1 => {
                        let v0 = map * x0 - center;
                        let rhs0 = slope.dot(x0) + offset;
                        let margin = (rhs0 / s - v0.abs().sum()).max(0.0) / (rows as f64 + 1.0);
                        let mut sum_row = pad(&-slope);
                        for j in 0..rows {
                            let row = map.row(j).transpose();
                            let k = next_aux;
                            next_aux += 1;
                            let mut e = DVector::zeros(total);
                            e[k] = 1.0;
                            // S_j x − c_j − a_k ≤ 0 and −(S_j x − c_j) − a_k ≤ 0
                            cons.push(Constraint::Affine { a: pad(&row) - &e, b: center[j] });
                            cons.push(Constraint::Affine { a: -pad(&row) - &e, b: -center[j] });
                            sum_row[k] = s;
                            let bound = interval_abs_bound(&row, center[j], &p.state_box) + 1.0;
                            lower.push(0.0);
                            upper.push(bound);
                            start.push((v0[j].abs() + margin).min(bound * (1.0 - 1e-9)));
                        }
                        cons.push(Constraint::Affine { a: sum_row, b: *offset });
                    }
                    _ => unreachable!(),
                }
            }
            Constraint::NormBall { norm, .. } => {
                if strict {
                    return Err(Error::Unsupported(format!(
                        "{:?} norm ball has no polyhedral form",
                        norm.kind()
                    )));
                }
                cons.push(pad_constraint(c, n, aux));
            }
            Constraint::Smooth(_) => {
                if strict {
                    return Err(Error::Unsupported(
                        "smooth constraint has no polyhedral form".into(),
                    ));
                }
                cons.push(pad_constraint(c, n, aux));
            }
        }
    }
    let objective: Arc<dyn SmoothConvex> = if aux == 0 {
        p.objective.clone()
    } else {
        Arc::new(Padded {
            inner: p.objective.clone(),
            extra: aux,
        })
    };
    let state_box = BoxDomain::new(DVector::from_vec(lower), DVector::from_vec(upper))?;
    let equalities = p.equalities.as_ref().map(|(a, e)| {
        let mut wide = DMatrix::zeros(a.nrows(), total);
        wide.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        (wide, e.clone())
    });
    Ok((
        FiniteConvexProgram {
            objective,
            constraints: cons,
            state_box,
            equalities,
        },
        DVector::from_vec(start),
    ))
}

fn pad_constraint(c: &Constraint, n: usize, aux: usize) -> Constraint {
    if aux == 0 {
        return c.clone();
    }
    let total = n + aux;
    match c {
        Constraint::Affine { a, b } => {
            let mut w = DVector::zeros(total);
            w.rows_mut(0, n).copy_from(a);
            Constraint::Affine { a: w, b: *b }
        }
        Constraint::NormBall { norm, map, center, slope, offset } => {
            let mut m = DMatrix::zeros(map.nrows(), total);
            m.view_mut((0, 0), (map.nrows(), n)).copy_from(map);
            let mut q = DVector::zeros(total);
            q.rows_mut(0, n).copy_from(slope);
            Constraint::NormBall {
                norm: norm.clone(),
                map: m,
                center: center.clone(),
                slope: q,
                offset: *offset,
            }
        }
        Constraint::Smooth(g) => Constraint::Smooth(Arc::new(Padded { inner: g.clone(), extra: aux })),
    }
}

/// `max |row · x − c|` over the box, by interval arithmetic.
fn interval_abs_bound(row: &DVector<f64>, c: f64, b: &BoxDomain) -> f64 {
    let mut lo = -c;
    let mut hi = -c;
    for i in 0..row.len() {
        let e1 = row[i] * b.lower()[i];
        let e2 = row[i] * b.upper()[i];
        lo += e1.min(e2);
        hi += e1.max(e2);
    }
    lo.abs().max(hi.abs())
}
