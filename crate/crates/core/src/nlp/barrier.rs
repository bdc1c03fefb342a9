//! Log-barrier interior-point method with damped Newton centering.
//!
//! Equalities (user rows and degenerate box coordinates) are eliminated by
//! the parametrization `x = p + N z`; everything else becomes a barrier term
//! in `z`. Affine cuts use `−log(b − a·z)`, Euclidean-type norm balls the
//! second-order-cone barrier `−log(s² − ‖u‖²)` (smooth at `u = 0`), and
//! generic smooth constraints `−log(−g)`. A phase-I problem with one extra
//! slack variable supplies a strictly feasible start when `x0` is not one.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{Constraint, FiniteConvexProgram, InnerSolution, InnerStatus, SmoothConvex, SolverOptions};
use crate::domain::affine_parametrize;
use crate::error::{Error, Result};

const BARRIER_GROWTH: f64 = 20.0;
const NEWTON_EPS: f64 = 1e-10;
const ARMIJO: f64 = 0.25;

struct Lin {
    a: DVector<f64>,
    b: f64,
}

/// `‖A v − d‖₂ ≤ q · v + r`
struct Cone {
    a: DMatrix<f64>,
    d: DVector<f64>,
    q: DVector<f64>,
    r: f64,
}

/// `g(p + N v_z) − slack_coef · v_s ≤ 0`
struct SmoothTerm {
    g: Arc<dyn SmoothConvex>,
    shift: f64,
}

enum Goal {
    Original,
    /// minimize the phase-I slack (last variable)
    Slack,
}

struct Reduced {
    p: DVector<f64>,
    /// `None` means the identity map.
    basis: Option<DMatrix<f64>>,
    nz: usize,
    phase_one: bool,
    lins: Vec<Lin>,
    cones: Vec<Cone>,
    smooths: Vec<SmoothTerm>,
    objective: Arc<dyn SmoothConvex>,
    goal: Goal,
}

impl Reduced {
    fn nv(&self) -> usize {
        self.nz + self.phase_one as usize
    }

    fn nu(&self) -> f64 {
        (self.lins.len() + 2 * self.cones.len() + self.smooths.len()) as f64
    }

    fn x_of(&self, v: &DVector<f64>) -> DVector<f64> {
        let z = v.rows(0, self.nz);
        match &self.basis {
            Some(n) => &self.p + n * z,
            None => &self.p + z,
        }
    }

    fn slack_var(&self, v: &DVector<f64>) -> f64 {
        if self.phase_one {
            v[self.nz]
        } else {
            0.0
        }
    }

    /// Gradient in `x` pulled back to `v` (zero in the slack slot).
    fn pull_grad(&self, gx: &DVector<f64>) -> DVector<f64> {
        let gz = match &self.basis {
            Some(n) => n.transpose() * gx,
            None => gx.clone(),
        };
        let mut out = DVector::zeros(self.nv());
        out.rows_mut(0, self.nz).copy_from(&gz);
        out
    }

    fn pull_hess(&self, hx: &DMatrix<f64>) -> DMatrix<f64> {
        let hz = match &self.basis {
            Some(n) => n.transpose() * hx * n,
            None => hx.clone(),
        };
        let mut out = DMatrix::zeros(self.nv(), self.nv());
        out.view_mut((0, 0), (self.nz, self.nz)).copy_from(&hz);
        out
    }

    fn goal_value(&self, v: &DVector<f64>, x: &DVector<f64>) -> f64 {
        match self.goal {
            Goal::Original => self.objective.value(x),
            Goal::Slack => v[self.nz],
        }
    }

    fn merit(&self, v: &DVector<f64>, t: f64) -> Option<f64> {
        self.merit_from(v, t, 0.0)
    }

    /// Barrier merit `t (f(v) − f_ref) − Σ log(slack_i)`; `None` outside the
    /// interior. A reference near the current value keeps the merit small,
    /// so its rounding stays below the decrease being tested for large `t`.
    fn merit_from(&self, v: &DVector<f64>, t: f64, f_ref: f64) -> Option<f64> {
        let x = self.x_of(v);
        let mut phi = t * (self.goal_value(v, &x) - f_ref);
        for l in &self.lins {
            let s = l.b - l.a.dot(v);
            if !(s > 0.0) {
                return None;
            }
            phi -= s.ln();
        }
        for c in &self.cones {
            let s = c.q.dot(v) + c.r;
            if !(s > 0.0) {
                return None;
            }
            let u = &c.a * v - &c.d;
            let h = s * s - u.norm_squared();
            if !(h > 0.0) {
                return None;
            }
            phi -= h.ln();
        }
        let sv = self.slack_var(v);
        for g in &self.smooths {
            let val = -(g.g.value(&x) - g.shift - sv);
            if !(val > 0.0) {
                return None;
            }
            phi -= val.ln();
        }
        if phi.is_finite() {
            Some(phi)
        } else {
            None
        }
    }

    fn grad_hess(&self, v: &DVector<f64>, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let nv = self.nv();
        let x = self.x_of(v);
        let (mut g, mut h) = match self.goal {
            Goal::Original => (
                self.pull_grad(&self.objective.gradient(&x)) * t,
                self.pull_hess(&self.objective.hessian(&x)) * t,
            ),
            Goal::Slack => {
                let mut g = DVector::zeros(nv);
                g[self.nz] = t;
                (g, DMatrix::zeros(nv, nv))
            }
        };
        for l in &self.lins {
            let s = l.b - l.a.dot(v);
            g.axpy(1.0 / s, &l.a, 1.0);
            h.ger(1.0 / (s * s), &l.a, &l.a, 1.0);
        }
        for c in &self.cones {
            let s = c.q.dot(v) + c.r;
            let u = &c.a * v - &c.d;
            let hv = s * s - u.norm_squared();
            // ∇h = 2 s q − 2 Aᵀu,  ∇²h = 2 q qᵀ − 2 AᵀA
            let atu = c.a.transpose() * &u;
            let dh = &c.q * (2.0 * s) - atu * 2.0;
            g.axpy(-1.0 / hv, &dh, 1.0);
            h.ger(1.0 / (hv * hv), &dh, &dh, 1.0);
            h.ger(-2.0 / hv, &c.q, &c.q, 1.0);
            h += c.a.transpose() * &c.a * (2.0 / hv);
        }
        let sv = self.slack_var(v);
        for term in &self.smooths {
            let val = term.g.value(&x) - term.shift - sv; // < 0
            let mut dg = self.pull_grad(&term.g.gradient(&x));
            if self.phase_one {
                dg[self.nz] = -1.0;
            }
            g.axpy(-1.0 / val, &dg, 1.0);
            h.ger(1.0 / (val * val), &dg, &dg, 1.0);
            h += self.pull_hess(&term.g.hessian(&x)) * (-1.0 / val);
        }
        (g, h)
    }

    /// Largest constraint value in `G ≤ 0` form, phase-II constraints only.
    fn max_constraint(&self, v: &DVector<f64>) -> f64 {
        let x = self.x_of(v);
        let mut m = f64::NEG_INFINITY;
        for l in &self.lins {
            m = m.max(l.a.dot(v) - l.b);
        }
        for c in &self.cones {
            let u = &c.a * v - &c.d;
            m = m.max(u.norm() - c.q.dot(v) - c.r);
        }
        for term in &self.smooths {
            m = m.max(term.g.value(&x) - term.shift);
        }
        m
    }

    /// The phase-I problem: every inequality relaxed by a slack `s`, with
    /// `s ≥ floor`.
    fn phase_one(&self, floor: f64) -> Reduced {
        let nv = self.nz + 1;
        let extend = |a: &DVector<f64>, last: f64| {
            let mut out = DVector::zeros(nv);
            out.rows_mut(0, self.nz).copy_from(a);
            out[self.nz] = last;
            out
        };
        let mut lins: Vec<Lin> = self
            .lins
            .iter()
            .map(|l| Lin { a: extend(&l.a, -1.0), b: l.b })
            .collect();
        let mut floor_row = DVector::zeros(nv);
        floor_row[self.nz] = -1.0;
        lins.push(Lin { a: floor_row, b: -floor });
        let cones = self
            .cones
            .iter()
            .map(|c| {
                let mut a = DMatrix::zeros(c.a.nrows(), nv);
                a.view_mut((0, 0), (c.a.nrows(), self.nz)).copy_from(&c.a);
                Cone { a, d: c.d.clone(), q: extend(&c.q, 1.0), r: c.r }
            })
            .collect();
        let smooths = self
            .smooths
            .iter()
            .map(|s| SmoothTerm { g: s.g.clone(), shift: s.shift })
            .collect();
        Reduced {
            p: self.p.clone(),
            basis: self.basis.clone(),
            nz: self.nz,
            phase_one: true,
            lins,
            cones,
            smooths,
            objective: self.objective.clone(),
            goal: Goal::Slack,
        }
    }

    fn relaxed(&self, delta: f64) -> Reduced {
        Reduced {
            p: self.p.clone(),
            basis: self.basis.clone(),
            nz: self.nz,
            phase_one: false,
            lins: self.lins.iter().map(|l| Lin { a: l.a.clone(), b: l.b + delta }).collect(),
            cones: self
                .cones
                .iter()
                .map(|c| Cone { a: c.a.clone(), d: c.d.clone(), q: c.q.clone(), r: c.r + delta })
                .collect(),
            smooths: self
                .smooths
                .iter()
                .map(|s| SmoothTerm { g: s.g.clone(), shift: s.shift + delta })
                .collect(),
            objective: self.objective.clone(),
            goal: Goal::Original,
        }
    }
}

/// Also returns the largest violation among constraints that are constant on
/// the equality slice (these carry no barrier term).
fn reduce(p: &FiniteConvexProgram) -> Result<(Reduced, f64)> {
    let n = p.dim();
    let bx = &p.state_box;
    let mut eq_rows: Vec<(DVector<f64>, f64)> = Vec::new();
    if let Some((a, e)) = &p.equalities {
        for i in 0..a.nrows() {
            eq_rows.push((a.row(i).transpose(), e[i]));
        }
    }
    for i in 0..n {
        if bx.is_degenerate(i) {
            let mut r = DVector::zeros(n);
            r[i] = 1.0;
            eq_rows.push((r, bx.lower()[i]));
        }
    }
    let (pvec, basis) = if eq_rows.is_empty() {
        (DVector::zeros(n), None)
    } else {
        let a = DMatrix::from_fn(eq_rows.len(), n, |r, c| eq_rows[r].0[c]);
        let e = DVector::from_iterator(eq_rows.len(), eq_rows.iter().map(|r| r.1));
        let param = affine_parametrize(&a, &e)?;
        (param.particular().clone(), Some(param.basis().clone()))
    };
    let nz = basis.as_ref().map_or(n, |b| b.ncols());
    let pull = |a: &DVector<f64>| -> DVector<f64> {
        match &basis {
            Some(nb) => nb.transpose() * a,
            None => a.clone(),
        }
    };
    let mut lins = Vec::new();
    let mut constant_violation = 0.0_f64;
    let mut push_lin = |a: DVector<f64>, b: f64, lins: &mut Vec<Lin>| {
        let az = pull(&a);
        let bz = b - a.dot(&pvec);
        if az.amax() <= 1e-14 * (1.0 + a.amax()) {
            constant_violation = constant_violation.max(-bz);
        } else {
            lins.push(Lin { a: az, b: bz });
        }
    };
    for i in 0..n {
        if bx.is_degenerate(i) {
            continue;
        }
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        push_lin(e.clone(), bx.upper()[i], &mut lins);
        push_lin(-e, -bx.lower()[i], &mut lins);
    }
    let mut cones = Vec::new();
    let mut smooths = Vec::new();
    for c in &p.constraints {
        match c {
            Constraint::Affine { a, b } => push_lin(a.clone(), *b, &mut lins),
            Constraint::NormBall { norm, map, center, slope, offset } => {
                let f = norm.euclidean_factor(map.nrows()).ok_or_else(|| {
                    Error::Unsupported("polyhedral norm ball reached the barrier solver".into())
                })?;
                let fs = &f * map;
                let a = match &basis {
                    Some(nb) => &fs * nb,
                    None => fs.clone(),
                };
                let d = &f * (center - map * &pvec);
                cones.push(Cone {
                    a,
                    d,
                    q: pull(slope),
                    r: offset + slope.dot(&pvec),
                });
            }
            Constraint::Smooth(g) => smooths.push(SmoothTerm { g: g.clone(), shift: 0.0 }),
        }
    }
    Ok((Reduced {
        p: pvec,
        basis,
        nz,
        phase_one: false,
        lins,
        cones,
        smooths,
        objective: p.objective.clone(),
        goal: Goal::Original,
    }, constant_violation))
}

fn newton_direction(g: &DVector<f64>, h: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = g.len();
    let scale = h.diagonal().amax().max(1e-300);
    let mut shift = 0.0;
    for _ in 0..12 {
        let mut m = h.clone();
        if shift > 0.0 {
            for i in 0..n {
                m[(i, i)] += shift;
            }
        }
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(&(-g));
            if d.iter().all(|x| x.is_finite()) {
                return Some(d);
            }
        }
        shift = if shift == 0.0 { 1e-14 * scale } else { shift * 100.0 };
    }
    None
}

struct Centering {
    steps: usize,
    hit_limit: bool,
    /// phase I: the slack dropped below zero
    early_exit: bool,
}

fn center(
    r: &Reduced,
    v: &mut DVector<f64>,
    t: f64,
    max_inner: usize,
    stage: usize,
    trace: Option<&mut Vec<(usize, f64)>>,
) -> Result<Centering> {
    let mut trace = trace;
    let f_ref = r.goal_value(v, &r.x_of(v));
    let mut phi = r
        .merit_from(v, t, f_ref)
        .ok_or_else(|| Error::NonFinite("barrier merit at a strictly feasible point".into()))?;
    for it in 0..max_inner {
        let (g, h) = r.grad_hess(v, t);
        if g.iter().any(|x| !x.is_finite()) || h.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("barrier gradient or Hessian".into()));
        }
        let Some(dv) = newton_direction(&g, &h) else {
            return Ok(Centering { steps: it, hit_limit: false, early_exit: false });
        };
        let slope = g.dot(&dv);
        let lambda2 = -slope;
        // decrements below the rounding level of the merit carry no information
        if lambda2 * 0.5 <= NEWTON_EPS.max(1e-13 * phi.abs()) {
            return Ok(Centering { steps: it, hit_limit: false, early_exit: false });
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-16 {
            let cand = &*v + &dv * alpha;
            if let Some(pc) = r.merit_from(&cand, t, f_ref) {
                if pc <= phi + ARMIJO * alpha * slope {
                    accepted = Some((cand, pc));
                    break;
                }
                if alpha == 1.0 && lambda2 < 0.01 {
                    // quadratic region, decrease lost in rounding: take the
                    // full step and stop (it is not a merit-tested step)
                    *v = cand;
                    return Ok(Centering { steps: it + 1, hit_limit: false, early_exit: false });
                }
            }
            alpha *= 0.5;
        }
        let Some((cand, pc)) = accepted else {
            // rounding floor: no further decrease is representable
            return Ok(Centering { steps: it, hit_limit: false, early_exit: false });
        };
        *v = cand;
        phi = pc;
        if let Some(tr) = trace.as_deref_mut() {
            tr.push((stage, phi));
        }
        if r.phase_one && v[r.nz] < 0.0 {
            return Ok(Centering { steps: it + 1, hit_limit: false, early_exit: true });
        }
    }
    Ok(Centering { steps: max_inner, hit_limit: true, early_exit: false })
}

fn initial_t(r: &Reduced, v: &DVector<f64>) -> f64 {
    let (g0, _) = r.grad_hess(v, 0.0);
    let (g1, _) = r.grad_hess(v, 1.0);
    let gf = &g1 - &g0;
    let nf = gf.norm_squared();
    if nf <= 1e-300 {
        return 1.0;
    }
    (-(gf.dot(&g0)) / nf).clamp(1e-3, 1e3)
}

struct BarrierRun {
    v: DVector<f64>,
    t: f64,
    steps: usize,
    converged: bool,
    early_exit: bool,
}

fn run_barrier(
    r: &Reduced,
    mut v: DVector<f64>,
    opts: &SolverOptions,
    gap_tol: impl Fn(&DVector<f64>) -> f64,
    phase_one_floor_check: bool,
    mut trace: Option<&mut Vec<(usize, f64)>>,
) -> Result<BarrierRun> {
    let nu = r.nu();
    let mut t = initial_t(r, &v);
    let mut steps = 0;
    for stage in 0..opts.max_outer {
        let c = center(r, &mut v, t, opts.max_inner, stage, trace.as_deref_mut())?;
        steps += c.steps;
        if c.early_exit {
            return Ok(BarrierRun { v, t, steps, converged: true, early_exit: true });
        }
        let gap = nu / t;
        if phase_one_floor_check && v[r.nz] - gap > 0.0 && gap < 1e-3 * v[r.nz] {
            // certified: the minimal violation is positive
            return Ok(BarrierRun { v, t, steps, converged: true, early_exit: false });
        }
        if gap <= gap_tol(&v) {
            return Ok(BarrierRun { v, t, steps, converged: !c.hit_limit, early_exit: false });
        }
        t *= BARRIER_GROWTH;
    }
    Ok(BarrierRun { v, t, steps, converged: false, early_exit: false })
}

pub(super) fn solve(
    p: &FiniteConvexProgram,
    x0: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<InnerSolution> {
    let (r, constant_violation) = reduce(p)?;
    let tol = opts.tol;
    if constant_violation > tol {
        let x = r.p.clone();
        return Ok(InnerSolution {
            value: p.objective.value(&x),
            max_violation: p.max_violation(&x).max(constant_violation),
            x_star: x,
            kkt_residual: f64::NAN,
            status: InnerStatus::Infeasible,
            newton_steps: 0,
            merit_trace: Vec::new(),
        });
    }
    let z0 = match &r.basis {
        Some(nb) => nb.transpose() * (x0 - &r.p),
        None => x0 - &r.p,
    };

    if r.nz == 0 {
        let x = r.x_of(&z0);
        let viol = p.max_violation(&x);
        let value = p.objective.value(&x);
        if !value.is_finite() {
            return Err(Error::NonFinite("objective value".into()));
        }
        return Ok(InnerSolution {
            status: if viol <= tol { InnerStatus::Optimal } else { InnerStatus::Infeasible },
            x_star: x,
            value,
            kkt_residual: 0.0,
            max_violation: viol,
            newton_steps: 0,
            merit_trace: Vec::new(),
        });
    }

    let mut start = z0.clone();
    let mut problem = r;
    let mut steps = 0;
    let worst = problem.max_constraint(&start);
    if !(worst < 0.0) || problem.merit(&start, 1.0).is_none() {
        let s0 = if worst.is_finite() { worst.max(0.0) * 1.1 + 1e-3 * (1.0 + worst.abs()) } else { 1.0 };
        let floor = -(1.0_f64).max(s0);
        let ph1 = problem.phase_one(floor);
        let mut v = DVector::zeros(problem.nz + 1);
        v.rows_mut(0, problem.nz).copy_from(&start);
        v[problem.nz] = s0;
        let run = run_barrier(&ph1, v, opts, |_| 1e-12, true, None)?;
        steps += run.steps;
        let s_star = run.v[problem.nz];
        let z = run.v.rows(0, problem.nz).into_owned();
        if !run.early_exit {
            if s_star > tol || !run.converged && s_star > 0.0 {
                let x = problem.x_of(&z);
                let value = p.objective.value(&x);
                return Ok(InnerSolution {
                    x_star: x.clone(),
                    value,
                    kkt_residual: f64::NAN,
                    max_violation: p.max_violation(&x).max(s_star),
                    status: InnerStatus::Infeasible,
                    newton_steps: steps,
                    merit_trace: Vec::new(),
                });
            }
            // feasible set without interior at this tolerance: relax slightly
            let delta = s_star.max(0.0) * 1.5 + 1e-3 * tol;
            problem = problem.relaxed(delta);
            if problem.merit(&z, 1.0).is_none() {
                return Err(Error::NonFinite("relaxed phase-I point left the interior".into()));
            }
        }
        start = z;
    }

    let mut trace = Vec::new();
    let trace_ref = if opts.record_merit { Some(&mut trace) } else { None };
    let objective = p.objective.clone();
    let run = run_barrier(
        &problem,
        start,
        opts,
        |v| tol * objective.value(&problem.x_of(v)).abs().max(1.0),
        false,
        trace_ref,
    )?;
    steps += run.steps;
    let x = problem.x_of(&run.v);
    let value = p.objective.value(&x);
    if !value.is_finite() {
        return Err(Error::NonFinite("objective value at the solution".into()));
    }
    let gap = problem.nu() / run.t;
    let viol = p.max_violation(&x);
    let kkt = gap / value.abs().max(1.0);
    let status = if run.converged && viol <= tol && kkt <= tol * 1.0001 {
        InnerStatus::Optimal
    } else {
        InnerStatus::IterLimit
    };
    Ok(InnerSolution {
        x_star: x,
        value,
        kkt_residual: kkt,
        max_violation: viol,
        status,
        newton_steps: steps,
        merit_trace: trace,
    })
}
