use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{check_strict_convexity, regularized_step, solve_sip_value, SipProblem};
use crate::error::{Error, Result};
use crate::global::GlobalConfig;
use crate::nlp::SmoothConvex;

/// `ε_k = 2^{-k}`, `k = 0..=20`.
pub fn default_schedule() -> Vec<f64> {
    (0..=20).map(|k| 0.5f64.powi(k)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathOptions {
    pub schedule: Vec<f64>,
    /// Stop once consecutive solutions are this close (sup norm) and the
    /// objective is within this tolerance (relative) of the SIP value.
    pub stop_tol: f64,
    /// Slack allowed in the monotonicity of `f` and `ψ` along the path.
    pub path_tol: f64,
    /// Run every step of the schedule even after `stop_tol` is met.
    pub full_schedule: bool,
    /// Previous certificates offered to each later step as starting tuples.
    pub warm_tuples: usize,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            schedule: default_schedule(),
            stop_tol: 1e-6,
            path_tol: 1e-6,
            full_schedule: false,
            warm_tuples: 4,
        }
    }
}

impl PathOptions {
    pub fn with_schedule(schedule: Vec<f64>) -> Self {
        Self { schedule, ..Self::default() }
    }

    /// `eps_start · 2^{-k}` for `k < steps`.
    pub fn geometric(eps_start: f64, steps: usize) -> Self {
        Self::with_schedule((0..steps).map(|k| eps_start * 0.5f64.powi(k as i32)).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::InvalidArgument("empty regularization schedule".into()));
        }
        if self.schedule.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidArgument("regularization weights must be positive and finite".into()));
        }
        if self.schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument("regularization schedule must be strictly decreasing".into()));
        }
        if !(self.stop_tol >= 0.0 && self.path_tol >= 0.0) {
            return Err(Error::InvalidArgument("path tolerances must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub eps: f64,
    pub x: DVector<f64>,
    pub f: f64,
    pub psi: f64,
    /// Regularized SIP value `f + ε ψ`.
    pub value: f64,
    /// Certificate tuple in ambient index coordinates.
    pub tuple: Vec<DVector<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathQuantity {
    Objective,
    Regularizer,
}

/// A step where `f` rose or `ψ` fell by more than `path_tol`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityViolation {
    /// Index of the later point of the pair.
    pub step: usize,
    pub quantity: PathQuantity,
    pub amount: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegPath {
    pub epsilons: Vec<f64>,
    pub solutions: Vec<PathPoint>,
    pub limit: DVector<f64>,
    /// Consecutive solutions met `stop_tol`.
    pub converged: bool,
    pub violations: Vec<MonotonicityViolation>,
}

impl RegPath {
    pub fn is_monotone(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn last(&self) -> &PathPoint {
        self.solutions.last().expect("a path has at least one point")
    }

    /// Per-pair increments `(f_{k} − f_{k−1}, ψ_{k} − ψ_{k−1})`.
    pub fn increments(&self) -> Vec<(f64, f64)> {
        self.solutions
            .windows(2)
            .map(|w| (w[1].f - w[0].f, w[1].psi - w[0].psi))
            .collect()
    }
}

/// Regularization path over `schedule` with default tolerances.
pub fn extract_optimizer(
    sip: &SipProblem,
    psi: Arc<dyn SmoothConvex>,
    schedule: &[f64],
    cfg: &GlobalConfig,
) -> Result<RegPath> {
    extract_optimizer_with(sip, psi, &PathOptions::with_schedule(schedule.to_vec()), cfg)
}

pub fn extract_optimizer_with(
    sip: &SipProblem,
    psi: Arc<dyn SmoothConvex>,
    opts: &PathOptions,
    cfg: &GlobalConfig,
) -> Result<RegPath> {
    opts.validate()?;
    check_strict_convexity(psi.as_ref(), sip.state_box())?;
    let mut solutions: Vec<PathPoint> = Vec::new();
    let mut warm: Vec<Vec<DVector<f64>>> = Vec::new();
    let mut converged = false;
    // SIP value, solved on first need: iterates pinned by the state box can
    // repeat across steps without being optimal, so a small step alone
    // does not end the path.
    let mut value: Option<f64> = None;
    for (k, &eps) in opts.schedule.iter().enumerate() {
        let step_cfg = GlobalConfig { seed: cfg.seed.wrapping_add(k as u64), ..cfg.clone() };
        let r = regularized_step(sip, &psi, eps, &step_cfg, &warm)?;
        let cert = &r.solution.certificate;
        warm.insert(0, cert.coords.clone());
        warm.truncate(opts.warm_tuples);
        let point = PathPoint {
            eps,
            f: r.f_value,
            psi: r.psi_value,
            value: r.value,
            tuple: cert.tuple.clone(),
            x: r.x,
        };
        let mut close = solutions
            .last()
            .is_some_and(|prev| (&point.x - &prev.x).amax() <= opts.stop_tol);
        if close {
            let v = match value {
                Some(v) => v,
                None => *value.insert(solve_sip_value(sip, cfg)?.value),
            };
            close = point.f <= v + opts.stop_tol * (1.0 + v.abs());
        }
        solutions.push(point);
        if close {
            converged = true;
            if !opts.full_schedule {
                break;
            }
        } else if opts.full_schedule {
            converged = false;
        }
    }
    let violations = monotonicity_violations(&solutions, opts.path_tol);
    if !violations.is_empty() {
        log::warn!("regularization path is not monotone at {} step(s); the outer maximization was likely inexact", violations.len());
    }
    Ok(RegPath {
        epsilons: solutions.iter().map(|p| p.eps).collect(),
        limit: solutions.last().expect("nonempty schedule").x.clone(),
        solutions,
        converged,
        violations,
    })
}

pub(crate) fn monotonicity_violations(points: &[PathPoint], tol: f64) -> Vec<MonotonicityViolation> {
    let mut out = Vec::new();
    for (i, w) in points.windows(2).enumerate() {
        let df = w[1].f - w[0].f;
        if df > tol {
            out.push(MonotonicityViolation { step: i + 1, quantity: PathQuantity::Objective, amount: df });
        }
        let dpsi = w[0].psi - w[1].psi;
        if dpsi > tol {
            out.push(MonotonicityViolation { step: i + 1, quantity: PathQuantity::Regularizer, amount: dpsi });
        }
    }
    out
}
