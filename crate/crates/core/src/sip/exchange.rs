//! Local exchange refinement: repeatedly add the most violated index point
//! to a relaxation and re-solve. Used after the outer maximization, where the
//! relaxed minimizer is poorly determined by the tuple value alone once the
//! regularization weight is small.

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use super::{extreme, rho_with, SipProblem};
use crate::error::Result;
use crate::global::nelder_mead_max;
use crate::nlp::{InnerStatus, SmoothConvex};

/// Violations at or below this are treated as zero.
pub const EXCHANGE_TOL: f64 = 1e-13;
const MAX_ROUNDS: usize = 60;
/// Inner tolerance of the refined relaxations.
pub const REFINE_TOL: f64 = 1e-14;
const POLISH_STARTS: usize = 4;

#[derive(Clone, Debug)]
pub struct Refined {
    pub x: DVector<f64>,
    /// Relaxation value with all cuts.
    pub value: f64,
    /// Index points (search coordinates) of the final relaxation.
    pub cuts: Vec<DVector<f64>>,
    /// `max_u g(x, u)` found at the returned point.
    pub max_violation: f64,
    pub rounds: usize,
}

/// Approximate `argmax_u g(x, u)` over the index set, in search coordinates.
pub fn most_violated(sip: &SipProblem, x: &DVector<f64>, extra: &[DVector<f64>]) -> (DVector<f64>, f64) {
    let probes = sip.cached_probes();
    let mut scored: Vec<(f64, &DVector<f64>)> = probes
        .par_iter()
        .chain(extra.par_iter())
        .map(|z| (sip.constraint_value(x, z), z))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut starts: Vec<&DVector<f64>> = Vec::new();
    for (_, z) in &scored {
        if starts.iter().all(|s| (*s - *z).amax() > 1e-9) {
            starts.push(z);
            if starts.len() == POLISH_STARTS {
                break;
            }
        }
    }
    let set = sip.search_set();
    let k = set.dim();
    let budget = 200 * (k + 1);
    let penalty = sip.penalty;
    let ascend = sip.family().convex_in_index() && sip.search_set_is_convex();
    let f = |z: &DVector<f64>| {
        if set.contains(z) {
            return sip.constraint_value(x, z);
        }
        let r = set.restore(z);
        if !set.contains(&r) {
            return f64::NEG_INFINITY;
        }
        sip.constraint_value(x, &r) - penalty * (&r - z).norm()
    };
    let polished: Vec<(DVector<f64>, f64)> = starts
        .par_iter()
        .map(|z0| {
            let z0 = if ascend {
                extreme::convex_ascent(set, |z| sip.constraint_value(x, z), z0, 20).0
            } else {
                (*z0).clone()
            };
            let z0 = &z0;
            let (z, _, _) = nelder_mead_max(&f, set.bbox(), z0, 0.01, budget, 1e-15);
            let z = if set.contains(&z) { z } else { set.restore(&z) };
            if set.contains(&z) {
                let v = sip.constraint_value(x, &z);
                (z, v)
            } else {
                ((*z0).clone(), sip.constraint_value(x, z0))
            }
        })
        .collect();
    let mut best = scored
        .first()
        .map(|(v, z)| ((*z).clone(), *v))
        .unwrap_or_else(|| (set.feasible_point().clone(), sip.constraint_value(x, set.feasible_point())));
    for (z, v) in polished {
        if v > best.1 {
            best = (z, v);
        }
    }
    best
}

/// Refines the relaxation started from `coords` until no index point is
/// violated by more than [`EXCHANGE_TOL`].
pub(crate) fn refine(
    sip: &SipProblem,
    objective: &Arc<dyn SmoothConvex>,
    coords: &[DVector<f64>],
    x0: DVector<f64>,
    value0: f64,
) -> Result<Refined> {
    let mut cuts = coords.to_vec();
    let (mut x, mut value) = match rho_with(sip, objective, &cuts, sip.slater(), REFINE_TOL) {
        Ok(r) if r.inner.status != InnerStatus::Infeasible && r.value.is_finite() => (r.x_relaxed, r.value),
        _ => (x0, value0),
    };
    let mut rounds = 0;
    let mut viol;
    loop {
        let (z, g) = most_violated(sip, &x, &cuts);
        viol = g.max(0.0);
        if g <= EXCHANGE_TOL || rounds == MAX_ROUNDS {
            break;
        }
        if cuts.iter().any(|c| (c - &z).amax() <= 1e-14) {
            // already a cut: only solver tolerance is left
            break;
        }
        cuts.push(z);
        rounds += 1;
        let r = rho_with(sip, objective, &cuts, sip.slater(), REFINE_TOL)?;
        if r.inner.status == InnerStatus::Infeasible || !r.value.is_finite() {
            cuts.pop();
            break;
        }
        x = r.x_relaxed;
        value = r.value;
    }
    Ok(Refined { x, value, cuts, max_violation: viol, rounds })
}
