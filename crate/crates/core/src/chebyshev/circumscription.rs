//! Independent check that a ball of the returned radius around the returned
//! center covers the whole set.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_chebyshev_sip, ChebyshevTask};
use crate::error::{Error, Result};
use crate::sip::{extreme, most_violated, SipProblem};

pub const MIN_PROBES: usize = 1000;
/// Largest accepted excess of `‖S x − P k‖` over the radius.
pub const CIRCUMSCRIPTION_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circumscription {
    /// `max_k ‖S x − P k‖ − r` over all probes.
    pub worst: f64,
    /// Where the worst excess was found (index coordinates).
    pub worst_point: DVector<f64>,
    pub probes: usize,
    pub ok: bool,
}

/// Largest excess over `radius` of the distance from `center` to the set,
/// probing with at least [`MIN_PROBES`] points.
pub fn worst_violation(
    task: &ChebyshevTask,
    center: &DVector<f64>,
    radius: f64,
    probes: usize,
    seed: u64,
) -> Result<Circumscription> {
    if probes < MIN_PROBES {
        return Err(Error::InvalidArgument(format!("at least {MIN_PROBES} probes are required, got {probes}")));
    }
    if center.len() != task.center_dim() {
        return Err(Error::DimensionMismatch { expected: task.center_dim(), got: center.len() });
    }
    let sip = build_chebyshev_sip(&task.clone().with_search(center_box(task, center)?))?;
    let mut x = DVector::zeros(center.len() + 1);
    x[0] = radius;
    x.rows_mut(1, center.len()).copy_from(center);
    let pts = probe_set(&sip, probes, seed);
    let count = pts.len() + sip.cached_probes().len();
    let (z, g) = most_violated(&sip, &x, &pts);
    Ok(Circumscription {
        worst: g,
        worst_point: sip.index_point(&z),
        probes: count,
        ok: g <= CIRCUMSCRIPTION_TOL,
    })
}

/// Checks a computed center against its radius.
pub fn circumscription_check(
    result: &super::ChebyshevResult,
    task: &ChebyshevTask,
    probes: usize,
) -> Result<Circumscription> {
    check_ball(task, &result.center, result.radius, &result.active_points, probes)
}

/// Probe check of a ball that also scores the given index points.
pub fn check_ball(
    task: &ChebyshevTask,
    center: &DVector<f64>,
    radius: f64,
    extra: &[DVector<f64>],
    probes: usize,
) -> Result<Circumscription> {
    let mut c = worst_violation(task, center, radius, probes, 0x5eed)?;
    for p in extra {
        let g = point_excess(task, center, radius, p);
        if g > c.worst {
            c.worst = g;
            c.worst_point = p.clone();
        }
    }
    c.ok = c.worst <= CIRCUMSCRIPTION_TOL;
    Ok(c)
}

fn point_excess(task: &ChebyshevTask, center: &DVector<f64>, radius: f64, k: &DVector<f64>) -> f64 {
    let r = match &task.maps {
        Some((s, p)) => s * center - p * k,
        None => center - k,
    };
    task.norm.apply(r.as_slice()) - radius
}

/// A degenerate box at the center keeps the build valid for any center.
fn center_box(task: &ChebyshevTask, center: &DVector<f64>) -> Result<crate::domain::BoxDomain> {
    let bx = match &task.search {
        Some(b) => b.clone(),
        None if task.maps.is_none() => task.search_box()?,
        None => return crate::domain::BoxDomain::new(center.clone(), center.clone()),
    };
    let lo = bx.lower().zip_map(center, f64::min);
    let hi = bx.upper().zip_map(center, f64::max);
    crate::domain::BoxDomain::new(lo, hi)
}

/// Halton points, vertices, and LP extreme points in coordinate and random
/// directions (search coordinates).
fn probe_set(sip: &SipProblem, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let set = sip.search_set();
    let k = set.dim();
    let mut out: Vec<DVector<f64>> = sip
        .probe_points(count, seed)
        .into_iter()
        .collect();
    // restored probes fill in thin sets where rejection keeps few points
    let mut h = crate::sampling::ScrambledHalton::new(k, seed ^ 0xa5a5);
    for _ in 0..count {
        let z = set.bbox().from_unit(&h.next_point());
        if !set.contains(&z) {
            let r = set.restore(&z);
            if set.contains(&r) {
                out.push(r);
            }
        }
    }
    if k <= 5 {
        if let Some(v) = set.polytope_vertices() {
            out.extend(v);
        }
    }
    if sip.search_set_is_convex() && k > 0 {
        let mut dirs = Vec::new();
        for i in 0..k {
            let mut e = DVector::zeros(k);
            e[i] = 1.0;
            dirs.push(e.clone());
            dirs.push(-e);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..(4 * k).min(64) {
            let d = DVector::from_fn(k, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            if d.norm() > 0.0 {
                dirs.push(d);
            }
        }
        let ext: Vec<DVector<f64>> = dirs.par_iter().filter_map(|d| extreme::extreme_point(set, d)).collect();
        out.extend(ext);
    }
    out
}
