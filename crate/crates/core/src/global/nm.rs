use nalgebra::DVector;

use super::{better, rank_value, GlobalConfig, Tracker};
use crate::domain::BoxDomain;
use crate::sampling::ScrambledHalton;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Bounded Nelder–Mead maximization from `x0`.
///
/// `step[j]` is the initial simplex edge along coordinate `j`; coordinates
/// with zero step stay fixed. Returns `(best point, best value, evaluations,
/// converged)`.
fn maximize_core(
    eval: &mut dyn FnMut(&DVector<f64>) -> f64,
    bx: &BoxDomain,
    x0: &DVector<f64>,
    step: &DVector<f64>,
    max_evals: usize,
    value_tol: f64,
) -> (DVector<f64>, f64, usize, bool) {
    let active: Vec<usize> = (0..x0.len()).filter(|&j| step[j] > 0.0).collect();
    let mut used = 0;
    let mut x0 = x0.clone();
    bx.clip(&mut x0);
    let f0 = rank_value(eval(&x0));
    used += 1;
    if active.is_empty() || used >= max_evals {
        return (x0, f0, used, active.is_empty());
    }
    let mut simplex = vec![(x0.clone(), f0)];
    for &j in &active {
        let mut v = x0.clone();
        v[j] = if x0[j] + step[j] <= bx.upper()[j] { x0[j] + step[j] } else { x0[j] - step[j] };
        bx.clip(&mut v);
        let fv = rank_value(eval(&v));
        used += 1;
        simplex.push((v, fv));
        if used >= max_evals {
            break;
        }
    }
    let scale = step.amax();
    let n = active.len();
    let mut converged = false;
    while used < max_evals && simplex.len() == n + 1 {
        // descending by value, ties keep earlier vertices first
        simplex.sort_by(|a, b| {
            if better(a.1, b.1) {
                std::cmp::Ordering::Less
            } else if better(b.1, a.1) {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        });
        let fb = simplex[0].1;
        let fw = simplex[n].1;
        let diam = simplex[1..]
            .iter()
            .map(|(v, _)| (v - &simplex[0].0).amax())
            .fold(0.0, f64::max);
        let flat = fb.is_finite() && fw.is_finite() && fb - fw <= value_tol * (1.0 + fb.abs());
        if (flat && diam <= 1e-7 * scale) || diam <= 1e-12 * scale {
            converged = true;
            break;
        }
        let mut centroid = DVector::zeros(x0.len());
        for (v, _) in &simplex[..n] {
            centroid += v;
        }
        centroid /= n as f64;
        let worst = simplex[n].0.clone();
        let point = |t: f64| {
            let mut p = &centroid + (&centroid - &worst) * t;
            bx.clip(&mut p);
            p
        };
        let xr = point(REFLECT);
        let fr = rank_value(eval(&xr));
        used += 1;
        if better(fr, fb) {
            let xe = point(EXPAND);
            if used >= max_evals {
                simplex[n] = (xr, fr);
                break;
            }
            let fe = rank_value(eval(&xe));
            used += 1;
            simplex[n] = if better(fe, fr) { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if better(fr, simplex[n - 1].1) {
            simplex[n] = (xr, fr);
            continue;
        }
        if used >= max_evals {
            break;
        }
        let outside = better(fr, fw);
        let xc = if outside { point(REFLECT * CONTRACT) } else { point(-CONTRACT) };
        let fc = rank_value(eval(&xc));
        used += 1;
        let accept = if outside { !better(fr, fc) } else { better(fc, fw) };
        if accept {
            simplex[n] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for k in 1..=n {
            if used >= max_evals {
                break;
            }
            let mut v = &best + (&simplex[k].0 - &best) * SHRINK;
            bx.clip(&mut v);
            let fv = rank_value(eval(&v));
            used += 1;
            simplex[k] = (v, fv);
        }
    }
    let mut b = 0;
    for i in 1..simplex.len() {
        if better(simplex[i].1, simplex[b].1) {
            b = i;
        }
    }
    (simplex[b].0.clone(), simplex[b].1, used, converged)
}

fn steps(bx: &BoxDomain, fraction: f64) -> DVector<f64> {
    bx.width() * fraction
}

/// Plain bounded Nelder–Mead maximization of `f` from `x0`.
///
/// Returns the best point, its value and the number of evaluations.
pub fn nelder_mead_max<F>(
    f: F,
    bx: &BoxDomain,
    x0: &DVector<f64>,
    simplex_fraction: f64,
    max_evals: usize,
    value_tol: f64,
) -> (DVector<f64>, f64, usize)
where
    F: Fn(&DVector<f64>) -> f64,
{
    let mut eval = |u: &DVector<f64>| f(u);
    let (x, v, n, _) = maximize_core(&mut eval, bx, x0, &steps(bx, simplex_fraction), max_evals.max(1), value_tol);
    (x, v, n)
}

pub(super) fn local_run<F>(tr: &mut Tracker<'_, F>, start: &DVector<f64>, fraction: f64, value_tol: f64) -> bool
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    let bx = tr.bx().clone();
    let budget = tr.remaining();
    if budget == 0 {
        return false;
    }
    let mut eval = |u: &DVector<f64>| tr.eval(u);
    maximize_core(&mut eval, &bx, start, &steps(&bx, fraction), budget, value_tol).3
}

/// Returns whether every restart converged before the budget ran out.
pub(super) fn run<F>(tr: &mut Tracker<'_, F>, cfg: &GlobalConfig) -> bool
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    let bx = tr.bx().clone();
    let mut halton = ScrambledHalton::new(bx.dim(), cfg.seed);
    let restarts = cfg.nm.restarts.max(cfg.initial_guesses.len());
    let mut all_converged = true;
    for k in 0..restarts {
        let left = restarts - k;
        let budget = tr.remaining() / left;
        if budget == 0 {
            all_converged = false;
            break;
        }
        let start = match cfg.initial_guesses.get(k) {
            Some(g) => g.clone(),
            None => bx.from_unit(&halton.next_point()),
        };
        let cap = tr.evals + budget;
        let saved = tr.budget;
        tr.budget = cap;
        let ok = local_run(tr, &start, cfg.nm.simplex_fraction, cfg.value_tol);
        tr.budget = saved;
        all_converged &= ok;
    }
    all_converged
}
