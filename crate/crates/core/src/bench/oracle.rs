//! Brute-force references: grid minimax for low-dimensional sets and the
//! exact Euclidean enclosing ball of a handful of points.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::report::OracleReport;
use crate::chebyshev::ChebyshevTask;
use crate::domain::{coordinate_parametrize, BoxDomain, ConstraintSet, FEASIBILITY_TOL};
use crate::error::{Error, Result};
use crate::sip::extreme;

pub const MAX_RESOLUTION: usize = 2048;
pub const MAX_ORACLE_DIM: usize = 3;
/// Per-axis cap in three dimensions, keeping the grid near 2²¹ points.
pub const MAX_RESOLUTION_3D: usize = 128;
const CENTER_GRID: usize = 9;
const CENTER_ROUNDS: usize = 200;

/// Grid minimax radius and center of `task` at `resolution` points per axis.
pub fn grid_oracle(task: &ChebyshevTask, resolution: usize) -> Result<OracleReport> {
    if !(2..=MAX_RESOLUTION).contains(&resolution) {
        return Err(Error::InvalidArgument(format!("resolution must lie in 2..={MAX_RESOLUTION}")));
    }
    let param = task.set.parametrized()?;
    let k = param.dim();
    if k > MAX_ORACLE_DIM {
        return Err(Error::Unsupported(format!("the set has dimension {k}; the oracle handles at most {MAX_ORACLE_DIM}")));
    }
    let res = if k == 3 { resolution.min(MAX_RESOLUTION_3D) } else { resolution };
    let zbox = if param.inequalities().is_empty() {
        param.bbox().clone()
    } else {
        extreme::tight_bbox(&param).unwrap_or_else(|| param.bbox().clone())
    };
    let pts = boundary_points(&param, &zbox, res);
    if pts.is_empty() {
        return Err(Error::EmptySet("no grid point of the set was found".into()));
    }
    let pk: Vec<DVector<f64>> = pts
        .iter()
        .map(|z| {
            let u = param.to_ambient(z);
            match &task.maps {
                Some((_, p)) => p * u,
                None => u,
            }
        })
        .collect();
    let s = match &task.maps {
        Some((s, _)) => s.clone(),
        None => DMatrix::identity(task.center_dim(), task.center_dim()),
    };

    // centers c = c0 + B y over a box in y
    let cbox = task.search_box()?;
    let (c0, b, ybox) = match &task.center_equalities {
        None => (DVector::zeros(cbox.dim()), DMatrix::identity(cbox.dim(), cbox.dim()), cbox.clone()),
        Some((a, rhs)) => {
            let p = coordinate_parametrize(a, rhs)?;
            let yb = interval_box(p.left_inverse(), p.particular(), &cbox)?;
            (p.particular().clone(), p.basis().clone(), yb)
        }
    };
    if ybox.dim() > MAX_ORACLE_DIM {
        return Err(Error::Unsupported("center space of dimension above 3".into()));
    }
    let norm = &task.norm;
    let sb = &s * &b;
    let sc0 = &s * &c0;
    let radius_at = |y: &DVector<f64>| -> f64 {
        let sc = &sc0 + &sb * y;
        pk.par_iter().map(|q| norm.apply((&sc - q).as_slice())).reduce(|| f64::NEG_INFINITY, f64::max)
    };

    let mut lo = ybox.lower().clone();
    let mut hi = ybox.upper().clone();
    let mut best = ybox.center();
    let mut best_r = radius_at(&best);
    for _ in 0..CENTER_ROUNDS {
        let grid = lattice(&lo, &hi, CENTER_GRID);
        for y in grid {
            let r = radius_at(&y);
            if r < best_r {
                best_r = r;
                best = y;
            }
        }
        let step = (&hi - &lo) / (CENTER_GRID - 1) as f64;
        if step.amax() <= 1e-12 * (1.0 + best.amax()) {
            break;
        }
        lo = (&best - &step * 2.0).zip_map(ybox.lower(), f64::max);
        hi = (&best + &step * 2.0).zip_map(ybox.upper(), f64::min);
    }
    let center = &c0 + &b * &best;

    // one grid cell of the set, measured in the residual norm
    let basis = param.embedding().map(|e| e.basis().clone()).unwrap_or_else(|| DMatrix::identity(k, k));
    let pmap = match &task.maps {
        Some((_, p)) => p * &basis,
        None => basis,
    };
    let mut bound = 0.0;
    for i in 0..k {
        let h = zbox.width()[i] / (res - 1) as f64;
        let col = pmap.column(i) * h;
        bound += norm.apply(col.as_slice());
    }
    Ok(OracleReport {
        resolution: res,
        points: pts.len(),
        radius: best_r,
        center: center.as_slice().to_vec(),
        error_bound: bound,
    })
}

fn interval_box(left: &DMatrix<f64>, p: &DVector<f64>, bx: &BoxDomain) -> Result<BoxDomain> {
    let k = left.nrows();
    let mut lo = DVector::zeros(k);
    let mut hi = DVector::zeros(k);
    for j in 0..k {
        for i in 0..left.ncols() {
            let e1 = left[(j, i)] * (bx.lower()[i] - p[i]);
            let e2 = left[(j, i)] * (bx.upper()[i] - p[i]);
            lo[j] += e1.min(e2);
            hi[j] += e1.max(e2);
        }
    }
    BoxDomain::new(lo, hi)
}

fn lattice(lo: &DVector<f64>, hi: &DVector<f64>, n: usize) -> Vec<DVector<f64>> {
    let m = lo.len();
    let total = n.pow(m as u32);
    (0..total)
        .map(|mut idx| {
            DVector::from_fn(m, |i, _| {
                let j = idx % n;
                idx /= n;
                lo[i] + (hi[i] - lo[i]) * j as f64 / (n - 1) as f64
            })
        })
        .collect()
}

/// Extreme feasible points on every grid line along the first axis: the
/// samples, feasibility boundaries refined by bisection, and feasible
/// minima of the residual between samples (pinched parts of the set). A
/// convex function's maximum over these points is attained at the first or
/// last of them on each line.
fn boundary_points(set: &ConstraintSet, bx: &BoxDomain, res: usize) -> Vec<DVector<f64>> {
    let k = bx.dim();
    let at = |i: usize, t: f64| bx.lower()[i] + bx.width()[i] * t / (res - 1) as f64;
    let lines = res.pow(k.saturating_sub(1) as u32);
    (0..lines)
        .into_par_iter()
        .flat_map_iter(|mut line| {
            let mut z = DVector::zeros(k);
            for i in 1..k {
                z[i] = at(i, (line % res) as f64);
                line /= res;
            }
            let resid = |t: f64| {
                let mut u = z.clone();
                u[0] = at(0, t);
                set.residual(&u)
            };
            let r: Vec<f64> = (0..res).map(|j| resid(j as f64)).collect();
            let mut ts: Vec<f64> = Vec::new();
            for j in 0..res {
                if r[j] <= FEASIBILITY_TOL {
                    ts.push(j as f64);
                }
                if j + 1 < res && (r[j] <= FEASIBILITY_TOL) != (r[j + 1] <= FEASIBILITY_TOL) {
                    let (mut a, mut b) = (j as f64, (j + 1) as f64);
                    // keep `a` feasible
                    if r[j] > FEASIBILITY_TOL {
                        std::mem::swap(&mut a, &mut b);
                    }
                    for _ in 0..50 {
                        let m = 0.5 * (a + b);
                        if resid(m) <= FEASIBILITY_TOL {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    ts.push(a);
                }
                let lo = if j == 0 { f64::INFINITY } else { r[j - 1] };
                let hi = if j + 1 == res { f64::INFINITY } else { r[j + 1] };
                if r[j] > FEASIBILITY_TOL && r[j] <= lo && r[j] <= hi {
                    let (t, v) = golden_min(&resid, (j as f64 - 1.0).max(0.0), (j as f64 + 1.0).min((res - 1) as f64));
                    if v <= FEASIBILITY_TOL {
                        ts.push(t);
                    }
                }
            }
            let first = ts.iter().cloned().fold(f64::INFINITY, f64::min);
            let last = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut out = Vec::new();
            if first.is_finite() {
                let mut u = z.clone();
                u[0] = at(0, first);
                out.push(u);
                if last > first {
                    let mut u = z.clone();
                    u[0] = at(0, last);
                    out.push(u);
                }
            }
            out
        })
        .collect()
}

fn golden_min(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, f(t))
}

/// Smallest Euclidean ball containing planar points: best of all pair
/// midpoints and triple circumcircles that cover every point.
pub fn min_enclosing_ball_2d(points: &[DVector<f64>]) -> Option<(DVector<f64>, f64)> {
    if points.is_empty() || points.iter().any(|p| p.len() != 2) {
        return None;
    }
    if points.len() == 1 {
        return Some((points[0].clone(), 0.0));
    }
    let covers = |c: &DVector<f64>, r: f64| points.iter().all(|p| (p - c).norm() <= r * (1.0 + 1e-12) + 1e-12);
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut consider = |c: DVector<f64>, r: f64| {
        if best.as_ref().is_none_or(|(_, br)| r < *br) && covers(&c, r) {
            best = Some((c, r));
        }
    };
    let n = points.len();
    for i in 0..n {
        for j in i + 1..n {
            let c = (&points[i] + &points[j]) * 0.5;
            let r = (&points[i] - &c).norm();
            consider(c, r);
            for l in j + 1..n {
                if let Some(c) = circumcenter(&points[i], &points[j], &points[l]) {
                    let r = (&points[i] - &c).norm();
                    consider(c, r);
                }
            }
        }
    }
    best
}

fn circumcenter(a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Option<DVector<f64>> {
    let (ax, ay, bx, by, cx, cy) = (a[0], a[1], b[0], b[1], c[0], c[1]);
    let d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    if d.abs() < 1e-14 {
        return None;
    }
    let a2 = ax * ax + ay * ay;
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
    let uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
    Some(DVector::from_vec(vec![ux, uy]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Inequality;
    use crate::norm::Norm;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    #[test]
    fn unit_square_grid_radius() {
        let task = ChebyshevTask::new(ConstraintSet::boxed(BoxDomain::cube(2, 0.0, 1.0).unwrap()), Norm::l2());
        let o = grid_oracle(&task, 256).unwrap();
        assert_abs_diff_eq!(o.radius, 0.5f64.sqrt(), epsilon = 1e-6);
        assert_abs_diff_eq!(o.center[0], 0.5, epsilon = 1e-6);
        assert!(o.error_bound < 0.01);
    }

    #[test]
    fn segment_on_a_line() {
        // 2x − y = −3 within |x| ≤ 5, |y| ≤ 10: midpoint (−0.75, 1.5)
        let k = ConstraintSet::new(
            BoxDomain::from_bounds(&[(-5.0, 5.0), (-10.0, 10.0)]).unwrap(),
            Vec::new(),
            Some((DMatrix::from_row_slice(1, 2, &[2.0, -1.0]), dvector![-3.0])),
        )
        .unwrap();
        let task = ChebyshevTask::new(k, Norm::l2()).with_center_equalities(DMatrix::from_row_slice(1, 2, &[2.0, -1.0]), dvector![-3.0]);
        let o = grid_oracle(&task, 512).unwrap();
        assert_abs_diff_eq!(o.center[0], -0.75, epsilon = 1e-6);
        assert_abs_diff_eq!(o.center[1], 1.5, epsilon = 1e-6);
    }

    #[test]
    fn four_dimensional_sets_are_refused() {
        let task = ChebyshevTask::new(ConstraintSet::boxed(BoxDomain::cube(4, 0.0, 1.0).unwrap()), Norm::l2());
        assert!(matches!(grid_oracle(&task, 8), Err(Error::Unsupported(_))));
    }

    #[test]
    fn lens_grid_radius() {
        let k = ConstraintSet::new(
            BoxDomain::cube(2, 0.0, 1.0).unwrap(),
            vec![
                Inequality::outside_ball(dvector![0.0, 0.0], 1.0 / 3.0),
                Inequality::outside_ball(dvector![1.0, 0.0], 2.0 / 3.0),
            ],
            None,
        )
        .unwrap();
        let o = grid_oracle(&ChebyshevTask::new(k, Norm::l2()), 256).unwrap();
        assert!(o.error_bound < 0.01);
        assert!((o.radius - 0.633431).abs() <= o.error_bound + 1e-3, "{o:?}");
    }

    #[test]
    fn enclosing_ball_of_a_right_triangle() {
        let pts = [dvector![0.0, 0.0], dvector![2.0, 0.0], dvector![0.0, 2.0]];
        let (c, r) = min_enclosing_ball_2d(&pts).unwrap();
        assert_abs_diff_eq!(c, dvector![1.0, 1.0], epsilon = 1e-12);
        assert_abs_diff_eq!(r, 2f64.sqrt(), epsilon = 1e-12);
        // an obtuse triangle is covered by its longest edge
        let pts = [dvector![0.0, 0.0], dvector![4.0, 0.0], dvector![2.0, 0.5]];
        let (c, r) = min_enclosing_ball_2d(&pts).unwrap();
        assert_abs_diff_eq!(c, dvector![2.0, 0.0], epsilon = 1e-12);
        assert_abs_diff_eq!(r, 2.0, epsilon = 1e-12);
    }
}
