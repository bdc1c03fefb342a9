//! Linear optimization over convex index sets, used to tighten search boxes
//! and to push probes to extreme points.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::domain::{BoxDomain, ConstraintSet, Inequality};
use crate::nlp::{solve_finite_convex, Constraint, FiniteConvexProgram, InnerStatus, Linear, SmoothConvex};

/// `uᵀ Q u + l · u + c` with `Q` positive semidefinite.
struct QuadraticForm {
    q: DMatrix<f64>,
    linear: DVector<f64>,
    constant: f64,
}

impl SmoothConvex for QuadraticForm {
    fn dim(&self) -> usize {
        self.linear.len()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.q * x)) + self.linear.dot(x) + self.constant
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.q + self.q.transpose()) * x + &self.linear
    }
    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        &self.q + self.q.transpose()
    }
    fn describe(&self) -> String {
        "quadratic form".into()
    }
}

/// The set as the feasible region of a convex program, when its
/// inequalities are halfspaces or convex quadratics.
fn as_program(set: &ConstraintSet, objective: Arc<dyn SmoothConvex>) -> Option<FiniteConvexProgram> {
    let mut cons = Vec::new();
    for ineq in set.inequalities() {
        match ineq {
            Inequality::Halfspace { normal, offset } => cons.push(Constraint::Affine { a: normal.clone(), b: *offset }),
            Inequality::Quadratic { q, linear, constant } => {
                let sym = (q + q.transpose()) * 0.5;
                let min_eig = sym.clone().symmetric_eigen().eigenvalues.min();
                if min_eig < -1e-12 * (1.0 + sym.amax()) {
                    return None;
                }
                cons.push(Constraint::Smooth(Arc::new(QuadraticForm {
                    q: sym,
                    linear: linear.clone(),
                    constant: *constant,
                })));
            }
            Inequality::Custom(_) => return None,
        }
    }
    let p = FiniteConvexProgram::new(objective, cons, set.bbox().clone()).ok()?;
    match set.equalities() {
        Some((a, y)) => p.with_equalities(a.clone(), y.clone()).ok(),
        None => Some(p),
    }
}

pub fn is_convex(set: &ConstraintSet) -> bool {
    as_program(set, Arc::new(Linear::new(DVector::zeros(set.dim()), 0.0))).is_some()
}

/// Approximate maximizer of `dir · u` over a convex set.
pub fn extreme_point(set: &ConstraintSet, dir: &DVector<f64>) -> Option<DVector<f64>> {
    let p = as_program(set, Arc::new(Linear::new(-dir, 0.0)))?;
    let s = solve_finite_convex(&p, set.feasible_point(), 1e-11).ok()?;
    if s.status == InnerStatus::Infeasible {
        return None;
    }
    let u = if set.contains(&s.x_star) { s.x_star } else { set.restore(&s.x_star) };
    set.contains(&u).then_some(u)
}

/// Coordinate extents of a convex set, padded slightly outward.
pub fn tight_bbox(set: &ConstraintSet) -> Option<BoxDomain> {
    let k = set.dim();
    let bx = set.bbox();
    let mut lo = bx.lower().clone();
    let mut hi = bx.upper().clone();
    for i in 0..k {
        if bx.is_degenerate(i) {
            continue;
        }
        let mut e = DVector::zeros(k);
        e[i] = 1.0;
        let up = extreme_point(set, &e)?;
        let down = extreme_point(set, &-e)?;
        let pad = 1e-7 * bx.width()[i] + 1e-12;
        hi[i] = (up[i] + pad).min(bx.upper()[i]);
        lo[i] = (down[i] - pad).max(bx.lower()[i]);
    }
    BoxDomain::new(lo, hi).ok()
}

/// Maximizes a convex function over a convex set by repeated linearization:
/// each step moves to the extreme point in the gradient direction, which
/// never decreases a convex function.
pub fn convex_ascent<F>(set: &ConstraintSet, f: F, z0: &DVector<f64>, max_steps: usize) -> (DVector<f64>, f64)
where
    F: Fn(&DVector<f64>) -> f64,
{
    let mut z = z0.clone();
    let mut v = f(&z);
    for _ in 0..max_steps {
        let g = numeric_gradient(&f, &z, set.bbox());
        if g.amax() == 0.0 {
            break;
        }
        let Some(next) = extreme_point(set, &g) else { break };
        let nv = f(&next);
        if !(nv > v + 1e-14 * (1.0 + v.abs())) {
            break;
        }
        z = next;
        v = nv;
    }
    (z, v)
}

fn numeric_gradient<F>(f: &F, z: &DVector<f64>, bx: &BoxDomain) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let k = z.len();
    let mut g = DVector::zeros(k);
    let mut w = z.clone();
    for i in 0..k {
        if bx.is_degenerate(i) {
            continue;
        }
        let h = 1e-6 * (bx.width()[i] + z[i].abs()).max(1e-6);
        w[i] = z[i] + h;
        let fp = f(&w);
        w[i] = z[i] - h;
        let fm = f(&w);
        w[i] = z[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    fn triangle() -> ConstraintSet {
        let s3 = 3f64.sqrt();
        ConstraintSet::new(
            BoxDomain::from_bounds(&[(-2.0, 2.0), (-1.0, 3.0)]).unwrap(),
            vec![
                Inequality::halfspace(dvector![s3, 1.0], s3).unwrap(),
                Inequality::halfspace(dvector![-s3, 1.0], s3).unwrap(),
                Inequality::halfspace(dvector![0.0, -1.0], 0.0).unwrap(),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn triangle_extents() {
        let b = tight_bbox(&triangle()).unwrap();
        assert_abs_diff_eq!(b.lower()[0], -1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(b.upper()[0], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(b.lower()[1], 0.0, epsilon = 1e-5);
        assert_abs_diff_eq!(b.upper()[1], 3f64.sqrt(), epsilon = 1e-5);
    }

    #[test]
    fn ascent_reaches_the_far_vertex() {
        let t = triangle();
        let far = dvector![5.0, -3.0];
        let (z, v) = convex_ascent(&t, |z| (z - &far).norm(), &dvector![0.0, 0.5], 20);
        // vertex distances: 45^½ for (−1, 0), 5 for (1, 0), larger for the apex
        let apex = dvector![0.0, 3f64.sqrt()];
        assert_abs_diff_eq!(z, apex, epsilon = 1e-5);
        assert_abs_diff_eq!(v, (&apex - &far).norm(), epsilon = 1e-5);
    }

    #[test]
    fn nonconvex_sets_are_refused() {
        let lens = ConstraintSet::new(
            BoxDomain::cube(2, 0.0, 1.0).unwrap(),
            vec![Inequality::outside_ball(dvector![0.0, 0.0], 1.0 / 3.0)],
            None,
        )
        .unwrap();
        assert!(!is_convex(&lens));
        assert!(is_convex(&triangle()));
    }
}
