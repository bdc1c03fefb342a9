use std::f64::consts::PI;
use std::sync::Arc;

use approx::assert_abs_diff_eq;
use nalgebra::{dvector, DVector};

use super::*;
use crate::domain::Inequality;
use crate::global::Strategy;
use crate::nlp::{Linear, Quadratic};
use crate::norm::Norm;

/// min y s.t. x cos θ + y sin θ ≤ 3 for θ ∈ [0, 2π], (x, y) ∈ [−4, 4]².
fn disk_sip() -> SipProblem {
    let fam = AffineFamily::new(
        2,
        1,
        vec![
            AffineTerm { feature: IndexFeature::Cos { index: 0 }, a: dvector![1.0, 0.0], b: 0.0 },
            AffineTerm { feature: IndexFeature::Sin { index: 0 }, a: dvector![0.0, 1.0], b: 0.0 },
            AffineTerm { feature: IndexFeature::Const {}, a: dvector![0.0, 0.0], b: -3.0 },
        ],
    )
    .unwrap();
    SipProblem::new(
        Arc::new(Linear::coordinate(2, 1)),
        Arc::new(fam),
        BoxDomain::cube(2, -4.0, 4.0).unwrap(),
        ConstraintSet::boxed(BoxDomain::cube(1, 0.0, 2.0 * PI).unwrap()),
        dvector![0.0, 0.0],
    )
    .unwrap()
}

fn l1_polytope() -> ConstraintSet {
    let bbox = BoxDomain::from_bounds(&[(-2.0, 2.0), (-1.0, 1.0)]).unwrap();
    let ineqs = vec![
        Inequality::halfspace(dvector![1.0, 2.0], 2.0).unwrap(),
        Inequality::halfspace(dvector![-1.0, 2.0], 2.0).unwrap(),
        Inequality::halfspace(dvector![1.0, -4.0], 2.0).unwrap(),
        Inequality::halfspace(dvector![-1.0, 0.0], 2.0).unwrap(),
    ];
    ConstraintSet::new(bbox, ineqs, None).unwrap()
}

/// min t s.t. ‖x − k‖ ≤ t over k ∈ K.
fn cover_sip(norm: Norm, k: ConstraintSet, search: BoxDomain, tmax: f64) -> SipProblem {
    let d = k.dim();
    let mut bounds = vec![(0.0, tmax)];
    for i in 0..d {
        bounds.push((search.lower()[i], search.upper()[i]));
    }
    let mut slater = DVector::zeros(d + 1);
    slater[0] = tmax;
    slater.rows_mut(1, d).copy_from(k.feasible_point());
    SipProblem::new(
        Arc::new(Linear::coordinate(d + 1, 0)),
        Arc::new(NormBallFamily::cover(norm, d)),
        BoxDomain::from_bounds(&bounds).unwrap(),
        k,
        slater,
    )
    .unwrap()
}

fn de(seed: u64) -> GlobalConfig {
    GlobalConfig::with_strategy(Strategy::DifferentialEvolution, seed)
}

#[test]
fn two_point_cover_has_unit_value() {
    let k = ConstraintSet::boxed(BoxDomain::from_bounds(&[(0.0, 2.0), (0.0, 0.0)]).unwrap());
    let sip = cover_sip(Norm::l2(), k, BoxDomain::cube(2, -3.0, 3.0).unwrap(), 10.0);
    let r = rho_eval(&sip, &[dvector![0.0, 0.0], dvector![2.0, 0.0]], sip.slater()).unwrap();
    assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-7);
}

#[test]
fn disk_tuples() {
    let sip = disk_sip();
    let x0 = sip.slater().clone();
    let r = rho_eval(&sip, &[dvector![1.5 * PI], dvector![PI], dvector![0.0]], &x0).unwrap();
    assert_abs_diff_eq!(r.value, -3.0, epsilon = 1e-7);
    let r = rho_eval(&sip, &vec![dvector![0.5 * PI]; 3], &x0).unwrap();
    assert_abs_diff_eq!(r.value, -4.0, epsilon = 1e-7);
    assert!(rho_eval(&sip, &[dvector![7.0]], &x0).is_err());
}

#[test]
fn disk_value() {
    let sip = disk_sip();
    assert!(sip.hypotheses().slater_validated);
    let s = solve_sip_value(&sip, &de(1)).unwrap();
    assert_abs_diff_eq!(s.value, -3.0, epsilon = 1e-4);
}

#[test]
fn l1_polytope_value() {
    let k = l1_polytope();
    let search = k.bbox().inflated(0.5);
    let sip = cover_sip(Norm::l1(), k, search, 20.0);
    let s = solve_sip_value(&sip, &de(3)).unwrap();
    assert_abs_diff_eq!(s.value, 2.5, epsilon = 1e-2);
}

#[test]
fn singleton_index_set_is_one_inner_solve() {
    let k = ConstraintSet::boxed(BoxDomain::from_bounds(&[(0.5, 0.5), (-1.0, -1.0)]).unwrap());
    let sip = cover_sip(Norm::l2(), k, BoxDomain::cube(2, -3.0, 3.0).unwrap(), 10.0);
    let s = solve_sip_value(&sip, &de(0)).unwrap();
    let direct = rho_eval(&sip, &[dvector![0.5, -1.0]], sip.slater()).unwrap();
    assert_abs_diff_eq!(s.value, direct.value, epsilon = 1e-8);
    assert_abs_diff_eq!(s.value, 0.0, epsilon = 1e-7);
}

#[test]
fn zero_eps_is_rejected() {
    let sip = disk_sip();
    let psi: Arc<dyn SmoothConvex> = Arc::new(Quadratic::isotropic(DVector::zeros(2)));
    assert!(matches!(
        solve_sip_regularized(&sip, psi.clone(), 0.0, &de(0)),
        Err(Error::InvalidArgument(_))
    ));
    let lin: Arc<dyn SmoothConvex> = Arc::new(Linear::coordinate(2, 0));
    assert!(solve_sip_regularized(&sip, lin, 0.1, &de(0)).is_err());
}

#[test]
fn disk_regularized_point_lies_near_the_arc() {
    let sip = disk_sip();
    let psi: Arc<dyn SmoothConvex> = Arc::new(Quadratic::isotropic(DVector::zeros(2)));
    let r = solve_sip_regularized(&sip, psi, 0.1, &de(2)).unwrap();
    assert!(r.x.norm() <= 3.0 + 1e-6);
    assert!(r.x[1] < -2.5);
    // oracle: on the arc the regularized objective y + ε/2·9 is minimized at (0, −3)
    assert_abs_diff_eq!(r.x, dvector![0.0, -3.0], epsilon = 1e-3);
}

#[test]
fn strictly_convex_objective_gives_a_flat_path() {
    // min ½‖x − (1, 1)‖² over the disk of radius 3: the optimizer is interior
    let fam = disk_sip().family().clone();
    let sip = SipProblem::new(
        Arc::new(Quadratic::isotropic(dvector![1.0, 1.0])),
        fam,
        BoxDomain::cube(2, -4.0, 4.0).unwrap(),
        ConstraintSet::boxed(BoxDomain::cube(1, 0.0, 2.0 * PI).unwrap()),
        dvector![0.0, 0.0],
    )
    .unwrap();
    let psi: Arc<dyn SmoothConvex> = Arc::new(Quadratic::isotropic(dvector![-2.0, 0.5]));
    let schedule: Vec<f64> = (8..14).map(|k| 0.5f64.powi(k)).collect();
    let path = extract_optimizer(&sip, psi, &schedule, &de(4)).unwrap();
    for w in path.solutions.windows(2) {
        assert!((&w[1].x - &w[0].x).amax() <= (w[0].eps * 2.0).max(1e-6));
    }
    assert_abs_diff_eq!(path.limit, dvector![1.0, 1.0], epsilon = 1e-3);
}

#[test]
fn disk_path_converges_to_the_bottom_point() {
    let sip = disk_sip();
    let psi: Arc<dyn SmoothConvex> = Arc::new(Quadratic::isotropic(dvector![1.0, 0.0]));
    let path = extract_optimizer(&sip, psi, &default_schedule(), &de(5)).unwrap();
    assert!(path.is_monotone(), "{:?}", path.violations);
    assert_abs_diff_eq!(path.limit, dvector![0.0, -3.0], epsilon = 1e-3);
}

#[test]
fn compactify_keeps_the_value() {
    let sip = disk_sip();
    let c = compactify(&sip, &dvector![0.0, 0.0]).unwrap();
    let a = solve_sip_value(&sip, &de(6)).unwrap();
    let b = solve_sip_value(&c, &de(6)).unwrap();
    assert_abs_diff_eq!(a.value, b.value, epsilon = 1e-6);
    assert!(compactify(&sip, &dvector![9.0, 0.0]).is_err());
}

#[test]
fn compactify_bounds_an_unbounded_direction() {
    // min y without an upper bound on y would be harmless; check the added level cut
    let sip = disk_sip();
    let c = compactify(&sip, &dvector![0.0, -2.0]).unwrap();
    let r = rho_eval(&c, &[dvector![0.5 * PI]], c.slater()).unwrap();
    assert_abs_diff_eq!(r.value, -4.0, epsilon = 1e-7);
    assert!(r.x_relaxed[1] <= -1.0 + 1e-9);
}

#[test]
fn relaxations_never_exceed_the_value() {
    let sip = disk_sip();
    let v = solve_sip_value(&sip, &de(7)).unwrap().value;
    let mut h = ScrambledHalton::new(2, 9);
    for _ in 0..100 {
        let t = h.next_point();
        let tuple = [dvector![t[0] * 2.0 * PI], dvector![t[1] * 2.0 * PI]];
        let r = rho_eval(&sip, &tuple, sip.slater()).unwrap();
        assert!(r.value <= v + 1e-6);
    }
}

#[test]
fn tuple_join_split_roundtrip() {
    let sip = cover_sip(Norm::l2(), l1_polytope(), BoxDomain::cube(2, -3.0, 3.0).unwrap(), 10.0);
    let pts = vec![dvector![0.1, 0.2], dvector![-1.0, 0.5], dvector![1.0, -0.5]];
    let v = sip.join_tuple(&pts);
    assert_eq!(sip.split_tuple(&v), pts);
    assert_eq!(sip.tuple_box().dim(), 6);
}
