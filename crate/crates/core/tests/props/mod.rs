//! Property checks shared by the invariant suite and the acceptance gate.
//!
//! Every check runs a deterministic proptest runner and returns the
//! failure message, so callers can either assert or just report.

#![allow(dead_code)]

use std::f64::consts::TAU;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use chebsip::bench::{grid_oracle, min_enclosing_ball_2d, run_problem, run_single, write_outputs, ProblemFile, RunReport};
use chebsip::chebyshev::{chebyshev_center, circumscription_check, default_regularizer, ChebyshevResult, ChebyshevTask};
use chebsip::global::{maximize_box, GlobalConfig, Strategy as Search};
use chebsip::gram::{gram_matrix, BasisFunction, L2InnerProduct};
use chebsip::nlp::{solve_finite_convex, solve_with_options, Constraint, FiniteConvexProgram, Linear, Quadratic, SmoothConvex, SolverOptions};
use chebsip::sip::{extract_optimizer_with, rho_eval, solve_sip_value, PathOptions, SipProblem};
use chebsip::{affine_parametrize, BoxDomain, ConstraintSet, Inequality, Norm};

pub type PropCheck = fn() -> Result<(), String>;

/// Every property, by name.
pub const ALL: &[(&str, PropCheck)] = &[
    ("norm homogeneity and triangle inequality", norm_axioms),
    ("norm subgradient inequality", norm_subgradient),
    ("affine parametrization round trip", affine_round_trip),
    ("monomial gram matrix is the Hilbert matrix", hilbert_gram),
    ("inner solver recovers planted KKT points (QP/QCQP)", nlp_planted_qp),
    ("inner solver recovers planted LP vertices", nlp_planted_lp),
    ("inner solution independent of the start", nlp_start_independence),
    ("inner merit decreases within each stage", nlp_merit_monotone),
    ("global search is seed deterministic", global_seed_determinism),
    ("global history is monotone and ends at the value", global_history),
    ("DE evaluates only points of the box", de_stays_in_box),
    ("weak relaxation bounds the value", weak_relaxation),
    ("regularization path is monotone, bounded and feasible", disk_paths),
    ("strictly convex norms give a regularizer-free limit", uniqueness),
    ("centers are translation equivariant", translation_equivariance),
    ("norm scaling scales the radius only", scaling_invariance),
    ("polytope centers match the vertex minimax", vertex_equivalence),
    ("learning centers interpolate the data", data_interpolation),
    ("1D affine centers do not depend on the norm", affine_1d_norm_independence),
    ("reports re-run bit for bit from their config", report_rerun),
    ("solver radius sits inside the oracle bound", oracle_sandwich),
    ("writing outputs leaves results untouched", plot_is_pure),
];

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        max_shrink_iters: 32,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check<S>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

/// Draws `count` values from a strategy with a fixed seed.
pub fn sample<S: Strategy>(strategy: S, count: usize) -> Vec<S::Value> {
    let mut r = runner(1);
    (0..count).map(|_| strategy.new_tree(&mut r).expect("strategy generates").current()).collect()
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

fn sup(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

// ---------------------------------------------------------------- norms

fn spd(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let b = DMatrix::from_column_slice(n, n, &entries[..n * n]);
    b.transpose() * &b + DMatrix::identity(n, n) * 0.5
}

fn norm_of(kind: u8, n: usize, entries: &[f64]) -> Norm {
    match kind {
        0 => Norm::l1(),
        1 => Norm::l2(),
        2 => Norm::linf(),
        3 => Norm::weighted(spd(n, entries)).unwrap(),
        _ => Norm::gram(gram_matrix(&BasisFunction::monomials(n), &L2InnerProduct::unit_interval()).unwrap()).unwrap(),
    }
}

fn norm_case() -> impl Strategy<Value = (u8, usize, Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    (0u8..5, 1usize..6).prop_flat_map(|(kind, n)| {
        (
            Just(kind),
            Just(n),
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-2.0..2.0f64, n * n),
            -5.0..5.0f64,
        )
    })
}

pub fn norm_axioms() -> Result<(), String> {
    check(1000, norm_case(), |(kind, n, v, w, m, c)| {
        let norm = norm_of(kind, n, &m);
        let (v, w) = (DVector::from_vec(v), DVector::from_vec(w));
        let nv = norm.eval(&v).unwrap();
        let nw = norm.eval(&w).unwrap();
        let scale = 1.0 + nv + nw;
        prop_assert!(norm.eval(&DVector::zeros(n)).unwrap() == 0.0);
        let hom = (norm.eval(&(&v * c)).unwrap() - c.abs() * nv).abs();
        prop_assert!(hom <= 1e-9 * scale * (1.0 + c.abs()), "homogeneity off by {hom:e}");
        let tri = norm.eval(&(&v + &w)).unwrap() - nv - nw;
        prop_assert!(tri <= 1e-9 * scale, "triangle inequality off by {tri:e}");
        Ok(())
    })
}

pub fn norm_subgradient() -> Result<(), String> {
    check(1000, norm_case(), |(kind, n, v, w, m, _)| {
        let norm = norm_of(kind, n, &m);
        let (v, w) = (DVector::from_vec(v), DVector::from_vec(w));
        let s = norm.subgradient(&v).unwrap();
        let lhs = norm.eval(&w).unwrap();
        let rhs = norm.eval(&v).unwrap() + s.dot(&(&w - &v));
        prop_assert!(lhs >= rhs - 1e-9 * (1.0 + lhs.abs()), "‖w‖ = {lhs} < {rhs}");
        Ok(())
    })
}

// -------------------------------------------------------------- domains

pub fn affine_round_trip() -> Result<(), String> {
    let case = (2usize..6)
        .prop_flat_map(|n| (Just(n), 1..n))
        .prop_flat_map(|(n, m)| {
            (
                Just(n),
                Just(m),
                prop::collection::vec(-3.0..3.0f64, m * n),
                prop::collection::vec(-5.0..5.0f64, n),
                prop::collection::vec(-5.0..5.0f64, n),
            )
        });
    check(256, case, |(n, m, a, u0, zs)| {
        let a = DMatrix::from_row_slice(m, n, &a);
        prop_assume!(a.clone().svd(false, false).singular_values.min() > 1e-3);
        let y = &a * DVector::from_vec(u0);
        let par = affine_parametrize(&a, &y).map_err(|e| fail(e.to_string()))?;
        let tol = 1e-8 * (1.0 + y.amax());
        prop_assert_eq!(par.dim(), n - m);
        prop_assert!((&a * par.particular() - &y).amax() <= tol);
        prop_assert!((&a * par.basis()).amax() <= 1e-8);
        let ntn = par.basis().transpose() * par.basis();
        prop_assert!((ntn - DMatrix::identity(n - m, n - m)).amax() <= 1e-10);
        let z = DVector::from_column_slice(&zs[..n - m]);
        let r = (&a * par.map(&z) - &y).amax();
        prop_assert!(r <= tol * (1.0 + z.amax()), "residual {r:e}");
        Ok(())
    })
}

pub fn hilbert_gram() -> Result<(), String> {
    for d in 1..=9 {
        let g = gram_matrix(&BasisFunction::monomials(d), &L2InnerProduct::unit_interval()).map_err(|e| e.to_string())?;
        for i in 0..d {
            for j in 0..d {
                let h = 1.0 / (i + j + 1) as f64;
                if (g[(i, j)] - h).abs() > 1e-10 {
                    return Err(format!("entry ({i},{j}) of degree {} gram: {} vs {h}", d - 1, g[(i, j)]));
                }
            }
        }
    }
    Ok(())
}

// ------------------------------------------------------------ inner NLP

/// A program with a planted optimum `x*`: active constraints through `x*`
/// with positive multipliers, a few slack ones, and an objective whose
/// gradient balances them.
#[derive(Clone, Debug)]
struct Planted {
    n: usize,
    x_star: Vec<f64>,
    normals: Vec<Vec<f64>>,
    multipliers: Vec<f64>,
    slack: Vec<(Vec<f64>, f64)>,
    ball: Option<(Vec<f64>, f64, f64)>,
}

fn planted(vertex: bool, with_ball: bool) -> impl Strategy<Value = Planted> {
    (2usize..5).prop_flat_map(move |n| {
        let active = if vertex { (n..=n).boxed() } else { (0..n).boxed() };
        (Just(n), active, 0usize..4).prop_flat_map(move |(n, k, s)| {
            let vec = move || prop::collection::vec(-1.0..1.0f64, n);
            (
                prop::collection::vec(-2.0..2.0f64, n),
                prop::collection::vec(vec(), k),
                prop::collection::vec(0.2..2.0f64, k),
                prop::collection::vec((vec(), 0.1..2.0f64), s),
                if with_ball { prop::option::of((vec(), 0.5..2.0f64, 0.2..2.0f64)).boxed() } else { Just(None).boxed() },
            )
                .prop_map(move |(x_star, normals, multipliers, slack, ball)| Planted { n, x_star, normals, multipliers, slack, ball })
        })
    })
}

impl Planted {
    fn independent(&self) -> bool {
        if self.normals.is_empty() {
            return true;
        }
        let k = self.normals.len();
        let m = DMatrix::from_fn(self.n, k, |i, j| self.normals[j][i]);
        m.svd(false, false).singular_values.min() > 0.2
    }

    /// `(program, gradient balance g, optimal x)` where the objective
    /// gradient at `x*` is `−g`.
    fn parts(&self) -> (Vec<Constraint>, DVector<f64>, DVector<f64>) {
        let x = DVector::from_vec(self.x_star.clone());
        let mut g = DVector::zeros(self.n);
        let mut cons = Vec::new();
        for (a, l) in self.normals.iter().zip(&self.multipliers) {
            let a = DVector::from_vec(a.clone());
            g += &a * *l;
            cons.push(Constraint::Affine { b: a.dot(&x), a });
        }
        for (a, s) in &self.slack {
            let a = DVector::from_vec(a.clone());
            cons.push(Constraint::Affine { b: a.dot(&x) + s, a });
        }
        if let Some((d, r, l)) = &self.ball {
            let d = DVector::from_vec(d.clone());
            let dn = d.norm().max(1e-3);
            let d = d / dn;
            cons.push(Constraint::NormBall {
                norm: Norm::l2(),
                map: DMatrix::identity(self.n, self.n),
                center: &x - &d * *r,
                slope: DVector::zeros(self.n),
                offset: *r,
            });
            g += d * *l;
        }
        (cons, g, x)
    }

    fn quadratic(&self) -> (FiniteConvexProgram, DVector<f64>, f64) {
        let (cons, g, x) = self.parts();
        let q = Quadratic::isotropic(&x + &g);
        let value = q.value(&x);
        let p = FiniteConvexProgram::new(Arc::new(q), cons, BoxDomain::cube(self.n, -10.0, 10.0).unwrap()).unwrap();
        (p, x, value)
    }

    fn linear(&self) -> (FiniteConvexProgram, DVector<f64>, f64) {
        let (cons, g, x) = self.parts();
        let c = -g;
        let value = c.dot(&x);
        let p = FiniteConvexProgram::new(Arc::new(Linear::new(c, 0.0)), cons, BoxDomain::cube(self.n, -10.0, 10.0).unwrap()).unwrap();
        (p, x, value)
    }
}

pub fn nlp_planted_qp() -> Result<(), String> {
    check(100, planted(false, true), |c| {
        prop_assume!(c.independent());
        let (p, x, value) = c.quadratic();
        let s = solve_finite_convex(&p, &DVector::zeros(c.n), 1e-8).map_err(|e| fail(e.to_string()))?;
        prop_assert!((s.value - value).abs() <= 1e-6, "value {} vs {value}", s.value);
        prop_assert!(p.max_violation(&s.x_star) <= 1e-8, "violation {:e}", p.max_violation(&s.x_star));
        prop_assert!(sup(&s.x_star, &x) <= 1e-3, "x {:?} vs {:?}", s.x_star.as_slice(), x.as_slice());
        Ok(())
    })
}

pub fn nlp_planted_lp() -> Result<(), String> {
    check(100, planted(true, false), |c| {
        prop_assume!(c.independent());
        let (p, _, value) = c.linear();
        let s = solve_finite_convex(&p, &DVector::zeros(c.n), 1e-8).map_err(|e| fail(e.to_string()))?;
        prop_assert!((s.value - value).abs() <= 1e-6, "value {} vs {value}", s.value);
        prop_assert!(p.max_violation(&s.x_star) <= 1e-8, "violation {:e}", p.max_violation(&s.x_star));
        Ok(())
    })
}

pub fn nlp_start_independence() -> Result<(), String> {
    let case = (planted(false, true), prop::collection::vec(-9.0..9.0f64, 4), prop::collection::vec(-9.0..9.0f64, 4));
    check(100, case, |(c, a, b)| {
        prop_assume!(c.independent());
        let (p, _, _) = c.quadratic();
        let xa = solve_finite_convex(&p, &DVector::from_column_slice(&a[..c.n]), 1e-8).map_err(|e| fail(e.to_string()))?;
        let xb = solve_finite_convex(&p, &DVector::from_column_slice(&b[..c.n]), 1e-8).map_err(|e| fail(e.to_string()))?;
        let d = sup(&xa.x_star, &xb.x_star);
        prop_assert!(d <= 1e-6, "starts disagree by {d:e}");
        Ok(())
    })
}

pub fn nlp_merit_monotone() -> Result<(), String> {
    check(100, planted(false, true), |c| {
        prop_assume!(c.independent());
        let (p, _, _) = c.quadratic();
        let opts = SolverOptions { record_merit: true, ..SolverOptions::default() };
        let s = solve_with_options(&p, &DVector::zeros(c.n), &opts).map_err(|e| fail(e.to_string()))?;
        for w in s.merit_trace.windows(2) {
            if w[0].0 == w[1].0 {
                prop_assert!(w[1].1 <= w[0].1 + 1e-12 * (1.0 + w[0].1.abs()), "merit rose in stage {}: {} -> {}", w[0].0, w[0].1, w[1].1);
            }
        }
        Ok(())
    })
}

// --------------------------------------------------------- global search

fn bumpy(u: &DVector<f64>) -> f64 {
    -u.iter().map(|x| x * x - 2.0 * (3.0 * x).cos()).sum::<f64>()
}

fn global_case() -> impl Strategy<Value = (usize, Vec<(f64, f64)>, u8, u64)> {
    (1usize..4).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec((-4.0..0.0f64, 0.1..4.0f64), n),
            0u8..3,
            any::<u64>(),
        )
    })
}

fn global_cfg(strategy: u8, seed: u64) -> GlobalConfig {
    let s = [Search::DifferentialEvolution, Search::SimulatedAnnealing, Search::NelderMeadMultistart][strategy as usize];
    let mut cfg = GlobalConfig::with_strategy(s, seed);
    cfg.max_evals = 2000;
    cfg.nm.restarts = 8;
    cfg
}

fn case_box(bounds: &[(f64, f64)]) -> BoxDomain {
    let b: Vec<(f64, f64)> = bounds.iter().map(|(lo, w)| (*lo, lo + w)).collect();
    BoxDomain::from_bounds(&b).unwrap()
}

pub fn global_seed_determinism() -> Result<(), String> {
    check(48, global_case(), |(_, bounds, strategy, seed)| {
        let bx = case_box(&bounds);
        let cfg = global_cfg(strategy, seed);
        let a = maximize_box(&bumpy, &bx, &cfg).map_err(|e| fail(e.to_string()))?;
        let b = maximize_box(&bumpy, &bx, &cfg).map_err(|e| fail(e.to_string()))?;
        prop_assert_eq!(a, b);
        Ok(())
    })
}

pub fn global_history() -> Result<(), String> {
    check(48, global_case(), |(_, bounds, strategy, seed)| {
        let bx = case_box(&bounds);
        let r = maximize_box(&bumpy, &bx, &global_cfg(strategy, seed)).map_err(|e| fail(e.to_string()))?;
        prop_assert!(r.history.windows(2).all(|w| w[1].1 >= w[0].1 && w[1].0 >= w[0].0));
        let last = r.history.last().map(|h| h.1);
        prop_assert_eq!(last, Some(r.value));
        prop_assert!(bx.contains(&r.u_star));
        prop_assert_eq!(bumpy(&r.u_star), r.value);
        Ok(())
    })
}

pub fn de_stays_in_box() -> Result<(), String> {
    check(48, global_case(), |(_, bounds, _, seed)| {
        let bx = case_box(&bounds);
        let seen = Mutex::new(Vec::new());
        let f = |u: &DVector<f64>| {
            seen.lock().unwrap().push(u.clone());
            bumpy(u)
        };
        maximize_box(&f, &bx, &global_cfg(0, seed)).map_err(|e| fail(e.to_string()))?;
        let seen = seen.into_inner().unwrap();
        prop_assert!(!seen.is_empty());
        for u in &seen {
            prop_assert!(bx.contains(u), "evaluated {:?} outside the box", u.as_slice());
        }
        Ok(())
    })
}

// ------------------------------------------------------------------ SIP

fn bundled(id: &str) -> ProblemFile {
    chebsip::bench::repro::bundled_problem(id).unwrap()
}

struct SipCase {
    sip: SipProblem,
    value: f64,
    probes: Vec<DVector<f64>>,
}

fn sip_case(id: &str) -> SipCase {
    let p = bundled(id);
    let sip = match p.kind {
        chebsip::bench::problem::ProblemKind::Sip => p.sip_problem().unwrap(),
        _ => chebsip::chebyshev::build_chebyshev_sip(&p.chebyshev_task().unwrap()).unwrap(),
    };
    let value = solve_sip_value(&sip, &p.solver.global_config().unwrap()).unwrap().value;
    let probes = sip.probe_points(2048, 7);
    SipCase { sip, value, probes }
}

fn disk() -> &'static SipCase {
    static CASE: OnceLock<SipCase> = OnceLock::new();
    CASE.get_or_init(|| sip_case("disk"))
}

fn l1_polytope() -> &'static SipCase {
    static CASE: OnceLock<SipCase> = OnceLock::new();
    CASE.get_or_init(|| sip_case("l1-polytope"))
}

pub fn weak_relaxation() -> Result<(), String> {
    let case = (any::<bool>(), prop::collection::vec(any::<prop::sample::Index>(), 8));
    check(100, case, |(use_disk, picks)| {
        let c = if use_disk { disk() } else { l1_polytope() };
        let n = c.sip.tuple_size();
        let tuple: Vec<DVector<f64>> = picks.iter().take(n).map(|i| c.probes[i.index(c.probes.len())].clone()).collect();
        prop_assume!(tuple.len() == n);
        let r = rho_eval(&c.sip, &tuple, c.sip.slater()).map_err(|e| fail(e.to_string()))?;
        prop_assert!(r.value <= c.value + 1e-6, "ρ = {} above the value {}", r.value, c.value);
        Ok(())
    })
}

pub fn disk_paths() -> Result<(), String> {
    let x_star = DVector::from_vec(vec![0.0, -3.0]);
    check(6, (-3.0..3.0f64, -3.0..3.0f64, any::<u64>()), |(a, b, seed)| {
        let c = disk();
        let psi = Quadratic::isotropic(DVector::from_vec(vec![a, b]));
        let bound = psi.value(&x_star);
        let mut cfg = GlobalConfig::with_strategy(Search::DifferentialEvolution, seed);
        cfg.seed = seed % 1000;
        let path = extract_optimizer_with(&c.sip, Arc::new(psi), &PathOptions::default(), &cfg).map_err(|e| fail(e.to_string()))?;
        prop_assert!(path.violations.is_empty(), "{:?}", path.violations);
        for w in path.solutions.windows(2) {
            prop_assert!(w[1].f <= w[0].f + 1e-6 && w[1].psi >= w[0].psi - 1e-6);
        }
        for s in &path.solutions {
            prop_assert!(s.psi <= bound + 1e-6, "ψ = {} above ψ(x*) = {bound}", s.psi);
        }
        prop_assert!(sup(&path.limit, &x_star) <= 1e-3, "limit {:?}", path.limit.as_slice());
        let worst = c.sip.probe_points(10_000, 11).iter().map(|z| c.sip.constraint_value(&path.limit, z)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(worst <= 1e-6, "limit violates a constraint by {worst:e}");
        let f = c.sip.objective().value(&path.limit);
        prop_assert!((f - c.value).abs() <= 1e-4, "f(limit) = {f} vs value {}", c.value);
        Ok(())
    })
}

// ------------------------------------------------------------ Chebyshev

/// A convex polygon: vertices on a circle, stretched and shifted.
#[derive(Clone, Debug)]
pub struct Polygon {
    pub vertices: Vec<DVector<f64>>,
}

pub fn polygon() -> impl Strategy<Value = Polygon> {
    (
        prop::collection::vec(0.4..1.0f64, 3..=6),
        0.0..TAU,
        (0.5..2.5f64, 0.5..2.5f64, -0.8..0.8f64),
        (-3.0..3.0f64, -3.0..3.0f64),
    )
        .prop_map(|(gaps, phase, (sx, sy, shear), (tx, ty))| {
            let total: f64 = gaps.iter().sum();
            let mut angle = phase;
            let vertices = gaps
                .iter()
                .map(|g| {
                    let (s, c) = angle.sin_cos();
                    angle += TAU * g / total;
                    DVector::from_vec(vec![sx * c + shear * s + tx, sy * s + ty])
                })
                .collect();
            Polygon { vertices }
        })
}

impl Polygon {
    pub fn translated(&self, v: &DVector<f64>) -> Polygon {
        Polygon { vertices: self.vertices.iter().map(|p| p + v).collect() }
    }

    /// Outward halfspaces `(normal, offset)` of the counter-clockwise edges.
    pub fn halfspaces(&self) -> Vec<(DVector<f64>, f64)> {
        let k = self.vertices.len();
        (0..k)
            .map(|i| {
                let (a, b) = (&self.vertices[i], &self.vertices[(i + 1) % k]);
                let n = DVector::from_vec(vec![b[1] - a[1], a[0] - b[0]]);
                let off = n.dot(a);
                (n, off)
            })
            .collect()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        (0..2)
            .map(|i| {
                let lo = self.vertices.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min);
                let hi = self.vertices.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            })
            .collect()
    }

    pub fn set(&self) -> ConstraintSet {
        let ineqs = self.halfspaces().into_iter().map(|(n, b)| Inequality::halfspace(n, b).unwrap()).collect();
        ConstraintSet::new(BoxDomain::from_bounds(&self.bounds()).unwrap(), ineqs, None).unwrap()
    }

    pub fn task(&self, norm: Norm) -> ChebyshevTask {
        ChebyshevTask::new(self.set(), norm)
    }

    /// The polygon as a `cheb` problem file.
    pub fn problem(&self, name: &str, seed: u64) -> ProblemFile {
        let hs: Vec<serde_json::Value> = self
            .halfspaces()
            .iter()
            .map(|(n, b)| serde_json::json!({"normal": n.as_slice(), "offset": b}))
            .collect();
        let b: Vec<[f64; 2]> = self.bounds().iter().map(|(l, h)| [*l, *h]).collect();
        let doc = serde_json::json!({
            "name": name,
            "kind": "cheb",
            "space": {"dimension": 2, "norm": {"kind": "l2"}},
            "set": {"box": b, "halfspaces": hs},
            "solver": {"seed": seed},
        });
        ProblemFile::from_json(&doc.to_string()).unwrap()
    }
}

pub fn solve_task(task: &ChebyshevTask, seed: u64) -> chebsip::Result<ChebyshevResult> {
    let psi = default_regularizer(task)?;
    chebyshev_center(task, psi, &PathOptions::default(), &GlobalConfig::with_strategy(Search::DifferentialEvolution, seed))
}

fn weighted_norm(m: (f64, f64, f64)) -> Norm {
    let (a, b, c) = m;
    Norm::weighted(DMatrix::from_row_slice(2, 2, &[a, b, b, c])).unwrap()
}

fn weight() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.5..3.0f64, -0.4..0.4f64, 0.5..3.0f64)
}

pub fn uniqueness() -> Result<(), String> {
    let case = (polygon(), prop::option::of(weight()), prop::collection::vec(-3.0..3.0f64, 6));
    check(4, case, |(poly, w, centers)| {
        let norm = w.map(weighted_norm).unwrap_or_else(Norm::l2);
        let task = poly.task(norm);
        let sip = chebsip::chebyshev::build_chebyshev_sip(&task).map_err(|e| fail(e.to_string()))?;
        let cfg = GlobalConfig::with_strategy(Search::DifferentialEvolution, 1);
        let limit = |c: &[f64]| -> Result<DVector<f64>, TestCaseError> {
            let psi = Arc::new(Quadratic::isotropic(DVector::from_column_slice(c)));
            Ok(extract_optimizer_with(&sip, psi, &PathOptions::default(), &cfg).map_err(|e| fail(e.to_string()))?.limit)
        };
        let (a, b) = (limit(&centers[..3])?, limit(&centers[3..])?);
        let d = sup(&a, &b);
        prop_assert!(d <= 1e-4, "limits {:?} and {:?} differ by {d:e}", a.as_slice(), b.as_slice());
        Ok(())
    })
}

pub fn translation_equivariance() -> Result<(), String> {
    check(4, (polygon(), -5.0..5.0f64, -5.0..5.0f64), |(poly, vx, vy)| {
        let v = DVector::from_vec(vec![vx, vy]);
        let a = solve_task(&poly.task(Norm::l2()), 3).map_err(|e| fail(e.to_string()))?;
        let shifted = poly.translated(&v);
        let task = shifted.task(Norm::l2());
        let b = solve_task(&task, 3).map_err(|e| fail(e.to_string()))?;
        let d = sup(&(&a.center + &v), &b.center);
        prop_assert!(d <= 1e-4, "shifted center off by {d:e}");
        prop_assert!((a.radius - b.radius).abs() <= 1e-6, "radius {} vs {}", a.radius, b.radius);
        prop_assert!(circumscription_check(&b, &task, 10_000).map_err(|e| fail(e.to_string()))?.ok);
        Ok(())
    })
}

pub fn scaling_invariance() -> Result<(), String> {
    check(4, (polygon(), prop::option::of(weight()), 0.2..5.0f64), |(poly, w, c)| {
        let norm = w.map(weighted_norm).unwrap_or_else(Norm::l2);
        let a = solve_task(&poly.task(norm.clone()), 4).map_err(|e| fail(e.to_string()))?;
        let b = solve_task(&poly.task(norm.scaled(c).unwrap()), 4).map_err(|e| fail(e.to_string()))?;
        prop_assert!((b.radius - c * a.radius).abs() <= 1e-6, "radius {} vs {} · {}", b.radius, c, a.radius);
        let d = sup(&a.center, &b.center);
        prop_assert!(d <= 1e-4, "centers differ by {d:e}");
        Ok(())
    })
}

pub fn vertex_equivalence() -> Result<(), String> {
    check(8, (polygon(), any::<u64>()), |(poly, seed)| {
        let task = poly.task(Norm::l2());
        let r = solve_task(&task, seed % 64).map_err(|e| fail(e.to_string()))?;
        let (center, radius) = min_enclosing_ball_2d(&poly.vertices).ok_or_else(|| fail("no enclosing ball".into()))?;
        prop_assert!((r.radius - radius).abs() <= 1e-3, "radius {} vs {radius}", r.radius);
        prop_assert!(sup(&r.center, &center) <= 1e-3, "center {:?} vs {:?}", r.center.as_slice(), center.as_slice());
        prop_assert!(circumscription_check(&r, &task, 10_000).map_err(|e| fail(e.to_string()))?.ok);
        Ok(())
    })
}

// ------------------------------------------------------------- learning

pub fn data_interpolation() -> Result<(), String> {
    let case = (prop::collection::vec(-5.0..5.0f64, 2..=3), 3usize..6, any::<u64>());
    check(4, case, |(data, degree, seed)| {
        let s = data.len();
        let points: Vec<f64> = (0..s).map(|i| (i as f64 + 0.5) / s as f64).collect();
        let doc = serde_json::json!({
            "name": "interp",
            "kind": "learn",
            "learning": {
                "model_degrees": (0..degree).collect::<Vec<_>>(),
                "points": {"kind": "explicit", "values": points},
                "data": {"kind": "values", "values": data},
                "bounds": {"kind": "free", "lower": -20.0, "upper": 20.0},
                "norm": {"kind": "l2"},
            },
            "solver": {"seed": seed % 100},
        });
        let p = ProblemFile::from_json(&doc.to_string()).map_err(|e| fail(e.to_string()))?;
        let o = run_single(&p).map_err(|e| fail(e.to_string()))?;
        let r = o.interpolation_residual.unwrap_or(f64::INFINITY);
        prop_assert!(r <= 1e-6, "interpolation residual {r:e}");
        prop_assert!(o.circumscription.as_ref().is_some_and(|c| c.ok));
        Ok(())
    })
}

pub fn affine_1d_norm_independence() -> Result<(), String> {
    check(4, (-3.0..3.0f64, -2.0..2.0f64, weight()), |(slope, intercept, (a, b, c))| {
        let doc = serde_json::json!({
            "name": "line",
            "kind": "cheb",
            "space": {"dimension": 2, "norm": {"kind": "l2"}, "center_on_equalities": true},
            "set": {"box": [[-5.0, 5.0], [-10.0, 10.0]], "equalities": {"matrix": [[slope, -1.0]], "rhs": [-intercept]}},
            "solver": {"seed": 5},
            "variants": [
                {"name": "l1", "norm": {"kind": "l1"}},
                {"name": "weighted", "norm": {"kind": "weighted", "matrix": [[a, b], [b, c]]}},
            ],
        });
        let p = ProblemFile::from_json(&doc.to_string()).map_err(|e| fail(e.to_string()))?;
        let r = run_problem(&p).map_err(|e| fail(e.to_string()))?;
        prop_assert!(r.error.is_none(), "{:?}", r.error);
        // the segment of the line inside the box, and its midpoint
        let xs: Vec<f64> = {
            let mut lo = -5.0f64;
            let mut hi = 5.0f64;
            if slope.abs() > 1e-12 {
                let (e1, e2) = ((-10.0 - intercept) / slope, (10.0 - intercept) / slope);
                lo = lo.max(e1.min(e2));
                hi = hi.min(e1.max(e2));
            }
            vec![lo, hi]
        };
        let mid = 0.5 * (xs[0] + xs[1]);
        let expected = DVector::from_vec(vec![mid, slope * mid + intercept]);
        for run in ["main", "l1", "weighted"] {
            let c = DVector::from_vec(r.variant(run).and_then(|o| o.center.clone()).ok_or_else(|| fail(format!("{run} has no center")))?);
            let d = sup(&c, &expected);
            prop_assert!(d <= 1e-4, "{run} center {:?} vs midpoint {:?}", c.as_slice(), expected.as_slice());
        }
        Ok(())
    })
}

// --------------------------------------------------------------- harness

pub fn report_rerun() -> Result<(), String> {
    check(3, (polygon(), any::<u64>()), |(poly, seed)| {
        let first = run_problem(&poly.problem("rerun", seed % 1000)).map_err(|e| fail(e.to_string()))?;
        let echo = RunReport::from_json(&first.to_stable_json()).map_err(|e| fail(e.to_string()))?;
        let second = run_problem(&echo.config).map_err(|e| fail(e.to_string()))?;
        prop_assert_eq!(first.to_stable_json(), second.to_stable_json());
        Ok(())
    })
}

pub fn oracle_sandwich() -> Result<(), String> {
    check(4, polygon(), |poly| {
        let task = poly.task(Norm::l2());
        let r = solve_task(&task, 2).map_err(|e| fail(e.to_string()))?;
        let o = grid_oracle(&task, 256).map_err(|e| fail(e.to_string()))?;
        let d = (r.radius - o.radius).abs();
        prop_assert!(d <= o.error_bound + 1e-3, "solver {} vs oracle {} (bound {:e})", r.radius, o.radius, o.error_bound);
        Ok(())
    })
}

pub fn plot_is_pure() -> Result<(), String> {
    check(2, (polygon(), any::<u32>()), |(poly, tag)| {
        let report = run_problem(&poly.problem("plot", 9)).map_err(|e| fail(e.to_string()))?;
        let before = report.to_stable_json();
        let dir = std::env::temp_dir().join(format!("chebsip-plot-{}-{tag}", std::process::id()));
        let files = write_outputs(&report, &dir).map_err(|e| fail(e.to_string()))?;
        prop_assert!(files.iter().any(|f| f.extension().is_some_and(|e| e == "svg")));
        let written = std::fs::read_to_string(dir.join("report.json")).map_err(|e| fail(e.to_string()))?;
        let _ = std::fs::remove_dir_all(&dir);
        prop_assert_eq!(&before, &report.to_stable_json());
        prop_assert_eq!(before.trim_end(), written.trim_end());
        let again = run_problem(&report.config).map_err(|e| fail(e.to_string()))?;
        prop_assert_eq!(before, again.to_stable_json());
        Ok(())
    })
}
