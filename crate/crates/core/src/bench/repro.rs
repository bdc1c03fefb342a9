//! Bundled experiments with stored expectations.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::oracle::grid_oracle;
use super::problem::ProblemFile;
use super::report::{CheckResult, Outcome, RunReport};
use super::run::run_problem;
use crate::error::{Error, Result};

macro_rules! bundle {
    ($($id:literal),* $(,)?) => {
        &[$(($id,
            include_str!(concat!("../../repro/", $id, ".problem.json")),
            include_str!(concat!("../../repro/", $id, ".expected.json")))),*]
    };
}

/// `(id, problem file, expected file)`.
pub const BUNDLED: &[(&str, &str, &str)] = bundle!(
    "disk",
    "l1-polytope",
    "nonconvex-lens",
    "affine-1d-rect",
    "affine-1d-ellipse",
    "affine-2d-plane",
    "poly-7",
    "poly-10",
    "poly-12",
    "poly-20",
    "poly-10-shifted",
    "weighted-triangle",
);

pub fn ids() -> Vec<&'static str> {
    BUNDLED.iter().map(|b| b.0).collect()
}

fn lookup(id: &str) -> Result<&'static (&'static str, &'static str, &'static str)> {
    BUNDLED
        .iter()
        .find(|b| b.0 == id)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown experiment {id:?}; known: {}", ids().join(", "))))
}

pub fn bundled_problem(id: &str) -> Result<ProblemFile> {
    ProblemFile::from_json(lookup(id)?.1)
}

pub fn bundled_expectations(id: &str) -> Result<ExpectedFile> {
    let e: ExpectedFile = serde_json::from_str(lookup(id)?.2).map_err(|e| Error::Schema(e.to_string()))?;
    Ok(e)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// A number printed with the experiment.
    Reported,
    /// Computed by an independent oracle.
    Derived,
    /// Closed form.
    Analytic,
}

impl Origin {
    fn name(self) -> &'static str {
        match self {
            Origin::Reported => "reported",
            Origin::Derived => "derived",
            Origin::Analytic => "analytic",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum Check {
    Value { target: f64, tol: f64 },
    Radius { target: f64, tol: f64 },
    Center { target: Vec<f64>, tol: f64 },
    /// Limit of the `path`-th regularization path.
    Limit { path: usize, target: Vec<f64>, tol: f64 },
    InterpolationResidual { max: f64 },
    EqualityResidual { max: f64 },
    Circumscribed { expected: bool },
    /// Every path is monotone within its tolerance.
    Monotone,
    /// The center minus the center of experiment `baseline` is the same
    /// number on every coordinate from `from` on.
    FreeShift { baseline: String, from: usize, tol: f64 },
    /// The value is at least the value of another run.
    NotBelow { other: String },
    /// Centers of the listed runs agree pairwise.
    CentersAgree { runs: Vec<String>, tol: f64 },
    /// `|value − oracle radius| ≤ oracle error bound + slack`.
    OracleSandwich { resolution: usize, slack: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedCheck {
    /// Run the check applies to; the main run when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<String>,
    pub origin: Origin,
    pub check: Check,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedFile {
    pub id: String,
    pub checks: Vec<ExpectedCheck>,
}

/// Runs a bundled experiment (optionally modified) and scores it.
pub fn run_repro(id: &str, problem: Option<ProblemFile>) -> Result<RunReport> {
    let problem = match problem {
        Some(p) => p,
        None => bundled_problem(id)?,
    };
    let expected = bundled_expectations(id)?;
    let mut report = run_problem(&problem)?;
    score(&mut report, &expected)?;
    Ok(report)
}

/// Evaluates the expected checks against a finished report.
pub fn score(report: &mut RunReport, expected: &ExpectedFile) -> Result<()> {
    for e in &expected.checks {
        let run = e.run.as_deref().unwrap_or("main");
        let (passed, detail) = match report.variant(run) {
            None => (false, format!("run {run:?} did not complete")),
            Some(o) => {
                let o = o.clone();
                evaluate(report, &o, &e.check)?
            }
        };
        report.checks.push(CheckResult {
            check: check_name(&e.check),
            variant: e.run.clone(),
            origin: e.origin.name().into(),
            passed,
            detail,
        });
    }
    Ok(())
}

fn check_name(c: &Check) -> String {
    match c {
        Check::Value { .. } => "value".into(),
        Check::Radius { .. } => "radius".into(),
        Check::Center { .. } => "center".into(),
        Check::Limit { path, .. } => format!("limit[{path}]"),
        Check::InterpolationResidual { .. } => "interpolation_residual".into(),
        Check::EqualityResidual { .. } => "equality_residual".into(),
        Check::Circumscribed { expected } => format!("circumscribed={expected}"),
        Check::Monotone => "monotone".into(),
        Check::FreeShift { baseline, .. } => format!("free_shift vs {baseline}"),
        Check::NotBelow { other } => format!("not_below {other}"),
        Check::CentersAgree { .. } => "centers_agree".into(),
        Check::OracleSandwich { resolution, .. } => format!("oracle_sandwich@{resolution}"),
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

fn evaluate(report: &mut RunReport, o: &Outcome, check: &Check) -> Result<(bool, String)> {
    Ok(match check {
        Check::Value { target, tol } => {
            let d = (o.value - target).abs();
            (d <= *tol, format!("value {:.6} vs {target} (|diff| {d:.2e}, tol {tol:e})", o.value))
        }
        Check::Radius { target, tol } => match o.radius {
            Some(r) => {
                let d = (r - target).abs();
                (d <= *tol, format!("radius {r:.6} vs {target} (|diff| {d:.2e}, tol {tol:e})"))
            }
            None => (false, "no radius".into()),
        },
        Check::Center { target, tol } => match &o.center {
            Some(c) => {
                let d = sup_diff(c, target);
                (d <= *tol, format!("center {} vs {} (sup diff {d:.2e}, tol {tol:e})", fmt_vec(c), fmt_vec(target)))
            }
            None => (false, "no center".into()),
        },
        Check::Limit { path, target, tol } => match o.paths.get(*path) {
            Some(p) => {
                let d = sup_diff(&p.limit, target);
                (d <= *tol, format!("limit {} vs {} (sup diff {d:.2e}, tol {tol:e})", fmt_vec(&p.limit), fmt_vec(target)))
            }
            None => (false, format!("no path {path}")),
        },
        Check::InterpolationResidual { max } => match o.interpolation_residual {
            Some(r) => (r <= *max, format!("residual {r:.2e} (max {max:e})")),
            None => (false, "no interpolation residual".into()),
        },
        Check::EqualityResidual { max } => match o.equality_residual {
            Some(r) => (r <= *max, format!("residual {r:.2e} (max {max:e})")),
            None => (false, "no equality residual".into()),
        },
        Check::Circumscribed { expected } => match &o.circumscription {
            Some(c) => (c.ok == *expected, format!("worst excess {:.3e} over {} probes", c.worst, c.probes)),
            None => (false, "no circumscription check".into()),
        },
        Check::Monotone => {
            let bad: usize = o.paths.iter().map(|p| p.violations.len()).sum();
            let steps: Vec<usize> = o.paths.iter().map(|p| p.rows.len()).collect();
            (bad == 0 && !o.paths.is_empty(), format!("{bad} violations over path lengths {steps:?}"))
        }
        Check::FreeShift { baseline, from, tol } => {
            let base = run_repro_plain(baseline)?;
            match (&o.center, base.outcome.as_ref().and_then(|b| b.center.clone())) {
                (Some(c), Some(b)) if c.len() == b.len() && *from < c.len() => {
                    let d: Vec<f64> = c[*from..].iter().zip(&b[*from..]).map(|(x, y)| x - y).collect();
                    let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    (hi - lo <= *tol, format!("shift in [{lo:.6}, {hi:.6}] (spread {:.2e}, tol {tol:e})", hi - lo))
                }
                _ => (false, "centers missing or of different sizes".into()),
            }
        }
        Check::NotBelow { other } => match report.variant(other) {
            Some(b) => (o.value >= b.value - 1e-9, format!("{:.6} vs {other} {:.6}", o.value, b.value)),
            None => (false, format!("run {other:?} missing")),
        },
        Check::CentersAgree { runs, tol } => {
            let cs: Vec<Option<Vec<f64>>> = runs.iter().map(|r| report.variant(r).and_then(|o| o.center.clone())).collect();
            if cs.iter().any(Option::is_none) {
                (false, "a center is missing".into())
            } else {
                let cs: Vec<Vec<f64>> = cs.into_iter().flatten().collect();
                let mut worst: f64 = 0.0;
                for i in 0..cs.len() {
                    for j in i + 1..cs.len() {
                        worst = worst.max(sup_diff(&cs[i], &cs[j]));
                    }
                }
                (worst <= *tol, format!("largest pairwise sup diff {worst:.2e} (tol {tol:e})"))
            }
        }
        Check::OracleSandwich { resolution, slack } => {
            let task = report.config.chebyshev_task()?;
            let oracle = grid_oracle(&task, *resolution)?;
            let d = (o.value - oracle.radius).abs();
            let bound = oracle.error_bound + slack;
            let out = (
                d <= bound,
                format!("solver {:.6} vs oracle {:.6} (|diff| {d:.2e}, bound {bound:.2e})", o.value, oracle.radius),
            );
            report.oracle = Some(oracle);
            out
        }
    })
}

/// A bundled experiment without scoring (used as a baseline).
fn run_repro_plain(id: &str) -> Result<RunReport> {
    let mut p = bundled_problem(id)?;
    p.variants.clear();
    run_problem(&p)
}

/// Center of a report's main run as a vector.
pub fn main_center(report: &RunReport) -> Option<DVector<f64>> {
    report.outcome.as_ref()?.center.as_ref().map(|c| DVector::from_column_slice(c))
}
