//! Executes problem files.

use std::sync::Arc;

use nalgebra::DVector;

use super::problem::{ProblemFile, ProblemKind};
use super::report::{Outcome, PathReport, PathRow, RunReport, VariantOutcome};
use crate::chebyshev::{build_chebyshev_sip, check_ball, ChebyshevTask};
use crate::error::{Error, Result};
use crate::nlp::{Quadratic, SmoothConvex};
use crate::sip::{extract_optimizer_with, solve_sip_value_restarts, RegPath, SipProblem};

/// Runs the main problem and every variant. Errors of the main run abort;
/// a failing variant is recorded in the report's `error`.
pub fn run_problem(problem: &ProblemFile) -> Result<RunReport> {
    problem.validate()?;
    let start = std::time::Instant::now();
    let mut report = RunReport::new(problem.clone());
    let mut base = problem.clone();
    base.variants.clear();
    report.outcome = Some(run_single(&base)?);
    for v in &problem.variants {
        match problem.variant(&v.name).and_then(|p| run_single(&p)) {
            Ok(outcome) => report.variants.push(VariantOutcome { name: v.name.clone(), outcome }),
            Err(e) => {
                report.error = Some(format!("variant {}: {e}", v.name));
                break;
            }
        }
    }
    report.wall_time_s = Some(start.elapsed().as_secs_f64());
    Ok(report)
}

/// One run of a problem without variants.
pub fn run_single(p: &ProblemFile) -> Result<Outcome> {
    match p.kind {
        ProblemKind::Sip => {
            let sip = p.sip_problem()?;
            let centers = regularizer_centers(p, sip.state_box().center())?;
            solve(p, &sip, &centers, None)
        }
        ProblemKind::Cheb | ProblemKind::Learn => {
            let task = p.chebyshev_task()?;
            let sip = build_chebyshev_sip(&task)?;
            let m = task.search_box()?.center();
            let mut default = DVector::zeros(m.len() + 1);
            default.rows_mut(1, m.len()).copy_from(&m);
            let centers = regularizer_centers(p, default)?;
            let mut out = solve(p, &sip, &centers, Some(&task))?;
            let c = DVector::from_vec(out.center.clone().expect("center runs set a center"));
            if let Some((a, b)) = &task.center_equalities {
                out.equality_residual = Some((a * &c - b).amax());
            }
            if p.kind == ProblemKind::Learn {
                let lt = p.learning_task()?;
                if lt.search_basis.len() == lt.model_basis.len() && !lt.data.is_empty() {
                    out.interpolation_residual = Some((&lt.measurements * &c - &lt.data).amax());
                }
            }
            Ok(out)
        }
    }
}

fn regularizer_centers(p: &ProblemFile, default: DVector<f64>) -> Result<Vec<DVector<f64>>> {
    if p.solver.regularizer_centers.is_empty() {
        return Ok(vec![default]);
    }
    p.solver
        .regularizer_centers
        .iter()
        .map(|c| {
            if c.len() != default.len() {
                Err(Error::DimensionMismatch { expected: default.len(), got: c.len() })
            } else {
                Ok(DVector::from_column_slice(c))
            }
        })
        .collect()
}

fn path_report(center: &DVector<f64>, path: &RegPath) -> PathReport {
    PathReport {
        regularizer_center: center.as_slice().to_vec(),
        limit: path.limit.as_slice().to_vec(),
        converged: path.converged,
        monotone: path.is_monotone(),
        violations: path.violations.clone(),
        rows: path
            .solutions
            .iter()
            .map(|s| PathRow { eps: s.eps, x: s.x.as_slice().to_vec(), f: s.f, psi: s.psi, value: s.value })
            .collect(),
    }
}

fn solve(p: &ProblemFile, sip: &SipProblem, centers: &[DVector<f64>], task: Option<&ChebyshevTask>) -> Result<Outcome> {
    let cfg = p.solver.global_config()?;
    let sip = sip.clone().with_exchange_polish(p.solver.exchange_polish);
    let value = solve_sip_value_restarts(&sip, &cfg, p.solver.restarts.max(1))?;
    let mut paths = Vec::new();
    if !p.solver.value_only {
        let opts = p.solver.path_options()?;
        for c in centers {
            let psi: Arc<dyn SmoothConvex> = Arc::new(Quadratic::isotropic(c.clone()));
            let path = extract_optimizer_with(&sip, psi, &opts, &cfg)?;
            paths.push(path_report(c, &path));
        }
    }
    let relaxed = value.certificate.x_relaxed.clone();
    let certificate: Vec<Vec<f64>> = value.certificate.tuple.iter().map(|u| u.as_slice().to_vec()).collect();
    let mut out = Outcome {
        value: value.value,
        radius: None,
        center: None,
        relaxed_solution: relaxed.as_slice().to_vec(),
        certificate,
        paths,
        circumscription: None,
        interpolation_residual: None,
        equality_residual: None,
        restart_values: value.global.restart_values.clone(),
        evals: value.global.evals,
        stalled: value.global.stalled,
    };
    if let Some(task) = task {
        let l = sip.dim_x() - 1;
        let center = match out.paths.first() {
            Some(path) => DVector::from_column_slice(&path.limit[1..]),
            None => relaxed.rows(1, l).into_owned(),
        };
        out.radius = Some(value.value);
        out.circumscription = Some(check_ball(task, &center, value.value, &value.certificate.tuple, p.solver.probes)?);
        out.center = Some(center.as_slice().to_vec());
    } else if let Some(path) = out.paths.first() {
        out.center = Some(path.limit.clone());
    }
    Ok(out)
}
