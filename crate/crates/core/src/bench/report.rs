//! Run reports: everything a run produced, plus the config that produced it.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::problem::{ProblemFile, ProblemKind};
use crate::chebyshev::Circumscription;
use crate::error::Result;
use crate::sip::MonotonicityViolation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub eps: f64,
    pub x: Vec<f64>,
    pub f: f64,
    pub psi: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    /// Center of the quadratic regularizer that generated the path.
    pub regularizer_center: Vec<f64>,
    pub limit: Vec<f64>,
    pub converged: bool,
    pub monotone: bool,
    pub violations: Vec<MonotonicityViolation>,
    pub rows: Vec<PathRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    /// SIP value; for center problems the radius.
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Path limit (center coordinates), or the relaxed solution of a
    /// value-only run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    /// Decision of the finite relaxation at the certificate tuple.
    pub relaxed_solution: Vec<f64>,
    /// Certificate tuple in index coordinates.
    pub certificate: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub paths: Vec<PathReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circumscription: Option<Circumscription>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpolation_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equality_residual: Option<f64>,
    pub restart_values: Vec<f64>,
    pub evals: usize,
    pub stalled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantOutcome {
    pub name: String,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    /// Where the expected value comes from: `reported`, `derived` or `analytic`.
    pub origin: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub resolution: usize,
    /// Feasible grid points of the set that were scored.
    pub points: usize,
    pub radius: f64,
    pub center: Vec<f64>,
    /// `|true radius − radius| ≤ error_bound` up to grid resolution of thin sets.
    pub error_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub kind: ProblemKind,
    /// SHA-256 of the compact JSON form of `config`.
    pub digest: String,
    /// The exact problem that ran, with command-line overrides applied.
    pub config: ProblemFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<VariantOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckResult>,
    /// Set when the run failed; the remaining fields hold what completed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Kept out of the written report so that it stays byte-stable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

pub fn digest(config: &ProblemFile) -> String {
    let text = serde_json::to_string(config).expect("problem serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl RunReport {
    pub fn new(config: ProblemFile) -> Self {
        Self {
            name: config.name.clone(),
            kind: config.kind,
            digest: digest(&config),
            config,
            outcome: None,
            variants: Vec::new(),
            oracle: None,
            checks: Vec::new(),
            error: None,
            wall_time_s: None,
        }
    }

    pub fn variant(&self, name: &str) -> Option<&Outcome> {
        if name == "main" {
            return self.outcome.as_ref();
        }
        self.variants.iter().find(|v| v.name == name).map(|v| &v.outcome)
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Pretty JSON without the wall time.
    pub fn to_stable_json(&self) -> String {
        let mut r = self.clone();
        r.wall_time_s = None;
        serde_json::to_string_pretty(&r).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Path tables as CSV: one row per path step.
    pub fn path_csv(&self) -> String {
        let mut out = String::from("run,path,step,eps,f,psi,value,x\n");
        let runs = self
            .outcome
            .iter()
            .map(|o| ("main", o))
            .chain(self.variants.iter().map(|v| (v.name.as_str(), &v.outcome)));
        for (name, o) in runs {
            for (p, path) in o.paths.iter().enumerate() {
                for (k, row) in path.rows.iter().enumerate() {
                    let x: Vec<String> = row.x.iter().map(|v| format!("{v:e}")).collect();
                    out.push_str(&format!(
                        "{name},{p},{k},{:e},{:e},{:e},{:e},{}\n",
                        row.eps,
                        row.f,
                        row.psi,
                        row.value,
                        x.join(";")
                    ));
                }
            }
        }
        out
    }
}
