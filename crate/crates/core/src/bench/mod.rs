//! Experiment harness: problem files, runs, reports, oracles and the
//! bundled reproduction suite.

pub mod oracle;
pub mod plot;
pub mod problem;
pub mod repro;
pub mod report;
pub mod run;

use std::path::{Path, PathBuf};

pub use oracle::{grid_oracle, min_enclosing_ball_2d};
pub use problem::ProblemFile;
pub use repro::{run_repro, Check, ExpectedFile, Origin};
pub use report::{Outcome, RunReport};
pub use run::{run_problem, run_single};

use crate::error::Result;

/// Command-line solver settings that take precedence over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub strategy: Option<String>,
    pub restarts: Option<usize>,
    pub eps_start: Option<f64>,
    pub eps_steps: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, p: &mut ProblemFile) -> Result<()> {
        let s = &mut p.solver;
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = &self.strategy {
            s.strategy = v.clone();
        }
        if let Some(v) = self.restarts {
            s.restarts = v;
        }
        if let Some(v) = self.eps_start {
            s.eps_start = v;
        }
        if let Some(v) = self.eps_steps {
            s.eps_steps = v;
        }
        p.validate()
    }
}

/// Writes `report.json`, `paths.csv`, and the plot files into `dir`, all
/// after the run has finished. Returns the paths written.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        files.push(path);
        Ok(())
    };
    put("report.json", report.to_stable_json() + "\n")?;
    put("paths.csv", report.path_csv())?;
    if let Some(t) = report.wall_time_s {
        put("timing.json", format!("{{\"wall_time_s\": {t}}}\n"))?;
    }
    if report.config.output.plot {
        if let Some(o) = &report.outcome {
            let mut base = report.config.clone();
            base.variants.clear();
            if let Some(svg) = plot::svg(&base, o)? {
                put("plot.svg", svg)?;
            }
            if let Some(csv) = plot::learning_curve(&base, o) {
                put("curve.csv", csv)?;
            }
        }
    }
    Ok(files)
}
