use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chebsip::bench::problem::ProblemKind;
use chebsip::bench::{grid_oracle, repro, run_problem, write_outputs, Overrides, ProblemFile, RunReport};
use chebsip::Error;

const EXIT_SCHEMA: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_MISMATCH: u8 = 4;

#[derive(Parser)]
#[command(name = "chebsip", version, about = "Semi-infinite programs, Chebyshev centers and optimal recovery")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed of the global optimizer.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Global strategy: de, sa or nm.
    #[arg(long, global = true, value_parser = ["de", "sa", "nm"])]
    strategy: Option<String>,
    /// Independent global runs per value solve.
    #[arg(long, global = true)]
    restarts: Option<usize>,
    /// First regularization weight.
    #[arg(long, global = true)]
    eps_start: Option<f64>,
    /// Number of halvings of the regularization weight.
    #[arg(long, global = true)]
    eps_steps: Option<usize>,
    /// Output directory; one subdirectory per problem.
    #[arg(long, global = true, env = "CHEBSIP_OUT", default_value = "chebsip-out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Chebyshev center of a set.
    Cheb { file: PathBuf },
    /// Semi-infinite program value and regularization paths.
    Sip { file: PathBuf },
    /// Worst-case optimal coefficients from data.
    Learn { file: PathBuf },
    /// Grid minimax reference for a center problem.
    Oracle {
        file: PathBuf,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
    },
    /// Runs a bundled experiment and compares it with stored values.
    Repro {
        /// Experiment id; omit with --list.
        name: Option<String>,
        #[arg(long)]
        list: bool,
    },
}

struct Failure {
    code: u8,
    message: String,
    report: Option<RunReport>,
}

fn classify(e: Error) -> Failure {
    let code = match e {
        Error::Schema(_) | Error::Json(_) | Error::Io(_) => EXIT_SCHEMA,
        _ => EXIT_SOLVER,
    };
    Failure { code, message: e.to_string(), report: None }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        classify(e)
    }
}

fn load(path: &Path, g: &Global) -> Result<ProblemFile, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure { code: EXIT_SCHEMA, message: format!("{}: {e}", path.display()), report: None })?;
    let mut p = ProblemFile::from_json(&text)?;
    overrides(g).apply(&mut p)?;
    Ok(p)
}

fn overrides(g: &Global) -> Overrides {
    Overrides {
        seed: g.seed,
        strategy: g.strategy.clone(),
        restarts: g.restarts,
        eps_start: g.eps_start,
        eps_steps: g.eps_steps,
    }
}

fn expect_kind(p: &ProblemFile, kind: ProblemKind, cmd: &str) -> Result<(), Failure> {
    if p.kind != kind {
        return Err(Failure {
            code: EXIT_SCHEMA,
            message: format!("`{cmd}` needs a problem of kind {kind:?}, the file has {:?}", p.kind),
            report: None,
        });
    }
    Ok(())
}

/// Runs and keeps a partial report when the solver fails.
fn solve(p: &ProblemFile) -> Result<RunReport, Failure> {
    run_problem(p).map_err(|e| {
        let mut r = RunReport::new(p.clone());
        r.error = Some(e.to_string());
        let mut f = classify(e);
        f.report = Some(r);
        f
    })
}

fn summarize(r: &RunReport) {
    println!("{} ({:?}) digest {}", r.name, r.kind, &r.digest[..16]);
    let runs = r
        .outcome
        .iter()
        .map(|o| ("main", o))
        .chain(r.variants.iter().map(|v| (v.name.as_str(), &v.outcome)));
    for (name, o) in runs {
        let mut line = format!("  {name}: value {:.6}", o.value);
        if let Some(c) = &o.center {
            let parts: Vec<String> = c.iter().take(8).map(|x| format!("{x:.6}")).collect();
            let more = if c.len() > 8 { ", ..." } else { "" };
            line.push_str(&format!(" center ({}{more})", parts.join(", ")));
        }
        if let Some(c) = &o.circumscription {
            line.push_str(&format!(" circumscribed {} (worst {:.2e})", c.ok, c.worst));
        }
        if let Some(res) = o.interpolation_residual {
            line.push_str(&format!(" interpolation residual {res:.2e}"));
        }
        println!("{line}");
    }
    if let Some(o) = &r.oracle {
        println!("  oracle: radius {:.6} ± {:.2e} over {} points at resolution {}", o.radius, o.error_bound, o.points, o.resolution);
    }
    for c in &r.checks {
        let run = c.variant.as_deref().map(|v| format!("[{v}] ")).unwrap_or_default();
        println!("  {} {run}{} ({}): {}", if c.passed { "PASS" } else { "FAIL" }, c.check, c.origin, c.detail);
    }
    if let Some(t) = r.wall_time_s {
        eprintln!("  wall time {t:.2} s");
    }
}

fn finish(r: &RunReport, out: &Path) -> Result<(), Failure> {
    let dir = out.join(&r.name);
    write_outputs(r, &dir)?;
    summarize(r);
    eprintln!("  written to {}", dir.display());
    Ok(())
}

fn execute(cli: &Cli) -> Result<u8, Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Cheb { file } | Command::Sip { file } | Command::Learn { file } => {
            let p = load(file, g)?;
            let (kind, cmd) = match &cli.command {
                Command::Cheb { .. } => (ProblemKind::Cheb, "cheb"),
                Command::Sip { .. } => (ProblemKind::Sip, "sip"),
                _ => (ProblemKind::Learn, "learn"),
            };
            expect_kind(&p, kind, cmd)?;
            let r = solve(&p)?;
            finish(&r, &g.out)?;
            Ok(if r.error.is_some() { EXIT_SOLVER } else { 0 })
        }
        Command::Oracle { file, resolution } => {
            let p = load(file, g)?;
            let task = p.chebyshev_task()?;
            let mut r = RunReport::new(p);
            r.oracle = Some(grid_oracle(&task, *resolution)?);
            finish(&r, &g.out)?;
            Ok(0)
        }
        Command::Repro { name, list } => {
            if *list || name.is_none() {
                for id in repro::ids() {
                    println!("{id}");
                }
                return Ok(if name.is_none() && !*list { EXIT_SCHEMA } else { 0 });
            }
            let id = name.as_deref().unwrap_or_default();
            let mut p = repro::bundled_problem(id).map_err(|e| Failure {
                code: EXIT_SCHEMA,
                message: e.to_string(),
                report: None,
            })?;
            overrides(g).apply(&mut p)?;
            let r = repro::run_repro(id, Some(p.clone())).map_err(|e| {
                let mut r = RunReport::new(p.clone());
                r.error = Some(e.to_string());
                let mut f = classify(e);
                f.report = Some(r);
                f
            })?;
            finish(&r, &g.out)?;
            Ok(if r.error.is_some() {
                EXIT_SOLVER
            } else if r.all_checks_pass() {
                0
            } else {
                EXIT_MISMATCH
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            if let Some(r) = &f.report {
                let _ = write_outputs(r, &cli.global.out.join(&r.name));
            }
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
