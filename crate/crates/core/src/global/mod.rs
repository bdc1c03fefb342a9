//! Derivative-free global maximization over a box.
//!
//! Three strategies share one driver: differential evolution
//! (rand-to-best/1 with exponential crossover), simulated annealing with
//! geometric cooling, and Nelder–Mead restarted from scrambled Halton points.
//! Non-finite values (including NaN) rank below every finite value; ties go
//! to the earlier evaluation.

mod de;
mod nm;
mod sa;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::sampling::derive_seed;

pub use nm::nelder_mead_max;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    DifferentialEvolution,
    SimulatedAnnealing,
    NelderMeadMultistart,
}

impl Strategy {
    pub fn short_name(&self) -> &'static str {
        match self {
            Strategy::DifferentialEvolution => "de",
            Strategy::SimulatedAnnealing => "sa",
            Strategy::NelderMeadMultistart => "nm",
        }
    }

    pub fn from_short_name(s: &str) -> Option<Self> {
        match s {
            "de" => Some(Strategy::DifferentialEvolution),
            "sa" => Some(Strategy::SimulatedAnnealing),
            "nm" => Some(Strategy::NelderMeadMultistart),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeVariant {
    RandToBest1Exp,
    Rand1Bin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeParams {
    pub mutation: f64,
    pub crossover: f64,
    pub variant: DeVariant,
}

impl Default for DeParams {
    fn default() -> Self {
        Self {
            mutation: 0.7,
            crossover: 0.9,
            variant: DeVariant::RandToBest1Exp,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaParams {
    pub t0: f64,
    pub cooling: f64,
    pub steps_per_temperature: usize,
    /// Proposal standard deviation as a fraction of the box width.
    pub step_fraction: f64,
}

impl Default for SaParams {
    fn default() -> Self {
        Self {
            t0: 1.0,
            cooling: 0.95,
            steps_per_temperature: 20,
            step_fraction: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmParams {
    pub restarts: usize,
    /// Initial simplex edge as a fraction of the box width.
    pub simplex_fraction: f64,
}

impl Default for NmParams {
    fn default() -> Self {
        Self {
            restarts: 64,
            simplex_fraction: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlobalConfig {
    pub strategy: Strategy,
    pub seed: u64,
    pub population: usize,
    pub max_evals: usize,
    pub de: DeParams,
    pub sa: SaParams,
    pub nm: NmParams,
    /// Points evaluated first (DE: injected into the initial population,
    /// NM: used as the first restart points, SA: best one is the start).
    #[serde(skip)]
    pub initial_guesses: Vec<DVector<f64>>,
    /// Local Nelder–Mead refinement of the final best point.
    pub polish: bool,
    /// Stop after this many generations (temperatures for SA) without improvement.
    pub stall_generations: usize,
    /// Relative value tolerance of the stall and population-spread tests.
    pub value_tol: f64,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::DifferentialEvolution,
            seed: 0,
            population: 30,
            max_evals: 20_000,
            de: DeParams::default(),
            sa: SaParams::default(),
            nm: NmParams::default(),
            initial_guesses: Vec::new(),
            polish: true,
            stall_generations: 60,
            value_tol: 1e-10,
        }
    }
}

impl GlobalConfig {
    pub fn with_strategy(strategy: Strategy, seed: u64) -> Self {
        Self { strategy, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategy == Strategy::DifferentialEvolution && self.population < 4 {
            return Err(Error::InvalidArgument(format!(
                "differential evolution needs population >= 4, got {}",
                self.population
            )));
        }
        if self.max_evals < self.population {
            return Err(Error::InvalidArgument(format!(
                "max_evals {} below population {}",
                self.max_evals, self.population
            )));
        }
        if !(self.de.mutation > 0.0 && self.de.mutation <= 2.0) || !(0.0..=1.0).contains(&self.de.crossover) {
            return Err(Error::InvalidArgument("DE mutation must be in (0, 2] and crossover in [0, 1]".into()));
        }
        if !(self.sa.t0 > 0.0) || !(self.sa.cooling > 0.0 && self.sa.cooling < 1.0) || self.sa.steps_per_temperature == 0 {
            return Err(Error::InvalidArgument("invalid annealing schedule".into()));
        }
        if self.nm.restarts == 0 {
            return Err(Error::InvalidArgument("NM restart count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalResult {
    pub u_star: DVector<f64>,
    pub value: f64,
    pub evals: usize,
    /// `(evaluation count, best value so far)` at every improvement.
    pub history: Vec<(usize, f64)>,
    /// The run ended on the stall/spread test rather than the budget.
    pub stalled: bool,
    /// Best value of every restart, in restart order (one entry for a single run).
    pub restart_values: Vec<f64>,
}

/// `a` is strictly better than `b` in the maximization order.
pub(crate) fn better(a: f64, b: f64) -> bool {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => a > b,
        (true, false) => true,
        _ => false,
    }
}

pub(crate) fn rank_value(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::NEG_INFINITY
    }
}

/// Best-so-far bookkeeping with a monotone history; degenerate box
/// coordinates are pinned on every evaluation.
pub(crate) struct Tracker<'a, F> {
    f: &'a F,
    bx: &'a BoxDomain,
    pub evals: usize,
    pub budget: usize,
    pub best_u: Option<DVector<f64>>,
    pub best: f64,
    pub history: Vec<(usize, f64)>,
}

impl<'a, F> Tracker<'a, F>
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    fn new(f: &'a F, bx: &'a BoxDomain, budget: usize) -> Self {
        Self {
            f,
            bx,
            evals: 0,
            budget,
            best_u: None,
            best: f64::NEG_INFINITY,
            history: Vec::new(),
        }
    }

    pub fn remaining(&self) -> usize {
        self.budget.saturating_sub(self.evals)
    }

    pub fn bx(&self) -> &BoxDomain {
        self.bx
    }

    fn record(&mut self, u: &DVector<f64>, v: f64) {
        self.evals += 1;
        if self.best_u.is_none() || better(v, self.best) {
            self.best = rank_value(v);
            self.best_u = Some(u.clone());
            self.history.push((self.evals, self.best));
        }
    }

    pub fn eval(&mut self, u: &DVector<f64>) -> f64 {
        let mut x = u.clone();
        self.bx.clip(&mut x);
        let v = rank_value((self.f)(&x));
        self.record(&x, v);
        v
    }

    /// Evaluates a batch in parallel; bookkeeping follows batch order.
    pub fn eval_batch(&mut self, us: &[DVector<f64>]) -> Vec<f64> {
        use rayon::prelude::*;
        let clipped: Vec<DVector<f64>> = us
            .iter()
            .map(|u| {
                let mut x = u.clone();
                self.bx.clip(&mut x);
                x
            })
            .collect();
        let f = self.f;
        let vals: Vec<f64> = clipped.par_iter().map(|x| rank_value(f(x))).collect();
        for (x, &v) in clipped.iter().zip(&vals) {
            self.record(x, v);
        }
        vals
    }
}

/// Maximizes `f` over `bx` with the configured strategy.
pub fn maximize_box<F>(f: &F, bx: &BoxDomain, cfg: &GlobalConfig) -> Result<GlobalResult>
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    cfg.validate()?;
    for g in &cfg.initial_guesses {
        if g.len() != bx.dim() {
            return Err(Error::DimensionMismatch { expected: bx.dim(), got: g.len() });
        }
    }
    let mut tr = Tracker::new(f, bx, cfg.max_evals);
    let stalled = match cfg.strategy {
        Strategy::DifferentialEvolution => de::run(&mut tr, cfg),
        Strategy::SimulatedAnnealing => sa::run(&mut tr, cfg),
        Strategy::NelderMeadMultistart => nm::run(&mut tr, cfg),
    };
    if cfg.polish && tr.best.is_finite() {
        let start = tr.best_u.clone().expect("at least one evaluation");
        let budget = (cfg.max_evals / 10).max(50 * (bx.dim() + 1)).min(tr.remaining().max(20 * (bx.dim() + 1)));
        tr.budget = tr.evals + budget;
        nm::local_run(&mut tr, &start, 0.01, cfg.value_tol);
    }
    if !tr.best.is_finite() {
        return Err(Error::GlobalFailure(format!(
            "all {} evaluations were infeasible or non-finite",
            tr.evals
        )));
    }
    let u_star = tr.best_u.take().expect("finite best has a point");
    Ok(GlobalResult {
        value: tr.best,
        u_star,
        evals: tr.evals,
        history: tr.history,
        stalled,
        restart_values: vec![tr.best],
    })
}

/// Best of `restarts` independent runs with seeds derived from `cfg.seed`.
///
/// The returned history is the best run's; `restart_values` lists all runs.
pub fn maximize_with_restarts<F>(
    f: &F,
    bx: &BoxDomain,
    cfg: &GlobalConfig,
    restarts: usize,
) -> Result<GlobalResult>
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let mut best: Option<GlobalResult> = None;
    let mut values = Vec::with_capacity(restarts);
    let mut total = 0;
    for k in 0..restarts {
        let mut c = cfg.clone();
        c.seed = if k == 0 { cfg.seed } else { derive_seed(cfg.seed, k as u64) };
        let r = match maximize_box(f, bx, &c) {
            Ok(r) => r,
            Err(Error::GlobalFailure(_)) => {
                values.push(f64::NEG_INFINITY);
                continue;
            }
            Err(e) => return Err(e),
        };
        values.push(r.value);
        total += r.evals;
        if best.as_ref().is_none_or(|b| better(r.value, b.value)) {
            best = Some(r);
        }
    }
    let mut out = best.ok_or_else(|| Error::GlobalFailure("every restart failed".into()))?;
    out.evals = total;
    out.restart_values = values;
    Ok(out)
}
