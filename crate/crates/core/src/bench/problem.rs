//! Declarative problem files: a strict JSON tree, unknown keys rejected.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chebyshev::{evaluation_matrix, free_coefficient_box, ChebyshevTask, LearningMetric, LearningTask};
use crate::domain::{BoxDomain, ConstraintSet, Inequality};
use crate::error::{Error, Result};
use crate::global::{GlobalConfig, Strategy};
use crate::gram::{gram_matrix, BasisFunction, L2InnerProduct};
use crate::nlp::Linear;
use crate::norm::Norm;
use crate::sip::{AffineFamily, AffineTerm, IndexFeature, NormBallFamily, PathOptions, SipProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Cheb,
    Sip,
    Learn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub kind: ProblemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<SetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sip: Option<SipSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning: Option<LearningSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Extra runs of the same problem with solver or norm overrides.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<VariantSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum NormSpec {
    L1 {},
    L2 {},
    Linf {},
    Weighted { matrix: Vec<Vec<f64>> },
    Gram { matrix: Vec<Vec<f64>> },
    /// `L²[0, 1]` Gram matrix of the monomials of the given degrees.
    MonomialGram { degrees: Vec<u32> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub dimension: usize,
    pub norm: NormSpec,
    /// Box over center coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_box: Option<Vec<[f64; 2]>>,
    /// Keep the center on the affine slice of the set's equalities.
    #[serde(default)]
    pub center_on_equalities: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfspaceSpec {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// `uᵀ Q u + linear · u + constant ≤ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    pub q: Vec<Vec<f64>>,
    pub linear: Vec<f64>,
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualitySpec {
    pub matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub halfspaces: Vec<HalfspaceSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quadratics: Vec<QuadraticSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outside_balls: Vec<BallSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inside_balls: Vec<BallSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equalities: Option<EqualitySpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub feature: IndexFeature,
    pub a: Vec<f64>,
    #[serde(default)]
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum FamilySpec {
    /// `Σ φ_k(u) (a_k · x + b_k) ≤ 0`.
    Affine { terms: Vec<TermSpec> },
    /// `‖S x − P u − c₀‖ − q · x − r ≤ 0`.
    NormBall {
        norm: NormSpec,
        map: Vec<Vec<f64>>,
        index_map: Vec<Vec<f64>>,
        shift: Vec<f64>,
        slope: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SipSpec {
    /// Linear objective `c · x`.
    pub objective: Vec<f64>,
    pub state_box: Vec<[f64; 2]>,
    pub slater: Vec<f64>,
    pub index_set: SetSpec,
    pub family: FamilySpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum PointsSpec {
    Explicit { values: Vec<f64> },
    /// `(2k − 1) / (2 count)`, `k = 1..count`.
    Midpoints { count: usize },
}

impl PointsSpec {
    pub fn points(&self) -> Vec<f64> {
        match self {
            PointsSpec::Explicit { values } => values.clone(),
            PointsSpec::Midpoints { count } => {
                (1..=*count).map(|k| (2 * k - 1) as f64 / (2 * count) as f64).collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum DataSpec {
    Values { values: Vec<f64> },
    /// `amplitude · sin(2π · frequency · x)`.
    Sine { amplitude: f64, frequency: f64 },
}

impl DataSpec {
    pub fn values(&self, points: &[f64]) -> Vec<f64> {
        match self {
            DataSpec::Values { values } => values.clone(),
            DataSpec::Sine { amplitude, frequency } => points
                .iter()
                .map(|x| amplitude * (2.0 * std::f64::consts::PI * frequency * x).sin())
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum BoundsSpec {
    /// The same interval on every coefficient.
    All { lower: f64, upper: f64 },
    /// The interval on the coefficients left free by the data; the others
    /// range over what the data force.
    Free { lower: f64, upper: f64 },
    PerCoefficient { bounds: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningSpec {
    pub model_degrees: Vec<u32>,
    /// Defaults to the model basis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_degrees: Option<Vec<u32>>,
    pub points: PointsSpec,
    pub data: DataSpec,
    pub bounds: BoundsSpec,
    /// Norm on `c − w` (shared basis) or, as `monomial_gram`, the joint Gram
    /// of the stacked bases when they differ.
    pub norm: NormSpec,
    #[serde(default = "yes")]
    pub center_on_data: bool,
    /// Box over the search coefficients; required when the bases differ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_box: Option<Vec<[f64; 2]>>,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    /// `de`, `sa` or `nm`.
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_evals: Option<usize>,
    #[serde(default = "one")]
    pub restarts: usize,
    /// Local refinement of the global optimizer's best point.
    #[serde(default = "yes")]
    pub polish: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nm_restarts: Option<usize>,
    #[serde(default = "default_eps_start")]
    pub eps_start: f64,
    #[serde(default = "default_eps_steps")]
    pub eps_steps: usize,
    /// Runs the whole schedule instead of stopping once the path settles.
    #[serde(default)]
    pub full_schedule: bool,
    /// Centers of the quadratic regularizers `½‖x − c‖²`, one path each;
    /// a default is derived when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regularizer_centers: Vec<Vec<f64>>,
    /// Exchange refinement of value runs.
    #[serde(default = "yes")]
    pub exchange_polish: bool,
    #[serde(default = "yes")]
    pub vertex_seeding: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuple_size: Option<usize>,
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// Skip the regularization path.
    #[serde(default)]
    pub value_only: bool,
}

fn default_strategy() -> String {
    "de".into()
}
fn one() -> usize {
    1
}
fn default_eps_start() -> f64 {
    1.0
}
fn default_eps_steps() -> usize {
    21
}
fn default_probes() -> usize {
    10_000
}

impl Default for SolverSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("solver defaults")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polish: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange_polish: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex_seeding: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_only: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_schedule: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularizer_centers: Option<Vec<Vec<f64>>>,
}

impl SolverOverrides {
    pub fn apply(&self, s: &mut SolverSpec) {
        if let Some(v) = &self.strategy {
            s.strategy = v.clone();
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.restarts {
            s.restarts = v;
        }
        if let Some(v) = self.polish {
            s.polish = v;
        }
        if let Some(v) = self.exchange_polish {
            s.exchange_polish = v;
        }
        if let Some(v) = self.vertex_seeding {
            s.vertex_seeding = v;
        }
        if let Some(v) = self.value_only {
            s.value_only = v;
        }
        if let Some(v) = self.full_schedule {
            s.full_schedule = v;
        }
        if let Some(v) = &self.regularizer_centers {
            s.regularizer_centers = v.clone();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub name: String,
    #[serde(default)]
    pub solver: SolverOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default = "yes")]
    pub plot: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: None, plot: true }
    }
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

fn finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(schema(format!("{what}: non-finite number")))
    }
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(schema(format!("{what}: ragged matrix")));
    }
    for row in rows {
        finite(row, what)?;
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn vector(xs: &[f64], what: &str) -> Result<DVector<f64>> {
    finite(xs, what)?;
    Ok(DVector::from_column_slice(xs))
}

pub(crate) fn box_of(bounds: &[[f64; 2]], what: &str) -> Result<BoxDomain> {
    for b in bounds {
        finite(b, what)?;
    }
    let pairs: Vec<(f64, f64)> = bounds.iter().map(|b| (b[0], b[1])).collect();
    BoxDomain::from_bounds(&pairs).map_err(|e| schema(format!("{what}: {e}")))
}

impl NormSpec {
    pub fn build(&self) -> Result<Norm> {
        match self {
            NormSpec::L1 {} => Ok(Norm::l1()),
            NormSpec::L2 {} => Ok(Norm::l2()),
            NormSpec::Linf {} => Ok(Norm::linf()),
            NormSpec::Weighted { matrix: m } => Norm::weighted(matrix(m, "norm matrix")?),
            NormSpec::Gram { matrix: m } => Norm::gram(matrix(m, "norm matrix")?),
            NormSpec::MonomialGram { degrees } => Norm::gram(monomial_gram(degrees)?),
        }
    }
}

pub(crate) fn monomial_gram(degrees: &[u32]) -> Result<DMatrix<f64>> {
    let basis: Vec<BasisFunction> = degrees.iter().map(|&d| BasisFunction::Monomial(d)).collect();
    gram_matrix(&basis, &L2InnerProduct::unit_interval())
}

impl SetSpec {
    pub fn build(&self) -> Result<ConstraintSet> {
        let bx = box_of(&self.bounds, "set box")?;
        let n = bx.dim();
        let mut ineqs = Vec::new();
        for h in &self.halfspaces {
            if h.normal.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: h.normal.len() });
            }
            finite(&[h.offset], "halfspace offset")?;
            ineqs.push(Inequality::halfspace(vector(&h.normal, "halfspace normal")?, h.offset)?);
        }
        for q in &self.quadratics {
            finite(&[q.constant], "quadratic constant")?;
            ineqs.push(Inequality::Quadratic {
                q: matrix(&q.q, "quadratic matrix")?,
                linear: vector(&q.linear, "quadratic linear term")?,
                constant: q.constant,
            });
        }
        for b in &self.outside_balls {
            finite(&[b.radius], "ball radius")?;
            ineqs.push(Inequality::outside_ball(vector(&b.center, "ball center")?, b.radius));
        }
        for b in &self.inside_balls {
            finite(&[b.radius], "ball radius")?;
            ineqs.push(Inequality::inside_ball(vector(&b.center, "ball center")?, b.radius));
        }
        let eq = match &self.equalities {
            Some(e) => Some((matrix(&e.matrix, "equality matrix")?, vector(&e.rhs, "equality rhs")?)),
            None => None,
        };
        ConstraintSet::new(bx, ineqs, eq)
    }
}

impl SolverSpec {
    pub fn strategy(&self) -> Result<Strategy> {
        Strategy::from_short_name(&self.strategy)
            .ok_or_else(|| schema(format!("unknown strategy {:?} (expected de, sa or nm)", self.strategy)))
    }

    pub fn global_config(&self) -> Result<GlobalConfig> {
        let mut cfg = GlobalConfig::with_strategy(self.strategy()?, self.seed);
        if let Some(p) = self.population {
            cfg.population = p;
        }
        if let Some(m) = self.max_evals {
            cfg.max_evals = m;
        }
        if let Some(r) = self.nm_restarts {
            cfg.nm.restarts = r;
        }
        cfg.polish = self.polish;
        cfg.validate().map_err(|e| schema(e.to_string()))?;
        Ok(cfg)
    }

    pub fn path_options(&self) -> Result<PathOptions> {
        if !(self.eps_start.is_finite() && self.eps_start > 0.0) || self.eps_steps == 0 {
            return Err(schema("eps_start must be positive and eps_steps at least 1"));
        }
        let mut o = PathOptions::geometric(self.eps_start, self.eps_steps);
        o.full_schedule = self.full_schedule;
        Ok(o)
    }
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: ProblemFile = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }

    /// Structural checks beyond the serde schema.
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ProblemKind::Cheb => {
                let (Some(space), Some(set)) = (&self.space, &self.set) else {
                    return Err(schema("a cheb problem needs `space` and `set`"));
                };
                if set.bounds.len() != space.dimension {
                    return Err(schema("set box dimension differs from space dimension"));
                }
            }
            ProblemKind::Sip => {
                if self.sip.is_none() {
                    return Err(schema("a sip problem needs a `sip` section"));
                }
            }
            ProblemKind::Learn => {
                if self.learning.is_none() {
                    return Err(schema("a learn problem needs a `learning` section"));
                }
            }
        }
        self.solver.strategy()?;
        self.solver.path_options()?;
        for c in &self.solver.regularizer_centers {
            finite(c, "regularizer center")?;
        }
        let mut names: Vec<&str> = self.variants.iter().map(|v| v.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) || names.contains(&"main") {
            return Err(schema("variant names must be unique and not `main`"));
        }
        Ok(())
    }

    /// The problem with a variant's overrides applied.
    pub fn variant(&self, name: &str) -> Result<ProblemFile> {
        let v = self
            .variants
            .iter()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no variant named {name:?}")))?;
        let mut p = self.clone();
        p.variants.clear();
        v.solver.apply(&mut p.solver);
        if let Some(n) = &v.norm {
            if let Some(space) = p.space.as_mut() {
                space.norm = n.clone();
            }
            if let Some(l) = p.learning.as_mut() {
                l.norm = n.clone();
            }
        }
        if let Some(b) = &v.bounds {
            let l = p
                .learning
                .as_mut()
                .ok_or_else(|| schema("bounds overrides apply to learning problems only"))?;
            l.bounds = b.clone();
        }
        Ok(p)
    }

    pub fn chebyshev_task(&self) -> Result<ChebyshevTask> {
        match self.kind {
            ProblemKind::Cheb => {
                let space = self.space.as_ref().ok_or_else(|| schema("missing `space`"))?;
                let spec = self.set.as_ref().ok_or_else(|| schema("missing `set`"))?;
                let set = spec.build()?;
                let mut t = ChebyshevTask::new(set, space.norm.build()?).with_vertex_seeding(self.solver.vertex_seeding);
                if let Some(b) = &space.search_box {
                    t = t.with_search(box_of(b, "search box")?);
                }
                if space.center_on_equalities {
                    let e = spec
                        .equalities
                        .as_ref()
                        .ok_or_else(|| schema("center_on_equalities needs set equalities"))?;
                    t = t.with_center_equalities(matrix(&e.matrix, "equality matrix")?, vector(&e.rhs, "equality rhs")?);
                }
                if let Some(n) = self.solver.tuple_size {
                    t = t.with_tuple_size(n);
                }
                Ok(t)
            }
            ProblemKind::Learn => {
                let mut t = self.learning_task()?.chebyshev_task()?.with_vertex_seeding(self.solver.vertex_seeding);
                if let Some(n) = self.solver.tuple_size {
                    t = t.with_tuple_size(n);
                }
                Ok(t)
            }
            ProblemKind::Sip => Err(schema("a sip problem has no Chebyshev task")),
        }
    }

    pub fn learning_task(&self) -> Result<LearningTask> {
        let l = self.learning.as_ref().ok_or_else(|| schema("missing `learning`"))?;
        let model: Vec<BasisFunction> = l.model_degrees.iter().map(|&d| BasisFunction::Monomial(d)).collect();
        let search_degrees = l.search_degrees.clone().unwrap_or_else(|| l.model_degrees.clone());
        let search: Vec<BasisFunction> = search_degrees.iter().map(|&d| BasisFunction::Monomial(d)).collect();
        let points = l.points.points();
        finite(&points, "sample points")?;
        let data = l.data.values(&points);
        finite(&data, "data")?;
        if data.len() != points.len() {
            return Err(schema("one data value per sample point is required"));
        }
        let lam = evaluation_matrix(&points, &model);
        let y = DVector::from_vec(data);
        let d = model.len();
        let q = match &l.bounds {
            BoundsSpec::All { lower, upper } => box_of(&vec![[*lower, *upper]; d], "coefficient bounds")?,
            BoundsSpec::PerCoefficient { bounds } => box_of(bounds, "coefficient bounds")?,
            BoundsSpec::Free { lower, upper } => {
                let free = box_of(&vec![[*lower, *upper]; d.saturating_sub(points.len())], "coefficient bounds")?;
                free_coefficient_box(&lam, &y, &free)?
            }
        };
        let shared = search_degrees == l.model_degrees;
        let metric = if shared {
            LearningMetric::Coefficient(l.norm.build()?)
        } else {
            let NormSpec::MonomialGram { .. } = &l.norm else {
                return Err(schema("distinct search and model bases need a `monomial_gram` norm"));
            };
            let mut all = search_degrees.clone();
            all.extend(&l.model_degrees);
            LearningMetric::JointGram(monomial_gram(&all)?)
        };
        Ok(LearningTask {
            search_basis: search,
            model_basis: model,
            measurements: lam,
            data: y,
            coeff_bounds: q,
            metric,
            center_on_data: l.center_on_data && shared,
            center_box: l.center_box.as_ref().map(|b| box_of(b, "center box")).transpose()?,
        })
    }

    pub fn sip_problem(&self) -> Result<SipProblem> {
        let s = self.sip.as_ref().ok_or_else(|| schema("missing `sip`"))?;
        let state = box_of(&s.state_box, "state box")?;
        let n = state.dim();
        let index = s.index_set.build()?;
        let family: Arc<dyn crate::sip::ConstraintFamily> = match &s.family {
            FamilySpec::Affine { terms } => {
                let terms = terms
                    .iter()
                    .map(|t| {
                        finite(&[t.b], "term offset")?;
                        Ok(AffineTerm { feature: t.feature, a: vector(&t.a, "term coefficients")?, b: t.b })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Arc::new(AffineFamily::new(n, index.dim(), terms)?)
            }
            FamilySpec::NormBall { norm, map, index_map, shift, slope, offset } => {
                finite(&[*offset], "family offset")?;
                Arc::new(NormBallFamily::new(
                    norm.build()?,
                    matrix(map, "family map")?,
                    matrix(index_map, "family index map")?,
                    vector(shift, "family shift")?,
                    vector(slope, "family slope")?,
                    *offset,
                )?)
            }
        };
        if s.objective.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: s.objective.len() });
        }
        let obj = Arc::new(Linear::new(vector(&s.objective, "objective")?, 0.0));
        let mut sip = SipProblem::new(obj, family, state, index, vector(&s.slater, "slater point")?)?
            .with_exchange_polish(self.solver.exchange_polish);
        if let Some(t) = self.solver.tuple_size {
            sip = sip.with_tuple_size(t)?;
        }
        Ok(sip)
    }
}
