//! Boxes, constraint-described compact sets, and affine parametrizations.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};
use crate::sampling::ScrambledHalton;

/// Tolerance under which a point counts as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Axis-aligned box `lower ≤ u ≤ upper`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxDomain {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidArgument("box has dimension 0".into()));
        }
        for i in 0..lower.len() {
            if !(lower[i].is_finite() && upper[i].is_finite()) {
                return Err(Error::NonFinite(format!("box bound in coordinate {i}")));
            }
            if lower[i] > upper[i] {
                return Err(Error::InvalidArgument(format!(
                    "box lower bound {} exceeds upper bound {} in coordinate {i}",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            DVector::from_iterator(bounds.len(), bounds.iter().map(|b| b.0)),
            DVector::from_iterator(bounds.len(), bounds.iter().map(|b| b.1)),
        )
    }

    /// `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(DVector::from_element(n, lo), DVector::from_element(n, hi))
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn width(&self) -> DVector<f64> {
        &self.upper - &self.lower
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.upper + &self.lower) * 0.5
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.lower[i] == self.upper[i]
    }

    pub fn contains(&self, u: &DVector<f64>) -> bool {
        self.residual(u) <= FEASIBILITY_TOL
    }

    /// Largest bound violation, `0` inside.
    pub fn residual(&self, u: &DVector<f64>) -> f64 {
        let mut r = 0.0_f64;
        for i in 0..self.dim() {
            r = r.max(self.lower[i] - u[i]).max(u[i] - self.upper[i]);
        }
        r
    }

    pub fn clip(&self, u: &mut DVector<f64>) {
        for i in 0..self.dim() {
            u[i] = u[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Maps a point of the unit cube into the box.
    pub fn from_unit(&self, t: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| self.lower[i] + t[i] * (self.upper[i] - self.lower[i])),
        )
    }

    /// Cartesian product `self × other`.
    pub fn product(&self, other: &BoxDomain) -> BoxDomain {
        let lower = DVector::from_iterator(
            self.dim() + other.dim(),
            self.lower.iter().chain(other.lower.iter()).copied(),
        );
        let upper = DVector::from_iterator(
            self.dim() + other.dim(),
            self.upper.iter().chain(other.upper.iter()).copied(),
        );
        BoxDomain { lower, upper }
    }

    /// `self^k`.
    pub fn power(&self, k: usize) -> BoxDomain {
        let mut b = self.clone();
        for _ in 1..k {
            b = b.product(self);
        }
        b
    }

    /// Box scaled about its center by `1 + inflation` in each coordinate.
    pub fn inflated(&self, inflation: f64) -> BoxDomain {
        let c = self.center();
        let half = self.width() * (0.5 * (1.0 + inflation));
        BoxDomain {
            lower: &c - &half,
            upper: &c + &half,
        }
    }

    pub fn vertices(&self) -> Vec<DVector<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                DVector::from_iterator(
                    n,
                    (0..n).map(|i| if mask >> i & 1 == 1 { self.upper[i] } else { self.lower[i] }),
                )
            })
            .collect()
    }
}

/// Scalar inequality `h(u) ≤ 0` describing part of a compact set.
#[derive(Clone)]
pub enum Inequality {
    /// `normal · u ≤ offset`, stored with a unit normal.
    Halfspace { normal: DVector<f64>, offset: f64 },
    /// `uᵀ Q u + linear · u + constant ≤ 0`.
    Quadratic {
        q: DMatrix<f64>,
        linear: DVector<f64>,
        constant: f64,
    },
    Custom(Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>),
}

impl fmt::Debug for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Inequality::Halfspace { normal, offset } => f
                .debug_struct("Halfspace")
                .field("normal", &normal.as_slice())
                .field("offset", offset)
                .finish(),
            Inequality::Quadratic { constant, .. } => {
                f.debug_struct("Quadratic").field("constant", constant).finish()
            }
            Inequality::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Inequality {
    /// `a · u ≤ b`; the row is normalized so the residual is a Euclidean distance.
    pub fn halfspace(a: DVector<f64>, b: f64) -> Result<Self> {
        let n = a.norm();
        if !(n.is_finite() && n > 0.0) || !b.is_finite() {
            return Err(Error::InvalidArgument("degenerate halfspace".into()));
        }
        Ok(Inequality::Halfspace {
            normal: a / n,
            offset: b / n,
        })
    }

    /// `‖u − center‖₂² ≥ radius²`: the complement of an open ball.
    pub fn outside_ball(center: DVector<f64>, radius: f64) -> Self {
        let n = center.len();
        Inequality::Quadratic {
            q: -DMatrix::identity(n, n),
            linear: &center * 2.0,
            constant: radius * radius - center.norm_squared(),
        }
    }

    /// `‖u − center‖₂² ≤ radius²`.
    pub fn inside_ball(center: DVector<f64>, radius: f64) -> Self {
        let n = center.len();
        Inequality::Quadratic {
            q: DMatrix::identity(n, n),
            linear: &center * -2.0,
            constant: center.norm_squared() - radius * radius,
        }
    }

    pub fn eval(&self, u: &DVector<f64>) -> f64 {
        match self {
            Inequality::Halfspace { normal, offset } => normal.dot(u) - offset,
            Inequality::Quadratic { q, linear, constant } => {
                u.dot(&(q * u)) + linear.dot(u) + constant
            }
            Inequality::Custom(h) => h(u),
        }
    }

    /// A (numerical, for `Custom`) gradient used by feasibility restoration.
    fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        match self {
            Inequality::Halfspace { normal, .. } => normal.clone(),
            Inequality::Quadratic { q, linear, .. } => (q + q.transpose()) * u + linear,
            Inequality::Custom(h) => {
                let mut g = DVector::zeros(u.len());
                let mut v = u.clone();
                for i in 0..u.len() {
                    let step = 1e-7 * (1.0 + u[i].abs());
                    v[i] = u[i] + step;
                    let fp = h(&v);
                    v[i] = u[i] - step;
                    let fm = h(&v);
                    v[i] = u[i];
                    g[i] = (fp - fm) / (2.0 * step);
                }
                g
            }
        }
    }

    /// The inequality pulled back through `u = p + N z`.
    fn compose(&self, p: &DVector<f64>, basis: &DMatrix<f64>) -> Result<Inequality> {
        Ok(match self {
            Inequality::Halfspace { normal, offset } => {
                let a = basis.transpose() * normal;
                let b = offset - normal.dot(p);
                if a.norm() <= 1e-14 {
                    // constant along the slice: encode as a fixed custom value
                    let c = -b;
                    Inequality::Custom(Arc::new(move |_: &DVector<f64>| c))
                } else {
                    Inequality::halfspace(a, b)?
                }
            }
            Inequality::Quadratic { q, linear, constant } => Inequality::Quadratic {
                q: basis.transpose() * q * basis,
                linear: basis.transpose() * ((q + q.transpose()) * p + linear),
                constant: p.dot(&(q * p)) + linear.dot(p) + constant,
            },
            Inequality::Custom(h) => {
                let h = h.clone();
                let p = p.clone();
                let basis = basis.clone();
                Inequality::Custom(Arc::new(move |z: &DVector<f64>| h(&(&p + &basis * z))))
            }
        })
    }
}

/// Solution set `{u : A u = y}` written as `p + N z`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineParametrization {
    particular: DVector<f64>,
    basis: DMatrix<f64>,
    /// Left inverse `L` of `N` (`L N = I`) giving `z = L (u − p)`.
    left: DMatrix<f64>,
}

impl AffineParametrization {
    pub fn particular(&self) -> &DVector<f64> {
        &self.particular
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Ambient dimension `n`.
    pub fn ambient_dim(&self) -> usize {
        self.particular.len()
    }

    /// Free dimension `k = n − rank(A)`.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn map(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.particular + &self.basis * z
    }

    /// Coordinates of `w` (exact on the affine set; for [`affine_parametrize`]
    /// the orthogonal projection elsewhere).
    pub fn coordinates(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.left * (w - &self.particular)
    }

    pub fn left_inverse(&self) -> &DMatrix<f64> {
        &self.left
    }

    /// Identity parametrization of `R^n`.
    pub fn identity(n: usize) -> Self {
        Self {
            particular: DVector::zeros(n),
            basis: DMatrix::identity(n, n),
            left: DMatrix::identity(n, n),
        }
    }
}

/// Parametrizes the solutions of `A u = y` (`A` is `m × n`, `m` may be 0).
pub fn affine_parametrize(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<AffineParametrization> {
    let (m, n) = a.shape();
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: y.len() });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("zero-dimensional ambient space".into()));
    }
    if m == 0 || a.amax() == 0.0 {
        if y.amax() > 1e-8 {
            return Err(Error::InconsistentSystem(y.amax()));
        }
        return Ok(AffineParametrization::identity(n));
    }
    // Pad to at least n rows so the SVD returns a full right basis.
    let rows = m.max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m, n)).copy_from(a);
    let svd = SVD::new(padded, true, true);
    let u = svd.u.as_ref().expect("svd u");
    let v_t = svd.v_t.as_ref().expect("svd v_t");
    let smax = svd.singular_values.max();
    let cutoff = smax * 1e-12 * (m.max(n) as f64);
    let mut particular = DVector::zeros(n);
    let mut null_cols = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let vk = v_t.row(k).transpose();
        if s > cutoff {
            let uk = u.column(k);
            let coef = uk.rows(0, m).dot(y) / s;
            particular += vk * coef;
        } else {
            null_cols.push(vk);
        }
    }
    let residual = (a * &particular - y).amax();
    if residual > 1e-8 * (1.0 + y.amax()) {
        return Err(Error::InconsistentSystem(residual));
    }
    let basis = if null_cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&null_cols)
    };
    let left = basis.transpose();
    Ok(AffineParametrization { particular, basis, left })
}

/// Parametrizes the solutions of `A u = y` by a subset of the original
/// coordinates: the leftmost independent columns of `A` are solved for and
/// the remaining coordinates are free, so `z` is `u` restricted to them.
pub fn coordinate_parametrize(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<AffineParametrization> {
    let ortho = affine_parametrize(a, y)?;
    let n = ortho.ambient_dim();
    let rank = n - ortho.dim();
    if rank == 0 || rank == n {
        return Ok(ortho);
    }
    let scale = a.amax();
    let mut pinned: Vec<usize> = Vec::with_capacity(rank);
    for j in 0..n {
        if pinned.len() == rank {
            break;
        }
        let mut cols: Vec<usize> = pinned.clone();
        cols.push(j);
        let sub = a.select_columns(&cols);
        let sv = sub.singular_values();
        if sv.min() > 1e-10 * scale * (n as f64) {
            pinned = cols;
        }
    }
    if pinned.len() < rank {
        return Ok(ortho);
    }
    let free: Vec<usize> = (0..n).filter(|j| !pinned.contains(j)).collect();
    let ap = a.select_columns(&pinned);
    let svd = ap.svd(true, true);
    let tol = 1e-14 * scale;
    let solve = |rhs: &DVector<f64>| svd.solve(rhs, tol).map_err(|e| Error::InvalidArgument(e.into()));
    let p_pinned = solve(y)?;
    let mut particular = DVector::zeros(n);
    for (k, &i) in pinned.iter().enumerate() {
        particular[i] = p_pinned[k];
    }
    let k = free.len();
    let mut basis = DMatrix::zeros(n, k);
    let mut left = DMatrix::zeros(k, n);
    for (c, &j) in free.iter().enumerate() {
        let col = solve(&a.column(j).into_owned())?;
        basis[(j, c)] = 1.0;
        for (r, &i) in pinned.iter().enumerate() {
            basis[(i, c)] = -col[r];
        }
        left[(c, j)] = 1.0;
    }
    let residual = (a * &particular - y).amax();
    if residual > 1e-8 * (1.0 + y.amax()) {
        return Ok(ortho);
    }
    Ok(AffineParametrization { particular, basis, left })
}

/// Compact set: a box intersected with inequalities and optional affine equalities.
#[derive(Clone, Debug)]
pub struct ConstraintSet {
    bbox: BoxDomain,
    inequalities: Vec<Inequality>,
    equalities: Option<(DMatrix<f64>, DVector<f64>)>,
    feasible_point: DVector<f64>,
    /// Present when the set lives in coordinates of an affine slice.
    embedding: Option<AffineParametrization>,
}

impl ConstraintSet {
    /// Builds the set and locates a feasible point; fails if none is found.
    pub fn new(
        bbox: BoxDomain,
        inequalities: Vec<Inequality>,
        equalities: Option<(DMatrix<f64>, DVector<f64>)>,
    ) -> Result<Self> {
        let n = bbox.dim();
        if let Some((a, y)) = &equalities {
            if a.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
            }
            if a.nrows() != y.len() {
                return Err(Error::DimensionMismatch { expected: a.nrows(), got: y.len() });
            }
        }
        for ineq in &inequalities {
            match ineq {
                Inequality::Halfspace { normal, .. } if normal.len() != n => {
                    return Err(Error::DimensionMismatch { expected: n, got: normal.len() })
                }
                Inequality::Quadratic { q, linear, .. } if q.nrows() != n || linear.len() != n => {
                    return Err(Error::DimensionMismatch { expected: n, got: linear.len() })
                }
                _ => {}
            }
        }
        let mut set = Self {
            feasible_point: bbox.center(),
            bbox,
            inequalities,
            equalities,
            embedding: None,
        };
        set.feasible_point = set.find_feasible_point()?;
        Ok(set)
    }

    pub fn boxed(bbox: BoxDomain) -> Self {
        Self {
            feasible_point: bbox.center(),
            bbox,
            inequalities: Vec::new(),
            equalities: None,
            embedding: None,
        }
    }

    pub fn bbox(&self) -> &BoxDomain {
        &self.bbox
    }

    /// The same set with its box intersected with `bx`; `bx` must still
    /// contain the whole set.
    pub fn with_tighter_bbox(&self, bx: &BoxDomain) -> Result<Self> {
        if bx.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: bx.dim() });
        }
        let lo = self.bbox.lower().sup(bx.lower());
        let hi = self.bbox.upper().inf(bx.upper());
        let mut out = self.clone();
        out.bbox = BoxDomain::new(lo, hi)?;
        if !out.contains(&out.feasible_point) {
            out.feasible_point = out.find_feasible_point()?;
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    pub fn inequalities(&self) -> &[Inequality] {
        &self.inequalities
    }

    pub fn equalities(&self) -> Option<&(DMatrix<f64>, DVector<f64>)> {
        self.equalities.as_ref()
    }

    pub fn feasible_point(&self) -> &DVector<f64> {
        &self.feasible_point
    }

    pub fn embedding(&self) -> Option<&AffineParametrization> {
        self.embedding.as_ref()
    }

    /// Maps set coordinates to the ambient space (identity unless parametrized).
    pub fn to_ambient(&self, u: &DVector<f64>) -> DVector<f64> {
        match &self.embedding {
            Some(p) => p.map(u),
            None => u.clone(),
        }
    }

    /// `max(0, box violation, max_j h_j(u), ‖A u − y‖_∞)`.
    pub fn residual(&self, u: &DVector<f64>) -> f64 {
        let mut r = self.bbox.residual(u);
        for ineq in &self.inequalities {
            r = r.max(ineq.eval(u));
        }
        if let Some((a, y)) = &self.equalities {
            r = r.max((a * u - y).amax());
        }
        r.max(0.0)
    }

    pub fn contains(&self, u: &DVector<f64>) -> bool {
        self.residual(u) <= FEASIBILITY_TOL
    }

    /// Pulls a nearby infeasible point back onto the set by successive
    /// linearized corrections; returns the best point seen.
    pub fn restore(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut x = u.clone();
        self.bbox.clip(&mut x);
        let mut best = x.clone();
        let mut best_r = self.residual(&x);
        for _ in 0..60 {
            if best_r <= 1e-12 {
                break;
            }
            if let Some((a, y)) = &self.equalities {
                if let Ok(p) = affine_parametrize(a, y) {
                    let z = p.coordinates(&x);
                    x = p.map(&z);
                }
            }
            for ineq in &self.inequalities {
                let h = ineq.eval(&x);
                if h > 0.0 {
                    let g = ineq.gradient(&x);
                    let gg = g.norm_squared();
                    if gg > 1e-300 {
                        // small overshoot lands strictly inside
                        x -= &g * ((h * 1.000001 + 1e-14) / gg);
                    }
                }
            }
            self.bbox.clip(&mut x);
            let r = self.residual(&x);
            if r < best_r {
                best_r = r;
                best = x.clone();
            }
        }
        best
    }

    fn find_feasible_point(&self) -> Result<DVector<f64>> {
        let n = self.dim();
        let param = match &self.equalities {
            Some((a, y)) => Some(affine_parametrize(a, y)?),
            None => None,
        };
        let project = |u: DVector<f64>| match &param {
            Some(p) => p.map(&p.coordinates(&u)),
            None => u,
        };
        let center = self.restore(&project(self.bbox.center()));
        if self.contains(&center) {
            return Ok(center);
        }
        let mut halton = ScrambledHalton::new(n, 0x5eed);
        let mut best = center.clone();
        let mut best_r = self.residual(&center);
        for _ in 0..4096 {
            let t = halton.next_point();
            let u = self.restore(&project(self.bbox.from_unit(&t)));
            let r = self.residual(&u);
            if r <= FEASIBILITY_TOL {
                return Ok(u);
            }
            if r < best_r {
                best_r = r;
                best = u;
            }
        }
        let _ = best;
        Err(Error::EmptySet(format!(
            "no feasible point found (smallest residual {best_r:e})"
        )))
    }

    /// The same set expressed in the coordinates `z` of its own equality slice
    /// `u = p + N z`, with `z` a subset of the original coordinates. The new
    /// box comes from interval arithmetic on `z = L(u − p)`; the original box
    /// is kept exactly as halfspaces.
    pub fn parametrized(&self) -> Result<ConstraintSet> {
        let Some((a, y)) = &self.equalities else {
            return Ok(self.clone());
        };
        let param = coordinate_parametrize(a, y)?;
        let k = param.dim();
        if k == 0 {
            // a single point: one pinned coordinate with a zero direction
            let p = param.particular().clone();
            let r = self.residual(&p);
            if r > FEASIBILITY_TOL {
                return Err(Error::EmptySet(format!("the only solution violates the set by {r:e}")));
            }
            let n = self.dim();
            let mut set = ConstraintSet::boxed(BoxDomain::cube(1, 0.0, 0.0)?);
            set.embedding = Some(AffineParametrization {
                particular: p,
                basis: DMatrix::zeros(n, 1),
                left: DMatrix::zeros(1, n),
            });
            return Ok(set);
        }
        let p = param.particular();
        let basis = param.basis();
        let left = param.left_inverse();
        let n = self.dim();
        let mut lo = DVector::zeros(k);
        let mut hi = DVector::zeros(k);
        for j in 0..k {
            for i in 0..n {
                let c = left[(j, i)];
                let e1 = c * (self.bbox.lower()[i] - p[i]);
                let e2 = c * (self.bbox.upper()[i] - p[i]);
                lo[j] += e1.min(e2);
                hi[j] += e1.max(e2);
            }
        }
        let zbox = BoxDomain::new(lo, hi)?;
        let mut ineqs = Vec::new();
        for i in 0..n {
            let row = basis.row(i).transpose();
            if row.norm() <= 1e-14 {
                let v = p[i];
                if v < self.bbox.lower()[i] - FEASIBILITY_TOL || v > self.bbox.upper()[i] + FEASIBILITY_TOL {
                    return Err(Error::EmptySet("slice misses the box".into()));
                }
                continue;
            }
            ineqs.push(Inequality::halfspace(row.clone(), self.bbox.upper()[i] - p[i])?);
            ineqs.push(Inequality::halfspace(-row, p[i] - self.bbox.lower()[i])?);
        }
        for ineq in &self.inequalities {
            ineqs.push(ineq.compose(p, basis)?);
        }
        let mut set = ConstraintSet::new(zbox, ineqs, None)?;
        set.embedding = Some(param);
        Ok(set)
    }

    /// Halfspace description `(a_j, b_j)` of the set when it is a polytope
    /// (box plus halfspaces, no quadratic/custom terms, no equalities).
    pub fn halfspaces(&self) -> Option<Vec<(DVector<f64>, f64)>> {
        if self.equalities.is_some() {
            return None;
        }
        let n = self.dim();
        let mut rows = Vec::new();
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            rows.push((e.clone(), self.bbox.upper()[i]));
            rows.push((-e, -self.bbox.lower()[i]));
        }
        for ineq in &self.inequalities {
            match ineq {
                Inequality::Halfspace { normal, offset } => rows.push((normal.clone(), *offset)),
                _ => return None,
            }
        }
        Some(rows)
    }

    /// Vertices of a polytope set by brute-force intersection of `dim`
    /// facet hyperplanes, filtered by feasibility and deduplicated.
    pub fn polytope_vertices(&self) -> Option<Vec<DVector<f64>>> {
        let rows = self.halfspaces()?;
        let n = self.dim();
        let mut out: Vec<DVector<f64>> = Vec::new();
        let mut idx: Vec<usize> = (0..n).collect();
        if rows.len() < n {
            return Some(out);
        }
        loop {
            let a = DMatrix::from_fn(n, n, |r, c| rows[idx[r]].0[c]);
            let b = DVector::from_fn(n, |r, _| rows[idx[r]].1);
            if let Some(lu) = a.clone().lu().solve(&b) {
                if (a * &lu - &b).amax() < 1e-9
                    && self.residual(&lu) <= 1e-9
                    && !out.iter().any(|v| (v - &lu).amax() < 1e-9)
                {
                    out.push(lu);
                }
            }
            // next combination
            let mut i = n;
            loop {
                if i == 0 {
                    return Some(out);
                }
                i -= 1;
                if idx[i] < rows.len() - n + i {
                    idx[i] += 1;
                    for j in i + 1..n {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
}

/// `feasibility_residual(set, u)`.
pub fn feasibility_residual(set: &ConstraintSet, u: &DVector<f64>) -> Result<f64> {
    if u.len() != set.dim() {
        return Err(Error::DimensionMismatch { expected: set.dim(), got: u.len() });
    }
    Ok(set.residual(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

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

    #[test]
    fn residual_examples() {
        let unit = ConstraintSet::boxed(BoxDomain::cube(1, 0.0, 1.0).unwrap());
        assert_eq!(feasibility_residual(&unit, &dvector![0.5]).unwrap(), 0.0);
        assert_eq!(feasibility_residual(&unit, &dvector![1.5]).unwrap(), 0.5);
        assert_eq!(feasibility_residual(&l1_polytope(), &dvector![0.0, 0.0]).unwrap(), 0.0);
        assert!(feasibility_residual(&unit, &dvector![0.5, 0.5]).is_err());
    }

    #[test]
    fn polytope_vertices_of_l1_example() {
        let mut v = l1_polytope().polytope_vertices().unwrap();
        v.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
        let expect = [(-2.0, -1.0), (-2.0, 0.0), (0.0, 1.0), (2.0, 0.0)];
        assert_eq!(v.len(), 4);
        for (p, e) in v.iter().zip(expect) {
            assert_abs_diff_eq!(p[0], e.0, epsilon = 1e-12);
            assert_abs_diff_eq!(p[1], e.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn parametrize_scalar() {
        let p = affine_parametrize(&DMatrix::from_element(1, 1, 1.0), &dvector![3.0]).unwrap();
        assert_abs_diff_eq!(p.particular()[0], 3.0, epsilon = 1e-14);
        assert_eq!(p.dim(), 0);
    }

    #[test]
    fn parametrize_line() {
        let a = DMatrix::from_row_slice(1, 2, &[2.0, -1.0]);
        let p = affine_parametrize(&a, &dvector![-3.0]).unwrap();
        let pp = p.particular();
        assert_abs_diff_eq!(2.0 * pp[0] - pp[1], -3.0, epsilon = 1e-12);
        assert_eq!(p.dim(), 1);
        let n = p.basis().column(0).into_owned();
        let dir = dvector![1.0, 2.0] / 5f64.sqrt();
        assert_abs_diff_eq!(n.dot(&dir).abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn parametrize_whole_space() {
        let p = affine_parametrize(&DMatrix::zeros(0, 3), &DVector::zeros(0)).unwrap();
        assert_eq!(p.particular(), &DVector::zeros(3));
        assert_eq!(p.basis(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn inconsistent_system() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            affine_parametrize(&a, &dvector![1.0, 2.0]),
            Err(Error::InconsistentSystem(_))
        ));
    }

    #[test]
    fn slice_parametrization_keeps_box_exactly() {
        // line 2x − y = −3 inside |x| ≤ 5, |y| ≤ 10
        let bbox = BoxDomain::from_bounds(&[(-5.0, 5.0), (-10.0, 10.0)]).unwrap();
        let eq = (DMatrix::from_row_slice(1, 2, &[2.0, -1.0]), dvector![-3.0]);
        let set = ConstraintSet::new(bbox, vec![], Some(eq)).unwrap();
        let z = set.parametrized().unwrap();
        assert_eq!(z.dim(), 1);
        let emb = z.embedding().unwrap();
        // endpoints of the feasible segment: (−5, −7) and (3.5, 10)
        for end in [dvector![-5.0, -7.0], dvector![3.5, 10.0]] {
            let zc = emb.coordinates(&end);
            assert!(z.residual(&zc) < 1e-9);
            let out = &zc * 1.01 + (&zc * 0.0).add_scalar(if zc[0] > 0.0 { 1e-3 } else { -1e-3 });
            assert!(z.residual(&out) > 0.0);
        }
    }

    #[test]
    fn empty_set_detected() {
        let bbox = BoxDomain::cube(2, 0.0, 1.0).unwrap();
        let ineqs = vec![Inequality::halfspace(dvector![1.0, 1.0], -1.0).unwrap()];
        assert!(matches!(ConstraintSet::new(bbox, ineqs, None), Err(Error::EmptySet(_))));
    }

    #[test]
    fn restore_pulls_onto_disk_complement() {
        let bbox = BoxDomain::cube(2, 0.0, 1.0).unwrap();
        let set = ConstraintSet::new(
            bbox,
            vec![Inequality::outside_ball(dvector![0.0, 0.0], 1.0 / 3.0)],
            None,
        )
        .unwrap();
        let u = set.restore(&dvector![0.1, 0.1]);
        assert!(set.contains(&u));
    }
}
