//! Finite nets of linear function classes, their L2 geometry, localization and packing.
//!
//! A point `t` in R^d encodes the functional `x -> <x, t>`. The L2 metric of the
//! class is `||u||^2 = <Sigma u, u>`; the learner only sees an oracle matrix `A`
//! that distorts it by at most a factor `eta`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used for deduplication and distinctness checks.
pub const DEDUP_REL_TOL: f64 = 1e-9;

/// Row-major list of points in R^dim.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: data.len() % dim,
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i / dim });
        }
        Ok(PointSet { dim, data })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        PointSet::new(dim, data)
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        PointSet {
            dim,
            data: Vec::with_capacity(dim * n),
        }
    }

    pub fn push(&mut self, p: &[f64]) {
        debug_assert_eq!(p.len(), self.dim);
        self.data.extend_from_slice(p);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(|r| r.to_vec()).collect()
    }

    pub fn select(&self, idx: &[usize]) -> PointSet {
        let mut out = PointSet::with_capacity(self.dim, idx.len());
        for &i in idx {
            out.push(self.row(i));
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], dim: usize, name: &'static str) -> Result<Vec<f64>> {
    if rows.len() != dim {
        return Err(Error::invalid(
            name,
            format!("expected {dim} rows, got {}", rows.len()),
        ));
    }
    let mut m = Vec::with_capacity(dim * dim);
    for r in rows {
        if r.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r.len(),
            });
        }
        m.extend_from_slice(r);
    }
    Ok(m)
}

fn check_symmetric(m: &[f64], dim: usize) -> Result<()> {
    let scale = m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for i in 0..dim {
        for j in 0..i {
            let diff = (m[i * dim + j] - m[j * dim + i]).abs();
            if diff > 1e-10 * scale {
                return Err(Error::NotSymmetric {
                    row: i,
                    col: j,
                    diff,
                });
            }
        }
    }
    Ok(())
}

/// Returns `R` (row-major, dim x dim) with `R^T R = M` for a symmetric PSD `M`.
fn psd_root(m: &[f64], dim: usize) -> Result<Vec<f64>> {
    check_symmetric(m, dim)?;
    let diagonal = (0..dim).all(|i| (0..dim).all(|j| i == j || m[i * dim + j] == 0.0));
    if diagonal {
        let mut root = vec![0.0; dim * dim];
        for i in 0..dim {
            let lam = m[i * dim + i];
            if lam < 0.0 {
                return Err(Error::NotPsd { value: lam });
            }
            root[i * dim + i] = lam.sqrt();
        }
        return Ok(root);
    }
    let mat = DMatrix::from_row_slice(dim, dim, m);
    let sym = (&mat + mat.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let scale = eig
        .eigenvalues
        .iter()
        .fold(1.0f64, |a, v| a.max(v.abs()));
    let mut root = vec![0.0; dim * dim];
    for k in 0..dim {
        let lam = eig.eigenvalues[k];
        if lam < -1e-10 * scale {
            return Err(Error::NotPsd { value: lam });
        }
        let s = lam.max(0.0).sqrt();
        for j in 0..dim {
            root[k * dim + j] = s * eig.eigenvectors[(j, k)];
        }
    }
    Ok(root)
}

fn quad_form(m: &[f64], dim: usize, v: &[f64]) -> f64 {
    let mut q = 0.0;
    for i in 0..dim {
        let mut row = 0.0;
        for j in 0..dim {
            row += m[i * dim + j] * v[j];
        }
        q += v[i] * row;
    }
    q
}

/// Deterministic probe vectors used to check the oracle sandwich.
pub fn probe_vectors(dim: usize) -> Vec<Vec<f64>> {
    let mut probes = Vec::new();
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        probes.push(e);
    }
    for i in 0..dim {
        for j in (i + 1)..dim.min(i + 4) {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            e[j] = -1.0;
            probes.push(e.clone());
            e[j] = 1.0;
            probes.push(e);
        }
    }
    let mut state = 0x2545_F491_4F6C_DD1Du64;
    for _ in 0..32 {
        let v: Vec<f64> = (0..dim)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        probes.push(v);
    }
    probes
}

/// Ground-truth covariance of X and the learner-visible oracle matrix.
#[derive(Clone, Debug)]
pub struct CovarianceStructure {
    dim: usize,
    sigma_true: Vec<f64>,
    sigma_oracle: Vec<f64>,
    eta: f64,
    true_root: Vec<f64>,
    oracle_root: Vec<f64>,
}

impl CovarianceStructure {
    /// Both matrices are row-major `dim x dim`.
    pub fn new(dim: usize, sigma_true: Vec<f64>, sigma_oracle: Vec<f64>, eta: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        for (name, m) in [("sigma_true", &sigma_true), ("sigma_oracle", &sigma_oracle)] {
            if m.len() != dim * dim {
                return Err(Error::invalid(name, format!("expected {} entries", dim * dim)));
            }
            if let Some(i) = m.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index: i });
            }
        }
        if !(eta >= 1.0) {
            return Err(Error::invalid("eta", format!("{eta} < 1")));
        }
        let true_root = psd_root(&sigma_true, dim)?;
        let oracle_root = psd_root(&sigma_oracle, dim)?;
        let cov = CovarianceStructure {
            dim,
            sigma_true,
            sigma_oracle,
            eta,
            true_root,
            oracle_root,
        };
        cov.check_sandwich()?;
        Ok(cov)
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = 1.0;
        }
        CovarianceStructure::new(dim, m.clone(), m, 1.0).expect("identity is valid")
    }

    /// Oracle equal to the true covariance (eta = 1).
    pub fn exact(dim: usize, sigma: Vec<f64>) -> Result<Self> {
        CovarianceStructure::new(dim, sigma.clone(), sigma, 1.0)
    }

    /// Builds `A = S^{1/2} B S^{1/2}` with `B` having eigenvalues drawn from
    /// `[eta^-2, eta^2]` in a random orthonormal basis, so the sandwich holds exactly.
    pub fn with_random_oracle<R: rand::Rng + ?Sized>(
        dim: usize,
        sigma: Vec<f64>,
        eta: f64,
        rng: &mut R,
    ) -> Result<Self> {
        use rand_distr::{Distribution, StandardNormal};
        if !(eta >= 1.0) {
            return Err(Error::invalid("eta", format!("{eta} < 1")));
        }
        check_symmetric(&sigma, dim)?;
        let s = DMatrix::from_row_slice(dim, dim, &sigma);
        let eig = SymmetricEigen::new(s);
        let mut half = DMatrix::<f64>::zeros(dim, dim);
        for k in 0..dim {
            let v = eig.eigenvectors.column(k);
            half += v * v.transpose() * eig.eigenvalues[k].max(0.0).sqrt();
        }
        let g = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
        let q = g.qr().q();
        let lo = -2.0 * eta.ln();
        let hi = 2.0 * eta.ln();
        let lams: Vec<f64> = (0..dim)
            .map(|_| (lo + (hi - lo) * rng.random::<f64>()).exp())
            .collect();
        let b = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lams)) * q.transpose();
        let a = &half * b * &half;
        let a = (&a + a.transpose()) * 0.5;
        let mut oracle = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                oracle[i * dim + j] = a[(i, j)];
            }
        }
        CovarianceStructure::new(dim, sigma, oracle, eta)
    }

    fn check_sandwich(&self) -> Result<()> {
        let e2 = self.eta * self.eta;
        for (k, u) in probe_vectors(self.dim).iter().enumerate() {
            let qt = quad_form(&self.sigma_true, self.dim, u);
            let qa = quad_form(&self.sigma_oracle, self.dim, u);
            let slack = 1e-9 * (qt.abs() + qa.abs()) + 1e-12;
            if qa < qt / e2 - slack || qa > qt * e2 + slack {
                return Err(Error::SandwichViolated {
                    eta: self.eta,
                    probe: k,
                });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn sigma_true(&self) -> &[f64] {
        &self.sigma_true
    }

    pub fn sigma_oracle(&self) -> &[f64] {
        &self.sigma_oracle
    }

    pub fn matrix(&self, kind: MetricKind) -> &[f64] {
        match kind {
            MetricKind::True => &self.sigma_true,
            MetricKind::Oracle => &self.sigma_oracle,
        }
    }

    /// `R` with `R^T R = M`; `x -> R x` maps the metric to the Euclidean one.
    pub fn root(&self, kind: MetricKind) -> &[f64] {
        match kind {
            MetricKind::True => &self.true_root,
            MetricKind::Oracle => &self.oracle_root,
        }
    }

    pub fn quadratic(&self, kind: MetricKind, v: &[f64]) -> f64 {
        quad_form(self.matrix(kind), self.dim, v)
    }

    /// Maps standard normal coordinates `z` to `X = R^T z`, which has covariance Sigma.
    pub fn color(&self, z: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.iter_mut().for_each(|o| *o = 0.0);
        for k in 0..d {
            let zk = z[k];
            if zk == 0.0 {
                continue;
            }
            let row = &self.true_root[k * d..(k + 1) * d];
            for j in 0..d {
                out[j] += row[j] * zk;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// The learner-visible matrix A.
    Oracle,
    /// The ground-truth covariance Sigma_X.
    True,
}

/// `sqrt(<M(u - v), u - v>)` with `M = A` or `M = Sigma_X`.
pub fn l2_distance(u: &[f64], v: &[f64], cov: &CovarianceStructure, kind: MetricKind) -> Result<f64> {
    let d = cov.dim();
    for len in [u.len(), v.len()] {
        if len != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: len,
            });
        }
    }
    let diff = sub(u, v);
    let q = cov.quadratic(kind, &diff);
    let scale = dot(&diff, &diff) * cov.matrix(kind).iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if q < -1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd { value: q });
    }
    Ok(q.max(0.0).sqrt())
}

#[derive(Clone, Debug)]
pub struct DistanceOracle {
    cov: Arc<CovarianceStructure>,
    kind: MetricKind,
}

impl DistanceOracle {
    pub fn new(cov: Arc<CovarianceStructure>, kind: MetricKind) -> Self {
        DistanceOracle { cov, kind }
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn covariance(&self) -> &Arc<CovarianceStructure> {
        &self.cov
    }

    pub fn distance(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        l2_distance(u, v, &self.cov, self.kind)
    }

    pub fn norm(&self, u: &[f64]) -> f64 {
        self.cov.quadratic(self.kind, u).max(0.0).sqrt()
    }

    pub fn embed_point(&self, p: &[f64], out: &mut [f64]) {
        let d = self.cov.dim();
        let root = self.cov.root(self.kind);
        for (k, o) in out.iter_mut().enumerate() {
            *o = dot(&root[k * d..(k + 1) * d], p);
        }
    }

    /// Coordinates in which this metric is Euclidean.
    pub fn embed(&self, points: &PointSet) -> PointSet {
        let d = points.dim();
        let mut out = PointSet::with_capacity(d, points.len());
        let mut buf = vec![0.0; d];
        for p in points.rows() {
            self.embed_point(p, &mut buf);
            out.push(&buf);
        }
        out
    }
}

/// Returns, for each point, the index of the first point (by index) within `tol` of it.
/// Points mapped to themselves are the kept representatives.
pub(crate) fn dedup_representatives(embedded: &PointSet, tol: f64) -> Vec<usize> {
    let n = embedded.len();
    let d = embedded.dim();
    // Projection on a fixed generic direction; near-duplicates have near-equal projections.
    let dir: Vec<f64> = (0..d)
        .map(|k| 1.0 + 0.618_033_988_749_895 * ((k as f64 + 1.0) * 0.754_877_666).fract())
        .collect();
    let dn = dot(&dir, &dir).sqrt();
    let proj: Vec<f64> = embedded.rows().map(|r| dot(r, &dir) / dn).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));
    let mut pos = vec![0usize; n];
    for (p, &i) in order.iter().enumerate() {
        pos[i] = p;
    }
    let tol2 = tol * tol;
    let mut rep: Vec<usize> = (0..n).collect();
    for i in 0..n {
        let pi = proj[i];
        let mut best = i;
        let mut check = |j: usize| {
            if j < i && rep[j] == j && dist2(embedded.row(i), embedded.row(j)) <= tol2 && j < best {
                best = j;
            }
        };
        let mut p = pos[i];
        while p > 0 {
            p -= 1;
            let j = order[p];
            if pi - proj[j] > tol {
                break;
            }
            check(j);
        }
        for &j in &order[pos[i] + 1..] {
            if proj[j] - pi > tol {
                break;
            }
            check(j);
        }
        rep[i] = best;
    }
    rep
}

fn exact_diameter(embedded: &PointSet) -> f64 {
    let n = embedded.len();
    let mut best = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            best = best.max(dist2(embedded.row(i), embedded.row(j)));
        }
    }
    best.sqrt()
}

/// Finite net of linear functionals with its covariance structure.
#[derive(Clone, Debug)]
pub struct FunctionClass {
    points: PointSet,
    labels: Vec<usize>,
    covariance: Arc<CovarianceStructure>,
    contains_zero: bool,
    diameter: f64,
    tolerance: f64,
    embedded: PointSet,
}

impl FunctionClass {
    /// Validates distinctness under the true L2 metric at `1e-9 * d_F`.
    pub fn new(points: PointSet, covariance: Arc<CovarianceStructure>) -> Result<Self> {
        Self::build(points, covariance, false)
    }

    /// Like [`FunctionClass::new`] but silently keeps the first of each group of duplicates.
    pub fn new_dedup(points: PointSet, covariance: Arc<CovarianceStructure>) -> Result<Self> {
        Self::build(points, covariance, true)
    }

    fn build(points: PointSet, covariance: Arc<CovarianceStructure>, dedup: bool) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("function class"));
        }
        if points.dim() != covariance.dim() {
            return Err(Error::DimensionMismatch {
                expected: covariance.dim(),
                got: points.dim(),
            });
        }
        let oracle = DistanceOracle::new(covariance.clone(), MetricKind::True);
        let embedded = oracle.embed(&points);
        let diameter = exact_diameter(&embedded);
        Self::assemble(points, embedded, covariance, diameter, dedup)
    }

    fn assemble(
        points: PointSet,
        embedded: PointSet,
        covariance: Arc<CovarianceStructure>,
        diameter: f64,
        dedup: bool,
    ) -> Result<Self> {
        let tolerance = DEDUP_REL_TOL * diameter.max(f64::MIN_POSITIVE);
        let rep = dedup_representatives(&embedded, tolerance);
        let (points, embedded) = if let Some(i) = (0..rep.len()).find(|&i| rep[i] != i) {
            if !dedup {
                return Err(Error::DuplicatePoints {
                    first: rep[i],
                    second: i,
                });
            }
            let keep: Vec<usize> = (0..rep.len()).filter(|&i| rep[i] == i).collect();
            (points.select(&keep), embedded.select(&keep))
        } else {
            (points, embedded)
        };
        let contains_zero = embedded.rows().any(|r| dot(r, r).sqrt() <= tolerance);
        let labels = (0..points.len()).collect();
        Ok(FunctionClass {
            points,
            labels,
            covariance,
            contains_zero,
            diameter,
            tolerance,
            embedded,
        })
    }

    /// Builds a net of the l1 unit ball in R^dim with `count` points: the origin,
    /// the vertices +-e_j, then farthest-point picks (true metric) from a lattice.
    pub fn l1_ball_net(dim: usize, count: usize, covariance: Arc<CovarianceStructure>) -> Result<Self> {
        if count < 2 * dim + 1 {
            return Err(Error::invalid(
                "points",
                format!("need at least {} points for dim {dim}", 2 * dim + 1),
            ));
        }
        let mut m = 1usize;
        let mut cand = lattice_l1(dim, m);
        while cand.len() < 4 * count && m < 64 {
            m += 1;
            cand = lattice_l1(dim, m);
        }
        let cands = PointSet::new(dim, cand.concat())?;
        let oracle = DistanceOracle::new(covariance.clone(), MetricKind::True);
        let emb = oracle.embed(&cands);
        let mut seed_idx = Vec::new();
        let find = |target: &[f64]| {
            (0..cands.len())
                .find(|&i| cands.row(i).iter().zip(target).all(|(a, b)| (a - b).abs() < 1e-12))
                .expect("lattice contains vertices")
        };
        seed_idx.push(find(&vec![0.0; dim]));
        for j in 0..dim {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; dim];
                e[j] = s;
                seed_idx.push(find(&e));
            }
        }
        let chosen = farthest_point_extend(&emb, &seed_idx, count);
        FunctionClass::new(cands.select(&chosen), covariance)
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn covariance(&self) -> &Arc<CovarianceStructure> {
        &self.covariance
    }

    pub fn contains_zero(&self) -> bool {
        self.contains_zero
    }

    /// d_F, the diameter under the true L2 metric.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Points mapped so that the true L2 metric is Euclidean.
    pub fn embedded(&self) -> &PointSet {
        &self.embedded
    }

    pub fn oracle(&self, kind: MetricKind) -> DistanceOracle {
        DistanceOracle::new(self.covariance.clone(), kind)
    }

    pub fn true_norm(&self, i: usize) -> f64 {
        let e = self.embedded.row(i);
        dot(e, e).sqrt()
    }

    pub fn index_of_zero(&self) -> Option<usize> {
        (0..self.len()).find(|&i| self.true_norm(i) <= self.tolerance)
    }
}

fn lattice_l1(dim: usize, m: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut cur = vec![0i64; dim];
    fn rec(k: usize, left: i64, cur: &mut Vec<i64>, m: usize, out: &mut Vec<Vec<f64>>) {
        if k == cur.len() {
            out.push(cur.iter().map(|&c| c as f64 / m as f64).collect());
            return;
        }
        for c in -left..=left {
            cur[k] = c;
            rec(k + 1, left - c.abs(), cur, m, out);
        }
        cur[k] = 0;
    }
    rec(0, m as i64, &mut cur, m, &mut out);
    out
}

/// Extends `seeds` by farthest-point traversal until `count` indices (ties: smallest index).
pub(crate) fn farthest_point_extend(emb: &PointSet, seeds: &[usize], count: usize) -> Vec<usize> {
    let n = emb.len();
    let count = count.min(n);
    let mut chosen: Vec<usize> = seeds.to_vec();
    let mut mind = vec![f64::INFINITY; n];
    for &s in seeds {
        for i in 0..n {
            mind[i] = mind[i].min(dist2(emb.row(i), emb.row(s)));
        }
    }
    while chosen.len() < count {
        let mut best = usize::MAX;
        let mut bd = -1.0;
        for i in 0..n {
            if mind[i] > bd {
                bd = mind[i];
                best = i;
            }
        }
        if bd <= 0.0 {
            break;
        }
        chosen.push(best);
        for i in 0..n {
            mind[i] = mind[i].min(dist2(emb.row(i), emb.row(best)));
        }
    }
    chosen
}

/// F - F with duplicates removed; centrally symmetric and containing 0 (at label 0).
pub fn difference_class(f: &FunctionClass) -> Result<FunctionClass> {
    let n = f.len();
    let d = f.dim();
    let mut pts = PointSet::with_capacity(d, n * n);
    let mut emb = PointSet::with_capacity(d, n * n);
    pts.push(&vec![0.0; d]);
    emb.push(&vec![0.0; d]);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                pts.push(&sub(f.point(i), f.point(j)));
                emb.push(&sub(f.embedded.row(i), f.embedded.row(j)));
            }
        }
    }
    FunctionClass::assemble(pts, emb, f.covariance.clone(), 2.0 * f.diameter, true)
}

/// (F - F) intersected with the ball rD, plus scaled copies and boundary projections.
#[derive(Clone, Debug)]
pub struct LocalizedSet {
    pub radius: f64,
    pub grid_depth: u32,
    pub members: PointSet,
    /// Norm of each member under the localizing metric.
    pub norms: Vec<f64>,
    /// Index in the parent of the element each member was derived from.
    pub source: Vec<usize>,
    /// Scale applied to the (possibly projected) parent element.
    pub scale: Vec<f64>,
    /// Whether the member derives from a boundary projection.
    pub projected: Vec<bool>,
}

impl LocalizedSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// R_H, the largest member norm.
    pub fn max_norm(&self) -> f64 {
        self.norms.iter().cloned().fold(0.0, f64::max)
    }
}

/// Members are `lambda * u` for `u` in H with `||lambda u|| <= r`, together with
/// `lambda * r u / ||u||` for `||u|| > r`, over `lambda` in `{1, 1/2, ..., 2^-grid_depth}`.
/// Norms are taken under `metric`. The zero vector, if present, is member 0.
pub fn localize(h: &FunctionClass, r: f64, grid_depth: u32, metric: &DistanceOracle) -> Result<LocalizedSet> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid("r", format!("{r} must be positive")));
    }
    let d = h.dim();
    let emb = metric.embed(h.points());
    let lambdas: Vec<f64> = (0..=grid_depth).map(|j| 0.5f64.powi(j as i32)).collect();
    let mut members = PointSet::with_capacity(d, h.len() * lambdas.len());
    let mut memb = PointSet::with_capacity(d, h.len() * lambdas.len());
    let mut source = Vec::new();
    let mut scale = Vec::new();
    let mut projected = Vec::new();
    let mut push = |p: &[f64], e: &[f64], src: usize, s: f64, proj: bool| {
        members.push(p);
        memb.push(e);
        source.push(src);
        scale.push(s);
        projected.push(proj);
    };
    let mut order: Vec<usize> = (0..h.len()).collect();
    let norm_of = |i: usize| dot(emb.row(i), emb.row(i)).sqrt();
    order.sort_by(|&a, &b| (norm_of(a) > 0.0).cmp(&(norm_of(b) > 0.0)).then(a.cmp(&b)));
    for &i in &order {
        let u = h.point(i);
        let e = emb.row(i);
        let nu = norm_of(i);
        for &lam in &lambdas {
            if lam * nu <= r {
                let p: Vec<f64> = u.iter().map(|x| lam * x).collect();
                let pe: Vec<f64> = e.iter().map(|x| lam * x).collect();
                push(&p, &pe, i, lam, false);
            }
        }
        if nu > r {
            let c = r / nu;
            for &lam in &lambdas {
                let p: Vec<f64> = u.iter().map(|x| lam * c * x).collect();
                let pe: Vec<f64> = e.iter().map(|x| lam * c * x).collect();
                push(&p, &pe, i, lam * c, true);
            }
        }
    }
    let tol = DEDUP_REL_TOL * r;
    let rep = dedup_representatives(&memb, tol);
    let keep: Vec<usize> = (0..rep.len()).filter(|&i| rep[i] == i).collect();
    let norms = keep
        .iter()
        .map(|&i| dot(memb.row(i), memb.row(i)).sqrt())
        .collect();
    Ok(LocalizedSet {
        radius: r,
        grid_depth,
        members: members.select(&keep),
        norms,
        source: keep.iter().map(|&i| source[i]).collect(),
        scale: keep.iter().map(|&i| scale[i]).collect(),
        projected: keep.iter().map(|&i| projected[i]).collect(),
    })
}

/// Greedy maximal packing and the induced nearest-center partition.
#[derive(Clone, Debug, PartialEq)]
pub struct Packing {
    /// Point indices of the centers, in selection order (increasing index).
    pub centers: Vec<usize>,
    /// For each point, the position in `centers` of its cell.
    pub assignment: Vec<usize>,
}

impl Packing {
    pub fn count(&self) -> usize {
        self.centers.len()
    }

    pub fn center_of(&self, i: usize) -> usize {
        self.centers[self.assignment[i]]
    }

    pub fn cells(&self) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.centers.len()];
        for (i, &c) in self.assignment.iter().enumerate() {
            cells[c].push(i);
        }
        cells
    }
}

/// Packing in coordinates where the metric is Euclidean.
pub fn pack_embedded(emb: &PointSet, sep: f64) -> Result<Packing> {
    if emb.is_empty() {
        return Err(Error::Empty("packing input"));
    }
    if !(sep > 0.0) {
        return Err(Error::invalid("sep", format!("{sep} must be positive")));
    }
    let sep2 = sep * sep;
    let mut centers: Vec<usize> = Vec::new();
    for i in 0..emb.len() {
        let p = emb.row(i);
        if centers.iter().all(|&c| dist2(p, emb.row(c)) >= sep2) {
            centers.push(i);
        }
    }
    let assignment = (0..emb.len())
        .map(|i| nearest(emb, emb.row(i), &centers))
        .collect();
    Ok(Packing { centers, assignment })
}

/// Position in `centers` of the nearest center to `p` (ties: earliest).
pub(crate) fn nearest(emb: &PointSet, p: &[f64], centers: &[usize]) -> usize {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (k, &c) in centers.iter().enumerate() {
        let dd = dist2(p, emb.row(c));
        if dd < bd {
            bd = dd;
            best = k;
        }
    }
    best
}

pub fn greedy_packing(points: &FunctionClass, sep: f64, metric: &DistanceOracle) -> Result<Packing> {
    if points.dim() != metric.covariance().dim() {
        return Err(Error::DimensionMismatch {
            expected: metric.covariance().dim(),
            got: points.dim(),
        });
    }
    pack_embedded(&metric.embed(points.points()), sep)
}

/// On-disk description of a class.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassFile {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub sigma_true: Vec<Vec<f64>>,
    pub sigma_oracle: Vec<Vec<f64>>,
    pub eta: f64,
}

impl ClassFile {
    pub fn into_class(self) -> Result<FunctionClass> {
        let st = matrix_from_rows(&self.sigma_true, self.dim, "sigma_true")?;
        let so = matrix_from_rows(&self.sigma_oracle, self.dim, "sigma_oracle")?;
        let cov = Arc::new(CovarianceStructure::new(self.dim, st, so, self.eta)?);
        FunctionClass::new(PointSet::from_rows(self.dim, &self.points)?, cov)
    }

    pub fn from_class(f: &FunctionClass) -> Self {
        let d = f.dim();
        let rows = |m: &[f64]| m.chunks_exact(d).map(|r| r.to_vec()).collect();
        ClassFile {
            dim: d,
            points: f.points().to_rows(),
            sigma_true: rows(f.covariance().sigma_true()),
            sigma_oracle: rows(f.covariance().sigma_oracle()),
            eta: f.covariance().eta(),
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })
    }
}
