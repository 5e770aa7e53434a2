//! Chained product and multiplier estimators over an admissible sequence.
//!
//! Every estimate telescopes `pi_{s0}` plus the increments up to `pi_{s1}`, each term
//! estimated by `psi_delta` at `delta_s = 2 exp(-alpha 2^s)`. For median-of-means the
//! block means are formed from per-block second moments (products) or per-block
//! multiplier-weighted means (multipliers), which gives the same block means as the
//! sample route at a fraction of the cost.

use std::sync::Arc;

use crate::chaining::admissible::{build_on_embedded, AdmissibleSequence};
use crate::error::{Error, Result};
use crate::function_class::{dot, DistanceOracle, LocalizedSet, PointSet};
use crate::mean_estimators::{block_bounds, blocks_for_log, median_in_place, psi_log, EstimatorKind, EstimatorSpec};

/// Level cutoffs `s0 < s1` and the block count of every level in use.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainLevels {
    pub alpha: f64,
    pub s0: usize,
    pub s1: usize,
    pub n: usize,
    blocks: Vec<usize>,
}

impl ChainLevels {
    /// Largest `s >= 1` with `alpha 2^s <= c0 n`.
    pub fn top_level(alpha: f64, n: usize, c0: f64) -> Result<usize> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid("alpha", format!("{alpha} must be positive")));
        }
        let cap = c0 * n as f64 * (1.0 + 1e-12);
        if 2.0 * alpha > cap {
            return Err(Error::NoAdmissibleLevel { alpha, n });
        }
        let mut s = 1usize;
        while alpha * 2f64.powi(s as i32 + 1) <= cap {
            s += 1;
        }
        Ok(s)
    }

    pub fn new(alpha: f64, s0: usize, s1: usize, n: usize, spec: &EstimatorSpec) -> Result<Self> {
        spec.validate()?;
        let top = Self::top_level(alpha, n, spec.c0)?;
        if s0 >= s1 {
            return Err(Error::invalid("s0", format!("s0 = {s0} must be below s1 = {s1}")));
        }
        if s1 > top {
            return Err(Error::invalid(
                "s1",
                format!("alpha 2^s1 = {} exceeds c0 N = {}", alpha * 2f64.powi(s1 as i32), spec.c0 * n as f64),
            ));
        }
        let blocks = (0..s1)
            .map(|s| blocks_for_log(alpha * 2f64.powi(s as i32), spec.min_block))
            .collect();
        Ok(ChainLevels {
            alpha,
            s0,
            s1,
            n,
            blocks,
        })
    }

    /// `s0` is clipped below the top level; `s1` is the top level, but no higher than
    /// needed to reach the saturation level of the sequence (increments vanish there).
    pub fn plan(alpha: f64, s0_target: usize, n: usize, saturation: usize, spec: &EstimatorSpec) -> Result<Self> {
        let top = Self::top_level(alpha, n, spec.c0)?;
        let s0 = s0_target.min(top - 1);
        let s1 = top.min(saturation.max(s0 + 1));
        Self::new(alpha, s0, s1, n, spec)
    }

    /// `ln(2 / delta_s) = alpha 2^s`.
    pub fn log_term(&self, s: usize) -> f64 {
        self.alpha * 2f64.powi(s as i32)
    }

    pub fn blocks(&self, s: usize) -> usize {
        self.blocks[s]
    }
}

/// A finite carrier with its admissible sequence (built under the learner's metric).
#[derive(Clone, Debug)]
pub struct ChainCarrier {
    points: PointSet,
    seq: AdmissibleSequence,
}

impl ChainCarrier {
    pub fn new(points: PointSet, metric: &DistanceOracle) -> Self {
        let seq = build_on_embedded(&metric.embed(&points), None);
        ChainCarrier { points, seq }
    }

    pub fn with_sequence(points: PointSet, seq: AdmissibleSequence) -> Result<Self> {
        if seq.carrier_len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: seq.carrier_len(),
            });
        }
        Ok(ChainCarrier { points, seq })
    }

    pub fn from_localized(h: &LocalizedSet, metric: &DistanceOracle) -> Self {
        Self::new(h.members.clone(), metric)
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn sequence(&self) -> &AdmissibleSequence {
        &self.seq
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the carrier point within `tol` (Euclidean, raw coordinates) of `u`.
    pub fn locate(&self, u: &[f64], tol: f64) -> Option<usize> {
        let t2 = tol * tol;
        (0..self.len()).find(|&i| crate::function_class::dist2(self.points.row(i), u) <= t2)
    }
}

fn check_design(x: &[f64], dim: usize) -> Result<usize> {
    if dim == 0 || x.len() % dim != 0 {
        return Err(Error::invalid("design", format!("{} values is not a multiple of {dim}", x.len())));
    }
    let n = x.len() / dim;
    if n == 0 {
        return Err(Error::Empty("design"));
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(n)
}

fn tri_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// `p^T M q` from the upper triangle of a symmetric `M`; exactly symmetric in `(p, q)`.
#[inline]
fn bilinear(tri: &[f64], p: &[f64], q: &[f64]) -> f64 {
    let d = p.len();
    let mut acc = 0.0;
    let mut t = 0;
    for i in 0..d {
        acc += tri[t] * (p[i] * q[i]);
        t += 1;
        for j in i + 1..d {
            acc += tri[t] * (p[i] * q[j] + p[j] * q[i]);
            t += 1;
        }
    }
    acc
}

/// Per-block means of `x x^T` (upper triangles), for `k` contiguous blocks.
fn block_second_moments(x: &[f64], dim: usize, k: usize) -> Vec<f64> {
    let n = x.len() / dim;
    let tl = tri_len(dim);
    let mut out = vec![0.0; k * tl];
    for (b, w) in block_bounds(n, k).windows(2).enumerate() {
        let m = &mut out[b * tl..(b + 1) * tl];
        for i in w[0]..w[1] {
            let row = &x[i * dim..(i + 1) * dim];
            let mut t = 0;
            for a in 0..dim {
                for c in a..dim {
                    m[t] += row[a] * row[c];
                    t += 1;
                }
            }
        }
        let len = (w[1] - w[0]) as f64;
        m.iter_mut().for_each(|v| *v /= len);
    }
    out
}

/// `Psi_Q`: chained estimates of `E f h` for `f` in the left carrier and `h` in the right.
#[derive(Clone, Debug)]
pub struct ProductEstimator {
    levels: ChainLevels,
    spec: EstimatorSpec,
    left: Arc<ChainCarrier>,
    right: Arc<ChainCarrier>,
    dim: usize,
    x: Vec<f64>,
    /// `moments[s]`: per-block upper triangles for levels `s0..s1` (median-of-means only).
    moments: Vec<Vec<f64>>,
}

impl ProductEstimator {
    pub fn new(
        levels: ChainLevels,
        spec: EstimatorSpec,
        left: Arc<ChainCarrier>,
        right: Arc<ChainCarrier>,
        x: &[f64],
        dim: usize,
    ) -> Result<Self> {
        let n = check_design(x, dim)?;
        if n != levels.n {
            return Err(Error::DimensionMismatch {
                expected: levels.n,
                got: n,
            });
        }
        for c in [&left, &right] {
            if c.points.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.points.dim(),
                });
            }
        }
        let moments = match spec.kind {
            EstimatorKind::MedianOfMeans => (0..levels.s1)
                .map(|s| {
                    if s >= levels.s0 {
                        block_second_moments(x, dim, levels.blocks(s))
                    } else {
                        Vec::new()
                    }
                })
                .collect(),
            EstimatorKind::TrimmedMean => Vec::new(),
        };
        Ok(ProductEstimator {
            levels,
            spec,
            left,
            right,
            dim,
            x: x.to_vec(),
            moments,
        })
    }

    /// Same carrier on both sides.
    pub fn symmetric(levels: ChainLevels, spec: EstimatorSpec, carrier: Arc<ChainCarrier>, x: &[f64], dim: usize) -> Result<Self> {
        Self::new(levels, spec, carrier.clone(), carrier, x, dim)
    }

    pub fn levels(&self) -> &ChainLevels {
        &self.levels
    }

    pub fn left(&self) -> &Arc<ChainCarrier> {
        &self.left
    }

    pub fn right(&self) -> &Arc<ChainCarrier> {
        &self.right
    }

    /// `(pi_{s} a, pi_{s} b)` pairs; entry 0 is level `s0`, entry `k` is level `s0 + k`.
    fn path(&self, a: usize, b: usize) -> Vec<(usize, usize)> {
        (self.levels.s0..=self.levels.s1)
            .map(|s| (self.left.seq.project(s, a), self.right.seq.project(s, b)))
            .collect()
    }

    /// `Psi_Q(a, b)` for carrier indices `a` (left) and `b` (right).
    pub fn estimate(&self, a: usize, b: usize) -> Result<f64> {
        if self.moments.is_empty() {
            return self.estimate_direct(a, b);
        }
        let path = self.path(a, b);
        let lp = &self.left.points;
        let rp = &self.right.points;
        let tl = tri_len(self.dim);
        let mut buf = Vec::new();
        let s0 = self.levels.s0;
        let mut total = 0.0;
        let (p0, q0) = path[0];
        if !is_zero(lp.row(p0)) && !is_zero(rp.row(q0)) {
            buf.clear();
            buf.extend(self.moments[s0].chunks_exact(tl).map(|m| bilinear(m, lp.row(p0), rp.row(q0))));
            total += median_in_place(&mut buf);
        }
        for (k, w) in path.windows(2).enumerate() {
            let ((a0, b0), (a1, b1)) = (w[0], w[1]);
            if a0 == a1 && b0 == b1 {
                continue;
            }
            let s = s0 + k;
            buf.clear();
            buf.extend(self.moments[s].chunks_exact(tl).map(|m| {
                bilinear(m, lp.row(a1), rp.row(b1)) - bilinear(m, lp.row(a0), rp.row(b0))
            }));
            total += median_in_place(&mut buf);
        }
        Ok(total)
    }

    /// The same estimate computed from the per-sample values.
    pub fn estimate_direct(&self, a: usize, b: usize) -> Result<f64> {
        let path = self.path(a, b);
        let lp = &self.left.points;
        let rp = &self.right.points;
        let d = self.dim;
        let n = self.levels.n;
        let s0 = self.levels.s0;
        let mut vals = vec![0.0; n];
        let (p0, q0) = path[0];
        for (i, v) in vals.iter_mut().enumerate() {
            let row = &self.x[i * d..(i + 1) * d];
            *v = dot(row, lp.row(p0)) * dot(row, rp.row(q0));
        }
        let mut total = psi_log(&vals, self.levels.log_term(s0), &self.spec)?;
        for (k, w) in path.windows(2).enumerate() {
            let ((a0, b0), (a1, b1)) = (w[0], w[1]);
            if a0 == a1 && b0 == b1 {
                continue;
            }
            for (i, v) in vals.iter_mut().enumerate() {
                let row = &self.x[i * d..(i + 1) * d];
                *v = dot(row, lp.row(a1)) * dot(row, rp.row(b1)) - dot(row, lp.row(a0)) * dot(row, rp.row(b0));
            }
            total += psi_log(&vals, self.levels.log_term(s0 + k), &self.spec)?;
        }
        Ok(total)
    }
}

fn is_zero(p: &[f64]) -> bool {
    p.iter().all(|&v| v == 0.0)
}

/// `Phi_M`: chained estimates of `E xi_j h` for `h` in the carrier and a finite family
/// of multipliers given by their sample values.
#[derive(Clone, Debug)]
pub struct MultiplierEstimator {
    levels: ChainLevels,
    spec: EstimatorSpec,
    carrier: Arc<ChainCarrier>,
    dim: usize,
    x: Vec<f64>,
    xi: Vec<Vec<f64>>,
    /// `weighted[s]`: layout `[block][multiplier][coordinate]`, block means of `xi_j X`.
    weighted: Vec<Vec<f64>>,
}

impl MultiplierEstimator {
    pub fn new(
        levels: ChainLevels,
        spec: EstimatorSpec,
        carrier: Arc<ChainCarrier>,
        x: &[f64],
        dim: usize,
        xi: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = check_design(x, dim)?;
        if n != levels.n {
            return Err(Error::DimensionMismatch {
                expected: levels.n,
                got: n,
            });
        }
        let budget = 2.0 * 2f64.powi(levels.s0 as i32 - 1).exp();
        if xi.len() as f64 > budget {
            return Err(Error::EntropyCondition {
                what: "multiplier family",
                count: xi.len(),
                log_count: (xi.len() as f64).ln(),
                budget: budget.ln(),
            });
        }
        for m in &xi {
            if m.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: m.len(),
                });
            }
            if let Some(index) = m.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index });
            }
        }
        let weighted = match spec.kind {
            EstimatorKind::MedianOfMeans => (0..levels.s1)
                .map(|s| {
                    if s < levels.s0 {
                        return Vec::new();
                    }
                    let k = levels.blocks(s);
                    let nm = xi.len();
                    let mut out = vec![0.0; k * nm * dim];
                    for (b, w) in block_bounds(n, k).windows(2).enumerate() {
                        let len = (w[1] - w[0]) as f64;
                        for (j, m) in xi.iter().enumerate() {
                            let g = &mut out[(b * nm + j) * dim..(b * nm + j + 1) * dim];
                            for i in w[0]..w[1] {
                                let row = &x[i * dim..(i + 1) * dim];
                                for c in 0..dim {
                                    g[c] += m[i] * row[c];
                                }
                            }
                            g.iter_mut().for_each(|v| *v /= len);
                        }
                    }
                    out
                })
                .collect(),
            EstimatorKind::TrimmedMean => Vec::new(),
        };
        Ok(MultiplierEstimator {
            levels,
            spec,
            carrier,
            dim,
            x: x.to_vec(),
            xi,
            weighted,
        })
    }

    pub fn multiplier_count(&self) -> usize {
        self.xi.len()
    }

    pub fn levels(&self) -> &ChainLevels {
        &self.levels
    }

    fn path(&self, h: usize) -> Vec<usize> {
        (self.levels.s0..=self.levels.s1)
            .map(|s| self.carrier.seq.project(s, h))
            .collect()
    }

    /// `Phi_M(h, xi_j)` for carrier index `h`.
    pub fn estimate(&self, h: usize, j: usize) -> Result<f64> {
        if j >= self.xi.len() {
            return Err(Error::invalid("multiplier", format!("index {j} out of range")));
        }
        if self.weighted.is_empty() {
            return self.estimate_direct(h, j);
        }
        let path = self.path(h);
        let pts = &self.carrier.points;
        let d = self.dim;
        let nm = self.xi.len();
        let s0 = self.levels.s0;
        let mut buf = Vec::new();
        let mut total = 0.0;
        let p0 = pts.row(path[0]);
        if !is_zero(p0) {
            buf.extend(
                self.weighted[s0]
                    .chunks_exact(nm * d)
                    .map(|blk| dot(&blk[j * d..(j + 1) * d], p0)),
            );
            total += median_in_place(&mut buf);
        }
        let mut delta = vec![0.0; d];
        for (k, w) in path.windows(2).enumerate() {
            if w[0] == w[1] {
                continue;
            }
            for c in 0..d {
                delta[c] = pts.row(w[1])[c] - pts.row(w[0])[c];
            }
            buf.clear();
            buf.extend(
                self.weighted[s0 + k]
                    .chunks_exact(nm * d)
                    .map(|blk| dot(&blk[j * d..(j + 1) * d], &delta)),
            );
            total += median_in_place(&mut buf);
        }
        Ok(total)
    }

    /// The same estimate computed from the per-sample values.
    pub fn estimate_direct(&self, h: usize, j: usize) -> Result<f64> {
        let path = self.path(h);
        let pts = &self.carrier.points;
        let d = self.dim;
        let xi = &self.xi[j];
        let s0 = self.levels.s0;
        let mut vals: Vec<f64> = (0..self.levels.n)
            .map(|i| xi[i] * dot(&self.x[i * d..(i + 1) * d], pts.row(path[0])))
            .collect();
        let mut total = psi_log(&vals, self.levels.log_term(s0), &self.spec)?;
        for (k, w) in path.windows(2).enumerate() {
            if w[0] == w[1] {
                continue;
            }
            let delta: Vec<f64> = pts.row(w[1]).iter().zip(pts.row(w[0])).map(|(a, b)| a - b).collect();
            for (i, v) in vals.iter_mut().enumerate() {
                *v = xi[i] * dot(&self.x[i * d..(i + 1) * d], &delta);
            }
            total += psi_log(&vals, self.levels.log_term(s0 + k), &self.spec)?;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function_class::{CovarianceStructure, MetricKind};
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StandardNormal};

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn carrier(d: usize, n: usize, seed: u64) -> Arc<ChainCarrier> {
        // symmetric around the origin, which is point 0
        let mut r = rng(seed);
        let mut data = vec![0.0; d];
        for _ in 0..n / 2 {
            let p: Vec<f64> = (0..d).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
            data.extend(&p);
            data.extend(p.iter().map(|v| -v));
        }
        let oracle = DistanceOracle::new(Arc::new(CovarianceStructure::identity(d)), MetricKind::Oracle);
        Arc::new(ChainCarrier::new(PointSet::new(d, data).unwrap(), &oracle))
    }

    fn gaussian_design(d: usize, n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng(seed);
        (0..n * d).map(|_| StandardNormal.sample(&mut r)).collect()
    }

    fn spec() -> EstimatorSpec {
        EstimatorSpec::default()
    }

    #[test]
    fn top_level_and_plan() {
        assert_eq!(ChainLevels::top_level(2.0, 2000, 1.0 / 16.0).unwrap(), 5);
        assert_eq!(ChainLevels::top_level(2.0, 64, 1.0 / 16.0).unwrap(), 1);
        assert!(ChainLevels::top_level(2.0, 63, 1.0 / 16.0).is_err());
        let l = ChainLevels::plan(2.0, 3, 2000, 4, &spec()).unwrap();
        assert_eq!((l.s0, l.s1), (3, 4));
        let l = ChainLevels::plan(2.0, 9, 2000, 2, &spec()).unwrap();
        assert_eq!((l.s0, l.s1), (4, 5));
        assert_eq!(l.blocks(3), 128);
        assert!(ChainLevels::new(2.0, 2, 2, 2000, &spec()).is_err());
        assert!(ChainLevels::new(2.0, 2, 6, 2000, &spec()).is_err());
    }

    #[test]
    fn block_route_matches_sample_route() {
        let d = 3;
        let c = carrier(d, 120, 1);
        let n = 1500;
        let x = gaussian_design(d, n, 2);
        let levels = ChainLevels::plan(2.0, 1, n, c.sequence().saturation(), &spec()).unwrap();
        let q = ProductEstimator::symmetric(levels.clone(), spec(), c.clone(), &x, d).unwrap();
        let mut r = rng(3);
        let xi: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| r.random::<f64>() - 0.5).collect()).collect();
        let m = MultiplierEstimator::new(levels, spec(), c.clone(), &x, d, xi).unwrap();
        for a in (0..c.len()).step_by(7) {
            for b in (0..c.len()).step_by(11) {
                let (u, v) = (q.estimate(a, b).unwrap(), q.estimate_direct(a, b).unwrap());
                assert!((u - v).abs() <= 1e-10 * (1.0 + v.abs()), "{u} {v}");
            }
            for j in 0..2 {
                let (u, v) = (m.estimate(a, j).unwrap(), m.estimate_direct(a, j).unwrap());
                assert!((u - v).abs() <= 1e-10 * (1.0 + v.abs()), "{u} {v}");
            }
        }
    }

    #[test]
    fn zero_inputs_give_zero() {
        let d = 2;
        let c = carrier(d, 40, 5);
        let n = 800;
        let x = gaussian_design(d, n, 6);
        let levels = ChainLevels::plan(2.0, 1, n, c.sequence().saturation(), &spec()).unwrap();
        let q = ProductEstimator::symmetric(levels.clone(), spec(), c.clone(), &x, d).unwrap();
        let m = MultiplierEstimator::new(levels, spec(), c.clone(), &x, d, vec![vec![0.0; n], vec![1.0; n]]).unwrap();
        assert_eq!(c.sequence().root(), 0);
        for a in 0..c.len() {
            assert_eq!(q.estimate(0, a).unwrap(), 0.0);
            assert_eq!(q.estimate(a, 0).unwrap(), 0.0);
            assert_eq!(m.estimate(a, 0).unwrap(), 0.0);
        }
        assert_eq!(m.estimate(0, 1).unwrap(), 0.0);
    }

    #[test]
    fn product_is_exactly_symmetric() {
        let d = 4;
        let c = carrier(d, 300, 8);
        let n = 2000;
        let x = gaussian_design(d, n, 9);
        let levels = ChainLevels::plan(2.0, 1, n, c.sequence().saturation(), &spec()).unwrap();
        let q = ProductEstimator::symmetric(levels, spec(), c.clone(), &x, d).unwrap();
        for a in (0..c.len()).step_by(13) {
            for b in (0..c.len()).step_by(17) {
                assert_eq!(q.estimate(a, b).unwrap(), q.estimate(b, a).unwrap());
            }
        }
    }

    #[test]
    fn trimmed_kind_uses_sample_route() {
        let d = 2;
        let c = carrier(d, 30, 10);
        let n = 1000;
        let x = gaussian_design(d, n, 11);
        let s = EstimatorSpec {
            kind: EstimatorKind::TrimmedMean,
            ..spec()
        };
        let levels = ChainLevels::plan(2.0, 1, n, c.sequence().saturation(), &s).unwrap();
        let q = ProductEstimator::symmetric(levels, s, c.clone(), &x, d).unwrap();
        // E <X,u>^2 = |u|^2 for isotropic X
        for a in 0..c.len() {
            let u = c.points().row(a);
            assert!((q.estimate(a, a).unwrap() - dot(u, u)).abs() < 0.35 * (dot(u, u) + 0.05));
        }
    }

    #[test]
    fn multiplier_budget_enforced() {
        let d = 2;
        let c = carrier(d, 10, 12);
        let n = 800;
        let x = gaussian_design(d, n, 13);
        let levels = ChainLevels::new(2.0, 1, 2, n, &spec()).unwrap();
        // 2 exp(2^0) = 5.4
        assert!(MultiplierEstimator::new(levels.clone(), spec(), c.clone(), &x, d, vec![vec![0.0; n]; 5]).is_ok());
        let e = MultiplierEstimator::new(levels, spec(), c, &x, d, vec![vec![0.0; n]; 6]).unwrap_err();
        assert!(matches!(e, Error::EntropyCondition { count: 6, .. }));
    }

    #[test]
    fn self_products_track_second_moments() {
        // isotropic X: E <X,u><X,v> = <u,v>; each point in the carrier is reached exactly
        // at saturation, so the chained estimate of |u|^2 has only estimation error.
        let d = 3;
        let c = carrier(d, 200, 14);
        let n = 8000;
        let x = gaussian_design(d, n, 15);
        let levels = ChainLevels::plan(2.0, 1, n, c.sequence().saturation(), &spec()).unwrap();
        let q = ProductEstimator::symmetric(levels, spec(), c.clone(), &x, d).unwrap();
        let mut worst = 0.0f64;
        for a in 0..c.len() {
            for b in (0..c.len()).step_by(9) {
                let truth = dot(c.points().row(a), c.points().row(b));
                worst = worst.max((q.estimate(a, b).unwrap() - truth).abs());
            }
        }
        assert!(worst < 0.25, "{worst}");
    }
}
