//! Monte-Carlo Gaussian and Rademacher complexities of localized linear classes.
//!
//! For a linear class every supremum is driven by one random vector `z`: with
//! `a_u = <z, u>`, the supremum over the localized set `(H ∩ rD)` augmented with
//! scaled copies and boundary projections is exactly
//! `max(0, max_{||u|| <= r} a_u, r * max_{||u|| > r} a_u / ||u||)`.
//! Sorting H by norm turns a whole r-grid into one prefix/suffix sweep per draw.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bench_harness::generators::{ScalarLaw, ScalarSampler};
use crate::error::{Error, Result};
use crate::function_class::{dot, CovarianceStructure, FunctionClass, MetricKind, PointSet};
use crate::rng::{run_chunks, worker_stream};

/// Monte-Carlo budget and stream layout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub n_mc: usize,
    pub seed: u64,
    pub workers: usize,
}

impl McOptions {
    pub fn new(n_mc: usize, seed: u64) -> Self {
        McOptions {
            n_mc,
            seed,
            workers: 1,
        }
    }
}

/// Mean and standard error at each grid point.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Clone, Debug)]
struct Moments {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    count: usize,
}

impl Moments {
    fn new(m: usize) -> Self {
        Moments {
            sum: vec![0.0; m],
            sumsq: vec![0.0; m],
            count: 0,
        }
    }

    fn add(&mut self, v: &[f64]) {
        for (k, &x) in v.iter().enumerate() {
            self.sum[k] += x;
            self.sumsq[k] += x * x;
        }
        self.count += 1;
    }

    fn merge(parts: Vec<Moments>, m: usize) -> Curve {
        let mut total = Moments::new(m);
        for p in parts {
            for k in 0..m {
                total.sum[k] += p.sum[k];
                total.sumsq[k] += p.sumsq[k];
            }
            total.count += p.count;
        }
        let n = total.count as f64;
        let mean: Vec<f64> = total.sum.iter().map(|s| s / n).collect();
        let stderr = (0..m)
            .map(|k| {
                if total.count < 2 {
                    return 0.0;
                }
                let var = ((total.sumsq[k] - n * mean[k] * mean[k]) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
            .collect();
        Curve { mean, stderr }
    }
}

/// A symmetric set of vectors sorted by true L2 norm, ready for localized sweeps.
#[derive(Clone, Debug)]
pub struct SupProfile {
    raw: PointSet,
    emb: PointSet,
    norms: Vec<f64>,
}

impl SupProfile {
    /// Uses the nonzero members of `h` (0 is always implicitly present).
    pub fn new(h: &FunctionClass) -> Self {
        let tol = h.tolerance();
        let mut idx: Vec<usize> = (0..h.len()).filter(|&i| h.true_norm(i) > tol).collect();
        idx.sort_by(|&a, &b| h.true_norm(a).total_cmp(&h.true_norm(b)).then(a.cmp(&b)));
        SupProfile {
            raw: h.points().select(&idx),
            emb: h.embedded().select(&idx),
            norms: idx.iter().map(|&i| h.true_norm(i)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn max_norm(&self) -> f64 {
        self.norms.last().copied().unwrap_or(0.0)
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    /// Writes the localized supremum of `a` (or `|a|`) at each `r` of the ascending grid.
    pub fn sweep(&self, a: &mut [f64], grid: &[f64], abs: bool, suffix: &mut Vec<f64>, out: &mut [f64]) {
        let m = self.norms.len();
        if abs {
            a.iter_mut().for_each(|x| *x = x.abs());
        }
        suffix.clear();
        suffix.resize(m + 1, f64::NEG_INFINITY);
        for i in (0..m).rev() {
            suffix[i] = suffix[i + 1].max(a[i] / self.norms[i]);
        }
        let mut i = 0;
        let mut prefix = 0.0f64;
        for (k, &r) in grid.iter().enumerate() {
            while i < m && self.norms[i] <= r {
                prefix = prefix.max(a[i]);
                i += 1;
            }
            out[k] = prefix.max(r * suffix[i]);
        }
    }

    fn values_emb(&self, z: &[f64], a: &mut [f64]) {
        for (k, row) in self.emb.rows().enumerate() {
            a[k] = dot(z, row);
        }
    }

    fn values_raw(&self, z: &[f64], a: &mut [f64]) {
        for (k, row) in self.raw.rows().enumerate() {
            a[k] = dot(z, row);
        }
    }
}

/// Geometric grid over `[d_f * 1e-6, 2 d_f]` with `per_decade` points per decade.
pub fn r_grid(d_f: f64, per_decade: usize) -> Vec<f64> {
    if !(d_f > 0.0) {
        return vec![f64::MIN_POSITIVE];
    }
    let lo = d_f * 1e-6;
    let hi = 2.0 * d_f;
    let decades = (hi / lo).log10();
    let steps = (decades * per_decade as f64).ceil() as usize;
    (0..=steps)
        .map(|i| lo * 10f64.powf(decades * i as f64 / steps as f64))
        .collect()
}

/// `E sup_{u ∈ (H ∩ rD)} <G, u>` on the grid, with `G ~ N(0, Sigma)`.
pub fn gaussian_sup_curve(profile: &SupProfile, grid: &[f64], mc: &McOptions) -> Result<Curve> {
    if mc.n_mc < 2 {
        return Err(Error::invalid("n_mc", "need at least 2 draws"));
    }
    let d = profile.emb.dim();
    let m = grid.len();
    let parts = run_chunks(mc.n_mc, mc.workers, |w, range| {
        let mut rng = worker_stream(mc.seed, w as u64);
        let mut acc = Moments::new(m);
        let mut z = vec![0.0; d];
        let mut a = vec![0.0; profile.len()];
        let mut suffix = Vec::new();
        let mut out = vec![0.0; m];
        for _ in range {
            z.iter_mut().for_each(|x| *x = StandardNormal.sample(&mut rng));
            profile.values_emb(&z, &mut a);
            profile.sweep(&mut a, grid, false, &mut suffix, &mut out);
            acc.add(&out);
        }
        acc
    });
    Ok(Moments::merge(parts, m))
}

/// `(E max_{h ∈ H} <G, h>, stderr)` over an explicit set, `G ~ N(0, Sigma)`.
pub fn gaussian_sup_mc(h: &PointSet, cov: &CovarianceStructure, mc: &McOptions) -> Result<(f64, f64)> {
    if mc.n_mc < 2 {
        return Err(Error::invalid("n_mc", "need at least 2 draws"));
    }
    if h.dim() != cov.dim() {
        return Err(Error::DimensionMismatch {
            expected: cov.dim(),
            got: h.dim(),
        });
    }
    let emb = crate::function_class::DistanceOracle::new(Arc::new(cov.clone()), MetricKind::True).embed(h);
    let d = h.dim();
    let parts = run_chunks(mc.n_mc, mc.workers, |w, range| {
        let mut rng = worker_stream(mc.seed, w as u64);
        let mut acc = Moments::new(1);
        let mut z = vec![0.0; d];
        for _ in range {
            z.iter_mut().for_each(|x| *x = StandardNormal.sample(&mut rng));
            let s = emb.rows().map(|r| dot(&z, r)).fold(f64::NEG_INFINITY, f64::max);
            acc.add(&[s]);
        }
        acc
    });
    let c = Moments::merge(parts, 1);
    Ok((c.mean[0], c.stderr[0]))
}

/// Draws rows of X: i.i.d. coordinates from a unit-variance law, colored by Sigma.
#[derive(Clone, Debug)]
pub struct DesignSampler {
    law: ScalarSampler,
    cov: Arc<CovarianceStructure>,
    white: bool,
}

impl DesignSampler {
    pub fn new(law: ScalarLaw, cov: Arc<CovarianceStructure>) -> Result<Self> {
        let d = cov.dim();
        let s = cov.sigma_true();
        let white = (0..d).all(|i| (0..d).all(|j| s[i * d + j] == if i == j { 1.0 } else { 0.0 }));
        Ok(DesignSampler {
            law: law.sampler()?,
            cov,
            white,
        })
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    pub fn sample_row<R: Rng + ?Sized>(&self, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
        if self.white {
            out.iter_mut().for_each(|x| *x = self.law.sample(rng));
        } else {
            z.iter_mut().for_each(|x| *x = self.law.sample(rng));
            self.cov.color(z, out);
        }
    }
}

/// Localized Rademacher oscillations `Phi_N(r)` and optionally `Phi_{N,xi}(r)`.
#[derive(Clone, Debug)]
pub struct RademacherCurves {
    pub phi_n: Curve,
    pub phi_nxi: Option<Curve>,
}

/// `E sup_{u ∈ (H ∩ rD)} |N^{-1/2} sum eps_i u(X_i)|` (and with `xi_i` multipliers).
pub fn rademacher_phi(
    profile: &SupProfile,
    grid: &[f64],
    design: &DesignSampler,
    n: usize,
    xi: Option<(ScalarLaw, f64)>,
    mc: &McOptions,
) -> Result<RademacherCurves> {
    if mc.n_mc < 2 || n == 0 {
        return Err(Error::invalid("n_mc/N", "need n_mc >= 2 and N >= 1"));
    }
    let xi = match xi {
        Some((law, scale)) => Some((law.sampler()?, scale)),
        None => None,
    };
    let d = design.dim();
    let m = grid.len();
    let parts = run_chunks(mc.n_mc, mc.workers, |w, range| {
        let mut rng = worker_stream(mc.seed, w as u64);
        let mut acc = Moments::new(m);
        let mut acc_xi = Moments::new(m);
        let mut zbuf = vec![0.0; d];
        let mut x = vec![0.0; d];
        let mut s = vec![0.0; d];
        let mut sx = vec![0.0; d];
        let mut a = vec![0.0; profile.len()];
        let mut suffix = Vec::new();
        let mut out = vec![0.0; m];
        let scale = 1.0 / (n as f64).sqrt();
        for _ in range {
            s.iter_mut().for_each(|v| *v = 0.0);
            sx.iter_mut().for_each(|v| *v = 0.0);
            for _ in 0..n {
                design.sample_row(&mut rng, &mut zbuf, &mut x);
                let eps = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let e_xi = match &xi {
                    Some((sm, sc)) => eps * sc * sm.sample(&mut rng),
                    None => 0.0,
                };
                for k in 0..d {
                    s[k] += eps * x[k];
                    sx[k] += e_xi * x[k];
                }
            }
            s.iter_mut().for_each(|v| *v *= scale);
            sx.iter_mut().for_each(|v| *v *= scale);
            profile.values_raw(&s, &mut a);
            profile.sweep(&mut a, grid, true, &mut suffix, &mut out);
            acc.add(&out);
            if xi.is_some() {
                profile.values_raw(&sx, &mut a);
                profile.sweep(&mut a, grid, true, &mut suffix, &mut out);
                acc_xi.add(&out);
            }
        }
        (acc, acc_xi)
    });
    let (p, q): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    Ok(RademacherCurves {
        phi_n: Moments::merge(p, m),
        phi_nxi: xi.map(|_| Moments::merge(q, m)),
    })
}

/// `(E sup_{h ∈ H} |N^{-1/2} sum eps_i <X_i, h>|, stderr)` over an explicit set.
pub fn rademacher_sup_mc(h: &PointSet, design: &DesignSampler, n: usize, mc: &McOptions) -> Result<(f64, f64)> {
    if mc.n_mc < 2 || n == 0 {
        return Err(Error::invalid("n_mc/N", "need n_mc >= 2 and N >= 1"));
    }
    let d = design.dim();
    let parts = run_chunks(mc.n_mc, mc.workers, |w, range| {
        let mut rng = worker_stream(mc.seed, w as u64);
        let mut acc = Moments::new(1);
        let mut zbuf = vec![0.0; d];
        let mut x = vec![0.0; d];
        let mut s = vec![0.0; d];
        for _ in range {
            s.iter_mut().for_each(|v| *v = 0.0);
            for _ in 0..n {
                design.sample_row(&mut rng, &mut zbuf, &mut x);
                let eps = if rng.random::<bool>() { 1.0 } else { -1.0 };
                for k in 0..d {
                    s[k] += eps * x[k];
                }
            }
            let scale = 1.0 / (n as f64).sqrt();
            let sup = h
                .rows()
                .map(|r| (scale * dot(&s, r)).abs())
                .fold(0.0, f64::max);
            acc.add(&[sup]);
        }
        acc
    });
    let c = Moments::merge(parts, 1);
    Ok((c.mean[0], c.stderr[0]))
}
