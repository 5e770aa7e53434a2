//! Rademacher-versus-Gaussian gap on the vertices of the l1 ball under
//! heavy-tailed two-point coordinates.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bench_harness::generators::ScalarLaw;
use crate::chaining::complexity::rademacher_sup_mc;
use crate::chaining::{gaussian_sup_mc, DesignSampler, McOptions};
use crate::error::{Error, Result};
use crate::function_class::{CovarianceStructure, PointSet};
use crate::rng::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GapConfig {
    pub d: usize,
    pub alpha: f64,
    /// Sample size; `None` gives `round(d^{1/alpha})`.
    pub n: Option<usize>,
    pub k_grid: Vec<u64>,
    pub n_mc: usize,
    pub seed: u64,
    pub workers: usize,
    /// Also estimate the ratio for gaussian coordinates.
    pub gaussian_design: bool,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig {
            d: 256,
            alpha: 2.0,
            n: None,
            k_grid: vec![256, 4096, 65536],
            n_mc: 20_000,
            seed: 0x6A9,
            workers: 1,
            gaussian_design: true,
        }
    }
}

impl GapConfig {
    pub fn sample_size(&self) -> usize {
        self.n
            .unwrap_or_else(|| (self.d as f64).powf(1.0 / self.alpha).round().max(1.0) as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.sample_size() == 0 {
            return Err(Error::Config("gap experiment needs d >= 1 and N >= 1".into()));
        }
        if !(self.alpha > 1.0) {
            return Err(Error::Config(format!("alpha = {} must exceed 1", self.alpha)));
        }
        if self.k_grid.is_empty() || self.k_grid.iter().any(|&k| k < 2) {
            return Err(Error::Config("k grid must be nonempty with every k >= 2".into()));
        }
        if self.n_mc < 2 {
            return Err(Error::Config("n_mc must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub k: u64,
    pub phi_n: f64,
    pub phi_n_stderr: f64,
    pub gauss: f64,
    pub gauss_stderr: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
    /// Whether `N <= k <= N d`.
    pub in_window: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianDesignPoint {
    pub phi_n: f64,
    pub phi_n_stderr: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub d: usize,
    pub alpha: f64,
    pub n: usize,
    pub n_mc: usize,
    /// Sorted by k.
    pub points: Vec<GapPoint>,
    pub gaussian_design: Option<GaussianDesignPoint>,
}

impl GapReport {
    /// Each ratio exceeds its predecessor by more than `z` combined standard errors.
    pub fn strictly_increasing(&self, z: f64) -> bool {
        self.points.windows(2).all(|w| {
            let se = (w[0].ratio_stderr.powi(2) + w[1].ratio_stderr.powi(2)).sqrt();
            w[1].ratio - w[0].ratio > z * se
        })
    }

    /// `max / min - 1` of the gaussian estimates across the grid.
    pub fn gaussian_spread(&self) -> f64 {
        let g = self.points.iter().map(|p| p.gauss);
        let hi = g.clone().fold(f64::NEG_INFINITY, f64::max);
        let lo = g.fold(f64::INFINITY, f64::min);
        hi / lo - 1.0
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let wrap = |e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        };
        let mut w = csv::Writer::from_path(path).map_err(wrap)?;
        w.write_record(["k", "phi_n", "phi_n_stderr", "gauss", "gauss_stderr", "ratio", "ratio_stderr", "in_window"])
            .map_err(wrap)?;
        for p in &self.points {
            w.write_record([
                p.k.to_string(),
                p.phi_n.to_string(),
                p.phi_n_stderr.to_string(),
                p.gauss.to_string(),
                p.gauss_stderr.to_string(),
                p.ratio.to_string(),
                p.ratio_stderr.to_string(),
                p.in_window.to_string(),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn ratio(a: f64, sa: f64, b: f64, sb: f64) -> (f64, f64) {
    let r = a / b;
    (r, r * ((sa / a).powi(2) + (sb / b).powi(2)).sqrt())
}

/// `±e_j` for `j < d`.
pub fn l1_vertices(d: usize) -> PointSet {
    let mut p = PointSet::with_capacity(d, 2 * d);
    let mut e = vec![0.0; d];
    for j in 0..d {
        for s in [1.0, -1.0] {
            e[j] = s;
            p.push(&e);
        }
        e[j] = 0.0;
    }
    p
}

pub fn run_gap_experiment(cfg: &GapConfig) -> Result<GapReport> {
    cfg.validate()?;
    let d = cfg.d;
    let n = cfg.sample_size();
    let cov = Arc::new(CovarianceStructure::identity(d));
    let vertices = l1_vertices(d);
    let mc = |path: &[u64]| McOptions {
        n_mc: cfg.n_mc,
        seed: derive_seed(cfg.seed, path),
        workers: cfg.workers,
    };
    let mut ks = cfg.k_grid.clone();
    ks.sort_unstable();
    ks.dedup();
    let mut points = Vec::with_capacity(ks.len());
    for (i, &k) in ks.iter().enumerate() {
        let design = DesignSampler::new(ScalarLaw::AppendixB { k }, cov.clone())?;
        let (phi, phi_se) = rademacher_sup_mc(&vertices, &design, n, &mc(&[i as u64, 0]))?;
        let (g, g_se) = gaussian_sup_mc(&vertices, &cov, &mc(&[i as u64, 1]))?;
        let (r, r_se) = ratio(phi, phi_se, g, g_se);
        let in_window = k >= n as u64 && k <= (n * d) as u64;
        if !in_window {
            log::warn!("k = {k} lies outside [N, N d] = [{n}, {}]", n * d);
        }
        points.push(GapPoint {
            k,
            phi_n: phi,
            phi_n_stderr: phi_se,
            gauss: g,
            gauss_stderr: g_se,
            ratio: r,
            ratio_stderr: r_se,
            in_window,
        });
    }
    let gaussian_design = if cfg.gaussian_design {
        let design = DesignSampler::new(ScalarLaw::Gaussian, cov.clone())?;
        let (phi, phi_se) = rademacher_sup_mc(&vertices, &design, n, &mc(&[u64::MAX, 0]))?;
        let (g, g_se) = gaussian_sup_mc(&vertices, &cov, &mc(&[u64::MAX, 1]))?;
        let (r, r_se) = ratio(phi, phi_se, g, g_se);
        Some(GaussianDesignPoint {
            phi_n: phi,
            phi_n_stderr: phi_se,
            ratio: r,
            ratio_stderr: r_se,
        })
    } else {
        None
    };
    Ok(GapReport {
        d,
        alpha: cfg.alpha,
        n,
        n_mc: cfg.n_mc,
        points,
        gaussian_design,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertices_are_signed_basis() {
        let v = l1_vertices(3);
        assert_eq!(v.len(), 6);
        assert_eq!(v.row(3), &[0.0, -1.0, 0.0]);
    }

    #[test]
    fn sample_size_follows_alpha() {
        let c = GapConfig::default();
        assert_eq!(c.sample_size(), 16);
        let c = GapConfig { d: 1000, alpha: 3.0, ..Default::default() };
        assert_eq!(c.sample_size(), 10);
    }

    #[test]
    fn light_tail_ratio_near_one() {
        let cfg = GapConfig {
            d: 32,
            alpha: 2.0,
            n: Some(8),
            k_grid: vec![2],
            n_mc: 4000,
            gaussian_design: true,
            ..Default::default()
        };
        let rep = run_gap_experiment(&cfg).unwrap();
        let p = rep.points[0];
        assert!(p.ratio > 0.5 && p.ratio < 2.0, "{p:?}");
        let g = rep.gaussian_design.unwrap();
        assert!(g.ratio > 0.8 && g.ratio < 1.25, "{g:?}");
        assert!(!p.in_window);
    }

    #[test]
    fn grid_is_sorted_and_flags_window() {
        let cfg = GapConfig {
            d: 8,
            n: Some(4),
            k_grid: vec![64, 4, 16],
            n_mc: 200,
            gaussian_design: false,
            ..Default::default()
        };
        let rep = run_gap_experiment(&cfg).unwrap();
        let ks: Vec<u64> = rep.points.iter().map(|p| p.k).collect();
        assert_eq!(ks, vec![4, 16, 64]);
        assert_eq!(rep.points.iter().map(|p| p.in_window).collect::<Vec<_>>(), vec![true, true, false]);
        assert!(rep.points.iter().all(|p| p.ratio > 0.0));
        assert!(rep.gaussian_design.is_none());
    }

    #[test]
    fn bad_config_is_rejected() {
        assert!(run_gap_experiment(&GapConfig { alpha: 1.0, ..Default::default() }).is_err());
        assert!(run_gap_experiment(&GapConfig { k_grid: vec![1], ..Default::default() }).is_err());
    }
}
