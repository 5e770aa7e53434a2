//! Admissible sequences, gamma_2, Monte-Carlo complexities and fixed points.

pub mod admissible;
pub mod complexity;
pub mod entropy;
pub mod fixed_point;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use admissible::{build_admissible_sequence, gamma2, AdmissibleSequence};
pub use complexity::{
    gaussian_sup_curve, gaussian_sup_mc, r_grid, rademacher_phi, Curve, DesignSampler, McOptions,
    SupProfile,
};
pub use entropy::{entropy_bounds, packing_log_curve, EntropyRow};
pub use fixed_point::{
    solve_fixed_point, ComplexityCurves, FixedPoint, FixedPointKind, FixedPointParams,
    FixedPointStatus,
};

use crate::bench_harness::generators::ScalarLaw;
use crate::error::{Error, Result};
use crate::function_class::{difference_class, FunctionClass, MetricKind};

/// Settings for the Rademacher part of a report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RademacherOptions {
    pub design: ScalarLaw,
    /// Multiplier law and scale; `None` skips `Phi_{N,xi}`.
    pub xi: Option<(ScalarLaw, f64)>,
    pub mc: McOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityOptions {
    pub kappa: f64,
    pub n: usize,
    pub sigma: Option<f64>,
    pub per_decade: usize,
    pub gaussian: McOptions,
    pub rademacher: Option<RademacherOptions>,
    /// Grid density of the entropy table (0 disables it).
    pub entropy_per_decade: usize,
    pub c_sudakov: f64,
    pub c_local: f64,
}

impl Default for ComplexityOptions {
    fn default() -> Self {
        ComplexityOptions {
            kappa: 0.25,
            n: 1000,
            sigma: None,
            per_decade: 200,
            gaussian: McOptions::new(2000, 0x5EED),
            rademacher: None,
            entropy_per_decade: 0,
            c_sudakov: 1.0,
            c_local: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub kappa: f64,
    pub n: usize,
    pub sigma: Option<f64>,
    pub d_f: f64,
    pub class_size: usize,
    pub difference_size: usize,
    pub curves: ComplexityCurves,
    /// `E sup` over the whole difference class.
    pub gaussian_sup: f64,
    pub gaussian_sup_stderr: f64,
    /// gamma_2 of the greedy sequence on F - F (true metric).
    pub gamma2: f64,
    /// `(E sup_{(F-F) ∩ rD} G / R_H)^2` per grid radius.
    pub critical_dim: Vec<f64>,
    pub fixed_points: Vec<FixedPoint>,
    /// `max(r_Q, r_M)` when both were solved.
    pub r_star: Option<f64>,
    pub entropy: Vec<EntropyRow>,
    /// Whether `lambda* <= r_tilde*` on this instance.
    pub lambda_below_r_tilde: Option<bool>,
}

impl ComplexityReport {
    pub fn fixed_point(&self, kind: FixedPointKind) -> Option<&FixedPoint> {
        self.fixed_points.iter().find(|f| f.kind == kind)
    }

    pub fn value(&self, kind: FixedPointKind) -> Option<f64> {
        self.fixed_point(kind).map(|f| f.value)
    }

    /// One row per grid radius: r, EsupG, stderr, phiN, phiNxi, logM.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
        let c = &self.curves;
        let wrap = |e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        };
        w.write_record(["r", "EsupG", "stderr", "phiN", "phiNxi", "logM"]).map_err(wrap)?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.10e}")).unwrap_or_default();
        for (i, r) in c.r_grid.iter().enumerate() {
            w.write_record([
                format!("{r:.10e}"),
                opt(c.esup.as_ref().map(|x| x.mean[i])),
                opt(c.esup.as_ref().map(|x| x.stderr[i])),
                opt(c.phi_n.as_ref().map(|x| x.mean[i])),
                opt(c.phi_nxi.as_ref().map(|x| x.mean[i])),
                opt(c.log_m.as_ref().map(|x| x[i])),
            ])
            .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Evaluates every curve on a common grid and solves all fixed points that the
/// inputs allow.
pub fn complexity_report(f: &FunctionClass, opts: &ComplexityOptions) -> Result<ComplexityReport> {
    let diffs = difference_class(f)?;
    let profile = SupProfile::new(&diffs);
    let d_f = f.diameter();
    let grid = r_grid(d_f, opts.per_decade);
    let esup = gaussian_sup_curve(&profile, &grid, &opts.gaussian)?;
    let log_m = packing_log_curve(f, &grid)?;
    let (phi_n, phi_nxi) = match &opts.rademacher {
        Some(ro) => {
            let design = DesignSampler::new(ro.design, f.covariance().clone())?;
            let c = rademacher_phi(&profile, &grid, &design, opts.n, ro.xi, &ro.mc)?;
            (Some(c.phi_n), c.phi_nxi)
        }
        None => (None, None),
    };
    let critical_dim = grid
        .iter()
        .zip(&esup.mean)
        .map(|(&r, &e)| {
            let rh = r.min(profile.max_norm());
            if rh > 0.0 {
                (e / rh).powi(2)
            } else {
                0.0
            }
        })
        .collect();
    let gaussian_sup = *esup.mean.last().unwrap_or(&0.0);
    let gaussian_sup_stderr = *esup.stderr.last().unwrap_or(&0.0);
    let curves = ComplexityCurves {
        r_grid: grid,
        d_f,
        esup: Some(esup),
        phi_n,
        phi_nxi,
        log_m: Some(log_m),
    };
    let params = FixedPointParams {
        kappa: opts.kappa,
        n: opts.n,
        sigma: opts.sigma,
    };
    let mut fixed_points = Vec::new();
    for kind in FixedPointKind::ALL {
        match solve_fixed_point(kind, &curves, &params) {
            Ok(fp) => fixed_points.push(fp),
            Err(Error::InvalidParameter { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let get = |k: FixedPointKind| fixed_points.iter().find(|f| f.kind == k).map(|f| f.value);
    let r_star = match (get(FixedPointKind::RQ), get(FixedPointKind::RM)) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => None,
    };
    let lambda_below_r_tilde = match (get(FixedPointKind::Lambda), get(FixedPointKind::RTilde)) {
        (Some(l), Some(t)) => Some(l <= t),
        _ => None,
    };
    let oracle = f.oracle(MetricKind::Oracle);
    let seq = admissible::build_on_embedded(&oracle.embed(diffs.points()), None);
    let g2 = gamma2(&seq, diffs.embedded());
    let entropy = if opts.entropy_per_decade > 0 {
        let eg = r_grid(d_f, opts.entropy_per_decade);
        entropy_bounds(f, &diffs, &eg, opts.c_sudakov, opts.c_local, &opts.gaussian)?
    } else {
        Vec::new()
    };
    Ok(ComplexityReport {
        kappa: opts.kappa,
        n: opts.n,
        sigma: opts.sigma,
        d_f,
        class_size: f.len(),
        difference_size: diffs.len(),
        curves,
        gaussian_sup,
        gaussian_sup_stderr,
        gamma2: g2,
        critical_dim,
        fixed_points,
        r_star,
        entropy,
        lambda_below_r_tilde,
    })
}
