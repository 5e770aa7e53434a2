//! Crude risk oracle: one mean estimate per packing center, shared by the center's cell.

use serde::{Deserialize, Serialize};

use crate::bench_harness::generators::LabeledSample;
use crate::error::{Error, Result};
use crate::function_class::{dot, greedy_packing, DistanceOracle, FunctionClass, Packing};
use crate::mean_estimators::{check_log_term, psi_log, EstimatorSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrudeConstants {
    /// Packing separation is `eta * gamma * r`.
    pub gamma: f64,
    /// `2^{s0} = theta^2 N`.
    pub theta: f64,
}

impl CrudeConstants {
    /// `gamma = 1 / (eta^2 sqrt(90))`, so that `10 (eta^2 gamma)^2 = 1/9`.
    pub fn default_gamma(eta: f64) -> f64 {
        1.0 / (eta * eta * 90f64.sqrt())
    }

    pub fn for_eta(eta: f64, theta: f64) -> Self {
        CrudeConstants {
            gamma: Self::default_gamma(eta),
            theta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !(self.theta > 0.0) {
            return Err(Error::invalid("gamma/theta", "must be positive"));
        }
        Ok(())
    }
}

/// `s0 = floor(log2(theta^2 N))`, at least 0.
pub fn crude_level(theta: f64, n: usize) -> usize {
    let t = theta * theta * n as f64;
    if t < 2.0 {
        0
    } else {
        t.log2().floor() as usize
    }
}

#[derive(Clone, Debug)]
pub struct CrudeOracleOutput {
    pub r: f64,
    pub constants: CrudeConstants,
    pub s0: usize,
    /// Centers `u_j` (class indices) and the cell of every class member.
    pub packing: Packing,
    /// Estimate attached to each center.
    pub center_values: Vec<f64>,
    /// `Psi_C(f)` for every class member.
    pub psi_c: Vec<f64>,
    /// `sigma_hat^2 = min_f Psi_C(f)`.
    pub sigma_hat2: f64,
    /// `max(sigma_hat^2, r^2)`.
    pub sigma_star2: f64,
    /// Members with `Psi_C(f) <= 4 sigma_star^2`, in label order.
    pub v_hat: Vec<usize>,
}

impl CrudeOracleOutput {
    pub fn sigma_hat(&self) -> f64 {
        self.sigma_hat2.sqrt()
    }

    pub fn sigma_star(&self) -> f64 {
        self.sigma_star2.sqrt()
    }

    pub fn in_v_hat(&self, f: usize) -> bool {
        self.v_hat.binary_search(&f).is_ok()
    }
}

fn check_sample(f: &FunctionClass, sample: &LabeledSample) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::Empty("sample"));
    }
    if sample.dim != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: sample.dim,
        });
    }
    Ok(())
}

/// Builds the crude oracle on `sample` (the first half of the data).
pub fn crude_oracle(
    f: &FunctionClass,
    sample: &LabeledSample,
    r: f64,
    oracle: &DistanceOracle,
    constants: CrudeConstants,
    spec: &EstimatorSpec,
) -> Result<CrudeOracleOutput> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid("r", format!("{r} must be positive")));
    }
    constants.validate()?;
    spec.validate()?;
    check_sample(f, sample)?;
    let n = sample.len();
    let s0 = crude_level(constants.theta, n);
    let log_term = 2f64.powi(s0 as i32);
    check_log_term(log_term, n, spec.c0)?;
    let eta = oracle.covariance().eta();
    let packing = greedy_packing(f, eta * constants.gamma * r, oracle)?;
    let budget = 2f64.powi(s0 as i32 - 1);
    let log_count = (packing.count() as f64).ln();
    if log_count > budget {
        return Err(Error::EntropyCondition {
            what: "crude packing",
            count: packing.count(),
            log_count,
            budget,
        });
    }
    let mut vals = vec![0.0; n];
    let center_values = packing
        .centers
        .iter()
        .map(|&c| {
            let u = f.point(c);
            for (i, v) in vals.iter_mut().enumerate() {
                let e = dot(sample.row(i), u) - sample.y[i];
                *v = e * e;
            }
            psi_log(&vals, log_term, spec)
        })
        .collect::<Result<Vec<f64>>>()?;
    let psi_c: Vec<f64> = packing.assignment.iter().map(|&j| center_values[j]).collect();
    let sigma_hat2 = psi_c.iter().cloned().fold(f64::INFINITY, f64::min);
    let sigma_star2 = sigma_hat2.max(r * r);
    let v_hat = (0..psi_c.len()).filter(|&i| psi_c[i] <= 4.0 * sigma_star2).collect();
    Ok(CrudeOracleOutput {
        r,
        constants,
        s0,
        packing,
        center_values,
        psi_c,
        sigma_hat2,
        sigma_star2,
        v_hat,
    })
}

/// `(sigma_hat, sigma_star)` from a populated output.
pub fn noise_estimate(out: &CrudeOracleOutput, r: f64) -> (f64, f64) {
    let s2 = out.psi_c.iter().cloned().fold(f64::INFINITY, f64::min);
    let sigma_hat = s2.max(0.0).sqrt();
    (sigma_hat, sigma_hat.max(r))
}
