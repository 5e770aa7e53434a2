//! Fixed points of the complexity conditions, solved on a geometric grid.

use serde::{Deserialize, Serialize};

use crate::chaining::complexity::Curve;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointKind {
    /// `E sup G <= kappa sqrt(N) r`
    RQ,
    /// `E sup G <= kappa sqrt(N) r^2 / sigma`
    RM,
    /// `log M(F, rD) <= kappa N min(1, r^2 / sigma^2)`
    Lambda,
    /// `E sup G <= kappa sqrt(N) theta(r) r min(1, r / sigma)`
    RTilde,
    /// `Phi_N(r) <= kappa sqrt(N) r`
    RQRad,
    /// `Phi_{N,xi}(r) <= kappa sqrt(N) r^2`
    RMRad,
}

impl FixedPointKind {
    pub const ALL: [FixedPointKind; 6] = [
        FixedPointKind::RQ,
        FixedPointKind::RM,
        FixedPointKind::Lambda,
        FixedPointKind::RTilde,
        FixedPointKind::RQRad,
        FixedPointKind::RMRad,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FixedPointKind::RQ => "r_q",
            FixedPointKind::RM => "r_m",
            FixedPointKind::Lambda => "lambda",
            FixedPointKind::RTilde => "r_tilde",
            FixedPointKind::RQRad => "r_q_rad",
            FixedPointKind::RMRad => "r_m_rad",
        }
    }

    fn needs_sigma(&self) -> bool {
        matches!(
            self,
            FixedPointKind::RM | FixedPointKind::Lambda | FixedPointKind::RTilde
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointParams {
    pub kappa: f64,
    /// Sample size the fixed point refers to.
    pub n: usize,
    pub sigma: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointStatus {
    Interior,
    /// The condition holds on the whole grid.
    Floor,
    /// The condition fails at the top of the grid; the value is `2 d_F`.
    Ceiling,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub kind: FixedPointKind,
    pub value: f64,
    pub status: FixedPointStatus,
    pub grid_index: usize,
}

/// Evaluated curves sharing one r-grid.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ComplexityCurves {
    pub r_grid: Vec<f64>,
    pub d_f: f64,
    pub esup: Option<Curve>,
    pub phi_n: Option<Curve>,
    pub phi_nxi: Option<Curve>,
    pub log_m: Option<Vec<f64>>,
}

/// `1 / max(1, sqrt(log(2 d_F / r)))`.
pub fn theta(r: f64, d_f: f64) -> f64 {
    let l = (2.0 * d_f / r).ln();
    1.0 / l.max(0.0).sqrt().max(1.0)
}

/// Left side of the condition at grid index `i`.
pub fn lhs(kind: FixedPointKind, curves: &ComplexityCurves, i: usize) -> Result<f64> {
    let pick = |c: &Option<Curve>, what: &'static str| -> Result<f64> {
        c.as_ref()
            .map(|c| c.mean[i])
            .ok_or_else(|| Error::invalid("curves", format!("missing {what} curve")))
    };
    match kind {
        FixedPointKind::RQ | FixedPointKind::RM | FixedPointKind::RTilde => pick(&curves.esup, "gaussian"),
        FixedPointKind::RQRad => pick(&curves.phi_n, "rademacher"),
        FixedPointKind::RMRad => pick(&curves.phi_nxi, "multiplier"),
        FixedPointKind::Lambda => curves
            .log_m
            .as_ref()
            .map(|v| v[i])
            .ok_or_else(|| Error::invalid("curves", "missing packing curve")),
    }
}

/// Right side of the condition at radius `r`.
pub fn rhs(kind: FixedPointKind, params: &FixedPointParams, r: f64, d_f: f64) -> f64 {
    let k = params.kappa;
    let n = params.n as f64;
    let sigma = params.sigma.unwrap_or(f64::NAN);
    match kind {
        FixedPointKind::RQ | FixedPointKind::RQRad => k * n.sqrt() * r,
        FixedPointKind::RM => k * n.sqrt() * r * r / sigma,
        FixedPointKind::RMRad => k * n.sqrt() * r * r,
        FixedPointKind::Lambda => k * n * (r * r / (sigma * sigma)).min(1.0),
        FixedPointKind::RTilde => k * n.sqrt() * theta(r, d_f) * r * (r / sigma).min(1.0),
    }
}

fn validate(kind: FixedPointKind, params: &FixedPointParams) -> Result<()> {
    if !(params.kappa > 0.0) {
        return Err(Error::invalid("kappa", format!("{} must be positive", params.kappa)));
    }
    if params.n == 0 {
        return Err(Error::invalid("N", "must be positive"));
    }
    if kind.needs_sigma() && !params.sigma.is_some_and(|s| s > 0.0) {
        return Err(Error::invalid("sigma", format!("{} requires sigma > 0", kind.name())));
    }
    Ok(())
}

/// Smallest grid radius from which the condition holds at every larger grid point.
pub fn solve_fixed_point(
    kind: FixedPointKind,
    curves: &ComplexityCurves,
    params: &FixedPointParams,
) -> Result<FixedPoint> {
    validate(kind, params)?;
    let g = &curves.r_grid;
    if g.is_empty() {
        return Err(Error::Empty("r grid"));
    }
    let mut first = g.len();
    for i in (0..g.len()).rev() {
        if lhs(kind, curves, i)? <= rhs(kind, params, g[i], curves.d_f) {
            first = i;
        } else {
            break;
        }
    }
    Ok(if first == g.len() {
        FixedPoint {
            kind,
            value: 2.0 * curves.d_f,
            status: FixedPointStatus::Ceiling,
            grid_index: g.len() - 1,
        }
    } else {
        FixedPoint {
            kind,
            value: g[first],
            status: if first == 0 {
                FixedPointStatus::Floor
            } else {
                FixedPointStatus::Interior
            },
            grid_index: first,
        }
    })
}
