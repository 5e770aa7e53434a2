//! Packing numbers and the entropy bounds they are compared with.

use serde::{Deserialize, Serialize};

use crate::chaining::complexity::{gaussian_sup_curve, McOptions, SupProfile};
use crate::error::Result;
use crate::function_class::{pack_embedded, FunctionClass, PointSet};

/// `log M(F, rD)` by greedy packing under the true metric, for each grid radius.
pub fn packing_log_curve(f: &FunctionClass, grid: &[f64]) -> Result<Vec<f64>> {
    let emb = f.embedded();
    let d_f = f.diameter();
    grid.iter()
        .map(|&r| {
            if r > d_f {
                return Ok(0.0);
            }
            Ok((pack_embedded(emb, r)?.count() as f64).ln())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub r: f64,
    /// `log M(F, rD)`.
    pub log_m: f64,
    /// `log M((F - F) ∩ 4rD, rD)`.
    pub log_m_local: f64,
    /// `E sup` over `(F - F) ∩ 4rD`.
    pub esup_4r: f64,
    /// `c1 (E sup_{4r} / r)^2`.
    pub sudakov: f64,
    /// `c2 log(2 d_F / r) (E sup_{4r} / r)^2`.
    pub local_to_global: f64,
}

/// Entropy table on `grid`. `diffs` is the difference class of `f`.
pub fn entropy_bounds(
    f: &FunctionClass,
    diffs: &FunctionClass,
    grid: &[f64],
    c1: f64,
    c2: f64,
    mc: &McOptions,
) -> Result<Vec<EntropyRow>> {
    let profile = SupProfile::new(diffs);
    let grid4: Vec<f64> = grid.iter().map(|r| 4.0 * r).collect();
    let esup = gaussian_sup_curve(&profile, &grid4, mc)?;
    let log_m = packing_log_curve(f, grid)?;
    let d_f = f.diameter();
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&a, &b| diffs.true_norm(a).total_cmp(&diffs.true_norm(b)));
    let mut rows = Vec::with_capacity(grid.len());
    for (k, &r) in grid.iter().enumerate() {
        let local: Vec<usize> = order
            .iter()
            .copied()
            .take_while(|&i| diffs.true_norm(i) <= 4.0 * r)
            .collect();
        let log_m_local = if local.is_empty() {
            0.0
        } else {
            let pts: PointSet = diffs.embedded().select(&local);
            (pack_embedded(&pts, r)?.count() as f64).ln()
        };
        let ratio = (esup.mean[k] / r).powi(2);
        rows.push(EntropyRow {
            r,
            log_m: log_m[k],
            log_m_local,
            esup_4r: esup.mean[k],
            sudakov: c1 * ratio,
            local_to_global: c2 * (2.0 * d_f / r).ln().max(0.0) * ratio,
        });
    }
    Ok(rows)
}
