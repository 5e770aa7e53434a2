//! Fine risk oracle: the mixture estimator over a partition of the class and the
//! chained estimators on the localized difference class.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bench_harness::generators::LabeledSample;
use crate::error::{Error, Result};
use crate::function_class::{
    dedup_representatives, dot, greedy_packing, DistanceOracle, FunctionClass, MetricKind, Packing, PointSet,
    DEDUP_REL_TOL,
};
use crate::mean_estimators::EstimatorSpec;
use crate::risk_oracles::chained::{ChainCarrier, ChainLevels, MultiplierEstimator, ProductEstimator};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FineConstants {
    /// `delta_s = 2 exp(-alpha 2^s)`.
    pub alpha: f64,
    /// `2^{s0} <= theta^2 N min(1, r^2 / sigma_star^2)`.
    pub theta: f64,
}

impl FineConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.theta > 0.0) {
            return Err(Error::invalid("alpha/theta", "must be positive"));
        }
        Ok(())
    }
}

/// `floor(log2(theta^2 N min(1, r^2 / sigma_star^2)))`, at least 0.
pub fn fine_level(theta: f64, n: usize, r: f64, sigma_star: f64) -> usize {
    let t = theta * theta * n as f64 * (r * r / (sigma_star * sigma_star)).min(1.0);
    if t < 2.0 {
        0
    } else {
        t.log2().floor() as usize
    }
}

/// The three parts of `Psi_*(u, w, v) = psi1 + 2 psi2 + 2 psi3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureTerms {
    pub psi1: f64,
    pub psi2: f64,
    pub psi3: f64,
}

impl MixtureTerms {
    pub fn total(&self) -> f64 {
        self.psi1 + 2.0 * self.psi2 + 2.0 * self.psi3
    }
}

/// State of the fine oracle, bound to the second half of the sample.
#[derive(Clone, Debug)]
pub struct FineOracleState {
    pub r: f64,
    /// `eta^2 r`.
    pub r0: f64,
    pub sigma_star: f64,
    pub levels: ChainLevels,
    /// Cells `V_j` with centers `v_j` (class indices), packed at `eta r` under the oracle.
    pub cells: Packing,
    class: PointSet,
    metric: DistanceOracle,
    carrier: Arc<ChainCarrier>,
    /// Carrier index of `r (f_a - f_b) / alpha(f_a - f_b)`, at `a * m + b`.
    pair_index: Vec<u32>,
    /// `alpha(f_a - f_b) = max(r, d(f_a - f_b, 0))`.
    pair_alpha: Vec<f64>,
    /// Carrier index of `v - v_j` for every class member `v`.
    offset_index: Vec<u32>,
    product: ProductEstimator,
    multiplier: MultiplierEstimator,
}

impl FineOracleState {
    pub fn class_len(&self) -> usize {
        self.class.len()
    }

    pub fn carrier(&self) -> &Arc<ChainCarrier> {
        &self.carrier
    }

    pub fn product(&self) -> &ProductEstimator {
        &self.product
    }

    pub fn multiplier(&self) -> &MultiplierEstimator {
        &self.multiplier
    }

    /// `alpha(u) = max(r, d(u, 0))`.
    pub fn alpha_of(&self, u: &[f64]) -> f64 {
        self.r.max(self.metric.norm(u))
    }

    fn check_member(&self, v: usize) -> Result<()> {
        if v >= self.class.len() {
            return Err(Error::Internal(format!("class member {v} has no cell (class size {})", self.class.len())));
        }
        Ok(())
    }

    /// Terms of `Psi_*(f_a - f_b, f_c - f_d, v)`.
    pub fn mixture_terms(&self, u: (usize, usize), w: (usize, usize), v: usize) -> Result<MixtureTerms> {
        for i in [u.0, u.1, w.0, w.1, v] {
            self.check_member(i)?;
        }
        let m = self.class.len();
        let iu = u.0 * m + u.1;
        let iw = w.0 * m + w.1;
        let cu = self.pair_alpha[iu] / self.r;
        let cw = self.pair_alpha[iw] / self.r;
        let pu = self.pair_index[iu] as usize;
        let pw = self.pair_index[iw] as usize;
        let j = self.cells.assignment[v];
        Ok(MixtureTerms {
            psi1: cu * cw * self.product.estimate(pu, pw)?,
            psi2: cu * self.product.estimate(pu, self.offset_index[v] as usize)?,
            psi3: cu * self.multiplier.estimate(pu, j)?,
        })
    }

    fn locate_scaled(&self, u: &[f64]) -> Result<(usize, f64)> {
        let a = self.alpha_of(u);
        let scaled: Vec<f64> = u.iter().map(|x| self.r * x / a).collect();
        let tol = 1e-9 * self.r.max(scaled.iter().map(|x| x.abs()).fold(0.0, f64::max));
        self.carrier
            .locate(&scaled, tol)
            .map(|i| (i, a / self.r))
            .ok_or_else(|| Error::Internal("rescaled element is not in the localized carrier".into()))
    }

    /// `Psi_1(u, w)` for arbitrary vectors whose rescalings lie in the carrier.
    pub fn psi1_vec(&self, u: &[f64], w: &[f64]) -> Result<f64> {
        let (iu, cu) = self.locate_scaled(u)?;
        let (iw, cw) = self.locate_scaled(w)?;
        Ok(cu * cw * self.product.estimate(iu, iw)?)
    }
}

/// Builds the fine oracle on `sample` (the second half of the data).
pub fn build_fine_oracle(
    f: &FunctionClass,
    sample: &LabeledSample,
    r: f64,
    sigma_star: f64,
    oracle: &DistanceOracle,
    constants: FineConstants,
    spec: &EstimatorSpec,
) -> Result<FineOracleState> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::invalid("r", format!("{r} must be positive")));
    }
    if !(sigma_star >= r) {
        return Err(Error::invalid("sigma_star", format!("{sigma_star} must be at least r = {r}")));
    }
    constants.validate()?;
    spec.validate()?;
    if sample.is_empty() {
        return Err(Error::Empty("sample"));
    }
    if sample.dim != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: sample.dim,
        });
    }
    let d = f.dim();
    let m = f.len();
    let n = sample.len();
    let eta = oracle.covariance().eta();
    let r0 = eta * eta * r;
    let cells = greedy_packing(f, eta * r, oracle)?;

    let emb = oracle.embed(f.points());
    let mut raw = PointSet::with_capacity(d, m * m + 2 * m + 1);
    let mut raw_emb = PointSet::with_capacity(d, m * m + 2 * m + 1);
    raw.push(&vec![0.0; d]);
    raw_emb.push(&vec![0.0; d]);
    let mut pair_raw = vec![0usize; m * m];
    let mut pair_alpha = vec![r; m * m];
    let mut p = vec![0.0; d];
    let mut pe = vec![0.0; d];
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            for k in 0..d {
                pe[k] = emb.row(a)[k] - emb.row(b)[k];
            }
            let alpha = r.max(dot(&pe, &pe).sqrt());
            let c = r / alpha;
            for k in 0..d {
                p[k] = c * (f.point(a)[k] - f.point(b)[k]);
                pe[k] *= c;
            }
            pair_raw[a * m + b] = raw.len();
            pair_alpha[a * m + b] = alpha;
            raw.push(&p);
            raw_emb.push(&pe);
        }
    }
    let mut offset_raw = vec![0usize; m];
    for v in 0..m {
        let c = cells.center_of(v);
        if c == v {
            continue;
        }
        for sign in [1.0, -1.0] {
            for k in 0..d {
                p[k] = sign * (f.point(v)[k] - f.point(c)[k]);
                pe[k] = sign * (emb.row(v)[k] - emb.row(c)[k]);
            }
            if sign > 0.0 {
                offset_raw[v] = raw.len();
            }
            raw.push(&p);
            raw_emb.push(&pe);
        }
    }
    let rep = dedup_representatives(&raw_emb, DEDUP_REL_TOL * r);
    let mut pos = vec![u32::MAX; raw.len()];
    let mut keep = Vec::new();
    for i in 0..raw.len() {
        if rep[i] == i {
            pos[i] = keep.len() as u32;
            keep.push(i);
        }
    }
    let lookup = |i: usize| pos[rep[i]];
    let pair_index: Vec<u32> = pair_raw.iter().map(|&i| lookup(i)).collect();
    let offset_index: Vec<u32> = offset_raw.iter().map(|&i| lookup(i)).collect();
    let carrier = Arc::new(ChainCarrier::new(raw.select(&keep), oracle));

    let s0_target = fine_level(constants.theta, n, r, sigma_star);
    let levels = ChainLevels::plan(constants.alpha, s0_target, n, carrier.sequence().saturation(), spec)?;
    let budget = 2f64.powi(levels.s0 as i32 - 1);
    let log_count = (cells.count() as f64).ln();
    if log_count > budget {
        return Err(Error::EntropyCondition {
            what: "fine partition",
            count: cells.count(),
            log_count,
            budget,
        });
    }
    let truth = f.oracle(MetricKind::True);
    for v in 0..m {
        let dv = truth.distance(f.point(v), f.point(cells.center_of(v)))?;
        if dv > r0 * (1.0 + 1e-9) {
            return Err(Error::Internal(format!("cell radius {dv} exceeds eta^2 r = {r0}")));
        }
    }
    let xi: Vec<Vec<f64>> = cells
        .centers
        .iter()
        .map(|&c| (0..n).map(|i| dot(sample.row(i), f.point(c)) - sample.y[i]).collect())
        .collect();
    let product = ProductEstimator::symmetric(levels.clone(), *spec, carrier.clone(), &sample.x, d)?;
    let multiplier = MultiplierEstimator::new(levels.clone(), *spec, carrier.clone(), &sample.x, d, xi)?;
    Ok(FineOracleState {
        r,
        r0,
        sigma_star,
        levels,
        cells,
        class: f.points().clone(),
        metric: oracle.clone(),
        carrier,
        pair_index,
        pair_alpha,
        offset_index,
        product,
        multiplier,
    })
}

/// `Psi_*(u, w, v)` with `u = f_{u.0} - f_{u.1}` and `w = f_{w.0} - f_{w.1}`.
pub fn mixture_estimator(u: (usize, usize), w: (usize, usize), v: usize, state: &FineOracleState) -> Result<f64> {
    Ok(state.mixture_terms(u, w, v)?.total())
}

/// `Psi_L(f, h) = Psi_*(f - h, f - h, h)`, an estimate of `E(f - Y)^2 - E(h - Y)^2`.
pub fn fine_oracle(f: usize, h: usize, state: &FineOracleState) -> Result<f64> {
    mixture_estimator((f, h), (f, h), h, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench_harness::generators::{GroundTruth, NoiseSpec, RegressionModel, ScalarLaw};
    use crate::function_class::CovarianceStructure;
    use rand::SeedableRng;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    const CONSTS: FineConstants = FineConstants { alpha: 2.0, theta: 0.1 };

    fn setup(d: usize, count: usize, n: usize, noise: NoiseSpec, seed: u64) -> (FunctionClass, FineOracleState, GroundTruth, usize) {
        let f = FunctionClass::l1_ball_net(d, count, Arc::new(CovarianceStructure::identity(d))).unwrap();
        let z = count / 3;
        let model = RegressionModel {
            covariance: f.covariance().clone(),
            design: ScalarLaw::Gaussian,
            noise,
            z0: f.point(z).to_vec(),
        };
        let s = model.sample(n, &mut rng(seed)).unwrap();
        let o = f.oracle(MetricKind::Oracle);
        let st = build_fine_oracle(&f, &s, 0.7, 1.0, &o, CONSTS, &EstimatorSpec::default()).unwrap();
        (f, st, model.truth(), z)
    }

    #[test]
    fn self_match_is_exactly_zero() {
        let (f, st, _, _) = setup(2, 25, 2000, NoiseSpec::StudentT { nu: 5.0, sigma: 1.0 }, 1);
        assert_eq!(st.carrier().sequence().root(), 0);
        for i in 0..f.len() {
            assert_eq!(fine_oracle(i, i, &st).unwrap(), 0.0);
        }
    }

    #[test]
    fn term_isolation() {
        let (f, st, _, _) = setup(2, 25, 2000, NoiseSpec::Gaussian { sigma: 1.0 }, 2);
        for a in 0..f.len() {
            // u = 0
            assert_eq!(mixture_estimator((a, a), (1, 3), 4, &st).unwrap(), 0.0);
        }
        let j = 0;
        let vj = st.cells.centers[j];
        for a in 0..f.len() {
            let t = st.mixture_terms((a, 2), (5, 5), vj).unwrap();
            assert_eq!(t.psi1, 0.0);
            assert_eq!(t.psi2, 0.0);
            let m = st.class_len();
            let iu = st.pair_index[a * m + 2] as usize;
            let expect = st.pair_alpha[a * m + 2] / st.r * st.multiplier().estimate(iu, j).unwrap();
            assert_eq!(t.total(), 2.0 * expect);
        }
    }

    #[test]
    fn cells_respect_radius_and_budget() {
        let (f, st, _, _) = setup(3, 60, 2000, NoiseSpec::Gaussian { sigma: 1.0 }, 3);
        let truth = f.oracle(MetricKind::True);
        for v in 0..f.len() {
            let c = st.cells.center_of(v);
            assert!(truth.distance(f.point(v), f.point(c)).unwrap() <= st.r0);
        }
        assert!((st.cells.count() as f64).ln() <= 2f64.powi(st.levels.s0 as i32 - 1));
        assert!(st.levels.s0 < st.levels.s1);
        // 2^{s0} <= theta^2 N min(1, r^2/sigma*^2)
        assert!(2f64.powi(st.levels.s0 as i32) <= 0.01 * 2000.0 * 0.49);
    }

    #[test]
    fn rescaled_elements_stay_inside_r0_ball() {
        let (_, st, _, _) = setup(3, 60, 2000, NoiseSpec::Gaussian { sigma: 1.0 }, 4);
        let o = DistanceOracle::new(Arc::new(CovarianceStructure::identity(3)), MetricKind::True);
        for p in st.carrier().points().rows() {
            assert!(o.norm(p) <= st.r0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn homogeneity_of_rescaling() {
        let (f, st, _, _) = setup(2, 25, 2000, NoiseSpec::Gaussian { sigma: 1.0 }, 5);
        let mut checked = 0;
        for a in 0..f.len() {
            for b in [0usize, 7] {
                if a == b {
                    continue;
                }
                let u: Vec<f64> = f.point(a).iter().zip(f.point(b)).map(|(x, y)| x - y).collect();
                let w: Vec<f64> = f.point(b).iter().zip(f.point(3)).map(|(x, y)| x - y).collect();
                if st.alpha_of(&u) <= st.r {
                    continue;
                }
                let base = st.psi1_vec(&u, &w).unwrap();
                for scale in [1.5, 2.0, 4.0, 8.0] {
                    let au: Vec<f64> = u.iter().map(|x| scale * x).collect();
                    let got = st.psi1_vec(&au, &w).unwrap();
                    assert!((got - scale * base).abs() <= 1e-12 * (scale * base).abs().max(1e-300), "{got} {base}");
                }
                checked += 1;
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn noiseless_sign_is_correct_far_from_target() {
        let mut right = 0;
        let mut total = 0;
        for seed in 0..20 {
            let (f, st, truth, z) = setup(2, 25, 2000, NoiseSpec::None, 100 + seed);
            for a in 0..f.len() {
                if truth.risk(f.point(a)) - truth.noise_variance >= st.r * st.r {
                    total += 1;
                    if fine_oracle(a, z, &st).unwrap() > 0.0 {
                        right += 1;
                    }
                }
            }
        }
        assert!(right as f64 >= 0.95 * total as f64, "{right}/{total}");
    }

    #[test]
    fn mixture_tracks_closed_form() {
        let (f, st, truth, _) = setup(2, 25, 2000, NoiseSpec::StudentT { nu: 5.0, sigma: 1.0 }, 6);
        let mut worst = 0.0f64;
        for a in 0..f.len() {
            for b in 0..f.len() {
                let u: Vec<f64> = f.point(a).iter().zip(f.point(b)).map(|(x, y)| x - y).collect();
                let est = fine_oracle(a, b, &st).unwrap();
                let exact = truth.mixture_truth(&u, &u, f.point(b));
                let band = 0.5 * (st.r * st.r).max(dot(&u, &u));
                worst = worst.max((est - exact).abs() / band);
            }
        }
        assert!(worst <= 1.0, "{worst}");
    }
}
