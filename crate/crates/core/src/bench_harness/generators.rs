//! Synthetic regression data: `Y = <X, z0> + w` with light- or heavy-tailed coordinates.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_class::{dot, CovarianceStructure};

/// Normalizing constant `sqrt(1 - 1/k + k^{-1/2})` of the two-point heavy-tailed scalar.
pub fn appendix_b_c0(k: u64) -> f64 {
    let k = k as f64;
    (1.0 - 1.0 / k + k.powf(-0.5)).sqrt()
}

/// Symmetric scalar with magnitude `k^{1/4}` w.p. `1/k` and `1` otherwise, scaled to unit variance.
pub fn sample_appendix_b_scalar<R: Rng + ?Sized>(k: u64, rng: &mut R) -> Result<f64> {
    if k < 2 {
        return Err(Error::invalid("k", format!("{k} < 2")));
    }
    Ok(appendix_b_unchecked(k, appendix_b_c0(k), (k as f64).powf(0.25), rng))
}

#[inline]
fn appendix_b_unchecked<R: Rng + ?Sized>(k: u64, c0: f64, big: f64, rng: &mut R) -> f64 {
    let mag = if rng.random_range(0..k) == 0 { big } else { 1.0 };
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    sign * mag / c0
}

/// Distribution of a unit-variance scalar.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarLaw {
    Gaussian,
    AppendixB { k: u64 },
    /// Student t rescaled to unit variance (requires `nu > 2`).
    StudentT { nu: f64 },
    Rademacher,
}

impl ScalarLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ScalarLaw::AppendixB { k } if k < 2 => Err(Error::invalid("k", format!("{k} < 2"))),
            ScalarLaw::StudentT { nu } if !(nu > 2.0) => {
                Err(Error::invalid("nu", format!("{nu} must exceed 2")))
            }
            _ => Ok(()),
        }
    }

    /// Whether the law has a finite fourth moment.
    pub fn has_l4(&self) -> bool {
        !matches!(*self, ScalarLaw::StudentT { nu } if nu <= 4.0)
    }

    /// `E x^4` for the unit-variance law, `None` when infinite.
    pub fn fourth_moment(&self) -> Option<f64> {
        match *self {
            ScalarLaw::Gaussian => Some(3.0),
            ScalarLaw::Rademacher => Some(1.0),
            ScalarLaw::AppendixB { k } => {
                let kf = k as f64;
                let c0 = appendix_b_c0(k);
                Some((1.0 - 1.0 / kf + 1.0) / c0.powi(4))
            }
            ScalarLaw::StudentT { nu } if nu > 4.0 => Some(3.0 * (nu - 2.0) / (nu - 4.0)),
            ScalarLaw::StudentT { .. } => None,
        }
    }

    pub fn sampler(&self) -> Result<ScalarSampler> {
        self.validate()?;
        Ok(match *self {
            ScalarLaw::Gaussian => ScalarSampler::Gaussian,
            ScalarLaw::Rademacher => ScalarSampler::Rademacher,
            ScalarLaw::AppendixB { k } => ScalarSampler::AppendixB {
                k,
                c0: appendix_b_c0(k),
                big: (k as f64).powf(0.25),
            },
            ScalarLaw::StudentT { nu } => ScalarSampler::StudentT {
                dist: StudentT::new(nu).map_err(|e| Error::invalid("nu", e.to_string()))?,
                scale: ((nu - 2.0) / nu).sqrt(),
            },
        })
    }
}

/// Prepared sampler for a [`ScalarLaw`].
#[derive(Clone, Copy, Debug)]
pub enum ScalarSampler {
    Gaussian,
    Rademacher,
    AppendixB { k: u64, c0: f64, big: f64 },
    StudentT { dist: StudentT<f64>, scale: f64 },
}

impl ScalarSampler {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ScalarSampler::Gaussian => StandardNormal.sample(rng),
            ScalarSampler::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            ScalarSampler::AppendixB { k, c0, big } => appendix_b_unchecked(*k, *c0, *big, rng),
            ScalarSampler::StudentT { dist, scale } => dist.sample(rng) * scale,
        }
    }
}

/// Additive noise `w`, independent of X.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    None,
    Gaussian { sigma: f64 },
    AppendixB { k: u64, sigma: f64 },
    StudentT { nu: f64, sigma: f64 },
}

impl NoiseSpec {
    pub fn law(&self) -> Option<(ScalarLaw, f64)> {
        match *self {
            NoiseSpec::None => None,
            NoiseSpec::Gaussian { sigma } => Some((ScalarLaw::Gaussian, sigma)),
            NoiseSpec::AppendixB { k, sigma } => Some((ScalarLaw::AppendixB { k }, sigma)),
            NoiseSpec::StudentT { nu, sigma } => Some((ScalarLaw::StudentT { nu }, sigma)),
        }
    }

    pub fn sigma(&self) -> f64 {
        self.law().map_or(0.0, |(_, s)| s)
    }

    pub fn variance(&self) -> f64 {
        self.sigma().powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((law, sigma)) = self.law() {
            law.validate()?;
            if !(sigma >= 0.0) || !sigma.is_finite() {
                return Err(Error::invalid("noise sigma", format!("{sigma}")));
            }
        }
        Ok(())
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        match self {
            NoiseSpec::None => NoiseSpec::Gaussian { sigma },
            NoiseSpec::Gaussian { .. } => NoiseSpec::Gaussian { sigma },
            NoiseSpec::AppendixB { k, .. } => NoiseSpec::AppendixB { k, sigma },
            NoiseSpec::StudentT { nu, .. } => NoiseSpec::StudentT { nu, sigma },
        }
    }
}

/// Observed pairs, row-major X.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub dim: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl LabeledSample {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> LabeledSample {
        LabeledSample {
            dim: self.dim,
            x: self.x[range.start * self.dim..range.end * self.dim].to_vec(),
            y: self.y[range].to_vec(),
        }
    }

    /// First `round(fraction * n)` rows and the rest.
    pub fn split(&self, fraction: f64) -> (LabeledSample, LabeledSample) {
        let n = self.len();
        let cut = ((fraction * n as f64).round() as usize).clamp(0, n);
        (self.slice(0..cut), self.slice(cut..n))
    }

    pub fn halves(&self) -> (LabeledSample, LabeledSample) {
        self.split(0.5)
    }
}

/// Truth needed for closed-form risks.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub z0: Vec<f64>,
    pub covariance: Arc<CovarianceStructure>,
    pub noise_variance: f64,
}

impl GroundTruth {
    /// `E(<X,t> - Y)^2 = <Sigma (t - z0), t - z0> + sigma_w^2`.
    pub fn risk(&self, t: &[f64]) -> f64 {
        let diff: Vec<f64> = t.iter().zip(&self.z0).map(|(a, b)| a - b).collect();
        self.covariance
            .quadratic(crate::function_class::MetricKind::True, &diff)
            .max(0.0)
            + self.noise_variance
    }

    /// `E u(X) (w(X) + 2 (v(X) - Y))` for linear u, w, v.
    pub fn mixture_truth(&self, u: &[f64], w: &[f64], v: &[f64]) -> f64 {
        let d = u.len();
        let s = self.covariance.sigma_true();
        let su: Vec<f64> = (0..d).map(|i| dot(&s[i * d..(i + 1) * d], u)).collect();
        let vz: Vec<f64> = v.iter().zip(&self.z0).map(|(a, b)| 2.0 * (a - b)).collect();
        dot(&su, w) + dot(&su, &vz)
    }
}

/// The regression model of a testbed.
#[derive(Clone, Debug)]
pub struct RegressionModel {
    pub covariance: Arc<CovarianceStructure>,
    pub design: ScalarLaw,
    pub noise: NoiseSpec,
    pub z0: Vec<f64>,
}

impl RegressionModel {
    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        self.noise.validate()?;
        if self.z0.len() != self.covariance.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.covariance.dim(),
                got: self.z0.len(),
            });
        }
        Ok(())
    }

    pub fn truth(&self) -> GroundTruth {
        GroundTruth {
            z0: self.z0.clone(),
            covariance: self.covariance.clone(),
            noise_variance: self.noise.variance(),
        }
    }

    /// Draws `n` i.i.d. rows.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<LabeledSample> {
        self.validate()?;
        let d = self.covariance.dim();
        let xs = self.design.sampler()?;
        let ws = match self.noise.law() {
            Some((law, sigma)) => Some((law.sampler()?, sigma)),
            None => None,
        };
        let mut x = vec![0.0; n * d];
        let mut y = vec![0.0; n];
        let mut z = vec![0.0; d];
        for i in 0..n {
            for zk in z.iter_mut() {
                *zk = xs.sample(rng);
            }
            let row = &mut x[i * d..(i + 1) * d];
            self.covariance.color(&z, row);
            let mut yi = dot(row, &self.z0);
            if let Some((s, sigma)) = &ws {
                yi += sigma * s.sample(rng);
            }
            y[i] = yi;
        }
        Ok(LabeledSample { dim: d, x, y })
    }
}
