//! Empirical risk minimization over a finite class.

use crate::bench_harness::generators::LabeledSample;
use crate::error::{Error, Result};
use crate::function_class::{dot, FunctionClass};

/// Mean squared residual of class member `i` on `sample`.
pub fn empirical_risk(f: &FunctionClass, i: usize, sample: &LabeledSample) -> f64 {
    let t = f.point(i);
    let s: f64 = (0..sample.len())
        .map(|k| {
            let e = dot(sample.row(k), t) - sample.y[k];
            e * e
        })
        .sum();
    s / sample.len() as f64
}

/// Argmin of the empirical risk on the full sample, smallest label on ties.
pub fn erm_baseline(f: &FunctionClass, sample: &LabeledSample) -> Result<usize> {
    if sample.is_empty() {
        return Err(Error::Empty("sample"));
    }
    if sample.dim != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: sample.dim,
        });
    }
    let mut best = 0;
    let mut br = f64::INFINITY;
    for i in 0..f.len() {
        let r = empirical_risk(f, i, sample);
        if r < br {
            br = r;
            best = i;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench_harness::generators::{NoiseSpec, RegressionModel, ScalarLaw};
    use crate::function_class::{CovarianceStructure, PointSet};
    use rand::SeedableRng;
    use std::sync::Arc;

    fn net() -> FunctionClass {
        FunctionClass::l1_ball_net(3, 60, Arc::new(CovarianceStructure::identity(3))).unwrap()
    }

    fn sample(f: &FunctionClass, z: usize, noise: NoiseSpec, n: usize, seed: u64) -> LabeledSample {
        RegressionModel {
            covariance: f.covariance().clone(),
            design: ScalarLaw::Gaussian,
            noise,
            z0: f.point(z).to_vec(),
        }
        .sample(n, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed))
        .unwrap()
    }

    #[test]
    fn singleton_class() {
        let f = FunctionClass::new(PointSet::new(3, vec![0.1, 0.2, 0.3]).unwrap(), Arc::new(CovarianceStructure::identity(3))).unwrap();
        let s = sample(&f, 0, NoiseSpec::Gaussian { sigma: 1.0 }, 10, 1);
        assert_eq!(erm_baseline(&f, &s).unwrap(), 0);
    }

    #[test]
    fn noiseless_recovers_target() {
        let f = net();
        for z in [0, 7, 33, 59] {
            let s = sample(&f, z, NoiseSpec::None, 50, z as u64);
            assert_eq!(empirical_risk(&f, z, &s), 0.0);
            assert_eq!(erm_baseline(&f, &s).unwrap(), z);
        }
    }

    #[test]
    fn ties_go_to_smaller_label() {
        let pts = PointSet::new(1, vec![1.0, -1.0]).unwrap();
        let f = FunctionClass::new(pts, Arc::new(CovarianceStructure::identity(1))).unwrap();
        let s = LabeledSample { dim: 1, x: vec![1.0, -1.0], y: vec![0.0, 0.0] };
        assert_eq!(erm_baseline(&f, &s).unwrap(), 0);
    }

    #[test]
    fn empty_sample_is_an_error() {
        let f = net();
        let s = LabeledSample { dim: 3, x: vec![], y: vec![] };
        assert!(erm_baseline(&f, &s).is_err());
    }
}
