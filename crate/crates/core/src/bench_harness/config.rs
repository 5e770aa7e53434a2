//! Experiment configuration, read from JSON or TOML.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bench_harness::generators::{NoiseSpec, RegressionModel, ScalarLaw};
use crate::error::{Error, Result};
use crate::function_class::{ClassFile, CovarianceStructure, FunctionClass, MetricKind};
use crate::mean_estimators::EstimatorSpec;
use crate::risk_oracles::{CrudeConstants, FineConstants};
use crate::rng::rng_from;
use crate::tournament::{LearnConfig, Preflight, SelectionRule};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassSpec {
    /// Greedy net of `count` points in the unit l1 ball.
    L1BallNet { dim: usize, count: usize },
    /// A class file; relative paths resolve against the config file.
    File { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Constants {
    /// Fixed points are solved at this kappa.
    pub kappa: f64,
    /// Crude packing scale; `None` gives `1 / (eta^2 sqrt(90))`.
    pub gamma: Option<f64>,
    pub theta: f64,
    pub alpha: f64,
    /// Preflight factor in `r > c0 max(r*, lambda*)`.
    pub c0: f64,
    /// Preflight kappa.
    pub c1: f64,
    /// Boundary refinement depth for localized sets in complexity diagnostics.
    pub grid_depth: u32,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            kappa: 0.25,
            gamma: None,
            theta: 0.1,
            alpha: 2.0,
            c0: Preflight::DEFAULT_C0,
            c1: Preflight::DEFAULT_C1,
            grid_depth: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub class: ClassSpec,
    /// Law of the i.i.d. coordinates before coloring by `Sigma_X`.
    pub design: ScalarLaw,
    pub noise: NoiseSpec,
    /// Row-major `Sigma_X`; identity when absent. Ignored for class files.
    pub sigma_x: Option<Vec<f64>>,
    /// Oracle distortion; `eta > 1` draws a random oracle matrix from the master seed.
    pub eta: f64,
    pub z0: Vec<f64>,
    /// Replace `z0` by the nearest class member so that `f*` is realizable.
    pub snap_z0: bool,
    /// Sample size of each half; every trial draws `2 n` rows.
    pub n: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub estimator: EstimatorSpec,
    pub constants: Constants,
    /// Fixed radius; `None` solves `c0 * max(r*, lambda*)`.
    pub r: Option<f64>,
    pub selection: SelectionRule,
    pub split: f64,
    pub workers: usize,
    /// Monte-Carlo draws and grid density for the complexity subreport.
    pub complexity_mc: usize,
    pub per_decade: usize,
    /// `L` in `||f - Y||_{L4} <= L ||f - Y||_{L2}`.
    pub l4_constant: f64,
    pub require_l4: bool,
    pub dump_oracles: bool,
    pub out_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            class: ClassSpec::L1BallNet { dim: 4, count: 200 },
            design: ScalarLaw::Gaussian,
            noise: NoiseSpec::StudentT { nu: 5.0, sigma: 1.0 },
            sigma_x: None,
            eta: 1.0,
            z0: vec![0.3, -0.2, 0.1, 0.25],
            snap_z0: true,
            n: 2000,
            trials: 200,
            master_seed: 20_240_601,
            estimator: EstimatorSpec::default(),
            constants: Constants::default(),
            r: None,
            selection: SelectionRule::default(),
            split: 0.5,
            workers: 1,
            complexity_mc: 2000,
            per_decade: 50,
            l4_constant: 2.0,
            require_l4: true,
            dump_oracles: false,
            out_dir: None,
        }
    }
}

const ORACLE_TAG: u64 = 0x0AC1E;

impl ExperimentConfig {
    /// Parses by extension (`.toml` is TOML, anything else JSON).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Json {
                path: path.to_path_buf(),
                source: e,
            })?
        };
        if let ClassSpec::File { path: p } = &mut cfg.class {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        let c = &self.constants;
        let positive = [
            ("kappa", c.kappa),
            ("theta", c.theta),
            ("alpha", c.alpha),
            ("c0", c.c0),
            ("c1", c.c1),
            ("l4_constant", self.l4_constant),
            ("eta", self.eta),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        if let Some(g) = c.gamma {
            if !(g > 0.0) {
                return Err(Error::Config(format!("gamma = {g} must be positive")));
            }
        }
        if self.eta < 1.0 {
            return Err(Error::Config(format!("eta = {} must be at least 1", self.eta)));
        }
        if let Some(r) = self.r {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::Config(format!("r = {r} must be positive")));
            }
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Config(format!("split = {} not in (0, 1)", self.split)));
        }
        if self.complexity_mc < 2 || self.per_decade == 0 {
            return Err(Error::Config("complexity_mc >= 2 and per_decade >= 1 required".into()));
        }
        self.design.validate()?;
        self.noise.validate()?;
        self.estimator.validate()?;
        if self.require_l4 {
            let noise_l4 = self.noise.law().is_none_or(|(l, _)| l.has_l4());
            if !self.design.has_l4() || !noise_l4 {
                return Err(Error::Config(
                    "student t laws need nu > 4 for finite fourth moments (set require_l4 = false to override)".into(),
                ));
            }
        }
        match &self.class {
            ClassSpec::L1BallNet { dim, count } => {
                if *dim == 0 || *count == 0 {
                    return Err(Error::Config("l1 net needs dim >= 1 and count >= 1".into()));
                }
                if self.z0.len() != *dim {
                    return Err(Error::Config(format!("z0 has {} coordinates, class dim is {dim}", self.z0.len())));
                }
                if let Some(s) = &self.sigma_x {
                    if s.len() != dim * dim {
                        return Err(Error::Config(format!("sigma_x needs {} entries", dim * dim)));
                    }
                }
            }
            ClassSpec::File { .. } => {}
        }
        Ok(())
    }

    /// The function class with its covariance structure.
    pub fn build_class(&self) -> Result<FunctionClass> {
        match &self.class {
            ClassSpec::File { path } => ClassFile::load(path)?.into_class(),
            ClassSpec::L1BallNet { dim, count } => {
                let d = *dim;
                let sigma = self.sigma_x.clone().unwrap_or_else(|| {
                    let mut m = vec![0.0; d * d];
                    for i in 0..d {
                        m[i * d + i] = 1.0;
                    }
                    m
                });
                let cov = if self.eta > 1.0 {
                    let mut rng = rng_from(self.master_seed, &[ORACLE_TAG]);
                    CovarianceStructure::with_random_oracle(d, sigma, self.eta, &mut rng)?
                } else {
                    CovarianceStructure::exact(d, sigma)?
                };
                FunctionClass::l1_ball_net(d, *count, Arc::new(cov))
            }
        }
    }

    /// Regression model on `f`, with `z0` snapped to the class when requested.
    pub fn build_model(&self, f: &FunctionClass) -> Result<RegressionModel> {
        if self.z0.len() != f.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.dim(),
                got: self.z0.len(),
            });
        }
        let z0 = if self.snap_z0 {
            let o = f.oracle(MetricKind::True);
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for i in 0..f.len() {
                let d = o.distance(f.point(i), &self.z0)?;
                if d < bd {
                    bd = d;
                    best = i;
                }
            }
            f.point(best).to_vec()
        } else {
            self.z0.clone()
        };
        let model = RegressionModel {
            covariance: f.covariance().clone(),
            design: self.design,
            noise: self.noise,
            z0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn learn_config(&self, eta: f64, preflight: Option<Preflight>) -> LearnConfig {
        let c = &self.constants;
        LearnConfig {
            crude: CrudeConstants {
                gamma: c.gamma.unwrap_or_else(|| CrudeConstants::default_gamma(eta)),
                theta: c.theta,
            },
            fine: FineConstants {
                alpha: c.alpha,
                theta: c.theta,
            },
            estimator: self.estimator,
            split: self.split,
            selection: self.selection,
            workers: 1,
            preflight,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_snaps_into_class() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let f = cfg.build_class().unwrap();
        assert_eq!(f.len(), 200);
        let m = cfg.build_model(&f).unwrap();
        assert!((0..f.len()).any(|i| f.point(i) == m.z0.as_slice()));
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            ExperimentConfig { trials: 0, ..Default::default() },
            ExperimentConfig {
                constants: Constants { theta: 0.0, ..Default::default() },
                ..Default::default()
            },
            ExperimentConfig {
                noise: NoiseSpec::StudentT { nu: 3.0, sigma: 1.0 },
                ..Default::default()
            },
            ExperimentConfig { z0: vec![0.0; 3], ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        let ok = ExperimentConfig {
            noise: NoiseSpec::StudentT { nu: 3.0, sigma: 1.0 },
            require_l4: false,
            ..Default::default()
        };
        ok.validate().unwrap();
    }

    #[test]
    fn json_and_toml_agree() {
        let dir = tempfile::tempdir().unwrap();
        let json = dir.path().join("c.json");
        let toml_path = dir.path().join("c.toml");
        std::fs::write(
            &json,
            r#"{"class": {"kind": "l1_ball_net", "dim": 2, "count": 20}, "z0": [0.1, 0.2],
                "noise": {"kind": "appendix_b", "k": 100, "sigma": 0.5}, "trials": 3, "n": 500}"#,
        )
        .unwrap();
        std::fs::write(
            &toml_path,
            "z0 = [0.1, 0.2]\ntrials = 3\nn = 500\n[class]\nkind = \"l1_ball_net\"\ndim = 2\ncount = 20\n[noise]\nkind = \"appendix_b\"\nk = 100\nsigma = 0.5\n",
        )
        .unwrap();
        let a = ExperimentConfig::load(&json).unwrap();
        let b = ExperimentConfig::load(&toml_path).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.noise, NoiseSpec::AppendixB { k: 100, sigma: 0.5 });
        assert_eq!(a.constants, Constants::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"trails": 3}"#).unwrap();
        assert!(ExperimentConfig::load(&p).is_err());
    }

    #[test]
    fn class_file_paths_resolve_next_to_config() {
        let dir = tempfile::tempdir().unwrap();
        let f = FunctionClass::l1_ball_net(2, 5, Arc::new(CovarianceStructure::identity(2))).unwrap();
        std::fs::write(dir.path().join("f.json"), serde_json::to_string(&ClassFile::from_class(&f)).unwrap()).unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"class": {"kind": "file", "path": "f.json"}, "z0": [0.0, 0.0]}"#).unwrap();
        let cfg = ExperimentConfig::load(&p).unwrap();
        assert_eq!(cfg.build_class().unwrap().len(), 5);
    }
}
