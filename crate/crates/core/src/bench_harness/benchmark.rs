//! End-to-end benchmark: fixed points, repeated tournament and ERM trials, and
//! the result files.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bench_harness::config::ExperimentConfig;
use crate::bench_harness::erm::erm_baseline;
use crate::bench_harness::generators::{GroundTruth, LabeledSample, RegressionModel};
use crate::bench_harness::plots::plot_error_cdfs;
use crate::chaining::{
    complexity_report, solve_fixed_point, ComplexityOptions, ComplexityReport, FixedPoint, FixedPointKind,
    FixedPointParams, McOptions,
};
use crate::error::{Error, Result};
use crate::function_class::{difference_class, dot, localize, FunctionClass, MetricKind};
use crate::risk_oracles::CrudeOracleOutput;
use crate::rng::{derive_seed, rng_from, run_chunks};
use crate::tournament::{class_minimizer, evaluate, learn, Diagnostics, LearnConfig, MatchMatrix, Preflight, TournamentOutcome};

const TRIAL_TAG: u64 = 0x7121A1;
const COMPLEXITY_TAG: u64 = 0xC0DE;
const MOMENT_TAG: u64 = 0x4D0;

/// Class, data model and closed-form truth of one configuration.
#[derive(Clone, Debug)]
pub struct Testbed {
    pub class: FunctionClass,
    pub model: RegressionModel,
    pub truth: GroundTruth,
    pub f_star: usize,
    /// True risk of every class member.
    pub risks: Vec<f64>,
    /// `||f* - Y||_{L2}`.
    pub sigma: f64,
}

impl Testbed {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let class = cfg.build_class()?;
        let model = cfg.build_model(&class)?;
        Ok(Self::new(class, model))
    }

    pub fn new(class: FunctionClass, model: RegressionModel) -> Self {
        let truth = model.truth();
        let risks: Vec<f64> = (0..class.len()).map(|i| truth.risk(class.point(i))).collect();
        let f_star = class_minimizer(&class, &truth);
        let sigma = risks[f_star].max(0.0).sqrt();
        Testbed {
            class,
            model,
            truth,
            f_star,
            risks,
            sigma,
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<LabeledSample> {
        let mut rng = rng_from(seed, &[]);
        self.model.sample(n, &mut rng)
    }

    pub fn eta(&self) -> f64 {
        self.class.covariance().eta()
    }
}

/// Seed of trial `t`; independent of the worker count.
pub fn trial_seed(master: u64, t: usize) -> u64 {
    derive_seed(master, &[TRIAL_TAG, t as u64])
}

/// `|Psi_C(f) - R(f)| <= max(r^2, R(f)) / 2` for every class member.
pub fn crude_event(tb: &Testbed, crude: &CrudeOracleOutput, r: f64) -> bool {
    crude
        .psi_c
        .iter()
        .zip(&tb.risks)
        .all(|(&p, &rf)| (p - rf).abs() <= 0.5 * (r * r).max(rf))
}

/// `|Psi_L(f, h) - (R(f) - R(h))| <= max(r^2, ||f - h||^2) / 2` over all pairs of `V_hat`.
pub fn fine_event(tb: &Testbed, matches: &MatchMatrix, r: f64) -> bool {
    let m = matches.len();
    let o = tb.class.oracle(MetricKind::True);
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            let (f, h) = (matches.members[a], matches.members[b]);
            let truth = tb.risks[f] - tb.risks[h];
            let d2 = o.norm(&crate::function_class::sub(tb.class.point(f), tb.class.point(h))).powi(2);
            if (matches.psi_at(a, b) - truth).abs() > 0.5 * (r * r).max(d2) {
                return false;
            }
        }
    }
    true
}

/// Inside the joint event: `f*` is an all-home-winner and every winner is
/// within `eta^2 r` of `f*` with excess risk at most `eta^4 r^2`.
pub fn joint_event_invariant(tb: &Testbed, v_star: &[usize], r: f64) -> bool {
    let eta = tb.eta();
    v_star.contains(&tb.f_star)
        && v_star.iter().all(|&h| {
            let d = evaluate(&tb.class, &tb.truth, h);
            d.error_l2 < eta * eta * r && d.excess_risk <= eta.powi(4) * r * r
        })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub seed: u64,
    pub selected: Option<usize>,
    pub tournament: Option<Diagnostics>,
    pub erm_selected: usize,
    pub erm: Diagnostics,
    pub v_hat_size: usize,
    pub v_star_size: usize,
    pub crude_event: bool,
    pub fine_event: bool,
    /// `||f_hat - f*|| <= r` and excess risk `<= eta^4 r^2`.
    pub success: bool,
    pub erm_success: bool,
    /// Checked only inside the joint event.
    pub invariant_ok: Option<bool>,
    pub sigma_hat: f64,
}

pub fn run_trial(
    tb: &Testbed,
    r: f64,
    lc: &LearnConfig,
    n: usize,
    trial_id: usize,
    seed: u64,
) -> Result<(TrialRecord, TournamentOutcome)> {
    let sample = tb.sample(2 * n, seed)?;
    let out = learn(&tb.class, &sample, r, lc)?;
    let eta = tb.eta();
    let ok = |d: &Diagnostics| d.error_l2 <= r && d.excess_risk <= eta.powi(4) * r * r;
    let tournament = out.diagnostics(&tb.class, &tb.truth);
    let erm_selected = erm_baseline(&tb.class, &sample)?;
    let erm = evaluate(&tb.class, &tb.truth, erm_selected);
    let ce = crude_event(tb, &out.crude, r);
    let fe = fine_event(tb, &out.matches, r);
    let rec = TrialRecord {
        trial_id,
        seed,
        selected: out.selected,
        tournament,
        erm_selected,
        erm,
        v_hat_size: out.v_hat().len(),
        v_star_size: out.v_star.len(),
        crude_event: ce,
        fine_event: fe,
        success: tournament.as_ref().is_some_and(ok),
        erm_success: ok(&erm),
        invariant_ok: (ce && fe).then(|| joint_event_invariant(tb, &out.v_star, r)),
        sigma_hat: out.sigma_hat,
    };
    Ok((rec, out))
}

/// Radius used by the learner and where it came from.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadiusChoice {
    pub r: f64,
    pub solved: bool,
    pub r_star: Option<f64>,
    pub lambda_star: Option<f64>,
    pub fixed_points: Vec<FixedPoint>,
    pub preflight: Option<Preflight>,
}

/// Complexity subreport on the testbed at the configured kappa.
pub fn complexity_for(tb: &Testbed, cfg: &ExperimentConfig) -> Result<ComplexityReport> {
    // sigma = 0 is the limit in which the noise-dependent conditions always hold
    let sigma = tb.sigma.max(f64::MIN_POSITIVE);
    let mut mc = McOptions::new(cfg.complexity_mc, derive_seed(cfg.master_seed, &[COMPLEXITY_TAG]));
    mc.workers = cfg.workers;
    let opts = ComplexityOptions {
        kappa: cfg.constants.kappa,
        n: cfg.n,
        sigma: Some(sigma),
        per_decade: cfg.per_decade,
        gaussian: mc,
        ..Default::default()
    };
    complexity_report(&tb.class, &opts)
}

pub fn choose_radius(report: &ComplexityReport, cfg: &ExperimentConfig) -> Result<RadiusChoice> {
    let r_star = report.r_star;
    let lambda_star = report.value(FixedPointKind::Lambda);
    let c = &cfg.constants;
    let preflight = if (c.c1 - report.kappa).abs() <= f64::EPSILON * c.c1 {
        match (r_star, lambda_star) {
            (Some(r), Some(l)) => Some(Preflight {
                r_star: r,
                lambda_star: l,
                c0: c.c0,
                c1: c.c1,
            }),
            _ => None,
        }
    } else {
        let params = FixedPointParams {
            kappa: c.c1,
            n: report.n,
            sigma: report.sigma,
        };
        let solve = |k| solve_fixed_point(k, &report.curves, &params).map(|f| f.value);
        Some(Preflight {
            r_star: solve(FixedPointKind::RQ)?.max(solve(FixedPointKind::RM)?),
            lambda_star: solve(FixedPointKind::Lambda)?,
            c0: c.c0,
            c1: c.c1,
        })
    };
    let (r, solved) = match cfg.r {
        Some(r) => (r, false),
        None => {
            let (rs, ls) = r_star
                .zip(lambda_star)
                .ok_or_else(|| Error::Internal("fixed points r* and lambda* were not solved".into()))?;
            (c.c0 * rs.max(ls), true)
        }
    };
    Ok(RadiusChoice {
        r,
        solved,
        r_star,
        lambda_star,
        fixed_points: report.fixed_points.clone(),
        preflight,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub p95: f64,
    pub max: f64,
}

/// Linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi || sorted[hi] == sorted[lo] {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Quantiles {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            p50: quantile(&v, 0.5),
            p90: quantile(&v, 0.9),
            p95: quantile(&v, 0.95),
            max: *v.last().unwrap_or(&f64::NAN),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    /// Trials without a selection count as infinite error.
    pub error_l2: Quantiles,
    pub excess_risk: Quantiles,
    pub success_frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub draws: usize,
    pub design_variance: f64,
    pub design_variance_ok: bool,
    pub noise_variance: Option<f64>,
    pub noise_variance_ok: bool,
    /// Largest empirical `||f - Y||_{L4} / ||f - Y||_{L2}` over the class.
    pub max_l4_ratio: f64,
    pub l4_constant: f64,
    pub l4_ok: bool,
}

/// Empirical variance of unit-variance draws, and whether it is within 5 stderr of 1.
fn variance_check(x: &[f64]) -> (f64, bool) {
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| v * v).sum::<f64>() / n;
    let m4 = x.iter().map(|v| v.powi(4)).sum::<f64>() / n;
    let se = ((m4 - m2 * m2).max(0.0) / n).sqrt();
    (m2, (m2 - 1.0).abs() <= 5.0 * se.max(f64::EPSILON))
}

pub fn moment_check(tb: &Testbed, cfg: &ExperimentConfig) -> Result<MomentCheck> {
    let draws = (2 * cfg.n).max(20_000);
    let mut rng = rng_from(cfg.master_seed, &[MOMENT_TAG]);
    let xs = tb.model.design.sampler()?;
    let design: Vec<f64> = (0..draws).map(|_| xs.sample(&mut rng)).collect();
    let (design_variance, design_variance_ok) = variance_check(&design);
    let (noise_variance, noise_variance_ok) = match tb.model.noise.law() {
        Some((law, _)) => {
            let s = law.sampler()?;
            let w: Vec<f64> = (0..draws).map(|_| s.sample(&mut rng)).collect();
            let (v, ok) = variance_check(&w);
            (Some(v), ok)
        }
        None => (None, true),
    };
    let sample = tb.model.sample(draws, &mut rng)?;
    let mut max_l4_ratio: f64 = 0.0;
    for i in 0..tb.class.len() {
        let t = tb.class.point(i);
        let (mut m2, mut m4) = (0.0, 0.0);
        for k in 0..sample.len() {
            let e = dot(sample.row(k), t) - sample.y[k];
            m2 += e * e;
            m4 += e.powi(4);
        }
        if m2 > 0.0 {
            let n = sample.len() as f64;
            max_l4_ratio = max_l4_ratio.max((m4 / n).powf(0.25) / (m2 / n).sqrt());
        }
    }
    Ok(MomentCheck {
        draws,
        design_variance,
        design_variance_ok,
        noise_variance,
        noise_variance_ok,
        max_l4_ratio,
        l4_constant: cfg.l4_constant,
        l4_ok: max_l4_ratio <= cfg.l4_constant,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnionBound {
    pub failure_frequency: f64,
    pub crude_failure_frequency: f64,
    pub fine_failure_frequency: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub config: ExperimentConfig,
    pub trials: usize,
    pub radius: RadiusChoice,
    pub eta: f64,
    pub f_star: usize,
    pub sigma: f64,
    pub class_size: usize,
    /// Size of the localized difference class at `r`.
    pub localized_size: usize,
    pub tournament: MethodSummary,
    pub erm: MethodSummary,
    pub empty_v_star: usize,
    pub v_hat_mean: f64,
    pub v_star_mean: f64,
    pub crude_event_frequency: f64,
    pub fine_event_frequency: f64,
    pub joint_event_frequency: f64,
    pub invariant_violations: usize,
    pub union_bound: UnionBound,
    pub moments: MomentCheck,
    pub wall_clock_seconds: f64,
}

fn frequency(records: &[TrialRecord], pred: impl Fn(&TrialRecord) -> bool) -> f64 {
    records.iter().filter(|r| pred(r)).count() as f64 / records.len() as f64
}

fn method_summary(records: &[TrialRecord], pick: impl Fn(&TrialRecord) -> (Option<Diagnostics>, bool)) -> MethodSummary {
    let (errs, excess): (Vec<f64>, Vec<f64>) = records
        .iter()
        .map(|r| match pick(r).0 {
            Some(d) => (d.error_l2, d.excess_risk),
            None => (f64::INFINITY, f64::INFINITY),
        })
        .unzip();
    MethodSummary {
        error_l2: Quantiles::of(&errs),
        excess_risk: Quantiles::of(&excess),
        success_frequency: frequency(records, |r| pick(r).1),
    }
}

/// Everything a benchmark run produced, before it is written out.
#[derive(Clone, Debug)]
pub struct BenchmarkRun {
    pub summary: BenchmarkSummary,
    pub records: Vec<TrialRecord>,
    pub complexity: ComplexityReport,
    /// Crude values and match matrices, when requested.
    pub oracles: Vec<(Vec<f64>, MatchMatrix)>,
}

pub fn run_trials(
    tb: &Testbed,
    cfg: &ExperimentConfig,
    r: f64,
    lc: &LearnConfig,
    keep_oracles: bool,
) -> Result<(Vec<TrialRecord>, Vec<(Vec<f64>, MatchMatrix)>)> {
    let parts = run_chunks(cfg.trials, cfg.workers, |_, range| -> Result<Vec<_>> {
        range
            .map(|t| {
                let seed = trial_seed(cfg.master_seed, t);
                let (rec, out) = run_trial(tb, r, lc, cfg.n, t, seed).map_err(|e| {
                    log::error!("trial {t} (seed {seed}) failed: {e}");
                    e
                })?;
                Ok((rec, keep_oracles.then(|| (out.crude.psi_c, out.matches))))
            })
            .collect()
    });
    let mut records = Vec::with_capacity(cfg.trials);
    let mut oracles = Vec::new();
    for part in parts {
        for (rec, o) in part? {
            records.push(rec);
            oracles.extend(o);
        }
    }
    Ok((records, oracles))
}

/// Solves the radius, runs all trials, and summarizes them.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<BenchmarkRun> {
    let start = Instant::now();
    let tb = Testbed::from_config(cfg)?;
    let complexity = complexity_for(&tb, cfg)?;
    let radius = choose_radius(&complexity, cfg)?;
    let r = radius.r;
    log::info!("r = {r} (solved: {})", radius.solved);
    let lc = cfg.learn_config(tb.eta(), radius.preflight);
    let (records, oracles) = run_trials(&tb, cfg, r, &lc, cfg.dump_oracles)?;
    let diffs = difference_class(&tb.class)?;
    let localized_size = localize(&diffs, r, cfg.constants.grid_depth, &tb.class.oracle(MetricKind::Oracle))?.len();
    let moments = moment_check(&tb, cfg)?;
    if !moments.l4_ok || !moments.design_variance_ok || !moments.noise_variance_ok {
        log::warn!("generator moment check failed: {moments:?}");
    }
    let failure = 1.0 - frequency(&records, |r| r.success);
    let crude_fail = 1.0 - frequency(&records, |r| r.crude_event);
    let fine_fail = 1.0 - frequency(&records, |r| r.fine_event);
    let summary = BenchmarkSummary {
        config: cfg.clone(),
        trials: records.len(),
        eta: tb.eta(),
        f_star: tb.f_star,
        sigma: tb.sigma,
        class_size: tb.class.len(),
        localized_size,
        tournament: method_summary(&records, |r| (r.tournament, r.success)),
        erm: method_summary(&records, |r| (Some(r.erm), r.erm_success)),
        empty_v_star: records.iter().filter(|r| r.v_star_size == 0).count(),
        v_hat_mean: records.iter().map(|r| r.v_hat_size as f64).sum::<f64>() / records.len() as f64,
        v_star_mean: records.iter().map(|r| r.v_star_size as f64).sum::<f64>() / records.len() as f64,
        crude_event_frequency: 1.0 - crude_fail,
        fine_event_frequency: 1.0 - fine_fail,
        joint_event_frequency: frequency(&records, |r| r.crude_event && r.fine_event),
        invariant_violations: records.iter().filter(|r| r.invariant_ok == Some(false)).count(),
        union_bound: UnionBound {
            failure_frequency: failure,
            crude_failure_frequency: crude_fail,
            fine_failure_frequency: fine_fail,
            holds: failure <= crude_fail + fine_fail + 1e-12,
        },
        moments,
        radius,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(BenchmarkRun {
        summary,
        records,
        complexity,
        oracles,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    }
}

pub const RESULTS_HEADER: [&str; 9] = [
    "trial_id",
    "seed",
    "method",
    "error_l2",
    "excess_risk",
    "v_hat_size",
    "v_star_size",
    "crude_event",
    "fine_event",
];

/// Two rows per trial: the tournament, then ERM. Missing values are empty.
pub fn write_results_csv(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let wrap = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&wrap)?;
    w.write_record(RESULTS_HEADER).map_err(&wrap)?;
    let num = |d: Option<f64>| d.map(|v| v.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.trial_id.to_string(),
            r.seed.to_string(),
            "tournament".into(),
            num(r.tournament.map(|d| d.error_l2)),
            num(r.tournament.map(|d| d.excess_risk)),
            r.v_hat_size.to_string(),
            r.v_star_size.to_string(),
            r.crude_event.to_string(),
            r.fine_event.to_string(),
        ])
        .map_err(&wrap)?;
        w.write_record([
            r.trial_id.to_string(),
            r.seed.to_string(),
            "erm".into(),
            r.erm.error_l2.to_string(),
            r.erm.excess_risk.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ])
        .map_err(&wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_oracles(dir: &Path, records: &[TrialRecord], oracles: &[(Vec<f64>, MatchMatrix)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (rec, (psi_c, m)) in records.iter().zip(oracles) {
        let p = dir.join(format!("trial_{:05}_psi_c.csv", rec.trial_id));
        let wrap = csv_err(&p);
        let mut w = csv::Writer::from_path(&p).map_err(&wrap)?;
        w.write_record(["f", "psi_c"]).map_err(&wrap)?;
        for (i, v) in psi_c.iter().enumerate() {
            w.write_record([i.to_string(), v.to_string()]).map_err(&wrap)?;
        }
        w.flush().map_err(|e| Error::io(&p, e))?;
        let p = dir.join(format!("trial_{:05}_psi_l.csv", rec.trial_id));
        let wrap = csv_err(&p);
        let mut w = csv::Writer::from_path(&p).map_err(&wrap)?;
        w.write_record(["f", "h", "psi_l", "close"]).map_err(&wrap)?;
        for a in 0..m.len() {
            for b in 0..m.len() {
                if a != b {
                    w.write_record([
                        m.members[a].to_string(),
                        m.members[b].to_string(),
                        m.psi_at(a, b).to_string(),
                        m.close[a * m.len() + b].to_string(),
                    ])
                    .map_err(&wrap)?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

/// Writes results.csv, summary.json, complexity.csv, the CDF plots and, when
/// requested, the per-trial oracle tables under `out`.
pub fn write_benchmark(run: &BenchmarkRun, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_results_csv(&out.join("results.csv"), &run.records)?;
    run.complexity.write_csv(&out.join("complexity.csv"))?;
    let p = out.join("summary.json");
    let text = serde_json::to_string_pretty(&run.summary).map_err(|e| Error::Json {
        path: p.clone(),
        source: e,
    })?;
    let mut file = std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(&p, e))?;
    let finite = |f: &dyn Fn(&TrialRecord) -> Option<f64>| -> Vec<f64> { run.records.iter().filter_map(f).collect() };
    plot_error_cdfs(
        &out.join("error_cdf.svg"),
        &[
            ("tournament", finite(&|r| r.tournament.map(|d| d.error_l2))),
            ("erm", finite(&|r| Some(r.erm.error_l2))),
        ],
        "L2 error",
    )?;
    plot_error_cdfs(
        &out.join("excess_risk_cdf.svg"),
        &[
            ("tournament", finite(&|r| r.tournament.map(|d| d.excess_risk))),
            ("erm", finite(&|r| Some(r.erm.excess_risk))),
        ],
        "excess risk",
    )?;
    if !run.oracles.is_empty() {
        write_oracles(&out.join("oracles"), &run.records, &run.oracles)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench_harness::config::ClassSpec;
    use crate::bench_harness::generators::NoiseSpec;
    use crate::function_class::{ClassFile, CovarianceStructure, PointSet};
    use std::sync::Arc;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.95), 4.8);
        assert_eq!(quantile(&v, 1.0), 5.0);
        let q = Quantiles::of(&[2.0, f64::INFINITY, 1.0]);
        assert_eq!(q.p50, 2.0);
        assert_eq!(q.max, f64::INFINITY);
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|t| trial_seed(5, t)).collect();
        assert_eq!(s.len(), 1000);
    }

    #[test]
    fn singleton_class_single_trial() {
        let dir = tempfile::tempdir().unwrap();
        let class_path = dir.path().join("one.json");
        let pts = PointSet::new(2, vec![0.3, -0.1]).unwrap();
        let f = FunctionClass::new(pts, Arc::new(CovarianceStructure::identity(2))).unwrap();
        std::fs::write(&class_path, serde_json::to_string(&ClassFile::from_class(&f)).unwrap()).unwrap();
        let cfg = ExperimentConfig {
            class: ClassSpec::File { path: class_path },
            z0: vec![0.2, 0.1],
            noise: NoiseSpec::Gaussian { sigma: 0.5 },
            n: 400,
            trials: 1,
            complexity_mc: 50,
            per_decade: 10,
            ..Default::default()
        };
        let run = run_benchmark(&cfg).unwrap();
        assert_eq!(run.records.len(), 1);
        let rec = &run.records[0];
        assert_eq!(rec.tournament.unwrap().error_l2, 0.0);
        assert_eq!(rec.erm.error_l2, 0.0);
        assert!(rec.success);
        write_benchmark(&run, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], RESULTS_HEADER.join(","));
        assert_eq!(lines.len(), 3);
        assert!(lines[1].contains(",tournament,0,0,1,1,"), "{}", lines[1]);
        for f in ["summary.json", "complexity.csv", "error_cdf.svg", "excess_risk_cdf.svg"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }
}
