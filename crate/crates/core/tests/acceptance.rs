//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails. Pass criterion numbers as arguments to run a subset,
//! e.g. `cargo test --release --test acceptance -- 1 7`.

use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use chainlearn::bench_harness::benchmark::{
    choose_radius, complexity_for, crude_event, quantile, run_benchmark, write_benchmark, BenchmarkRun, Testbed,
};
use chainlearn::bench_harness::generators::{NoiseSpec, ScalarLaw};
use chainlearn::bench_harness::{run_gap_experiment, ExperimentConfig, GapConfig};
use chainlearn::chaining::fixed_point::rhs;
use chainlearn::chaining::{
    build_admissible_sequence, complexity_report, gamma2, gaussian_sup_curve, gaussian_sup_mc, packing_log_curve,
    ComplexityOptions, FixedPointKind, FixedPointParams, FixedPointStatus, McOptions, SupProfile,
};
use chainlearn::function_class::{difference_class, CovarianceStructure, FunctionClass, MetricKind, PointSet};
use chainlearn::mean_estimators::{psi_delta, EstimatorSpec};
use chainlearn::risk_oracles::{crude_oracle, ChainCarrier, ChainLevels, MultiplierEstimator, ProductEstimator};
use chainlearn::rng::{derive_seed, rng_from};
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn minutes(m: f64) -> Duration {
    Duration::from_secs_f64(60.0 * m)
}

fn within(t: Duration, budget: Duration) -> String {
    format!("{:.1} s of {:.0} s", t.as_secs_f64(), budget.as_secs_f64())
}

// 1
fn mean_estimator_deviation() -> Verdict {
    let start = Instant::now();
    let (n, delta, trials) = (1000usize, 0.01, 2000u64);
    let spec = EstimatorSpec::default().with_delta(delta);
    let scale = ((2.0 / delta).ln() / n as f64).sqrt();
    let laws = [
        ("gaussian", ScalarLaw::Gaussian),
        ("t(5)", ScalarLaw::StudentT { nu: 5.0 }),
        ("appendixB(1e4)", ScalarLaw::AppendixB { k: 10_000 }),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (i, (name, law)) in laws.iter().enumerate() {
        let s = law.sampler().unwrap();
        let mut dev: Vec<f64> = (0..trials)
            .map(|t| {
                let mut rng = rng_from(1, &[i as u64, t]);
                let x: Vec<f64> = (0..n).map(|_| s.sample(&mut rng)).collect();
                psi_delta(&x, &spec).unwrap().abs()
            })
            .collect();
        dev.sort_by(f64::total_cmp);
        // unit-variance laws: sigma_Z = 1, E Z = 0
        let c = quantile(&dev, 1.0 - delta) / scale;
        worst = worst.max(c);
        parts.push(format!("{name} C = {c:.3}"));
    }
    let t = start.elapsed();
    Verdict {
        pass: worst <= 6.0 && t < minutes(1.0),
        detail: format!("{}; need C <= 6; {}", parts.join(", "), within(t, minutes(1.0))),
    }
}

#[derive(serde::Deserialize)]
struct Band {
    l_cal: f64,
    u_cal: f64,
}

// 2
fn chaining_sandwich() -> Verdict {
    let start = Instant::now();
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/gamma2_band.json")).unwrap();
    let band: Band = serde_json::from_str(&text).unwrap();
    let mut ratios = Vec::new();
    for c in 0..20u64 {
        let mut rng = rng_from(c, &[]);
        let pts = PointSet::new(8, (0..400).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).unwrap();
        let f = FunctionClass::new(pts, Arc::new(CovarianceStructure::identity(8))).unwrap();
        let seq = build_admissible_sequence(&f, &f.oracle(MetricKind::True), None);
        let g2 = gamma2(&seq, f.embedded());
        let (e, _) = gaussian_sup_mc(f.points(), f.covariance(), &McOptions::new(100_000, derive_seed(2, &[c]))).unwrap();
        ratios.push(g2 / e);
    }
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let t = start.elapsed();
    Verdict {
        pass: lo >= band.l_cal && hi <= band.u_cal && band.u_cal / band.l_cal <= 20.0 && t < minutes(2.0),
        detail: format!(
            "ratios in [{lo:.3}, {hi:.3}], band [{:.3}, {:.3}] (width {:.2}); {}",
            band.l_cal,
            band.u_cal,
            band.u_cal / band.l_cal,
            within(t, minutes(2.0))
        ),
    }
}

fn test_classes() -> Vec<(FunctionClass, f64)> {
    let id = |d: usize| Arc::new(CovarianceStructure::identity(d));
    let mut out = Vec::new();
    for (d, c, s) in [(2, 60, 0.5), (3, 120, 1.0), (4, 200, 1.0), (5, 150, 2.0), (2, 30, 0.2)] {
        out.push((FunctionClass::l1_ball_net(d, c, id(d)).unwrap(), s));
    }
    for (d, m, seed, s) in [(3, 80, 1u64, 1.0), (6, 100, 2, 0.5), (8, 50, 3, 1.0)] {
        let mut rng = rng_from(seed, &[]);
        let pts = PointSet::new(d, (0..d * m).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).unwrap();
        out.push((FunctionClass::new(pts, id(d)).unwrap(), s));
    }
    let seg = PointSet::new(2, (0..101).flat_map(|i| [-1.0 + 0.02 * i as f64, 0.0]).collect()).unwrap();
    out.push((FunctionClass::new(seg, id(2)).unwrap(), 1.0));
    let mut rng = rng_from(9, &[]);
    let cov = CovarianceStructure::exact(3, vec![2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5]).unwrap();
    let pts = PointSet::new(3, (0..300).map(|_| rng.random::<f64>() - 0.5).collect()).unwrap();
    out.push((FunctionClass::new(pts, Arc::new(cov)).unwrap(), 0.7));
    out
}

// 3
fn fixed_point_property() -> Verdict {
    let start = Instant::now();
    let (mut checked, mut floors, mut bad) = (0, 0, Vec::new());
    for (i, (f, sigma)) in test_classes().iter().enumerate() {
        for n in [100usize, 1000] {
            let opts = ComplexityOptions {
                sigma: Some(*sigma),
                n,
                per_decade: 50,
                ..Default::default()
            };
            let rep = complexity_report(f, &opts).unwrap();
            let prof = SupProfile::new(&difference_class(f).unwrap());
            let params = FixedPointParams {
                kappa: opts.kappa,
                n,
                sigma: Some(*sigma),
            };
            for fp in &rep.fixed_points {
                if fp.status == FixedPointStatus::Ceiling {
                    bad.push(format!("class {i} {} hit the ceiling", fp.kind.name()));
                    continue;
                }
                let grid = [fp.value / 2.0, 2.0 * fp.value];
                let mc = McOptions::new(4000, derive_seed(3, &[i as u64, n as u64]));
                let (lhs, se) = match fp.kind {
                    FixedPointKind::Lambda => (packing_log_curve(f, &grid).unwrap(), vec![0.0; 2]),
                    _ => {
                        let c = gaussian_sup_curve(&prof, &grid, &mc).unwrap();
                        (c.mean, c.stderr)
                    }
                };
                let holds = lhs[1] - 3.0 * se[1] <= rhs(fp.kind, &params, grid[1], rep.d_f);
                // below the grid floor the condition holds everywhere, so only 2 fp is checked
                let fails = fp.status == FixedPointStatus::Floor
                    || lhs[0] + 3.0 * se[0] > rhs(fp.kind, &params, grid[0], rep.d_f);
                floors += usize::from(fp.status == FixedPointStatus::Floor);
                checked += 1;
                if !(holds && fails) {
                    bad.push(format!("class {i} N {n} {} = {:.4}", fp.kind.name(), fp.value));
                }
            }
        }
    }
    let t = start.elapsed();
    Verdict {
        pass: bad.is_empty() && t < minutes(5.0),
        detail: format!(
            "{checked} fixed points on 10 classes ({floors} at the grid floor), {} violations{}; {}",
            bad.len(),
            if bad.is_empty() { String::new() } else { format!(" [{}]", bad.join("; ")) },
            within(t, minutes(5.0))
        ),
    }
}

struct Setup {
    cfg: ExperimentConfig,
    tb: Testbed,
    r: f64,
}

fn default_testbed() -> &'static Setup {
    static CELL: OnceLock<Setup> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = ExperimentConfig::default();
        let tb = Testbed::from_config(&cfg).unwrap();
        let rep = complexity_for(&tb, &cfg).unwrap();
        let r = choose_radius(&rep, &cfg).unwrap().r;
        Setup { cfg, tb, r }
    })
}

// 4
fn crude_oracle_events() -> Verdict {
    let start = Instant::now();
    let d = default_testbed();
    let (cfg, r) = (&d.cfg, d.r);
    let lc = cfg.learn_config(d.tb.eta(), None);
    let oracle = d.tb.class.oracle(MetricKind::Oracle);
    let trials = 500u64;
    let iso = (0..trials)
        .filter(|&t| {
            let s = d.tb.sample(cfg.n, derive_seed(cfg.master_seed, &[4, t])).unwrap();
            let out = crude_oracle(&d.tb.class, &s, r, &oracle, lc.crude, &lc.estimator).unwrap();
            crude_event(&d.tb, &out, r)
        })
        .count();
    let mut loud = d.tb.model.clone();
    loud.noise = loud.noise.with_sigma(10.0 * r);
    let tb2 = Testbed::new(d.tb.class.clone(), loud);
    let s2 = tb2.sigma * tb2.sigma;
    let noise_ok = (0..trials)
        .filter(|&t| {
            let s = tb2.sample(cfg.n, derive_seed(cfg.master_seed, &[40, t])).unwrap();
            let out = crude_oracle(&tb2.class, &s, r, &oracle, lc.crude, &lc.estimator).unwrap();
            out.sigma_hat2 >= 0.5 * s2 && out.sigma_hat2 <= 2.0 * s2
        })
        .count();
    let (fi, fn_) = (iso as f64 / trials as f64, noise_ok as f64 / trials as f64);
    let t = start.elapsed();
    Verdict {
        pass: fi >= 0.99 && fn_ >= 0.99 && t < minutes(5.0),
        detail: format!(
            "r = {r:.4}; isomorphism {fi:.3}, sigma = 10 r noise band {fn_:.3} over {trials} trials; {}",
            within(t, minutes(5.0))
        ),
    }
}

struct Runs {
    student: BenchmarkRun,
    student_time: Duration,
    appendix: BenchmarkRun,
    appendix_time: Duration,
}

fn benchmark_runs() -> &'static Runs {
    static CELL: OnceLock<Runs> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = ExperimentConfig::default();
        let t = Instant::now();
        let student = run_benchmark(&cfg).unwrap();
        let student_time = t.elapsed();
        let cfg_b = ExperimentConfig {
            noise: NoiseSpec::AppendixB { k: 10_000, sigma: 1.0 },
            ..cfg
        };
        let t = Instant::now();
        let appendix = run_benchmark(&cfg_b).unwrap();
        Runs {
            student,
            student_time,
            appendix,
            appendix_time: t.elapsed(),
        }
    })
}

// 5
fn fine_oracle_band() -> Verdict {
    let runs = benchmark_runs();
    let s = &runs.student.summary;
    let b = &runs.appendix.summary;
    Verdict {
        pass: s.fine_event_frequency >= 0.90 && runs.student_time < minutes(10.0),
        detail: format!(
            "t(5) band frequency {:.3} over {} trials (appendixB {:.3}); need >= 0.90; {}",
            s.fine_event_frequency,
            s.trials,
            b.fine_event_frequency,
            within(runs.student_time, minutes(10.0))
        ),
    }
}

// 6
fn end_to_end() -> Verdict {
    let runs = benchmark_runs();
    let s = &runs.student.summary;
    let b = &runs.appendix.summary;
    let t = runs.student_time + runs.appendix_time;
    let order = b.tournament.error_l2.p95 <= b.erm.error_l2.p95;
    Verdict {
        pass: s.tournament.success_frequency >= 0.95
            && b.tournament.success_frequency >= 0.95
            && order
            && t < minutes(20.0),
        detail: format!(
            "r = {:.4}; success t(5) {:.3}, appendixB {:.3}; appendixB p95 error tournament {:.4} vs ERM {:.4}; {}",
            s.radius.r,
            s.tournament.success_frequency,
            b.tournament.success_frequency,
            b.tournament.error_l2.p95,
            b.erm.error_l2.p95,
            within(t, minutes(20.0))
        ),
    }
}

// 7
fn appendix_gap() -> Verdict {
    let start = Instant::now();
    let rep = run_gap_experiment(&GapConfig::default()).unwrap();
    let inc = rep.strictly_increasing(2.0);
    let last = rep.points.last().unwrap().ratio;
    let spread = rep.gaussian_spread();
    let t = start.elapsed();
    let pts: Vec<String> = rep
        .points
        .iter()
        .map(|p| format!("k={} {:.3}±{:.3}", p.k, p.ratio, p.ratio_stderr))
        .collect();
    Verdict {
        pass: inc && last > 2.0 && spread <= 0.05 && t < minutes(5.0),
        detail: format!(
            "ratios [{}]; increasing {inc}, largest > 2 {}, gaussian spread {:.2}%; {}",
            pts.join(", "),
            last > 2.0,
            100.0 * spread,
            within(t, minutes(5.0))
        ),
    }
}

fn slope(ns: &[f64], e: &[f64]) -> f64 {
    let x: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let mx = x.iter().sum::<f64>() / x.len() as f64;
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

// 8
fn rate_slopes() -> Verdict {
    let start = Instant::now();
    let d = 4;
    let mut rng = rng_from(8, &[]);
    let mut data = vec![0.0; d];
    for _ in 0..20 {
        let p: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        data.extend(&p);
        data.extend(p.iter().map(|v| -v));
    }
    let oracle = chainlearn::function_class::DistanceOracle::new(Arc::new(CovarianceStructure::identity(d)), MetricKind::Oracle);
    let carrier = Arc::new(ChainCarrier::new(PointSet::new(d, data).unwrap(), &oracle));
    let sat = carrier.sequence().saturation().max(1);
    let spec = EstimatorSpec::default();
    let law = ScalarLaw::StudentT { nu: 5.0 };
    let sampler = law.sampler().unwrap();
    let pts = carrier.points().clone();
    let ns = [1000.0, 2000.0, 4000.0, 8000.0];
    let (mut eq, mut em) = (Vec::new(), Vec::new());
    let trials = 100u64;
    for &nf in &ns {
        let n = nf as usize;
        let levels = ChainLevels::new(2.0, 0, sat, n, &spec).unwrap();
        let (mut sq, mut sm) = (0.0, 0.0);
        for t in 0..trials {
            let mut rng = rng_from(8, &[n as u64, t]);
            let x: Vec<f64> = (0..n * d).map(|_| sampler.sample(&mut rng)).collect();
            // independent symmetric multipliers: E xi h = 0
            let xi: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| sampler.sample(&mut rng)).collect()).collect();
            let q = ProductEstimator::symmetric(levels.clone(), spec, carrier.clone(), &x, d).unwrap();
            let m = MultiplierEstimator::new(levels.clone(), spec, carrier.clone(), &x, d, xi).unwrap();
            let (mut uq, mut um) = (0.0f64, 0.0f64);
            for a in 0..carrier.len() {
                for j in 0..2 {
                    um = um.max(m.estimate(a, j).unwrap().abs());
                }
                for b in 0..carrier.len() {
                    let truth: f64 = pts.row(a).iter().zip(pts.row(b)).map(|(u, v)| u * v).sum();
                    uq = uq.max((q.estimate(a, b).unwrap() - truth).abs());
                }
            }
            sq += uq;
            sm += um;
        }
        eq.push(sq / trials as f64);
        em.push(sm / trials as f64);
    }
    let (bq, bm) = (slope(&ns, &eq), slope(&ns, &em));
    let ok = |b: f64| (b + 0.5).abs() <= 0.15;
    let t = start.elapsed();
    Verdict {
        pass: ok(bq) && ok(bm) && t < minutes(10.0),
        detail: format!(
            "slope Psi_Q {bq:.3}, Phi_M {bm:.3}; need -0.5 ± 0.15; {}",
            within(t, minutes(10.0))
        ),
    }
}

// 9
fn determinism() -> Verdict {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        trials: 4,
        master_seed: 99,
        ..ExperimentConfig::default()
    };
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for dir in &dirs {
        let run = run_benchmark(&cfg).unwrap();
        write_benchmark(&run, dir.path()).unwrap();
    }
    let same = |name: &str| {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        !a.is_empty() && a == b
    };
    let (res, cx) = (same("results.csv"), same("complexity.csv"));
    Verdict {
        pass: res && cx,
        detail: format!(
            "results.csv identical {res}, complexity.csv identical {cx}; {:.1} s",
            start.elapsed().as_secs_f64()
        ),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("mean estimator deviation", mean_estimator_deviation),
        ("chaining sandwich", chaining_sandwich),
        ("fixed point defining property", fixed_point_property),
        ("crude oracle and noise estimate", crude_oracle_events),
        ("fine oracle band", fine_oracle_band),
        ("end-to-end tournament", end_to_end),
        ("heavy-tail gap", appendix_gap),
        ("rate slopes", rate_slopes),
        ("determinism", determinism),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let v = run();
        failed += usize::from(!v.pass);
        println!("criterion {id} {}: {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
