use std::path::Path;

use chainlearn::bench_harness::{run_benchmark, write_benchmark, ExperimentConfig};

fn small() -> ExperimentConfig {
    ExperimentConfig {
        trials: 3,
        complexity_mc: 300,
        per_decade: 20,
        master_seed: 11,
        ..Default::default()
    }
}

fn run_into(cfg: &ExperimentConfig, dir: &Path) {
    let run = run_benchmark(cfg).unwrap();
    write_benchmark(&run, dir).unwrap();
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small();
    run_into(&cfg, a.path());
    run_into(&cfg, b.path());
    for f in ["results.csv", "complexity.csv"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    let text = String::from_utf8(read(a.path(), "results.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 1 + 2 * cfg.trials);
    assert!(rows[2].contains(",erm,"), "{}", rows[2]);
    assert!(rows[2].ends_with(",,,,"), "{}", rows[2]);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg = ExperimentConfig {
        r: Some(0.705),
        trials: 4,
        ..small()
    };
    run_into(&cfg, a.path());
    cfg.workers = 3;
    run_into(&cfg, b.path());
    assert_eq!(read(a.path(), "results.csv"), read(b.path(), "results.csv"));
}

#[test]
fn summary_and_oracle_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        trials: 2,
        dump_oracles: true,
        ..small()
    };
    let run = run_benchmark(&cfg).unwrap();
    write_benchmark(&run, dir.path()).unwrap();
    let s = &run.summary;
    assert_eq!(s.trials, 2);
    assert!(s.radius.solved);
    assert!((s.radius.r - 4.0 * s.radius.r_star.unwrap().max(s.radius.lambda_star.unwrap())).abs() < 1e-12);
    assert!(s.moments.design_variance_ok);
    assert_eq!(s.invariant_violations, 0);
    assert!(s.union_bound.holds);
    let summary: serde_json::Value = serde_json::from_slice(&read(dir.path(), "summary.json")).unwrap();
    assert_eq!(summary["trials"], 2);
    for t in 0..2 {
        let c = String::from_utf8(read(&dir.path().join("oracles"), &format!("trial_{t:05}_psi_c.csv"))).unwrap();
        assert_eq!(c.lines().count(), 1 + s.class_size);
        let l = String::from_utf8(read(&dir.path().join("oracles"), &format!("trial_{t:05}_psi_l.csv"))).unwrap();
        let m = run.records[t].v_hat_size;
        assert_eq!(l.lines().count(), 1 + m * (m - 1));
    }
}

#[test]
fn toml_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bench.toml");
    std::fs::write(
        &p,
        "n = 1000\ntrials = 2\nmaster_seed = 3\ncomplexity_mc = 200\nper_decade = 20\nz0 = [0.2, -0.3]\n\
         [class]\nkind = \"l1_ball_net\"\ndim = 2\ncount = 40\n\
         [noise]\nkind = \"appendix_b\"\nk = 10000\nsigma = 1.0\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&p).unwrap();
    cfg.validate().unwrap();
    let run = run_benchmark(&cfg).unwrap();
    assert_eq!(run.records.len(), 2);
    assert_eq!(run.summary.class_size, 40);
}
