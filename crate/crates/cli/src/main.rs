use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chainlearn::bench_harness::benchmark::{choose_radius, complexity_for, run_trial, trial_seed};
use chainlearn::bench_harness::plots::plot_gap;
use chainlearn::bench_harness::{run_benchmark, run_gap_experiment, write_benchmark, ExperimentConfig, GapConfig, Testbed};
use chainlearn::chaining::{complexity_report, ComplexityOptions, McOptions};
use chainlearn::error::{Error, Result};
use chainlearn::function_class::ClassFile;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chainlearn", version, about = "Chained mean estimators and tournament learning benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gaussian complexities, entropy and fixed points of a class file.
    Complexity {
        #[arg(long)]
        class_file: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        kappa: f64,
        /// Noise level for the sigma-dependent fixed points.
        #[arg(long)]
        sigma: Option<f64>,
        /// Sample size the fixed points refer to.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        n_mc: usize,
        #[arg(long, default_value_t = 200)]
        per_decade: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// One learning trial on a configured testbed; prints JSON.
    Learn {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Rademacher versus gaussian complexity on the l1 ball vertices.
    Gap {
        #[arg(long, default_value_t = 256)]
        d: usize,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        /// Comma-separated k values.
        #[arg(long, value_delimiter = ',', default_value = "256,4096,65536")]
        k_grid: Vec<u64>,
        /// Sample size; defaults to round(d^(1/alpha)).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 20_000)]
        n_mc: usize,
        #[arg(long, default_value_t = 0x6A9)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated tournament and ERM trials with result files.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Write per-trial crude values and match matrices.
        #[arg(long)]
        dump_oracles: bool,
    },
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Complexity {
            class_file,
            kappa,
            sigma,
            n,
            n_mc,
            per_decade,
            seed,
            workers,
            out,
        } => {
            let f = ClassFile::load(&class_file)?.into_class()?;
            let mut mc = McOptions::new(n_mc, seed);
            mc.workers = workers;
            let opts = ComplexityOptions {
                kappa,
                n,
                sigma,
                per_decade,
                gaussian: mc,
                entropy_per_decade: 10,
                ..Default::default()
            };
            let rep = complexity_report(&f, &opts)?;
            create_dir(&out)?;
            rep.write_csv(&out.join("complexity.csv"))?;
            rep.write_json(&out.join("complexity.json"))?;
            for fp in &rep.fixed_points {
                println!("{:<8} {:.6e} ({:?})", fp.kind.name(), fp.value, fp.status);
            }
            println!("gamma2 {:.6e}  E sup G {:.6e}", rep.gamma2, rep.gaussian_sup);
        }
        Command::Learn { config, trial } => {
            let cfg = ExperimentConfig::load(&config)?;
            let tb = Testbed::from_config(&cfg)?;
            let rep = complexity_for(&tb, &cfg)?;
            let radius = choose_radius(&rep, &cfg)?;
            let lc = cfg.learn_config(tb.eta(), radius.preflight);
            let (rec, out) = run_trial(&tb, radius.r, &lc, cfg.n, trial, trial_seed(cfg.master_seed, trial))?;
            let report = serde_json::json!({
                "radius": radius,
                "f_star": tb.f_star,
                "record": rec,
                "v_hat": out.v_hat(),
                "v_star": out.v_star,
                "sigma_star": out.sigma_star,
                "fine_levels": [out.fine_s0, out.fine_s1],
                "fine_cells": out.fine_cells,
                "preflight_ok": out.preflight_ok,
            });
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
        }
        Command::Gap {
            d,
            alpha,
            k_grid,
            n,
            n_mc,
            seed,
            workers,
            out,
        } => {
            let cfg = GapConfig {
                d,
                alpha,
                n,
                k_grid,
                n_mc,
                seed,
                workers,
                gaussian_design: true,
            };
            let rep = run_gap_experiment(&cfg)?;
            create_dir(&out)?;
            rep.write_csv(&out.join("gap.csv"))?;
            rep.write_json(&out.join("gap.json"))?;
            plot_gap(&out.join("gap_ratio.svg"), &rep)?;
            println!("d = {}, N = {}", rep.d, rep.n);
            for p in &rep.points {
                let flag = if p.in_window { "" } else { "  (outside [N, Nd])" };
                println!(
                    "k = {:>8}  phi_N = {:.4} ± {:.4}  E max|g| = {:.4}  ratio = {:.4} ± {:.4}{flag}",
                    p.k, p.phi_n, p.phi_n_stderr, p.gauss, p.ratio, p.ratio_stderr
                );
            }
        }
        Command::Bench {
            config,
            out,
            trials,
            seed,
            workers,
            dump_oracles,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            cfg.dump_oracles |= dump_oracles;
            cfg.validate()?;
            let out = out
                .or_else(|| cfg.out_dir.clone())
                .ok_or_else(|| Error::Config("no output directory: pass --out or set out_dir".into()))?;
            let run = run_benchmark(&cfg)?;
            write_benchmark(&run, &out)?;
            let s = &run.summary;
            println!("r = {:.6}  trials = {}", s.radius.r, s.trials);
            println!(
                "tournament: success {:.3}  p95 error {:.4}",
                s.tournament.success_frequency, s.tournament.error_l2.p95
            );
            println!("erm:        success {:.3}  p95 error {:.4}", s.erm.success_frequency, s.erm.error_l2.p95);
            println!(
                "events: crude {:.3}  fine {:.3}  joint {:.3}",
                s.crude_event_frequency, s.fine_event_frequency, s.joint_event_frequency
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
