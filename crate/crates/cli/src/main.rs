use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use rkhs_adapt::analysis::{
    evaluate_bounds, final_metric, format_float, kernel_check, run_sweep, write_series_csv, write_sweep_csv,
    BoundConfig, KernelCheckConfig, RunManifest, SweepConfig, SweepMetric, TrialEntry,
};
use rkhs_adapt::simulate::{run_sampling, run_trials, trial_seed, MetricsSeries, SimConfig, SystemKind};
use rkhs_adapt::{Error, Result};

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "rkhs-adapt",
    version,
    about = "Kernel and random-feature adaptive control and prediction experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-loop tracking on the `lti` or `quartic` benchmark.
    Control(RunArgs),
    /// Linear-truth predictor (`predictor`) or sampled-measurement run (`sampling`).
    Predict(RunArgs),
    /// Hamiltonian n-body prediction.
    Nbody(RunArgs),
    /// Final-window error against feature count, with a power-law fit.
    SweepK(RunArgs),
    /// Feature-count calculator.
    Bound(RunArgs),
    /// Monte-Carlo check of the feature average against the closed-form kernel.
    KernelCheck(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the master seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the trial count in the config.
    #[arg(long)]
    trials: Option<usize>,
}

enum Status {
    Ok,
    Diverged,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Control(a) => simulate(a, "control", &[SystemKind::Lti, SystemKind::Quartic]),
        Command::Predict(a) => simulate(a, "predict", &[SystemKind::Predictor, SystemKind::Sampling]),
        Command::Nbody(a) => simulate(a, "nbody", &[SystemKind::Nbody]),
        Command::SweepK(a) => sweep(a),
        Command::Bound(a) => bound(a),
        Command::KernelCheck(a) => check_kernel(a),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Diverged) => {
            eprintln!("warning: at least one run diverged; series were written");
            ExitCode::from(EXIT_DIVERGED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { 1 })
        }
    }
}

// An unreadable config file is a config error, not a run failure.
fn config_err(e: Error) -> Error {
    match e {
        Error::Io { path, source } => Error::Config(format!("cannot read {}: {source}", path.display())),
        other => other,
    }
}

fn apply_overrides(cfg: &mut SimConfig, args: &RunArgs) -> Result<()> {
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    cfg.validate()
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn entry(index: usize, seed: u64, csv: Option<PathBuf>, run: &Result<MetricsSeries>) -> TrialEntry {
    match run {
        Ok(s) => TrialEntry { index, seed, csv, divergence: s.divergence.clone(), error: None },
        Err(e) => TrialEntry { index, seed, csv: None, divergence: None, error: Some(e.to_string()) },
    }
}

fn simulate(args: &RunArgs, command: &str, allowed: &[SystemKind]) -> Result<Status> {
    let mut cfg = SimConfig::load(&args.config).map_err(config_err)?;
    apply_overrides(&mut cfg, args)?;
    if !allowed.contains(&cfg.system) {
        return Err(Error::Config(format!("`{command}` does not run system {:?}", cfg.system)));
    }
    prepare_out(&args.out)?;

    let mut extra = Vec::new();
    let runs = if cfg.system == SystemKind::Sampling {
        let mut runs = Vec::with_capacity(cfg.trials);
        let mut fractions = Vec::with_capacity(cfg.trials);
        for i in 0..cfg.trials {
            let r = run_sampling(&cfg.with_seed(trial_seed(cfg.seed, i)));
            if let Ok(r) = &r {
                let path = args.out.join(format!("trial_{i:03}_energies.csv"));
                let factor = r.beta * (r.lambda_bar * r.dt_meas).exp();
                let mut text = String::from("step,energy_before,energy_after,bound\n");
                for (j, (a, b)) in r.energies.iter().enumerate() {
                    let line = format!("{j},{},{},{}\n", format_float(*a), format_float(*b), format_float(factor * a));
                    text.push_str(&line);
                }
                write_text(&path, &text)?;
                fractions.push(r.bound_holds_fraction());
            }
            runs.push(r.map(|r| r.series));
        }
        extra.push(("bound_holds_fraction".to_string(), json!(fractions)));
        runs
    } else {
        run_trials(&cfg)?
    };

    let mut trials = Vec::with_capacity(runs.len());
    let mut finals = Vec::with_capacity(runs.len());
    for (i, run) in runs.iter().enumerate() {
        let seed = trial_seed(cfg.seed, i);
        let csv = match run {
            Ok(s) => {
                let p = args.out.join(format!("trial_{i:03}.csv"));
                write_series_csv(&p, s)?;
                finals.push(final_metric(s, cfg.final_window, SweepMetric::Tracking).ok());
                Some(p)
            }
            Err(e) => {
                eprintln!("trial {i} (seed {seed}) failed: {e}");
                finals.push(None);
                None
            }
        };
        trials.push(entry(i, seed, csv, run));
    }
    extra.push(("final_window_median".to_string(), json!(finals)));
    let diverged = trials.iter().any(|t| t.divergence.is_some());
    let failed = trials.iter().filter(|t| t.error.is_some()).count();
    RunManifest { command: command.into(), config: cfg, trials, extra }.write(&args.out.join("manifest.json"))?;

    for (i, f) in finals.iter().enumerate() {
        match f {
            Some(v) => println!("trial {i}: final-window median error {v:.6e}"),
            None => println!("trial {i}: no result"),
        }
    }
    if failed == runs.len() {
        if let Some(e) = runs.into_iter().find_map(|r| r.err()) {
            return Err(e);
        }
    }
    Ok(if diverged { Status::Diverged } else { Status::Ok })
}

fn sweep(args: &RunArgs) -> Result<Status> {
    let mut cfg = SweepConfig::load(&args.config).map_err(config_err)?;
    apply_overrides(&mut cfg.base, args)?;
    prepare_out(&args.out)?;
    let outcome = run_sweep(&cfg)?;

    let mut trials = Vec::new();
    for (k, runs) in &outcome.runs {
        for (i, run) in runs.iter().enumerate() {
            let seed = trial_seed(cfg.base.seed, i);
            let csv = match run {
                Ok(s) => {
                    let p = args.out.join(format!("K{k}_trial_{i:03}.csv"));
                    write_series_csv(&p, s)?;
                    Some(p)
                }
                Err(_) => None,
            };
            trials.push(entry(trials.len(), seed, csv, run));
        }
    }
    write_sweep_csv(&args.out.join("sweep.csv"), &outcome.sweep)?;
    let extra = vec![
        ("K".to_string(), json!(cfg.ks)),
        ("metric".to_string(), json!(cfg.metric)),
        ("fit".to_string(), json!(outcome.fit)),
    ];
    RunManifest { command: "sweep-k".into(), config: cfg.base.clone(), trials, extra }
        .write(&args.out.join("manifest.json"))?;

    println!("K,q20,q50,q80");
    for r in &outcome.sweep.rows {
        println!("{},{:.6e},{:.6e},{:.6e}", r.k, r.q20, r.q50, r.q80);
    }
    if let Some(f) = &outcome.fit {
        println!("power-law exponent {:.4} +/- {:.4} (amplitude {:.4e})", f.exponent, f.ci95, f.amplitude);
    }
    Ok(if outcome.any_diverged() { Status::Diverged } else { Status::Ok })
}

fn bound(args: &RunArgs) -> Result<Status> {
    let cfg = BoundConfig::load(&args.config).map_err(config_err)?;
    prepare_out(&args.out)?;
    let report = evaluate_bounds(&cfg)?;
    let text = serde_json::to_string_pretty(&report)?;
    write_text(&args.out.join("bound.json"), &(text + "\n"))?;
    for (eps, k) in &report.required {
        println!("eps {eps:e}: K >= {k}");
    }
    for (k, eps) in &report.achievable {
        println!("K {k}: error <= {eps:.6e}");
    }
    Ok(Status::Ok)
}

fn check_kernel(args: &RunArgs) -> Result<Status> {
    let cfg = KernelCheckConfig::load(&args.config).map_err(config_err)?;
    prepare_out(&args.out)?;
    let seed = args.seed.unwrap_or(cfg.kernel.seed);
    let report = kernel_check(&cfg, seed)?;
    let mut text = String::from("pair,row,col,estimate,exact,stderr,z\n");
    for r in &report.rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.pair,
            r.row,
            r.col,
            format_float(r.estimate),
            format_float(r.exact),
            format_float(r.stderr),
            format_float(r.z)
        ));
    }
    write_text(&args.out.join("kernel_check.csv"), &text)?;
    let summary =
        json!({ "seed": seed, "max_z": report.max_z, "threshold": report.threshold, "passed": report.passed() });
    write_text(&args.out.join("kernel_check.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    println!(
        "{}: max |estimate - exact| / stderr = {:.3} (threshold {})",
        if report.passed() { "pass" } else { "FAIL" },
        report.max_z,
        report.threshold
    );
    Ok(Status::Ok)
}
