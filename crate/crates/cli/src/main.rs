//! `dimkrr` command-line front end: experiment execution, stability
//! verification and spectra emission, with CSV/JSON/SVG outputs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dimkrr::kernel::RadialKernel;
use dimkrr::Error;

use dimkrr_cli::config::Settings;
use dimkrr_cli::experiments;
use dimkrr_cli::plot::{line_plot, Axes, Series};
use dimkrr_cli::report::{spectra_csv, ExperimentReport};

#[derive(Parser)]
#[command(name = "dimkrr", about = "Two-step PCA + kernel ridge regression experiments", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Config file in the flat `key = value` format.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (defaults to config/env/`out`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Base seed; every per-rep seed is derived from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Repetitions per grid point.
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated labeled sample sizes.
    #[arg(long)]
    n_grid: Option<String>,
    /// Comma-separated unlabeled sample sizes.
    #[arg(long)]
    m_grid: Option<String>,
    /// Comma-separated kernel specs, e.g. `gaussian,wendland_c2:gamma=0.5`.
    #[arg(long)]
    kernels: Option<String>,
    /// Label model: `case1` or `case2`.
    #[arg(long)]
    case: Option<String>,
    /// Target function: `f1` or `f2`.
    #[arg(long)]
    target: Option<String>,
    /// Labeled sample size for fixed-n experiments.
    #[arg(long)]
    n: Option<usize>,
    /// Instance count for the stability suite.
    #[arg(long)]
    instances: Option<usize>,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// PCA excess reconstruction error vs sample size.
    PcaRate(CommonArgs),
    /// Four-estimator MSE comparison over the n grid.
    Compare(CommonArgs),
    /// Non-differentiable-target comparison (Gaussian kernel, f2).
    Irregular(CommonArgs),
    /// Two-step vs true-projection KRR vs projected oracle.
    PcaOracle(CommonArgs),
    /// MSE vs unlabeled sample size at fixed labeled size.
    SemiSupervised(CommonArgs),
    /// Stability-inequality verification suite (JSON-line reports).
    VerifyStability(CommonArgs),
    /// Kernel integral-operator spectra of the generated inputs.
    Spectra(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::PcaRate(c)
            | Command::Compare(c)
            | Command::Irregular(c)
            | Command::PcaOracle(c)
            | Command::SemiSupervised(c)
            | Command::VerifyStability(c)
            | Command::Spectra(c) => c,
        }
    }
}

/// Exit codes: 0 success, 1 invalid configuration, 2 numerical failure,
/// 3 assertion failure inside a verification suite.
const EXIT_INVALID: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_ASSERTION: u8 = 3;

fn settings_from(args: &CommonArgs) -> Result<Settings, String> {
    let mut s = Settings::default();
    if let Some(path) = &args.config {
        s.apply_file(path)?;
    }
    if let Some(dir) = &args.out_dir {
        s.out_dir = dir.clone();
    }
    if let Some(seed) = args.seed {
        s.seed = seed;
    }
    if let Some(reps) = args.reps {
        s.apply_key("reps", &reps.to_string())?;
    }
    if let Some(v) = &args.n_grid {
        s.apply_key("n_grid", v)?;
    }
    if let Some(v) = &args.m_grid {
        s.apply_key("m_grid", v)?;
    }
    if let Some(v) = &args.kernels {
        s.apply_key("kernels", v)?;
    }
    if let Some(v) = &args.case {
        s.apply_key("case", v)?;
    }
    if let Some(v) = &args.target {
        s.apply_key("target", v)?;
    }
    if let Some(n) = args.n {
        s.apply_key("n", &n.to_string())?;
    }
    if let Some(i) = args.instances {
        s.apply_key("instances", &i.to_string())?;
    }
    // Fail early on malformed kernel specs so the error reaches the user
    // before any computation.
    s.parse_kernels()?;
    Ok(s)
}

fn mean_curve(report: &ExperimentReport, key: impl Fn(&dimkrr_cli::report::Aggregate) -> f64) -> Vec<Series> {
    use std::collections::BTreeMap;
    let mut by_series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for a in &report.aggregates {
        let label = if a.kernel == "-" {
            a.estimator.clone()
        } else {
            format!("{} / {}", a.estimator, a.kernel)
        };
        by_series.entry(label).or_default().push((key(a), a.mean));
    }
    by_series
        .into_iter()
        .map(|(name, mut points)| {
            points.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
            Series { name, points }
        })
        .collect()
}

fn write_outputs(
    report: &ExperimentReport,
    settings: &Settings,
    csv: String,
    svg: String,
) -> std::io::Result<PathBuf> {
    let dir = settings.out_dir.join(&report.experiment_id);
    report.write_to(&dir, &csv)?;
    std::fs::write(dir.join("config.txt"), settings.to_flat_text())?;
    std::fs::write(dir.join("plot.svg"), svg)?;
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    Ok(dir)
}

fn run(cli: Cli) -> Result<(), (u8, String)> {
    let invalid = |msg: String| (EXIT_INVALID, msg);
    let settings = settings_from(cli.command.common()).map_err(invalid)?;
    let kernels: Vec<RadialKernel> = settings.parse_kernels().map_err(invalid)?;
    let core_err = |e: Error| match e {
        Error::InvalidArgument(msg) => (EXIT_INVALID, format!("invalid argument: {msg}")),
        Error::Numerical(msg) => (EXIT_NUMERICAL, format!("numerical error: {msg}")),
    };
    let io_err = |e: std::io::Error| (EXIT_NUMERICAL, format!("io error: {e}"));

    match &cli.command {
        Command::PcaRate(_) => {
            let report = experiments::run_pca_rate(&settings, &settings.n_grid, settings.reps)
                .map_err(core_err)?;
            let svg = line_plot(
                "PCA excess reconstruction error",
                "n",
                "mean excess error",
                Axes { log_x: true, log_y: true },
                &mean_curve(&report, |a| a.n as f64),
            );
            let csv = report.to_pca_rate_csv();
            let dir = write_outputs(&report, &settings, csv, svg).map_err(io_err)?;
            println!("wrote {}", dir.display());
        }
        Command::Compare(_) | Command::Irregular(_) | Command::PcaOracle(_) => {
            let report = match &cli.command {
                Command::Compare(_) => {
                    experiments::run_error_comparison(&settings, &kernels, &settings.n_grid, settings.reps)
                }
                Command::Irregular(_) => {
                    experiments::run_irregular(&settings, &settings.n_grid, settings.reps)
                }
                _ => experiments::run_pca_oracle(&settings, &kernels, &settings.n_grid, settings.reps),
            }
            .map_err(core_err)?;
            let svg = line_plot(
                "Test MSE by estimator",
                "n",
                "mean test MSE",
                Axes { log_x: true, log_y: true },
                &mean_curve(&report, |a| a.n as f64),
            );
            let csv = report.to_comparison_csv();
            let dir = write_outputs(&report, &settings, csv, svg).map_err(io_err)?;
            println!("wrote {}", dir.display());
        }
        Command::SemiSupervised(_) => {
            let report =
                experiments::run_semi_supervised(&settings, settings.n, &settings.m_grid, settings.reps)
                    .map_err(core_err)?;
            let svg = line_plot(
                "Test MSE vs unlabeled sample size",
                "m",
                "mean test MSE",
                Axes { log_x: true, log_y: true },
                &mean_curve(&report, |a| a.m as f64),
            );
            let csv = report.to_comparison_csv();
            let dir = write_outputs(&report, &settings, csv, svg).map_err(io_err)?;
            println!("wrote {}", dir.display());
        }
        Command::VerifyStability(_) => {
            let reports =
                experiments::stability_suite(settings.instances, settings.seed).map_err(core_err)?;
            let dir = settings.out_dir.join("verify-stability");
            std::fs::create_dir_all(&dir).map_err(io_err)?;
            let mut lines = String::new();
            let mut failures = 0usize;
            for r in &reports {
                let line = serde_json::json!({
                    "lhs": r.lhs,
                    "rhs": r.rhs,
                    "w1": r.w1,
                    "lambda": r.lambda,
                    "precondition_ok": r.precondition_ok,
                    "assumption_violated": r.assumption_violated,
                    "holds": r.holds,
                });
                lines.push_str(&line.to_string());
                lines.push('\n');
                if !r.holds {
                    failures += 1;
                }
            }
            std::fs::write(dir.join("reports.jsonl"), lines).map_err(io_err)?;
            std::fs::write(dir.join("config.txt"), settings.to_flat_text()).map_err(io_err)?;
            let snapshot = serde_json::to_string_pretty(&settings).expect("settings serialize");
            std::fs::write(dir.join("config.json"), snapshot).map_err(io_err)?;
            println!("{} instances verified, {} failures", reports.len(), failures);
            if failures > 0 {
                return Err((
                    EXIT_ASSERTION,
                    format!("stability inequality failed on {failures} of {} instances", reports.len()),
                ));
            }
        }
        Command::Spectra(_) => {
            let kernel = kernels
                .first()
                .copied()
                .ok_or_else(|| invalid("at least one kernel required".to_string()))?;
            let out = experiments::spectra_run(&settings, &kernel, settings.n).map_err(core_err)?;
            let dir = settings.out_dir.join("spectra");
            std::fs::create_dir_all(&dir).map_err(io_err)?;
            std::fs::write(dir.join("reduced.csv"), spectra_csv(&out.reduced)).map_err(io_err)?;
            std::fs::write(dir.join("full.csv"), spectra_csv(&out.full)).map_err(io_err)?;
            std::fs::write(dir.join("config.txt"), settings.to_flat_text()).map_err(io_err)?;
            let snapshot = serde_json::to_string_pretty(&settings).expect("settings serialize");
            std::fs::write(dir.join("config.json"), snapshot).map_err(io_err)?;
            let series: Vec<Series> = [("reduced", &out.reduced), ("full", &out.full)]
                .into_iter()
                .map(|(name, eigs)| Series {
                    name: name.to_string(),
                    points: eigs
                        .iter()
                        .enumerate()
                        .map(|(i, &v)| ((i + 1) as f64, v))
                        .collect(),
                })
                .collect();
            let svg = line_plot(
                "Integral-operator spectra",
                "index",
                "eigenvalue",
                Axes { log_x: true, log_y: true },
                &series,
            );
            std::fs::write(dir.join("plot.svg"), svg).map_err(io_err)?;
            for note in &out.notes {
                eprintln!("note: {note}");
            }
            println!("wrote {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
