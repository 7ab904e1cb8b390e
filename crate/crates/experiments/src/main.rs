use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pim::neuron::{fit_interval_radius, fit_quantile, PivotMode, ResidualSample};
use pim::stats::Rng;
use serde_json::json;

use pim_experiments::data::{load_csv, write_csv};
use pim_experiments::protocols::{classify, fig1, serial, table1, uci};
use pim_experiments::report::render;
use pim_experiments::synthetic::{logistic_dataset, regression_dataset, RegressionFamily};
use pim_experiments::{AppError, AppResult, ExperimentConfig, ExperimentReport, Format};

#[derive(Parser)]
#[command(name = "pim-uq", version, about = "Single-neuron quantile estimation and uncertainty-quantification experiments")]
struct Cli {
    /// Root seed; every trial derives its own stream from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON file overriding any subset of the defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Interval-function accuracy against the nine rank schemes.
    Fig1,
    /// One-dimensional benchmark of f̂ + PIM against SQR and QD.
    Table1,
    /// Per-step forecast intervals on a synthetic autoregressive series.
    Serial,
    /// Split-conformal regression ensemble on a CSV dataset.
    Uci { dataset: PathBuf },
    /// Accuracy intervals for a binary classifier on a CSV dataset.
    Classify { dataset: PathBuf },
    /// Fit one neuron to a column of numbers.
    FitQuantile {
        /// One number per line; `-` or absent reads stdin.
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0.95)]
        p: f64,
        #[arg(long, value_enum, default_value_t = Mode::Signed)]
        mode: Mode,
    },
    /// Write the bundled synthetic CSV datasets.
    Synth {
        #[arg(long, default_value = "data")]
        dir: PathBuf,
        #[arg(long, default_value_t = 5000)]
        rows: usize,
        #[arg(long, default_value_t = 4)]
        features: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Quantile of the values themselves.
    Signed,
    /// Quantile of their magnitudes.
    Absolute,
    /// Separate lower and upper radii around zero.
    SplitSign,
}

fn read_numbers(input: Option<&Path>) -> AppResult<Vec<f64>> {
    let mut text = String::new();
    match input {
        Some(path) if path != Path::new("-") => {
            text = std::fs::read_to_string(path).map_err(|e| AppError::Io { path: path.into(), source: e })?;
        }
        _ => {
            std::io::stdin().read_to_string(&mut text).map_err(|e| AppError::Io { path: "<stdin>".into(), source: e })?;
        }
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| AppError::Data(format!("line {}: not a number: {:?}", i + 1, l.trim())))
        })
        .collect()
}

fn fit_one(cfg: &ExperimentConfig, input: Option<&Path>, p: f64, mode: Mode, format: Format) -> AppResult<String> {
    if !(p > 0.0 && p < 1.0) {
        return Err(AppError::Config(format!("--p must lie in (0, 1), got {p}")));
    }
    let values = read_numbers(input)?;
    if values.is_empty() {
        return Err(AppError::Data("no numbers to fit".into()));
    }
    let (lower, upper, detail) = match mode {
        Mode::Signed | Mode::Absolute => {
            let pivot = if matches!(mode, Mode::Signed) { PivotMode::Signed } else { PivotMode::Absolute };
            let est = fit_quantile(&ResidualSample::new(values, pivot)?, &cfg.neuron.with_p(p))?;
            (None, est.r_hat, serde_json::to_value(est).expect("estimates serialise"))
        }
        Mode::SplitSign => {
            let r = fit_interval_radius(&ResidualSample::new(values, PivotMode::SplitSign)?, p, &cfg.neuron)?;
            (Some(r.lower()), r.upper(), serde_json::to_value(r).expect("radii serialise"))
        }
    };
    Ok(match format {
        Format::Json => serde_json::to_string_pretty(&json!({ "p": p, "estimate": detail })).expect("json") + "\n",
        Format::Csv => match lower {
            Some(lo) => format!("p,lower,upper\n{p},{lo},{upper}\n"),
            None => format!("p,r_hat\n{p},{upper}\n"),
        },
    })
}

fn synthesize(dir: &Path, rows: usize, features: usize, seed: u64) -> AppResult<String> {
    if rows < 2 || features < 1 {
        return Err(AppError::Config("synth needs at least 2 rows and 1 feature".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| AppError::Io { path: dir.into(), source: e })?;
    let root = Rng::new(seed);
    let sets = [
        (regression_dataset(RegressionFamily::Heteroskedastic, rows, features, &mut root.substream(0)), "y"),
        (regression_dataset(RegressionFamily::Homoskedastic, rows, features, &mut root.substream(1)), "y"),
        (logistic_dataset(rows, features, &mut root.substream(2)), "label"),
    ];
    let mut listing = String::new();
    for (data, target) in &sets {
        let path = dir.join(format!("{}.csv", data.name));
        write_csv(&path, data, target)?;
        listing.push_str(&format!("{}\n", path.display()));
    }
    Ok(listing)
}

fn run(cli: &Cli) -> AppResult<String> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let report: ExperimentReport = match &cli.command {
        Command::Fig1 => fig1::run_fig1(&cfg, cli.seed)?,
        Command::Table1 => table1::run_table1(&cfg, cli.seed)?,
        Command::Serial => serial::run_serial(&cfg, cli.seed)?,
        Command::Uci { dataset } => uci::run_uci(&load_csv(dataset, &cfg.uci.csv)?, &cfg, cli.seed)?,
        Command::Classify { dataset } => classify::run_classify(&load_csv(dataset, &cfg.classify.csv)?, &cfg, cli.seed)?,
        Command::FitQuantile { input, p, mode } => return fit_one(&cfg, input.as_deref(), *p, *mode, cli.format),
        Command::Synth { dir, rows, features } => return synthesize(dir, *rows, *features, cli.seed),
    };
    for note in &report.notes {
        log::warn!("{note}");
    }
    Ok(render(&report, cli.format))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = run(&cli).and_then(|text| match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| AppError::Io { path: path.clone(), source: e }),
        None => {
            print!("{text}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
