//! One-dimensional heteroskedastic benchmark: f̂ + per-grid-point PIM against SQR and QD.

use std::time::Instant;

use pim::conformal::PredictionIntervalSet;
use pim::metrics::{interval_rmse, mpiw, picp};
use pim::neuron::{fit_interval_radius, fit_quantile, NeuronConfig, ResidualSample};
use pim::nn::{mlp_train, predict, Activation, Loss, MlpModel, TrainConfig};
use pim::stats::{Matrix, Rng};

use super::derive_seed;
use crate::config::{ExperimentConfig, Table1Config};
use crate::error::AppResult;
use crate::report::{ExperimentReport, Statistic, TrialRecord};
use crate::synthetic::{draw_pairs, exact_quantile, gen_synthetic, NoiseKind, SyntheticRegressionSpec};

pub const PIM: &str = "f_hat+pim";
pub const SQR: &str = "sqr";
pub const QD: &str = "qd";
pub const ESTIMATORS: [&str; 3] = [SQR, PIM, QD];

fn column(x: &[f64]) -> Matrix {
    Matrix::from_row_major(x.len(), 1, x.to_vec()).expect("one column")
}

fn train_cfg(base: &TrainConfig, rng: &mut Rng) -> TrainConfig {
    TrainConfig { seed: derive_seed(rng), ..base.clone() }
}

/// Interval bounds on the grid from one pipeline.
struct Pipeline {
    lower: Vec<f64>,
    upper: Vec<f64>,
    parameters: usize,
    seconds: f64,
}

fn run_bounds_net(t: &Table1Config, loss: Loss, x: &Matrix, y: &[f64], grid: &Matrix, rng: &mut Rng) -> pim::Result<Pipeline> {
    let start = Instant::now();
    let model = MlpModel::new(&[1, t.hidden, 2], t.hidden_activation, Activation::Identity, rng)?;
    let trained = mlp_train(model, x, y, &loss, &train_cfg(&t.train, rng))?.model;
    let out = predict(&trained, grid)?;
    let seconds = start.elapsed().as_secs_f64();
    Ok(Pipeline {
        lower: out.iter().map(|o| o[0]).collect(),
        upper: out.iter().map(|o| o[1]).collect(),
        parameters: trained.parameter_count(),
        seconds,
    })
}

/// Fits f̂, then neurons on the residuals at each grid point: one absolute-mode
/// radius for symmetric noise, signed fits at `(1 ± p)/2` for skewed noise.
fn run_pim(
    t: &Table1Config,
    p: f64,
    neuron: &NeuronConfig,
    x: &Matrix,
    y: &[f64],
    grid: &Matrix,
    grid_targets: &[Vec<f64>],
    rng: &mut Rng,
) -> pim::Result<Pipeline> {
    let start = Instant::now();
    let model = MlpModel::new(&[1, t.hidden, 1], t.hidden_activation, Activation::Identity, rng)?;
    let f_hat = mlp_train(model, x, y, &Loss::Mse, &train_cfg(&t.train, rng))?.model;
    let centres: Vec<f64> = predict(&f_hat, grid)?.into_iter().map(|o| o[0]).collect();
    let (mut lower, mut upper) = (Vec::with_capacity(centres.len()), Vec::with_capacity(centres.len()));
    for (c, ys) in centres.iter().zip(grid_targets) {
        let eps: Vec<f64> = ys.iter().map(|v| v - c).collect();
        if t.noise.is_symmetric() {
            let r = fit_interval_radius(&ResidualSample::absolute(eps)?, p, neuron)?;
            lower.push(c - r.lower());
            upper.push(c + r.upper());
        } else {
            let signed = ResidualSample::signed(eps)?;
            lower.push(c + fit_quantile(&signed, &neuron.with_p((1.0 - p) / 2.0))?.r_hat);
            upper.push(c + fit_quantile(&signed, &neuron.with_p((1.0 + p) / 2.0))?.r_hat);
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    Ok(Pipeline { lower, upper, parameters: f_hat.parameter_count(), seconds })
}

fn record(group: &str, trial: usize, name: &str, pipe: &Pipeline, exact: &[f64], grid_targets: &[Vec<f64>], p: f64) -> pim::Result<TrialRecord> {
    let mut est = pipe.lower.clone();
    est.extend_from_slice(&pipe.upper);
    // Coverage of the fresh grid targets, one interval per target. Crossed
    // heads are read as the interval between them.
    let k = grid_targets.first().map_or(0, Vec::len);
    let rep = |f: fn(f64, f64) -> f64| {
        pipe.lower.iter().zip(&pipe.upper).flat_map(|(&l, &u)| std::iter::repeat_n(f(l, u), k)).collect::<Vec<f64>>()
    };
    let set = PredictionIntervalSet::new(rep(f64::min), rep(f64::max), p)?;
    let flat: Vec<f64> = grid_targets.concat();
    let crossed = pipe.lower.iter().zip(&pipe.upper).filter(|(l, u)| l > u).count() as f64 / pipe.lower.len() as f64;
    Ok(TrialRecord::new(group, trial, name)
        .metric("rmse", interval_rmse(&est, exact)?)
        .metric("parameters", pipe.parameters as f64)
        .metric("crossed", crossed)
        .metric("picp", picp(&set, &flat)?)
        .metric("mpiw", mpiw(&set, false, None)?)
        .timing("seconds", pipe.seconds))
}

fn noise_label(noise: NoiseKind) -> &'static str {
    match noise {
        NoiseKind::Gaussian => "gaussian",
        NoiseKind::Beta { .. } => "beta",
    }
}

pub fn run_table1(cfg: &ExperimentConfig, seed: u64) -> AppResult<ExperimentReport> {
    let t = &cfg.table1;
    let p = cfg.p;
    let spec = SyntheticRegressionSpec { noise: t.noise, n_train: t.n_train, grid_size: t.grid_size, n_extra: t.n_extra };
    let group = noise_label(t.noise);
    let root = Rng::new(seed);
    let mut records = Vec::new();
    for trial in 0..t.trials {
        let mut rng = root.substream(trial as u64);
        let data = gen_synthetic(&spec, &mut rng);
        let (extra_x, extra_y) = draw_pairs(t.n_extra, t.noise, &data.grid, &mut rng);
        let mut exact = Vec::with_capacity(2 * data.grid.len());
        for &lvl in &[(1.0 - p) / 2.0, (1.0 + p) / 2.0] {
            for &x in &data.grid {
                exact.push(exact_quantile(x, lvl, t.noise)?);
            }
        }
        let grid = column(&data.grid);
        let x = column(&data.train_x);
        let big_x = column(&[data.train_x.clone(), extra_x].concat());
        let big_y = [data.train_y.clone(), extra_y].concat();

        let pipelines = (|| -> pim::Result<[Pipeline; 3]> {
            let sqr = run_bounds_net(t, Loss::Sqr { p }, &big_x, &big_y, &grid, &mut rng)?;
            let pim = run_pim(t, p, &cfg.neuron, &x, &data.train_y, &grid, &data.grid_targets, &mut rng)?;
            let qd = run_bounds_net(t, Loss::Qd { p, lambda: t.qd_lambda, softness: t.qd_softness }, &big_x, &big_y, &grid, &mut rng)?;
            Ok([sqr, pim, qd])
        })();
        match pipelines {
            Ok(pipes) => {
                for (name, pipe) in ESTIMATORS.iter().zip(&pipes) {
                    records.push(record(group, trial, name, pipe, &exact, &data.grid_targets, p)?);
                }
            }
            Err(e @ pim::Error::Divergence { .. }) => {
                log::warn!("table1 trial {trial} diverged: {e}");
                for name in ESTIMATORS {
                    records.push(TrialRecord::failed(group, trial, name, e.to_string()));
                }
            }
            Err(e) => return Err(e.into()),
        }
    }
    normalize_timings(&mut records);
    Ok(ExperimentReport::new("table1", seed, cfg, records, Statistic::MedianMad))
}

/// Adds `normalized` = seconds over the summed seconds of every pipeline and trial.
pub fn normalize_timings(records: &mut [TrialRecord]) {
    let total: f64 = records.iter().filter_map(|r| r.timings.get("seconds")).sum();
    if total > 0.0 {
        for r in records.iter_mut() {
            if let Some(s) = r.timings.get("seconds").copied() {
                r.timings.insert("normalized".into(), s / total);
            }
        }
    }
}
