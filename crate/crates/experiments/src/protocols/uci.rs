//! Tabular regression: split-conformal PIM intervals over an ensemble of shuffles.

use pim::conformal::{calibrate_global, split_dataset, SplitSpec, Variant};
use pim::metrics::{interval_metrics, linear_residuals, p_sig, pse, white_test, WhiteTestResult};
use pim::nn::{mlp_train, predict, Activation, Loss, MlpModel, TrainConfig};
use pim::stats::{mean, sample_std, Matrix, Rng};

use super::derive_seed;
use crate::config::ExperimentConfig;
use crate::data::Dataset;
use crate::error::{AppError, AppResult};
use crate::report::{ExperimentReport, Statistic, TrialRecord};

pub const PIM: &str = "pim";

/// Per-column affine map fitted on one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

fn safe_sd(v: &[f64]) -> f64 {
    let s = sample_std(v);
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let cols: Vec<Vec<f64>> = (0..x.cols()).map(|c| x.column(c)).collect();
        Self { mean: cols.iter().map(|c| mean(c)).collect(), sd: cols.iter().map(|c| safe_sd(c)).collect() }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for r in 0..x.rows() {
            for c in 0..x.cols() {
                out.set(r, c, (x.get(r, c) - self.mean[c]) / self.sd[c]);
            }
        }
        out
    }
}

/// Outer test indices, then proper-training and calibration indices of the rest.
pub fn nested_split(n: usize, cfg: &ExperimentConfig, rng: &mut Rng) -> pim::Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let u = &cfg.uci;
    let (rest, test) = split_dataset(n, &SplitSpec { train_fraction: 1.0 - u.test_fraction, shuffle_seed: derive_seed(rng) })?;
    let (tr, cal) = split_dataset(rest.len(), &SplitSpec { train_fraction: u.train_fraction, shuffle_seed: derive_seed(rng) })?;
    Ok((tr.iter().map(|&i| rest[i]).collect(), cal.iter().map(|&i| rest[i]).collect(), test))
}

struct Fold {
    white: WhiteTestResult,
    record: TrialRecord,
}

fn run_shuffle(data: &Dataset, cfg: &ExperimentConfig, trial: usize, rng: &mut Rng) -> AppResult<Fold> {
    let u = &cfg.uci;
    let (train, cal, test) = nested_split(data.len(), cfg, rng).map_err(|e| AppError::Data(format!("{}: {e}", data.name)))?;
    if train.len() < 2 || cal.len() < 2 || test.is_empty() {
        return Err(AppError::Data(format!(
            "{}: {} rows give folds of {}/{}/{} (train/calibration/test)",
            data.name,
            data.len(),
            train.len(),
            cal.len(),
            test.len()
        )));
    }
    let (x_tr, y_tr) = data.subset(&train);
    let (x_cal, y_cal) = data.subset(&cal);
    let (x_te, y_te) = data.subset(&test);

    let scaler = Standardizer::fit(&x_tr);
    let (y_mean, y_sd) = (mean(&y_tr), safe_sd(&y_tr));
    let y_std: Vec<f64> = y_tr.iter().map(|v| (v - y_mean) / y_sd).collect();
    let d = data.features.cols();
    let model = MlpModel::new(&[d, u.hidden, 1], u.hidden_activation, Activation::Identity, rng)?;
    let train_cfg = TrainConfig { seed: derive_seed(rng), ..u.train.clone() };
    let f_hat = mlp_train(model, &scaler.apply(&x_tr), &y_std, &Loss::Mse, &train_cfg)?.model;
    let predict_raw = |x: &Matrix| -> pim::Result<Vec<f64>> {
        Ok(predict(&f_hat, &scaler.apply(x))?.into_iter().map(|o| y_mean + y_sd * o[0]).collect())
    };
    let f_cal = predict_raw(&x_cal)?;
    let f_te = predict_raw(&x_te)?;

    let cal_fit = calibrate_global(&f_cal, &y_cal, cfg.p, &cfg.neuron)?;
    let white = white_test(&x_cal, &y_cal, u.alpha)?;
    let xi = linear_residuals(&x_cal, &y_cal)?;
    let spectral = pse(&xi).map(|r| r.pse).ok();

    let set = cal_fit.intervals(&f_te, cfg.p)?;
    let m = interval_metrics(&set, &y_te, cfg.p, cfg.eta)?;
    let rmse = (y_te.iter().zip(&f_te).map(|(y, f)| (y - f).powi(2)).sum::<f64>() / y_te.len() as f64).sqrt();
    let record = TrialRecord::new(&data.name, trial, PIM)
        .metric("picp", m.picp)
        .metric("mpiw", m.mpiw)
        .metric("nmpiw", m.nmpiw)
        .metric("cwc", m.cwc)
        .metric("rmse", rmse)
        .metric("white_f", white.f_statistic)
        .metric("white_p", white.p_value)
        .metric("significant", white.significant as u8 as f64)
        .optional("pse", spectral)
        .metric("split_selected", (cal_fit.selected == Variant::Split) as u8 as f64)
        .metric("calibration_size", cal.len() as f64);
    Ok(Fold { white, record })
}

pub fn run_uci(data: &Dataset, cfg: &ExperimentConfig, seed: u64) -> AppResult<ExperimentReport> {
    let root = Rng::new(seed);
    let mut records = Vec::with_capacity(cfg.uci.shuffles);
    let mut whites = Vec::with_capacity(cfg.uci.shuffles);
    for trial in 0..cfg.uci.shuffles {
        let mut rng = root.substream(trial as u64);
        match run_shuffle(data, cfg, trial, &mut rng) {
            Ok(fold) => {
                whites.push(fold.white);
                records.push(fold.record);
            }
            Err(AppError::Numerical(e @ pim::Error::Divergence { .. })) => {
                log::warn!("uci shuffle {trial} diverged: {e}");
                records.push(TrialRecord::failed(&data.name, trial, PIM, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    if whites.is_empty() {
        return Err(AppError::Numerical(pim::Error::UndefinedMetric("every shuffle failed".into())));
    }
    let pses: Vec<f64> = records.iter().filter_map(|r| r.get("pse")).collect();
    let mut report = ExperimentReport::new("uci", seed, cfg, records, Statistic::MeanStd)
        .with_summary("p_sig", p_sig(&whites)?)
        .with_summary("rows", data.len() as f64)
        .with_summary("features", data.features.cols() as f64);
    if !pses.is_empty() {
        report = report.with_summary("mean_pse", mean(&pses));
    }
    Ok(report)
}
