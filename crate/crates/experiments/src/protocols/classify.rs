//! Binary classification: PIM accuracy intervals against the binomial and bootstrap baselines.

use pim::classification::{
    accuracy, accuracy_ci, binomial_ci, bootstrap_accuracy_ci, partition_confusion, platt_calibrate, rate_cis, temperature_calibrate,
    Outcome, ScoreCalibrator,
};
use pim::conformal::{split_dataset, SplitSpec};
use pim::nn::{mlp_train, predict, Activation, Loss, MlpModel, TrainConfig};
use pim::stats::{mean, Matrix, Rng};

use super::derive_seed;
use super::uci::Standardizer;
use crate::config::{outcome_label, CalibrationMethod, ClassifyConfig, ExperimentConfig};
use crate::data::Dataset;
use crate::error::{AppError, AppResult};
use crate::report::{ExperimentReport, Statistic, TrialRecord};

pub const PIM: &str = "pim";
pub const BINOMIAL: &str = "binomial";
pub const BOOTSTRAP: &str = "bootstrap";

/// Targets as booleans; anything other than 0 or 1 is rejected.
pub fn binary_labels(data: &Dataset) -> AppResult<Vec<bool>> {
    data.target
        .iter()
        .enumerate()
        .map(|(i, &v)| match v {
            0.0 => Ok(false),
            1.0 => Ok(true),
            v => Err(AppError::Data(format!("{}: row {} has label {v}, expected 0 or 1", data.name, i + 1))),
        })
        .collect()
}

/// Whether `[a ± da]` and `[b ± db]` intersect.
pub fn intervals_overlap(a: f64, da: f64, b: f64, db: f64) -> bool {
    (a - b).abs() <= da + db
}

/// A trained classifier with its score map.
struct Classifier {
    scaler: Standardizer,
    model: MlpModel,
    calibrator: ScoreCalibrator,
}

impl Classifier {
    fn scores(&self, x: &Matrix) -> pim::Result<Vec<f64>> {
        let raw: Vec<f64> = predict(&self.model, &self.scaler.apply(x))?.into_iter().map(|o| o[0]).collect();
        Ok(self.calibrator.apply_all(&raw))
    }
}

fn fit_calibrator(method: CalibrationMethod, scores: &[f64], labels: &[bool]) -> pim::Result<ScoreCalibrator> {
    match method {
        CalibrationMethod::None => Ok(ScoreCalibrator::Identity),
        CalibrationMethod::Platt => platt_calibrate(scores, labels),
        CalibrationMethod::Temperature => temperature_calibrate(scores, labels),
    }
}

/// One hidden layer with as many units as features, sigmoid output, cross-entropy.
fn fit_classifier(c: &ClassifyConfig, train: (&Matrix, &[bool]), cal: Option<(&Matrix, &[bool])>, rng: &mut Rng) -> pim::Result<Classifier> {
    let (x, labels) = train;
    let d = x.cols();
    let scaler = Standardizer::fit(x);
    let y: Vec<f64> = labels.iter().map(|&b| b as u8 as f64).collect();
    let model = MlpModel::new(&[d, d, 1], c.hidden_activation, Activation::Sigmoid, rng)?;
    let train_cfg = TrainConfig { seed: derive_seed(rng), ..c.train.clone() };
    let model = mlp_train(model, &scaler.apply(x), &y, &Loss::Bce, &train_cfg)?.model;
    let mut out = Classifier { scaler, model, calibrator: ScoreCalibrator::Identity };
    if let Some((xc, lc)) = cal {
        out.calibrator = fit_calibrator(c.calibration, &out.scores(xc)?, lc)?;
    }
    Ok(out)
}

fn labels_of(labels: &[bool], idx: &[usize]) -> Vec<bool> {
    idx.iter().map(|&i| labels[i]).collect()
}

/// Validation indices, then proper-training and calibrator indices of the rest.
/// Without a calibrator the whole training share trains the network.
pub fn classify_split(n: usize, c: &ClassifyConfig, rng: &mut Rng) -> pim::Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let (train, val) = split_dataset(n, &SplitSpec { train_fraction: 1.0 - c.validation_fraction, shuffle_seed: derive_seed(rng) })?;
    if c.calibration == CalibrationMethod::None {
        return Ok((train, Vec::new(), val));
    }
    let (tr, cal) = split_dataset(train.len(), &SplitSpec { train_fraction: 1.0 - c.calibration_fraction, shuffle_seed: derive_seed(rng) })?;
    Ok((tr.iter().map(|&i| train[i]).collect(), cal.iter().map(|&i| train[i]).collect(), val))
}

struct Shuffle {
    accuracy: f64,
    delta_pim: Option<f64>,
    delta_binomial: f64,
    records: Vec<TrialRecord>,
}

fn run_shuffle(data: &Dataset, labels: &[bool], cfg: &ExperimentConfig, trial: usize, rng: &mut Rng) -> AppResult<Shuffle> {
    let c = &cfg.classify;
    let (train, cal, val) = classify_split(data.len(), c, rng).map_err(|e| AppError::Data(format!("{}: {e}", data.name)))?;
    let (x_tr, _) = data.subset(&train);
    let (x_cal, _) = data.subset(&cal);
    let (x_val, _) = data.subset(&val);
    let (l_tr, l_cal, l_val) = (labels_of(labels, &train), labels_of(labels, &cal), labels_of(labels, &val));
    let cal_fold = (!cal.is_empty()).then_some((&x_cal, l_cal.as_slice()));

    let clf = fit_classifier(c, (&x_tr, &l_tr), cal_fold, rng)?;
    let scores = clf.scores(&x_val)?;
    let partition = partition_confusion(&scores, &l_val, c.tau)?;
    let acc = accuracy(&partition);
    let cis = rate_cis(&partition, cfg.p, &cfg.neuron)?;
    let delta_pim = accuracy_ci(&cis, partition.p_n(), partition.p_p()).value();
    let delta_binomial = binomial_ci(acc, val.len(), cfg.p)?;

    let boot_root = Rng::new(derive_seed(rng));
    let boot = bootstrap_accuracy_ci(train.len(), c.bootstrap, cfg.p, &boot_root, |idx, stream| {
        let rows: Vec<usize> = idx.iter().map(|&i| train[i]).collect();
        let (x_b, _) = data.subset(&rows);
        let fitted = fit_classifier(c, (&x_b, &labels_of(labels, &rows)), cal_fold, stream)?;
        Ok(accuracy(&partition_confusion(&fitted.scores(&x_val)?, &l_val, c.tau)?))
    })?;

    let mut pim_rec = TrialRecord::new(&data.name, trial, PIM)
        .metric("accuracy", acc)
        .optional("width", delta_pim.map(|d| 2.0 * d))
        .metric("p_n", partition.p_n())
        .metric("validation_size", val.len() as f64);
    for l in Outcome::ALL {
        pim_rec = pim_rec.optional(&format!("delta_{}", outcome_label(l)), cis.get(l).value());
    }
    let records = vec![
        pim_rec,
        TrialRecord::new(&data.name, trial, BINOMIAL).metric("width", 2.0 * delta_binomial),
        TrialRecord::new(&data.name, trial, BOOTSTRAP).metric("width", boot.width).metric("mean_accuracy", mean(&boot.accuracies)),
    ];
    Ok(Shuffle { accuracy: acc, delta_pim, delta_binomial, records })
}

/// Per-shuffle PIM intervals are compared with the binomial interval around
/// the ensemble-mean accuracy; `overlap` marks the trials where they meet.
pub fn run_classify(data: &Dataset, cfg: &ExperimentConfig, seed: u64) -> AppResult<ExperimentReport> {
    let labels = binary_labels(data)?;
    let root = Rng::new(seed);
    let mut shuffles = Vec::with_capacity(cfg.classify.shuffles);
    let mut failed = Vec::new();
    for trial in 0..cfg.classify.shuffles {
        let mut rng = root.substream(trial as u64);
        match run_shuffle(data, &labels, cfg, trial, &mut rng) {
            Ok(s) => shuffles.push(s),
            Err(AppError::Numerical(e @ pim::Error::Divergence { .. })) => {
                log::warn!("classify shuffle {trial} diverged: {e}");
                for name in [PIM, BINOMIAL, BOOTSTRAP] {
                    failed.push(TrialRecord::failed(&data.name, trial, name, e.to_string()));
                }
            }
            Err(e) => return Err(e),
        }
    }
    if shuffles.is_empty() {
        return Err(AppError::Numerical(pim::Error::UndefinedMetric("every shuffle failed".into())));
    }
    let centre = mean(&shuffles.iter().map(|s| s.accuracy).collect::<Vec<_>>());
    let mut overlaps = 0usize;
    let mut records = Vec::new();
    for mut s in shuffles.into_iter() {
        let hit = s.delta_pim.is_some_and(|d| intervals_overlap(s.accuracy, d, centre, s.delta_binomial));
        overlaps += hit as usize;
        s.records[0] = s.records[0].clone().metric("overlap", hit as u8 as f64);
        records.extend(s.records);
    }
    let completed = cfg.classify.shuffles - failed.len() / 3;
    records.extend(failed);
    records.sort_by_key(|r| r.trial);
    let mut report = ExperimentReport::new("classify", seed, cfg, records, Statistic::MedianMad)
        .with_summary("overlap_rate", overlaps as f64 / completed as f64)
        .with_summary("mean_accuracy", centre)
        .with_summary("rows", data.len() as f64);
    if let Some(gap) = cfg.classify.delta_calib {
        report = report.with_summary("delta_calib", gap);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::logistic_dataset;
    use std::collections::BTreeSet;

    fn quick() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.classify.shuffles = 2;
        cfg.classify.bootstrap = 3;
        cfg.classify.train.epochs = 10;
        cfg
    }

    #[test]
    fn overlap_rule() {
        assert!(intervals_overlap(0.8, 0.05, 0.9, 0.05));
        assert!(!intervals_overlap(0.8, 0.04, 0.9, 0.05));
    }

    #[test]
    fn splits_partition_the_rows() {
        let c = ClassifyConfig::default();
        let (tr, cal, val) = classify_split(1000, &c, &mut Rng::new(4)).unwrap();
        assert_eq!((tr.len(), cal.len(), val.len()), (640, 160, 200));
        let all: BTreeSet<usize> = tr.iter().chain(&cal).chain(&val).copied().collect();
        assert_eq!(all.len(), 1000);
        let none = ClassifyConfig { calibration: CalibrationMethod::None, ..c };
        let (tr, cal, _) = classify_split(1000, &none, &mut Rng::new(4)).unwrap();
        assert_eq!((tr.len(), cal.len()), (800, 0));
    }

    #[test]
    fn non_binary_labels_are_rejected() {
        let mut data = logistic_dataset(50, 2, &mut Rng::new(0));
        data.target[7] = 0.5;
        let err = run_classify(&data, &quick(), 0).unwrap_err();
        assert!(matches!(err, AppError::Data(ref m) if m.contains("row 8")), "{err}");
    }

    #[test]
    fn uninformative_features_give_majority_accuracy() {
        // Features carry no signal and labels are 70% negative, so a
        // well-trained classifier predicts the majority class everywhere.
        let mut rng = Rng::new(5);
        let n = 2000;
        let x: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let target: Vec<f64> = (0..n).map(|i| (i % 10 < 3) as u8 as f64).collect();
        let data = Dataset { name: "flat".into(), features: Matrix::from_row_major(n, 1, x).unwrap(), target, feature_names: vec!["x0".into()] };
        let mut cfg = quick();
        cfg.classify.calibration = CalibrationMethod::None;
        let r = run_classify(&data, &cfg, 1).unwrap();
        for t in r.trials.iter().filter(|t| t.estimator == PIM) {
            assert_eq!(t.get("accuracy"), t.get("p_n"));
            assert_eq!(t.get("delta_tp"), None);
        }
    }

    #[test]
    fn logistic_run_reports_every_interval() {
        let data = logistic_dataset(1000, 3, &mut Rng::new(2));
        let r = run_classify(&data, &quick(), 3).unwrap();
        assert_eq!(r.trials.len(), 6);
        for t in &r.trials {
            let w = t.get("width").unwrap();
            assert!(w.is_finite() && w >= 0.0, "{} {w}", t.estimator);
        }
        let acc = r.find("logistic", PIM, "accuracy").unwrap().center;
        assert!(acc > 0.7, "{acc}");
        assert!((0.0..=1.0).contains(&r.summary["overlap_rate"]));
    }
}
