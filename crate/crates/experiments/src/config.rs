//! Experiment settings. Every field has a default; a JSON file may override any subset.

use std::path::Path;

use pim::classification::Outcome;
use pim::neuron::NeuronConfig;
use pim::nn::{Activation, Optimizer, TrainConfig};
use pim::order_stats::InterpolationScheme;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::synthetic::NoiseKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Nominal interval level.
    pub p: f64,
    /// CWC penalty rate.
    pub eta: f64,
    pub neuron: NeuronConfig,
    pub fig1: Fig1Config,
    pub table1: Table1Config,
    pub serial: SerialConfig,
    pub uci: UciConfig,
    pub classify: ClassifyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p: 0.95,
            eta: 0.1,
            neuron: NeuronConfig::default(),
            fig1: Fig1Config::default(),
            table1: Table1Config::default(),
            serial: SerialConfig::default(),
            uci: UciConfig::default(),
            classify: ClassifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig1Config {
    pub sample_sizes: Vec<usize>,
    pub trials: usize,
    pub schemes: Vec<InterpolationScheme>,
    /// Neuron sharpness schedule `beta_scale * m^beta_exponent` for this study.
    pub beta_scale: f64,
    pub beta_exponent: f64,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Self {
            sample_sizes: vec![8, 12, 16, 24],
            trials: 200,
            schemes: InterpolationScheme::ALL.to_vec(),
            beta_scale: 3.0,
            beta_exponent: 0.2,
        }
    }
}

fn default_regression_training() -> TrainConfig {
    TrainConfig { optimizer: Optimizer::adam(), learning_rate: 5e-3, epochs: 200, batch_size: 50, seed: 0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table1Config {
    pub trials: usize,
    pub noise: NoiseKind,
    pub n_train: usize,
    pub grid_size: usize,
    pub n_extra: usize,
    pub hidden: usize,
    pub hidden_activation: Activation,
    pub train: TrainConfig,
    pub qd_lambda: f64,
    pub qd_softness: f64,
}

impl Default for Table1Config {
    fn default() -> Self {
        Self {
            trials: 10,
            noise: NoiseKind::Gaussian,
            n_train: 500,
            grid_size: 500,
            n_extra: 1000,
            hidden: 100,
            hidden_activation: Activation::Relu,
            train: default_regression_training(),
            qd_lambda: 15.0,
            qd_softness: 160.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SerialConfig {
    pub series_length: usize,
    pub horizon: usize,
    pub lookback: usize,
    /// AR(1) coefficient of the latent level; 1 gives a random walk.
    pub phi: f64,
    pub innovation_sd: f64,
    /// Observation noise added on top of the latent level.
    pub noise_sd: f64,
    /// Share of the series used for calibration; the rest is the test segment.
    pub calibration_fraction: f64,
}

impl Default for SerialConfig {
    fn default() -> Self {
        Self {
            series_length: 12_000,
            horizon: 30,
            lookback: 10,
            phi: 1.0,
            innovation_sd: 1.0,
            noise_sd: 0.5,
            calibration_fraction: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvOptions {
    pub has_header: bool,
    /// Zero-based target column; the last column when absent.
    pub target_column: Option<usize>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { has_header: true, target_column: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UciConfig {
    pub shuffles: usize,
    pub test_fraction: f64,
    /// Proper-training share of the non-test rows; the rest calibrates.
    pub train_fraction: f64,
    pub hidden: usize,
    pub hidden_activation: Activation,
    pub train: TrainConfig,
    pub alpha: f64,
    pub csv: CsvOptions,
}

impl Default for UciConfig {
    fn default() -> Self {
        Self {
            shuffles: 20,
            test_fraction: 0.1,
            train_fraction: 0.8,
            hidden: 50,
            hidden_activation: Activation::Relu,
            train: TrainConfig { epochs: 100, batch_size: 100, learning_rate: 5e-3, ..Default::default() },
            alpha: 0.05,
            csv: CsvOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    None,
    Platt,
    Temperature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub shuffles: usize,
    pub validation_fraction: f64,
    /// Share of the training rows held out to fit the score calibrator.
    pub calibration_fraction: f64,
    pub calibration: CalibrationMethod,
    pub hidden_activation: Activation,
    pub bootstrap: usize,
    pub train: TrainConfig,
    pub tau: f64,
    pub csv: CsvOptions,
    /// Externally measured calibration gap, copied into the report summary.
    pub delta_calib: Option<f64>,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            shuffles: 30,
            validation_fraction: 0.2,
            calibration_fraction: 0.2,
            calibration: CalibrationMethod::Temperature,
            hidden_activation: Activation::Tanh,
            bootstrap: 20,
            train: TrainConfig { epochs: 40, batch_size: 50, learning_rate: 1e-2, ..Default::default() },
            tau: 0.5,
            csv: CsvOptions::default(),
            delta_calib: None,
        }
    }
}

fn fraction(name: &str, v: f64) -> AppResult<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(AppError::Config(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> AppResult<()> {
    if v >= min {
        Ok(())
    } else {
        Err(AppError::Config(format!("{name} must be at least {min}, got {v}")))
    }
}

fn training(name: &str, t: &TrainConfig) -> AppResult<()> {
    at_least(&format!("{name}.epochs"), t.epochs, 1)?;
    at_least(&format!("{name}.batch_size"), t.batch_size, 2)?;
    if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
        return Err(AppError::Config(format!("{name}.learning_rate must be positive")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> AppResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            AppError::Config(msg) => AppError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> AppResult<()> {
        fraction("p", self.p)?;
        if !(self.eta >= 0.0) {
            return Err(AppError::Config(format!("eta must be non-negative, got {}", self.eta)));
        }
        self.neuron.validate().map_err(|e| AppError::Config(format!("neuron: {e}")))?;

        let f = &self.fig1;
        if f.sample_sizes.is_empty() || f.sample_sizes.contains(&0) {
            return Err(AppError::Config("fig1.sample_sizes must be non-empty and positive".into()));
        }
        at_least("fig1.trials", f.trials, 1)?;
        if f.schemes.is_empty() {
            return Err(AppError::Config("fig1.schemes is empty".into()));
        }
        if !(f.beta_scale > 0.0 && f.beta_exponent.is_finite()) {
            return Err(AppError::Config("fig1 beta schedule must be positive".into()));
        }

        let t = &self.table1;
        at_least("table1.trials", t.trials, 1)?;
        at_least("table1.n_train", t.n_train, 2)?;
        at_least("table1.grid_size", t.grid_size, 1)?;
        at_least("table1.n_extra", t.n_extra, 2)?;
        at_least("table1.hidden", t.hidden, 1)?;
        training("table1.train", &t.train)?;
        t.noise.validate().map_err(|e| AppError::Config(format!("table1.noise: {e}")))?;

        let s = &self.serial;
        at_least("serial.horizon", s.horizon, 1)?;
        at_least("serial.lookback", s.lookback, 1)?;
        fraction("serial.calibration_fraction", s.calibration_fraction)?;
        if !(s.innovation_sd >= 0.0 && s.noise_sd >= 0.0 && s.phi.is_finite()) {
            return Err(AppError::Config("serial noise parameters must be finite and non-negative".into()));
        }

        let u = &self.uci;
        at_least("uci.shuffles", u.shuffles, 1)?;
        fraction("uci.test_fraction", u.test_fraction)?;
        fraction("uci.train_fraction", u.train_fraction)?;
        fraction("uci.alpha", u.alpha)?;
        at_least("uci.hidden", u.hidden, 1)?;
        training("uci.train", &u.train)?;

        let c = &self.classify;
        at_least("classify.shuffles", c.shuffles, 1)?;
        at_least("classify.bootstrap", c.bootstrap, 2)?;
        fraction("classify.validation_fraction", c.validation_fraction)?;
        fraction("classify.calibration_fraction", c.calibration_fraction)?;
        fraction("classify.tau", c.tau)?;
        training("classify.train", &c.train)?;
        Ok(())
    }
}

/// Labels used in reports for the four outcome subsets.
pub fn outcome_label(l: Outcome) -> &'static str {
    match l {
        Outcome::Tn => "tn",
        Outcome::Tp => "tp",
        Outcome::Fn => "fn",
        Outcome::Fp => "fp",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_override() {
        let cfg = ExperimentConfig::from_json(r#"{"p": 0.9, "neuron": {"beta": 500.0}, "fig1": {"trials": 3}}"#).unwrap();
        assert_eq!(cfg.p, 0.9);
        assert_eq!(cfg.neuron.beta, 500.0);
        assert_eq!(cfg.neuron.patience, NeuronConfig::default().patience);
        assert_eq!(cfg.fig1.trials, 3);
        assert_eq!(cfg.fig1.sample_sizes, vec![8, 12, 16, 24]);
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            r#"{"p": 1.5}"#,
            r#"{"unknown": 1}"#,
            r#"{"fig1": {"trials": 0}}"#,
            r#"{"uci": {"test_fraction": 0.0}}"#,
            r#"{"neuron": {"beta": -1.0}}"#,
            r#"{"classify": {"bootstrap": 1}}"#,
            "not json",
        ] {
            assert!(matches!(ExperimentConfig::from_json(bad), Err(AppError::Config(_))), "{bad}");
        }
    }
}
