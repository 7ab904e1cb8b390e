//! Split-conformal intervals built from neuron-estimated residual quantiles.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, domain, Error, Result};
use crate::neuron::{fit_interval_radius, IntervalRadius, NeuronConfig, PivotMode, ResidualSample};
use crate::stats::{median, normal_quantile, sample_std, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub shuffle_seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.8, shuffle_seed: 0 }
    }
}

/// Shuffles `0..n` and cuts it into proper-training and calibration indices.
///
/// The training part has `round(train_fraction * n)` entries.
pub fn split_dataset(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::InsufficientData(format!("cannot split {n} points")));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(domain(format!("train fraction must lie in (0,1), got {}", spec.train_fraction)));
    }
    let cut = (spec.train_fraction * n as f64).round() as usize;
    if cut == 0 || cut == n {
        return Err(domain(format!("train fraction {} leaves an empty split of {n} points", spec.train_fraction)));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    Rng::new(spec.shuffle_seed).shuffle(&mut idx);
    let calib = idx.split_off(cut);
    Ok((idx, calib))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionIntervalSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub p: f64,
}

impl PredictionIntervalSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, p: f64) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Shape(format!("{} lower vs {} upper bounds", lower.len(), upper.len())));
        }
        if let Some(i) = lower.iter().zip(&upper).position(|(l, u)| !(l <= u)) {
            return Err(domain(format!("interval {i} is inverted: [{}, {}]", lower[i], upper[i])));
        }
        Ok(Self { lower, upper, p })
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    pub fn covers(&self, i: usize, y: f64) -> bool {
        self.lower[i] <= y && y <= self.upper[i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "radii", rename_all = "snake_case")]
pub enum Radii {
    Fixed(IntervalRadius),
    /// One radius per forecast step; step `i` of a test sequence uses entry `i % len`.
    PerStep(Vec<IntervalRadius>),
}

/// Intervals `[f - r_L, f + r_U]` around each prediction.
pub fn build_intervals(predictions: &[f64], radii: &Radii, p: f64) -> Result<PredictionIntervalSet> {
    let steps: &[IntervalRadius] = match radii {
        Radii::Fixed(r) => std::slice::from_ref(r),
        Radii::PerStep(rs) if rs.is_empty() => return Err(domain("per-step radii are empty")),
        Radii::PerStep(rs) => rs,
    };
    if let Some(r) = steps.iter().find(|r| !(r.lower() >= 0.0 && r.upper() >= 0.0)) {
        return Err(domain(format!("radii must be non-negative, got {r:?}")));
    }
    let (lower, upper) = predictions
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let r = &steps[i % steps.len()];
            (f - r.lower(), f + r.upper())
        })
        .unzip();
    PredictionIntervalSet::new(lower, upper, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Symmetric,
    Split,
}

/// Residual quantiles from one calibration sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Calibration median of the residuals; intervals are centred at `f + shift`.
    pub shift: f64,
    pub symmetric: IntervalRadius,
    /// Absent when the relocated residuals lack one of the two signs.
    pub split: Option<IntervalRadius>,
    pub symmetric_picp: f64,
    pub split_picp: Option<f64>,
    pub selected: Variant,
    pub m: usize,
}

impl Calibration {
    pub fn radius(&self, variant: Variant) -> Option<IntervalRadius> {
        match variant {
            Variant::Symmetric => Some(self.symmetric),
            Variant::Split => self.split,
        }
    }

    pub fn selected_radius(&self) -> IntervalRadius {
        self.radius(self.selected).unwrap_or(self.symmetric)
    }

    /// Intervals around `predictions` for the selected variant.
    pub fn intervals(&self, predictions: &[f64], p: f64) -> Result<PredictionIntervalSet> {
        self.intervals_for(predictions, self.selected, p)
    }

    pub fn intervals_for(&self, predictions: &[f64], variant: Variant, p: f64) -> Result<PredictionIntervalSet> {
        let radius = self
            .radius(variant)
            .ok_or_else(|| Error::InsufficientData("split-sign radius was not fitted".into()))?;
        let centred: Vec<f64> = predictions.iter().map(|f| f + self.shift).collect();
        build_intervals(&centred, &Radii::Fixed(radius), p)
    }
}

fn coverage(relocated: &[f64], r: &IntervalRadius) -> f64 {
    relocated.iter().filter(|&&e| -r.lower() <= e && e <= r.upper()).count() as f64 / relocated.len() as f64
}

/// Fits both interval variants to residuals `y - f`.
///
/// The variant whose calibration coverage is closer to `p` is selected.
/// Coverage gaps within one binomial standard error of each other count as a
/// tie, which goes to the narrower variant.
pub fn calibrate_residuals(residuals: &[f64], p: f64, cfg: &NeuronConfig) -> Result<Calibration> {
    check_probability(p, "p")?;
    if residuals.is_empty() {
        return Err(Error::InsufficientData("no calibration residuals".into()));
    }
    let shift = median(residuals);
    let relocated: Vec<f64> = residuals.iter().map(|e| e - shift).collect();
    let symmetric = fit_interval_radius(&ResidualSample::new(relocated.clone(), PivotMode::Absolute)?, p, cfg)?;
    let split = match fit_interval_radius(&ResidualSample::new(relocated.clone(), PivotMode::SplitSign)?, p, cfg) {
        Ok(r) => Some(r),
        Err(Error::InsufficientData(msg)) => {
            log::debug!("split-sign fit skipped: {msg}");
            None
        }
        Err(e) => return Err(e),
    };
    let symmetric_picp = coverage(&relocated, &symmetric);
    let split_picp = split.as_ref().map(|r| coverage(&relocated, r));
    let selected = match (split, split_picp) {
        (Some(s), Some(sp)) => {
            let (ds, dp) = ((symmetric_picp - p).abs(), (sp - p).abs());
            let se = (p * (1.0 - p) / residuals.len() as f64).sqrt();
            if dp < ds - se || ((dp - ds).abs() <= se && s.width() < symmetric.width()) {
                Variant::Split
            } else {
                Variant::Symmetric
            }
        }
        _ => Variant::Symmetric,
    };
    Ok(Calibration { shift, symmetric, split, symmetric_picp, split_picp, selected, m: residuals.len() })
}

/// [`calibrate_residuals`] on the residuals of `predictions` against `targets`.
pub fn calibrate_global(predictions: &[f64], targets: &[f64], p: f64, cfg: &NeuronConfig) -> Result<Calibration> {
    if predictions.len() != targets.len() {
        return Err(Error::Shape(format!("{} predictions for {} targets", predictions.len(), targets.len())));
    }
    let residuals: Vec<f64> = targets.iter().zip(predictions).map(|(y, f)| y - f).collect();
    calibrate_residuals(&residuals, p, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingWindowSpec {
    pub horizon: usize,
}

/// One calibration per window position, from equal-length error windows.
///
/// Position `j` pools the `j`-th entry of every window.
pub fn calibrate_windows(windows: &[Vec<f64>], p: f64, cfg: &NeuronConfig) -> Result<Vec<Calibration>> {
    let horizon = windows.first().map_or(0, Vec::len);
    if horizon == 0 {
        return Err(Error::InsufficientData("no error windows".into()));
    }
    if let Some(w) = windows.iter().find(|w| w.len() != horizon) {
        return Err(Error::Shape(format!("window of length {} among windows of length {horizon}", w.len())));
    }
    (0..horizon)
        .map(|j| {
            let column: Vec<f64> = windows.iter().map(|w| w[j]).collect();
            calibrate_residuals(&column, p, cfg)
        })
        .collect()
}

/// Slides a `horizon`-long window over one residual sequence and calibrates
/// each position.
pub fn calibrate_rolling(
    residuals: &[f64],
    window: RollingWindowSpec,
    p: f64,
    cfg: &NeuronConfig,
) -> Result<Vec<Calibration>> {
    let h = window.horizon;
    if h == 0 {
        return Err(domain("horizon must be at least 1"));
    }
    if residuals.len() < h {
        return Err(Error::InsufficientData(format!("{} residuals for a horizon of {h}", residuals.len())));
    }
    let windows: Vec<Vec<f64>> = residuals.windows(h).map(<[f64]>::to_vec).collect();
    calibrate_windows(&windows, p, cfg)
}

/// Normal-theory radius `z σ̂ √(1 + 1/T)`, with `z` the two-sided level-`p`
/// normal quantile. `t` may be infinite.
pub fn baseline_normal_bounds(residuals: &[f64], t: f64, p: f64) -> Result<f64> {
    check_probability(p, "p")?;
    if residuals.len() < 2 {
        return Err(Error::InsufficientData(format!("{} residuals", residuals.len())));
    }
    if !(t >= 1.0) {
        return Err(domain(format!("T must be at least 1, got {t}")));
    }
    let sigma = sample_std(residuals);
    if sigma == 0.0 {
        return Ok(0.0);
    }
    Ok(normal_quantile((1.0 + p) / 2.0)? * sigma * (1.0 + 1.0 / t).sqrt())
}
