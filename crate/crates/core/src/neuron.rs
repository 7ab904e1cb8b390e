//! Single-neuron quantile estimation.
//!
//! The neuron has one weight `w`. Its loss is `(F̃(w) - p)²`, where
//! `F̃(w) = (1/m) Σ σ(β(w - v_i))` is the empirical CDF with each indicator
//! replaced by a sigmoid of sharpness `β`. Full-batch gradient descent drives
//! `w` towards the `p`-quantile of the sample. The returned weight is the
//! iterate whose *hard* empirical CDF came closest to `p`.
//!
//! By default the sample is standardized before training (centred on its
//! mean, divided by its standard deviation), so `β` and the learning rate
//! are dimensionless. The estimate is mapped back to raw units on return.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotMode {
    Signed,
    Absolute,
    SplitSign,
}

/// Finite, non-empty residuals plus the transform the estimator applies.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSample {
    values: Vec<f64>,
    mode: PivotMode,
}

impl ResidualSample {
    pub fn new(values: Vec<f64>, mode: PivotMode) -> Result<Self> {
        if values.is_empty() {
            return Err(domain("residual sample is empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!("residual {i} is not finite ({})", values[i])));
        }
        Ok(Self { values, mode })
    }

    pub fn signed(values: Vec<f64>) -> Result<Self> {
        Self::new(values, PivotMode::Signed)
    }

    pub fn absolute(values: Vec<f64>) -> Result<Self> {
        Self::new(values, PivotMode::Absolute)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mode(&self) -> PivotMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The values the neuron sees: `|ε|` in absolute mode, `ε` otherwise.
    pub fn transformed(&self) -> Vec<f64> {
        match self.mode {
            PivotMode::Absolute => self.values.iter().map(|v| v.abs()).collect(),
            PivotMode::Signed | PivotMode::SplitSign => self.values.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Mean of the transformed values.
    SampleMean,
    /// Midpoint of the smallest and largest transformed value.
    SampleMidrange,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkingUnits {
    /// Train on `(v - mean) / sd`; `β` and the learning rate are dimensionless.
    Standardized,
    /// Train on the values as given.
    Raw,
}

/// Sample-size rule for the sharpness, `β_m = scale · m^exponent`.
///
/// A sigmoid narrower than the gaps between neighbouring points turns the
/// smoothed CDF into a staircase with flat steps, where gradient descent
/// crawls. Growing `β` like `√m` keeps the smoothing width `1/β` above the
/// point spacing, which shrinks like `1/m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule {
    pub scale: f64,
    pub exponent: f64,
}

impl BetaSchedule {
    pub fn at(&self, m: usize) -> f64 {
        self.scale * (m as f64).powf(self.exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuronConfig {
    pub p: f64,
    /// Sharpness ceiling; with a schedule the fit uses `min(beta, β_m)`.
    pub beta: f64,
    pub beta_schedule: Option<BetaSchedule>,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub init: Init,
    pub units: WorkingUnits,
    pub record_trace: bool,
}

impl Default for NeuronConfig {
    fn default() -> Self {
        Self {
            p: 0.95,
            beta: 1e3,
            beta_schedule: Some(BetaSchedule { scale: 3.0, exponent: 0.5 }),
            learning_rate: 4.0,
            max_epochs: 10_000,
            patience: 200,
            init: Init::SampleMean,
            units: WorkingUnits::Standardized,
            record_trace: false,
        }
    }
}

impl NeuronConfig {
    pub fn with_p(&self, p: f64) -> Self {
        Self { p, ..self.clone() }
    }

    /// Sharpness used for a sample of `m` points.
    pub fn effective_beta(&self, m: usize) -> f64 {
        match self.beta_schedule {
            Some(s) => self.beta.min(s.at(m)),
            None => self.beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_probability(self.p, "p")?;
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(domain(format!("beta must be positive and finite, got {}", self.beta)));
        }
        if let Some(b) = self.beta_schedule {
            if !(b.scale > 0.0 && b.scale.is_finite() && b.exponent.is_finite()) {
                return Err(domain(format!("beta schedule needs a positive scale and finite exponent, got {b:?}")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(domain(format!("learning rate must be positive and finite, got {}", self.learning_rate)));
        }
        if self.max_epochs == 0 {
            return Err(domain("max_epochs must be at least 1"));
        }
        if let Init::Explicit(w) = self.init {
            if !w.is_finite() {
                return Err(domain("explicit initial weight must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub epoch: usize,
    pub weight: f64,
    pub hard_gap: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    /// The learned weight, in the units of the input sample.
    pub r_hat: f64,
    /// Hard empirical CDF at `r_hat`.
    pub achieved_cdf: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// `|F_m(r_hat) - p|` with the hard indicator.
    pub best_gap: f64,
    pub initial_weight: f64,
    pub initial_gap: f64,
    pub learning_rate: f64,
    pub trace: Vec<TracePoint>,
}

/// Logistic function, evaluated without overflow for any finite argument.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `σ'(x) = σ(x)(1 - σ(x))`, computed from `e^{-|x|}` so tails do not cancel.
pub fn sigmoid_derivative(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("beta must be positive and finite, got {beta}")))
    }
}

/// `(1/m) Σ σ(β(w - v_i))` over the transformed sample values.
pub fn smoothed_ecdf(w: f64, sample: &ResidualSample, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let v = sample.transformed();
    Ok(v.iter().map(|&x| sigmoid(beta * (w - x))).sum::<f64>() / v.len() as f64)
}

/// Loss `(F̃(w) - p)²` and its derivative in `w`, by direct summation.
pub fn pim_loss_and_gradient(w: f64, sample: &ResidualSample, cfg: &NeuronConfig) -> Result<(f64, f64)> {
    check_beta(cfg.beta)?;
    check_probability(cfg.p, "p")?;
    let v = sample.transformed();
    let m = v.len() as f64;
    let (mut f, mut slope) = (0.0, 0.0);
    for &x in &v {
        let t = cfg.beta * (w - x);
        f += sigmoid(t);
        slope += sigmoid_derivative(t);
    }
    let f = f / m;
    let slope = cfg.beta * slope / m;
    let diff = f - cfg.p;
    Ok((diff * diff, 2.0 * diff * slope))
}

/// Beyond this many smoothing widths a sigmoid term is 0 or 1 to within 5e-18.
const WINDOW: f64 = 40.0;
/// Updates smaller than this (in working units) count as a stationary point.
const STEP_TOL: f64 = 1e-12;
/// Gap differences below this are ties, broken by the smoothed loss.
const GAP_TIE: f64 = 1e-15;

/// Sorted working-unit sample with the affine map back to raw units.
struct Prepared {
    z: Vec<f64>,
    raw_sorted: Vec<f64>,
    loc: f64,
    scale: f64,
}

impl Prepared {
    fn new(mut raw: Vec<f64>, units: WorkingUnits) -> Self {
        raw.sort_by(f64::total_cmp);
        let (loc, scale) = match units {
            WorkingUnits::Raw => (0.0, 1.0),
            WorkingUnits::Standardized => {
                let mean = crate::stats::mean(&raw);
                let sd = crate::stats::sample_std(&raw);
                (mean, if sd > 0.0 && sd.is_finite() { sd } else { 1.0 })
            }
        };
        let z = raw.iter().map(|v| (v - loc) / scale).collect();
        Self { z, raw_sorted: raw, loc, scale }
    }

    fn to_raw(&self, w: f64) -> f64 {
        self.loc + self.scale * w
    }

    fn to_working(&self, r: f64) -> f64 {
        (r - self.loc) / self.scale
    }

    fn m(&self) -> f64 {
        self.z.len() as f64
    }

    /// Smoothed CDF and its slope at `w`, summing only the unsaturated terms.
    fn smoothed(&self, w: f64, beta: f64) -> (f64, f64) {
        let half = WINDOW / beta;
        let lo = self.z.partition_point(|&v| v < w - half);
        let hi = self.z.partition_point(|&v| v <= w + half);
        let (mut f, mut slope) = (lo as f64, 0.0);
        for &v in &self.z[lo..hi] {
            let t = beta * (w - v);
            f += sigmoid(t);
            slope += sigmoid_derivative(t);
        }
        (f / self.m(), beta * slope / self.m())
    }

    /// Box-kernel estimate of the largest smoothed density: the most points in
    /// any interval of width `4/β`, times `β/(4m)`. An atom of `k` points
    /// gives `kβ/(4m)`, the exact sigmoid peak.
    fn peak_slope(&self, beta: f64) -> f64 {
        let width = 4.0 / beta;
        let mut most = 0usize;
        let mut hi = 0usize;
        for (lo, &v) in self.z.iter().enumerate() {
            while hi < self.z.len() && self.z[hi] <= v + width {
                hi += 1;
            }
            most = most.max(hi - lo);
        }
        most as f64 * beta / (4.0 * self.m())
    }

    fn hard_cdf_working(&self, w: f64) -> f64 {
        self.z.partition_point(|&v| v <= w) as f64 / self.m()
    }

    fn hard_cdf_raw(&self, r: f64) -> f64 {
        self.raw_sorted.partition_point(|&v| v <= r) as f64 / self.m()
    }
}

struct Diverged {
    epochs: usize,
    last_stable: f64,
}

fn descend(
    prep: &Prepared,
    cfg: &NeuronConfig,
    w0: f64,
    lr: f64,
) -> std::result::Result<QuantileEstimate, Diverged> {
    let p = cfg.p;
    let beta = cfg.effective_beta(prep.z.len());
    let mut w = w0;
    let initial_gap = (prep.hard_cdf_working(w0) - p).abs();
    let mut best = (f64::INFINITY, f64::INFINITY, w0, 0usize);
    let mut stall = 0usize;
    let mut epochs_run = 0usize;
    let mut trace = Vec::new();

    for epoch in 0..cfg.max_epochs {
        epochs_run = epoch + 1;
        let (f, slope) = prep.smoothed(w, beta);
        let diff = f - p;
        let loss = diff * diff;
        let grad = 2.0 * diff * slope;
        if !loss.is_finite() || !grad.is_finite() {
            return Err(Diverged { epochs: epoch, last_stable: prep.to_raw(best.2) });
        }
        let gap = (prep.hard_cdf_working(w) - p).abs();
        if cfg.record_trace {
            trace.push(TracePoint { epoch, weight: prep.to_raw(w), hard_gap: gap, loss });
        }

        let improved = gap < best.0 - GAP_TIE || ((gap - best.0).abs() <= GAP_TIE && loss < best.1);
        if improved {
            best = (gap, loss, w, epoch);
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience {
                break;
            }
        }

        let step = lr * grad;
        if step.abs() < STEP_TOL {
            break;
        }
        w -= step;
        if !w.is_finite() {
            return Err(Diverged { epochs: epoch + 1, last_stable: prep.to_raw(best.2) });
        }
    }

    let r_hat = prep.to_raw(best.2);
    let achieved_cdf = prep.hard_cdf_raw(r_hat);
    Ok(QuantileEstimate {
        r_hat,
        achieved_cdf,
        epochs_run,
        best_epoch: best.3,
        best_gap: (achieved_cdf - p).abs(),
        initial_weight: prep.to_raw(w0),
        initial_gap,
        learning_rate: lr,
        trace,
    })
}

/// Trains one neuron on `sample` at level `cfg.p`.
///
/// The learning rate is capped once, before training, by `1 / (2 s²)` with
/// `s` the larger of `F̃'(w₀)` and the sample's peak smoothed density: the
/// inverse curvature of the loss near its steepest point. Without it a step
/// taken next to a dense cluster or near-atom jumps past it into the flat
/// region beyond the sample.
///
/// If the iterate becomes non-finite, training restarts once from the
/// initial weight with half the learning rate; a second failure is
/// [`Error::Divergence`].
pub fn fit_quantile(sample: &ResidualSample, cfg: &NeuronConfig) -> Result<QuantileEstimate> {
    cfg.validate()?;
    let raw = sample.transformed();
    let w0_raw = match cfg.init {
        Init::SampleMean => crate::stats::mean(&raw),
        Init::SampleMidrange => {
            let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            0.5 * (lo + hi)
        }
        Init::Explicit(v) => v,
    };
    let prep = Prepared::new(raw, cfg.units);
    let w0 = prep.to_working(w0_raw);
    // Every level of an atom is the atom itself.
    let (lo, hi) = (prep.raw_sorted[0], prep.raw_sorted[prep.raw_sorted.len() - 1]);
    if lo == hi {
        return Ok(QuantileEstimate {
            r_hat: lo,
            achieved_cdf: 1.0,
            epochs_run: 0,
            best_epoch: 0,
            best_gap: 1.0 - cfg.p,
            initial_weight: w0_raw,
            initial_gap: (prep.hard_cdf_raw(w0_raw) - cfg.p).abs(),
            learning_rate: cfg.learning_rate,
            trace: Vec::new(),
        });
    }

    let beta = cfg.effective_beta(prep.z.len());
    let slope0 = prep.smoothed(w0, beta).1.max(prep.peak_slope(beta));
    let lr = if slope0 > 0.0 {
        cfg.learning_rate.min(0.5 / (slope0 * slope0))
    } else {
        cfg.learning_rate
    };

    match descend(&prep, cfg, w0, lr) {
        Ok(est) => Ok(est),
        Err(first) => {
            log::warn!(
                "quantile neuron diverged after {} epochs at lr={lr}; retrying at lr={}",
                first.epochs,
                lr / 2.0
            );
            descend(&prep, cfg, w0, lr / 2.0)
                .map_err(|d| Error::Divergence { epochs: d.epochs, last_stable: d.last_stable })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntervalRadius {
    Symmetric { r: f64 },
    Split { lower: f64, upper: f64 },
}

impl IntervalRadius {
    pub fn lower(&self) -> f64 {
        match *self {
            Self::Symmetric { r } => r,
            Self::Split { lower, .. } => lower,
        }
    }

    pub fn upper(&self) -> f64 {
        match *self {
            Self::Symmetric { r } => r,
            Self::Split { upper, .. } => upper,
        }
    }

    pub fn width(&self) -> f64 {
        self.lower() + self.upper()
    }
}

/// Radius of a `p`-level interval around a point prediction.
///
/// Absolute mode fits one neuron on `|ε|`. Split-sign mode fits `|ε|` over
/// `ε ≤ 0` for the lower side and `ε` over `ε > 0` for the upper side. Both
/// sides use level `p`. Radii are clamped at zero.
pub fn fit_interval_radius(residuals: &ResidualSample, p: f64, cfg: &NeuronConfig) -> Result<IntervalRadius> {
    check_probability(p, "p")?;
    let cfg = cfg.with_p(p);
    match residuals.mode() {
        PivotMode::Absolute => {
            let est = fit_quantile(residuals, &cfg)?;
            Ok(IntervalRadius::Symmetric { r: est.r_hat.max(0.0) })
        }
        PivotMode::SplitSign => {
            let (neg, pos): (Vec<f64>, Vec<f64>) = residuals.values().iter().partition(|&&e| e <= 0.0);
            if neg.is_empty() || pos.is_empty() {
                return Err(Error::InsufficientData(format!(
                    "split-sign fit needs both signs, got {} non-positive and {} positive residuals",
                    neg.len(),
                    pos.len()
                )));
            }
            let lower = fit_quantile(&ResidualSample::absolute(neg)?, &cfg)?.r_hat.max(0.0);
            let upper = fit_quantile(&ResidualSample::signed(pos)?, &cfg)?.r_hat.max(0.0);
            Ok(IntervalRadius::Split { lower, upper })
        }
        PivotMode::Signed => Err(domain("interval radius needs an absolute or split-sign sample")),
    }
}
