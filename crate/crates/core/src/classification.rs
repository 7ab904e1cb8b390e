//! Confidence intervals for binary classification rates.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, domain, Error, Result};
use crate::neuron::{fit_quantile, NeuronConfig, ResidualSample};
use crate::order_stats::{quantile_by_rank, InterpolationScheme};
use crate::stats::{normal_quantile, Rng};

/// Below this displacement a rate neuron counts as never having trained.
pub const UNMOVED_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Outcome {
    Tn,
    Tp,
    Fn,
    Fp,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [Outcome::Tn, Outcome::Tp, Outcome::Fn, Outcome::Fp];

    fn of(score: f64, label: bool, tau: f64) -> Self {
        match (score > tau, label) {
            (false, false) => Self::Tn,
            (true, true) => Self::Tp,
            (false, true) => Self::Fn,
            (true, false) => Self::Fp,
        }
    }

    pub fn is_true(self) -> bool {
        matches!(self, Self::Tn | Self::Tp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionPartition {
    pub tau: f64,
    /// Scores of each outcome, indexed as [`Outcome::ALL`].
    subsets: [Vec<f64>; 4],
    pub n: usize,
}

impl ConfusionPartition {
    pub fn scores(&self, l: Outcome) -> &[f64] {
        &self.subsets[l as usize]
    }

    pub fn count(&self, l: Outcome) -> usize {
        self.subsets[l as usize].len()
    }

    pub fn negatives(&self) -> usize {
        self.count(Outcome::Tn) + self.count(Outcome::Fp)
    }

    pub fn positives(&self) -> usize {
        self.count(Outcome::Tp) + self.count(Outcome::Fn)
    }

    pub fn p_n(&self) -> f64 {
        self.negatives() as f64 / self.n as f64
    }

    pub fn p_p(&self) -> f64 {
        self.positives() as f64 / self.n as f64
    }

    /// Conditional rate `R_l`; absent when its class is missing.
    pub fn rate(&self, l: Outcome) -> Option<f64> {
        let class = match l {
            Outcome::Tp | Outcome::Fn => self.positives(),
            Outcome::Tn | Outcome::Fp => self.negatives(),
        };
        (class > 0).then(|| self.count(l) as f64 / class as f64)
    }

    /// Signed errors: `y - score` for true outcomes, `tau - score` for false ones.
    pub fn errors(&self, l: Outcome) -> Vec<f64> {
        let target = match l {
            Outcome::Tn => 0.0,
            Outcome::Tp => 1.0,
            Outcome::Fn | Outcome::Fp => self.tau,
        };
        self.scores(l).iter().map(|s| target - s).collect()
    }
}

pub fn partition_confusion(scores: &[f64], labels: &[bool], tau: f64) -> Result<ConfusionPartition> {
    if scores.is_empty() {
        return Err(domain("no scores to partition"));
    }
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(domain(format!("score {s} outside [0, 1]")));
    }
    let mut subsets: [Vec<f64>; 4] = Default::default();
    for (&s, &y) in scores.iter().zip(labels) {
        subsets[Outcome::of(s, y, tau) as usize].push(s);
    }
    Ok(ConfusionPartition { tau, subsets, n: scores.len() })
}

pub fn accuracy(partition: &ConfusionPartition) -> f64 {
    (partition.count(Outcome::Tn) + partition.count(Outcome::Tp)) as f64 / partition.n as f64
}

/// All four error samples, indexed as [`Outcome::ALL`].
pub fn classification_errors(partition: &ConfusionPartition) -> [Vec<f64>; 4] {
    Outcome::ALL.map(|l| partition.errors(l))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RateCi {
    Value { delta: f64 },
    NotAvailable { reason: String },
}

impl RateCi {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Value { delta } => Some(*delta),
            Self::NotAvailable { .. } => None,
        }
    }

    fn na(reason: impl Into<String>) -> Self {
        Self::NotAvailable { reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCis {
    /// Indexed as [`Outcome::ALL`].
    pub delta: [RateCi; 4],
    pub p: f64,
}

impl RateCis {
    pub fn get(&self, l: Outcome) -> &RateCi {
        &self.delta[l as usize]
    }
}

/// One absolute-error neuron per outcome subset.
pub fn rate_cis(partition: &ConfusionPartition, p: f64, cfg: &NeuronConfig) -> Result<RateCis> {
    check_probability(p, "p")?;
    let cfg = cfg.with_p(p);
    let mut delta: [RateCi; 4] = Default::default();
    for l in Outcome::ALL {
        let errors = partition.errors(l);
        delta[l as usize] = if errors.is_empty() {
            RateCi::na(format!("no {l:?} predictions"))
        } else {
            let est = fit_quantile(&ResidualSample::absolute(errors)?, &cfg)?;
            if (est.r_hat - est.initial_weight).abs() <= UNMOVED_TOLERANCE {
                RateCi::na(format!("{l:?} neuron stayed at its initial weight"))
            } else {
                RateCi::Value { delta: est.r_hat.max(0.0) }
            }
        };
    }
    Ok(RateCis { delta, p })
}

impl Default for RateCi {
    fn default() -> Self {
        RateCi::na("not fitted")
    }
}

/// `p_N δR_TN + p_P δR_TP`.
pub fn accuracy_ci(cis: &RateCis, p_n: f64, p_p: f64) -> RateCi {
    match (cis.get(Outcome::Tn), cis.get(Outcome::Tp)) {
        (RateCi::Value { delta: tn }, RateCi::Value { delta: tp }) => RateCi::Value { delta: p_n * tn + p_p * tp },
        (RateCi::NotAvailable { reason }, _) | (_, RateCi::NotAvailable { reason }) => {
            RateCi::na(format!("accuracy interval needs both true rates: {reason}"))
        }
    }
}

/// Normal-approximation half-width `z √(μ(1-μ)/m)`.
pub fn binomial_ci(mu_hat: f64, m: usize, p: f64) -> Result<f64> {
    check_probability(p, "p")?;
    if !(0.0..=1.0).contains(&mu_hat) {
        return Err(domain(format!("accuracy {mu_hat} outside [0, 1]")));
    }
    if m == 0 {
        return Err(Error::InsufficientData("binomial interval over zero samples".into()));
    }
    Ok(normal_quantile((1.0 + p) / 2.0)? * (mu_hat * (1.0 - mu_hat) / m as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    /// `q_{(1+p)/2} - q_{(1-p)/2}` of the bootstrap accuracies.
    pub width: f64,
    pub accuracies: Vec<f64>,
}

/// Bootstrap spread of accuracy over `b` resampled training sets.
///
/// `train_and_eval` receives the resampled training indices (drawn with
/// replacement from `0..n_train`) and a per-trial random stream.
pub fn bootstrap_accuracy_ci<F>(n_train: usize, b: usize, p: f64, rng: &Rng, mut train_and_eval: F) -> Result<BootstrapCi>
where
    F: FnMut(&[usize], &mut Rng) -> Result<f64>,
{
    check_probability(p, "p")?;
    if b < 2 {
        return Err(domain(format!("bootstrap needs at least 2 replicates, got {b}")));
    }
    if n_train == 0 {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    let mut accuracies = Vec::with_capacity(b);
    for trial in 0..b {
        let mut stream = rng.substream(trial as u64);
        let idx: Vec<usize> = (0..n_train).map(|_| stream.index(n_train)).collect();
        let acc = train_and_eval(&idx, &mut stream).map_err(|e| Error::Trial { index: trial, source: Box::new(e) })?;
        accuracies.push(acc);
    }
    Ok(BootstrapCi { width: bootstrap_width(&accuracies, p)?, accuracies })
}

pub fn bootstrap_width(accuracies: &[f64], p: f64) -> Result<f64> {
    let hi = quantile_by_rank(accuracies, (1.0 + p) / 2.0, InterpolationScheme::Linear)?;
    let lo = quantile_by_rank(accuracies, (1.0 - p) / 2.0, InterpolationScheme::Linear)?;
    Ok(hi - lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub tp: f64,
    pub fp: f64,
    pub tn: f64,
    pub fn_: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveValues {
    pub ppv: f64,
    pub delta_ppv: f64,
    pub npv: f64,
    pub delta_npv: f64,
    /// The first-order parts of the two uncertainties.
    pub delta_ppv_linear: f64,
    pub delta_npv_linear: f64,
}

/// `g = t q / (t q + f (1 - q))` and its uncertainty, with second-order
/// correction on the false rate only. Returns (value, linear part, total).
fn posterior(t: f64, f: f64, dt: f64, df: f64, q: f64) -> (f64, f64, f64) {
    let ratio = (1.0 - q) / q;
    let g = t * q / (t * q + f * (1.0 - q));
    let linear = ratio * g * g * (f / t * dt / t + df / t);
    let quadratic = ratio * g * g * ratio * g * (df / t).powi(2);
    (g, linear, linear + quadratic)
}

/// Bayes-inverted rates PPV and NPV with propagated uncertainties.
pub fn propagate_ppv_npv(rates: Rates, deltas: Rates, p_n: f64, p_p: f64) -> Result<PredictiveValues> {
    if !(rates.tp > 0.0 && rates.tn > 0.0) {
        return Err(Error::ZeroDenominator(format!("R_TP = {} and R_TN = {} must be positive", rates.tp, rates.tn)));
    }
    if !(p_n > 0.0 && p_p > 0.0) {
        return Err(Error::ZeroDenominator(format!("class proportions {p_n}, {p_p} must be positive")));
    }
    let q = p_p / (p_p + p_n);
    let (ppv, ppv_lin, ppv_tot) = posterior(rates.tp, rates.fp, deltas.tp, deltas.fp, q);
    let (npv, npv_lin, npv_tot) = posterior(rates.tn, rates.fn_, deltas.tn, deltas.fn_, 1.0 - q);
    Ok(PredictiveValues {
        ppv,
        delta_ppv: ppv_tot,
        npv,
        delta_npv: npv_tot,
        delta_ppv_linear: ppv_lin,
        delta_npv_linear: npv_lin,
    })
}

const CLIP: f64 = 1e-6;
const MAX_ITERATIONS: usize = 20_000;
const GRAD_TOL: f64 = 1e-8;

fn logit(s: f64) -> f64 {
    let s = s.clamp(CLIP, 1.0 - CLIP);
    (s / (1.0 - s)).ln()
}

fn sigmoid(x: f64) -> f64 {
    crate::neuron::sigmoid(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreCalibrator {
    Identity,
    Platt { a: f64, b: f64 },
    Temperature { t: f64 },
}

impl ScoreCalibrator {
    pub fn apply(&self, score: f64) -> f64 {
        match *self {
            Self::Identity => score,
            Self::Platt { a, b } => sigmoid(a * logit(score) + b),
            Self::Temperature { t } => sigmoid(logit(score) / t),
        }
    }

    pub fn apply_all(&self, scores: &[f64]) -> Vec<f64> {
        scores.iter().map(|&s| self.apply(s)).collect()
    }
}

fn calibration_inputs(scores: &[f64], labels: &[bool]) -> Result<(Vec<f64>, Vec<f64>)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::DegenerateFit("calibration needs both classes".into()));
    }
    Ok((scores.iter().map(|&s| logit(s)).collect(), labels.iter().map(|&y| y as u8 as f64).collect()))
}

/// Gradient ascent on the mean Bernoulli log-likelihood of `σ(a x + b)`.
///
/// The step is the inverse of the curvature bound `(E[x²] + 1)/4`.
pub fn platt_calibrate(scores: &[f64], labels: &[bool]) -> Result<ScoreCalibrator> {
    let (x, y) = calibration_inputs(scores, labels)?;
    let n = x.len() as f64;
    let lr = 4.0 / (x.iter().map(|v| v * v).sum::<f64>() / n + 1.0);
    let (mut a, mut b) = (1.0, 0.0);
    for _ in 0..MAX_ITERATIONS {
        let (mut ga, mut gb) = (0.0, 0.0);
        for (xi, yi) in x.iter().zip(&y) {
            let r = yi - sigmoid(a * xi + b);
            ga += r * xi;
            gb += r;
        }
        let (ga, gb) = (ga / n, gb / n);
        if ga.hypot(gb) < GRAD_TOL {
            break;
        }
        a += lr * ga;
        b += lr * gb;
    }
    Ok(ScoreCalibrator::Platt { a, b })
}

/// Fits `σ(x / T)` by gradient ascent on `θ = 1/T`.
pub fn temperature_calibrate(scores: &[f64], labels: &[bool]) -> Result<ScoreCalibrator> {
    let (x, y) = calibration_inputs(scores, labels)?;
    let n = x.len() as f64;
    let second = x.iter().map(|v| v * v).sum::<f64>() / n;
    if second == 0.0 {
        return Err(Error::DegenerateFit("all logits are zero".into()));
    }
    let lr = 4.0 / second;
    let mut theta = 1.0;
    for _ in 0..MAX_ITERATIONS {
        let g = x.iter().zip(&y).map(|(xi, yi)| (yi - sigmoid(theta * xi)) * xi).sum::<f64>() / n;
        if g.abs() < GRAD_TOL {
            break;
        }
        theta += lr * g;
    }
    if !(theta > 0.0) {
        return Err(Error::DegenerateFit(format!("scores are anti-correlated with labels (1/T = {theta})")));
    }
    Ok(ScoreCalibrator::Temperature { t: 1.0 / theta })
}
