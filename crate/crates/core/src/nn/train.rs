use serde::{Deserialize, Serialize};

use super::loss::Loss;
use super::mlp::{Activations, MlpModel};
use crate::error::{domain, Error, Result};
use crate::stats::{Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Self::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Seeds the minibatch order.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::adam(),
            learning_rate: 1e-2,
            epochs: 300,
            batch_size: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(domain("epochs and batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(domain(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    /// Mean minibatch loss of each epoch.
    pub loss_trace: Vec<f64>,
}

/// Loss and parameter gradient of `model` on the rows `idx` of `(x, y)`.
pub fn batch_loss_and_gradient(model: &MlpModel, x: &Matrix, y: &[f64], idx: &[usize], loss: &Loss) -> Result<(f64, Vec<f64>)> {
    let k = model.output_dim();
    let mut acts = Activations::for_model(model);
    let mut scratch = Activations::for_model(model);
    let mut outputs = Vec::with_capacity(idx.len() * k);
    let mut targets = Vec::with_capacity(idx.len());
    for &i in idx {
        model.forward_into(x.row(i), &mut acts);
        outputs.extend_from_slice(acts.output());
        targets.push(y[i]);
    }
    let (value, d_out) = loss.evaluate(&outputs, &targets)?;
    let mut grad = vec![0.0; model.parameter_count()];
    for (b, &i) in idx.iter().enumerate() {
        model.forward_into(x.row(i), &mut acts);
        model.backward_into(&acts, &d_out[b * k..(b + 1) * k], &mut grad, &mut scratch);
    }
    Ok((value, grad))
}

/// Minibatch training with backpropagation.
///
/// Batches are drawn without replacement from a permutation reshuffled each
/// epoch; a trailing short batch is kept. Fixed seed and inputs give
/// bit-identical weights.
pub fn mlp_train(mut model: MlpModel, x: &Matrix, y: &[f64], loss: &Loss, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = x.rows();
    if n == 0 || y.len() != n {
        return Err(Error::Shape(format!("{n} input rows for {} targets", y.len())));
    }
    if x.cols() != model.input_dim() || loss.output_dim() != model.output_dim() {
        return Err(Error::Shape(format!(
            "model {:?} incompatible with {} features and a {}-output loss",
            model.layer_sizes,
            x.cols(),
            loss.output_dim()
        )));
    }
    if matches!(loss, Loss::Qd { .. }) && cfg.batch_size.min(n) < 2 {
        return Err(domain("qd training needs batches of at least 2"));
    }

    let mut rng = Rng::new(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut params = model.params();
    let mut m1 = vec![0.0; params.len()];
    let mut m2 = vec![0.0; params.len()];
    let mut step = 0i32;
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            // A lone trailing point cannot form a QD batch; fold it into the next epoch.
            if chunk.len() < 2 && matches!(loss, Loss::Qd { .. }) {
                continue;
            }
            let (value, grad) = batch_loss_and_gradient(&model, x, y, chunk, loss)?;
            if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epochs: epoch, last_stable: trace.last().copied().unwrap_or(f64::NAN) });
            }
            total += value;
            batches += 1;
            step += 1;
            match cfg.optimizer {
                Optimizer::Sgd => {
                    for (w, g) in params.iter_mut().zip(&grad) {
                        *w -= cfg.learning_rate * g;
                    }
                }
                Optimizer::Adam { beta1, beta2, eps } => {
                    let c1 = 1.0 - beta1.powi(step);
                    let c2 = 1.0 - beta2.powi(step);
                    for j in 0..params.len() {
                        m1[j] = beta1 * m1[j] + (1.0 - beta1) * grad[j];
                        m2[j] = beta2 * m2[j] + (1.0 - beta2) * grad[j] * grad[j];
                        params[j] -= cfg.learning_rate * (m1[j] / c1) / ((m2[j] / c2).sqrt() + eps);
                    }
                }
            }
            model.set_params(&params)?;
        }
        trace.push(total / batches.max(1) as f64);
    }
    Ok(TrainOutcome { model, loss_trace: trace })
}

/// Applies the model to every row of `x`.
pub fn predict(model: &MlpModel, x: &Matrix) -> Result<Vec<Vec<f64>>> {
    if x.cols() != model.input_dim() {
        return Err(Error::Shape(format!("model expects {} inputs, got {}", model.input_dim(), x.cols())));
    }
    let mut acts = Activations::for_model(model);
    Ok((0..x.rows())
        .map(|r| {
            model.forward_into(x.row(r), &mut acts);
            acts.output().to_vec()
        })
        .collect())
}
