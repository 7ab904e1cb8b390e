//! Synthetic data generators for the experiment protocols.

use pim::stats::{DistributionSpec, Matrix, Rng};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;

/// Standardized observation noise, scaled by `σ(x) = 0.2 x²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Beta { a: f64, b: f64 },
}

impl NoiseKind {
    pub fn skewed() -> Self {
        Self::Beta { a: 0.2, b: 0.3 }
    }

    pub fn standard(self) -> DistributionSpec {
        match self {
            Self::Gaussian => DistributionSpec::normal(0.0, 1.0),
            Self::Beta { a, b } => DistributionSpec::beta(a, b, 0.0, 1.0),
        }
    }

    pub fn validate(self) -> pim::Result<()> {
        self.standard().validate()
    }

    pub fn is_symmetric(self) -> bool {
        matches!(self, Self::Gaussian)
    }
}

pub fn signal(x: f64) -> f64 {
    0.3 * x.sin()
}

pub fn noise_scale(x: f64) -> f64 {
    0.2 * x * x
}

/// Conditional `p`-quantile of the target at `x`.
pub fn exact_quantile(x: f64, p: f64, noise: NoiseKind) -> pim::Result<f64> {
    Ok(signal(x) + noise_scale(x) * noise.standard().quantile(p)?)
}

pub fn draw_target(x: f64, noise: NoiseKind, rng: &mut Rng) -> f64 {
    let s = noise_scale(x);
    if s == 0.0 {
        signal(x)
    } else {
        signal(x) + s * noise.standard().draw(rng)
    }
}

/// Midpoints of `size` equal cells partitioning [-2, 2].
pub fn grid(size: usize) -> Vec<f64> {
    let h = 4.0 / size as f64;
    (0..size).map(|j| -2.0 + (j as f64 + 0.5) * h).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRegressionSpec {
    pub noise: NoiseKind,
    pub n_train: usize,
    pub grid_size: usize,
    pub n_extra: usize,
}

impl Default for SyntheticRegressionSpec {
    fn default() -> Self {
        Self { noise: NoiseKind::Gaussian, n_train: 500, grid_size: 500, n_extra: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub train_x: Vec<f64>,
    pub train_y: Vec<f64>,
    pub grid: Vec<f64>,
    /// `n_extra` fresh targets at each grid point.
    pub grid_targets: Vec<Vec<f64>>,
}

/// `n` pairs with `x ~ U(-2, 2)`, redrawing any `x` that lands on a grid point.
pub fn draw_pairs(n: usize, noise: NoiseKind, grid: &[f64], rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(n);
    while xs.len() < n {
        let x = -2.0 + 4.0 * rng.uniform();
        if grid.binary_search_by(|g| g.total_cmp(&x)).is_err() {
            xs.push(x);
        }
    }
    let ys = xs.iter().map(|&x| draw_target(x, noise, rng)).collect();
    (xs, ys)
}

pub fn gen_synthetic(spec: &SyntheticRegressionSpec, rng: &mut Rng) -> SyntheticData {
    let g = grid(spec.grid_size);
    let (train_x, train_y) = draw_pairs(spec.n_train, spec.noise, &g, rng);
    let grid_targets = g.iter().map(|&x| (0..spec.n_extra).map(|_| draw_target(x, spec.noise, rng)).collect()).collect();
    SyntheticData { train_x, train_y, grid: g, grid_targets }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionFamily {
    /// Noise standard deviation proportional to `‖x‖`.
    Heteroskedastic,
    Homoskedastic,
}

fn feature_names(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

/// Regression table with `x ~ N(0, I_d)` and the linear mean `Σ x_j / (1 + j)`.
///
/// A linear mean keeps the homoskedastic family a true null for the White
/// test, whose first stage is a linear fit.
pub fn regression_dataset(family: RegressionFamily, n: usize, d: usize, rng: &mut Rng) -> Dataset {
    let x: Vec<f64> = (0..n * d).map(|_| rng.standard_normal()).collect();
    let target = (0..n)
        .map(|i| {
            let row = &x[i * d..(i + 1) * d];
            let mean = row.iter().enumerate().map(|(j, v)| v / (1.0 + j as f64)).sum::<f64>();
            let sd = match family {
                RegressionFamily::Heteroskedastic => 0.5 * row.iter().map(|v| v * v).sum::<f64>().sqrt(),
                RegressionFamily::Homoskedastic => 0.5,
            };
            mean + sd * rng.standard_normal()
        })
        .collect();
    Dataset {
        name: format!("{family:?}").to_lowercase(),
        features: Matrix::from_row_major(n, d, x).expect("sized above"),
        target,
        feature_names: feature_names(d),
    }
}

/// Balanced logistic classification: `y ~ Bernoulli(σ(w·x))` with `x ~ N(0, I_d)`.
pub fn logistic_dataset(n: usize, d: usize, rng: &mut Rng) -> Dataset {
    let w: Vec<f64> = (0..d).map(|j| 1.5 / (1.0 + j as f64)).collect();
    let x: Vec<f64> = (0..n * d).map(|_| rng.standard_normal()).collect();
    let target = (0..n)
        .map(|i| {
            let z: f64 = x[i * d..(i + 1) * d].iter().zip(&w).map(|(a, b)| a * b).sum();
            (rng.uniform() < pim::neuron::sigmoid(z)) as u8 as f64
        })
        .collect();
    Dataset {
        name: "logistic".into(),
        features: Matrix::from_row_major(n, d, x).expect("sized above"),
        target,
        feature_names: feature_names(d),
    }
}

/// Observations of an AR(1) latent level plus independent noise.
pub fn ar_series(n: usize, phi: f64, innovation_sd: f64, noise_sd: f64, rng: &mut Rng) -> Vec<f64> {
    let mut level = 0.0;
    (0..n)
        .map(|_| {
            level = phi * level + innovation_sd * rng.standard_normal();
            level + noise_sd * rng.standard_normal()
        })
        .collect()
}
