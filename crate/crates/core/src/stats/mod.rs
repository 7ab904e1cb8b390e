pub mod dist;
pub mod linalg;
pub mod rng;
pub mod special;
pub mod spectrum;

pub use dist::{DistributionKind, DistributionSpec};
pub use linalg::{independent_columns, ols_fit, Matrix, OlsFit};
pub use rng::Rng;
pub use special::{f_test_pvalue, normal_cdf, normal_quantile, regularized_incomplete_beta};
pub use spectrum::magnitude_spectrum;

/// Arithmetic mean; `NaN` on empty input.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with `n - 1` in the denominator; 0 below two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Median of a copy of `xs`; `NaN` on empty input.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median absolute deviation about the median, unscaled.
pub fn mad(xs: &[f64]) -> f64 {
    let m = median(xs);
    median(&xs.iter().map(|x| (x - m).abs()).collect::<Vec<_>>())
}
