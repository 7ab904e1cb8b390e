//! Interval quality scores and residual diagnostics.

use serde::{Deserialize, Serialize};

use crate::conformal::PredictionIntervalSet;
use crate::error::{check_probability, Error, Result};
use crate::stats::{f_test_pvalue, independent_columns, magnitude_spectrum, ols_fit, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalMetrics {
    pub picp: f64,
    /// Mean width over every interval.
    pub mpiw: f64,
    /// Mean width over the covered intervals; absent when none is covered.
    pub mpiw_captured: Option<f64>,
    pub nmpiw: f64,
    pub cwc: f64,
    pub n: usize,
}

fn check_len(intervals: &PredictionIntervalSet, y: &[f64]) -> Result<()> {
    if intervals.len() != y.len() {
        return Err(Error::Shape(format!("{} intervals for {} targets", intervals.len(), y.len())));
    }
    if y.is_empty() {
        return Err(Error::UndefinedMetric("no intervals".into()));
    }
    Ok(())
}

/// Fraction of targets inside their closed interval.
pub fn picp(intervals: &PredictionIntervalSet, y: &[f64]) -> Result<f64> {
    check_len(intervals, y)?;
    let hits = y.iter().enumerate().filter(|(i, v)| intervals.covers(*i, **v)).count();
    Ok(hits as f64 / y.len() as f64)
}

/// Mean interval width, optionally restricted to intervals that cover their target.
pub fn mpiw(intervals: &PredictionIntervalSet, captured_only: bool, y: Option<&[f64]>) -> Result<f64> {
    let widths = intervals.widths();
    if !captured_only {
        if widths.is_empty() {
            return Err(Error::UndefinedMetric("no intervals".into()));
        }
        return Ok(widths.iter().sum::<f64>() / widths.len() as f64);
    }
    let y = y.ok_or_else(|| Error::UndefinedMetric("captured width needs targets".into()))?;
    check_len(intervals, y)?;
    let captured: Vec<f64> = (0..y.len()).filter(|&i| intervals.covers(i, y[i])).map(|i| widths[i]).collect();
    if captured.is_empty() {
        return Err(Error::UndefinedMetric("no target is captured".into()));
    }
    Ok(captured.iter().sum::<f64>() / captured.len() as f64)
}

/// Coverage width criterion: `nmpiw (1 + γ exp(-η (picp - p)))` with `γ = 1` only under-covered.
pub fn cwc(nmpiw: f64, picp: f64, p: f64, eta: f64) -> f64 {
    if picp < p {
        nmpiw * (1.0 + (-eta * (picp - p)).exp())
    } else {
        nmpiw
    }
}

/// All interval scores at once. NMPIW divides by the target range, or by 1
/// when the targets are constant.
pub fn interval_metrics(intervals: &PredictionIntervalSet, y: &[f64], p: f64, eta: f64) -> Result<IntervalMetrics> {
    check_probability(p, "p")?;
    let coverage = picp(intervals, y)?;
    let width = mpiw(intervals, false, None)?;
    let mpiw_captured = match mpiw(intervals, true, Some(y)) {
        Ok(w) => Some(w),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    let nmpiw = if range > 0.0 { width / range } else { width };
    Ok(IntervalMetrics { picp: coverage, mpiw: width, mpiw_captured, nmpiw, cwc: cwc(nmpiw, coverage, p, eta), n: y.len() })
}

/// Default level grid for comparing interval functions: 0.05, 0.10, ..., 0.90.
pub fn default_p_grid() -> Vec<f64> {
    (1..=18).map(|k| k as f64 * 0.05).collect()
}

pub fn interval_rmse(estimated: &[f64], exact: &[f64]) -> Result<f64> {
    if estimated.len() != exact.len() {
        return Err(Error::Shape(format!("{} estimates for {} exact values", estimated.len(), exact.len())));
    }
    if estimated.is_empty() {
        return Err(Error::UndefinedMetric("empty grid".into()));
    }
    let sse: f64 = estimated.iter().zip(exact).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / estimated.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhiteTestResult {
    pub f_statistic: f64,
    pub p_value: f64,
    pub dof_numerator: usize,
    pub dof_denominator: usize,
    pub significant: bool,
    pub alpha: f64,
    /// Auxiliary regressors dropped as collinear.
    pub dropped: usize,
}

/// Auxiliary design: every feature, then every product `x_j x_k` with `j ≤ k`.
fn white_regressors(features: &Matrix) -> Matrix {
    let (n, d) = (features.rows(), features.cols());
    let k = d + d * (d + 1) / 2;
    let mut data = Vec::with_capacity(n * k);
    for r in 0..n {
        let x = features.row(r);
        data.extend_from_slice(x);
        for j in 0..d {
            for l in j..d {
                data.push(x[j] * x[l]);
            }
        }
    }
    Matrix::from_row_major(n, k, data).expect("sized above")
}

/// Residuals `ξ` of the least-squares fit of `y` on `[1, x]`, with collinear
/// columns dropped.
pub fn linear_residuals(features: &Matrix, targets: &[f64]) -> Result<Vec<f64>> {
    let n = features.rows();
    if targets.len() != n {
        return Err(Error::Shape(format!("{n} feature rows for {} targets", targets.len())));
    }
    let design = features.with_intercept();
    let design = design.select_columns(&independent_columns(&design));
    Ok(ols_fit(&design, targets)?.residuals)
}

/// White's heteroskedasticity test in its F form.
///
/// Stage one regresses `y` on `[1, x]`. Stage two regresses the squared
/// residuals on an intercept, the features and their pairwise products.
/// Collinear auxiliary columns are dropped and the degrees of freedom shrink
/// accordingly.
pub fn white_test(features: &Matrix, targets: &[f64], alpha: f64) -> Result<WhiteTestResult> {
    check_probability(alpha, "alpha")?;
    let n = features.rows();
    let xi2: Vec<f64> = linear_residuals(features, targets)?.iter().map(|e| e * e).collect();

    let aux = white_regressors(features).with_intercept();
    let keep = independent_columns(&aux);
    let dropped = aux.cols() - keep.len();
    if dropped > 0 {
        log::warn!("white test: dropped {dropped} collinear auxiliary regressors");
    }
    if !keep.contains(&0) {
        return Err(Error::DegenerateFit("intercept column is degenerate".into()));
    }
    let k = keep.len() - 1;
    if n <= k + 1 {
        return Err(Error::InsufficientData(format!("{n} observations for {k} auxiliary regressors")));
    }
    let dof_denominator = n - k - 1;
    let r2 = if k == 0 { 0.0 } else { ols_fit(&aux.select_columns(&keep), &xi2)?.r_squared };
    let (f_statistic, p_value) = if r2 <= 0.0 {
        (0.0, 1.0)
    } else if r2 >= 1.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = (r2 / k as f64) / ((1.0 - r2) / dof_denominator as f64);
        (f, f_test_pvalue(f, k as f64, dof_denominator as f64)?)
    };
    Ok(WhiteTestResult {
        f_statistic,
        p_value,
        dof_numerator: k,
        dof_denominator,
        significant: p_value < alpha,
        alpha,
        dropped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEntropyResult {
    pub pse: f64,
    pub n: usize,
}

/// Normalised power spectral entropy over all `n` DFT bins.
pub fn pse(residuals: &[f64]) -> Result<SpectralEntropyResult> {
    let n = residuals.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} residuals")));
    }
    let power: Vec<f64> = magnitude_spectrum(residuals).iter().map(|m| m * m).collect();
    let total: f64 = power.iter().sum();
    if !(total > 0.0) {
        return Err(Error::UndefinedMetric("residuals are all zero".into()));
    }
    let h: f64 = power
        .iter()
        .map(|&w| w / total)
        .filter(|&q| q > 0.0)
        .map(|q| -q * q.ln())
        .sum();
    Ok(SpectralEntropyResult { pse: (h / (n as f64).ln()).clamp(0.0, 1.0), n })
}

/// Percentage of significant tests.
pub fn p_sig(results: &[WhiteTestResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::UndefinedMetric("no test results".into()));
    }
    Ok(100.0 * results.iter().filter(|r| r.significant).count() as f64 / results.len() as f64)
}
