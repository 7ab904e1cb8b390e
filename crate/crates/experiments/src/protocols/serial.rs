//! Multi-step forecasting with one calibration per step ahead.
//!
//! The point forecast from origin `i` is the mean of the last `T`
//! observations, used for all `h` steps. Errors of every origin in the
//! calibration segment feed [`calibrate_windows`]; the test segment uses
//! non-overlapping origins.

use pim::conformal::{baseline_normal_bounds, calibrate_windows, Calibration, PredictionIntervalSet};
use pim::metrics::{mpiw, picp};
use pim::stats::{mean, Rng};

use crate::config::{ExperimentConfig, SerialConfig};
use crate::error::{AppError, AppResult};
use crate::report::{ExperimentReport, Statistic, TrialRecord};
use crate::synthetic::ar_series;

pub const PIM: &str = "pim";
pub const BASELINE: &str = "normal_baseline";

pub fn step_label(j: usize) -> String {
    format!("step={:02}", j + 1)
}

/// Mean of the `t` observations before `origin`.
pub fn trailing_mean(y: &[f64], origin: usize, t: usize) -> f64 {
    mean(&y[origin - t..origin])
}

/// Forecast errors `y[i + j] - f̂_i` for `j < h` at each origin `i`.
pub fn error_windows(y: &[f64], origins: impl Iterator<Item = usize>, t: usize, h: usize) -> Vec<Vec<f64>> {
    origins
        .map(|i| {
            let f = trailing_mean(y, i, t);
            y[i..i + h].iter().map(|v| v - f).collect()
        })
        .collect()
}

/// Deviations of the observations from their own `h`-long block means.
pub fn within_block_deviations(y: &[f64], h: usize) -> Vec<f64> {
    y.chunks_exact(h)
        .flat_map(|b| {
            let m = mean(b);
            b.iter().map(move |v| v - m)
        })
        .collect()
}

/// Index where the test segment starts, after checking both segments fit.
fn segment_split(s: &SerialConfig) -> AppResult<usize> {
    let cal_end = (s.calibration_fraction * s.series_length as f64).round() as usize;
    let need = s.lookback + s.horizon;
    if cal_end < need + 1 || s.series_length < cal_end + need {
        return Err(AppError::Config(format!(
            "serial.series_length {} is too short for lookback {} and horizon {} in both segments",
            s.series_length, s.lookback, s.horizon
        )));
    }
    Ok(cal_end)
}

pub fn run_serial(cfg: &ExperimentConfig, seed: u64) -> AppResult<ExperimentReport> {
    let s = &cfg.serial;
    let (t, h, p) = (s.lookback, s.horizon, cfg.p);
    let cal_end = segment_split(s)?;
    let mut rng = Rng::new(seed).substream(0);
    let y = ar_series(s.series_length, s.phi, s.innovation_sd, s.noise_sd, &mut rng);

    let cal_windows = error_windows(&y, t..=cal_end - h, t, h);
    let cals: Vec<Calibration> = calibrate_windows(&cal_windows, p, &cfg.neuron)?;
    let sigma_dev = within_block_deviations(&y[..cal_end], h);
    let baseline = baseline_normal_bounds(&sigma_dev, t as f64, p)?;

    let test_origins: Vec<usize> = (cal_end + t..=s.series_length - h).step_by(h).collect();
    let test_windows = error_windows(&y, test_origins.iter().copied(), t, h);

    let mut records = Vec::new();
    let (mut all_pim, mut all_base) = ((Vec::new(), Vec::new()), (Vec::new(), Vec::new()));
    let mut all_err = Vec::new();
    for (j, cal) in cals.iter().enumerate() {
        // Errors sit around a zero forecast, so intervals are built on 0.
        let errs: Vec<f64> = test_windows.iter().map(|w| w[j]).collect();
        let zeros = vec![0.0; errs.len()];
        let pim_set = cal.intervals(&zeros, p)?;
        let base_set = PredictionIntervalSet::new(vec![-baseline; errs.len()], vec![baseline; errs.len()], p)?;
        let r = cal.selected_radius();
        records.push(
            TrialRecord::new(step_label(j), 0, PIM)
                .metric("radius", cal.symmetric.upper())
                .metric("lower", r.lower() - cal.shift)
                .metric("upper", r.upper() + cal.shift)
                .metric("picp", picp(&pim_set, &errs)?)
                .metric("mpiw", mpiw(&pim_set, false, None)?),
        );
        records.push(
            TrialRecord::new(step_label(j), 0, BASELINE)
                .metric("radius", baseline)
                .metric("lower", baseline)
                .metric("upper", baseline)
                .metric("picp", picp(&base_set, &errs)?)
                .metric("mpiw", 2.0 * baseline),
        );
        all_pim.0.extend(pim_set.lower);
        all_pim.1.extend(pim_set.upper);
        all_base.0.extend(base_set.lower);
        all_base.1.extend(base_set.upper);
        all_err.extend(errs);
    }
    for (name, (lo, hi)) in [(PIM, all_pim), (BASELINE, all_base)] {
        let set = PredictionIntervalSet::new(lo, hi, p)?;
        records.push(
            TrialRecord::new("all", 0, name)
                .metric("picp", picp(&set, &all_err)?)
                .metric("mpiw", mpiw(&set, false, None)?),
        );
    }
    Ok(ExperimentReport::new("serial", seed, cfg, records, Statistic::MeanStd)
        .with_summary("calibration_windows", cal_windows.len() as f64)
        .with_summary("test_origins", test_origins.len() as f64))
}

/// The fitted per-step symmetric radii of a serial report, in step order.
pub fn step_radii(report: &ExperimentReport) -> Vec<f64> {
    report
        .trials
        .iter()
        .filter(|t| t.estimator == PIM && t.group.starts_with("step="))
        .filter_map(|t| t.get("radius"))
        .collect()
}

/// Count of steps whose radius is below the previous one.
pub fn monotonicity_violations(radii: &[f64]) -> usize {
    radii.windows(2).filter(|w| w[1] < w[0]).count()
}
