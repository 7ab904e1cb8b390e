//! Small-sample interval-function accuracy: PIM against the nine rank schemes.

use pim::metrics::{default_p_grid, interval_rmse};
use pim::neuron::{fit_quantile, BetaSchedule, NeuronConfig, PivotMode, ResidualSample};
use pim::order_stats::interval_function_sorted;
use pim::stats::{normal_quantile, DistributionSpec, Rng};

use crate::config::ExperimentConfig;
use crate::error::AppResult;
use crate::report::{ExperimentReport, Statistic, TrialRecord};

pub const PIM: &str = "pim";

pub fn group_label(m: usize) -> String {
    format!("m={m}")
}

/// Exact `I(p) = 2 Φ⁻¹((1 + p)/2)` of the standard normal.
pub fn exact_interval(p: f64) -> pim::Result<f64> {
    Ok(2.0 * normal_quantile((1.0 + p) / 2.0)?)
}

/// The shared neuron settings with this study's sharpness schedule.
pub fn fig1_neuron(cfg: &ExperimentConfig) -> NeuronConfig {
    let schedule = BetaSchedule { scale: cfg.fig1.beta_scale, exponent: cfg.fig1.beta_exponent };
    NeuronConfig { beta_schedule: Some(schedule), ..cfg.neuron.clone() }
}

/// `I(p) = r_{(1+p)/2} - r_{(1-p)/2}` from two signed-mode fits.
pub fn pim_interval(sample: &ResidualSample, p: f64, neuron: &NeuronConfig) -> pim::Result<f64> {
    let hi = fit_quantile(sample, &neuron.with_p((1.0 + p) / 2.0))?.r_hat;
    let lo = fit_quantile(sample, &neuron.with_p((1.0 - p) / 2.0))?.r_hat;
    Ok(hi - lo)
}

pub fn run_fig1(cfg: &ExperimentConfig, seed: u64) -> AppResult<ExperimentReport> {
    let grid = default_p_grid();
    let exact: Vec<f64> = grid.iter().map(|&p| exact_interval(p)).collect::<pim::Result<_>>()?;
    let root = Rng::new(seed);
    let normal = DistributionSpec::normal(0.0, 1.0);
    let neuron = fig1_neuron(cfg);
    let mut records = Vec::new();
    for (mi, &m) in cfg.fig1.sample_sizes.iter().enumerate() {
        let group = group_label(m);
        for trial in 0..cfg.fig1.trials {
            let mut rng = root.substream((mi * cfg.fig1.trials + trial) as u64);
            let mut sample = normal.sample(&mut rng, m)?;
            sample.sort_by(f64::total_cmp);
            for &scheme in &cfg.fig1.schemes {
                let est: Vec<f64> = grid.iter().map(|&p| interval_function_sorted(&sample, p, scheme)).collect();
                records.push(TrialRecord::new(&group, trial, scheme.name()).metric("rmse", interval_rmse(&est, &exact)?));
            }
            let signed = ResidualSample::new(sample, PivotMode::Signed)?;
            let est: Vec<f64> = grid.iter().map(|&p| pim_interval(&signed, p, &neuron)).collect::<pim::Result<_>>()?;
            records.push(TrialRecord::new(&group, trial, PIM).metric("rmse", interval_rmse(&est, &exact)?));
        }
    }
    Ok(ExperimentReport::new("fig1", seed, cfg, records, Statistic::MeanStd))
}
