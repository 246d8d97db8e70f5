//! Self-consistency of the Chernoff sampler.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Check, ExperimentConfig};
use crate::error::{invalid, Result};
use crate::limit_dist::{write_draws, ChernoffSampler};
use crate::stats::{kurtosis, mean, quantile_sorted, sample_variance, skewness, sorted_copy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernoffReport {
    pub draws: usize,
    pub horizon: f64,
    pub step: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub sd: f64,
    pub sd_se: f64,
    /// Estimated `Var(Z)`, threaded into every variance formula downstream.
    pub var_z: f64,
    pub skewness: f64,
    pub q025: f64,
    pub q975: f64,
    /// Standard error of `q025 + q975`.
    pub quantile_sum_se: f64,
    pub boundary_rate: f64,
    /// SD at half the grid step, from independent paths.
    pub sd_refined: f64,
    pub sd_refined_se: f64,
}

impl ChernoffReport {
    pub fn checks(&self) -> Vec<Check> {
        let combined = self.sd_se.hypot(self.sd_refined_se);
        vec![
            Check::new(
                "chernoff-mean",
                self.mean.abs() <= 3.0 * self.mean_se,
                format!("mean {:.5} (se {:.5})", self.mean, self.mean_se),
            ),
            Check::new(
                "chernoff-skewness",
                self.skewness.abs() <= 0.05,
                format!("skewness {:.4}", self.skewness),
            ),
            Check::new(
                "chernoff-quantile-symmetry",
                (self.q025 + self.q975).abs() <= 2.0 * self.quantile_sum_se,
                format!(
                    "q(0.025) = {:.4}, q(0.975) = {:.4}, se {:.4}",
                    self.q025, self.q975, self.quantile_sum_se
                ),
            ),
            Check::new(
                "chernoff-grid-refinement",
                (self.sd - self.sd_refined).abs() <= 2.0 * combined,
                format!("sd {:.5} vs {:.5} at h/2 (se {:.5})", self.sd, self.sd_refined, combined),
            ),
            Check::new(
                "chernoff-boundary-rate",
                self.boundary_rate < 1e-3,
                format!("{:.2e}", self.boundary_rate),
            ),
        ]
    }
}

/// Distribution-free standard error of the `p`-quantile from the order
/// statistics one binomial SD either side.
fn quantile_se(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len() as f64;
    let spread = (n * p * (1.0 - p)).sqrt() / n;
    0.5 * (quantile_sorted(sorted, (p + spread).min(1.0)) - quantile_sorted(sorted, (p - spread).max(0.0)))
}

fn sd_and_se(values: &[f64]) -> (f64, f64) {
    let sd = sample_variance(values).sqrt();
    let se = sd * ((kurtosis(values) - 1.0) / (4.0 * values.len() as f64)).sqrt();
    (sd, se)
}

/// Sample `config.chernoff.draws` paths, plus as many at half the step on a
/// separate stream; with `cache` set the main draws are written there.
pub fn run_chernoff(
    config: &ExperimentConfig,
    workers: usize,
    cache: Option<&Path>,
) -> Result<ChernoffReport> {
    let settings = &config.chernoff;
    if settings.draws < 2 {
        return Err(invalid("draws", "need at least 2"));
    }
    let sampler = ChernoffSampler::new(settings.horizon, settings.step, config.seed)?;
    let refined = ChernoffSampler::new(
        settings.horizon,
        settings.step / 2.0,
        config.seed ^ REFINED_SEED_MASK,
    )?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| invalid("workers", e.to_string()))?;
    let (main, fine) = pool.install(|| -> Result<_> {
        Ok((sampler.sample(settings.draws)?, refined.sample(settings.draws)?))
    })?;
    if let Some(dir) = cache {
        std::fs::create_dir_all(dir)?;
        write_draws(&dir.join(sampler.cache_file_name(settings.draws)), &main.values)?;
    }
    let v = &main.values;
    let sorted = sorted_copy(v);
    let (sd, sd_se) = sd_and_se(v);
    let (sd_refined, sd_refined_se) = sd_and_se(&fine.values);
    Ok(ChernoffReport {
        draws: v.len(),
        horizon: settings.horizon,
        step: settings.step,
        mean: mean(v),
        mean_se: sd / (v.len() as f64).sqrt(),
        sd,
        sd_se,
        var_z: sd * sd,
        skewness: skewness(v),
        q025: quantile_sorted(&sorted, 0.025),
        q975: quantile_sorted(&sorted, 0.975),
        quantile_sum_se: quantile_se(&sorted, 0.025).hypot(quantile_se(&sorted, 0.975)),
        boundary_rate: main.boundary_rate(),
        sd_refined,
        sd_refined_se,
    })
}

const REFINED_SEED_MASK: u64 = 0x5eed_0f4a_1f57_e9c3;
