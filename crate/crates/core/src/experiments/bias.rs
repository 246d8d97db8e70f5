//! Monte Carlo bias of the global estimator across sample sizes.

use serde::{Deserialize, Serialize};

use super::{replicate_map, Check, ExperimentConfig, FunctionalKind};
use crate::error::Result;
use crate::stats::{mean, sample_variance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub n: usize,
    pub bias_hat: f64,
    pub se: f64,
    /// `|bias_hat| * n^e`, `e = 1/2` for inverse functionals and `1/3` for forward ones.
    pub scaled: f64,
    /// `|bias_hat| <= 2 se + 0.5 n^(-e)`.
    pub within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasScanReport {
    pub functional: FunctionalKind,
    pub replicates: usize,
    pub rows: Vec<BiasRow>,
    /// Scaled bias nonincreasing in `n`, up to 2 standard errors.
    pub nonincreasing: bool,
}

impl BiasScanReport {
    pub fn checks(&self) -> Vec<Check> {
        let mut out: Vec<Check> = self
            .rows
            .iter()
            .map(|r| {
                Check::new(
                    format!("bias-bound-n{}", r.n),
                    r.within_bound,
                    format!("bias {:.3e} +/- {:.3e}", r.bias_hat, r.se),
                )
            })
            .collect();
        out.push(
            Check::new(
                "bias-scaled-nonincreasing",
                self.nonincreasing,
                "scaled |bias| nonincreasing in n within noise",
            )
            .advisory(),
        );
        out
    }
}

fn order_exponent(kind: FunctionalKind) -> f64 {
    match kind {
        FunctionalKind::MuInverseAt | FunctionalKind::QuantileAt => 0.5,
        FunctionalKind::MuAt | FunctionalKind::CdfAt => 1.0 / 3.0,
    }
}

pub fn run_bias_scan(config: &ExperimentConfig, workers: usize) -> Result<BiasScanReport> {
    config.validate()?;
    let scenario = config.scenario()?;
    let functional = config.functional();
    let direction = scenario.direction();
    let e = order_exponent(config.functional);
    let mut rows = Vec::with_capacity(config.bias_n.len());
    for (cell, &n) in config.bias_n.iter().enumerate() {
        let truth = scenario.truth(functional, n)?;
        let key = config.stream().with_cell(cell as u64);
        let errors = replicate_map(workers, config.replicates, |r| {
            let sample = scenario.draw(n, n, &key.with_replicate(r))?;
            Ok(functional.evaluate(&sample, direction)?.value - truth)
        })?;
        let bias_hat = mean(&errors);
        let se = (sample_variance(&errors) / errors.len() as f64).sqrt();
        let nf = n as f64;
        rows.push(BiasRow {
            n,
            bias_hat,
            se,
            scaled: bias_hat.abs() * nf.powf(e),
            within_bound: bias_hat.abs() <= 2.0 * se + 0.5 * nf.powf(-e),
        });
    }
    let nonincreasing = rows.windows(2).all(|w| {
        let slack = 2.0 * (w[0].se * (w[0].n as f64).powf(e)).hypot(w[1].se * (w[1].n as f64).powf(e));
        w[1].scaled <= w[0].scaled + slack
    });
    Ok(BiasScanReport {
        functional: config.functional,
        replicates: config.replicates,
        rows,
        nonincreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ExperimentKind;

    #[test]
    fn noiseless_bias_is_at_covariate_gap_resolution() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::BiasScan);
        c.noise_sd = 0.0;
        c.replicates = 200;
        c.bias_n = vec![500, 2000];
        let rep = run_bias_scan(&c, 2).unwrap();
        for r in &rep.rows {
            // Mean covariate gap is 1/(n+1).
            assert!(r.bias_hat.abs() < 2.0 / r.n as f64, "{:?}", r);
        }
    }

    #[test]
    fn forward_functional_scaled_bias_is_small() {
        let mut c = ExperimentConfig::defaults(ExperimentKind::BiasScan);
        c.functional = FunctionalKind::MuAt;
        c.replicates = 1000;
        c.bias_n = vec![200, 800];
        let rep = run_bias_scan(&c, 2).unwrap();
        for r in &rep.rows {
            assert!(r.scaled < 0.1, "{:?}", r);
        }
    }
}
