//! Pooled kernel density estimation: variance gain of the naive bandwidth,
//! its bias along local perturbations, and the undersmoothed fix.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{replicate_map, table::sum_ratio, Check, ExperimentConfig};
use crate::error::Result;
use crate::kde::{kde_at_point, pooled_kde, BandwidthPolicy};
use crate::models::{BaseDensity, KdeBump, PerturbedDensity};
use crate::stats::{jackknife, simpson};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCell {
    pub n: usize,
    pub m: usize,
    /// `Var(global) / Var(pooled, h = n^(-1/3))` under the uniform density.
    pub ratio_fixed_policy: f64,
    pub ratio_fixed_se: f64,
    /// `MSE(global) / MSE(pooled, h = N^(-1/3))` under the uniform density.
    pub ratio_undersmoothed: f64,
    pub ratio_undersmoothed_se: f64,
    /// `n^(1/3)` times the bias of the fixed-bandwidth pooled estimator under `f_n`.
    pub perturbed_fixed_scaled_bias: f64,
    pub perturbed_fixed_scaled_bias_se: f64,
    /// Same quantity from quadrature of the kernel against `f_n`.
    pub perturbed_fixed_scaled_bias_expected: f64,
    /// `N^(2/3) MSE` under `f_n` for the fixed-bandwidth pooled, undersmoothed pooled and global estimators.
    pub perturbed_risk_fixed: f64,
    pub perturbed_risk_undersmoothed: f64,
    pub perturbed_risk_global: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeSupeffReport {
    pub t0: f64,
    pub replicates: usize,
    pub cells: Vec<KdeCell>,
}

impl KdeSupeffReport {
    pub fn checks(&self) -> Vec<Check> {
        let mut out = Vec::new();
        for c in &self.cells {
            if c.m == 1 {
                out.push(Check::new(
                    format!("kde-m1-identity-n{}", c.n),
                    c.ratio_fixed_policy == 1.0 && c.ratio_undersmoothed == 1.0,
                    "both ratios exactly 1 at m = 1",
                ));
                continue;
            }
            let target = (c.m as f64).cbrt();
            out.push(Check::new(
                format!("kde-variance-ratio-n{}-m{}", c.n, c.m),
                (c.ratio_fixed_policy / target - 1.0).abs() <= 0.20,
                format!("{:.3} vs m^(1/3) = {:.3}", c.ratio_fixed_policy, target),
            ));
            out.push(Check::new(
                format!("kde-undersmoothed-n{}-m{}", c.n, c.m),
                (c.ratio_undersmoothed - 1.0).abs() <= 0.15,
                format!("{:.4}", c.ratio_undersmoothed),
            ));
            out.push(Check::new(
                format!("kde-perturbed-bias-n{}-m{}", c.n, c.m),
                c.perturbed_fixed_scaled_bias.abs() > 3.0 * c.perturbed_fixed_scaled_bias_se,
                format!(
                    "scaled bias {:.4} +/- {:.4} (quadrature {:.4})",
                    c.perturbed_fixed_scaled_bias,
                    c.perturbed_fixed_scaled_bias_se,
                    c.perturbed_fixed_scaled_bias_expected
                ),
            ));
        }
        out
    }
}

/// Expected bias of a bandwidth-`h` KDE at `t0`: `int K(u) f(t0 - u h) du - f(t0)`.
pub fn expected_kde_bias(density: &PerturbedDensity, h: f64, kernel: crate::kde::Kernel) -> f64 {
    let t0 = density.t0;
    simpson(|u| kernel.eval(u) * density.eval(t0 - u * h), -1.0, 1.0, 4096) - density.eval(t0)
}

/// Global, fixed-policy pooled and undersmoothed pooled estimates from one draw.
fn three_estimates(
    data: &[f64],
    n: usize,
    m: usize,
    t0: f64,
    kernel: crate::kde::Kernel,
) -> Result<[f64; 3]> {
    let total = n * m;
    let blocks: Vec<&[f64]> = data.chunks(n).collect();
    Ok([
        kde_at_point(data, t0, (total as f64).powf(-1.0 / 3.0), kernel)?,
        pooled_kde(&blocks, t0, BandwidthPolicy::FixedSubsample, kernel)?,
        pooled_kde(&blocks, t0, BandwidthPolicy::Undersmoothed, kernel)?,
    ])
}

pub fn run_kde_supeff(config: &ExperimentConfig, workers: usize) -> Result<KdeSupeffReport> {
    config.validate()?;
    let kernel = config.kernel;
    let t0 = config.t0;
    let bump = KdeBump {
        amplitude: config.bump_amplitude,
    };
    let mut cells = Vec::new();
    let mut cell_id = 0u64;
    for &n in &config.grid_n {
        let density = PerturbedDensity::new(BaseDensity::Uniform, bump, t0, n as u64)?;
        let f0_t0 = BaseDensity::Uniform.eval(t0);
        let fn_t0 = density.eval(t0);
        let rate = (n as f64).cbrt();
        let expected = rate * expected_kde_bias(&density, (n as f64).powf(-1.0 / 3.0), kernel);
        for m in config.m_values(n) {
            let key = config.stream().with_cell(cell_id);
            cell_id += 1;
            let total = n * m;
            let rows = replicate_map(workers, config.replicates, |r| {
                let key = key.with_replicate(r);
                let mut rng = key.with_subsample(0).rng();
                let base: Vec<f64> = (0..total).map(|_| rng.random::<f64>()).collect();
                let e0 = three_estimates(&base, n, m, t0, kernel)?;
                let mut rng = key.with_subsample(1).rng();
                let pert: Vec<f64> = (0..total).map(|_| density.sample(&mut rng)).collect();
                let e1 = three_estimates(&pert, n, m, t0, kernel)?;
                Ok([e0, e1])
            })?;
            let nf = total as f64;
            // Columns: global, global^2, fixed, fixed^2.
            let var_rows: Vec<[f64; 4]> = rows
                .iter()
                .map(|[e, _]| [e[0], e[0] * e[0], e[1], e[1] * e[1]])
                .collect();
            let var = |s: f64, s2: f64, r: usize| (s2 - s * s / r as f64) / (r - 1) as f64;
            let (ratio_fixed_policy, ratio_fixed_se) = jackknife(&var_rows, |t, r| {
                let (g, p) = (var(t[0], t[1], r), var(t[2], t[3], r));
                sum_ratio(g, p)
            });
            let under_rows: Vec<[f64; 2]> = rows
                .iter()
                .map(|[e, _]| [(e[0] - f0_t0).powi(2), (e[2] - f0_t0).powi(2)])
                .collect();
            let (ratio_undersmoothed, ratio_undersmoothed_se) =
                jackknife(&under_rows, |t, _| sum_ratio(t[0], t[1]));
            let bias_rows: Vec<[f64; 1]> =
                rows.iter().map(|[_, e]| [rate * (e[1] - fn_t0)]).collect();
            let (sum_bias, _) = jackknife(&bias_rows, |t, _| t[0]);
            let r = rows.len() as f64;
            let scaled: Vec<f64> = bias_rows.iter().map(|b| b[0]).collect();
            let bias_se = (crate::stats::sample_variance(&scaled) / r).sqrt();
            let risk = |k: usize| {
                nf.powf(2.0 / 3.0) * rows.iter().map(|[_, e]| (e[k] - fn_t0).powi(2)).sum::<f64>() / r
            };
            cells.push(KdeCell {
                n,
                m,
                ratio_fixed_policy,
                ratio_fixed_se,
                ratio_undersmoothed,
                ratio_undersmoothed_se,
                perturbed_fixed_scaled_bias: sum_bias / r,
                perturbed_fixed_scaled_bias_se: bias_se,
                perturbed_fixed_scaled_bias_expected: expected,
                perturbed_risk_fixed: risk(1),
                perturbed_risk_undersmoothed: risk(2),
                perturbed_risk_global: risk(0),
            });
        }
    }
    Ok(KdeSupeffReport {
        t0,
        replicates: config.replicates,
        cells,
    })
}
