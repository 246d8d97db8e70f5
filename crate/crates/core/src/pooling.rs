//! Split, estimate per block, average.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::isotonic::{fit_current_status_sample, fit_isotonic, Direction, SortedSample};
use crate::limit_dist::mfold_quantile;
use crate::rng::StreamKey;
use crate::stats::{normal_quantile, KahanSum};

/// Sizes of an `m`-way split of `N` points; the `N - m * floor(N / m)`
/// leftover points are discarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub total: usize,
    pub blocks: usize,
    pub block_size: usize,
    pub discarded: usize,
}

impl SplitPlan {
    pub fn new(total: usize, blocks: usize) -> Result<Self> {
        if blocks == 0 {
            return Err(invalid("m", "must be at least 1"));
        }
        if blocks > total {
            return Err(Error::TooManyBlocks { total, blocks });
        }
        let block_size = total / blocks;
        Ok(Self {
            total,
            blocks,
            block_size,
            discarded: total - blocks * block_size,
        })
    }

    pub fn kept(&self) -> usize {
        self.blocks * self.block_size
    }
}

/// Disjoint index blocks, each sorted ascending.
///
/// Without shuffling, block `j` is the contiguous range `j*n .. (j+1)*n`.
/// With shuffling, a permutation drawn from `stream` assigns indices to blocks
/// first, and the last `discarded` positions of the permutation are dropped.
pub fn split(
    total: usize,
    blocks: usize,
    shuffle: bool,
    stream: &StreamKey,
) -> Result<(SplitPlan, Vec<Vec<usize>>)> {
    let plan = SplitPlan::new(total, blocks)?;
    let n = plan.block_size;
    if !shuffle {
        let out = (0..blocks).map(|j| (j * n..(j + 1) * n).collect()).collect();
        return Ok((plan, out));
    }
    let mut perm: Vec<usize> = (0..total).collect();
    perm.shuffle(&mut stream.rng());
    // Label each index by the block that owns its permutation slot, then sweep
    // indices in order so every block comes out sorted.
    let mut label = vec![usize::MAX; total];
    for (slot, &idx) in perm.iter().enumerate().take(plan.kept()) {
        label[idx] = slot / n;
    }
    let mut out: Vec<Vec<usize>> = (0..blocks).map(|_| Vec::with_capacity(n)).collect();
    for (idx, &b) in label.iter().enumerate() {
        if b != usize::MAX {
            out[b].push(idx);
        }
    }
    Ok((plan, out))
}

/// Scalar target extracted from a fitted subsample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "at", rename_all = "snake_case")]
pub enum Functional {
    /// Isotonic regression fit evaluated at `t0`.
    MuAt(f64),
    /// Generalized inverse of the regression fit at level `a`.
    MuInverseAt(f64),
    /// Current-status NPMLE evaluated at `t`.
    CdfAt(f64),
    /// Generalized inverse of the current-status NPMLE at level `a`, with
    /// exact ties at `a` resolved to the midpoint of the flat.
    QuantileAt(f64),
}

/// A functional value plus whether it came from the inverse's extreme convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalValue {
    pub value: f64,
    pub at_convention: bool,
}

impl Functional {
    /// Fit `sample` and extract the functional. Regression functionals use
    /// `direction`; current-status functionals read the responses as 0/1
    /// indicators and always fit a nondecreasing distribution function.
    pub fn evaluate(&self, sample: &SortedSample, direction: Direction) -> Result<FunctionalValue> {
        let plain = |value| FunctionalValue {
            value,
            at_convention: false,
        };
        match *self {
            Functional::MuAt(t) => Ok(plain(fit_isotonic(sample, direction).evaluate(t)?)),
            Functional::MuInverseAt(a) => {
                let inv = fit_isotonic(sample, direction).inverse_detail(a);
                Ok(FunctionalValue {
                    value: inv.t,
                    at_convention: inv.at_convention,
                })
            }
            Functional::CdfAt(t) => Ok(plain(fit_current_status_sample(sample).evaluate(t)?)),
            Functional::QuantileAt(a) => {
                let inv = fit_current_status_sample(sample).inverse_midpoint_detail(a);
                Ok(FunctionalValue {
                    value: inv.t,
                    at_convention: inv.at_convention,
                })
            }
        }
    }

    pub fn target(&self) -> f64 {
        match *self {
            Functional::MuAt(v)
            | Functional::MuInverseAt(v)
            | Functional::CdfAt(v)
            | Functional::QuantileAt(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledEstimate {
    pub theta_bar: f64,
    pub estimates: Vec<f64>,
    /// `None` when `m < 2`.
    pub sigma_hat: Option<f64>,
    pub rate: f64,
    pub m: usize,
    pub n: usize,
    /// Blocks whose estimate came from the inverse's extreme convention.
    pub flagged: Vec<usize>,
}

impl PooledEstimate {
    /// Pool already computed subsample estimates; `n` is the block size.
    pub fn from_estimates(estimates: Vec<f64>, n: usize, rate: f64) -> Result<Self> {
        if estimates.is_empty() {
            return Err(Error::EmptySample);
        }
        let m = estimates.len();
        let theta_bar = average(&estimates);
        let sigma_hat = if m >= 2 {
            Some(sigma_hat(&estimates, rate)?)
        } else {
            None
        };
        Ok(Self {
            theta_bar,
            estimates,
            sigma_hat,
            rate,
            m,
            n,
            flagged: Vec::new(),
        })
    }
}

/// Cube-root rate `n^(1/3)`.
pub fn cube_root_rate(n: usize) -> f64 {
    (n as f64).cbrt()
}

fn average(values: &[f64]) -> f64 {
    values.iter().copied().collect::<KahanSum>().total() / values.len() as f64
}

pub fn pooled_point_estimate(
    blocks: &[SortedSample],
    functional: Functional,
    direction: Direction,
) -> Result<PooledEstimate> {
    if blocks.is_empty() {
        return Err(invalid("m", "need at least one subsample"));
    }
    let mut estimates = Vec::with_capacity(blocks.len());
    let mut flagged = Vec::new();
    for (j, block) in blocks.iter().enumerate() {
        let v = functional.evaluate(block, direction)?;
        if v.at_convention {
            flagged.push(j);
        }
        estimates.push(v.value);
    }
    let n = blocks.iter().map(|b| b.total_weight() as usize).min().unwrap_or(0);
    let mut pe = PooledEstimate::from_estimates(estimates, n, cube_root_rate(n))?;
    pe.flagged = flagged;
    Ok(pe)
}

/// `r_n^2 / (m - 1) * sum (theta_j - theta_bar)^2`.
pub fn sigma2_hat(estimates: &[f64], rate: f64) -> Result<f64> {
    let m = estimates.len();
    if m < 2 {
        return Err(Error::TooFewEstimates(m));
    }
    let bar = average(estimates);
    let ss = estimates
        .iter()
        .map(|e| (e - bar) * (e - bar))
        .collect::<KahanSum>()
        .total();
    Ok(rate * rate * ss / (m - 1) as f64)
}

pub fn sigma_hat(estimates: &[f64], rate: f64) -> Result<f64> {
    sigma2_hat(estimates, rate).map(f64::sqrt)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(invalid("alpha", format!("{alpha} is not in (0, 1]")))
    }
}

/// `theta_bar -/+ sigma_hat * z_{alpha/2} / (r_n sqrt(m))`.
pub fn confidence_interval(pe: &PooledEstimate, alpha: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    let sigma = pe.sigma_hat.ok_or(Error::SigmaUnavailable(pe.m))?;
    let z = normal_quantile(1.0 - alpha / 2.0);
    let half = sigma * z / (pe.rate * (pe.m as f64).sqrt());
    Ok((pe.theta_bar - half, pe.theta_bar + half))
}

/// Minimum number of Chernoff draws accepted for convolution quantiles.
pub const MIN_LIMIT_DRAWS: usize = 10_000;

/// Interval calibrated by the simulated `m`-fold convolution of standardized
/// Chernoff draws instead of normal quantiles.
///
/// With `m = 1` there is no spread to estimate from, so `sigma` must be given
/// explicitly through `sigma_override`.
pub fn exact_limit_ci(
    pe: &PooledEstimate,
    alpha: f64,
    chernoff_draws: &[f64],
    sigma_override: Option<f64>,
    stream: &StreamKey,
) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if chernoff_draws.len() < MIN_LIMIT_DRAWS {
        return Err(Error::TooFewDraws {
            got: chernoff_draws.len(),
            needed: MIN_LIMIT_DRAWS,
        });
    }
    let sigma = sigma_override
        .or(pe.sigma_hat)
        .ok_or(Error::SigmaUnavailable(pe.m))?;
    let sd = crate::stats::sample_variance(chernoff_draws).sqrt();
    let lower_q = mfold_quantile(chernoff_draws, pe.m, alpha / 2.0, stream)? / sd;
    let upper_q = mfold_quantile(chernoff_draws, pe.m, 1.0 - alpha / 2.0, stream)? / sd;
    let scale = sigma / (pe.rate * (pe.m as f64).sqrt());
    Ok((pe.theta_bar - upper_q * scale, pe.theta_bar - lower_q * scale))
}

/// Growth schedule `m_n = round(n^(2 phi - delta))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSchedule {
    pub phi: f64,
    pub delta: f64,
}

impl RateSchedule {
    /// `delta = 2 phi` is accepted and gives the constant schedule `m = 1`.
    pub fn new(phi: f64, delta: f64) -> Result<Self> {
        if !(phi > 0.0 && phi.is_finite()) {
            return Err(invalid("phi", format!("{phi} must be positive")));
        }
        if !(delta >= 0.0 && delta <= 2.0 * phi) {
            return Err(invalid("delta", format!("{delta} not in [0, 2 phi = {}]", 2.0 * phi)));
        }
        Ok(Self { phi, delta })
    }

    /// `m_n = n^(1/3)`, the choice for the inverse problem.
    pub fn inverse_problem() -> Self {
        Self {
            phi: 1.0 / 6.0,
            delta: 0.0,
        }
    }

    pub fn exponent(&self) -> f64 {
        2.0 * self.phi - self.delta
    }
}

pub fn choose_m(schedule: &RateSchedule, n: usize) -> usize {
    ((n as f64).powf(schedule.exponent()).round() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::experiment_id;
    use std::collections::BTreeSet;

    fn key() -> StreamKey {
        StreamKey::new(3, experiment_id("pooling-test"))
    }

    #[test]
    fn split_sizes() {
        let (p, b) = split(50_000, 50, false, &key()).unwrap();
        assert_eq!(p.block_size, 1000);
        assert_eq!(b.len(), 50);
        let (p, _) = split(10, 3, false, &key()).unwrap();
        assert_eq!((p.block_size, p.discarded), (3, 1));
        let (p, b) = split(7, 1, true, &key()).unwrap();
        assert_eq!(p.block_size, 7);
        assert_eq!(b[0], (0..7).collect::<Vec<_>>());
        assert!(matches!(
            split(3, 4, false, &key()),
            Err(Error::TooManyBlocks { total: 3, blocks: 4 })
        ));
        assert!(split(3, 0, false, &key()).is_err());
    }

    #[test]
    fn shuffled_split_partitions_kept_indices() {
        let (plan, blocks) = split(103, 10, true, &key()).unwrap();
        let mut seen = BTreeSet::new();
        for b in &blocks {
            assert_eq!(b.len(), plan.block_size);
            assert!(b.windows(2).all(|w| w[0] < w[1]));
            for &i in b {
                assert!(seen.insert(i), "index {i} in two blocks");
            }
        }
        assert_eq!(seen.len(), plan.kept());
        let (_, again) = split(103, 10, true, &key()).unwrap();
        assert_eq!(blocks, again);
    }

    #[test]
    fn pooled_mean_and_sigma() {
        let pe = PooledEstimate::from_estimates(vec![1.0, 2.0, 3.0], 1, 1.0).unwrap();
        assert_eq!(pe.theta_bar, 2.0);
        assert_eq!(sigma2_hat(&[1.0, 2.0, 3.0], 1.0).unwrap(), 1.0);
        assert_eq!(pe.sigma_hat, Some(1.0));
        assert_eq!(sigma2_hat(&[0.4; 5], 10.0).unwrap(), 0.0);
        assert!(matches!(sigma2_hat(&[1.0], 1.0), Err(Error::TooFewEstimates(1))));
        let single = PooledEstimate::from_estimates(vec![0.7], 10, 2.0).unwrap();
        assert_eq!(single.theta_bar, 0.7);
        assert_eq!(single.sigma_hat, None);
    }

    #[test]
    fn ci_examples() {
        let mut pe = PooledEstimate::from_estimates(vec![0.5, 0.5], 1000, 10.0).unwrap();
        assert_eq!(confidence_interval(&pe, 0.05).unwrap(), (0.5, 0.5));

        pe.m = 50;
        pe.sigma_hat = Some(0.54);
        let (lo, hi) = confidence_interval(&pe, 0.05).unwrap();
        let half = 0.54 * 1.959_963_984_540_054 / (10.0 * 50f64.sqrt());
        assert!(((hi - lo) / 2.0 - half).abs() < 1e-12);
        // Hand arithmetic gives 0.014966; the exact value is 0.0149678.
        assert!((half - 0.014966).abs() < 5e-6);
        assert!(((hi + lo) / 2.0 - 0.5).abs() < 1e-15);

        let (lo, hi) = confidence_interval(&pe, 1.0).unwrap();
        assert_eq!(lo, hi);

        pe.sigma_hat = None;
        assert!(matches!(
            confidence_interval(&pe, 0.05),
            Err(Error::SigmaUnavailable(_))
        ));
        assert!(confidence_interval(&pe, 0.0).is_err());
    }

    #[test]
    fn ci_width_scales_with_inverse_root_m() {
        let mut pe = PooledEstimate::from_estimates(vec![0.0, 1.0], 1000, 10.0).unwrap();
        pe.sigma_hat = Some(0.3);
        let width = |pe: &PooledEstimate| {
            let (lo, hi) = confidence_interval(pe, 0.05).unwrap();
            hi - lo
        };
        pe.m = 10;
        let w10 = width(&pe);
        pe.m = 40;
        let w40 = width(&pe);
        assert!((w10 / w40 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn choose_m_examples() {
        assert_eq!(choose_m(&RateSchedule::inverse_problem(), 1000), 10);
        let flat = RateSchedule::new(0.25, 0.5).unwrap();
        for n in [2, 100, 1_000_000] {
            assert_eq!(choose_m(&flat, n), 1);
        }
        let slow = RateSchedule::new(2.0 / 15.0, 2.0 / 15.0).unwrap();
        assert_eq!(choose_m(&slow, 1 << 15), 4);
        assert!(RateSchedule::new(0.1, 0.3).is_err());
        assert!(RateSchedule::new(0.0, 0.0).is_err());
    }

    #[test]
    fn noiseless_inverse_lands_within_a_gap() {
        use crate::models::{draw_regression, RegressionModel};
        let model = RegressionModel::linear(0.0).unwrap();
        let global = draw_regression(&model, 4000, &key()).unwrap();
        let (_, idx) = split(global.len(), 8, true, &key().with_subsample(1)).unwrap();
        let blocks: Vec<SortedSample> = idx.iter().map(|b| global.subset(b).unwrap()).collect();
        let pe = pooled_point_estimate(&blocks, Functional::MuInverseAt(0.5), Direction::Nondecreasing)
            .unwrap();
        for (block, est) in blocks.iter().zip(&pe.estimates) {
            let xs = block.xs();
            let k = xs.partition_point(|&x| x <= 0.5);
            let gap = xs[k] - xs[k - 1];
            assert!((est - 0.5).abs() <= gap, "{est}");
        }
        assert!(pe.flagged.is_empty());
    }

    #[test]
    fn out_of_range_level_is_flagged_not_dropped() {
        let s = SortedSample::new(vec![0.2, 0.4, 0.6], vec![0.1, 0.2, 0.3]).unwrap();
        let pe = pooled_point_estimate(
            &[s.clone(), s],
            Functional::MuInverseAt(5.0),
            Direction::Nondecreasing,
        )
        .unwrap();
        assert_eq!(pe.estimates, vec![1.0, 1.0]);
        assert_eq!(pe.flagged, vec![0, 1]);
    }
}
