//! Kernel density estimation at a point, alone and pooled over blocks.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stats::KahanSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// `(15/16)(1 - u^2)^2`, continuously differentiable on the real line.
    #[default]
    Biweight,
    /// `(3/4)(1 - u^2)`.
    Epanechnikov,
}

impl Kernel {
    pub fn eval(&self, u: f64) -> f64 {
        if u.abs() > 1.0 {
            return 0.0;
        }
        let s = 1.0 - u * u;
        match self {
            Kernel::Biweight => 15.0 / 16.0 * s * s,
            Kernel::Epanechnikov => 0.75 * s,
        }
    }

    /// `R(K) = integral of K^2`.
    pub fn roughness(&self) -> f64 {
        match self {
            Kernel::Biweight => 5.0 / 7.0,
            Kernel::Epanechnikov => 0.6,
        }
    }
}

pub fn r_of_k(kernel: Kernel) -> f64 {
    kernel.roughness()
}

/// `(1 / (n h)) sum K((t0 - X_i) / h)`.
pub fn kde_at_point(sample: &[f64], t0: f64, h: f64, kernel: Kernel) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid("h", format!("bandwidth {h} must be positive")));
    }
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(kernel_sum(sample, t0, h, kernel) / (sample.len() as f64 * h))
}

fn kernel_sum(sample: &[f64], t0: f64, h: f64, kernel: Kernel) -> f64 {
    sample
        .iter()
        .map(|&x| kernel.eval((t0 - x) / h))
        .collect::<KahanSum>()
        .total()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthPolicy {
    /// Each block uses its own optimal `h_n = n^(-1/3)`.
    FixedSubsample,
    /// Each block uses the full-sample bandwidth `N^(-1/3)`.
    Undersmoothed,
}

impl BandwidthPolicy {
    pub fn bandwidth(&self, block_size: usize, total: usize) -> f64 {
        match self {
            BandwidthPolicy::FixedSubsample => (block_size as f64).powf(-1.0 / 3.0),
            BandwidthPolicy::Undersmoothed => (total as f64).powf(-1.0 / 3.0),
        }
    }
}

/// Mean of per-block estimates at `t0` under the bandwidth `policy`.
pub fn pooled_kde<B: AsRef<[f64]>>(
    blocks: &[B],
    t0: f64,
    policy: BandwidthPolicy,
    kernel: Kernel,
) -> Result<f64> {
    if blocks.is_empty() {
        return Err(invalid("m", "need at least one block"));
    }
    if blocks.iter().any(|b| b.as_ref().is_empty()) {
        return Err(Error::EmptySample);
    }
    let total: usize = blocks.iter().map(|b| b.as_ref().len()).sum();
    let mut acc = KahanSum::new();
    for block in blocks {
        let block = block.as_ref();
        let h = policy.bandwidth(block.len(), total);
        acc.add(kde_at_point(block, t0, h, kernel)?);
    }
    Ok(acc.total() / blocks.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::simpson;

    #[test]
    fn kernels_integrate_to_one_and_are_symmetric() {
        for k in [Kernel::Biweight, Kernel::Epanechnikov] {
            let mass = simpson(|u| k.eval(u), -1.0, 1.0, 2000);
            assert!((mass - 1.0).abs() < 1e-8, "{k:?}");
            assert_eq!(k.eval(1.2), 0.0);
            for i in 0..50 {
                let u = i as f64 / 50.0;
                assert_eq!(k.eval(u), k.eval(-u));
            }
        }
    }

    #[test]
    fn roughness_matches_quadrature() {
        for k in [Kernel::Biweight, Kernel::Epanechnikov] {
            let q = simpson(|u| k.eval(u).powi(2), -1.0, 1.0, 2000);
            assert!((q - r_of_k(k)).abs() < 1e-10, "{k:?}");
            assert!(r_of_k(k) > 0.0);
        }
        assert!((r_of_k(Kernel::Biweight) - 0.714_286).abs() < 1e-6);
    }

    #[test]
    fn one_point_and_out_of_window() {
        let h = 0.3;
        let v = kde_at_point(&[0.4], 0.4, h, Kernel::Biweight).unwrap();
        assert_eq!(v, Kernel::Biweight.eval(0.0) / h);
        let v = kde_at_point(&[0.0, 0.05, 0.9], 0.5, 0.1, Kernel::Biweight).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn errors() {
        assert!(kde_at_point(&[0.1], 0.1, 0.0, Kernel::Biweight).is_err());
        assert!(kde_at_point(&[], 0.1, 0.1, Kernel::Biweight).is_err());
        let empty: [&[f64]; 0] = [];
        assert!(pooled_kde(&empty, 0.5, BandwidthPolicy::Undersmoothed, Kernel::Biweight).is_err());
        let with_empty: [&[f64]; 2] = [&[0.5], &[]];
        assert!(matches!(
            pooled_kde(&with_empty, 0.5, BandwidthPolicy::Undersmoothed, Kernel::Biweight),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn policies_coincide_for_one_block() {
        let block: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let a = pooled_kde(&[&block], 0.5, BandwidthPolicy::FixedSubsample, Kernel::Biweight).unwrap();
        let b = pooled_kde(&[&block], 0.5, BandwidthPolicy::Undersmoothed, Kernel::Biweight).unwrap();
        assert_eq!(a, b);
    }
}
