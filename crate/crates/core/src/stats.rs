//! Small numerical helpers shared by the estimators and the Monte Carlo harness.

use statrs::distribution::{ContinuousCDF, Normal};

/// Kahan–Babuška compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().copied().collect::<KahanSum>().total() / values.len() as f64
}

/// Unbiased sample variance (divisor `len - 1`).
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss = values
        .iter()
        .map(|v| (v - m) * (v - m))
        .collect::<KahanSum>()
        .total();
    ss / (values.len() as f64 - 1.0)
}

/// Moment skewness `m3 / m2^1.5`.
pub fn skewness(values: &[f64]) -> f64 {
    let (m2, m3, _) = central_moments(values);
    m3 / m2.powf(1.5)
}

/// Moment kurtosis `m4 / m2^2` (3 for a normal law).
pub fn kurtosis(values: &[f64]) -> f64 {
    let (m2, _, m4) = central_moments(values);
    m4 / (m2 * m2)
}

fn central_moments(values: &[f64]) -> (f64, f64, f64) {
    let m = mean(values);
    let n = values.len() as f64;
    let (mut m2, mut m3, mut m4) = (KahanSum::new(), KahanSum::new(), KahanSum::new());
    for v in values {
        let d = v - m;
        let d2 = d * d;
        m2.add(d2);
        m3.add(d2 * d);
        m4.add(d2 * d2);
    }
    (m2.total() / n, m3.total() / n, m4.total() / n)
}

/// Statistic of column totals over replicate rows, with its delete-one
/// jackknife standard error. `stat` receives the totals and the row count.
pub fn jackknife<const K: usize, F>(rows: &[[f64; K]], stat: F) -> (f64, f64)
where
    F: Fn(&[f64; K], usize) -> f64,
{
    let r = rows.len();
    let mut totals = [0.0; K];
    for (k, t) in totals.iter_mut().enumerate() {
        *t = rows.iter().map(|row| row[k]).collect::<KahanSum>().total();
    }
    let full = stat(&totals, r);
    if r < 2 {
        return (full, 0.0);
    }
    let loo: Vec<f64> = rows
        .iter()
        .map(|row| {
            let mut t = totals;
            for k in 0..K {
                t[k] -= row[k];
            }
            stat(&t, r - 1)
        })
        .collect();
    let bar = mean(&loo);
    let ss = loo.iter().map(|v| (v - bar).powi(2)).collect::<KahanSum>().total();
    (full, ((r - 1) as f64 / r as f64 * ss).sqrt())
}

/// Linear-interpolation quantile of an ascending slice (R's type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Standard normal quantile, Wichura's AS 241 (PPND16).
///
/// Relative accuracy is about 1e-16 over the open unit interval. Coefficients
/// are copied as published.
#[allow(clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5)
            * q;
        let den = ((((((5.226_495_278_852_854_5e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    // Normal::standard() cannot fail.
    Normal::standard().cdf(x)
}

/// Kolmogorov–Smirnov distance between the empirical law of `values` and N(0, 1).
pub fn ks_distance_normal(values: &[f64]) -> f64 {
    let sorted = sorted_copy(values);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Composite Simpson rule with `intervals` (rounded up to even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let k = intervals.max(2).next_multiple_of(2);
    let h = (b - a) / k as f64;
    let mut acc = KahanSum::new();
    acc.add(f(a));
    acc.add(f(b));
    for i in 1..k {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc.add(w * f(a + i as f64 * h));
    }
    acc.total() * h / 3.0
}
