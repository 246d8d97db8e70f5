//! Isotonic least squares on the unit interval.
//!
//! The nonincreasing fit at the ordered covariates equals the left-hand slope
//! of the least concave majorant of the cumulative-sum diagram; both are
//! computed here by a single stack pass that pools adjacent violating blocks.
//! Nondecreasing fits are obtained by reflection (negate, fit, negate).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Nonincreasing,
    Nondecreasing,
}

/// Covariate/response pairs ordered by strictly ascending covariate.
///
/// Tied covariates are merged on construction: the responses are averaged and
/// the multiplicity is kept as a weight, which leaves the least-squares
/// objective unchanged up to a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    xs: Vec<f64>,
    ys: Vec<f64>,
    weights: Vec<f64>,
}

impl SortedSample {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                left: xs.len(),
                right: ys.len(),
            });
        }
        if xs.is_empty() {
            return Err(Error::EmptySample);
        }
        for (i, (&x, &y)) in xs.iter().zip(&ys).enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::NonFinite(i));
            }
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::OutsideUnitInterval { index: i, value: x });
            }
        }
        if xs.windows(2).all(|w| w[0] < w[1]) {
            let weights = vec![1.0; xs.len()];
            return Ok(Self { xs, ys, weights });
        }
        Ok(Self::sort_and_merge(&xs, &ys))
    }

    fn sort_and_merge(xs: &[f64], ys: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
        let mut out = Self {
            xs: Vec::with_capacity(xs.len()),
            ys: Vec::with_capacity(xs.len()),
            weights: Vec::with_capacity(xs.len()),
        };
        let mut i = 0;
        while i < order.len() {
            let x = xs[order[i]];
            let mut j = i;
            let mut sum = 0.0;
            while j < order.len() && xs[order[j]] == x {
                sum += ys[order[j]];
                j += 1;
            }
            let count = (j - i) as f64;
            out.xs.push(x);
            out.ys.push(sum / count);
            out.weights.push(count);
            i = j;
        }
        out
    }

    /// The sub-sample at `indices`, which must be strictly ascending.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(w) = indices.windows(2).find(|w| w[0] >= w[1]) {
            return Err(crate::error::invalid(
                "indices",
                format!("not strictly ascending at {} -> {}", w[0], w[1]),
            ));
        }
        if let Some(&last) = indices.last() {
            if last >= self.len() {
                return Err(crate::error::invalid(
                    "indices",
                    format!("index {last} out of range for {} points", self.len()),
                ));
            }
        }
        Ok(Self {
            xs: indices.iter().map(|&i| self.xs[i]).collect(),
            ys: indices.iter().map(|&i| self.ys[i]).collect(),
            weights: indices.iter().map(|&i| self.weights[i]).collect(),
        })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of distinct covariates.
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Number of original observations (sum of tie multiplicities).
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Knots and values of the piecewise-linear cumulative-sum diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct CumSumDiagram {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl CumSumDiagram {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: knots.len(),
                right: values.len(),
            });
        }
        if let Some(i) = knots
            .iter()
            .chain(&values)
            .position(|v| !v.is_finite())
        {
            return Err(Error::NonFinite(i % knots.len().max(1)));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(crate::error::invalid("knots", "must be strictly ascending"));
        }
        Ok(Self { knots, values })
    }

    /// Diagram with equally spaced knots `0, 1/n, ..., 1` for `n + 1` values.
    pub fn equispaced(values: Vec<f64>) -> Result<Self> {
        let n = values.len().saturating_sub(1).max(1) as f64;
        let knots = (0..values.len()).map(|i| i as f64 / n).collect();
        Self::new(knots, values)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn build_cusum(sample: &SortedSample) -> CumSumDiagram {
    let total = sample.total_weight();
    let mut knots = Vec::with_capacity(sample.len() + 1);
    let mut values = Vec::with_capacity(sample.len() + 1);
    knots.push(0.0);
    values.push(0.0);
    let (mut w_acc, mut y_acc) = (0.0, 0.0);
    for (&y, &w) in sample.ys.iter().zip(&sample.weights) {
        w_acc += w;
        y_acc += w * y;
        knots.push(w_acc / total);
        values.push(y_acc / total);
    }
    CumSumDiagram { knots, values }
}

/// Left-hand slopes of the least concave majorant at knots `1..=n`.
pub fn lcm_left_slopes(diagram: &CumSumDiagram) -> Result<Vec<f64>> {
    if diagram.knots.len() < 2 {
        return Err(Error::TooFewKnots(diagram.knots.len()));
    }
    let segments = diagram
        .knots
        .windows(2)
        .zip(diagram.values.windows(2))
        .map(|(k, v)| (k[1] - k[0], v[1] - v[0]));
    Ok(pool_nonincreasing(segments, diagram.knots.len() - 1))
}

#[derive(Clone, Copy)]
struct Block {
    weight: f64,
    sum: f64,
    mean: f64,
    len: usize,
}

/// Weighted pool-adjacent-violators for a nonincreasing fit.
///
/// Each item is `(weight, weighted sum)`. A block is merged into its left
/// neighbour only on a strict violation, so already monotone input is returned
/// bit for bit.
fn pool_nonincreasing<I>(items: I, count: usize) -> Vec<f64>
where
    I: Iterator<Item = (f64, f64)>,
{
    let mut stack: Vec<Block> = Vec::with_capacity(count);
    for (weight, sum) in items {
        let mut cur = Block {
            weight,
            sum,
            mean: sum / weight,
            len: 1,
        };
        while let Some(prev) = stack.last() {
            if prev.mean < cur.mean {
                let weight = prev.weight + cur.weight;
                let sum = prev.sum + cur.sum;
                cur = Block {
                    weight,
                    sum,
                    mean: sum / weight,
                    len: prev.len + cur.len,
                };
                stack.pop();
            } else {
                break;
            }
        }
        stack.push(cur);
    }
    let mut out = Vec::with_capacity(count);
    for block in &stack {
        out.extend(std::iter::repeat_n(block.mean, block.len));
    }
    out
}

/// Fitted values of the monotone least-squares fit at the sample covariates.
pub fn fitted_values(sample: &SortedSample, direction: Direction) -> Vec<f64> {
    let items = sample.ys.iter().zip(&sample.weights);
    match direction {
        Direction::Nonincreasing => {
            pool_nonincreasing(items.map(|(&y, &w)| (w, w * y)), sample.len())
        }
        Direction::Nondecreasing => {
            let mut levels = pool_nonincreasing(items.map(|(&y, &w)| (w, w * -y)), sample.len());
            levels.iter_mut().for_each(|l| *l = -*l);
            levels
        }
    }
}

pub fn fit_isotonic(sample: &SortedSample, direction: Direction) -> StepEstimate {
    StepEstimate {
        breakpoints: sample.xs.clone(),
        levels: fitted_values(sample, direction),
        direction,
    }
}

/// Current-status NPMLE of the failure-time distribution function.
///
/// With responses `-1{T <= X}` the nonincreasing least-squares fit is the
/// negated NPMLE, so the result is nondecreasing with levels in `[0, 1]`.
pub fn fit_current_status(times: &[f64], indicators: &[u8]) -> Result<StepEstimate> {
    if times.len() != indicators.len() {
        return Err(Error::LengthMismatch {
            left: times.len(),
            right: indicators.len(),
        });
    }
    if let Some((index, &value)) = indicators.iter().enumerate().find(|(_, &d)| d > 1) {
        return Err(Error::BadIndicator { index, value });
    }
    let ys = indicators.iter().map(|&d| f64::from(d)).collect();
    let sample = SortedSample::new(times.to_vec(), ys)?;
    Ok(fit_current_status_sample(&sample))
}

/// As [`fit_current_status`] for a sample whose responses are the indicators.
pub fn fit_current_status_sample(sample: &SortedSample) -> StepEstimate {
    let mut est = fit_isotonic(sample, Direction::Nondecreasing);
    // Pooled means of 0/1 data can land a rounding error outside [0, 1].
    est.levels.iter_mut().for_each(|l| *l = l.clamp(0.0, 1.0));
    est
}

/// Left-continuous monotone step function on `[0, 1]`.
///
/// Level `i` applies on `(breakpoints[i-1], breakpoints[i]]`; the first level
/// also covers `[0, breakpoints[0]]` and the last extends to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEstimate {
    breakpoints: Vec<f64>,
    levels: Vec<f64>,
    direction: Direction,
}

/// Outcome of the generalized inverse with the extreme-convention flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseValue {
    pub t: f64,
    /// The level `a` lies strictly outside the range of the estimate, so the
    /// value comes from a convention (0 for an empty set, 1 for all of [0, 1]).
    pub at_convention: bool,
}

impl StepEstimate {
    pub fn new(breakpoints: Vec<f64>, levels: Vec<f64>, direction: Direction) -> Result<Self> {
        if breakpoints.len() != levels.len() {
            return Err(Error::LengthMismatch {
                left: breakpoints.len(),
                right: levels.len(),
            });
        }
        if breakpoints.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some((index, &value)) = breakpoints
            .iter()
            .enumerate()
            .find(|(_, b)| !(0.0..=1.0).contains(*b))
        {
            return Err(Error::OutsideUnitInterval { index, value });
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(crate::error::invalid(
                "breakpoints",
                "must be strictly ascending",
            ));
        }
        if let Some(i) = levels.iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let monotone = levels.windows(2).all(|w| match direction {
            Direction::Nonincreasing => w[0] >= w[1],
            Direction::Nondecreasing => w[0] <= w[1],
        });
        if !monotone {
            return Err(crate::error::invalid(
                "levels",
                format!("not monotone in the {direction:?} direction"),
            ));
        }
        Ok(Self {
            breakpoints,
            levels,
            direction,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::OutOfDomain(t));
        }
        let idx = self.breakpoints.partition_point(|&b| b < t);
        Ok(self.levels[idx.min(self.levels.len() - 1)])
    }

    /// Greatest `t` in `[0, 1]` with `self(t) >= a` (nonincreasing) or
    /// `self(t) <= a` (nondecreasing); 0 when no such `t` exists.
    pub fn inverse(&self, a: f64) -> f64 {
        self.inverse_detail(a).t
    }

    pub fn inverse_detail(&self, a: f64) -> InverseValue {
        let k = match self.direction {
            Direction::Nonincreasing => self.levels.partition_point(|&l| l >= a),
            Direction::Nondecreasing => self.levels.partition_point(|&l| l <= a),
        };
        let last = self.levels.len();
        if k == 0 {
            InverseValue {
                t: 0.0,
                at_convention: true,
            }
        } else if k == last {
            let beyond = match self.direction {
                Direction::Nonincreasing => a < self.levels[last - 1],
                Direction::Nondecreasing => a > self.levels[last - 1],
            };
            InverseValue {
                t: 1.0,
                at_convention: beyond,
            }
        } else {
            InverseValue {
                t: self.breakpoints[k - 1],
                at_convention: false,
            }
        }
    }

    /// Generalized inverse, except that when some level equals `a` exactly
    /// the midpoint of that flat is returned instead of its far end.
    ///
    /// Identical to [`StepEstimate::inverse_detail`] when no level equals
    /// `a`. Exact ties are common for 0/1 responses and would otherwise bias
    /// the inverse towards the far end of the flat.
    pub fn inverse_midpoint_detail(&self, a: f64) -> InverseValue {
        let upper = self.inverse_detail(a);
        let k = match self.direction {
            Direction::Nonincreasing => self.levels.partition_point(|&l| l > a),
            Direction::Nondecreasing => self.levels.partition_point(|&l| l < a),
        };
        if k == self.levels.len() || self.levels[k] != a {
            return upper;
        }
        let lower = if k == 0 { 0.0 } else { self.breakpoints[k - 1] };
        InverseValue {
            t: 0.5 * (lower + upper.t),
            at_convention: false,
        }
    }
}

pub fn evaluate(est: &StepEstimate, t: f64) -> Result<f64> {
    est.evaluate(t)
}

pub fn inverse(est: &StepEstimate, a: f64) -> f64 {
    est.inverse(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(ys: &[f64]) -> SortedSample {
        let n = ys.len() as f64;
        let xs = (1..=ys.len()).map(|i| i as f64 / n).collect();
        SortedSample::new(xs, ys.to_vec()).unwrap()
    }

    fn third_steps() -> StepEstimate {
        StepEstimate::new(
            vec![1.0 / 3.0, 2.0 / 3.0, 1.0],
            vec![3.0, 2.0, 1.0],
            Direction::Nonincreasing,
        )
        .unwrap()
    }

    #[test]
    fn cusum_examples() {
        let d = build_cusum(&sample(&[2.0, 4.0]));
        assert_eq!(d.knots(), &[0.0, 0.5, 1.0]);
        assert_eq!(d.values(), &[0.0, 1.0, 3.0]);

        let d = build_cusum(&sample(&[0.0, 0.0, 0.0]));
        assert!(d.values().iter().all(|&v| v == 0.0));

        let d = build_cusum(&sample(&[1.0, -1.0, 1.0, -1.0]));
        assert_eq!(d.values(), &[0.0, 0.25, 0.0, 0.25, 0.0]);
    }

    #[test]
    fn empty_and_mismatched_samples_are_rejected() {
        assert!(matches!(
            SortedSample::new(vec![], vec![]),
            Err(Error::EmptySample)
        ));
        assert!(matches!(
            SortedSample::new(vec![0.1], vec![]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            SortedSample::new(vec![1.5], vec![0.0]),
            Err(Error::OutsideUnitInterval { .. })
        ));
        assert!(matches!(
            SortedSample::new(vec![0.5], vec![f64::NAN]),
            Err(Error::NonFinite(0))
        ));
    }

    #[test]
    fn lcm_examples() {
        let concave = CumSumDiagram::equispaced(vec![0.0, 1.0, 1.5]).unwrap();
        assert_eq!(lcm_left_slopes(&concave).unwrap(), vec![2.0, 1.0]);

        let convex = CumSumDiagram::equispaced(vec![0.0, 0.5, 1.5]).unwrap();
        assert_eq!(lcm_left_slopes(&convex).unwrap(), vec![1.5, 1.5]);

        let flat = CumSumDiagram::equispaced(vec![0.0, 0.0, 0.0]).unwrap();
        assert_eq!(lcm_left_slopes(&flat).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn lcm_needs_two_knots() {
        let d = CumSumDiagram::new(vec![0.0], vec![0.0]).unwrap();
        assert!(matches!(lcm_left_slopes(&d), Err(Error::TooFewKnots(1))));
    }

    #[test]
    fn fit_examples() {
        let fit = |ys: &[f64]| fit_isotonic(&sample(ys), Direction::Nonincreasing);
        assert_eq!(fit(&[3.0, 2.0, 1.0]).levels(), &[3.0, 2.0, 1.0]);
        assert_eq!(fit(&[1.0, 2.0]).levels(), &[1.5, 1.5]);
        assert_eq!(fit(&[1.0, 3.0, 2.0, 4.0]).levels(), &[2.5; 4]);
    }

    #[test]
    fn fit_matches_lcm_slopes() {
        let s = sample(&[0.3, -1.2, 2.0, 0.7, 0.7, -0.4, 1.1]);
        let slopes = lcm_left_slopes(&build_cusum(&s)).unwrap();
        let fit = fit_isotonic(&s, Direction::Nonincreasing);
        for (a, b) in slopes.iter().zip(fit.levels()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_are_pre_averaged() {
        let s = SortedSample::new(vec![0.5, 0.2, 0.5], vec![1.0, 4.0, 3.0]).unwrap();
        assert_eq!(s.xs(), &[0.2, 0.5]);
        assert_eq!(s.ys(), &[4.0, 2.0]);
        assert_eq!(s.weights(), &[1.0, 2.0]);
        assert_eq!(s.total_weight(), 3.0);
        // A weight-2 block at 2 against 4 pools to (4 + 2*2) / 3 for increasing order.
        let up = fit_isotonic(&s, Direction::Nondecreasing);
        assert!((up.levels()[0] - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn evaluate_examples() {
        let est = third_steps();
        assert_eq!(est.evaluate(1.0 / 3.0).unwrap(), 3.0);
        assert_eq!(est.evaluate(0.5).unwrap(), 2.0);
        assert_eq!(est.evaluate(0.0).unwrap(), 3.0);
        assert_eq!(est.evaluate(1.0).unwrap(), 1.0);
        assert!(matches!(est.evaluate(1.5), Err(Error::OutOfDomain(_))));
        assert!(matches!(est.evaluate(-0.1), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn evaluate_beyond_last_covariate_uses_last_level() {
        let est = StepEstimate::new(vec![0.2, 0.4], vec![1.0, 0.0], Direction::Nonincreasing)
            .unwrap();
        assert_eq!(est.evaluate(0.9).unwrap(), 0.0);
        assert_eq!(est.inverse(0.0), 1.0);
    }

    #[test]
    fn inverse_examples() {
        let est = third_steps();
        assert_eq!(est.inverse(2.5), 1.0 / 3.0);
        assert_eq!(est.inverse(5.0), 0.0);
        assert_eq!(est.inverse(0.0), 1.0);
        assert_eq!(est.inverse(2.0), 2.0 / 3.0);
        assert!(est.inverse_detail(5.0).at_convention);
        assert!(est.inverse_detail(0.0).at_convention);
        assert!(!est.inverse_detail(1.0).at_convention);
        assert!(!est.inverse_detail(2.5).at_convention);
    }

    #[test]
    fn nondecreasing_inverse_is_reflection() {
        let est = StepEstimate::new(
            vec![1.0 / 3.0, 2.0 / 3.0, 1.0],
            vec![1.0, 2.0, 3.0],
            Direction::Nondecreasing,
        )
        .unwrap();
        // greatest t with est(t) <= a
        assert_eq!(est.inverse(1.5), 1.0 / 3.0);
        assert_eq!(est.inverse(0.5), 0.0);
        assert_eq!(est.inverse(3.0), 1.0);
    }

    #[test]
    fn step_estimate_validation() {
        assert!(StepEstimate::new(vec![0.5, 0.2], vec![1.0, 0.0], Direction::Nonincreasing)
            .is_err());
        assert!(StepEstimate::new(vec![0.2, 0.5], vec![0.0, 1.0], Direction::Nonincreasing)
            .is_err());
        assert!(StepEstimate::new(vec![0.2, 1.5], vec![1.0, 0.0], Direction::Nonincreasing)
            .is_err());
    }

    #[test]
    fn midpoint_inverse_splits_exact_ties() {
        let est = StepEstimate::new(
            vec![0.2, 0.4, 0.6, 0.8],
            vec![0.0, 0.5, 0.5, 1.0],
            Direction::Nondecreasing,
        )
        .unwrap();
        assert_eq!(est.inverse(0.5), 0.6);
        assert!((est.inverse_midpoint_detail(0.5).t - 0.4).abs() < 1e-15);
        assert_eq!(est.inverse_midpoint_detail(0.3).t, est.inverse(0.3));
        let dec = StepEstimate::new(vec![0.3, 0.7], vec![0.5, 0.1], Direction::Nonincreasing).unwrap();
        assert_eq!(dec.inverse(0.5), 0.3);
        assert!((dec.inverse_midpoint_detail(0.5).t - 0.15).abs() < 1e-15);
    }

    #[test]
    fn current_status_examples() {
        let zeros = fit_current_status(&[0.1, 0.4, 0.9], &[0, 0, 0]).unwrap();
        assert!(zeros.levels().iter().all(|&l| l == 0.0));
        let ones = fit_current_status(&[0.1, 0.4, 0.9], &[1, 1, 1]).unwrap();
        assert!(ones.levels().iter().all(|&l| l == 1.0));
        let f = fit_current_status(&[0.2, 0.5, 0.8], &[0, 1, 1]).unwrap();
        assert_eq!(f.levels(), &[0.0, 1.0, 1.0]);
        assert_eq!(f.direction(), Direction::Nondecreasing);
        // Out of order input is sorted by examination time.
        let g = fit_current_status(&[0.8, 0.2, 0.5], &[0, 1, 0]).unwrap();
        assert_eq!(g.breakpoints(), &[0.2, 0.5, 0.8]);
        for l in g.levels() {
            assert!((l - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn current_status_errors() {
        assert!(matches!(
            fit_current_status(&[], &[]),
            Err(Error::EmptySample)
        ));
        assert!(matches!(
            fit_current_status(&[0.1, 0.2], &[0, 2]),
            Err(Error::BadIndicator { index: 1, value: 2 })
        ));
        assert!(fit_current_status(&[0.1], &[0, 1]).is_err());
    }

    #[test]
    fn subset_keeps_order() {
        let s = sample(&[1.0, 2.0, 3.0, 4.0]);
        let sub = s.subset(&[0, 2, 3]).unwrap();
        assert_eq!(sub.ys(), &[1.0, 3.0, 4.0]);
        assert!(s.subset(&[2, 1]).is_err());
        assert!(s.subset(&[9]).is_err());
        assert!(s.subset(&[]).is_err());
    }
}
