//! `fit` and `pool` on user data.

use std::path::Path;

use anyhow::{bail, Context};
use isoconquer_core::isotonic::{fit_isotonic, Direction, SortedSample};
use isoconquer_core::pooling::{
    confidence_interval, exact_limit_ci, pooled_point_estimate, split, Functional,
};
use isoconquer_core::rng::{experiment_id, StreamKey};
use isoconquer_core::ChernoffSampler;
use serde::{Deserialize, Serialize};

/// Two numeric columns; a non-numeric first line is taken as a header.
pub fn read_xy(path: &Path) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read data {}", path.display()))?;
    parse_xy(&text).with_context(|| format!("in {}", path.display()))
}

pub fn parse_xy(text: &str) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            bail!("line {}: expected 2 columns, found {}", i + 1, fields.len());
        }
        match (fields[0].parse::<f64>(), fields[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                xs.push(x);
                ys.push(y);
            }
            _ if i == 0 => continue,
            _ => bail!("line {}: not a number pair: {line}", i + 1),
        }
    }
    if xs.is_empty() {
        bail!("no data rows");
    }
    Ok((xs, ys))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub direction: Direction,
    pub breakpoints: Vec<f64>,
    pub levels: Vec<f64>,
}

pub fn fit(xs: Vec<f64>, ys: Vec<f64>, direction: Direction) -> anyhow::Result<FitReport> {
    let est = fit_isotonic(&SortedSample::new(xs, ys)?, direction);
    Ok(FitReport {
        direction,
        breakpoints: est.breakpoints().to_vec(),
        levels: est.levels().to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    Normal,
    ExactLimit,
}

impl IntervalMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            IntervalMethod::Normal => "normal",
            IntervalMethod::ExactLimit => "exact_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub method: IntervalMethod,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolReport {
    pub functional: Functional,
    pub total: usize,
    pub n: usize,
    pub m: usize,
    pub discarded: usize,
    pub theta_bar: f64,
    pub sigma_hat: Option<f64>,
    pub estimates: Vec<f64>,
    pub flagged: Vec<usize>,
    pub intervals: Vec<Interval>,
}

pub struct PoolRequest<'a> {
    pub functional: Functional,
    pub direction: Direction,
    pub m: usize,
    pub alpha: f64,
    pub shuffle: bool,
    pub seed: u64,
    /// Chernoff draws for the exact interval, if requested.
    pub exact_draws: Option<usize>,
    pub cache: Option<&'a Path>,
    /// Needed for the exact interval when `m = 1`.
    pub sigma: Option<f64>,
}

pub fn pool(xs: Vec<f64>, ys: Vec<f64>, req: &PoolRequest) -> anyhow::Result<PoolReport> {
    let sample = SortedSample::new(xs, ys)?;
    let key = StreamKey::new(req.seed, experiment_id("pool"));
    let (plan, idx) = split(sample.len(), req.m, req.shuffle, &key)?;
    let blocks = idx
        .iter()
        .map(|b| sample.subset(b))
        .collect::<isoconquer_core::Result<Vec<_>>>()?;
    let pe = pooled_point_estimate(&blocks, req.functional, req.direction)?;
    let mut intervals = Vec::new();
    if pe.sigma_hat.is_some() {
        let (lower, upper) = confidence_interval(&pe, req.alpha)?;
        intervals.push(Interval {
            method: IntervalMethod::Normal,
            lower,
            upper,
        });
    }
    if let Some(count) = req.exact_draws {
        let draws = ChernoffSampler::with_seed(req.seed).sample_cached(req.cache, count)?;
        let (lower, upper) = exact_limit_ci(&pe, req.alpha, &draws, req.sigma, &key.with_cell(1))?;
        intervals.push(Interval {
            method: IntervalMethod::ExactLimit,
            lower,
            upper,
        });
    }
    Ok(PoolReport {
        functional: req.functional,
        total: plan.total,
        n: plan.block_size,
        m: plan.blocks,
        discarded: plan.discarded,
        theta_bar: pe.theta_bar,
        sigma_hat: pe.sigma_hat,
        estimates: pe.estimates,
        flagged: pe.flagged,
        intervals,
    })
}
