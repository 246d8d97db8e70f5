//! Divide-and-conquer inference for isotonic regression and related
//! cube-root estimators.
//!
//! The crate is organised bottom-up:
//!
//! * [`isotonic`] fits the monotone least-squares estimate through the least
//!   concave majorant of the cumulative-sum diagram, and provides evaluation,
//!   the generalized inverse and the current-status NPMLE.
//! * [`models`] holds the data-generating processes used by the experiments.
//! * [`pooling`] splits samples, averages subsample estimates and builds
//!   confidence intervals from their spread.
//! * [`limit_dist`] simulates Chernoff's distribution and the scaling constants
//!   of the cube-root limits.
//! * [`kde`] is the kernel density estimator used to contrast bandwidth
//!   policies under pooling.
//! * [`experiments`] is the Monte Carlo harness tying it all together.
//!
//! Every random draw is keyed by a [`StreamKey`], so results do not depend on
//! how work is scheduled across threads.

// `!(x > 0.0)` guards are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod isotonic;
pub mod kde;
pub mod limit_dist;
pub mod models;
pub mod pooling;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, ExperimentKind, RatioCell, RatioTable};
pub use isotonic::{
    build_cusum, evaluate, fit_current_status, fit_isotonic, inverse, lcm_left_slopes,
    CumSumDiagram, Direction, SortedSample, StepEstimate,
};
pub use limit_dist::{ChernoffDraws, ChernoffSampler, ScaleConstants};
pub use models::{CurrentStatusModel, MeanFunction, PerturbationBump, RegressionModel};
pub use pooling::{Functional, PooledEstimate, RateSchedule, SplitPlan};
pub use rng::StreamKey;
