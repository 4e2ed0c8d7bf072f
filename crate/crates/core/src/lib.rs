//! Monte-Carlo goodness-of-fit testing for discrete distributions.
//!
//! The crate compares observed categorical counts against a model
//! distribution (fixed, or fitted by maximum likelihood) using the discrete
//! Kolmogorov-Smirnov statistic, the Euclidean distance, and the classical
//! chi-square, G2 (log-likelihood-ratio) and Freeman-Tukey statistics.
//! P-values are estimated by simulating hypothetical experiments from the
//! fitted model; every run is a deterministic function of its seed.
//!
//! ```
//! use dgof::{montecarlo, EmpiricalCounts, Model, StatisticKind, TestSpec, Ordering};
//! use dgof::distributions::make_uniform;
//!
//! let data = EmpiricalCounts::dense(vec![15, 9, 14, 11, 13]).unwrap();
//! let spec = TestSpec {
//!     data,
//!     model: Model::Fixed(make_uniform(5).unwrap()),
//!     statistics: vec![StatisticKind::Euclidean, StatisticKind::Chi2],
//!     ordering: Ordering::identity(5),
//!     sims: 2_000,
//!     seed: 1,
//! };
//! let reports = montecarlo::pvalue(&spec).unwrap();
//! assert_eq!(reports[0].hits, reports[1].hits);
//! ```

pub mod datasets;
pub mod distributions;
mod error;
pub mod io;
pub mod montecarlo;
pub mod numeric;
pub mod orderings;
pub mod rng;
pub mod statistics;
pub mod theory;

pub use distributions::{
    BinDistribution, EmpiricalCounts, HardyWeinbergModel, ParametricFamily, SparseUniformModel,
    TailPolicy, TruncatedPoissonModel,
};
pub use error::{GofError, Result};
pub use montecarlo::{Model, PValueReport, TestSpec};
pub use orderings::TrialResult;
pub use statistics::{Ordering, OrderingKind, StatisticKind};
