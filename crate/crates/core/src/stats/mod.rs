//! Statistics over tickets: hypergeometric overlap model, recursive
//! shared/never-covered baselines, significance testing, Spearman rank
//! correlation and a Monte Carlo oracle for the baselines.

mod baselines;
mod hypergeom;
mod monte_carlo;
mod overlap;
mod spearman;

use serde::{Deserialize, Serialize};

pub use baselines::{never_covered_baseline, never_covered_baseline_with, shared_all_baseline, NeverCoveredReading};
pub use hypergeom::{hypergeom_moments, hypergeom_pmf, significance_interval, Hypergeometric};
pub use monte_carlo::{monte_carlo_oracle, Empirical, MonteCarloEstimate};
pub use overlap::{overlap, significance_fraction, OverlapStat, PairId, RunKey};
pub use spearman::{rank_average, spearman, spearman_masked};

/// Null model a [`BaselineEstimate`] was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineModel {
    Hypergeometric,
    RecursiveShared,
    RecursiveNever,
    NormalApprox,
    MonteCarlo,
}

/// Mean and spread of an overlap count under a null model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineEstimate {
    pub mean: f64,
    pub sigma: f64,
    pub model: BaselineModel,
}
