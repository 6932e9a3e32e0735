//! Recursive baselines for k repeated random tickets.
//!
//! Both recursions carry a "max" variant that adds three hypergeometric
//! standard deviations per round; half the gap between the max variant and
//! the mean is reported as `sigma`.

use serde::{Deserialize, Serialize};

use super::{BaselineEstimate, BaselineModel};
use crate::error::{Error, Result};

/// How the never-covered recursion subtracts previous tickets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeverCoveredReading {
    /// `K_i = n·(1 − C_{i−1}/N)` against cumulative coverage `C`.
    #[default]
    Cumulative,
    /// `K_i = n − n·K_{i−1}/N` against the previous increment only.
    Literal,
}

impl BaselineEstimate {
    /// Re-expresses a recursive baseline as a normal whose 2σ radius is the
    /// reported half-gap, i.e. `σ = ¼·(K^max − K)`.
    pub fn to_normal_approx(&self) -> BaselineEstimate {
        BaselineEstimate {
            mean: self.mean,
            sigma: self.sigma / 2.0,
            model: BaselineModel::NormalApprox,
        }
    }
}

fn check(population: u64, n: u64) -> Result<(f64, f64)> {
    if n == 0 || n > population {
        return Err(Error::Domain(format!("ticket size {n} must be in 1..={population}")));
    }
    if population < 2 {
        return Err(Error::Domain("population must be at least 2".into()));
    }
    Ok((population as f64, n as f64))
}

/// Hypergeometric standard deviation of a draw of `n` against `covered`
/// marked weights, in the form used by the max-variant recursions.
fn deviation(big_n: f64, n: f64, covered: f64) -> f64 {
    (n * (big_n - covered).max(0.0) / big_n * (big_n - n) / (big_n - 1.0)).sqrt()
}

/// Expected number of weights shared by all of `k` random tickets of size
/// `n` over `population` weights: `K_{k−1}` with `K_0 = n`,
/// `K_i = n·K_{i−1}/N`.
pub fn shared_all_baseline(population: u64, n: u64, k: u32) -> Result<BaselineEstimate> {
    let (big_n, n) = check(population, n)?;
    if k < 2 {
        return Err(Error::Domain(format!("need at least 2 tickets, got {k}")));
    }
    let mut mean = n;
    let mut max = n;
    for _ in 1..k {
        mean = n * mean / big_n;
        max = n * max / big_n + 3.0 * deviation(big_n, n, max);
    }
    Ok(BaselineEstimate {
        mean,
        sigma: 0.5 * (max - mean),
        model: BaselineModel::RecursiveShared,
    })
}

/// Expected number of weights in none of `k` random tickets (cumulative reading).
pub fn never_covered_baseline(population: u64, n: u64, k: u32) -> Result<BaselineEstimate> {
    never_covered_baseline_with(population, n, k, NeverCoveredReading::Cumulative)
}

pub fn never_covered_baseline_with(
    population: u64,
    n: u64,
    k: u32,
    reading: NeverCoveredReading,
) -> Result<BaselineEstimate> {
    let (big_n, n) = check(population, n)?;
    if k < 1 {
        return Err(Error::Domain("need at least 1 ticket".into()));
    }
    let (covered, covered_max) = match reading {
        NeverCoveredReading::Cumulative => {
            let mut c = n;
            let mut c_max = n;
            for _ in 1..k {
                c += n * (1.0 - c / big_n);
                c_max += n - n * c_max / big_n + 3.0 * deviation(big_n, n, c_max);
                c_max = c_max.min(big_n);
            }
            (c, c_max)
        }
        NeverCoveredReading::Literal => {
            let (mut inc, mut inc_max) = (n, n);
            let (mut c, mut c_max) = (n, n);
            for _ in 1..k {
                inc = n - n * inc / big_n;
                inc_max = n - n * inc_max / big_n + 3.0 * deviation(big_n, n, inc_max);
                c += inc;
                c_max += inc_max;
            }
            (c, c_max)
        }
    };
    Ok(BaselineEstimate {
        mean: big_n - covered,
        sigma: 0.5 * (covered_max - covered).abs(),
        model: BaselineModel::RecursiveNever,
    })
}
