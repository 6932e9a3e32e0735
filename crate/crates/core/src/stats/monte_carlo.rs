use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::pruning::LayerMask;
use crate::rng::RandomStream;

/// Sample mean, standard deviation and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Empirical {
    pub mean: f64,
    pub std: f64,
    pub se: f64,
}

impl Empirical {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std = var.sqrt();
        Self {
            mean,
            std,
            se: std / n.sqrt(),
        }
    }

    /// `|mean − expected|` in standard errors (0 when both coincide exactly).
    pub fn z_score(&self, expected: f64) -> f64 {
        let diff = (self.mean - expected).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.se
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub trials: usize,
    /// Overlap of the first two tickets.
    pub pairwise: Empirical,
    /// Weights in every ticket.
    pub shared_all: Empirical,
    /// Weights in no ticket.
    pub never_covered: Empirical,
}

/// Draws `k` independent uniform `n`-subsets of `population` per trial.
/// Trial `t` uses child `t` of the `(seed, "monte-carlo")` stream, so
/// results do not depend on `exec`.
pub fn monte_carlo_oracle(
    population: usize,
    n: usize,
    k: usize,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<MonteCarloEstimate> {
    if trials < 1000 {
        return Err(Error::Domain(format!("need at least 1000 trials, got {trials}")));
    }
    if k < 2 || n == 0 || n > population {
        return Err(Error::Domain(format!(
            "need k ≥ 2 and 0 < n ≤ N (got k={k}, n={n}, N={population})"
        )));
    }
    let base = RandomStream::new(seed, "monte-carlo");
    let samples = exec.map_range(trials, |t| {
        let mut rng = base.split_index(t as u64);
        let masks: Vec<LayerMask> = (0..k)
            .map(|_| {
                let mut m = LayerMask::zeros("mc", vec![population]);
                for i in sample(&mut rng, population, n) {
                    m.set(i, true);
                }
                m
            })
            .collect();
        let pair = masks[0].intersection_count(&masks[1]) as f64;
        let shared = LayerMask::and_all(&masks).expect("k ≥ 2").tau() as f64;
        let never = (population - LayerMask::or_all(&masks).expect("k ≥ 2").tau()) as f64;
        (pair, shared, never)
    });
    let column = |f: fn(&(f64, f64, f64)) -> f64| samples.iter().map(f).collect::<Vec<_>>();
    Ok(MonteCarloEstimate {
        trials,
        pairwise: Empirical::from_samples(&column(|s| s.0)),
        shared_all: Empirical::from_samples(&column(|s| s.1)),
        never_covered: Empirical::from_samples(&column(|s| s.2)),
    })
}
