use serde::{Deserialize, Serialize};

use super::hypergeom::significance_interval;
use crate::error::{Error, Result};
use crate::pruning::Mask;

/// Identifies one run: task, init seed and run index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunKey {
    pub task: String,
    pub seed: u64,
    pub run: u64,
}

impl std::fmt::Display for RunKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:s{}r{}", self.task, self.seed, self.run)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairId {
    pub a: RunKey,
    pub b: RunKey,
}

impl std::fmt::Display for PairId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}|{}", self.a, self.b)
    }
}

/// Intersection of two tickets in one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapStat {
    pub layer: usize,
    pub layer_name: String,
    pub pair: Option<PairId>,
    /// Weights in the layer (`m·n`).
    pub population: usize,
    pub tau: usize,
    /// Shared kept weights.
    pub x: usize,
    /// `100·x/τ`.
    pub pct: f64,
}

impl OverlapStat {
    pub fn with_pair(mut self, pair: PairId) -> Self {
        self.pair = Some(pair);
        self
    }

    /// True if `x` falls outside the random-overlap interval at `level`.
    pub fn is_significant(&self, level: f64) -> Result<bool> {
        let (lo, hi) = significance_interval(self.population as u64, self.tau as u64, level)?;
        let x = self.x as u64;
        Ok(x < lo || x > hi)
    }
}

/// Per-layer overlap of two tickets with equal per-layer sizes.
pub fn overlap(a: &Mask, b: &Mask) -> Result<Vec<OverlapStat>> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {} layers", a.len(), b.len())));
    }
    a.layers()
        .iter()
        .zip(b.layers())
        .enumerate()
        .map(|(i, (la, lb))| {
            if la.len() != lb.len() {
                return Err(Error::Shape(format!("layer {i}: {} vs {} weights", la.len(), lb.len())));
            }
            let tau = la.tau();
            if tau != lb.tau() {
                return Err(Error::Shape(format!("layer {i}: ticket sizes {tau} vs {}", lb.tau())));
            }
            let x = la.intersection_count(lb);
            Ok(OverlapStat {
                layer: i,
                layer_name: la.name().to_string(),
                pair: None,
                population: la.len(),
                tau,
                x,
                pct: if tau == 0 { 0.0 } else { 100.0 * x as f64 / tau as f64 },
            })
        })
        .collect()
}

/// Fraction of observations outside their hypergeometric interval at `level`.
pub fn significance_fraction(stats: &[OverlapStat], level: f64) -> Result<f64> {
    if stats.is_empty() {
        return Err(Error::EmptyInput("no overlap statistics"));
    }
    let mut hits = 0usize;
    for s in stats {
        if s.is_significant(level)? {
            hits += 1;
        }
    }
    Ok(hits as f64 / stats.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pruning::LayerMask;

    fn mask(bits: &[bool]) -> Mask {
        Mask::new(vec![LayerMask::from_bools("l", vec![bits.len()], bits).unwrap()])
    }

    fn stat(population: usize, tau: usize, x: usize) -> OverlapStat {
        OverlapStat {
            layer: 0,
            layer_name: "l".into(),
            pair: None,
            population,
            tau,
            x,
            pct: 100.0 * x as f64 / tau as f64,
        }
    }

    #[test]
    fn basic_overlaps() {
        let a = mask(&[true, true, false, false]);
        let b = mask(&[true, false, true, false]);
        let s = &overlap(&a, &b).unwrap()[0];
        assert_eq!((s.x, s.pct), (1, 50.0));
        assert_eq!(overlap(&a, &a).unwrap()[0].pct, 100.0);
        let c = mask(&[false, false, true, true]);
        assert_eq!(overlap(&a, &c).unwrap()[0].pct, 0.0);
    }

    #[test]
    fn mismatched_tau_rejected() {
        let a = mask(&[true, true, false, false]);
        let b = mask(&[true, false, false, false]);
        assert!(overlap(&a, &b).is_err());
        assert!(overlap(&a, &mask(&[true, true, false])).is_err());
    }

    #[test]
    fn significance_fraction_extremes() {
        // N=100, τ=50: mean overlap 25 sits inside [20, 30].
        assert_eq!(significance_fraction(&vec![stat(100, 50, 25); 10], 0.95).unwrap(), 0.0);
        assert_eq!(significance_fraction(&vec![stat(100, 50, 50); 10], 0.95).unwrap(), 1.0);
        assert!(significance_fraction(&[], 0.95).is_err());
    }
}
