//! Labelled random streams and the seed policies that decide which of them
//! are shared across repeated runs.
//!
//! Every stream is a ChaCha8 generator keyed by a SHA-256 digest of its
//! derivation path, so a stream's output depends only on how it was named,
//! never on how many values other streams have produced.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Label of the stream that initialises weights.
pub const INIT: &str = "init";
/// Label of the batch-order stream.
pub const SHUFFLE: &str = "shuffle";
/// Label of the gradient-noise stream.
pub const NOISE: &str = "noise";

/// Whether a randomness source is identical across runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Fresh entropy per run, derived from the run id.
    Free,
    /// Same stream for every run.
    Fixed(u64),
}

/// Which randomness streams are fixed and which are free across the runs of
/// one initialisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPolicy {
    pub init_seed: u64,
    pub shuffle: Regime,
    pub noise: Regime,
}

/// Named presets for the three randomness regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    #[default]
    Free,
    Partial,
    Full,
}

impl RegimeKind {
    pub fn policy(self, init_seed: u64) -> SeedPolicy {
        match self {
            RegimeKind::Free => regime_free(init_seed),
            RegimeKind::Partial => regime_partial(init_seed),
            RegimeKind::Full => regime_full(init_seed),
        }
    }
}

impl std::str::FromStr for RegimeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "free" => Ok(RegimeKind::Free),
            "partial" => Ok(RegimeKind::Partial),
            "full" => Ok(RegimeKind::Full),
            other => Err(format!("unknown regime {other:?} (free|partial|full)")),
        }
    }
}

/// Initial weights fixed; batch order and gradient noise free.
pub fn regime_free(init_seed: u64) -> SeedPolicy {
    SeedPolicy {
        init_seed,
        shuffle: Regime::Free,
        noise: Regime::Free,
    }
}

/// Initial weights and batch order fixed; gradient noise free.
pub fn regime_partial(init_seed: u64) -> SeedPolicy {
    SeedPolicy {
        init_seed,
        shuffle: Regime::Fixed(init_seed),
        noise: Regime::Free,
    }
}

/// Every source fixed.
pub fn regime_full(init_seed: u64) -> SeedPolicy {
    SeedPolicy {
        init_seed,
        shuffle: Regime::Fixed(init_seed),
        noise: Regime::Fixed(init_seed),
    }
}

impl SeedPolicy {
    /// Regime governing a label. `init` is always fixed by the init seed,
    /// `shuffle` follows the shuffle regime and everything else is noise.
    pub fn regime_for(&self, label: &str) -> Regime {
        match label {
            INIT => Regime::Fixed(self.init_seed),
            SHUFFLE => self.shuffle,
            _ => self.noise,
        }
    }
}

/// Derives the stream `label` for run `run_id` under `policy`.
///
/// Fixed regimes ignore `run_id`; free regimes mix it into the key.
pub fn derive_stream(policy: &SeedPolicy, run_id: u64, label: &str) -> RandomStream {
    assert!(!label.is_empty(), "stream label must be nonempty");
    match policy.regime_for(label) {
        Regime::Fixed(seed) => RandomStream::new(seed, label),
        Regime::Free => {
            RandomStream::from_parts(&[b"free", &policy.init_seed.to_le_bytes(), &run_id.to_le_bytes(), label.as_bytes()])
        }
    }
}

/// Counter-based generator keyed by a derivation path.
#[derive(Debug, Clone)]
pub struct RandomStream {
    key: [u8; 32],
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, label: &str) -> Self {
        Self::from_parts(&[b"fixed", &seed.to_le_bytes(), label.as_bytes()])
    }

    fn from_parts(parts: &[&[u8]]) -> Self {
        let mut hasher = Sha256::new();
        for part in parts {
            hasher.update((part.len() as u64).to_le_bytes());
            hasher.update(part);
        }
        Self::from_key(hasher.finalize().into())
    }

    fn from_key(key: [u8; 32]) -> Self {
        Self {
            key,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    /// Child stream named `label`. Depends only on this stream's key, not on
    /// how much of it has been consumed.
    pub fn split(&self, label: &str) -> RandomStream {
        Self::from_parts(&[b"split", &self.key, label.as_bytes()])
    }

    /// Child stream for a numeric index (Monte Carlo trials, layers, ...).
    pub fn split_index(&self, index: u64) -> RandomStream {
        Self::from_parts(&[b"index", &self.key, &index.to_le_bytes()])
    }

    pub fn key(&self) -> &[u8; 32] {
        &self.key
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.random::<f64>()
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        rand_distr::Distribution::sample(&rand_distr::StandardNormal, self)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draw(stream: &mut RandomStream, n: usize) -> Vec<u64> {
        (0..n).map(|_| stream.next_u64()).collect()
    }

    #[test]
    fn fixed_regime_ignores_run_id() {
        let policy = SeedPolicy {
            init_seed: 1,
            shuffle: Regime::Fixed(42),
            noise: Regime::Free,
        };
        let a = draw(&mut derive_stream(&policy, 0, SHUFFLE), 16);
        let b = draw(&mut derive_stream(&policy, 1, SHUFFLE), 16);
        assert_eq!(a, b);
    }

    #[test]
    fn free_regime_depends_on_run_id() {
        let policy = regime_free(3);
        let a = draw(&mut derive_stream(&policy, 0, SHUFFLE), 16);
        let b = draw(&mut derive_stream(&policy, 1, SHUFFLE), 16);
        assert_ne!(a, b);
    }

    #[test]
    fn same_inputs_same_sequence() {
        let policy = regime_free(9);
        let a = draw(&mut derive_stream(&policy, 4, NOISE), 8);
        let b = draw(&mut derive_stream(&policy, 4, NOISE), 8);
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_labels_distinct_streams() {
        let base = RandomStream::new(5, "x");
        assert_ne!(draw(&mut base.split("a"), 4), draw(&mut base.split("b"), 4));
        assert_ne!(draw(&mut base.split_index(0), 4), draw(&mut base.split_index(1), 4));
    }

    #[test]
    fn split_ignores_consumption() {
        let mut base = RandomStream::new(5, "x");
        let before = draw(&mut base.split("child"), 4);
        draw(&mut base, 100);
        assert_eq!(before, draw(&mut base.split("child"), 4));
    }

    #[test]
    fn init_is_always_fixed() {
        for policy in [regime_free(7), regime_partial(7), regime_full(7)] {
            let a = draw(&mut derive_stream(&policy, 0, INIT), 4);
            let b = draw(&mut derive_stream(&policy, 99, INIT), 4);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn presets() {
        let p = regime_partial(2);
        assert!(matches!(p.shuffle, Regime::Fixed(_)));
        assert_eq!(p.noise, Regime::Free);
        let f = regime_full(2);
        assert!(matches!(f.noise, Regime::Fixed(_)));
        assert_eq!(regime_free(2).shuffle, Regime::Free);
    }

    #[test]
    fn uniform_stays_in_range() {
        let mut s = RandomStream::new(0, "u");
        for _ in 0..1000 {
            let v = s.uniform(-0.5, 0.25);
            assert!((-0.5..0.25).contains(&v));
        }
    }
}
