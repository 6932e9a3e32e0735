//! Large-final magnitude pruning and the iterative train → prune → reset loop.

mod mask;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use mask::{LayerMask, Mask};

use crate::error::{Error, Result};
use crate::io::{weights_hash, TaskData};
use crate::nn::{forward, train, NetworkConfig, TrainStreams, Weights};
use crate::rng::{derive_stream, SeedPolicy, NOISE, SHUFFLE};
use crate::tensor::Tensor;

/// Held-out examples (in file order) whose outputs are stored per run.
pub const PROBE_SIZE: usize = 512;

/// Strictly increasing cumulative pruning percentages, each in `(0, 100)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PruneSchedule(Vec<f64>);

impl PruneSchedule {
    pub fn new(percents: Vec<f64>) -> Result<Self> {
        if percents.is_empty() {
            return Err(Error::Schedule("empty schedule".into()));
        }
        for (i, &p) in percents.iter().enumerate() {
            if !(p > 0.0 && p < 100.0) {
                return Err(Error::Schedule(format!("entry {i} = {p} outside (0, 100)")));
            }
            if i > 0 && p <= percents[i - 1] {
                return Err(Error::Schedule(format!("entry {i} = {p} not above {}", percents[i - 1])));
            }
        }
        Ok(Self(percents))
    }

    /// 50, 60, 80, 90, 95, 98.
    pub fn standard() -> Self {
        Self(vec![50.0, 60.0, 80.0, 90.0, 95.0, 98.0])
    }

    /// 50, 60, 90, 98, 99, 99.9 (used for the larger residual network).
    pub fn aggressive() -> Self {
        Self(vec![50.0, 60.0, 90.0, 98.0, 99.0, 99.9])
    }

    pub fn percents(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Weights kept at `step` in a layer of `population` weights.
    pub fn kept_count(&self, step: usize, population: usize) -> Result<usize> {
        let pct = *self.0.get(step).ok_or(Error::ScheduleExhausted { step, len: self.0.len() })?;
        Ok(ceil_count((100.0 - pct) / 100.0 * population as f64))
    }
}

impl TryFrom<Vec<f64>> for PruneSchedule {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PruneSchedule> for Vec<f64> {
    fn from(s: PruneSchedule) -> Self {
        s.0
    }
}

impl std::str::FromStr for PruneSchedule {
    type Err = Error;

    /// Comma-separated percentages, e.g. `50,60,80,90,95,98`.
    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Schedule(format!("not a number: {p:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }
}

/// `⌈x⌉`, treating values within 1e-9 of an integer as that integer so
/// that e.g. `0.4 · 100` keeps 40 rather than 41.
fn ceil_count(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Keeps the `keep` eligible positions of largest `|value|`; ties go to the
/// lowest flat index.
fn select_largest(values: &[f64], eligible: Option<&LayerMask>, keep: usize, template: &LayerMask) -> LayerMask {
    let mut idx: Vec<usize> = match eligible {
        Some(m) => m.kept_indices(),
        None => (0..values.len()).collect(),
    };
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    let mut out = LayerMask::zeros(template.name(), template.dims().to_vec());
    for &i in idx.iter().take(keep) {
        out.set(i, true);
    }
    out
}

/// Per layer, keeps the `⌈f·m·n⌉` weights of largest absolute final value.
pub fn large_final_mask(final_weights: &Weights, keep_fraction: &[f64]) -> Result<Mask> {
    if keep_fraction.len() != final_weights.layer_count() {
        return Err(Error::Shape(format!(
            "{} keep fractions for {} layers",
            keep_fraction.len(),
            final_weights.layer_count()
        )));
    }
    let template = final_weights.architecture().full_mask();
    let layers = template
        .layers()
        .iter()
        .zip(keep_fraction)
        .enumerate()
        .map(|(i, (t, &f))| {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Domain(format!("keep fraction {f} outside (0, 1]")));
            }
            let values = final_weights.layer(i).data();
            if values.is_empty() {
                return Err(Error::EmptyLayer(i));
            }
            Ok(select_largest(values, None, ceil_count(f * values.len() as f64), t))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Mask::new(layers))
}

/// Applies schedule entry `step`, choosing only among survivors of `prev`.
///
/// If a layer already has no more than the target number of weights it is
/// left unchanged.
pub fn prune_step(prev: &Mask, final_weights: &Weights, schedule: &PruneSchedule, step: usize) -> Result<Mask> {
    final_weights.check_mask(prev)?;
    let layers = prev
        .layers()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            if m.is_empty() {
                return Err(Error::EmptyLayer(i));
            }
            let target = schedule.kept_count(step, m.len())?;
            if target >= m.tau() {
                return Ok(m.clone());
            }
            Ok(select_largest(final_weights.layer(i).data(), Some(m), target, m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Mask::new(layers))
}

/// One pruning level of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub prune_percent: f64,
    pub mask: Mask,
    /// Held-out accuracy of the ticket after retraining from the init.
    pub accuracy: f64,
    /// Weights of the ticket after retraining.
    pub trained: Weights,
}

/// Everything one iterative pruning procedure produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub task: String,
    pub seed: u64,
    pub run_id: u64,
    pub policy: SeedPolicy,
    pub schedule: PruneSchedule,
    pub init: Arc<Weights>,
    pub init_hash: String,
    /// Accuracy of the unpruned network.
    pub dense_accuracy: f64,
    pub steps: Vec<StepRecord>,
    /// Class probabilities of the last ticket on the probe set.
    pub probe_outputs: Tensor,
}

impl RunRecord {
    pub fn step(&self, step: usize) -> Result<&StepRecord> {
        self.steps.get(step).ok_or(Error::ScheduleExhausted {
            step,
            len: self.steps.len(),
        })
    }
}

/// Train densely, then for every schedule entry: prune by large final
/// magnitude, reset survivors to `init`, retrain.
///
/// Training round `r` (0 = dense) draws from child `r` of the run's
/// shuffle and noise streams.
pub fn iterative_lottery(
    config: &NetworkConfig,
    init: Arc<Weights>,
    data: &TaskData,
    schedule: &PruneSchedule,
    policy: &SeedPolicy,
    run_id: u64,
) -> Result<RunRecord> {
    let shuffle = derive_stream(policy, run_id, SHUFFLE);
    let noise = derive_stream(policy, run_id, NOISE);
    let streams_for = |round: u64| TrainStreams {
        shuffle: shuffle.split_index(round),
        noise: noise.split_index(round),
    };

    let mut mask = init.architecture().full_mask();
    let dense = train(config, &init, None, data, &mut streams_for(0))?;
    let mut last_trained = dense.weights;
    let mut steps = Vec::with_capacity(schedule.len());
    for step in 0..schedule.len() {
        mask = prune_step(&mask, &last_trained, schedule, step)?;
        let outcome = train(config, &init, Some(&mask), data, &mut streams_for(step as u64 + 1))?;
        last_trained = outcome.weights.clone();
        steps.push(StepRecord {
            prune_percent: schedule.percents()[step],
            mask: mask.clone(),
            accuracy: outcome.accuracy,
            trained: outcome.weights,
        });
    }
    let last = steps.last().expect("schedule is nonempty");
    let probe_outputs = forward(&last.trained, Some(&last.mask), &data.probe(PROBE_SIZE))?;
    Ok(RunRecord {
        task: data.name.clone(),
        seed: policy.init_seed,
        run_id,
        policy: *policy,
        schedule: schedule.clone(),
        init_hash: weights_hash(&init),
        init,
        dense_accuracy: dense.accuracy,
        steps,
        probe_outputs,
    })
}
