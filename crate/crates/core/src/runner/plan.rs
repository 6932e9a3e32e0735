use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::compare::{CompareMode, CrossTaskPairing};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::io::{parse_cifar_bin, synth_blobs_task, Dataset, Split, TaskData};
use crate::nn::{init_weights, Architecture, NetworkConfig, Weights};
use crate::pruning::{iterative_lottery, PruneSchedule, RunRecord};
use crate::rng::{RandomStream, RegimeKind};
use crate::tensor::Tensor;

/// Where a task's examples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// Gaussian class blobs generated from `seed`.
    Blobs {
        #[serde(default = "default_blob_classes")]
        classes: usize,
        #[serde(default = "default_blob_train")]
        train_per_class: usize,
        #[serde(default = "default_blob_test")]
        test_per_class: usize,
        #[serde(default = "default_blob_dims")]
        dims: usize,
        #[serde(default = "default_blob_spread")]
        spread: f64,
        #[serde(default)]
        seed: u64,
    },
    /// A directory with the four MNIST-style IDX files.
    Idx {
        dir: PathBuf,
        #[serde(default = "default_train_limit")]
        train_limit: usize,
        #[serde(default = "default_test_limit")]
        test_limit: usize,
    },
    /// A directory with CIFAR-10 binary batches.
    Cifar {
        dir: PathBuf,
        #[serde(default = "default_train_limit")]
        train_limit: usize,
        #[serde(default = "default_test_limit")]
        test_limit: usize,
    },
}

fn default_blob_classes() -> usize {
    10
}
fn default_blob_train() -> usize {
    100
}
fn default_blob_test() -> usize {
    100
}
fn default_blob_dims() -> usize {
    32
}
fn default_blob_spread() -> f64 {
    1.0
}
fn default_train_limit() -> usize {
    2000
}
fn default_test_limit() -> usize {
    1000
}

/// Gradient-noise level of the blob network preset.
pub const BLOB_GRAD_NOISE: f64 = 0.35;

pub const IDX_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];
pub const CIFAR_TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const CIFAR_TEST_FILE: &str = "test_batch.bin";

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn concat(parts: Vec<Dataset>, split: Split) -> Result<Dataset> {
    let first = parts.first().ok_or(Error::EmptyDataset)?;
    let mut shape = first.images.shape().to_vec();
    let classes = first.classes;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for p in parts {
        rows += p.len();
        labels.extend(p.labels);
        data.extend(p.images.into_data());
    }
    shape[0] = rows;
    Dataset::new(Tensor::new(shape, data)?, labels, classes, split)
}

impl DatasetSpec {
    pub fn blobs(seed: u64) -> Self {
        DatasetSpec::Blobs {
            classes: default_blob_classes(),
            train_per_class: default_blob_train(),
            test_per_class: default_blob_test(),
            dims: default_blob_dims(),
            spread: default_blob_spread(),
            seed,
        }
    }

    /// Loads the train/test split, subsampled to the configured limits.
    pub fn load(&self, name: &str) -> Result<TaskData> {
        let task = match self {
            DatasetSpec::Blobs {
                classes,
                train_per_class,
                test_per_class,
                dims,
                spread,
                seed,
            } => {
                let stream = RandomStream::new(*seed, "blobs");
                synth_blobs_task(name, *classes, *train_per_class, *test_per_class, *dims, *spread, &stream)?
            }
            DatasetSpec::Idx {
                dir,
                train_limit,
                test_limit,
            } => {
                let [ti, tl, vi, vl] = IDX_FILES.map(|f| dir.join(f));
                TaskData {
                    name: name.to_string(),
                    train: Dataset::from_idx(&read(&ti)?, &read(&tl)?, 10, Split::Train)?.take(*train_limit),
                    test: Dataset::from_idx(&read(&vi)?, &read(&vl)?, 10, Split::Test)?.take(*test_limit),
                }
            }
            DatasetSpec::Cifar {
                dir,
                train_limit,
                test_limit,
            } => {
                let mut parts = Vec::new();
                let mut have = 0;
                for f in CIFAR_TRAIN_FILES {
                    if have >= *train_limit {
                        break;
                    }
                    let path = dir.join(f);
                    if !path.exists() && !parts.is_empty() {
                        break;
                    }
                    let part = parse_cifar_bin(&read(&path)?, Split::Train)?;
                    have += part.len();
                    parts.push(part);
                }
                let test = parse_cifar_bin(&read(&dir.join(CIFAR_TEST_FILE))?, Split::Test)?;
                TaskData {
                    name: name.to_string(),
                    train: concat(parts, Split::Train)?.take(*train_limit),
                    test: test.take(*test_limit),
                }
            }
        };
        if task.train.is_empty() || task.test.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(task)
    }

    /// Network used when a task does not name one: an MLP with one hidden
    /// layer of 40 units for blobs, LeNet-5 for images.
    ///
    /// The blob preset trains with gradient noise of σ = 0.35, the smallest
    /// level at which free-regime tickets on blobs are indistinguishable
    /// from random masks.
    pub fn default_network(&self) -> NetworkConfig {
        match self {
            DatasetSpec::Blobs { classes, dims, .. } => NetworkConfig {
                grad_noise: BLOB_GRAD_NOISE,
                ..NetworkConfig::new(Architecture::mlp(*dims, &[40], *classes))
            },
            DatasetSpec::Idx { .. } => NetworkConfig::new(Architecture::lenet(1, 28, 10)),
            DatasetSpec::Cifar { .. } => NetworkConfig::new(Architecture::lenet(3, 32, 10)),
        }
    }
}

/// One named task: a dataset and, optionally, its own network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    #[serde(flatten)]
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub network: Option<NetworkConfig>,
}

/// Seeds × runs × pruning steps over one or more tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Network for tasks without their own.
    #[serde(default)]
    pub network: Option<NetworkConfig>,
    #[serde(default = "PruneSchedule::standard")]
    pub schedule: PruneSchedule,
    #[serde(default)]
    pub regime: RegimeKind,
    #[serde(default = "default_tasks")]
    pub tasks: Vec<TaskSpec>,
    #[serde(default = "default_modes")]
    pub modes: Vec<CompareMode>,
    #[serde(default)]
    pub cross_task: CrossTaskPairing,
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}
fn default_runs() -> usize {
    5
}
fn default_tasks() -> Vec<TaskSpec> {
    vec![TaskSpec {
        name: "blobs".into(),
        dataset: DatasetSpec::blobs(0),
        network: None,
    }]
}
fn default_modes() -> Vec<CompareMode> {
    vec![CompareMode::Within, CompareMode::Across]
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            seeds: default_seeds(),
            runs: default_runs(),
            network: None,
            schedule: PruneSchedule::standard(),
            regime: RegimeKind::default(),
            tasks: default_tasks(),
            modes: default_modes(),
            cross_task: CrossTaskPairing::default(),
        }
    }
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        let plan: ExperimentPlan = toml::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Plan(e.to_string()))
    }

    /// Network configuration of task `i`.
    pub fn network_for(&self, i: usize) -> NetworkConfig {
        let task = &self.tasks[i];
        task.network
            .clone()
            .or_else(|| self.network.clone())
            .unwrap_or_else(|| task.dataset.default_network())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Plan("no seeds".into()));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(Error::Plan("duplicate seeds".into()));
        }
        if self.runs == 0 {
            return Err(Error::Plan("runs per seed must be positive".into()));
        }
        if self.tasks.is_empty() {
            return Err(Error::Plan("no tasks".into()));
        }
        if self.tasks.iter().map(|t| &t.name).collect::<BTreeSet<_>>().len() != self.tasks.len() {
            return Err(Error::Plan("duplicate task names".into()));
        }
        for i in 0..self.tasks.len() {
            self.network_for(i).validate()?;
        }
        if self.modes.contains(&CompareMode::CrossTask) {
            if self.tasks.len() < 2 {
                return Err(Error::Plan("cross-task comparison needs at least two tasks".into()));
            }
            let a = self.network_for(0).architecture.full_mask();
            for i in 1..self.tasks.len() {
                let b = self.network_for(i).architecture.full_mask();
                if !a.layers().iter().zip(b.layers()).any(|(x, y)| x.dims() == y.dims()) {
                    return Err(Error::Plan(format!(
                        "task {:?} shares no layer shape with {:?}",
                        self.tasks[i].name, self.tasks[0].name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Executes every (task, seed, run) of the plan. Runs of one seed share a
/// single initialisation; independent runs are spread over `exec`.
/// Records come back ordered by task, seed, run.
pub fn run_plan(plan: &ExperimentPlan, exec: Execution) -> Result<Vec<RunRecord>> {
    plan.validate()?;
    let mut jobs = Vec::new();
    for (t, task) in plan.tasks.iter().enumerate() {
        let data = Arc::new(task.dataset.load(&task.name)?);
        let config = Arc::new(plan.network_for(t));
        for &seed in &plan.seeds {
            let init: Arc<Weights> = Arc::new(init_weights(&config, seed)?);
            for run in 0..plan.runs as u64 {
                jobs.push((Arc::clone(&config), Arc::clone(&init), Arc::clone(&data), seed, run));
            }
        }
    }
    exec.map_slice(&jobs, |(config, init, data, seed, run)| {
        let policy = plan.regime.policy(*seed);
        iterative_lottery(config, Arc::clone(init), data, &plan.schedule, &policy, *run)
    })
    .into_iter()
    .collect()
}
