//! Imbalanced-stream protocol: `T-1` balanced classes with `n_bal` training
//! and `n_bal/5` validation examples each, one class whose examples arrive
//! one by one, and `n_test` test examples for every class.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, LabeledDataset, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamProtocol {
    /// Dense class index (in the dataset's vocabulary) of the under-represented class.
    pub imbalanced_class: usize,
    pub n_bal: usize,
    /// Stream lengths at which models are evaluated, strictly increasing.
    pub checkpoints: Vec<usize>,
    pub n_test: usize,
    pub n_trials: usize,
    pub seed: u64,
}

impl StreamProtocol {
    pub fn n_val(&self) -> usize {
        self.n_bal / 5
    }

    pub fn max_checkpoint(&self) -> usize {
        self.checkpoints.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DatasetError::InvalidProtocol(m.to_string()));
        if self.n_bal == 0 {
            return bad("n_bal must be positive");
        }
        if self.n_test == 0 {
            return bad("n_test must be positive");
        }
        if self.n_trials == 0 {
            return bad("at least one trial is required");
        }
        if self.checkpoints.is_empty() {
            return bad("no checkpoints given");
        }
        if self.checkpoints[0] == 0 {
            return bad("checkpoints must be positive");
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return bad("checkpoints must be strictly increasing");
        }
        Ok(())
    }

    /// Seed of trial `t`; trials differ only through this.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(trial as u64 + 1)
    }
}

/// Where the test indices point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestSource {
    /// Same dataset as the training indices.
    TrainPool,
    /// A separate dataset (e.g. the official MNIST test split).
    SeparatePool,
}

/// Disjoint index sets realizing one trial of the protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSplit {
    pub imbalanced_class: usize,
    /// Balanced-class training examples in presentation order.
    pub balanced_train: Vec<usize>,
    pub balanced_val: Vec<usize>,
    /// Imbalanced-class examples in arrival order; prefixes realize the checkpoints.
    pub imbalanced_stream: Vec<usize>,
    pub test: Vec<usize>,
    pub test_source: TestSource,
}

fn capacity_error(data: &LabeledDataset, class: usize, needed: usize, available: usize) -> DatasetError {
    DatasetError::Capacity {
        class: data.label_names()[class].clone(),
        needed,
        available,
    }
}

/// Samples one trial without replacement. Deterministic in `trial_seed`.
///
/// When `test_pool` is given, test indices refer to it (its vocabulary must
/// match `data`'s); otherwise they are drawn from `data` as well.
pub fn build_protocol(
    data: &LabeledDataset,
    cfg: &StreamProtocol,
    trial_seed: u64,
    test_pool: Option<&LabeledDataset>,
) -> Result<ProtocolSplit> {
    cfg.validate()?;
    let t = data.num_classes();
    if cfg.imbalanced_class >= t {
        return Err(DatasetError::InvalidProtocol(format!(
            "imbalanced class index {} outside {} classes",
            cfg.imbalanced_class, t
        )));
    }
    if t < 2 {
        return Err(DatasetError::InvalidProtocol("need at least two classes".into()));
    }
    if let Some(pool) = test_pool {
        if pool.label_names() != data.label_names() {
            return Err(DatasetError::InvalidProtocol(
                "test pool vocabulary differs from the training data".into(),
            ));
        }
        if pool.dim() != data.dim() {
            return Err(DatasetError::InvalidProtocol(format!(
                "test pool has dimension {} but training data has {}",
                pool.dim(),
                data.dim()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let groups = data.indices_by_class();
    let test_groups = test_pool.map(LabeledDataset::indices_by_class);
    let same_pool_test = if test_pool.is_some() { 0 } else { cfg.n_test };

    let mut split = ProtocolSplit {
        imbalanced_class: cfg.imbalanced_class,
        balanced_train: Vec::new(),
        balanced_val: Vec::new(),
        imbalanced_stream: Vec::new(),
        test: Vec::new(),
        test_source: if test_pool.is_some() {
            TestSource::SeparatePool
        } else {
            TestSource::TrainPool
        },
    };

    for (class, members) in groups.iter().enumerate() {
        let train_need = if class == cfg.imbalanced_class {
            cfg.max_checkpoint()
        } else {
            cfg.n_bal + cfg.n_val()
        };
        let needed = train_need + same_pool_test;
        if members.len() < needed {
            return Err(capacity_error(data, class, needed, members.len()));
        }
        let mut perm = members.clone();
        perm.shuffle(&mut rng);
        let (train_part, rest) = perm.split_at(train_need);
        if class == cfg.imbalanced_class {
            split.imbalanced_stream.extend_from_slice(train_part);
        } else {
            split.balanced_train.extend_from_slice(&train_part[..cfg.n_bal]);
            split.balanced_val.extend_from_slice(&train_part[cfg.n_bal..]);
        }
        match &test_groups {
            None => split.test.extend_from_slice(&rest[..cfg.n_test]),
            Some(tg) => {
                let pool = &tg[class];
                if pool.len() < cfg.n_test {
                    return Err(capacity_error(data, class, cfg.n_test, pool.len()));
                }
                let mut tp = pool.clone();
                tp.shuffle(&mut rng);
                split.test.extend_from_slice(&tp[..cfg.n_test]);
            }
        }
    }
    split.balanced_train.shuffle(&mut rng);
    Ok(split)
}
