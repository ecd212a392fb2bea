use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{aggregate, ExperimentResult};
use super::{accuracy, CheckpointAccuracy, ClassFilter, HarnessError, Method, Result};
use crate::classifier::{ClassGramAccumulator, RlscState, WeightMatrix};
use crate::datasets::{build_protocol, ArrivalEncoder, LabeledDataset, ProtocolSplit, StreamProtocol};
use crate::model_selection::{choose_candidate, CandidateGrid, CandidateScore};

/// Hyperparameters for a run. A single `λ` is used as is; several are
/// compared on the balanced validation set after the balanced phase. A
/// single `α` is used as is; several (including 0) are re-chosen at every
/// checkpoint with the largest-`α` rule on the same validation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl Hyper {
    pub fn fixed(lambda: f64, alpha: f64) -> Self {
        Self {
            lambdas: vec![lambda],
            alphas: vec![alpha],
        }
    }

    pub fn grid(grid: &CandidateGrid) -> Self {
        Self {
            lambdas: grid.lambdas().to_vec(),
            alphas: grid.alphas().to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.lambdas.is_empty() || self.alphas.is_empty() {
            return bad("at least one lambda and one alpha are required".into());
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return bad(format!("lambda must be positive, got {l}"));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return bad(format!("alpha must lie in [0, 1], got {a}"));
        }
        if self.alphas.len() > 1 && !self.alphas.contains(&0.0) {
            return bad("an alpha grid must contain 0".into());
        }
        Ok(())
    }
}

/// Everything one trial produced. `seconds_per_update` is wall-clock and is
/// left out of serialized manifests so they stay reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub imbalanced_class: String,
    pub lambda: f64,
    pub split: ProtocolSplit,
    pub records: Vec<CheckpointAccuracy>,
    #[serde(skip)]
    pub seconds_per_update: Option<f64>,
}

/// Features and labels of `indices` as a dense block.
struct Block {
    x: LabeledDataset,
}

impl Block {
    fn new(data: &LabeledDataset, indices: &[usize]) -> Self {
        Self { x: data.subset(indices) }
    }

    /// Dataset-label predictions of a model whose classes are arrival-encoded.
    fn predict(&self, w: &WeightMatrix, enc: &ArrivalEncoder) -> Result<Vec<usize>> {
        (0..self.x.len())
            .map(|i| {
                let m = w.predict(self.x.row(i))?;
                Ok(enc.decode(m).expect("model classes come from the encoder"))
            })
            .collect()
    }

    fn truths(&self) -> &[usize] {
        self.x.labels()
    }
}

fn pick_lambda(hyper: &Hyper, gram: &ClassGramAccumulator, val: &Block, enc: &ArrivalEncoder) -> Result<f64> {
    if hyper.lambdas.len() == 1 {
        return Ok(hyper.lambdas[0]);
    }
    let mut best = (f64::NEG_INFINITY, hyper.lambdas[0]);
    let mut lambdas = hyper.lambdas.clone();
    lambdas.sort_by(f64::total_cmp);
    for l in lambdas {
        let w = gram.solve_naive(l)?;
        let acc = accuracy(&val.predict(&w, enc)?, val.truths(), ClassFilter::All).unwrap_or(0.0);
        if acc > best.0 {
            best = (acc, l);
        }
    }
    Ok(best.1)
}

fn pick_alpha(hyper: &Hyper, state: &RlscState, val: &Block, enc: &ArrivalEncoder) -> Result<f64> {
    if hyper.alphas.len() == 1 {
        return Ok(hyper.alphas[0]);
    }
    let scores = hyper
        .alphas
        .iter()
        .map(|&a| {
            let w = state.weights_with_alpha(a)?;
            Ok(CandidateScore {
                lambda: state.lambda(),
                alpha: a,
                accuracy: accuracy(&val.predict(&w, enc)?, val.truths(), ClassFilter::All).unwrap_or(0.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(scores[choose_candidate(&scores).expect("validated grid contains 0")].alpha)
}

/// Runs one trial: balanced phase, then the imbalanced stream, evaluating
/// every method on the full test set at each checkpoint.
///
/// Test indices refer to `test_pool` when given, otherwise to `train`.
pub fn run_trial(
    train: &LabeledDataset,
    test_pool: Option<&LabeledDataset>,
    cfg: &StreamProtocol,
    trial: usize,
    methods: &[Method],
    hyper: &Hyper,
) -> Result<TrialResult> {
    hyper.validate()?;
    if methods.is_empty() {
        return Err(HarnessError::Config("no methods selected".into()));
    }
    let seed = cfg.trial_seed(trial);
    let split = build_protocol(train, cfg, seed, test_pool)?;
    let imb = cfg.imbalanced_class;
    let test = Block::new(test_pool.unwrap_or(train), &split.test);
    let val = Block::new(train, &split.balanced_val);

    // Model class indices follow first arrival: balanced classes in
    // presentation order, then the imbalanced class.
    let mut enc = ArrivalEncoder::new();
    let bal_labels: Vec<usize> = split
        .balanced_train
        .iter()
        .map(|&i| enc.encode(train.labels()[i]))
        .collect();
    let imb_model = enc.encode(imb);

    let d = train.dim();
    let mut gram = ClassGramAccumulator::new(d);
    for (&i, &y) in split.balanced_train.iter().zip(&bal_labels) {
        gram.add(train.row(i), y)?;
    }
    let lambda = pick_lambda(hyper, &gram, &val, &enc)?;

    let incremental = methods.iter().any(|m| matches!(m, Method::N | Method::RC));
    let mut state = RlscState::new(d, lambda, 0.0)?;
    let mut updates = 0usize;
    let mut update_time = 0.0;
    if incremental {
        let start = Instant::now();
        for (&i, &y) in split.balanced_train.iter().zip(&bal_labels) {
            state.partial_fit(train.row(i), y)?;
        }
        update_time += start.elapsed().as_secs_f64();
        updates += bal_labels.len();
    }

    let mut records = Vec::new();
    let mut next = 0;
    for (j, &i) in split.imbalanced_stream.iter().enumerate() {
        let x = train.row(i);
        if incremental {
            let start = Instant::now();
            state.partial_fit(x, imb_model)?;
            update_time += start.elapsed().as_secs_f64();
            updates += 1;
        }
        gram.add(x, imb_model)?;
        let n_imb = j + 1;
        if cfg.checkpoints.get(next) != Some(&n_imb) {
            continue;
        }
        next += 1;
        for &method in methods {
            let (w, alpha) = match method {
                Method::N => (state.weights_with_alpha(0.0), 0.0),
                Method::RC => {
                    let a = pick_alpha(hyper, &state, &val, &enc)?;
                    (state.weights_with_alpha(a), a)
                }
                Method::RB => (gram.solve_rebalanced(lambda), 0.0),
            };
            let w = w.map_err(|source| HarnessError::Checkpoint {
                method,
                checkpoint: n_imb,
                source,
            })?;
            let pred = test.predict(&w, &enc)?;
            let truth = test.truths();
            records.push(CheckpointAccuracy {
                method,
                checkpoint: n_imb,
                trial,
                total: accuracy(&pred, truth, ClassFilter::All).expect("test set is non-empty"),
                imbalanced: accuracy(&pred, truth, ClassFilter::Only(imb)).expect("n_test > 0"),
                balanced: accuracy(&pred, truth, ClassFilter::Except(imb)).expect("T >= 2"),
                lambda,
                alpha,
            });
        }
    }

    Ok(TrialResult {
        trial,
        seed,
        imbalanced_class: train.label_names()[imb].clone(),
        lambda,
        split,
        records,
        seconds_per_update: (updates > 0).then(|| update_time / updates as f64),
    })
}

/// Runs `cfg.n_trials` trials, on up to `parallel` threads. Results come
/// back in trial order regardless of scheduling.
pub fn run_trials(
    train: &LabeledDataset,
    test_pool: Option<&LabeledDataset>,
    cfg: &StreamProtocol,
    methods: &[Method],
    hyper: &Hyper,
    parallel: usize,
) -> Result<Vec<TrialResult>> {
    let one = |t| run_trial(train, test_pool, cfg, t, methods, hyper);
    if parallel <= 1 {
        return (0..cfg.n_trials).map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    pool.install(|| (0..cfg.n_trials).into_par_iter().map(one).collect())
}

#[derive(Debug, Clone)]
pub struct RotationResult {
    /// `(class name, result with that class under-represented)`.
    pub per_class: Vec<(String, ExperimentResult)>,
    /// Every trial of every class pooled.
    pub averaged: ExperimentResult,
    pub trials: Vec<TrialResult>,
}

/// Makes each class in turn the under-represented one and pools the
/// results. Trial numbers are made unique across classes.
pub fn rotate_imbalanced(
    train: &LabeledDataset,
    test_pool: Option<&LabeledDataset>,
    cfg: &StreamProtocol,
    methods: &[Method],
    hyper: &Hyper,
    parallel: usize,
) -> Result<RotationResult> {
    let mut per_class = Vec::new();
    let mut all = Vec::new();
    for class in 0..train.num_classes() {
        let c = StreamProtocol {
            imbalanced_class: class,
            ..cfg.clone()
        };
        let mut trials = run_trials(train, test_pool, &c, methods, hyper, parallel)?;
        for t in &mut trials {
            t.trial += class * cfg.n_trials;
            for r in &mut t.records {
                r.trial = t.trial;
            }
        }
        per_class.push((train.label_names()[class].clone(), aggregate(&trials)));
        all.extend(trials);
    }
    Ok(RotationResult {
        per_class,
        averaged: aggregate(&all),
        trials: all,
    })
}
