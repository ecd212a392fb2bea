//! Online selection of `λ` and the recoding exponent `α`.
//!
//! Every `i`-th arrival is held out for validation and never trained on.
//! Candidates are scored only on held-out examples of classes that already
//! have enough training examples. The reference is the best `α = 0` model;
//! the selected candidate is the one with the largest `α` that is at least as
//! accurate as that reference.
//!
//! `α` only enters when the weights are formed, so all candidates sharing a
//! `λ` share one incremental state; each `(λ, α)` pair is materialized on
//! demand.

use std::io::Write;

use log::warn;
use rayon::prelude::*;
use thiserror::Error;

use crate::classifier::{ClassifierError, RlscState, WeightMatrix};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("candidate grid: {0}")]
    InvalidGrid(String),
    #[error("holdout interval must be at least 1")]
    InvalidInterval,
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("trace: {0}")]
    Trace(#[from] csv::Error),
}

pub type Result<T, E = SelectionError> = std::result::Result<T, E>;

pub const DEFAULT_HOLDOUT_INTERVAL: usize = 6;
pub const DEFAULT_WELL_REPRESENTED_THRESHOLD: u64 = 50;
pub const DEFAULT_ALPHAS: [f64; 7] = [0.0, 0.25, 0.5, 0.6, 0.7, 0.9, 1.0];

/// `n` points spaced evenly in log scale over `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGrid {
    lambdas: Vec<f64>,
    alphas: Vec<f64>,
}

impl Default for CandidateGrid {
    /// 12 values of `λ` in `[1e-6, 1e2]` and the default `α` list.
    fn default() -> Self {
        Self::new(log_spaced(1e-6, 1e2, 12), DEFAULT_ALPHAS.to_vec()).expect("default grid is valid")
    }
}

impl CandidateGrid {
    /// Both lists are sorted ascending and deduplicated.
    pub fn new(mut lambdas: Vec<f64>, mut alphas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() || alphas.is_empty() {
            return Err(SelectionError::InvalidGrid("lambda and alpha lists must be non-empty".into()));
        }
        if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(SelectionError::InvalidGrid(format!("lambda {l} is not positive")));
        }
        if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(SelectionError::InvalidGrid(format!("alpha {a} outside [0, 1]")));
        }
        if !alphas.contains(&0.0) {
            return Err(SelectionError::InvalidGrid("alpha list must contain 0".into()));
        }
        lambdas.sort_by(f64::total_cmp);
        lambdas.dedup();
        alphas.sort_by(f64::total_cmp);
        alphas.dedup();
        Ok(Self { lambdas, alphas })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.lambdas.len() * self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A scored `(λ, α)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    pub lambda: f64,
    pub alpha: f64,
    pub accuracy: f64,
}

/// Index of the chosen candidate, or `None` without any `α = 0` entry.
///
/// `λ*` maximizes the `α = 0` accuracy (ties to the smaller `λ`) and sets the
/// bar. Among candidates reaching the bar the largest `α` wins, then the
/// higher accuracy, then the smaller `λ`.
pub fn choose_candidate(scores: &[CandidateScore]) -> Option<usize> {
    let bar = scores
        .iter()
        .filter(|s| s.alpha == 0.0)
        .min_by(|a, b| b.accuracy.total_cmp(&a.accuracy).then(a.lambda.total_cmp(&b.lambda)))?
        .accuracy;
    scores
        .iter()
        .enumerate()
        .filter(|(_, s)| s.accuracy >= bar)
        .min_by(|(_, a), (_, b)| {
            b.alpha
                .total_cmp(&a.alpha)
                .then(b.accuracy.total_cmp(&a.accuracy))
                .then(a.lambda.total_cmp(&b.lambda))
        })
        .map(|(i, _)| i)
}

/// What `observe` did with an example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    Trained,
    HeldOut,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub lambda: f64,
    pub alpha: f64,
    /// Well-represented validation accuracy of the chosen pair.
    pub accuracy: Option<f64>,
    /// `α = 0` accuracy at the chosen `λ`.
    pub reference_accuracy: Option<f64>,
    /// No eligible validation examples: defaulted to the smallest `λ`, `α = 0`.
    pub fallback: bool,
    pub state: RlscState,
}

#[derive(Debug, Clone)]
pub struct SelectionState {
    grid: CandidateGrid,
    holdout_interval: usize,
    threshold: u64,
    /// One state per `λ`, in grid order.
    states: Vec<RlscState>,
    validation: Vec<(Vec<f64>, usize)>,
    arrivals: u64,
}

impl SelectionState {
    pub fn new(dim: usize, grid: CandidateGrid, holdout_interval: usize, threshold: u64) -> Result<Self> {
        if holdout_interval == 0 {
            return Err(SelectionError::InvalidInterval);
        }
        let states = grid
            .lambdas
            .iter()
            .map(|&l| RlscState::new(dim, l, 0.0))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self {
            grid,
            holdout_interval,
            threshold,
            states,
            validation: Vec::new(),
            arrivals: 0,
        })
    }

    pub fn with_defaults(dim: usize) -> Result<Self> {
        Self::new(
            dim,
            CandidateGrid::default(),
            DEFAULT_HOLDOUT_INTERVAL,
            DEFAULT_WELL_REPRESENTED_THRESHOLD,
        )
    }

    pub fn grid(&self) -> &CandidateGrid {
        &self.grid
    }

    pub fn arrivals(&self) -> u64 {
        self.arrivals
    }

    pub fn validation(&self) -> &[(Vec<f64>, usize)] {
        &self.validation
    }

    /// Training counts per class (identical for every candidate).
    pub fn counts(&self) -> &[u64] {
        self.states[0].counts()
    }

    /// Candidate state for `λ` index `li` with `α` set to `alpha`.
    pub fn candidate(&self, li: usize, alpha: f64) -> Result<RlscState> {
        let mut s = self.states[li].clone();
        s.set_alpha(alpha)?;
        Ok(s)
    }

    /// Whether the next `observe` call will hold its example out.
    pub fn next_is_holdout(&self) -> bool {
        (self.arrivals + 1).is_multiple_of(self.holdout_interval as u64)
    }

    /// Holds out every `holdout_interval`-th arrival, trains all candidates on the rest.
    ///
    /// Inputs are validated against the shared state before anything changes.
    pub fn observe(&mut self, x: &[f64], label: usize) -> Result<Observation> {
        if x.len() != self.states[0].dim() {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.states[0].dim(),
                found: x.len(),
            }
            .into());
        }
        if self.next_is_holdout() {
            self.arrivals += 1;
            self.validation.push((x.to_vec(), label));
            return Ok(Observation::HeldOut);
        }
        // Every candidate has identical counts, so the first one decides
        // whether the label is acceptable.
        self.states[0].partial_fit(x, label)?;
        self.states[1..]
            .par_iter_mut()
            .try_for_each(|s| s.partial_fit(x, label))?;
        self.arrivals += 1;
        Ok(Observation::Trained)
    }

    fn eligible(&self) -> Vec<&(Vec<f64>, usize)> {
        let counts = self.counts();
        self.validation
            .iter()
            .filter(|(_, y)| counts.get(*y).is_some_and(|&c| c >= self.threshold))
            .collect()
    }

    fn accuracy_of(weights: &WeightMatrix, eligible: &[&(Vec<f64>, usize)]) -> Result<Option<f64>> {
        if eligible.is_empty() {
            return Ok(None);
        }
        let mut correct = 0usize;
        for (x, y) in eligible {
            if weights.predict(x)? == *y {
                correct += 1;
            }
        }
        Ok(Some(correct as f64 / eligible.len() as f64))
    }

    /// Accuracy on held-out examples whose class has at least `threshold`
    /// training examples; `None` when there are no such examples.
    pub fn well_represented_accuracy(&self, li: usize, alpha: f64) -> Result<Option<f64>> {
        let eligible = self.eligible();
        if eligible.is_empty() || self.states[li].num_classes() == 0 {
            return Ok(None);
        }
        Self::accuracy_of(&self.states[li].weights_with_alpha(alpha)?, &eligible)
    }

    /// Scores of every pair in `(λ, α)` row-major order; `None` when nothing is eligible.
    pub fn scores(&self) -> Result<Option<Vec<CandidateScore>>> {
        let eligible = self.eligible();
        if eligible.is_empty() || self.states[0].num_classes() == 0 {
            return Ok(None);
        }
        let per_lambda = self
            .states
            .par_iter()
            .map(|s| {
                self.grid
                    .alphas
                    .iter()
                    .map(|&a| {
                        let acc = Self::accuracy_of(&s.weights_with_alpha(a)?, &eligible)?;
                        Ok(CandidateScore {
                            lambda: s.lambda(),
                            alpha: a,
                            accuracy: acc.expect("eligible set is non-empty"),
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(per_lambda.into_iter().flatten().collect()))
    }

    pub fn select(&self) -> Result<Selection> {
        let Some(scores) = self.scores()? else {
            warn!("no eligible validation examples; using smallest lambda with alpha = 0");
            return Ok(Selection {
                lambda: self.grid.lambdas[0],
                alpha: 0.0,
                accuracy: None,
                reference_accuracy: None,
                fallback: true,
                state: self.candidate(0, 0.0)?,
            });
        };
        let best = scores[choose_candidate(&scores).expect("grid contains alpha = 0")];
        let li = self
            .grid
            .lambdas
            .iter()
            .position(|&l| l == best.lambda)
            .expect("score lambdas come from the grid");
        let reference = scores
            .iter()
            .find(|s| s.lambda == best.lambda && s.alpha == 0.0)
            .map(|s| s.accuracy);
        Ok(Selection {
            lambda: best.lambda,
            alpha: best.alpha,
            accuracy: Some(best.accuracy),
            reference_accuracy: reference,
            fallback: false,
            state: self.candidate(li, best.alpha)?,
        })
    }

    /// Appends one row per candidate: `iteration,lambda,alpha,accuracy`
    /// (accuracy left empty when nothing is eligible).
    pub fn write_trace<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        match self.scores()? {
            Some(scores) => {
                for s in scores {
                    w.write_record([
                        self.arrivals.to_string(),
                        s.lambda.to_string(),
                        s.alpha.to_string(),
                        s.accuracy.to_string(),
                    ])?;
                }
            }
            None => {
                for &l in &self.grid.lambdas {
                    for &a in &self.grid.alphas {
                        w.write_record([self.arrivals.to_string(), l.to_string(), a.to_string(), String::new()])?;
                    }
                }
            }
        }
        Ok(())
    }
}

pub const TRACE_HEADER: [&str; 4] = ["iteration", "lambda", "alpha", "accuracy"];

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn score(lambda: f64, alpha: f64, accuracy: f64) -> CandidateScore {
        CandidateScore { lambda, alpha, accuracy }
    }

    fn pick(accs: [f64; 3]) -> f64 {
        let s: Vec<_> = [0.0, 0.5, 1.0].iter().zip(accs).map(|(&a, acc)| score(1.0, a, acc)).collect();
        s[choose_candidate(&s).unwrap()].alpha
    }

    #[test]
    fn heuristic_cases() {
        assert_eq!(pick([0.9, 0.9, 0.8]), 0.5);
        assert_eq!(pick([0.9, 0.91, 0.92]), 1.0);
        assert_eq!(pick([0.9, 0.89, 0.85]), 0.0);
        assert_eq!(choose_candidate(&[score(1.0, 0.5, 1.0)]), None);
    }

    #[test]
    fn cross_lambda_rule() {
        let s = vec![
            score(0.1, 0.0, 0.80),
            score(0.1, 1.0, 0.85),
            score(1.0, 0.0, 0.90),
            score(1.0, 0.5, 0.90),
            score(1.0, 1.0, 0.70),
            score(10.0, 0.0, 0.90),
            score(10.0, 0.5, 0.95),
        ];
        // bar 0.90 from lambda 1 (smaller of the tied references); alpha 1 at
        // lambda 0.1 misses it, alpha 0.5 at lambda 10 wins on accuracy
        assert_eq!(choose_candidate(&s), Some(6));
    }

    #[test]
    fn grid_validation() {
        assert!(CandidateGrid::new(vec![], vec![0.0]).is_err());
        assert!(CandidateGrid::new(vec![1.0], vec![0.5]).is_err());
        assert!(CandidateGrid::new(vec![-1.0], vec![0.0]).is_err());
        assert!(CandidateGrid::new(vec![1.0], vec![0.0, 1.5]).is_err());
        let g = CandidateGrid::new(vec![1.0, 0.1, 1.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(g.lambdas(), &[0.1, 1.0]);
        assert_eq!(g.alphas(), &[0.0, 1.0]);
        let d = CandidateGrid::default();
        assert_eq!(d.lambdas().len(), 12);
        assert!((d.lambdas()[0] - 1e-6).abs() < 1e-18 && (d.lambdas()[11] - 1e2).abs() < 1e-10);
        assert_eq!(d.alphas(), &DEFAULT_ALPHAS);
    }

    /// Two well-separated blobs plus a third rarely seen one.
    fn stream(n: usize, seed: u64) -> Vec<(Vec<f64>, usize)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centres = [[2.0, 0.0], [-2.0, 0.0], [0.0, 2.0]];
        (0..n)
            .map(|i| {
                let y = if i < 2 { i } else if rng.random::<f64>() < 0.08 { 2 } else { rng.random_range(0..2) };
                let x = vec![
                    centres[y][0] + rng.random_range(-1.5..1.5),
                    centres[y][1] + rng.random_range(-1.5..1.5),
                    1.0,
                ];
                (x, y)
            })
            .collect()
    }

    fn small_grid() -> CandidateGrid {
        CandidateGrid::new(vec![1e-3, 1.0, 10.0], vec![0.0, 0.5, 1.0]).unwrap()
    }

    #[test]
    fn holdout_counting() {
        let mut s = SelectionState::new(3, small_grid(), 6, 1).unwrap();
        let mut held = Vec::new();
        for (i, (x, y)) in stream(12, 1).into_iter().enumerate() {
            let predicted = s.next_is_holdout();
            let obs = s.observe(&x, y).unwrap();
            assert_eq!(predicted, obs == Observation::HeldOut);
            if obs == Observation::HeldOut {
                held.push(i + 1);
            }
        }
        assert_eq!(held, vec![6, 12]);
        assert_eq!(s.validation().len(), 2);
        assert_eq!(s.counts().iter().sum::<u64>(), 10);
    }

    #[test]
    fn interval_one_holds_everything_out() {
        let mut s = SelectionState::new(3, small_grid(), 1, 0).unwrap();
        for (x, y) in stream(10, 2) {
            assert_eq!(s.observe(&x, y).unwrap(), Observation::HeldOut);
        }
        assert!(s.counts().is_empty());
        let sel = s.select().unwrap();
        assert!(sel.fallback);
        assert_eq!((sel.lambda, sel.alpha), (1e-3, 0.0));
        assert!(SelectionState::new(3, small_grid(), 0, 0).is_err());
    }

    #[test]
    fn candidates_match_replay_without_holdout() {
        let data = stream(100, 3);
        let mut s = SelectionState::new(3, small_grid(), 6, 5).unwrap();
        for (x, y) in &data {
            s.observe(x, *y).unwrap();
        }
        for (li, &l) in small_grid().lambdas().iter().enumerate() {
            let mut replay = RlscState::new(3, l, 0.5).unwrap();
            for (i, (x, y)) in data.iter().enumerate() {
                if (i + 1) % 6 != 0 {
                    replay.partial_fit(x, *y).unwrap();
                }
            }
            let c = s.candidate(li, 0.5).unwrap();
            assert_eq!(c.counts(), replay.counts());
            assert_eq!(c.cross(), replay.cross());
            assert_eq!(c.factor(), replay.factor());
            assert_eq!(c.weights().unwrap(), replay.weights().unwrap());
        }
    }

    #[test]
    fn well_represented_filtering() {
        // two classes trained, threshold lets only class 0 through
        let mut s = SelectionState::new(2, CandidateGrid::new(vec![1e-6], vec![0.0]).unwrap(), 1000, 3).unwrap();
        for _ in 0..3 {
            s.observe(&[1.0, 0.0], 0).unwrap();
        }
        s.observe(&[0.0, 1.0], 1).unwrap();
        // hand-built buffer: 6 of class 0 (4 predicted right), 4 of class 1
        s.validation = vec![
            (vec![1.0, 0.0], 0),
            (vec![1.0, 0.1], 0),
            (vec![2.0, 0.0], 0),
            (vec![1.0, -0.2], 0),
            (vec![0.0, 1.0], 0),
            (vec![0.1, 2.0], 0),
            (vec![1.0, 0.0], 1),
            (vec![1.0, 0.0], 1),
            (vec![1.0, 0.0], 1),
            (vec![1.0, 0.0], 1),
        ];
        let acc = s.well_represented_accuracy(0, 0.0).unwrap().unwrap();
        assert!((acc - 4.0 / 6.0).abs() < 1e-15);

        s.threshold = 10;
        assert_eq!(s.well_represented_accuracy(0, 0.0).unwrap(), None);

        s.threshold = 1;
        s.validation = vec![(vec![1.0, 0.0], 0), (vec![0.0, 1.0], 1)];
        assert_eq!(s.well_represented_accuracy(0, 0.0).unwrap(), Some(1.0));
    }

    #[test]
    fn trace_rows() {
        let mut s = SelectionState::new(3, small_grid(), 6, 1).unwrap();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TRACE_HEADER).unwrap();
        s.write_trace(&mut w).unwrap();
        for (x, y) in stream(30, 4) {
            s.observe(&x, y).unwrap();
        }
        s.write_trace(&mut w).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * 9);
        assert_eq!(lines[1], "0,0.001,0,");
        assert!(lines[10].starts_with("30,0.001,0,"));
    }

    #[test]
    fn dimension_errors_leave_state_alone() {
        let mut s = SelectionState::new(3, small_grid(), 6, 1).unwrap();
        assert!(s.observe(&[1.0], 0).is_err());
        assert!(s.observe(&[1.0, 0.0, 1.0], 1).is_err());
        assert_eq!(s.arrivals(), 0);
        assert!(s.counts().is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn never_worse_than_reference(seed in any::<u64>()) {
            let data = stream(240, seed);
            let mut s = SelectionState::new(3, small_grid(), 6, 10).unwrap();
            for (x, y) in &data {
                s.observe(x, *y).unwrap();
            }
            let sel = s.select().unwrap();
            if !sel.fallback {
                prop_assert!(sel.accuracy.unwrap() >= sel.reference_accuracy.unwrap());
            }
        }
    }
}
