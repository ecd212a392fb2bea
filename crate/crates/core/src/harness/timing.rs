use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::classifier::RlscState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub d: usize,
    pub k: usize,
    pub median_seconds: f64,
    pub samples: usize,
}

const PROBE_CLASSES: usize = 5;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median latency of a single `partial_fit` on a state that has already seen
/// `k` examples, for each `k`. Each sample times one update on a fresh copy
/// of the warmed state, so every sample is taken at exactly `k`.
pub fn timing_probe(d: usize, k_values: &[usize], repeats: usize, seed: u64) -> Result<Vec<LatencyRow>> {
    if d == 0 {
        return Err(HarnessError::Config("dimension must be positive".into()));
    }
    if repeats == 0 {
        return Err(HarnessError::Config("at least one repeat is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let mut order: Vec<usize> = (0..k_values.len()).collect();
    order.sort_by_key(|&i| k_values[i]);

    let mut state = RlscState::new(d, 1.0, 0.0)?;
    let mut seen = 0usize;
    let mut rows = vec![None; k_values.len()];
    for i in order {
        let k = k_values[i];
        while seen < k {
            state.partial_fit(&draw(&mut rng), seen % PROBE_CLASSES)?;
            seen += 1;
        }
        let label = k % PROBE_CLASSES;
        let mut samples = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let x = draw(&mut rng);
            let mut probe = state.clone();
            let start = Instant::now();
            probe.partial_fit(&x, label.min(probe.num_classes()))?;
            samples.push(start.elapsed().as_secs_f64());
        }
        rows[i] = Some(LatencyRow {
            d,
            k,
            median_seconds: median(samples),
            samples: repeats,
        });
    }
    Ok(rows.into_iter().map(|r| r.expect("every k probed")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_follow_input_order() {
        let rows = timing_probe(8, &[50, 0, 10], 5, 1).unwrap();
        assert_eq!(rows.iter().map(|r| r.k).collect::<Vec<_>>(), vec![50, 0, 10]);
        assert!(rows.iter().all(|r| r.median_seconds >= 0.0 && r.samples == 5));
        assert!(timing_probe(0, &[1], 1, 0).is_err());
        assert_eq!(median(vec![3.0, 1.0, 2.0, 10.0]), 2.5);
    }
}
