use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::trial::TrialResult;
use super::{CheckpointAccuracy, HarnessError, Method, Result};

/// Mean and sample standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// `0.855, 0.003` becomes `"85.5 ± 0.3"`.
pub fn format_pct(mean: f64, std: f64) -> String {
    format!("{:.1} ± {:.1}", 100.0 * mean, 100.0 * std)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub std: f64,
}

impl MetricStats {
    fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub method: Method,
    pub checkpoint: usize,
    pub n_trials: usize,
    pub total: MetricStats,
    pub imbalanced: MetricStats,
    pub balanced: MetricStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub methods: Vec<Method>,
    pub checkpoints: Vec<usize>,
    pub cells: Vec<CellStats>,
    #[serde(skip)]
    pub records: Vec<CheckpointAccuracy>,
    /// Mean over trials of the per-trial mean update latency.
    #[serde(skip)]
    pub seconds_per_update: Option<f64>,
}

/// Per-(method, checkpoint) statistics over all trials.
pub fn aggregate(trials: &[TrialResult]) -> ExperimentResult {
    let records: Vec<CheckpointAccuracy> = trials.iter().flat_map(|t| t.records.iter().cloned()).collect();
    let mut methods = Vec::new();
    let mut groups: BTreeMap<(usize, Method), Vec<&CheckpointAccuracy>> = BTreeMap::new();
    for r in &records {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
        groups.entry((r.checkpoint, r.method)).or_default().push(r);
    }
    let mut checkpoints: Vec<usize> = groups.keys().map(|k| k.0).collect();
    checkpoints.dedup();
    let mut cells = Vec::new();
    for &c in &checkpoints {
        for &m in &methods {
            if let Some(rs) = groups.get(&(c, m)) {
                let pick = |f: fn(&CheckpointAccuracy) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
                cells.push(CellStats {
                    method: m,
                    checkpoint: c,
                    n_trials: rs.len(),
                    total: MetricStats::of(&pick(|r| r.total)),
                    imbalanced: MetricStats::of(&pick(|r| r.imbalanced)),
                    balanced: MetricStats::of(&pick(|r| r.balanced)),
                });
            }
        }
    }
    let latencies: Vec<f64> = trials.iter().filter_map(|t| t.seconds_per_update).collect();
    ExperimentResult {
        methods,
        checkpoints,
        cells,
        records,
        seconds_per_update: (!latencies.is_empty()).then(|| mean_std(&latencies).0),
    }
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Output(e.to_string())
}

impl ExperimentResult {
    pub fn cell(&self, method: Method, checkpoint: usize) -> Option<&CellStats> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.checkpoint == checkpoint)
    }

    /// `method,checkpoint,trial,total_acc,imb_acc,bal_acc`, one row per record.
    pub fn write_results_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "checkpoint", "trial", "total_acc", "imb_acc", "bal_acc"])
            .map_err(csv_err)?;
        for r in &self.records {
            w.write_record([
                r.method.to_string(),
                r.checkpoint.to_string(),
                r.trial.to_string(),
                r.total.to_string(),
                r.imbalanced.to_string(),
                r.balanced.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| HarnessError::Output(e.to_string()))
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// Appends curve rows `group,method,checkpoint,...` for one class group.
    pub fn write_curve_rows<W: Write>(&self, group: &str, w: &mut csv::Writer<W>) -> Result<()> {
        for c in &self.cells {
            w.write_record([
                group.to_string(),
                c.method.to_string(),
                c.checkpoint.to_string(),
                c.total.mean.to_string(),
                c.total.std.to_string(),
                c.imbalanced.mean.to_string(),
                c.imbalanced.std.to_string(),
                c.balanced.mean.to_string(),
                c.balanced.std.to_string(),
            ])
            .map_err(csv_err)?;
        }
        Ok(())
    }

    /// Text table: one row per checkpoint, total and imbalanced accuracy
    /// (percent, mean ± std) per method.
    pub fn table(&self) -> String {
        let mut header = vec!["n_imb".to_string()];
        for m in &self.methods {
            header.push(format!("{m} total"));
            header.push(format!("{m} imb"));
        }
        let mut rows = vec![header];
        for &c in &self.checkpoints {
            let mut row = vec![c.to_string()];
            for &m in &self.methods {
                match self.cell(m, c) {
                    Some(s) => {
                        row.push(format_pct(s.total.mean, s.total.std));
                        row.push(format_pct(s.imbalanced.mean, s.imbalanced.std));
                    }
                    None => row.extend(["-".to_string(), "-".to_string()]),
                }
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in rows {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .map(|(s, &w)| format!("{s:>w$}"))
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

pub const CURVE_HEADER: [&str; 9] = [
    "group",
    "method",
    "checkpoint",
    "total_mean",
    "total_std",
    "imb_mean",
    "imb_std",
    "bal_mean",
    "bal_std",
];
