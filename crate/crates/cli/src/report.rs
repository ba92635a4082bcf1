//! Experiment report structure, aggregation, and CSV emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// One Monte-Carlo measurement.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Row {
    pub estimator: String,
    pub kernel: String,
    pub case: String,
    pub n: usize,
    pub m: usize,
    pub rep: usize,
    pub rep_seed: u64,
    pub lambda: f64,
    pub mse: f64,
    /// Seconds spent producing this row.
    pub wall_time: f64,
}

/// Mean and standard error of `mse` over reps for one curve point.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Aggregate {
    pub estimator: String,
    pub kernel: String,
    pub n: usize,
    pub m: usize,
    pub mean: f64,
    pub stderr: f64,
    pub reps: usize,
}

/// A full experiment run: raw rows, recomputable aggregates, the exact
/// configuration, and free-form recorded observations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment_id: String,
    pub rows: Vec<Row>,
    pub aggregates: Vec<Aggregate>,
    pub config_snapshot: serde_json::Value,
    /// Descriptive measurements (rate exponents, gaps) that are recorded
    /// but not asserted.
    pub notes: Vec<String>,
}

/// Computes per-(estimator, kernel, n, m) means and standard errors.
pub fn aggregate(rows: &[Row]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(String, String, usize, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.estimator.clone(), r.kernel.clone(), r.n, r.m))
            .or_default()
            .push(r.mse);
    }
    groups
        .into_iter()
        .map(|((estimator, kernel, n, m), vals)| {
            let k = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / k;
            let var = if vals.len() > 1 {
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            Aggregate {
                estimator,
                kernel,
                n,
                m,
                mean,
                stderr: (var / k).sqrt(),
                reps: vals.len(),
            }
        })
        .collect()
}

impl ExperimentReport {
    pub fn new(experiment_id: &str, rows: Vec<Row>, config_snapshot: serde_json::Value) -> Self {
        let aggregates = aggregate(&rows);
        Self {
            experiment_id: experiment_id.to_string(),
            rows,
            aggregates,
            config_snapshot,
            notes: Vec::new(),
        }
    }

    /// Looks up the aggregate for one curve point.
    pub fn aggregate_for(&self, estimator: &str, kernel: &str, n: usize, m: usize) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.estimator == estimator && a.kernel == kernel && a.n == n && a.m == m)
    }

    /// The comparison CSV schema shared by the estimator experiments.
    pub fn to_comparison_csv(&self) -> String {
        let mut s = String::from("estimator,kernel,case,n,m,rep,lambda,mse\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.estimator, r.kernel, r.case, r.n, r.m, r.rep, r.lambda, r.mse
            );
        }
        s
    }

    /// The PCA-rate CSV schema `(n, rep, excess_error)`; `mse` holds the
    /// excess reconstruction error for those rows.
    pub fn to_pca_rate_csv(&self) -> String {
        let mut s = String::from("n,rep,excess_error\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.n, r.rep, r.mse);
        }
        s
    }

    /// Writes CSV + JSON snapshot into a directory, creating it if needed.
    pub fn write_to(&self, dir: &Path, csv: &str) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("rows.csv"), csv)?;
        let full = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(dir.join("report.json"), full)?;
        let snapshot = serde_json::to_string_pretty(&self.config_snapshot).expect("snapshot");
        std::fs::write(dir.join("config.json"), snapshot)?;
        Ok(())
    }
}

/// Spectra CSV schema `(index, eigenvalue)`.
pub fn spectra_csv(eigenvalues: &[f64]) -> String {
    let mut s = String::from("index,eigenvalue\n");
    for (i, v) in eigenvalues.iter().enumerate() {
        let _ = writeln!(s, "{},{}", i + 1, v);
    }
    s
}

/// Least-squares slope of `log y` against `log x`, used for empirical
/// rate exponents. Points with non-positive coordinates are skipped.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logged: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logged.len() < 2 {
        return None;
    }
    let k = logged.len() as f64;
    let mx = logged.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logged.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logged.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logged.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(sxy / sxx)
}
