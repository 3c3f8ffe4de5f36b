//! K-fold cross-validation over target dimension, bandwidth and ridge.
//!
//! Each grid cell is scored by the mean held-out response-space error of the
//! intrinsic predictor. The bandwidth of cell `b` on a fold is `2^b σ₀`, with
//! `σ₀` the median heuristic of that fold's training rows.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{self, Num};
use crate::kernels::{median_heuristic, KernelSpec};
use crate::optimizer::{fit_ckdr_real, FitConfig, Sigma};
use crate::predictor::{fit_dual, Responses};
use crate::rng;

/// Version tag of the serialized report.
pub const REPORT_VERSION: u64 = 1;

/// Relative width of the score band treated as a tie.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub m_values: Vec<usize>,
    pub b_values: Vec<f64>,
    pub epsilon_values: Vec<f64>,
}

impl Grid {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.m_values.is_empty() || self.b_values.is_empty() || self.epsilon_values.is_empty() {
            return Err(Error::InvalidConfig("every grid axis needs at least one value".into()));
        }
        if let Some(&m) = self.m_values.iter().find(|&&m| m < 1 || m > d) {
            return Err(Error::InvalidConfig(format!("grid dimension m = {m} must lie in 1..={d}")));
        }
        if self.b_values.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidConfig("bandwidth exponents must be finite".into()));
        }
        if self.epsilon_values.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidConfig("ridge values must be positive".into()));
        }
        Ok(())
    }

    /// Cells in `m`-major, then `b`, then `ε` order.
    pub fn cells(&self) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for &m in &self.m_values {
            for &b in &self.b_values {
                for &e in &self.epsilon_values {
                    out.push((m, b, e));
                }
            }
        }
        out
    }
}

/// Fold label of each of `n` items: a random permutation dealt round-robin
/// into `k` folds.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || n < k {
        return Err(Error::TooFewSamples(format!("{k}-fold split of {n} items")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, rng::domain::FOLDS, 0));
    let mut labels = vec![0; n];
    for (pos, &item) in perm.iter().enumerate() {
        labels[item] = pos % k;
    }
    Ok(labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvCell {
    pub m: usize,
    pub b: f64,
    pub epsilon: f64,
    /// Mean held-out error per fold; `None` where the fit failed.
    pub fold_errors: Vec<Option<f64>>,
    /// Mean of the fold entries; `None` if any fold failed.
    pub mean: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvChoice {
    pub m: usize,
    pub b: f64,
    pub epsilon: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: usize,
    pub seed: u64,
    pub fold_assignment: Vec<usize>,
    /// `σ₀` of each fold's training rows.
    pub sigma0: Vec<f64>,
    pub table: Vec<CvCell>,
    pub best: CvChoice,
}

fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

fn fold_score(
    x: &DMatrix<f64>,
    y: &[f64],
    train: &[usize],
    test: &[usize],
    cfg: &FitConfig,
) -> Result<f64> {
    let x_train = rows(x, train);
    let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let fit = fit_ckdr_real(&x_train, &y_train, cfg)?;
    let model = fit_dual(&fit.p_hat, &x_train, Responses::Real(y_train), KernelSpec::gaussian(fit.sigma)?, fit.epsilon)?;
    let mut total = 0.0;
    let mut row = vec![0.0; x.ncols()];
    for &i in test {
        for (j, r) in row.iter_mut().enumerate() {
            *r = x[(i, j)];
        }
        total += model.out_of_sample_error(&row, y[i])?;
    }
    Ok(total / test.len() as f64)
}

/// Scores every grid cell by `k`-fold cross-validation and selects the
/// lowest mean error, breaking ties toward smaller `m`, then smaller `σ`,
/// then larger `ε`.
pub fn cross_validate(
    x: &DMatrix<f64>,
    y: &[f64],
    grid: &Grid,
    k: usize,
    fit_config: &FitConfig,
    seed: u64,
) -> Result<CvReport> {
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    grid.validate(d)?;
    let labels = kfold_split(n, k, seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..k)
        .map(|f| ((0..n).filter(|&i| labels[i] != f).collect(), (0..n).filter(|&i| labels[i] == f).collect()))
        .collect();
    let sigma0 = splits
        .iter()
        .map(|(train, _)| median_heuristic(&rows(x, train)))
        .collect::<Result<Vec<f64>>>()?;

    let cells = grid.cells();
    let tasks: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..k).map(move |f| (c, f))).collect();
    let scores: Vec<Result<f64>> = tasks
        .par_iter()
        .map(|&(c, f)| {
            let (m, b, epsilon) = cells[c];
            let cfg = FitConfig {
                m,
                sigma: Sigma::Fixed(2f64.powf(b) * sigma0[f]),
                epsilon,
                seed,
                ..fit_config.clone()
            };
            fold_score(x, y, &splits[f].0, &splits[f].1, &cfg)
        })
        .collect();

    let table: Vec<CvCell> = cells
        .iter()
        .enumerate()
        .map(|(c, &(m, b, epsilon))| {
            let entries = &scores[c * k..(c + 1) * k];
            let fold_errors: Vec<Option<f64>> = entries.iter().map(|r| r.as_ref().ok().copied()).collect();
            let failure = entries.iter().find_map(|r| r.as_ref().err().map(|e| format!("{}: {e}", e.code())));
            let mean = if failure.is_none() {
                Some(fold_errors.iter().map(|e| e.expect("no failure")).sum::<f64>() / k as f64)
            } else {
                None
            };
            CvCell { m, b, epsilon, fold_errors, mean, failure }
        })
        .collect();

    let best = select(&table, y)?;
    Ok(CvReport { folds: k, seed, fold_assignment: labels, sigma0, table, best })
}

fn select(table: &[CvCell], y: &[f64]) -> Result<CvChoice> {
    let scored: Vec<(&CvCell, f64)> = table.iter().filter_map(|c| c.mean.map(|m| (c, m))).collect();
    let lowest = scored
        .iter()
        .map(|&(_, s)| s)
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::SolveFailure("every grid cell failed".into()))?;
    let scale = y.iter().map(|v| v * v).fold(0.0, f64::max);
    let band = lowest + TIE_TOL * scale.max(lowest.abs());
    let (cell, mean) = scored
        .into_iter()
        .filter(|&(_, s)| s <= band)
        .min_by(|(a, _), (b, _)| a.m.cmp(&b.m).then(a.b.total_cmp(&b.b)).then(b.epsilon.total_cmp(&a.epsilon)))
        .expect("lowest cell is in the band");
    Ok(CvChoice { m: cell.m, b: cell.b, epsilon: cell.epsilon, mean })
}

impl CvReport {
    /// Aligned text table; the selected cell is marked with `*`.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:>3} {:>6} {:>10} {:>14}", "m", "b", "epsilon", "mean");
        for f in 0..self.folds {
            let _ = write!(out, " {:>14}", format!("fold{}", f + 1));
        }
        out.push('\n');
        for cell in &self.table {
            let chosen = cell.m == self.best.m && cell.b == self.best.b && cell.epsilon == self.best.epsilon;
            let mean = cell.mean.map_or("failed".to_string(), |v| format!("{v:.6e}"));
            let _ = write!(out, "{:>3} {:>6} {:>10} {:>14}", cell.m, format!("{:.2}", cell.b), format!("{:e}", cell.epsilon), mean);
            for e in &cell.fold_errors {
                let _ = write!(out, " {:>14}", e.map_or("failed".to_string(), |v| format!("{v:.6e}")));
            }
            if chosen {
                out.push_str(" *");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ReportDoc {
            version: REPORT_VERSION,
            folds: self.folds,
            seed: self.seed,
            fold_assignment: self.fold_assignment.clone(),
            sigma0: json::nums(&self.sigma0),
            table: self
                .table
                .iter()
                .map(|c| CellDoc {
                    m: c.m,
                    b: Num(c.b),
                    epsilon: Num(c.epsilon),
                    fold_errors: c.fold_errors.iter().map(|e| e.map(Num)).collect(),
                    mean: c.mean.map(Num),
                    failure: c.failure.clone(),
                })
                .collect(),
            best: ChoiceDoc { m: self.best.m, b: Num(self.best.b), epsilon: Num(self.best.epsilon), mean: Num(self.best.mean) },
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        json::check_version(text, REPORT_VERSION)?;
        let doc: ReportDoc = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        Ok(CvReport {
            folds: doc.folds,
            seed: doc.seed,
            fold_assignment: doc.fold_assignment,
            sigma0: json::values(&doc.sigma0),
            table: doc
                .table
                .into_iter()
                .map(|c| CvCell {
                    m: c.m,
                    b: c.b.0,
                    epsilon: c.epsilon.0,
                    fold_errors: c.fold_errors.iter().map(|e| e.map(|v| v.0)).collect(),
                    mean: c.mean.map(|v| v.0),
                    failure: c.failure,
                })
                .collect(),
            best: CvChoice { m: doc.best.m, b: doc.best.b.0, epsilon: doc.best.epsilon.0, mean: doc.best.mean.0 },
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportDoc {
    version: u64,
    folds: usize,
    seed: u64,
    fold_assignment: Vec<usize>,
    sigma0: Vec<Num>,
    table: Vec<CellDoc>,
    best: ChoiceDoc,
}

#[derive(Serialize, Deserialize)]
struct CellDoc {
    m: usize,
    b: Num,
    epsilon: Num,
    fold_errors: Vec<Option<Num>>,
    mean: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    failure: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct ChoiceDoc {
    m: usize,
    b: Num,
    epsilon: Num,
    mean: Num,
}
