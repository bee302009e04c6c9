use std::cmp::Ordering;
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// One CSV row. Per-seed rows have `row = "seed"`; per-cell averages have
/// `row = "mean"`, an empty `seed`, and `count` seeds behind them.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Row {
    pub row: &'static str,
    pub model: &'static str,
    pub n: usize,
    pub d: Option<usize>,
    pub k: usize,
    pub lambda: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub degree: Option<f64>,
    pub seed: Option<u64>,
    pub count: usize,
    pub solver: &'static str,
    pub eps: Option<f64>,
    pub converged: bool,
    pub f: f64,
    pub sdp_est: Option<f64>,
    pub rg_est: Option<f64>,
    pub gap: Option<f64>,
    pub correlation: Option<f64>,
    pub overlap: Option<f64>,
    pub cut: Option<f64>,
    pub bound_slack: Option<f64>,
}

impl Row {
    fn cell_key(&self) -> [f64; 6] {
        let o = |v: Option<f64>| v.unwrap_or(f64::NEG_INFINITY);
        [o(self.lambda), o(self.a), o(self.b), o(self.degree), o(self.d.map(|d| d as f64)), self.k as f64]
    }

    fn same_cell(&self, other: &Row) -> bool {
        self.cell_key().iter().zip(other.cell_key()).all(|(x, y)| x.total_cmp(&y) == Ordering::Equal)
    }
}

fn mean_opt(rows: &[Row], get: impl Fn(&Row) -> Option<f64>) -> Option<f64> {
    let vals: Option<Vec<f64>> = rows.iter().map(get).collect();
    vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// Sorts per-seed rows by cell then seed and appends one mean row per cell.
pub fn with_means(mut rows: Vec<Row>) -> Vec<Row> {
    let cmp = |x: &Row, y: &Row| {
        x.cell_key()
            .iter()
            .zip(y.cell_key())
            .map(|(p, q)| p.total_cmp(&q))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then(x.seed.cmp(&y.seed))
    };
    rows.sort_by(cmp);
    let mut means = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let mut end = start + 1;
        while end < rows.len() && rows[end].same_cell(&rows[start]) {
            end += 1;
        }
        let cell = &rows[start..end];
        let f = cell.iter().map(|r| r.f).sum::<f64>() / cell.len() as f64;
        means.push(Row {
            row: "mean",
            seed: None,
            count: cell.len(),
            converged: cell.iter().all(|r| r.converged),
            eps: mean_opt(cell, |r| r.eps),
            f,
            sdp_est: mean_opt(cell, |r| r.sdp_est),
            rg_est: mean_opt(cell, |r| r.rg_est),
            gap: mean_opt(cell, |r| r.gap),
            correlation: mean_opt(cell, |r| r.correlation),
            overlap: mean_opt(cell, |r| r.overlap),
            cut: mean_opt(cell, |r| r.cut),
            bound_slack: mean_opt(cell, |r| r.bound_slack),
            ..cell[0].clone()
        });
        start = end;
    }
    rows.extend(means);
    rows
}

pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn write_csv<T: Serialize>(path: Option<&Path>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(output(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
