use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::wilcoxon::wilcoxon_signed_rank;
use crate::error::{Error, Result};

/// One completed run: a table row label, a dataset column, a seed and its
/// probe accuracy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub row: String,
    pub dataset: String,
    pub seed: u64,
    pub accuracy: f64,
}

/// Row and column order plus the reference row for significance tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub rows: Vec<String>,
    pub datasets: Vec<String>,
    pub reference: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
    pub runs: usize,
    /// Wilcoxon p against the reference row over shared seeds; `None` on the
    /// reference row itself.
    pub p_value: Option<f64>,
    /// Fewer than two shared seeds or all paired differences zero.
    pub p_degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub cells: Vec<AblationCell>,
    /// Mean of the per-dataset p-values.
    pub avg_p: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub datasets: Vec<String>,
    pub reference: String,
    pub rows: Vec<AblationRow>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn build_ablation(spec: &TableSpec, records: &[RunRecord]) -> Result<AblationTable> {
    if !spec.rows.contains(&spec.reference) {
        return Err(Error::Config(format!(
            "reference row {:?} is not among the table rows",
            spec.reference
        )));
    }
    // (row, dataset) -> seed -> accuracy; a repeated seed keeps the last record
    let mut cells: BTreeMap<(&str, &str), BTreeMap<u64, f64>> = BTreeMap::new();
    for r in records {
        cells
            .entry((&r.row, &r.dataset))
            .or_default()
            .insert(r.seed, r.accuracy);
    }
    let gaps: Vec<String> = spec
        .rows
        .iter()
        .flat_map(|row| spec.datasets.iter().map(move |d| (row, d)))
        .filter(|(row, d)| !cells.contains_key(&(row.as_str(), d.as_str())))
        .map(|(row, d)| format!("{row} / {d}"))
        .collect();
    if !gaps.is_empty() {
        return Err(Error::IncompleteTable(gaps));
    }

    let mut rows = Vec::new();
    for label in &spec.rows {
        let mut out = Vec::new();
        for d in &spec.datasets {
            let runs = &cells[&(label.as_str(), d.as_str())];
            let accs: Vec<f64> = runs.values().copied().collect();
            let (mean, std) = mean_std(&accs);
            let (p_value, p_degenerate) = if label == &spec.reference {
                (None, false)
            } else {
                let reference = &cells[&(spec.reference.as_str(), d.as_str())];
                let (a, b): (Vec<f64>, Vec<f64>) = runs
                    .iter()
                    .filter_map(|(s, acc)| reference.get(s).map(|r| (*r, *acc)))
                    .unzip();
                if a.len() < 2 {
                    (Some(1.0), true)
                } else {
                    let w = wilcoxon_signed_rank(&a, &b)?;
                    (Some(w.p_value), w.is_degenerate())
                }
            };
            out.push(AblationCell {
                mean,
                std,
                runs: accs.len(),
                p_value,
                p_degenerate,
            });
        }
        let ps: Vec<f64> = out.iter().filter_map(|c| c.p_value).collect();
        let avg_p = (!ps.is_empty()).then(|| ps.iter().sum::<f64>() / ps.len() as f64);
        rows.push(AblationRow {
            label: label.clone(),
            cells: out,
            avg_p,
        });
    }
    Ok(AblationTable {
        datasets: spec.datasets.clone(),
        reference: spec.reference.clone(),
        rows,
    })
}

impl AblationTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,dataset,mean,std,runs,p_value,p_degenerate\n");
        for row in &self.rows {
            for (d, c) in self.datasets.iter().zip(&row.cells) {
                let p = c.p_value.map_or(String::new(), |p| format!("{p}"));
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    row.label, d, c.mean, c.std, c.runs, p, c.p_degenerate
                );
            }
        }
        out
    }

    /// Accuracies in percent as `mean±std`, one column per dataset, then the
    /// averaged p-value.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Method |");
        for d in &self.datasets {
            let _ = write!(out, " {d} |");
        }
        out.push_str(" avg p-value |\n|---|");
        out.push_str(&"---|".repeat(self.datasets.len() + 1));
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "| {} |", row.label);
            for c in &row.cells {
                let _ = write!(out, " {:.2}±{:.2} |", 100.0 * c.mean, 100.0 * c.std);
            }
            match row.avg_p {
                Some(p) => {
                    let _ = writeln!(out, " {p:.4} |");
                }
                None => out.push_str(" - |\n"),
            }
        }
        out
    }
}
