use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use gcllab::eval::{build_ablation, RunRecord, TableSpec};
use gcllab::models::ReadoutMode;

use crate::error::CliError;
use crate::output::write_text;
use crate::train::RECORDS_FILE;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ReadoutArg {
    Sum,
    Mean,
}

impl From<ReadoutArg> for ReadoutMode {
    fn from(r: ReadoutArg) -> Self {
        match r {
            ReadoutArg::Sum => ReadoutMode::Sum,
            ReadoutArg::Mean => ReadoutMode::Mean,
        }
    }
}

fn expand(patterns: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let mut dirs = Vec::new();
    for p in patterns {
        let matches: Vec<PathBuf> = glob::glob(p)
            .map_err(|e| CliError::Usage(format!("bad pattern {p:?}: {e}")))?
            .filter_map(Result::ok)
            .filter(|d| d.is_dir())
            .collect();
        if matches.is_empty() {
            return Err(CliError::Usage(format!("no run directory matches {p:?}")));
        }
        dirs.extend(matches);
    }
    dirs.sort();
    dirs.dedup();
    Ok(dirs)
}

pub fn parse_records(path: &Path) -> Result<Vec<RunRecord>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some("row,dataset,seed,accuracy") {
        return Err(CliError::Usage(format!(
            "{}: unexpected header",
            path.display()
        )));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = || {
                CliError::Usage(format!(
                    "{}:{}: malformed record {l:?}",
                    path.display(),
                    i + 2
                ))
            };
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(RunRecord {
                row: f[0].to_string(),
                dataset: f[1].to_string(),
                seed: f[2].parse().map_err(|_| bad())?,
                accuracy: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Rows and datasets in first-appearance order.
fn layout(records: &[RunRecord]) -> (Vec<String>, Vec<String>) {
    let (mut rows, mut datasets) = (Vec::new(), Vec::new());
    for r in records {
        if !rows.contains(&r.row) {
            rows.push(r.row.clone());
        }
        if !datasets.contains(&r.dataset) {
            datasets.push(r.dataset.clone());
        }
    }
    (rows, datasets)
}

pub fn run(patterns: &[String], reference: &str, out: &Path) -> Result<(), CliError> {
    let dirs = expand(patterns)?;
    let mut records = Vec::new();
    for d in &dirs {
        records.extend(parse_records(&d.join(RECORDS_FILE))?);
    }
    if records.is_empty() {
        return Err(CliError::Runtime(
            "the run directories hold no completed runs".into(),
        ));
    }
    let (rows, datasets) = layout(&records);
    if !rows.iter().any(|r| r == reference) {
        return Err(CliError::Usage(format!(
            "reference row {reference:?} not found; rows are {}",
            rows.join(", ")
        )));
    }
    let mut per_row: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in &records {
        per_row.entry(&r.row).or_default().insert(&r.dataset);
    }
    let all: BTreeSet<&str> = datasets.iter().map(String::as_str).collect();
    let mismatched: Vec<String> = per_row
        .iter()
        .filter(|(_, ds)| **ds != all)
        .map(|(row, ds)| {
            format!(
                "{row} lacks {}",
                all.difference(ds).copied().collect::<Vec<_>>().join("/")
            )
        })
        .collect();
    if !mismatched.is_empty() {
        return Err(CliError::Runtime(format!(
            "inconsistent dataset sets across rows: {}",
            mismatched.join("; ")
        )));
    }
    let spec = TableSpec {
        rows,
        datasets,
        reference: reference.to_string(),
    };
    let table = build_ablation(&spec, &records)?;
    fs::create_dir_all(out).map_err(|e| CliError::write(out, e))?;
    write_text(&out.join("table.csv"), &table.to_csv())?;
    let md = table.to_markdown();
    write_text(&out.join("table.md"), &md)?;
    print!("{md}");
    Ok(())
}
