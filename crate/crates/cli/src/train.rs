use std::fmt::Write as _;
use std::path::Path;

use gcllab::eval::RunRecord;
use gcllab::graph::{batch_graphs, Dataset};
use gcllab::models::Checkpoint;
use gcllab::trainer::{mean_std, run_seeds};

use crate::config::{family_label, ExperimentConfig};
use crate::error::CliError;
use crate::output::{fresh_dir, write_json, write_text};

pub const WORKERS_ENV: &str = "GCLLAB_WORKERS";
pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

fn workers(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(w) = flag {
        return Ok(w.max(1));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|w| w.max(1))
            .map_err(|_| CliError::Usage(format!("{WORKERS_ENV}={v:?} is not a count"))),
        Err(_) => Ok(1),
    }
}

pub fn records_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("row,dataset,seed,accuracy\n");
    for r in records {
        let _ = writeln!(out, "{},{},{},{}", r.row, r.dataset, r.seed, r.accuracy);
    }
    out
}

pub fn run(config_path: &Path, workers_flag: Option<usize>) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(config_path)?;
    let rows = cfg.resolve()?;
    let workers = workers(workers_flag)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let data = cfg.dataset.load(base)?;
    let input_dim = match &data {
        Dataset::Single(g) => g.feature_dim(),
        Dataset::Collection(gs) => batch_graphs(gs)?.features.cols(),
    };
    let out_base = if cfg.output_dir.is_absolute() {
        cfg.output_dir.clone()
    } else {
        base.join(&cfg.output_dir)
    };
    let dir = fresh_dir(&out_base)?;
    write_json(&dir.join("config.json"), &cfg)?;

    let mut summary = String::from("row,family,dataset,runs,mean_accuracy,std_accuracy\n");
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for row in &rows {
        let results = run_seeds(&row.config, &data, &cfg.seeds, workers)?;
        let mut accs = Vec::new();
        for (seed, result) in cfg.seeds.iter().zip(results) {
            let seed_dir = dir.join(&row.label).join(format!("seed-{seed}"));
            let run = match result {
                Ok(run) => run,
                Err(e) => {
                    write_text(&seed_dir.join("error.txt"), &format!("{e}\n"))?;
                    failures.push(format!("{} seed {seed}: {e}", row.label));
                    continue;
                }
            };
            let ck_path = seed_dir.join("checkpoint.json");
            std::fs::create_dir_all(&seed_dir).map_err(|e| CliError::write(&seed_dir, e))?;
            Checkpoint::new(
                &row.config.encoder,
                &row.config.projection,
                input_dim,
                &run.params,
            )
            .save(&ck_path)?;
            let mut report = run.report;
            report.checkpoint = Some("checkpoint.json".into());
            write_json(&seed_dir.join("report.json"), &report)?;
            if let Some(p) = &report.probe {
                write_json(&seed_dir.join("probe.json"), p)?;
                accs.push(p.test_accuracy);
                records.push(RunRecord {
                    row: row.label.clone(),
                    dataset: report.dataset.clone(),
                    seed: *seed,
                    accuracy: p.test_accuracy,
                });
            }
        }
        let family = family_label(row.config.loss.family);
        if accs.is_empty() {
            let _ = writeln!(summary, "{},{family},{},0,,", row.label, row.config.dataset);
        } else {
            let (m, s) = mean_std(&accs);
            let _ = writeln!(
                summary,
                "{},{family},{},{},{m},{s}",
                row.label,
                row.config.dataset,
                accs.len()
            );
        }
    }
    write_text(&dir.join(SUMMARY_FILE), &summary)?;
    write_text(&dir.join(RECORDS_FILE), &records_csv(&records))?;
    print!("{summary}");
    println!("run directory: {}", dir.display());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "{} run(s) failed: {}",
            failures.len(),
            failures.join("; ")
        )))
    }
}
