//! Experiment documents: one dataset, a base model/loss/augmentation setup and
//! optional variants that override parts of it.

use std::fs;
use std::path::{Path, PathBuf};

use gcllab::augment::AugmentPipeline;
use gcllab::graph::{
    generate_graph_set, generate_sbm, load_content_cites, load_native, Dataset, GraphSetParams,
    SbmParams,
};
use gcllab::losses::{LossFamily, LossSpec};
use gcllab::models::{EncoderSpec, ProjectionSpec, ReadoutMode};
use gcllab::trainer::{EvalSpec, TrainConfig, DEFAULT_EPOCHS, DEFAULT_LR};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Native JSON graph or collection.
    File { path: PathBuf, name: Option<String> },
    Sbm {
        params: SbmParams,
        #[serde(default)]
        seed: u64,
        name: Option<String>,
    },
    GraphSet {
        params: GraphSetParams,
        #[serde(default)]
        seed: u64,
        name: Option<String>,
    },
    /// Planetoid-style `.content` / `.cites` pair.
    ContentCites {
        content: PathBuf,
        cites: PathBuf,
        name: Option<String>,
    },
}

impl DatasetSource {
    pub fn label(&self) -> String {
        let (name, fallback) = match self {
            DatasetSource::File { path, name } => (
                name,
                path.file_stem()
                    .map_or("dataset".into(), |s| s.to_string_lossy().into_owned()),
            ),
            DatasetSource::Sbm { name, .. } => (name, "sbm".into()),
            DatasetSource::GraphSet { name, .. } => (name, "graph_set".into()),
            DatasetSource::ContentCites { content, name, .. } => (
                name,
                content
                    .file_stem()
                    .map_or("citations".into(), |s| s.to_string_lossy().into_owned()),
            ),
        };
        name.clone().unwrap_or(fallback)
    }

    /// Paths are taken relative to `base` (the config's directory).
    pub fn load(&self, base: &Path) -> Result<Dataset, CliError> {
        let resolve = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            }
        };
        Ok(match self {
            DatasetSource::File { path, .. } => load_native(&resolve(path))?,
            DatasetSource::Sbm { params, seed, .. } => {
                Dataset::Single(generate_sbm(params, *seed)?)
            }
            DatasetSource::GraphSet { params, seed, .. } => {
                Dataset::Collection(generate_graph_set(params, *seed)?)
            }
            DatasetSource::ContentCites { content, cites, .. } => {
                let (g, report) = load_content_cites(&resolve(content), &resolve(cites))?;
                if report.unknown_ids > 0 || report.self_citations > 0 || report.duplicates > 0 {
                    eprintln!(
                        "note: skipped {} citations to unknown papers, {} self-citations, {} duplicates",
                        report.unknown_ids,
                        report.self_citations,
                        report.duplicates
                    );
                }
                Dataset::Single(g)
            }
        })
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSection {
    #[serde(default)]
    pub view1: AugmentPipeline,
    #[serde(default)]
    pub view2: AugmentPipeline,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default)]
    pub readout: ReadoutMode,
    #[serde(default)]
    pub batch_size: Option<usize>,
}

fn default_lr() -> f64 {
    DEFAULT_LR
}

fn default_epochs() -> usize {
    DEFAULT_EPOCHS
}

fn default_log_every() -> usize {
    10
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LR,
            epochs: DEFAULT_EPOCHS,
            log_every: default_log_every(),
            readout: ReadoutMode::default(),
            batch_size: None,
        }
    }
}

/// A named row of the experiment; unset sections inherit the base config.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub label: String,
    pub encoder: Option<EncoderSpec>,
    pub projection: Option<ProjectionSpec>,
    pub loss: Option<LossSpec>,
    pub augment: Option<AugmentSection>,
    pub train: Option<TrainSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub encoder: EncoderSpec,
    #[serde(default = "ProjectionSpec::disabled")]
    pub projection: ProjectionSpec,
    pub loss: Option<LossSpec>,
    #[serde(default)]
    pub augment: AugmentSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSpec,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub variants: Vec<Variant>,
}

/// Display name of a loss family as used for table rows.
pub fn family_label(f: LossFamily) -> &'static str {
    match f {
        LossFamily::Contrast => "Contrast",
        LossFamily::NoPos => "NoPos",
        LossFamily::NoNeg => "NoNeg",
    }
}

/// A fully resolved row of the experiment.
pub struct ResolvedVariant {
    pub label: String,
    pub config: TrainConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Expands the variants and validates every resulting training config.
    pub fn resolve(&self) -> Result<Vec<ResolvedVariant>, CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::Usage("seeds must list at least one seed".into()));
        }
        let dataset = self.dataset.label();
        let build = |label: String,
                     enc: &EncoderSpec,
                     proj: &ProjectionSpec,
                     loss: Option<&LossSpec>,
                     aug: &AugmentSection,
                     train: &TrainSection| {
            let loss =
                loss.ok_or_else(|| CliError::Usage(format!("row {label:?} has no loss section")))?;
            let config = TrainConfig {
                encoder: enc.clone(),
                projection: *proj,
                loss: *loss,
                aug1: aug.view1.clone(),
                aug2: aug.view2.clone(),
                lr: train.lr,
                epochs: train.epochs,
                seed: self.seeds[0],
                log_every: train.log_every,
                readout: train.readout,
                batch_size: train.batch_size,
                eval: self.eval,
                dataset: dataset.clone(),
            };
            config
                .validate()
                .map_err(|e| CliError::Usage(format!("row {label:?}: {e}")))?;
            Ok::<_, CliError>(ResolvedVariant { label, config })
        };
        let rows: Vec<ResolvedVariant> = if self.variants.is_empty() {
            let label = self
                .loss
                .map_or("run".to_string(), |l| family_label(l.family).to_string());
            vec![build(
                label,
                &self.encoder,
                &self.projection,
                self.loss.as_ref(),
                &self.augment,
                &self.train,
            )?]
        } else {
            self.variants
                .iter()
                .map(|v| {
                    build(
                        v.label.clone(),
                        v.encoder.as_ref().unwrap_or(&self.encoder),
                        v.projection.as_ref().unwrap_or(&self.projection),
                        v.loss.as_ref().or(self.loss.as_ref()),
                        v.augment.as_ref().unwrap_or(&self.augment),
                        v.train.as_ref().unwrap_or(&self.train),
                    )
                })
                .collect::<Result<_, _>>()?
        };
        let mut seen = std::collections::BTreeSet::new();
        for r in &rows {
            if !seen.insert(r.label.as_str()) {
                return Err(CliError::Usage(format!(
                    "duplicate row label {:?}",
                    r.label
                )));
            }
            if r.label.contains(['/', '\\', ',']) || r.label.is_empty() {
                return Err(CliError::Usage(format!(
                    "row label {:?} must be non-empty without '/', '\\' or ','",
                    r.label
                )));
            }
        }
        Ok(rows)
    }
}
