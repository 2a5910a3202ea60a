//! Contrastive training loops for node-level and graph-level tasks.
//!
//! One run is strictly sequential. Two augmented views are drawn afresh every
//! epoch, encoded, projected and scored; the loss logged for an epoch is the
//! value computed before that epoch's Adam update.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::AugmentPipeline;
use crate::diagnostics::{
    avg_pairwise_cosine, singular_spectrum, weight_norms, DEFAULT_RANK_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::eval::{cross_validated_probe, linear_probe, ProbeConfig, ProbeResult, L2_GRID};
use crate::graph::{batch_graphs, random_split, Dataset, Graph, GraphBatch};
use crate::losses::{graph_node_ll_alignment, sampled_view_loss, LossFamily, LossLevel, LossSpec};
use crate::models::{
    embed, encode, init_params, project, projection_forward, readout, EncoderSpec, GraphContext,
    ModelParams, ProjectionSpec, ReadoutMode,
};
use crate::numkit::{AdamState, Tape, Tensor, Var};
use crate::rng::{self, LabRng};

pub const DEFAULT_LR: f64 = 0.01;
pub const DEFAULT_EPOCHS: usize = 200;

// stream tags for `rng::keyed`
const VIEW_STREAM: u64 = 1;
const SAMPLING_STREAM: u64 = 2;
const SHUFFLE_STREAM: u64 = 3;

fn default_lr() -> f64 {
    DEFAULT_LR
}

fn default_epochs() -> usize {
    DEFAULT_EPOCHS
}

fn default_log_every() -> usize {
    1
}

fn default_train_ratio() -> f64 {
    0.8
}

fn default_test_ratio() -> f64 {
    0.1
}

/// How frozen encoder outputs are scored after training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    /// Falls back to logistic for node tasks and hinge for graph tasks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeConfig>,
    #[serde(default = "default_train_ratio")]
    pub train_ratio: f64,
    #[serde(default = "default_test_ratio")]
    pub test_ratio: f64,
    /// When set, the probe's L2 strength is chosen by k-fold CV over `L2_GRID`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_folds: Option<usize>,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self {
            probe: None,
            train_ratio: default_train_ratio(),
            test_ratio: default_test_ratio(),
            cv_folds: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub encoder: EncoderSpec,
    #[serde(default = "ProjectionSpec::disabled")]
    pub projection: ProjectionSpec,
    pub loss: LossSpec,
    #[serde(default)]
    pub aug1: AugmentPipeline,
    #[serde(default)]
    pub aug2: AugmentPipeline,
    #[serde(default = "default_lr")]
    pub lr: f64,
    /// 0 evaluates the untrained initialization.
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default)]
    pub readout: ReadoutMode,
    /// Graphs per optimizer step for graph tasks; all graphs when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub eval: EvalSpec,
    /// Label of the dataset the run belongs to.
    #[serde(default)]
    pub dataset: String,
}

impl TrainConfig {
    pub fn new(encoder: EncoderSpec, projection: ProjectionSpec, loss: LossSpec) -> Self {
        Self {
            encoder,
            projection,
            loss,
            aug1: AugmentPipeline::default(),
            aug2: AugmentPipeline::default(),
            lr: DEFAULT_LR,
            epochs: DEFAULT_EPOCHS,
            seed: 0,
            log_every: 1,
            readout: ReadoutMode::default(),
            batch_size: None,
            eval: EvalSpec::default(),
            dataset: String::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.projection.validate()?;
        self.loss.validate()?;
        self.aug1.validate()?;
        self.aug2.validate()?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be >= 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.projection.enabled && self.projection.hidden_dim == 0 {
            return Err(Error::Config("projection hidden_dim must be >= 1".into()));
        }
        let needs_correspondence =
            matches!(self.loss.level, LossLevel::NodeLl | LossLevel::GraphNodeLl);
        if needs_correspondence && !(self.aug1.preserves_nodes() && self.aug2.preserves_nodes()) {
            return Err(Error::Config(format!(
                "{:?} loss pairs nodes across views; node-removing augmentations break that correspondence",
                self.loss.level
            )));
        }
        Ok(())
    }
}

/// Geometry of the clean-graph representations at one point in training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub sim_h: f64,
    pub sim_z: f64,
    pub rank_h: usize,
    pub rank_z: usize,
    pub weight_norms: BTreeMap<String, f64>,
}

/// Per-logged-epoch metric arrays, all of equal length. The geometry arrays
/// stay empty when only a single row (one graph) is available.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub epoch: Vec<usize>,
    pub loss: Vec<f64>,
    pub sim_h: Vec<f64>,
    pub sim_z: Vec<f64>,
    pub rank_h: Vec<usize>,
    pub rank_z: Vec<usize>,
    pub weight_norms: BTreeMap<String, Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.epoch.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epoch.is_empty()
    }

    fn push(&mut self, epoch: usize, loss: f64, m: Option<FinalMetrics>) {
        self.epoch.push(epoch);
        self.loss.push(loss);
        let Some(m) = m else { return };
        self.sim_h.push(m.sim_h);
        self.sim_z.push(m.sim_z);
        self.rank_h.push(m.rank_h);
        self.rank_z.push(m.rank_z);
        for (name, v) in m.weight_norms {
            self.weight_norms.entry(name).or_default().push(v);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub seed: u64,
    pub epochs: usize,
    pub log_every: usize,
    pub trajectory: Trajectory,
    /// Metrics of the returned parameters.
    pub final_metrics: Option<FinalMetrics>,
    pub probe: Option<ProbeResult>,
    pub wall_clock_seconds: f64,
    /// Path of the saved checkpoint, filled in by whoever persists it.
    pub checkpoint: Option<String>,
}

impl RunReport {
    /// Number of logged epochs for a run of `epochs` logged every `log_every`.
    pub fn expected_log_len(epochs: usize, log_every: usize) -> usize {
        epochs.div_ceil(log_every)
    }
}

/// `None` when there are fewer than two rows to compare.
fn metrics(h: &Tensor, z: &Tensor, params: &ModelParams) -> Result<Option<FinalMetrics>> {
    if h.rows() < 2 {
        return Ok(None);
    }
    Ok(Some(FinalMetrics {
        sim_h: avg_pairwise_cosine(h)?,
        sim_z: avg_pairwise_cosine(z)?,
        rank_h: singular_spectrum(h, DEFAULT_RANK_THRESHOLD)?.effective_rank,
        rank_z: singular_spectrum(z, DEFAULT_RANK_THRESHOLD)?.effective_rank,
        weight_norms: weight_norms(params),
    }))
}

fn probe(
    cfg: &TrainConfig,
    h: &Tensor,
    labels: Option<Vec<usize>>,
    default: ProbeConfig,
) -> Result<Option<ProbeResult>> {
    let Some(y) = labels else {
        return Ok(None);
    };
    let split = random_split(
        h.rows(),
        cfg.eval.train_ratio,
        cfg.eval.test_ratio,
        cfg.seed,
    )?;
    let pick = |idx: &[usize]| -> Result<(Tensor, Vec<usize>)> {
        Ok((h.select_rows(idx)?, idx.iter().map(|&i| y[i]).collect()))
    };
    let (xtr, ytr) = pick(&split.train_idx)?;
    let (xte, yte) = pick(&split.test_idx)?;
    let pc = ProbeConfig {
        seed: cfg.seed,
        ..cfg.eval.probe.unwrap_or(default)
    };
    let result = match cfg.eval.cv_folds {
        Some(k) => cross_validated_probe(&xtr, &ytr, &xte, &yte, &pc, &L2_GRID, k)?,
        None => linear_probe(&xtr, &ytr, &xte, &yte, &pc)?,
    };
    Ok(Some(result))
}

fn finite_loss(loss: f64, epoch: usize) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Evaluation(format!(
            "loss became {loss} at epoch {epoch}"
        )))
    }
}

/// One Adam step on `loss_fn`'s value; returns the pre-update loss.
fn step(
    params: &mut ModelParams,
    adam: &mut AdamState,
    loss_fn: impl for<'t> FnOnce(&'t Tape, &crate::models::BoundParams<'t>) -> Result<Var<'t>>,
) -> Result<f64> {
    let tape = Tape::new();
    let bound = params.bind(&tape);
    let loss = loss_fn(&tape, &bound)?;
    let value = loss.item()?;
    let grads = bound.gradients(&tape.backward(loss)?);
    adam.step(params.tensors_mut(), &grads)?;
    Ok(value)
}

/// Node-level training on a single graph.
pub fn train_node_gcl(cfg: &TrainConfig, g: &Graph) -> Result<(ModelParams, RunReport)> {
    cfg.validate()?;
    if cfg.loss.level != LossLevel::NodeLl {
        return Err(Error::Config(format!(
            "node training needs a node_ll loss, got {:?}",
            cfg.loss.level
        )));
    }
    let started = Instant::now();
    let mut params = init_params(&cfg.encoder, &cfg.projection, g.feature_dim(), cfg.seed)?;
    let mut adam = AdamState::new(params.tensors(), cfg.lr);
    let clean = GraphContext::new(g)?;
    let evaluate = |params: &ModelParams| -> Result<(Tensor, Option<FinalMetrics>)> {
        let h = embed(&cfg.encoder, params, &clean, g.features())?;
        let z = project(&cfg.projection, params, &h)?;
        let m = metrics(&h, &z, params)?;
        Ok((h, m))
    };

    let mut view_rng = rng::keyed(cfg.seed, VIEW_STREAM);
    let mut sample_rng = rng::keyed(cfg.seed, SAMPLING_STREAM);
    let mut trajectory = Trajectory::default();
    for epoch in 0..cfg.epochs {
        let v1 = cfg.aug1.apply(g, &mut view_rng)?.graph;
        let v2 = cfg.aug2.apply(g, &mut view_rng)?.graph;
        let (c1, c2) = (GraphContext::new(&v1)?, GraphContext::new(&v2)?);
        let logged = epoch % cfg.log_every == 0;
        let snapshot = if logged {
            Some(evaluate(&params)?.1)
        } else {
            None
        };
        let loss = step(&mut params, &mut adam, |tape, bound| {
            let z1 = projection_forward(
                &cfg.projection,
                bound,
                encode(
                    &cfg.encoder,
                    bound,
                    &c1,
                    tape.constant(v1.features().clone()),
                )?,
            )?;
            let z2 = projection_forward(
                &cfg.projection,
                bound,
                encode(
                    &cfg.encoder,
                    bound,
                    &c2,
                    tape.constant(v2.features().clone()),
                )?,
            )?;
            sampled_view_loss(z1, z2, &cfg.loss, &mut sample_rng)
        })?;
        let loss = finite_loss(loss, epoch)?;
        if let Some(m) = snapshot {
            trajectory.push(epoch, loss, m);
        }
    }

    let (h, final_metrics) = evaluate(&params)?;
    let probe = probe(
        cfg,
        &h,
        g.node_labels().map(<[usize]>::to_vec),
        ProbeConfig::default(),
    )?;
    let report = RunReport {
        dataset: cfg.dataset.clone(),
        seed: cfg.seed,
        epochs: cfg.epochs,
        log_every: cfg.log_every,
        trajectory,
        final_metrics,
        probe,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        checkpoint: None,
    };
    Ok((params, report))
}

/// Pooled `(H, Z)` for a batch: graph-level `Z` is the head on pooled `H`
/// for graph-to-graph losses, and the pooled head output otherwise.
fn graph_outputs<'t>(
    cfg: &TrainConfig,
    bound: &crate::models::BoundParams<'t>,
    h: Var<'t>,
    batch: &GraphBatch,
) -> Result<(Var<'t>, Var<'t>)> {
    let pooled_h = readout(h, batch, cfg.readout)?;
    let z = match cfg.loss.level {
        LossLevel::GraphGg => projection_forward(&cfg.projection, bound, pooled_h)?,
        _ => readout(
            projection_forward(&cfg.projection, bound, h)?,
            batch,
            cfg.readout,
        )?,
    };
    Ok((pooled_h, z))
}

fn graph_batch_loss<'t>(
    cfg: &TrainConfig,
    tape: &'t Tape,
    bound: &crate::models::BoundParams<'t>,
    graphs: &[&Graph],
    view_rng: &mut LabRng,
    sample_rng: &mut LabRng,
) -> Result<Var<'t>> {
    let mut views = [
        Vec::with_capacity(graphs.len()),
        Vec::with_capacity(graphs.len()),
    ];
    for g in graphs {
        views[0].push(cfg.aug1.apply(g, view_rng)?.graph);
        views[1].push(cfg.aug2.apply(g, view_rng)?.graph);
    }
    let b1 = batch_graphs(&views[0])?;
    let b2 = batch_graphs(&views[1])?;
    let encode_batch = |b: &GraphBatch| -> Result<Var<'t>> {
        let ctx = GraphContext::from_adjacency(b.adjacency.clone())?;
        encode(&cfg.encoder, bound, &ctx, tape.constant(b.features.clone()))
    };
    let (h1, h2) = (encode_batch(&b1)?, encode_batch(&b2)?);
    match cfg.loss.level {
        LossLevel::GraphGg => {
            let (_, z1) = graph_outputs(cfg, bound, h1, &b1)?;
            let (_, z2) = graph_outputs(cfg, bound, h2, &b2)?;
            sampled_view_loss(z1, z2, &cfg.loss, sample_rng)
        }
        LossLevel::GraphNodeLl => {
            let z1 = projection_forward(&cfg.projection, bound, h1)?;
            let z2 = projection_forward(&cfg.projection, bound, h2)?;
            graph_node_ll_alignment(z1, z2, &b1)
        }
        LossLevel::NodeLl => Err(Error::Config(
            "graph training needs a graph_gg or graph_node_ll loss".into(),
        )),
    }
}

/// Graph-level training over a collection of graphs.
pub fn train_graph_gcl(cfg: &TrainConfig, graphs: &[Graph]) -> Result<(ModelParams, RunReport)> {
    cfg.validate()?;
    if cfg.loss.level == LossLevel::NodeLl {
        return Err(Error::Config(
            "graph training needs a graph_gg or graph_node_ll loss".into(),
        ));
    }
    let clean = batch_graphs(graphs)?;
    let per_step = cfg.batch_size.unwrap_or(graphs.len()).min(graphs.len());
    if per_step < 2 && cfg.loss.level == LossLevel::GraphGg && cfg.loss.family != LossFamily::NoNeg
    {
        return Err(Error::Config(format!(
            "{:?} needs at least two graphs per batch for negatives",
            cfg.loss.family
        )));
    }
    let started = Instant::now();
    let mut params = init_params(
        &cfg.encoder,
        &cfg.projection,
        clean.features.cols(),
        cfg.seed,
    )?;
    let mut adam = AdamState::new(params.tensors(), cfg.lr);
    let clean_ctx = GraphContext::from_adjacency(clean.adjacency.clone())?;
    let evaluate = |params: &ModelParams| -> Result<(Tensor, Option<FinalMetrics>)> {
        let tape = Tape::new();
        let bound = params.bind_frozen(&tape);
        let h = encode(
            &cfg.encoder,
            &bound,
            &clean_ctx,
            tape.constant(clean.features.clone()),
        )?;
        let (ph, z) = graph_outputs(cfg, &bound, h, &clean)?;
        let (ph, z) = (ph.value(), z.value());
        let m = metrics(&ph, &z, params)?;
        Ok((ph, m))
    };

    let mut view_rng = rng::keyed(cfg.seed, VIEW_STREAM);
    let mut sample_rng = rng::keyed(cfg.seed, SAMPLING_STREAM);
    let mut shuffle_rng = rng::keyed(cfg.seed, SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..clean.graphs.len()).collect();
    let mut trajectory = Trajectory::default();
    for epoch in 0..cfg.epochs {
        let snapshot = if epoch % cfg.log_every == 0 {
            Some(evaluate(&params)?.1)
        } else {
            None
        };
        if per_step < order.len() {
            order.shuffle(&mut shuffle_rng);
        }
        let mut total = 0.0;
        let chunks: Vec<&[usize]> = order.chunks(per_step).collect();
        for chunk in &chunks {
            let members: Vec<&Graph> = chunk.iter().map(|&i| &clean.graphs[i]).collect();
            total += step(&mut params, &mut adam, |tape, bound| {
                graph_batch_loss(cfg, tape, bound, &members, &mut view_rng, &mut sample_rng)
            })?;
        }
        let loss = finite_loss(total / chunks.len() as f64, epoch)?;
        if let Some(m) = snapshot {
            trajectory.push(epoch, loss, m);
        }
    }

    let (pooled_h, final_metrics) = evaluate(&params)?;
    let probe = probe(cfg, &pooled_h, clean.graph_labels(), ProbeConfig::hinge())?;
    let report = RunReport {
        dataset: cfg.dataset.clone(),
        seed: cfg.seed,
        epochs: cfg.epochs,
        log_every: cfg.log_every,
        trajectory,
        final_metrics,
        probe,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        checkpoint: None,
    };
    Ok((params, report))
}

/// Node training for a single graph, graph training for a collection.
pub fn train(cfg: &TrainConfig, data: &Dataset) -> Result<(ModelParams, RunReport)> {
    match data {
        Dataset::Single(g) => train_node_gcl(cfg, g),
        Dataset::Collection(gs) => train_graph_gcl(cfg, gs),
    }
}

#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub params: ModelParams,
    pub report: RunReport,
}

impl SeedRun {
    pub fn accuracy(&self) -> Option<f64> {
        self.report.probe.as_ref().map(|p| p.test_accuracy)
    }
}

#[derive(Clone, Debug)]
pub struct MultiSeed {
    pub runs: Vec<SeedRun>,
    pub mean_accuracy: Option<f64>,
    /// Sample standard deviation; 0 for a single seed.
    pub std_accuracy: Option<f64>,
}

/// Runs every seed independently on a pool of at most `workers` threads.
/// Results come back in seed order whatever the completion order.
pub fn run_seeds(
    cfg: &TrainConfig,
    data: &Dataset,
    seeds: &[u64],
    workers: usize,
) -> Result<Vec<Result<SeedRun>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let run_cfg = TrainConfig {
                    seed,
                    ..cfg.clone()
                };
                train(&run_cfg, data).map(|(params, report)| SeedRun {
                    seed,
                    params,
                    report,
                })
            })
            .collect()
    }))
}

/// [`run_seeds`] with the first failure propagated and accuracies aggregated.
pub fn multi_seed(
    cfg: &TrainConfig,
    data: &Dataset,
    seeds: &[u64],
    workers: usize,
) -> Result<MultiSeed> {
    if seeds.is_empty() {
        return Err(Error::Config("multi_seed needs at least one seed".into()));
    }
    let runs = run_seeds(cfg, data, seeds, workers)?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let accs: Option<Vec<f64>> = runs.iter().map(SeedRun::accuracy).collect();
    let (mean_accuracy, std_accuracy) = match accs {
        Some(a) => {
            let (m, s) = mean_std(&a);
            (Some(m), Some(s))
        }
        None => (None, None),
    };
    Ok(MultiSeed {
        runs,
        mean_accuracy,
        std_accuracy,
    })
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    (
        mean,
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt(),
    )
}
