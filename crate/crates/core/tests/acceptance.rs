//! Acceptance suite: prints one PASS/FAIL line per criterion.
//!
//! Every threshold and experimental setting is pinned below. The process
//! exits non-zero when a criterion outside `EXPECTED_FAILURES` fails, so the
//! suite also guards against regressions under `cargo test`.
//! Set `GCLLAB_CORA_DIR` to a directory holding `cora.content` and
//! `cora.cites` to add the optional citation-graph check to criterion 5.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use gcllab::augment::{AugmentPipeline, AugmentSpec};
use gcllab::diagnostics::{verify_theorem1, verify_theorem2, Theorem2Mode};
use gcllab::eval::{wilcoxon_signed_rank, WilcoxonMethod};
use gcllab::graph::{
    batch_graphs, generate_graph_set, generate_sbm, load_content_cites, normalize_adjacency,
    pair_distribution, Dataset, Graph, GraphBatch, GraphSetParams, SbmParams,
};
use gcllab::losses::{
    alignment_loss, graph_node_ll_alignment, info_nce, neighbor_alignment_loss,
    neighbor_contrast_loss, neighbor_uniformity_loss, sampled_view_loss, view_loss,
    view_uniformity_loss, LossFamily, LossLevel, LossSpec, NegativeScope, SamplingSpec,
};
use gcllab::models::{
    embed, encode, init_params, projection_forward, readout, BoundParams, DegreeMode, EncoderKind,
    EncoderSpec, GraphContext, ProjectionSpec, ReadoutMode,
};
use gcllab::numkit::{grad_check, Tape, Tensor, Var, GRAD_CHECK_EPS};
use gcllab::rng;
use gcllab::trainer::{multi_seed, MultiSeed, TrainConfig};
use rand::Rng;

use common::brute_force_wilcoxon;

/// Criteria whose FAIL is understood and recorded; see the README.
const EXPECTED_FAILURES: &[usize] = &[10];

// criteria 1 and 2
const VERIFY_TRIALS: usize = 100;
const VERIFY_MAX_NODES: usize = 30;
const VERIFY_MAX_DIM: usize = 8;
const VERIFY_EDGE_P: f64 = 0.3;
const EXACT_TOL: f64 = 1e-8;
const PAPER_FORM_COSINE: f64 = 0.9;
const PAPER_FORM_MIN_AGREEING: usize = 95;
const VERIFY_TIME_LIMIT: Duration = Duration::from_secs(10);
// criterion 3
const DECOMPOSITION_TRIALS: usize = 50;
const DECOMPOSITION_TOL: f64 = 1e-10;
// criterion 4
const GRAD_CHECK_TOL: f64 = 1e-4;
const CONTRANORM_CHECK_ALPHA: f64 = 1.0;
const GRAD_FEATURE_DIM: usize = 8;
const GRAD_MODEL_DIM: usize = 8;
/// Second-view features are the first plus this much uniform noise.
const GRAD_VIEW_OFFSET: f64 = 0.3;
const GRAD_PARAM_SEED: u64 = 17;
// criteria 5, 6 and 8: node-level SBM benchmark
const SBM_NODES: usize = 400;
const SBM_CLASSES: usize = 4;
const SBM_P_IN: f64 = 0.1;
const SBM_P_OUT: f64 = 0.01;
const SBM_FEATURE_DIM: usize = 32;
const SBM_NOISE: f64 = 0.3;
const SBM_GRAPH_SEED: u64 = 7;
const NODE_EMBED_DIM: usize = 32;
const NODE_EPOCHS: usize = 100;
const NODE_LR: f64 = 0.01;
const AUG_P: f64 = 0.2;
const GAUSSIAN_SIGMA: f64 = 1e-4;
const CONTRANORM_ALPHA: f64 = 400.0;
const MIN_CONTRAST_GCN: f64 = 0.75;
const GCN_MAX_GAP: f64 = 0.04;
const MLP_MIN_GAP: f64 = 0.08;
const COLLAPSE_SIM: f64 = 0.95;
const COLLAPSE_MAJORITY_GAP: f64 = 0.10;
const RESCUE_SIM: f64 = 0.9;
const RESCUE_GAP: f64 = 0.06;
const GAUSSIAN_GAP: f64 = 0.04;
const NO_AUG_GAP: f64 = 0.05;
const NODE_TIME_LIMIT: Duration = Duration::from_secs(600);
const CORA_MIN_CONTRAST: f64 = 0.78;
const CORA_MAX_NONEG: f64 = 0.45;
// criterion 7: graph-level synthetic set
const GRAPH_SET_SEED: u64 = 11;
const GRAPH_EMBED_DIM: usize = 32;
const GG_EPOCHS: usize = 20;
const GG_LR: f64 = 0.001;
const LL_EPOCHS: usize = 60;
const LL_LR: f64 = 0.003;
const HEAD_COLLAPSE_SIM: f64 = 0.95;
const ENCODER_SPREAD_SIM: f64 = 0.9;
const MIN_SEEDS_SHOWING_EFFECT: usize = 8;
// criterion 9
const WILCOXON_MAX_N: usize = 12;
const WILCOXON_SAMPLES: usize = 200;
const WILCOXON_TOL: f64 = 1e-12;
// criterion 10
const SAMPLED_NODES: usize = 50;
const SAMPLED_DRAWS: u64 = 200;
const SAMPLED_REPEATS: usize = 5;
const SAMPLED_FULL_TOL: f64 = 1e-12;
const SAMPLED_REL_TOL: f64 = 0.02;

const SEEDS: [u64; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];

struct Outcome {
    id: usize,
    passed: bool,
    detail: String,
}

fn outcome(id: usize, passed: bool, detail: String) -> Outcome {
    Outcome { id, passed, detail }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn random_graph(r: &mut rng::LabRng, n: usize, p: f64, feature_dim: usize) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if r.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let x = Tensor::from_fn(n, feature_dim, |_, _| r.random_range(-1.0..1.0));
    Graph::from_edges("random", n, &edges, x, None).expect("edges in range")
}

fn random_tensor(r: &mut rng::LabRng, rows: usize, cols: usize) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

/// The 100 random instances shared by criteria 1 and 2.
fn verifier_instances() -> Vec<(Graph, Tensor)> {
    let mut r = rng::seeded(2024);
    (0..VERIFY_TRIALS)
        .map(|_| {
            let n = r.random_range(2..=VERIFY_MAX_NODES);
            let d = r.random_range(1..=VERIFY_MAX_DIM);
            let g = random_graph(&mut r, n, VERIFY_EDGE_P, 1);
            let h = random_tensor(&mut r, n, d);
            (g, h)
        })
        .collect()
}

fn criterion1(instances: &[(Graph, Tensor)]) -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for (g, h) in instances {
        let r = verify_theorem1(h, &normalize_adjacency(g)).expect("verifier runs");
        worst = worst.max(r.residual);
    }
    let elapsed = t.elapsed();
    outcome(
        1,
        worst < EXACT_TOL && elapsed < VERIFY_TIME_LIMIT,
        format!(
            "max residual {worst:.2e} (< {EXACT_TOL:e}) over {} graphs in {:.2}s",
            instances.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion2(instances: &[(Graph, Tensor)]) -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut agreeing = 0;
    let mut min_cos = f64::INFINITY;
    for (g, h) in instances {
        let p = pair_distribution(&normalize_adjacency(g)).expect("pair distribution");
        worst = worst.max(
            verify_theorem2(h, &p, Theorem2Mode::UniformExact)
                .expect("verifier runs")
                .residual,
        );
        let cos = verify_theorem2(h, &p, Theorem2Mode::PaperForm)
            .expect("verifier runs")
            .cosine
            .expect("cosine reported");
        min_cos = min_cos.min(cos);
        if cos > PAPER_FORM_COSINE {
            agreeing += 1;
        }
    }
    let elapsed = t.elapsed();
    outcome(
        2,
        worst < EXACT_TOL && agreeing >= PAPER_FORM_MIN_AGREEING && elapsed < VERIFY_TIME_LIMIT,
        format!(
            "uniform-prior residual {worst:.2e}; paper form cosine > {PAPER_FORM_COSINE} on {agreeing}/{} (min {min_cos:.4}); {:.2}s",
            instances.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion3() -> Outcome {
    let mut r = rng::seeded(3);
    let mut worst: f64 = 0.0;
    for trial in 0..DECOMPOSITION_TRIALS {
        let n = r.random_range(2..=12);
        let d = r.random_range(1..=6);
        let (u, v) = (random_tensor(&mut r, n, d), random_tensor(&mut r, n, d));
        let level = if trial % 2 == 0 {
            LossLevel::NodeLl
        } else {
            LossLevel::GraphGg
        };
        let mut spec = LossSpec::new(LossFamily::Contrast, level);
        spec.temperature = r.random_range(0.1..2.0);
        spec.include_positive_in_denominator = false;
        let tape = Tape::new();
        let (uv, vv) = (tape.constant(u), tape.constant(v));
        let total = info_nce(uv, vv, &spec)
            .and_then(|l| l.item())
            .expect("loss");
        let parts = alignment_loss(uv, vv, spec.temperature)
            .and_then(|l| l.item())
            .expect("loss")
            + view_uniformity_loss(uv, vv, &spec)
                .and_then(|l| l.item())
                .expect("loss");
        worst = worst.max((total - parts).abs());
    }
    outcome(3, worst < DECOMPOSITION_TOL, format!("max |info_nce - (alignment + uniformity)| {worst:.2e} over {DECOMPOSITION_TRIALS} instances"))
}

#[derive(Clone, Copy, Debug)]
enum CheckedLoss {
    Node(LossFamily, bool),
    NodeSampled,
    NeighborAlignment(bool),
    NeighborUniformity,
    NeighborContrast,
    GraphLevel(LossFamily),
    GraphNodeLl,
}

const CHECKED_LOSSES: [CheckedLoss; 12] = [
    CheckedLoss::Node(LossFamily::Contrast, true),
    CheckedLoss::Node(LossFamily::Contrast, false),
    CheckedLoss::Node(LossFamily::NoPos, true),
    CheckedLoss::Node(LossFamily::NoNeg, true),
    CheckedLoss::NodeSampled,
    CheckedLoss::NeighborAlignment(true),
    CheckedLoss::NeighborAlignment(false),
    CheckedLoss::NeighborUniformity,
    CheckedLoss::NeighborContrast,
    CheckedLoss::GraphLevel(LossFamily::Contrast),
    CheckedLoss::GraphLevel(LossFamily::NoPos),
    CheckedLoss::GraphLevel(LossFamily::NoNeg),
];

struct GradInstance {
    graph: Graph,
    x2: Tensor,
    batch: GraphBatch,
    batch_x2: Tensor,
}

fn grad_instance() -> GradInstance {
    let mut r = rng::seeded(4);
    let features = |r: &mut rng::LabRng, n: usize| random_tensor(r, n, GRAD_FEATURE_DIM);
    let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 2), (1, 4)];
    let graph =
        Graph::from_edges("six", 6, &edges, features(&mut r, 6), None).expect("edges in range");
    let x2 = graph
        .features()
        .add(&features(&mut r, 6).scale(GRAD_VIEW_OFFSET))
        .expect("same shape");
    let triangle = Graph::from_edges(
        "triangle",
        3,
        &[(0, 1), (1, 2), (0, 2)],
        features(&mut r, 3),
        None,
    )
    .expect("edges in range");
    let path = Graph::from_edges("path", 3, &[(0, 1), (1, 2)], features(&mut r, 3), None)
        .expect("edges in range");
    let batch = batch_graphs(&[triangle, path]).expect("batch");
    let batch_x2 = batch
        .features
        .add(&features(&mut r, 6).scale(GRAD_VIEW_OFFSET))
        .expect("same shape");
    GradInstance {
        graph,
        x2,
        batch,
        batch_x2,
    }
}

fn checked_objective<'t>(
    loss: CheckedLoss,
    enc: &EncoderSpec,
    proj: &ProjectionSpec,
    bound: &BoundParams<'t>,
    tape: &'t Tape,
    inst: &GradInstance,
) -> gcllab::Result<Var<'t>> {
    let node_views = |ctx: &GraphContext| -> gcllab::Result<(Var<'t>, Var<'t>)> {
        let z1 = projection_forward(
            proj,
            bound,
            encode(
                enc,
                bound,
                ctx,
                tape.constant(inst.graph.features().clone()),
            )?,
        )?;
        let z2 = projection_forward(
            proj,
            bound,
            encode(enc, bound, ctx, tape.constant(inst.x2.clone()))?,
        )?;
        Ok((z1, z2))
    };
    match loss {
        CheckedLoss::Node(family, with_positive) => {
            let ctx = GraphContext::new(&inst.graph)?;
            let (z1, z2) = node_views(&ctx)?;
            let mut spec = LossSpec::new(family, LossLevel::NodeLl);
            spec.include_positive_in_denominator = with_positive;
            view_loss(z1, z2, &spec)
        }
        CheckedLoss::NodeSampled => {
            let ctx = GraphContext::new(&inst.graph)?;
            let (z1, z2) = node_views(&ctx)?;
            let mut spec = LossSpec::new(LossFamily::Contrast, LossLevel::NodeLl);
            spec.sampling = Some(SamplingSpec {
                sample_size: 4,
                repeats: 3,
            });
            sampled_view_loss(z1, z2, &spec, &mut rng::seeded(9))
        }
        CheckedLoss::NeighborAlignment(_)
        | CheckedLoss::NeighborUniformity
        | CheckedLoss::NeighborContrast => {
            let ctx = GraphContext::new(&inst.graph)?;
            let z = node_views(&ctx)?.0;
            match loss {
                CheckedLoss::NeighborAlignment(regularized) => {
                    neighbor_alignment_loss(z, &ctx.pairs, regularized)
                }
                CheckedLoss::NeighborUniformity => neighbor_uniformity_loss(z, &ctx.pairs),
                _ => neighbor_contrast_loss(z, &ctx.pairs),
            }
        }
        CheckedLoss::GraphLevel(_) | CheckedLoss::GraphNodeLl => {
            let ctx = GraphContext::from_adjacency(inst.batch.adjacency.clone())?;
            let h1 = encode(enc, bound, &ctx, tape.constant(inst.batch.features.clone()))?;
            let h2 = encode(enc, bound, &ctx, tape.constant(inst.batch_x2.clone()))?;
            match loss {
                CheckedLoss::GraphLevel(family) => {
                    let z1 = projection_forward(
                        proj,
                        bound,
                        readout(h1, &inst.batch, ReadoutMode::Sum)?,
                    )?;
                    let z2 = projection_forward(
                        proj,
                        bound,
                        readout(h2, &inst.batch, ReadoutMode::Sum)?,
                    )?;
                    view_loss(z1, z2, &LossSpec::new(family, LossLevel::GraphGg))
                }
                _ => graph_node_ll_alignment(
                    projection_forward(proj, bound, h1)?,
                    projection_forward(proj, bound, h2)?,
                    &inst.batch,
                ),
            }
        }
    }
}

fn criterion4() -> Outcome {
    let inst = grad_instance();
    let mut worst: (f64, String) = (0.0, String::new());
    let mut checks = 0;
    let mut failures = 0;
    let losses = CHECKED_LOSSES
        .iter()
        .copied()
        .chain([CheckedLoss::GraphNodeLl]);
    for loss in losses {
        for kind in [EncoderKind::Gcn, EncoderKind::Gin, EncoderKind::Mlp] {
            for with_cn in [false, true] {
                for with_head in [false, true] {
                    let mut enc = EncoderSpec::new(kind, 2, GRAD_MODEL_DIM, GRAD_MODEL_DIM);
                    if with_cn {
                        enc = enc.with_contranorm(CONTRANORM_CHECK_ALPHA, DegreeMode::PairMarginal);
                    }
                    let proj = if with_head {
                        ProjectionSpec::mlp(GRAD_MODEL_DIM, GRAD_MODEL_DIM)
                    } else {
                        ProjectionSpec::disabled()
                    };
                    let params = init_params(&enc, &proj, GRAD_FEATURE_DIM, GRAD_PARAM_SEED)
                        .expect("params");
                    let names = params.names().to_vec();
                    let err = grad_check(params.tensors(), GRAD_CHECK_EPS, |tape, vars| {
                        let bound = BoundParams::from_vars(&names, vars)?;
                        checked_objective(loss, &enc, &proj, &bound, tape, &inst)
                    })
                    .expect("objective evaluates");
                    checks += 1;
                    if !(err < GRAD_CHECK_TOL) {
                        failures += 1;
                    }
                    if err > worst.0 || err.is_nan() {
                        worst = (
                            err,
                            format!("{loss:?} {kind:?} cn={with_cn} head={with_head}"),
                        );
                    }
                }
            }
        }
    }
    outcome(
        4,
        failures == 0,
        format!(
            "{checks} loss/encoder combinations, worst grad_check {:.2e} ({}) < {GRAD_CHECK_TOL:e}",
            worst.0, worst.1
        ),
    )
}

fn node_config(
    kind: EncoderKind,
    family: LossFamily,
    aug: &AugmentPipeline,
    contranorm: Option<f64>,
) -> TrainConfig {
    let mut enc = EncoderSpec::new(kind, 2, 2 * NODE_EMBED_DIM, NODE_EMBED_DIM);
    if let Some(alpha) = contranorm {
        enc = enc.with_contranorm(alpha, DegreeMode::PairMarginal);
    }
    let mut cfg = TrainConfig::new(
        enc,
        ProjectionSpec::disabled(),
        LossSpec::new(family, LossLevel::NodeLl),
    );
    cfg.aug1 = aug.clone();
    cfg.aug2 = aug.clone();
    cfg.epochs = NODE_EPOCHS;
    cfg.lr = NODE_LR;
    cfg.log_every = NODE_EPOCHS;
    cfg
}

fn fm_ep() -> AugmentPipeline {
    AugmentPipeline::new(vec![
        AugmentSpec::FeatureMask {
            p: AUG_P,
            per_entry: false,
        },
        AugmentSpec::EdgePerturb { p: AUG_P },
    ])
}

struct Summary {
    acc: f64,
    majority: f64,
    sim_h: f64,
}

/// Tracks the probe-versus-constant-predictor invariant across every run.
#[derive(Default)]
struct ProbeInvariant {
    runs: usize,
    violations: Vec<String>,
}

impl ProbeInvariant {
    fn record(&mut self, label: &str, out: &MultiSeed) {
        for run in &out.runs {
            let p = run
                .report
                .probe
                .as_ref()
                .expect("labelled data yields a probe");
            self.runs += 1;
            if p.train_accuracy < p.train_majority_rate {
                self.violations.push(format!("{label} seed {}", run.seed));
            }
        }
    }
}

fn summarize(out: &MultiSeed) -> Summary {
    let n = out.runs.len() as f64;
    let probe = |f: fn(&gcllab::eval::ProbeResult) -> f64| {
        out.runs
            .iter()
            .map(|r| f(r.report.probe.as_ref().expect("probe")))
            .sum::<f64>()
            / n
    };
    Summary {
        acc: out.mean_accuracy.expect("accuracies"),
        majority: probe(|p| p.majority_rate),
        sim_h: out
            .runs
            .iter()
            .map(|r| r.report.final_metrics.as_ref().expect("metrics").sim_h)
            .sum::<f64>()
            / n,
    }
}

fn run_node(
    data: &Dataset,
    label: &str,
    cfg: &TrainConfig,
    invariant: &mut ProbeInvariant,
) -> (Summary, Duration) {
    let t = Instant::now();
    let out = multi_seed(cfg, data, &SEEDS, workers()).expect("training succeeds");
    let elapsed = t.elapsed();
    invariant.record(label, &out);
    let s = summarize(&out);
    println!(
        "    {label}: accuracy {:.4}, majority {:.4}, sim_h {:.4} ({:.1}s)",
        s.acc,
        s.majority,
        s.sim_h,
        elapsed.as_secs_f64()
    );
    (s, elapsed)
}

fn cora_check(invariant: &mut ProbeInvariant) -> Option<(bool, String)> {
    let dir = PathBuf::from(std::env::var_os("GCLLAB_CORA_DIR")?);
    let (g, _) = match load_content_cites(&dir.join("cora.content"), &dir.join("cora.cites")) {
        Ok(v) => v,
        Err(e) => return Some((false, format!("Cora files unreadable: {e}"))),
    };
    let data = Dataset::Single(g);
    let aug = fm_ep();
    let contrast = run_node(
        &data,
        "cora Contrast-GCN",
        &node_config(EncoderKind::Gcn, LossFamily::Contrast, &aug, None),
        invariant,
    )
    .0;
    let nopos = run_node(
        &data,
        "cora NoPos-GCN",
        &node_config(EncoderKind::Gcn, LossFamily::NoPos, &aug, None),
        invariant,
    )
    .0;
    let noneg = run_node(
        &data,
        "cora NoNeg-GCN",
        &node_config(EncoderKind::Gcn, LossFamily::NoNeg, &aug, None),
        invariant,
    )
    .0;
    let passed = contrast.acc >= CORA_MIN_CONTRAST
        && (nopos.acc - contrast.acc).abs() <= GCN_MAX_GAP
        && noneg.acc <= CORA_MAX_NONEG;
    Some((
        passed,
        format!(
            "Cora Contrast {:.4}, NoPos {:.4}, NoNeg {:.4}",
            contrast.acc, nopos.acc, noneg.acc
        ),
    ))
}

fn node_criteria(invariant: &mut ProbeInvariant) -> Vec<Outcome> {
    let params = SbmParams {
        n: SBM_NODES,
        num_classes: SBM_CLASSES,
        p_in: SBM_P_IN,
        p_out: SBM_P_OUT,
        feature_dim: SBM_FEATURE_DIM,
        feature_noise: SBM_NOISE,
    };
    let data = Dataset::Single(generate_sbm(&params, SBM_GRAPH_SEED).expect("sbm"));
    let aug = fm_ep();
    println!(
        "  SBM benchmark runs ({} seeds, {NODE_EPOCHS} epochs, noise {SBM_NOISE}):",
        SEEDS.len()
    );
    let (c_gcn, t1) = run_node(
        &data,
        "Contrast-GCN",
        &node_config(EncoderKind::Gcn, LossFamily::Contrast, &aug, None),
        invariant,
    );
    let (p_gcn, t2) = run_node(
        &data,
        "NoPos-GCN",
        &node_config(EncoderKind::Gcn, LossFamily::NoPos, &aug, None),
        invariant,
    );
    let (c_mlp, t3) = run_node(
        &data,
        "Contrast-MLP",
        &node_config(EncoderKind::Mlp, LossFamily::Contrast, &aug, None),
        invariant,
    );
    let (p_mlp, t4) = run_node(
        &data,
        "NoPos-MLP",
        &node_config(EncoderKind::Mlp, LossFamily::NoPos, &aug, None),
        invariant,
    );
    let (n_gcn, _) = run_node(
        &data,
        "NoNeg-GCN",
        &node_config(EncoderKind::Gcn, LossFamily::NoNeg, &aug, None),
        invariant,
    );
    let (n_cn, _) = run_node(
        &data,
        "NoNeg-GCN+ContraNorm",
        &node_config(
            EncoderKind::Gcn,
            LossFamily::NoNeg,
            &aug,
            Some(CONTRANORM_ALPHA),
        ),
        invariant,
    );
    let gauss = AugmentPipeline::new(vec![AugmentSpec::GaussianNoise {
        sigma: GAUSSIAN_SIGMA,
    }]);
    let (g_gcn, _) = run_node(
        &data,
        "Contrast-GCN Gaussian",
        &node_config(EncoderKind::Gcn, LossFamily::Contrast, &gauss, None),
        invariant,
    );
    let (none_gcn, _) = run_node(
        &data,
        "Contrast-GCN NoAug",
        &node_config(
            EncoderKind::Gcn,
            LossFamily::Contrast,
            &AugmentPipeline::default(),
            None,
        ),
        invariant,
    );

    let gcn_gap = (p_gcn.acc - c_gcn.acc).abs();
    let mlp_gap = c_mlp.acc - p_mlp.acc;
    let elapsed = t1 + t2 + t3 + t4;
    let mut passed5 = c_gcn.acc >= MIN_CONTRAST_GCN
        && gcn_gap <= GCN_MAX_GAP
        && mlp_gap >= MLP_MIN_GAP
        && elapsed < NODE_TIME_LIMIT;
    let mut detail5 = format!(
        "Contrast-GCN {:.4} (>= {MIN_CONTRAST_GCN}); GCN |NoPos - Contrast| {:.4} (<= {GCN_MAX_GAP}); MLP Contrast - NoPos {:.4} (>= {MLP_MIN_GAP}); {:.0}s",
        c_gcn.acc,
        gcn_gap,
        mlp_gap,
        elapsed.as_secs_f64()
    );
    match cora_check(invariant) {
        Some((ok, text)) => {
            passed5 &= ok;
            detail5.push_str(&format!("; {text}"));
        }
        None => detail5.push_str("; Cora check skipped (GCLLAB_CORA_DIR unset)"),
    }

    let collapse_gap = (n_gcn.acc - n_gcn.majority).abs();
    let rescue_gap = (n_cn.acc - c_gcn.acc).abs();
    let passed6 = n_gcn.sim_h > COLLAPSE_SIM
        && collapse_gap <= COLLAPSE_MAJORITY_GAP
        && n_cn.sim_h < RESCUE_SIM
        && rescue_gap <= RESCUE_GAP;
    let detail6 = format!(
        "NoNeg sim_h {:.4} (> {COLLAPSE_SIM}), |acc - majority| {:.4} (<= {COLLAPSE_MAJORITY_GAP}); +ContraNorm sim_h {:.4} (< {RESCUE_SIM}), |acc - Contrast| {:.4} (<= {RESCUE_GAP})",
        n_gcn.sim_h, collapse_gap, n_cn.sim_h, rescue_gap
    );

    let gauss_gap = (g_gcn.acc - c_gcn.acc).abs();
    let none_gap = (none_gcn.acc - c_gcn.acc).abs();
    let passed8 = gauss_gap <= GAUSSIAN_GAP && none_gap <= NO_AUG_GAP;
    let detail8 = format!("|Gaussian - FM+EP| {gauss_gap:.4} (<= {GAUSSIAN_GAP}); |NoAug - FM+EP| {none_gap:.4} (<= {NO_AUG_GAP})");

    vec![
        outcome(5, passed5, detail5),
        outcome(6, passed6, detail6),
        outcome(8, passed8, detail8),
    ]
}

fn graph_config(level: LossLevel, epochs: usize, lr: f64) -> TrainConfig {
    let enc = EncoderSpec::new(EncoderKind::Gin, 2, GRAPH_EMBED_DIM, GRAPH_EMBED_DIM);
    let mut cfg = TrainConfig::new(
        enc,
        ProjectionSpec::mlp(GRAPH_EMBED_DIM, GRAPH_EMBED_DIM),
        LossSpec::new(LossFamily::NoNeg, level),
    );
    cfg.aug1 = fm_ep();
    cfg.aug2 = fm_ep();
    cfg.epochs = epochs;
    cfg.lr = lr;
    cfg.log_every = epochs;
    cfg
}

fn criterion7(invariant: &mut ProbeInvariant) -> Outcome {
    let graphs = generate_graph_set(&GraphSetParams::default(), GRAPH_SET_SEED).expect("graph set");
    let data = Dataset::Collection(graphs);
    println!("  graph-level runs ({} seeds):", SEEDS.len());
    let per_seed = |label: &str, cfg: &TrainConfig, invariant: &mut ProbeInvariant| {
        let out = multi_seed(cfg, &data, &SEEDS, workers()).expect("training succeeds");
        invariant.record(label, &out);
        let metrics: Vec<_> = out
            .runs
            .iter()
            .map(|r| r.report.final_metrics.clone().expect("metrics"))
            .collect();
        for (seed, m) in SEEDS.iter().zip(&metrics) {
            println!(
                "    {label} seed {seed}: sim_h {:.4} sim_z {:.4} rank_h {} rank_z {}",
                m.sim_h, m.sim_z, m.rank_h, m.rank_z
            );
        }
        metrics
    };
    let gg = per_seed(
        "NoNeg G-G",
        &graph_config(LossLevel::GraphGg, GG_EPOCHS, GG_LR),
        invariant,
    );
    let ll = per_seed(
        "NoNeg GraphNodeLL",
        &graph_config(LossLevel::GraphNodeLl, LL_EPOCHS, LL_LR),
        invariant,
    );
    let head_effect = gg
        .iter()
        .filter(|m| {
            m.sim_z > HEAD_COLLAPSE_SIM && m.sim_h < ENCODER_SPREAD_SIM && m.rank_z < m.rank_h
        })
        .count();
    let both_collapse = ll
        .iter()
        .filter(|m| m.sim_h > HEAD_COLLAPSE_SIM && m.sim_z > HEAD_COLLAPSE_SIM)
        .count();
    outcome(
        7,
        head_effect >= MIN_SEEDS_SHOWING_EFFECT && both_collapse >= MIN_SEEDS_SHOWING_EFFECT,
        format!(
            "G-G: sim_z > {HEAD_COLLAPSE_SIM}, sim_h < {ENCODER_SPREAD_SIM}, rank_z < rank_h on {head_effect}/{}; GraphNodeLL: both > {HEAD_COLLAPSE_SIM} on {both_collapse}/{} (need {MIN_SEEDS_SHOWING_EFFECT})",
            gg.len(),
            ll.len()
        ),
    )
}

fn criterion9() -> Outcome {
    let mut r = rng::seeded(9);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for n in 2..=WILCOXON_MAX_N {
        for _ in 0..WILCOXON_SAMPLES {
            let a: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
            let b: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
            let got = wilcoxon_signed_rank(&a, &b).expect("valid samples");
            if got.method != WilcoxonMethod::Exact {
                worst = f64::INFINITY;
                continue;
            }
            worst = worst.max((got.p_value - brute_force_wilcoxon(&a, &b)).abs());
            compared += 1;
        }
    }
    outcome(
        9,
        worst < WILCOXON_TOL,
        format!("{compared} samples (n = 2..={WILCOXON_MAX_N}, {WILCOXON_SAMPLES} each), max |exact - enumeration| {worst:.2e}"),
    )
}

fn criterion10() -> Outcome {
    let params = SbmParams {
        n: SAMPLED_NODES,
        num_classes: 2,
        p_in: 0.3,
        p_out: 0.05,
        feature_dim: 8,
        feature_noise: 1.0,
    };
    let g = generate_sbm(&params, 10).expect("sbm");
    let enc = EncoderSpec::new(EncoderKind::Gcn, 2, 16, 8);
    let model =
        init_params(&enc, &ProjectionSpec::disabled(), g.feature_dim(), 10).expect("params");
    let mut view_rng = rng::seeded(10);
    let mut embed_view = || {
        let v = fm_ep().apply(&g, &mut view_rng).expect("augment").graph;
        embed(
            &enc,
            &model,
            &GraphContext::new(&v).expect("context"),
            v.features(),
        )
        .expect("embed")
    };
    let (u, v) = (embed_view(), embed_view());
    let tape = Tape::new();
    let (uv, vv) = (tape.constant(u), tape.constant(v));
    let base = LossSpec::new(LossFamily::Contrast, LossLevel::NodeLl);
    let full = info_nce(uv, vv, &base)
        .and_then(|l| l.item())
        .expect("loss");
    let sampled = |sample_size: usize, repeats: usize, seed: u64| {
        let spec = LossSpec {
            sampling: Some(SamplingSpec {
                sample_size,
                repeats,
            }),
            ..base
        };
        sampled_view_loss(uv, vv, &spec, &mut rng::seeded(seed))
            .and_then(|l| l.item())
            .expect("loss")
    };
    let exact_gap = (sampled(SAMPLED_NODES, 1, 0) - full).abs();
    let mean = (0..SAMPLED_DRAWS)
        .map(|s| sampled(SAMPLED_NODES / 2, SAMPLED_REPEATS, s))
        .sum::<f64>()
        / SAMPLED_DRAWS as f64;
    let rel = (mean - full).abs() / full.abs();
    debug_assert_eq!(base.scope(), NegativeScope::BothViews);
    outcome(
        10,
        exact_gap <= SAMPLED_FULL_TOL && rel <= SAMPLED_REL_TOL,
        format!(
            "N=n, R=1 gap {exact_gap:.2e}; N=n/2, R={SAMPLED_REPEATS} mean {mean:.4} vs full {full:.4}: relative {rel:.4} (<= {SAMPLED_REL_TOL})"
        ),
    )
}

fn main() {
    let started = Instant::now();
    let mut invariant = ProbeInvariant::default();
    let instances = verifier_instances();
    let mut outcomes = vec![
        criterion1(&instances),
        criterion2(&instances),
        criterion3(),
        criterion4(),
    ];
    outcomes.extend(node_criteria(&mut invariant));
    outcomes.push(criterion7(&mut invariant));
    outcomes.push(criterion9());
    outcomes.push(criterion10());
    outcomes.sort_by_key(|o| o.id);

    println!();
    for o in &outcomes {
        println!(
            "criterion {:>2}: {} | {}",
            o.id,
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "invariant: probe train accuracy >= constant predictor on {}/{} runs{}",
        invariant.runs - invariant.violations.len(),
        invariant.runs,
        if invariant.violations.is_empty() {
            String::new()
        } else {
            format!(" (violations: {})", invariant.violations.join(", "))
        }
    );
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!(
        "{passed}/{} criteria passed in {:.0}s",
        outcomes.len(),
        started.elapsed().as_secs_f64()
    );

    let unexpected: Vec<usize> = outcomes
        .iter()
        .filter(|o| !o.passed && !EXPECTED_FAILURES.contains(&o.id))
        .map(|o| o.id)
        .collect();
    if !unexpected.is_empty() || !invariant.violations.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
