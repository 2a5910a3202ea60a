use std::sync::Arc;

use gcllab::augment::{AugmentPipeline, AugmentSpec};
use gcllab::diagnostics::{avg_pairwise_cosine, verify_theorem2, Theorem2Mode};
use gcllab::eval::{linear_probe, wilcoxon_signed_rank, ProbeConfig};
use gcllab::graph::{batch_graphs, normalize_adjacency, pair_distribution, Graph, Labels};
use gcllab::losses::{
    alignment_loss, info_nce, view_uniformity_loss, LossFamily, LossLevel, LossSpec,
};
use gcllab::models::{
    contranorm, embed, init_params, readout, EncoderKind, EncoderSpec, GraphContext,
    ProjectionSpec, ReadoutMode,
};
use gcllab::numkit::{grad_check, symmetric_eig, SparseMatrix, Tape, Tensor, Var, GRAD_CHECK_EPS};
use gcllab::rng;
use proptest::prelude::*;
use rand::Rng;

fn tensor(seed: u64, rows: usize, cols: usize) -> Tensor {
    let mut r = rng::seeded(seed);
    Tensor::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

fn graph(seed: u64, n: usize, p: f64, feature_dim: usize) -> Graph {
    let mut r = rng::seeded(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let x = Tensor::from_fn(n, feature_dim, |_, _| r.random_range(-1.0..1.0));
    Graph::from_edges("g", n, &edges, x, None).unwrap()
}

fn permuted(g: &Graph, perm: &[usize]) -> Graph {
    // node i of `g` becomes node perm[i]
    let n = g.num_nodes();
    let edges: Vec<_> = g
        .edges()
        .into_iter()
        .map(|(i, j)| (perm[i], perm[j]))
        .collect();
    let mut x = Tensor::zeros(n, g.feature_dim());
    for i in 0..n {
        x.row_mut(perm[i]).copy_from_slice(g.features().row(i));
    }
    Graph::from_edges("p", n, &edges, x, None).unwrap()
}

fn permutation(seed: u64, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng::seeded(seed));
    p
}

/// Applies op `code` to a 4×3 state using the 3×3 weight `w`. Every op grows
/// the state at most polynomially and the softmax family sees bounded rows, so
/// central differences stay well conditioned.
fn apply_op<'t>(code: u8, x: Var<'t>, w: Var<'t>, adj: &Arc<SparseMatrix>) -> Var<'t> {
    match code {
        0 => x.matmul(w).unwrap(),
        1 => x.row_l2_normalize().exp(),
        2 => x.row_l2_normalize().scale(2.0).row_softmax(),
        3 => x.row_l2_normalize(),
        4 => x.spmm(adj).unwrap(),
        5 => x.hadamard(x.row_softmax()).unwrap().add(x).unwrap(),
        6 => x.add(x.matmul(w).unwrap()).unwrap(),
        7 => x.row_l2_normalize().scale(2.0).row_softmax().log().unwrap(),
        8 => {
            let n = x.row_l2_normalize();
            n.matmul_t(n).unwrap().matmul(x).unwrap().scale(0.5)
        }
        9 => x
            .transpose()
            .transpose()
            .scale_rows(&[0.5, -1.0, 2.0, 1.5])
            .unwrap(),
        10 => {
            let lse = x
                .row_l2_normalize()
                .scale(2.0)
                .row_logsumexp(&Arc::new(Tensor::from_fn(4, 3, |i, j| {
                    if (i + j) % 3 == 0 {
                        0.0
                    } else {
                        1.0
                    }
                })))
                .unwrap();
            x.sub(lse.matmul(w.select_rows(&[0]).unwrap()).unwrap())
                .unwrap()
        }
        11 => x.relu().add(x.scale(0.1)).unwrap(),
        12 => x
            .scale_rows(&[1.0, 0.7, -0.4, 1.3])
            .unwrap()
            .segment_sum(&Arc::new(vec![0, 1, 0, 1]), 2)
            .unwrap()
            .select_rows(&[0, 1, 1, 0])
            .unwrap(),
        _ => x
            .concat_cols(x)
            .unwrap()
            .matmul(w.concat_rows_var(w))
            .unwrap(),
    }
}

trait ConcatRows<'t> {
    fn concat_rows_var(self, other: Var<'t>) -> Var<'t>;
}

impl<'t> ConcatRows<'t> for Var<'t> {
    fn concat_rows_var(self, other: Var<'t>) -> Var<'t> {
        self.transpose()
            .concat_cols(other.transpose())
            .unwrap()
            .transpose()
    }
}

fn two_views(seed: u64, n: usize, d: usize) -> (Tensor, Tensor) {
    (tensor(seed, n, d), tensor(seed.wrapping_add(1), n, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn random_op_chains_pass_grad_check(ops in prop::collection::vec(0u8..14, 1..=6), seed in 0u64..1000) {
        let x = tensor(seed, 4, 3);
        let w = tensor(seed + 7, 3, 3);
        let adj = normalize_adjacency(&graph(seed, 4, 0.6, 1)).matrix;
        // a fixed random readout keeps the objective from being invariant
        // to normalizing ops
        let probe = tensor(seed + 13, 4, 3);
        let err = grad_check(&[x, w], GRAD_CHECK_EPS, |tape, p| {
            let mut h = p[0];
            for &op in &ops {
                h = apply_op(op, h, p[1], &adj);
            }
            Ok(h.hadamard(h)?.sum().add(h.hadamard(tape.constant(probe.clone()))?.sum())?)
        }).unwrap();
        prop_assert!(err < 1e-4, "ops {ops:?}: {err}");
    }

    #[test]
    fn softmax_rows_sum_to_one_and_ignore_shifts(seed in 0u64..10_000, shift in -50.0f64..50.0) {
        let h = tensor(seed, 5, 4).scale(10.0);
        let s = h.row_softmax();
        for r in s.row_sums() {
            prop_assert!((r - 1.0).abs() < 1e-12);
        }
        let shifted = h.map(|v| v + shift).row_softmax();
        prop_assert!(s.max_abs_diff(&shifted).unwrap() < 1e-12);
    }

    #[test]
    fn eigen_trace_and_orthonormality(seed in 0u64..10_000, n in 1usize..10) {
        let x = tensor(seed, n, n);
        let m = x.add(&x.transpose()).unwrap();
        let e = symmetric_eig(&m).unwrap();
        let trace: f64 = (0..n).map(|i| m.get(i, i)).sum();
        prop_assert!((e.values.iter().sum::<f64>() - trace).abs() < 1e-8);
        let vtv = e.vectors.t_matmul(&e.vectors).unwrap();
        prop_assert!(vtv.max_abs_diff(&Tensor::identity(n)).unwrap() < 1e-8);
    }

    #[test]
    fn normalized_adjacency_is_symmetric_with_unit_radius(seed in 0u64..10_000, n in 1usize..16, p in 0.0f64..1.0) {
        let g = graph(seed, n, p, 1);
        let a = normalize_adjacency(&g);
        let dense = Tensor::from_fn(n, n, |i, j| {
            a.matrix.iter().filter(|&(r, c, _)| r == i && c == j).map(|(_, _, v)| v).sum()
        });
        prop_assert!(dense.asymmetry() < 1e-15);
        let radius = symmetric_eig(&dense).unwrap().values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(radius <= 1.0 + 1e-10, "{radius}");
        let pd = pair_distribution(&a).unwrap();
        prop_assert!((pd.joint.total() - 1.0).abs() < 1e-12);
        prop_assert!((pd.marginal.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn augmentations_are_pure_and_seeded(seed in 0u64..10_000, p in 0.0f64..1.0) {
        let g = graph(seed, 12, 0.3, 5);
        let before = g.clone();
        let pipe = AugmentPipeline::new(vec![
            AugmentSpec::FeatureMask { p, per_entry: false },
            AugmentSpec::EdgePerturb { p },
            AugmentSpec::GaussianNoise { sigma: 0.1 },
        ]);
        let a = pipe.apply(&g, &mut rng::seeded(seed)).unwrap();
        let b = pipe.apply(&g, &mut rng::seeded(seed)).unwrap();
        prop_assert_eq!(&g, &before);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.graph.num_nodes(), 12);
        prop_assert!(a.kept.is_none());
        let drop = AugmentPipeline::new(vec![AugmentSpec::NodeDrop { p }]).apply(&g, &mut rng::seeded(seed)).unwrap();
        let kept = drop.kept.unwrap();
        prop_assert_eq!(kept.len(), drop.graph.num_nodes());
        for (new_i, &old_i) in kept.iter().enumerate() {
            prop_assert_eq!(drop.graph.features().row(new_i), g.features().row(old_i));
        }
    }

    #[test]
    fn encoders_are_permutation_equivariant(seed in 0u64..10_000, kind in 0usize..3, alpha in 0.0f64..2.0) {
        let kind = [EncoderKind::Gcn, EncoderKind::Gin, EncoderKind::Mlp][kind];
        let g = graph(seed, 9, 0.4, 3);
        let perm = permutation(seed, 9);
        let pg = permuted(&g, &perm);
        let spec = EncoderSpec::new(kind, 2, 5, 4).with_contranorm(alpha, Default::default());
        let params = init_params(&spec, &ProjectionSpec::disabled(), 3, seed).unwrap();
        let h = embed(&spec, &params, &GraphContext::new(&g).unwrap(), g.features()).unwrap();
        let ph = embed(&spec, &params, &GraphContext::new(&pg).unwrap(), pg.features()).unwrap();
        for i in 0..9 {
            for (a, b) in h.row(i).iter().zip(ph.row(perm[i])) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pooled_encoding_is_permutation_invariant(seed in 0u64..10_000, mean in any::<bool>()) {
        let mode = if mean { ReadoutMode::Mean } else { ReadoutMode::Sum };
        let g = graph(seed, 7, 0.5, 3);
        let pg = permuted(&g, &permutation(seed, 7));
        let spec = EncoderSpec::new(EncoderKind::Gin, 2, 4, 4);
        let params = init_params(&spec, &ProjectionSpec::disabled(), 3, seed).unwrap();
        let pooled = |g: &Graph| {
            let b = batch_graphs(std::slice::from_ref(g)).unwrap();
            let h = embed(&spec, &params, &GraphContext::new(g).unwrap(), g.features()).unwrap();
            let tape = Tape::new();
            readout(tape.constant(h), &b, mode).unwrap().value()
        };
        prop_assert!(pooled(&g).max_abs_diff(&pooled(&pg)).unwrap() < 1e-10);
    }

    #[test]
    fn contranorm_without_strength_is_identity(seed in 0u64..10_000, n in 1usize..10, d in 1usize..6) {
        let h = tensor(seed, n, d);
        let tape = Tape::new();
        let weights: Vec<f64> = (0..n).map(|i| (i + 1) as f64 / n as f64).collect();
        let out = contranorm(tape.constant(h.clone()), 0.0, &weights).unwrap().value();
        prop_assert_eq!(out, h);
    }

    #[test]
    fn mlp_rows_are_independent(seed in 0u64..10_000, row in 0usize..6) {
        let g = graph(seed, 6, 0.5, 3);
        let spec = EncoderSpec::new(EncoderKind::Mlp, 2, 5, 4);
        let params = init_params(&spec, &ProjectionSpec::disabled(), 3, seed).unwrap();
        let ctx = GraphContext::new(&g).unwrap();
        let h = embed(&spec, &params, &ctx, g.features()).unwrap();
        let mut x = g.features().clone();
        x.row_mut(row).iter_mut().for_each(|v| *v += 1.0);
        let h2 = embed(&spec, &params, &ctx, &x).unwrap();
        for i in (0..6).filter(|&i| i != row) {
            prop_assert_eq!(h.row(i), h2.row(i));
        }
    }

    #[test]
    fn info_nce_splits_into_alignment_and_uniformity(seed in 0u64..10_000, n in 2usize..9, d in 1usize..6, t in 0.1f64..2.0, both in any::<bool>()) {
        let (u, v) = two_views(seed, n, d);
        let mut spec = LossSpec::new(LossFamily::Contrast, if both { LossLevel::NodeLl } else { LossLevel::GraphGg });
        spec.temperature = t;
        spec.include_positive_in_denominator = false;
        let tape = Tape::new();
        let (uv, vv) = (tape.constant(u), tape.constant(v));
        let total = info_nce(uv, vv, &spec).unwrap().item().unwrap();
        let parts = alignment_loss(uv, vv, t).unwrap().item().unwrap() + view_uniformity_loss(uv, vv, &spec).unwrap().item().unwrap();
        prop_assert!((total - parts).abs() < 1e-10, "{total} vs {parts}");
    }

    #[test]
    fn alignment_bottoms_out_on_colinear_pairs(seed in 0u64..10_000, n in 1usize..8, scale in 0.1f64..10.0) {
        let u = tensor(seed, n, 3);
        let tape = Tape::new();
        let l = alignment_loss(tape.constant(u.clone()), tape.constant(u.scale(scale)), 0.5).unwrap().item().unwrap();
        prop_assert!((l + 2.0).abs() < 1e-12);
        let flipped = alignment_loss(tape.constant(u.clone()), tape.constant(u.scale(-scale)), 0.5).unwrap().item().unwrap();
        prop_assert!((flipped - 2.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_prior_gradient_is_exact(seed in 0u64..10_000, n in 2usize..31, d in 1usize..9) {
        let g = graph(seed, n, 0.3, 1);
        let p = pair_distribution(&normalize_adjacency(&g)).unwrap();
        let r = verify_theorem2(&tensor(seed, n, d), &p, Theorem2Mode::UniformExact).unwrap();
        prop_assert!(r.passed && r.residual < 1e-8);
    }

    #[test]
    fn average_cosine_is_bounded(seed in 0u64..10_000, n in 2usize..12, d in 1usize..5, zero_row in any::<bool>()) {
        let mut h = tensor(seed, n, d).scale(100.0);
        if zero_row {
            h.row_mut(0).iter_mut().for_each(|v| *v = 0.0);
        }
        let s = avg_pairwise_cosine(&h).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn wilcoxon_is_symmetric(a in prop::collection::vec(0u8..8, 2..25), seed in 0u64..1000) {
        let mut r = rng::seeded(seed);
        let x: Vec<f64> = a.iter().map(|&v| v as f64).collect();
        let y: Vec<f64> = x.iter().map(|_| r.random_range(0..8) as f64).collect();
        let p1 = wilcoxon_signed_rank(&x, &y).unwrap();
        let p2 = wilcoxon_signed_rank(&y, &x).unwrap();
        prop_assert!((p1.p_value - p2.p_value).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&p1.p_value));
    }

    #[test]
    fn probe_beats_train_majority(seed in 0u64..1000, classes in 2usize..4) {
        let mut r = rng::seeded(seed);
        let n = 40;
        let y: Vec<usize> = (0..n).map(|_| r.random_range(0..classes)).collect();
        let x = Tensor::from_fn(n, 4, |i, j| r.random_range(-1.0..1.0) + if j == y[i] { 2.0 } else { 0.0 });
        let res = linear_probe(&x, &y, &x, &y, &ProbeConfig::default()).unwrap();
        let mut counts = vec![0usize; classes];
        y.iter().for_each(|&c| counts[c] += 1);
        let majority = *counts.iter().max().unwrap() as f64 / n as f64;
        prop_assert_eq!(res.train_majority_rate, majority);
        prop_assert!(res.train_accuracy >= majority, "{} < {majority}", res.train_accuracy);
    }
}

#[test]
fn labels_survive_permutation_helper() {
    // sanity for the permutation helper used above
    let g = Graph::from_edges(
        "g",
        3,
        &[(0, 1)],
        Tensor::identity(3),
        Some(Labels::Node(vec![0, 1, 2])),
    )
    .unwrap();
    let pg = permuted(&g, &[2, 0, 1]);
    assert_eq!(pg.edges(), vec![(0, 2)]);
    assert_eq!(pg.features().row(2), &[1.0, 0.0, 0.0]);
}
