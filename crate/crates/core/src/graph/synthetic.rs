use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::model::{Graph, Labels};
use crate::error::{Error, Result};
use crate::numkit::Tensor;
use crate::rng;

/// Binary graph-classification corpus.
///
/// Class 0 graphs have two dense communities joined by a few edges; class 1
/// graphs are Erdős–Rényi with a similar edge density. Nodes carry one-hot
/// types whose distribution leans toward the first half of the type range for
/// class 0 and the second half for class 1. Each graph also draws its own
/// log-normal weights over the types, so graphs of one class differ in
/// composition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSetParams {
    pub num_graphs: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub num_node_types: usize,
    /// Probability a node's type is drawn from its class's preferred half.
    pub type_bias: f64,
    /// Standard deviation of the per-graph log type weights; 0 gives uniform weights.
    #[serde(default)]
    pub composition_spread: f64,
    /// Subtract 1/num_node_types from every feature so rows sum to zero.
    #[serde(default)]
    pub centered: bool,
}

impl Default for GraphSetParams {
    fn default() -> Self {
        Self {
            num_graphs: 200,
            min_nodes: 12,
            max_nodes: 24,
            num_node_types: 8,
            type_bias: 1.0,
            composition_spread: 2.0,
            centered: true,
        }
    }
}

const COMMUNITY_P_IN: f64 = 0.5;
const COMMUNITY_P_OUT: f64 = 0.05;

/// Index in `lo..hi` drawn proportionally to `weights`.
fn weighted_pick(r: &mut rng::LabRng, weights: &[f64], lo: usize, hi: usize) -> usize {
    let mut u = r.random::<f64>() * weights[lo..hi].iter().sum::<f64>();
    for (t, &w) in weights.iter().enumerate().take(hi).skip(lo) {
        if u < w {
            return t;
        }
        u -= w;
    }
    hi - 1
}

pub fn generate_graph_set(params: &GraphSetParams, seed: u64) -> Result<Vec<Graph>> {
    let GraphSetParams {
        num_graphs,
        min_nodes,
        max_nodes,
        num_node_types: k,
        type_bias,
        composition_spread,
        centered,
    } = *params;
    if num_graphs == 0 || min_nodes < 2 || max_nodes < min_nodes {
        return Err(Error::Config(format!(
            "need num_graphs >= 1 and 2 <= min_nodes <= max_nodes, got {num_graphs}, {min_nodes}, {max_nodes}"
        )));
    }
    if k < 2 || !(0.0..=1.0).contains(&type_bias) {
        return Err(Error::Config(format!(
            "need num_node_types >= 2 and type_bias in [0,1], got {k}, {type_bias}"
        )));
    }
    if !(composition_spread >= 0.0 && composition_spread.is_finite()) {
        return Err(Error::Config(format!(
            "composition_spread must be finite and >= 0, got {composition_spread}"
        )));
    }
    let offset = if centered { 1.0 / k as f64 } else { 0.0 };
    let mut root = rng::seeded(seed);
    (0..num_graphs)
        .map(|gi| {
            let mut r = rng::split(&mut root);
            let class = gi % 2;
            let n = r.random_range(min_nodes..=max_nodes);
            let half = n / 2;
            // ER density chosen to match the expected density of the two-community model
            let within = (half * half.saturating_sub(1) / 2
                + (n - half) * (n - half).saturating_sub(1) / 2) as f64;
            let across = (half * (n - half)) as f64;
            let p_er = (within * COMMUNITY_P_IN + across * COMMUNITY_P_OUT) / (within + across);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    let p = match class {
                        0 if (i < half) == (j < half) => COMMUNITY_P_IN,
                        0 => COMMUNITY_P_OUT,
                        _ => p_er,
                    };
                    if r.random::<f64>() < p {
                        edges.push((i, j));
                    }
                }
            }
            let weights: Vec<f64> = (0..k)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut r);
                    (composition_spread * z).exp()
                })
                .collect();
            let split = k / 2;
            let mut features = Tensor::from_fn(n, k, |_, _| -offset);
            for i in 0..n {
                let (lo, hi) = if r.random::<f64>() < type_bias {
                    if class == 0 {
                        (0, split)
                    } else {
                        (split, k)
                    }
                } else {
                    (0, k)
                };
                let t = weighted_pick(&mut r, &weights, lo, hi);
                features.set(i, t, 1.0 - offset);
            }
            Graph::from_edges(
                format!("graph{gi}"),
                n,
                &edges,
                features,
                Some(Labels::Graph(class)),
            )
        })
        .collect()
}
