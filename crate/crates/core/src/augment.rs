//! Stochastic graph augmentations producing the two contrastive views.
//!
//! All functions are pure: the input graph is never modified and every call
//! draws only from the stream it is handed.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{self, LabRng};

/// Noise scales searched for the Gaussian-noise augmentation.
pub const GAUSSIAN_SIGMA_GRID: [f64; 3] = [1e-4, 5e-4, 1e-5];

const NODE_DROP_ATTEMPTS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AugmentSpec {
    Identity,
    /// Zeroes whole feature columns, or single entries when `per_entry`.
    FeatureMask {
        p: f64,
        #[serde(default)]
        per_entry: bool,
    },
    /// Deletes each undirected edge with probability `p`.
    EdgePerturb {
        p: f64,
    },
    GaussianNoise {
        sigma: f64,
    },
    SubgraphSample {
        ratio: f64,
    },
    NodeDrop {
        p: f64,
    },
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name} probability {p} outside [0,1]"
                )))
            }
        };
        match *self {
            AugmentSpec::Identity => Ok(()),
            AugmentSpec::FeatureMask { p, .. } => prob("feature_mask", p),
            AugmentSpec::EdgePerturb { p } => prob("edge_perturb", p),
            AugmentSpec::GaussianNoise { sigma } if sigma >= 0.0 && sigma.is_finite() => Ok(()),
            AugmentSpec::GaussianNoise { sigma } => Err(Error::Config(format!(
                "gaussian_noise sigma {sigma} must be >= 0"
            ))),
            AugmentSpec::SubgraphSample { ratio } if ratio > 0.0 && ratio <= 1.0 => Ok(()),
            AugmentSpec::SubgraphSample { ratio } => Err(Error::Config(format!(
                "subgraph ratio {ratio} outside (0,1]"
            ))),
            AugmentSpec::NodeDrop { p } if (0.0..1.0).contains(&p) => Ok(()),
            AugmentSpec::NodeDrop { p } => Err(Error::Config(format!(
                "node_drop probability {p} outside [0,1)"
            ))),
        }
    }

    /// Whether node `i` of the output is node `i` of the input.
    pub fn preserves_nodes(&self) -> bool {
        !matches!(
            self,
            AugmentSpec::SubgraphSample { .. } | AugmentSpec::NodeDrop { .. }
        )
    }
}

/// An augmented graph plus, for node-removing stages, the original index of
/// every surviving node.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedView {
    pub graph: Graph,
    pub kept: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AugmentPipeline {
    pub stages: Vec<AugmentSpec>,
}

impl AugmentPipeline {
    pub fn new(stages: Vec<AugmentSpec>) -> Self {
        Self { stages }
    }

    pub fn validate(&self) -> Result<()> {
        self.stages.iter().try_for_each(AugmentSpec::validate)
    }

    pub fn preserves_nodes(&self) -> bool {
        self.stages.iter().all(AugmentSpec::preserves_nodes)
    }

    /// Applies the stages in order, each with its own sub-stream of `rng`.
    pub fn apply(&self, g: &Graph, rng: &mut LabRng) -> Result<AugmentedView> {
        let mut view = AugmentedView {
            graph: g.clone(),
            kept: None,
        };
        for stage in &self.stages {
            let mut sub = rng::split(rng);
            let next = apply_one(stage, &view.graph, &mut sub)?;
            view.kept = match (view.kept, next.kept) {
                (None, k) => k,
                (k, None) => k,
                (Some(outer), Some(inner)) => Some(inner.iter().map(|&i| outer[i]).collect()),
            };
            view.graph = next.graph;
        }
        Ok(view)
    }
}

pub fn apply_one(spec: &AugmentSpec, g: &Graph, rng: &mut LabRng) -> Result<AugmentedView> {
    spec.validate()?;
    let same_nodes = |graph| Ok(AugmentedView { graph, kept: None });
    match *spec {
        AugmentSpec::Identity => same_nodes(g.clone()),
        AugmentSpec::FeatureMask { p, per_entry } => {
            same_nodes(feature_mask(g, p, per_entry, rng)?)
        }
        AugmentSpec::EdgePerturb { p } => same_nodes(edge_perturb(g, p, rng)?),
        AugmentSpec::GaussianNoise { sigma } => same_nodes(gaussian_noise(g, sigma, rng)?),
        AugmentSpec::SubgraphSample { ratio } => subgraph_sample(g, ratio, rng),
        AugmentSpec::NodeDrop { p } => node_drop(g, p, rng),
    }
}

pub fn feature_mask(g: &Graph, p: f64, per_entry: bool, rng: &mut LabRng) -> Result<Graph> {
    let mut x = g.features().clone();
    if per_entry {
        for v in x.as_mut_slice() {
            if rng.random::<f64>() < p {
                *v = 0.0;
            }
        }
    } else {
        let mask: Vec<bool> = (0..x.cols()).map(|_| rng.random::<f64>() < p).collect();
        for i in 0..x.rows() {
            for (v, &m) in x.row_mut(i).iter_mut().zip(&mask) {
                if m {
                    *v = 0.0;
                }
            }
        }
    }
    g.with_features(x)
}

pub fn edge_perturb(g: &Graph, p: f64, rng: &mut LabRng) -> Result<Graph> {
    let kept: Vec<_> = g
        .edges()
        .into_iter()
        .filter(|_| rng.random::<f64>() >= p)
        .collect();
    g.with_edges(&kept)
}

pub fn gaussian_noise(g: &Graph, sigma: f64, rng: &mut LabRng) -> Result<Graph> {
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut x = g.features().clone();
    for v in x.as_mut_slice() {
        *v += noise.sample(rng);
    }
    g.with_features(x)
}

/// Grows a node set of size `⌈ratio·n⌉` by repeatedly adding a random
/// frontier neighbor. When a component is exhausted the walk restarts at a
/// random unvisited node. Output nodes keep their original relative order.
pub fn subgraph_sample(g: &Graph, ratio: f64, rng: &mut LabRng) -> Result<AugmentedView> {
    AugmentSpec::SubgraphSample { ratio }.validate()?;
    let n = g.num_nodes();
    let target = ((ratio * n as f64).ceil() as usize).min(n);
    let mut in_set = vec![false; n];
    let mut on_frontier = vec![false; n];
    let mut frontier: Vec<usize> = Vec::new();
    let mut count = 0;
    while count < target {
        let next = if frontier.is_empty() {
            let rest: Vec<usize> = (0..n).filter(|&i| !in_set[i]).collect();
            rest[rng.random_range(0..rest.len())]
        } else {
            frontier.swap_remove(rng.random_range(0..frontier.len()))
        };
        in_set[next] = true;
        count += 1;
        for &j in g.neighbors(next) {
            if !in_set[j] && !on_frontier[j] {
                on_frontier[j] = true;
                frontier.push(j);
            }
        }
    }
    let kept: Vec<usize> = (0..n).filter(|&i| in_set[i]).collect();
    Ok(AugmentedView {
        graph: g.induced(&kept)?,
        kept: Some(kept),
    })
}

/// Drops each node independently; an empty draw is retried, and after
/// repeated failures a single random node is kept.
pub fn node_drop(g: &Graph, p: f64, rng: &mut LabRng) -> Result<AugmentedView> {
    AugmentSpec::NodeDrop { p }.validate()?;
    let n = g.num_nodes();
    let mut kept = Vec::new();
    for _ in 0..NODE_DROP_ATTEMPTS {
        kept = (0..n).filter(|_| rng.random::<f64>() >= p).collect();
        if !kept.is_empty() || n == 0 {
            break;
        }
    }
    if kept.is_empty() && n > 0 {
        kept.push(rng.random_range(0..n));
    }
    Ok(AugmentedView {
        graph: g.induced(&kept)?,
        kept: Some(kept),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Labels;
    use crate::numkit::Tensor;

    fn ring(n: usize, h: usize) -> Graph {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(
            "ring",
            n,
            &edges,
            Tensor::from_fn(n, h, |i, j| 1.0 + (i + j) as f64),
            Some(Labels::Node(vec![0; n])),
        )
        .unwrap()
    }

    #[test]
    fn trivial_rates_are_identity_or_total() {
        let g = ring(10, 4);
        let mut r = rng::seeded(0);
        assert_eq!(feature_mask(&g, 0.0, false, &mut r).unwrap(), g);
        assert_eq!(
            feature_mask(&g, 1.0, false, &mut r).unwrap().features(),
            &Tensor::zeros(10, 4)
        );
        assert_eq!(edge_perturb(&g, 0.0, &mut r).unwrap(), g);
        assert_eq!(edge_perturb(&g, 1.0, &mut r).unwrap().num_edges(), 0);
        assert_eq!(gaussian_noise(&g, 0.0, &mut r).unwrap(), g);
        assert_eq!(node_drop(&g, 0.0, &mut r).unwrap().graph, g);
    }

    #[test]
    fn column_mask_zeroes_whole_columns() {
        let g = ring(6, 40);
        let x = feature_mask(&g, 0.5, false, &mut rng::seeded(3)).unwrap();
        for j in 0..40 {
            let col: Vec<f64> = (0..6).map(|i| x.features().get(i, j)).collect();
            assert!(col.iter().all(|&v| v == 0.0) || col.iter().all(|&v| v != 0.0));
        }
    }

    #[test]
    fn subgraph_full_ratio_keeps_all_nodes() {
        let g = ring(9, 2);
        let v = subgraph_sample(&g, 1.0, &mut rng::seeded(5)).unwrap();
        assert_eq!(v.kept, Some((0..9).collect()));
        assert_eq!(v.graph, g);
        assert!(subgraph_sample(&g, 0.0, &mut rng::seeded(5)).is_err());
    }

    #[test]
    fn subgraph_walk_stays_in_component() {
        let mut edges = Vec::new();
        for a in 0..4 {
            for b in (a + 1)..4 {
                edges.push((a, b));
                edges.push((a + 4, b + 4));
            }
        }
        let g = Graph::from_edges("cliques", 8, &edges, Tensor::zeros(8, 1), None).unwrap();
        for seed in 0..20 {
            let kept = subgraph_sample(&g, 0.5, &mut rng::seeded(seed))
                .unwrap()
                .kept
                .unwrap();
            assert!(
                kept == vec![0, 1, 2, 3] || kept == vec![4, 5, 6, 7],
                "{kept:?}"
            );
        }
    }

    #[test]
    fn single_node_survives_drop() {
        let g = Graph::from_edges("one", 1, &[], Tensor::full(1, 1, 1.0), None).unwrap();
        for seed in 0..10 {
            assert_eq!(
                node_drop(&g, 0.99, &mut rng::seeded(seed)).unwrap().kept,
                Some(vec![0])
            );
        }
    }

    #[test]
    fn pipeline_determinism_and_identity() {
        let g = ring(12, 5);
        assert_eq!(
            AugmentPipeline::default()
                .apply(&g, &mut rng::seeded(1))
                .unwrap()
                .graph,
            g
        );
        let zero = AugmentPipeline::new(vec![
            AugmentSpec::FeatureMask {
                p: 0.0,
                per_entry: false,
            },
            AugmentSpec::EdgePerturb { p: 0.0 },
        ]);
        assert_eq!(zero.apply(&g, &mut rng::seeded(1)).unwrap().graph, g);
        let pipe = AugmentPipeline::new(vec![
            AugmentSpec::FeatureMask {
                p: 0.2,
                per_entry: false,
            },
            AugmentSpec::EdgePerturb { p: 0.2 },
        ]);
        assert_eq!(
            pipe.apply(&g, &mut rng::seeded(8)).unwrap(),
            pipe.apply(&g, &mut rng::seeded(8)).unwrap()
        );
    }

    #[test]
    fn kept_maps_compose() {
        let g = ring(30, 1);
        let pipe = AugmentPipeline::new(vec![
            AugmentSpec::NodeDrop { p: 0.3 },
            AugmentSpec::SubgraphSample { ratio: 0.5 },
        ]);
        let v = pipe.apply(&g, &mut rng::seeded(2)).unwrap();
        let kept = v.kept.unwrap();
        for (new, &old) in kept.iter().enumerate() {
            assert_eq!(v.graph.features().get(new, 0), g.features().get(old, 0));
        }
    }

    #[test]
    fn spec_serde_round_trip() {
        let s: AugmentSpec = serde_json::from_str(r#"{"kind":"feature_mask","p":0.3}"#).unwrap();
        assert_eq!(
            s,
            AugmentSpec::FeatureMask {
                p: 0.3,
                per_entry: false
            }
        );
        assert!(
            serde_json::from_str::<AugmentSpec>(r#"{"kind":"edge_perturb","p":0.3,"q":1}"#)
                .is_err()
        );
    }
}
