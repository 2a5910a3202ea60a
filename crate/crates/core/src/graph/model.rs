use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numkit::{SparseMatrix, Tensor};

/// Node-level or graph-level supervision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Labels {
    Node(Vec<usize>),
    Graph(usize),
}

/// Immutable attributed graph.
///
/// The adjacency is binary and symmetric with both directions of every edge
/// stored, and never contains self-loops or duplicates.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    name: String,
    adjacency: Arc<SparseMatrix>,
    features: Tensor,
    labels: Option<Labels>,
}

impl Graph {
    pub fn new(
        name: impl Into<String>,
        adjacency: SparseMatrix,
        features: Tensor,
        labels: Option<Labels>,
    ) -> Result<Self> {
        let n = adjacency.rows();
        if adjacency.cols() != n {
            return Err(Error::Data(format!(
                "adjacency is {}x{}",
                n,
                adjacency.cols()
            )));
        }
        if features.rows() != n {
            return Err(Error::Data(format!(
                "{} feature rows for {n} nodes",
                features.rows()
            )));
        }
        for (i, j, v) in adjacency.iter() {
            if i == j {
                return Err(Error::Data(format!("self-loop stored at node {i}")));
            }
            if v != 1.0 {
                return Err(Error::Data(format!(
                    "non-binary edge weight {v} at ({i},{j})"
                )));
            }
        }
        if !adjacency.is_symmetric() {
            return Err(Error::Data("adjacency is not symmetric".into()));
        }
        if let Some(Labels::Node(l)) = &labels {
            if l.len() != n {
                return Err(Error::Data(format!("{} labels for {n} nodes", l.len())));
            }
        }
        Ok(Self {
            name: name.into(),
            adjacency: Arc::new(adjacency),
            features,
            labels,
        })
    }

    /// Builds from an undirected edge list; duplicates, reversed pairs and
    /// self-loops are dropped.
    pub fn from_edges(
        name: impl Into<String>,
        n: usize,
        edges: &[(usize, usize)],
        features: Tensor,
        labels: Option<Labels>,
    ) -> Result<Self> {
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Data(format!(
                    "edge ({a},{b}) references a node outside 0..{n}"
                )));
            }
            if a != b {
                set.insert((a.min(b), a.max(b)));
            }
        }
        let trip: Vec<_> = set
            .iter()
            .flat_map(|&(a, b)| [(a, b, 1.0), (b, a, 1.0)])
            .collect();
        let adjacency = SparseMatrix::from_triplets(n, n, &trip)?;
        Self::new(name, adjacency, features, labels)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    /// Undirected edge count.
    pub fn num_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn adjacency(&self) -> &Arc<SparseMatrix> {
        &self.adjacency
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        match &self.labels {
            Some(Labels::Node(l)) => Some(l),
            _ => None,
        }
    }

    pub fn graph_label(&self) -> Option<usize> {
        match self.labels {
            Some(Labels::Graph(l)) => Some(l),
            _ => None,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.node_labels()
            .map_or(0, |l| l.iter().max().map_or(0, |m| m + 1))
    }

    /// Each undirected edge once, as `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .filter(|&(i, j, _)| i < j)
            .map(|(i, j, _)| (i, j))
            .collect()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        self.adjacency.row(i).0
    }

    pub fn with_features(&self, features: Tensor) -> Result<Self> {
        Self::new(
            self.name.clone(),
            (*self.adjacency).clone(),
            features,
            self.labels.clone(),
        )
    }

    /// Same nodes and features, new edge set.
    pub fn with_edges(&self, edges: &[(usize, usize)]) -> Result<Self> {
        Self::from_edges(
            self.name.clone(),
            self.num_nodes(),
            edges,
            self.features.clone(),
            self.labels.clone(),
        )
    }

    /// Subgraph induced by `keep` (reindexed in the given order).
    pub fn induced(&self, keep: &[usize]) -> Result<Self> {
        let mut pos = vec![usize::MAX; self.num_nodes()];
        for (new, &old) in keep.iter().enumerate() {
            if old >= self.num_nodes() {
                return Err(Error::Data(format!("node {old} out of range")));
            }
            pos[old] = new;
        }
        let edges: Vec<_> = self
            .edges()
            .into_iter()
            .filter(|&(a, b)| pos[a] != usize::MAX && pos[b] != usize::MAX)
            .map(|(a, b)| (pos[a], pos[b]))
            .collect();
        let features = self.features.select_rows(keep)?;
        let labels = match &self.labels {
            Some(Labels::Node(l)) => Some(Labels::Node(keep.iter().map(|&i| l[i]).collect())),
            other => other.clone(),
        };
        Self::from_edges(self.name.clone(), keep.len(), &edges, features, labels)
    }
}

/// Fraction of edges joining same-label nodes; `None` without node labels or edges.
pub fn edge_homophily(g: &Graph) -> Option<f64> {
    let labels = g.node_labels()?;
    let edges = g.edges();
    if edges.is_empty() {
        return None;
    }
    let same = edges
        .iter()
        .filter(|&&(a, b)| labels[a] == labels[b])
        .count();
    Some(same as f64 / edges.len() as f64)
}
