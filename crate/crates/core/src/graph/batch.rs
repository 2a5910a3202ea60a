use std::sync::Arc;

use super::model::Graph;
use crate::error::{Error, Result};
use crate::numkit::{SparseMatrix, Tensor};

/// Disjoint union of graphs with a block-diagonal adjacency.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    pub graphs: Vec<Graph>,
    /// Prefix sums of node counts; `node_offsets[g]..node_offsets[g+1]` are graph `g`'s rows.
    pub node_offsets: Vec<usize>,
    pub adjacency: Arc<SparseMatrix>,
    pub features: Tensor,
    pub assignment: Arc<Vec<usize>>,
}

impl GraphBatch {
    pub fn num_graphs(&self) -> usize {
        self.graphs.len()
    }

    pub fn num_nodes(&self) -> usize {
        *self.node_offsets.last().unwrap_or(&0)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.node_offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn graph_labels(&self) -> Option<Vec<usize>> {
        self.graphs.iter().map(Graph::graph_label).collect()
    }

    /// The batch as a single (disconnected) graph.
    pub fn as_graph(&self) -> Result<Graph> {
        Graph::new(
            "batch",
            (*self.adjacency).clone(),
            self.features.clone(),
            None,
        )
    }
}

/// Stacks graphs block-diagonally. Featureless graphs (zero feature columns)
/// receive all-one pseudo features of width 1.
pub fn batch_graphs(graphs: &[Graph]) -> Result<GraphBatch> {
    if graphs.is_empty() {
        return Err(Error::Data("cannot batch zero graphs".into()));
    }
    let prepared: Vec<Graph> = graphs
        .iter()
        .map(|g| {
            if g.feature_dim() == 0 {
                g.with_features(Tensor::full(g.num_nodes(), 1, 1.0))
            } else {
                Ok(g.clone())
            }
        })
        .collect::<Result<_>>()?;
    let dim = prepared[0].feature_dim();
    let mut node_offsets = vec![0];
    let mut assignment = Vec::new();
    for (gi, g) in prepared.iter().enumerate() {
        if g.num_nodes() == 0 {
            return Err(Error::Data(format!("graph {gi} in batch is empty")));
        }
        if g.feature_dim() != dim {
            return Err(Error::Data(format!(
                "graph {gi} has feature dim {}, expected {dim}",
                g.feature_dim()
            )));
        }
        node_offsets.push(node_offsets.last().unwrap() + g.num_nodes());
        assignment.extend(std::iter::repeat_n(gi, g.num_nodes()));
    }
    let blocks: Vec<&SparseMatrix> = prepared.iter().map(|g| g.adjacency().as_ref()).collect();
    let adjacency = SparseMatrix::block_diag(&blocks);
    let feats: Vec<&Tensor> = prepared.iter().map(Graph::features).collect();
    let features = Tensor::concat_rows(&feats)?;
    Ok(GraphBatch {
        graphs: prepared,
        node_offsets,
        adjacency: Arc::new(adjacency),
        features,
        assignment: Arc::new(assignment),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::normalize_sparse;

    fn triangle() -> Graph {
        Graph::from_edges(
            "tri",
            3,
            &[(0, 1), (1, 2), (0, 2)],
            Tensor::full(3, 2, 1.0),
            None,
        )
        .unwrap()
    }

    #[test]
    fn one_graph_offsets() {
        let b = batch_graphs(&[triangle()]).unwrap();
        assert_eq!(b.node_offsets, vec![0, 3]);
    }

    #[test]
    fn two_triangles_have_no_cross_edges() {
        let b = batch_graphs(&[triangle(), triangle()]).unwrap();
        assert_eq!(b.num_nodes(), 6);
        for (i, j, _) in b.adjacency.iter() {
            assert_eq!(b.assignment[i], b.assignment[j]);
        }
        assert_eq!(b.adjacency.nnz(), 12);
    }

    #[test]
    fn normalization_is_blockwise() {
        let path = Graph::from_edges("p", 2, &[(0, 1)], Tensor::full(2, 2, 0.0), None).unwrap();
        let b = batch_graphs(&[triangle(), path.clone()]).unwrap();
        let whole = normalize_sparse(&b.adjacency).matrix.to_dense();
        let t = normalize_sparse(triangle().adjacency()).matrix.to_dense();
        let p = normalize_sparse(path.adjacency()).matrix.to_dense();
        for i in 0..5 {
            for j in 0..5 {
                let expect = match (i < 3, j < 3) {
                    (true, true) => t.get(i, j),
                    (false, false) => p.get(i - 3, j - 3),
                    _ => 0.0,
                };
                assert_eq!(whole.get(i, j), expect);
            }
        }
    }

    #[test]
    fn featureless_and_mixed_dims() {
        let bare = Graph::from_edges("b", 2, &[(0, 1)], Tensor::zeros(2, 0), None).unwrap();
        let b = batch_graphs(&[bare.clone(), bare.clone()]).unwrap();
        assert_eq!(b.features, Tensor::full(4, 1, 1.0));
        assert!(matches!(
            batch_graphs(&[bare, triangle()]),
            Err(Error::Data(_))
        ));
    }
}
