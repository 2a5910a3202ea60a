use std::sync::Arc;

use super::model::Graph;
use crate::error::{Error, Result};
use crate::numkit::SparseMatrix;

/// `Â = D̄^{-1/2}(A + I)D̄^{-1/2}` together with its total mass `c = Σ Â_uv`.
#[derive(Clone, Debug)]
pub struct NormalizedAdjacency {
    pub matrix: Arc<SparseMatrix>,
    pub mass: f64,
}

/// Positive-pair distribution `P(x, x⁺) = Â_{x,x⁺} / c` and its marginal
/// `P(x) = Σ_{x'} Â_{x,x'} / c`.
#[derive(Clone, Debug)]
pub struct PairDistribution {
    pub joint: Arc<SparseMatrix>,
    pub marginal: Vec<f64>,
    pub mass: f64,
}

impl NormalizedAdjacency {
    pub fn num_nodes(&self) -> usize {
        self.matrix.rows()
    }
}

impl PairDistribution {
    pub fn num_nodes(&self) -> usize {
        self.marginal.len()
    }

    pub fn joint(&self, x: usize, x_pos: usize) -> f64 {
        self.joint.get(x, x_pos)
    }
}

pub fn normalize_adjacency(g: &Graph) -> NormalizedAdjacency {
    normalize_sparse(g.adjacency())
}

/// Self-loop augmentation and symmetric degree normalization of a binary
/// symmetric adjacency.
pub fn normalize_sparse(adj: &SparseMatrix) -> NormalizedAdjacency {
    let n = adj.rows();
    let degree: Vec<f64> = adj.row_sums().iter().map(|d| d + 1.0).collect();
    let mut trip = Vec::with_capacity(adj.nnz() + n);
    for i in 0..n {
        trip.push((i, i, 1.0 / degree[i]));
    }
    for (i, j, v) in adj.iter() {
        if i != j {
            trip.push((i, j, v / (degree[i] * degree[j]).sqrt()));
        }
    }
    let matrix = SparseMatrix::from_triplets(n, n, &trip)
        .expect("normalized adjacency indices are in range");
    let mass = matrix.total();
    NormalizedAdjacency {
        matrix: Arc::new(matrix),
        mass,
    }
}

pub fn pair_distribution(a: &NormalizedAdjacency) -> Result<PairDistribution> {
    if a.mass <= 0.0 {
        return Err(Error::Precondition(
            "normalized adjacency has zero mass".into(),
        ));
    }
    let c = a.mass;
    let joint = a
        .matrix
        .with_values(a.matrix.values().iter().map(|v| v / c).collect())?;
    let marginal = a.matrix.row_sums().iter().map(|r| r / c).collect();
    Ok(PairDistribution {
        joint: Arc::new(joint),
        marginal,
        mass: c,
    })
}
