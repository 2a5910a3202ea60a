use std::sync::Arc;

use super::params::{BoundParams, ModelParams};
use super::spec::{DegreeMode, EncoderKind, EncoderSpec, ProjectionSpec, ReadoutMode};
use crate::error::{Error, Result};
use crate::graph::{
    normalize_sparse, pair_distribution, Graph, GraphBatch, NormalizedAdjacency, PairDistribution,
};
use crate::numkit::{SparseMatrix, Tape, Tensor, Var};

/// Graph-derived operators an encoder needs: the raw adjacency (GIN), its
/// normalized form (GCN) and the pair-distribution marginal (ContraNorm).
#[derive(Clone, Debug)]
pub struct GraphContext {
    pub adjacency: Arc<SparseMatrix>,
    pub normalized: NormalizedAdjacency,
    pub pairs: PairDistribution,
}

impl GraphContext {
    pub fn new(g: &Graph) -> Result<Self> {
        Self::from_adjacency(Arc::clone(g.adjacency()))
    }

    pub fn from_adjacency(adjacency: Arc<SparseMatrix>) -> Result<Self> {
        let normalized = normalize_sparse(&adjacency);
        let pairs = pair_distribution(&normalized)?;
        Ok(Self {
            adjacency,
            normalized,
            pairs,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn degree_weights(&self, mode: DegreeMode) -> Vec<f64> {
        match mode {
            DegreeMode::PairMarginal => self.pairs.marginal.clone(),
            DegreeMode::Identity => vec![1.0 / self.num_nodes() as f64; self.num_nodes()],
        }
    }
}

/// `H − α·diag(d)·row_softmax(HHᵀ)·H`.
pub fn contranorm<'t>(h: Var<'t>, alpha: f64, d: &[f64]) -> Result<Var<'t>> {
    if alpha == 0.0 {
        return Ok(h);
    }
    let s = h.matmul_t(h)?.row_softmax();
    let correction = s.matmul(h)?.scale_rows(d)?.scale(alpha);
    h.sub(correction)
}

fn check_rows(x: Var<'_>, ctx: &GraphContext) -> Result<()> {
    if x.shape().0 != ctx.num_nodes() {
        return Err(Error::shape(
            "encoder",
            format!("{} feature rows for {} nodes", x.shape().0, ctx.num_nodes()),
        ));
    }
    Ok(())
}

/// Activation on hidden layers, then ContraNorm if configured.
fn finish_layer<'t>(
    h: Var<'t>,
    spec: &EncoderSpec,
    ctx: &GraphContext,
    last: bool,
) -> Result<Var<'t>> {
    let h = if last { h } else { h.relu() };
    match spec.contranorm {
        Some(cn) => contranorm(h, cn.alpha, &ctx.degree_weights(cn.degree_mode)),
        None => Ok(h),
    }
}

pub fn gcn_forward<'t>(
    spec: &EncoderSpec,
    params: &BoundParams<'t>,
    ctx: &GraphContext,
    x: Var<'t>,
) -> Result<Var<'t>> {
    check_rows(x, ctx)?;
    let mut h = x;
    for l in 0..spec.num_layers {
        h = h
            .spmm(&ctx.normalized.matrix)?
            .matmul(params.get(&format!("encoder.W{l}"))?)?;
        h = finish_layer(h, spec, ctx, l + 1 == spec.num_layers)?;
    }
    Ok(h)
}

/// Rows are processed independently; `ctx` only supplies ContraNorm weights.
pub fn mlp_forward<'t>(
    spec: &EncoderSpec,
    params: &BoundParams<'t>,
    ctx: &GraphContext,
    x: Var<'t>,
) -> Result<Var<'t>> {
    check_rows(x, ctx)?;
    let mut h = x;
    for l in 0..spec.num_layers {
        h = h.matmul(params.get(&format!("encoder.W{l}"))?)?;
        h = finish_layer(h, spec, ctx, l + 1 == spec.num_layers)?;
    }
    Ok(h)
}

/// Sum-aggregation GIN: `h ← MLP((1+ε)·h + Σ_{j∈N(i)} h_j)`.
pub fn gin_forward<'t>(
    spec: &EncoderSpec,
    params: &BoundParams<'t>,
    ctx: &GraphContext,
    x: Var<'t>,
) -> Result<Var<'t>> {
    check_rows(x, ctx)?;
    let one = x.tape().constant(Tensor::scalar(1.0));
    let mut h = x;
    for l in 0..spec.num_layers {
        let eps = params.get(&format!("encoder.layer{l}.eps"))?;
        let agg = h.spmm(&ctx.adjacency)?;
        let combined = h.mul_scalar(one.add(eps)?)?.add(agg)?;
        h = combined
            .matmul(params.get(&format!("encoder.layer{l}.W1"))?)?
            .relu()
            .matmul(params.get(&format!("encoder.layer{l}.W2"))?)?;
        h = finish_layer(h, spec, ctx, l + 1 == spec.num_layers)?;
    }
    Ok(h)
}

pub fn encode<'t>(
    spec: &EncoderSpec,
    params: &BoundParams<'t>,
    ctx: &GraphContext,
    x: Var<'t>,
) -> Result<Var<'t>> {
    match spec.kind {
        EncoderKind::Gcn => gcn_forward(spec, params, ctx, x),
        EncoderKind::Gin => gin_forward(spec, params, ctx, x),
        EncoderKind::Mlp => mlp_forward(spec, params, ctx, x),
    }
}

pub fn projection_forward<'t>(
    spec: &ProjectionSpec,
    params: &BoundParams<'t>,
    h: Var<'t>,
) -> Result<Var<'t>> {
    if !spec.enabled {
        return Ok(h);
    }
    h.matmul(params.get("head.W1")?)?
        .relu()
        .matmul(params.get("head.W2")?)
}

/// Per-graph sum or mean of node rows.
pub fn readout<'t>(z: Var<'t>, batch: &GraphBatch, mode: ReadoutMode) -> Result<Var<'t>> {
    let sizes = batch.sizes();
    if let Some(g) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Data(format!("graph {g} in batch is empty")));
    }
    let pooled = z.segment_sum(&batch.assignment, batch.num_graphs())?;
    match mode {
        ReadoutMode::Sum => Ok(pooled),
        ReadoutMode::Mean => {
            pooled.scale_rows(&sizes.iter().map(|&s| 1.0 / s as f64).collect::<Vec<_>>())
        }
    }
}

/// Frozen encoder output `H` (no gradients recorded for the parameters).
pub fn embed(
    spec: &EncoderSpec,
    params: &ModelParams,
    ctx: &GraphContext,
    x: &Tensor,
) -> Result<Tensor> {
    let tape = Tape::new();
    let bound = params.bind_frozen(&tape);
    Ok(encode(spec, &bound, ctx, tape.constant(x.clone()))?.value())
}

/// Frozen head output `Z = g(H)`.
pub fn project(spec: &ProjectionSpec, params: &ModelParams, h: &Tensor) -> Result<Tensor> {
    let tape = Tape::new();
    let bound = params.bind_frozen(&tape);
    Ok(projection_forward(spec, &bound, tape.constant(h.clone()))?.value())
}
