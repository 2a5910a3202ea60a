//! Contrastive objectives.
//!
//! View-level losses work on cosine similarities scaled by a temperature.
//! The neighbor-induced losses work on raw inner products under the pair
//! distribution of a graph; their gradient steps reproduce graph convolution
//! and ContraNorm (see [`crate::diagnostics`]).

use std::sync::Arc;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphBatch, PairDistribution};
use crate::numkit::{Tensor, Var};
use crate::rng::LabRng;

pub const DEFAULT_TEMPERATURE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossFamily {
    /// Full InfoNCE.
    Contrast,
    /// Uniformity term only.
    NoPos,
    /// Alignment term only.
    NoNeg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossLevel {
    /// Node-to-node across views.
    NodeLl,
    /// Pooled graph-to-graph across views.
    GraphGg,
    /// Node-to-node inside each graph, averaged per graph.
    GraphNodeLl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeScope {
    /// Other rows of the opposite view.
    InterView,
    /// Other rows of both views.
    BothViews,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub sample_size: usize,
    pub repeats: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub family: LossFamily,
    pub level: LossLevel,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Whether the positive pair joins the InfoNCE denominator (GRACE
    /// convention). Applies to the Contrast family only.
    #[serde(default = "default_true")]
    pub include_positive_in_denominator: bool,
    /// Defaults to both views at node level and the opposite view otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_scope: Option<NegativeScope>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingSpec>,
}

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}

fn default_true() -> bool {
    true
}

impl LossSpec {
    pub fn new(family: LossFamily, level: LossLevel) -> Self {
        Self {
            family,
            level,
            temperature: DEFAULT_TEMPERATURE,
            include_positive_in_denominator: true,
            negative_scope: None,
            sampling: None,
        }
    }

    pub fn scope(&self) -> NegativeScope {
        self.negative_scope.unwrap_or(match self.level {
            LossLevel::NodeLl => NegativeScope::BothViews,
            LossLevel::GraphGg | LossLevel::GraphNodeLl => NegativeScope::InterView,
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_temperature(self.temperature)?;
        if let Some(s) = self.sampling {
            if s.sample_size < 2 || s.repeats == 0 {
                return Err(Error::Config(format!(
                    "sampling needs sample_size >= 2 and repeats >= 1, got {s:?}"
                )));
            }
        }
        if self.level == LossLevel::GraphNodeLl && self.family != LossFamily::NoNeg {
            return Err(Error::Config(
                "graph_node_ll level is an alignment-only objective; use family no_neg".into(),
            ));
        }
        Ok(())
    }

    fn positive_in_denominator(&self) -> bool {
        self.family == LossFamily::Contrast && self.include_positive_in_denominator
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("temperature must be > 0, got {t}")))
    }
}

/// Cosine similarities `s(u_i, v_j)` via row normalization and a product.
pub fn cosine_similarity_matrix<'t>(u: Var<'t>, v: Var<'t>) -> Result<Var<'t>> {
    if u.shape().1 != v.shape().1 {
        return Err(Error::shape(
            "cosine_similarity_matrix",
            format!("{:?} vs {:?}", u.shape(), v.shape()),
        ));
    }
    u.row_l2_normalize().matmul_t(v.row_l2_normalize())
}

/// `s(u_i, v_i)` for aligned rows, as an `n×1` column.
fn paired_cosine<'t>(u: Var<'t>, v: Var<'t>) -> Result<Var<'t>> {
    if u.shape() != v.shape() {
        return Err(Error::shape(
            "paired_cosine",
            format!("{:?} vs {:?}", u.shape(), v.shape()),
        ));
    }
    Ok(u.row_l2_normalize()
        .hadamard(v.row_l2_normalize())?
        .row_sum())
}

/// Mean of `−s(u_i, v_i)/t`.
pub fn alignment_loss<'t>(u: Var<'t>, v: Var<'t>, t: f64) -> Result<Var<'t>> {
    check_temperature(t)?;
    Ok(paired_cosine(u, v)?.mean().scale(-1.0 / t))
}

/// Mean over anchors of `log Σ_q exp(s(u_i, q)/t)` with every row of
/// `negatives` as a candidate.
pub fn uniformity_loss<'t>(u: Var<'t>, negatives: Var<'t>, t: f64) -> Result<Var<'t>> {
    check_temperature(t)?;
    if negatives.shape().0 == 0 {
        return Err(Error::Config(
            "uniformity needs at least one negative".into(),
        ));
    }
    let logits = cosine_similarity_matrix(u, negatives)?.scale(1.0 / t);
    let (r, c) = logits.shape();
    Ok(logits
        .row_logsumexp(&Arc::new(Tensor::full(r, c, 1.0)))?
        .mean())
}

/// Per-anchor scaled positive similarity and log-denominator with `anchor`
/// as the anchor view.
fn anchor_terms<'t>(
    anchor: Var<'t>,
    other: Var<'t>,
    t: f64,
    scope: NegativeScope,
    with_positive: bool,
) -> Result<(Var<'t>, Var<'t>)> {
    let n = anchor.shape().0;
    if other.shape().0 != n {
        return Err(Error::shape(
            "info_nce",
            format!("views have {} and {} rows", n, other.shape().0),
        ));
    }
    if n < 2 && !with_positive {
        return Err(Error::Config(
            "the negative set is empty for a single-row view".into(),
        ));
    }
    let cross = cosine_similarity_matrix(anchor, other)?.scale(1.0 / t);
    let positive = cross
        .hadamard(anchor.tape().constant(Tensor::identity(n)))?
        .row_sum();
    let cross_mask = Tensor::from_fn(n, n, |i, j| if i != j || with_positive { 1.0 } else { 0.0 });
    let (logits, mask) = match scope {
        NegativeScope::InterView => (cross, cross_mask),
        NegativeScope::BothViews => {
            let own = cosine_similarity_matrix(anchor, anchor)?.scale(1.0 / t);
            let own_mask = Tensor::from_fn(n, n, |i, j| if i != j { 1.0 } else { 0.0 });
            (cross.concat_cols(own)?, cross_mask.concat_cols(&own_mask)?)
        }
    };
    let log_denominator = logits.row_logsumexp(&Arc::new(mask))?;
    Ok((positive, log_denominator))
}

/// Symmetrized InfoNCE: `½(ℓ(u→v) + ℓ(v→u))`, each the mean over anchors of
/// `−log(exp(s⁺/t) / Σ_{q∈N_neg} exp(s_q/t))`.
pub fn info_nce<'t>(u: Var<'t>, v: Var<'t>, spec: &LossSpec) -> Result<Var<'t>> {
    check_temperature(spec.temperature)?;
    let with_pos = spec.include_positive_in_denominator;
    let mut total = None;
    for (a, b) in [(u, v), (v, u)] {
        let (pos, lse) = anchor_terms(a, b, spec.temperature, spec.scope(), with_pos)?;
        let l = lse.sub(pos)?.mean();
        total = Some(match total {
            None => l,
            Some(acc) => l.add(acc)?,
        });
    }
    Ok(total.expect("two directions").scale(0.5))
}

/// The uniformity half of [`info_nce`] over the same negative sets,
/// symmetrized the same way.
pub fn view_uniformity_loss<'t>(u: Var<'t>, v: Var<'t>, spec: &LossSpec) -> Result<Var<'t>> {
    check_temperature(spec.temperature)?;
    let with_pos = spec.positive_in_denominator();
    let (_, lu) = anchor_terms(u, v, spec.temperature, spec.scope(), with_pos)?;
    let (_, lv) = anchor_terms(v, u, spec.temperature, spec.scope(), with_pos)?;
    Ok(lu.mean().add(lv.mean())?.scale(0.5))
}

/// Family dispatch for two row-aligned views.
pub fn view_loss<'t>(u: Var<'t>, v: Var<'t>, spec: &LossSpec) -> Result<Var<'t>> {
    match spec.family {
        LossFamily::Contrast => info_nce(u, v, spec),
        LossFamily::NoPos => view_uniformity_loss(u, v, spec),
        LossFamily::NoNeg => alignment_loss(u, v, spec.temperature),
    }
}

/// Mean of [`view_loss`] over `repeats` random row subsets of size
/// `sample_size`. Subset indices are kept in ascending order, so a full-size
/// subset reproduces the unsampled loss exactly.
pub fn sampled_view_loss<'t>(
    u: Var<'t>,
    v: Var<'t>,
    spec: &LossSpec,
    rng: &mut LabRng,
) -> Result<Var<'t>> {
    let Some(s) = spec.sampling else {
        return view_loss(u, v, spec);
    };
    spec.validate()?;
    let n = u.shape().0;
    if s.sample_size > n {
        return Err(Error::Config(format!(
            "sample_size {} exceeds {n} rows",
            s.sample_size
        )));
    }
    let mut total: Option<Var<'t>> = None;
    for _ in 0..s.repeats {
        let mut idx = index::sample(rng, n, s.sample_size).into_vec();
        idx.sort_unstable();
        let l = view_loss(u.select_rows(&idx)?, v.select_rows(&idx)?, spec)?;
        total = Some(match total {
            None => l,
            Some(acc) => acc.add(l)?,
        });
    }
    Ok(total.expect("repeats >= 1").scale(1.0 / s.repeats as f64))
}

/// [`sampled_view_loss`] for the Contrast family.
pub fn sampled_info_nce<'t>(
    u: Var<'t>,
    v: Var<'t>,
    spec: &LossSpec,
    rng: &mut LabRng,
) -> Result<Var<'t>> {
    if spec.sampling.is_none() {
        return Err(Error::Config(
            "sampled_info_nce needs a sampling section".into(),
        ));
    }
    let spec = LossSpec {
        family: LossFamily::Contrast,
        ..*spec
    };
    sampled_view_loss(u, v, &spec, rng)
}

/// `−(1/M) Σ_i (1/N_i) Σ_{u∈G_i} s(u, v)`: node alignment averaged inside
/// each graph first, then across graphs.
pub fn graph_node_ll_alignment<'t>(
    z1: Var<'t>,
    z2: Var<'t>,
    batch: &GraphBatch,
) -> Result<Var<'t>> {
    let n = batch.num_nodes();
    if z1.shape().0 != n || z2.shape().0 != n {
        return Err(Error::Config(format!(
            "node correspondence broken: views have {} and {} rows for {n} batch nodes",
            z1.shape().0,
            z2.shape().0
        )));
    }
    let m = batch.num_graphs() as f64;
    let sizes = batch.sizes();
    let weights: Vec<f64> = batch
        .assignment
        .iter()
        .map(|&g| 1.0 / (m * sizes[g] as f64))
        .collect();
    Ok(paired_cosine(z1, z2)?
        .scale_rows(&weights)?
        .sum()
        .scale(-1.0))
}

/// `−Σ_{x,x⁺} P(x,x⁺) h_xᵀh_{x⁺} = −tr(HᵀÂH)/c`, plus `‖H‖²_F/c` when
/// `regularized`.
pub fn neighbor_alignment_loss<'t>(
    h: Var<'t>,
    p: &PairDistribution,
    regularized: bool,
) -> Result<Var<'t>> {
    if h.shape().0 != p.num_nodes() {
        return Err(Error::shape(
            "neighbor_alignment_loss",
            format!("{} rows for {} nodes", h.shape().0, p.num_nodes()),
        ));
    }
    let align = h.hadamard(h.spmm(&p.joint)?)?.sum().scale(-1.0);
    if regularized {
        align.add(h.hadamard(h)?.sum().scale(1.0 / p.mass))
    } else {
        Ok(align)
    }
}

/// `Σ_x P(x) log Σ_{x'} P(x') exp(h_xᵀh_{x'})` under an arbitrary prior.
pub fn neighbor_uniformity_with_prior<'t>(h: Var<'t>, prior: &[f64]) -> Result<Var<'t>> {
    let n = h.shape().0;
    if prior.len() != n {
        return Err(Error::shape(
            "neighbor_uniformity",
            format!("{} prior weights for {n} rows", prior.len()),
        ));
    }
    let weights = Arc::new(Tensor::from_fn(n, n, |_, j| prior[j]));
    h.matmul_t(h)?
        .row_logsumexp(&weights)?
        .scale_rows(prior)
        .map(Var::sum)
}

pub fn neighbor_uniformity_loss<'t>(h: Var<'t>, p: &PairDistribution) -> Result<Var<'t>> {
    neighbor_uniformity_with_prior(h, &p.marginal)
}

/// Unregularized neighbor alignment plus neighbor uniformity.
pub fn neighbor_contrast_loss<'t>(h: Var<'t>, p: &PairDistribution) -> Result<Var<'t>> {
    neighbor_alignment_loss(h, p, false)?.add(neighbor_uniformity_loss(h, p)?)
}
