use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelParams;
use crate::numkit::{dot, symmetric_eig, Tensor};
use crate::trainer::RunReport;

pub const DEFAULT_RANK_THRESHOLD: f64 = 1e-4;
pub const DEFAULT_COLLAPSE_THRESHOLD: f64 = 0.95;

/// Mean cosine similarity over unordered pairs of distinct rows.
///
/// Uses `Σ_{i≠j} ûᵢ·ûⱼ = ‖Σ ûᵢ‖² − Σ ‖ûᵢ‖²` on normalized rows, so the cost
/// is linear in `n`. Zero rows count as similarity 0 with everything.
pub fn avg_pairwise_cosine(h: &Tensor) -> Result<f64> {
    let n = h.rows();
    if n < 2 {
        return Err(Error::Data(format!(
            "average pairwise cosine needs >= 2 rows, got {n}"
        )));
    }
    let u = h.row_l2_normalize();
    let mut total = vec![0.0; h.cols()];
    let mut self_sum = 0.0;
    for i in 0..n {
        let r = u.row(i);
        total.iter_mut().zip(r).for_each(|(t, v)| *t += v);
        self_sum += dot(r, r);
    }
    let mean = (dot(&total, &total) - self_sum) / (n * (n - 1)) as f64;
    Ok(mean.clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Descending; `min(n, d)` entries.
    pub singular_values: Vec<f64>,
    pub effective_rank: usize,
    pub rel_threshold: f64,
}

impl SpectrumReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,singular_value\n");
        for (i, s) in self.singular_values.iter().enumerate() {
            let _ = writeln!(out, "{i},{s:e}");
        }
        out
    }
}

/// Singular values of `h` from the eigenvalues of the `d×d` Gram matrix;
/// effective rank counts `σ_i > rel_threshold·σ_1`.
pub fn singular_spectrum(h: &Tensor, rel_threshold: f64) -> Result<SpectrumReport> {
    if !(rel_threshold > 0.0 && rel_threshold < 1.0) {
        return Err(Error::Precondition(format!(
            "rel_threshold {rel_threshold} outside (0,1)"
        )));
    }
    let gram = h.t_matmul(h)?;
    let gram = gram.add(&gram.transpose())?.scale(0.5);
    let eig = symmetric_eig(&gram)?;
    let keep = h.rows().min(h.cols());
    let singular_values: Vec<f64> = eig
        .values
        .iter()
        .take(keep)
        .map(|&l| l.max(0.0).sqrt())
        .collect();
    let top = singular_values.first().copied().unwrap_or(0.0);
    let effective_rank = if top > 0.0 {
        singular_values
            .iter()
            .filter(|&&s| s > rel_threshold * top)
            .count()
    } else {
        0
    };
    Ok(SpectrumReport {
        singular_values,
        effective_rank,
        rel_threshold,
    })
}

/// Frobenius norm of every parameter tensor.
pub fn weight_norms(params: &ModelParams) -> BTreeMap<String, f64> {
    params
        .iter()
        .map(|(n, t)| (n.to_string(), t.frobenius_norm()))
        .collect()
}

/// Whether the final average cosine similarity of `H` exceeds the threshold.
pub fn detect_collapse(report: &RunReport, sim_threshold: f64) -> Result<bool> {
    let sim = report
        .final_metrics
        .as_ref()
        .map(|m| m.sim_h)
        .ok_or_else(|| Error::Data("run report has no final metrics".into()))?;
    Ok(sim > sim_threshold)
}
