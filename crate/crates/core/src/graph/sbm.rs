use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::model::{Graph, Labels};
use crate::error::{Error, Result};
use crate::numkit::{dot, Tensor};
use crate::rng;

/// Stochastic block model with Gaussian class-mean features.
///
/// `p_in < p_out` is allowed and yields a heterophilic graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbmParams {
    pub n: usize,
    pub num_classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub feature_noise: f64,
}

impl SbmParams {
    fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.n < self.num_classes {
            return Err(Error::Config(format!(
                "need n >= num_classes >= 1, got n={} classes={}",
                self.n, self.num_classes
            )));
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name}={p} is not a probability")));
            }
        }
        if self.feature_dim < self.num_classes {
            return Err(Error::Config(format!(
                "feature_dim {} cannot hold {} orthogonal class means",
                self.feature_dim, self.num_classes
            )));
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return Err(Error::Config(format!(
                "feature_noise={} must be finite and >= 0",
                self.feature_noise
            )));
        }
        Ok(())
    }
}

/// Samples an SBM graph. Node `i` belongs to class `i % num_classes`, so
/// class sizes differ by at most one.
pub fn generate_sbm(params: &SbmParams, seed: u64) -> Result<Graph> {
    params.validate()?;
    let SbmParams {
        n,
        num_classes: k,
        p_in,
        p_out,
        feature_dim: h,
        feature_noise,
    } = *params;
    let mut root = rng::seeded(seed);
    let mut edge_rng = rng::split(&mut root);
    let mut mean_rng = rng::split(&mut root);
    let mut noise_rng = rng::split(&mut root);

    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] { p_in } else { p_out };
            if edge_rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }

    let means = orthonormal_rows(k, h, &mut mean_rng);
    let noise = Normal::new(0.0, feature_noise).map_err(|e| Error::Config(e.to_string()))?;
    let features = Tensor::from_fn(n, h, |i, j| {
        means[labels[i]][j] + noise.sample(&mut noise_rng)
    });

    let name = format!("sbm-n{n}-k{k}");
    Graph::from_edges(name, n, &edges, features, Some(Labels::Node(labels)))
}

/// `k` random orthonormal vectors in `R^h` (Gram-Schmidt on Gaussian draws).
fn orthonormal_rows(k: usize, h: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v: Vec<f64> = (0..h).map(|_| StandardNormal.sample(rng)).collect();
        for b in &basis {
            let proj = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-6 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}
