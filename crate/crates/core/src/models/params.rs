use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::spec::{EncoderKind, EncoderSpec, ProjectionSpec};
use crate::error::{Error, Result};
use crate::numkit::{Gradients, Tape, Tensor, Var};
use crate::rng;

/// Ordered, named parameter tensors of an encoder and its head.
///
/// Encoder entries are prefixed `encoder.` and head entries `head.`, so the
/// two sets are disjoint by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ModelParams {
    pub fn from_named(entries: Vec<(String, Tensor)>) -> Self {
        let (names, tensors) = entries.into_iter().unzip();
        Self { names, tensors }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Registers every tensor as a trainable leaf.
    pub fn bind<'t>(&self, tape: &'t Tape) -> BoundParams<'t> {
        BoundParams {
            names: self.names.clone(),
            vars: self.tensors.iter().map(|t| tape.param(t.clone())).collect(),
        }
    }

    /// Registers every tensor as a constant (no gradients).
    pub fn bind_frozen<'t>(&self, tape: &'t Tape) -> BoundParams<'t> {
        BoundParams {
            names: self.names.clone(),
            vars: self
                .tensors
                .iter()
                .map(|t| tape.constant(t.clone()))
                .collect(),
        }
    }
}

/// Parameters registered on a tape, addressable by name.
#[derive(Clone, Debug)]
pub struct BoundParams<'t> {
    names: Vec<String>,
    vars: Vec<Var<'t>>,
}

impl<'t> BoundParams<'t> {
    /// Pairs parameter names with handles registered elsewhere, e.g. by
    /// [`grad_check`](crate::numkit::grad_check).
    pub fn from_vars(names: &[String], vars: &[Var<'t>]) -> Result<Self> {
        if names.len() != vars.len() {
            return Err(Error::Config(format!(
                "{} names for {} handles",
                names.len(),
                vars.len()
            )));
        }
        Ok(Self {
            names: names.to_vec(),
            vars: vars.to_vec(),
        })
    }

    pub fn get(&self, name: &str) -> Result<Var<'t>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.vars[i])
            .ok_or_else(|| Error::Config(format!("missing parameter {name}")))
    }

    pub fn vars(&self) -> &[Var<'t>] {
        &self.vars
    }

    /// Gradients in parameter order.
    pub fn gradients(&self, grads: &Gradients) -> Vec<Tensor> {
        self.vars.iter().map(|&v| grads.wrt(v)).collect()
    }
}

/// Glorot-uniform half-width `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn glorot(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let b = glorot_bound(fan_in, fan_out);
    Tensor::from_fn(fan_in, fan_out, |_, _| rng.random_range(-b..=b))
}

/// Expected `(name, shape)` layout for a model.
fn layout(
    encoder: &EncoderSpec,
    projection: &ProjectionSpec,
    input_dim: usize,
) -> Vec<(String, (usize, usize))> {
    let mut out = Vec::new();
    for (l, (fi, fo)) in encoder.layer_dims(input_dim).into_iter().enumerate() {
        match encoder.kind {
            EncoderKind::Gcn | EncoderKind::Mlp => out.push((format!("encoder.W{l}"), (fi, fo))),
            EncoderKind::Gin => {
                out.push((format!("encoder.layer{l}.W1"), (fi, fo)));
                out.push((format!("encoder.layer{l}.W2"), (fo, fo)));
                out.push((format!("encoder.layer{l}.eps"), (1, 1)));
            }
        }
    }
    if projection.enabled {
        out.push((
            "head.W1".into(),
            (encoder.output_dim, projection.hidden_dim),
        ));
        out.push((
            "head.W2".into(),
            (projection.hidden_dim, projection.out_dim),
        ));
    }
    out
}

/// Glorot-uniform weights, GIN `eps` at zero. No biases are used anywhere.
pub fn init_params(
    encoder: &EncoderSpec,
    projection: &ProjectionSpec,
    input_dim: usize,
    seed: u64,
) -> Result<ModelParams> {
    encoder.validate()?;
    projection.validate()?;
    if input_dim == 0 {
        return Err(Error::Config("input_dim must be >= 1".into()));
    }
    let mut r = rng::seeded(seed);
    let entries = layout(encoder, projection, input_dim)
        .into_iter()
        .map(|(name, (fi, fo))| {
            let t = if name.ends_with(".eps") {
                Tensor::zeros(1, 1)
            } else {
                glorot(fi, fo, &mut r)
            };
            (name, t)
        })
        .collect();
    Ok(ModelParams::from_named(entries))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

/// Serialized model: architecture plus a flat ordered parameter list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub encoder: EncoderSpec,
    pub projection: ProjectionSpec,
    pub input_dim: usize,
    pub params: Vec<ParamRecord>,
}

impl Checkpoint {
    pub fn new(
        encoder: &EncoderSpec,
        projection: &ProjectionSpec,
        input_dim: usize,
        params: &ModelParams,
    ) -> Self {
        let params = params
            .iter()
            .map(|(name, t)| ParamRecord {
                name: name.to_string(),
                shape: [t.rows(), t.cols()],
                values: t.as_slice().to_vec(),
            })
            .collect();
        Self {
            encoder: encoder.clone(),
            projection: *projection,
            input_dim,
            params,
        }
    }

    /// Rebuilds the parameters, checking names and shapes against the
    /// architecture.
    pub fn params(&self) -> Result<ModelParams> {
        let expected = layout(&self.encoder, &self.projection, self.input_dim);
        if expected.len() != self.params.len() {
            return Err(Error::Data(format!(
                "checkpoint has {} tensors, architecture needs {}",
                self.params.len(),
                expected.len()
            )));
        }
        let entries = expected
            .into_iter()
            .zip(&self.params)
            .map(|((name, (r, c)), rec)| {
                if rec.name != name || rec.shape != [r, c] {
                    return Err(Error::Data(format!(
                        "checkpoint entry {} {:?} does not match expected {name} [{r}, {c}]",
                        rec.name, rec.shape
                    )));
                }
                Ok((name, Tensor::from_vec(r, c, rec.values.clone())?))
            })
            .collect::<Result<_>>()?;
        Ok(ModelParams::from_named(entries))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
