use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Gcn,
    Gin,
    Mlp,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

/// Which diagonal weights scale the ContraNorm correction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeMode {
    /// `P(x)`, the marginal of the neighbor pair distribution.
    #[default]
    PairMarginal,
    /// `1/n` for every node.
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContraNormSpec {
    pub alpha: f64,
    #[serde(default)]
    pub degree_mode: DegreeMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contranorm: Option<ContraNormSpec>,
}

impl EncoderSpec {
    pub fn new(kind: EncoderKind, num_layers: usize, hidden_dim: usize, output_dim: usize) -> Self {
        Self {
            kind,
            num_layers,
            hidden_dim,
            output_dim,
            activation: Activation::Relu,
            contranorm: None,
        }
    }

    pub fn with_contranorm(mut self, alpha: f64, degree_mode: DegreeMode) -> Self {
        self.contranorm = Some(ContraNormSpec { alpha, degree_mode });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config("encoder layers and dims must be >= 1".into()));
        }
        if let Some(cn) = self.contranorm {
            if !(cn.alpha >= 0.0 && cn.alpha.is_finite()) {
                return Err(Error::Config(format!(
                    "contranorm alpha {} must be finite and >= 0",
                    cn.alpha
                )));
            }
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of each layer given the input width.
    pub fn layer_dims(&self, input_dim: usize) -> Vec<(usize, usize)> {
        (0..self.num_layers)
            .map(|l| {
                let fan_in = if l == 0 { input_dim } else { self.hidden_dim };
                let fan_out = if l + 1 == self.num_layers {
                    self.output_dim
                } else {
                    self.hidden_dim
                };
                (fan_in, fan_out)
            })
            .collect()
    }
}

/// Two-layer MLP head `g`; the identity when disabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionSpec {
    pub enabled: bool,
    #[serde(default)]
    pub hidden_dim: usize,
    #[serde(default)]
    pub out_dim: usize,
}

impl ProjectionSpec {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            hidden_dim: 0,
            out_dim: 0,
        }
    }

    pub fn mlp(hidden_dim: usize, out_dim: usize) -> Self {
        Self {
            enabled: true,
            hidden_dim,
            out_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled && (self.hidden_dim == 0 || self.out_dim == 0) {
            return Err(Error::Config(
                "enabled projection head needs hidden_dim and out_dim >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutMode {
    #[default]
    Sum,
    Mean,
}
