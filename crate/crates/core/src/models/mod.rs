//! Encoders, the ContraNorm layer, the projection head and graph readout.
//!
//! Forward passes run on a [`Tape`](crate::numkit::Tape) so the same code
//! serves training (parameters bound as trainable leaves) and evaluation
//! (parameters bound as constants).

mod layers;
mod params;
mod spec;

pub use layers::{
    contranorm, embed, encode, gcn_forward, gin_forward, mlp_forward, project, projection_forward,
    readout, GraphContext,
};
pub use params::{glorot_bound, init_params, BoundParams, Checkpoint, ModelParams, ParamRecord};
pub use spec::{
    Activation, ContraNormSpec, DegreeMode, EncoderKind, EncoderSpec, ProjectionSpec, ReadoutMode,
};
