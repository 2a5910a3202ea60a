//! A desk-scale laboratory for graph contrastive learning.
//!
//! The crate bundles everything needed to train GRACE-style (node level) and
//! GraphCL-style (graph level) contrastive encoders from scratch and to probe
//! how the encoder architecture interacts with the objective:
//!
//! * [`numkit`]: dense/sparse tensors, tape autodiff, Adam, Jacobi eigensolver
//! * [`graph`]: graphs, normalized adjacency, neighbor pair distribution, data
//! * [`augment`]: stochastic view generation
//! * [`models`]: GCN / GIN / MLP encoders, ContraNorm, projection head, readout
//! * [`losses`]: InfoNCE and its alignment/uniformity halves, neighbor-induced losses
//! * [`trainer`]: training loops and multi-seed execution
//! * [`diagnostics`]: similarity, spectra, collapse detection, update-equivalence verifiers
//! * [`eval`]: linear probes, Wilcoxon signed-rank test, ablation tables

pub mod augment;
pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod graph;
pub mod losses;
pub mod models;
pub mod numkit;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
