//! Representation-geometry measurements and the numerical certificates for
//! the loss/architecture equivalences.

mod geometry;
mod verify;

pub use geometry::{
    avg_pairwise_cosine, detect_collapse, singular_spectrum, weight_norms, SpectrumReport,
    DEFAULT_COLLAPSE_THRESHOLD, DEFAULT_RANK_THRESHOLD,
};
pub use verify::{
    verify_theorem1, verify_theorem2, verify_theorem3, Theorem2Mode, VerifierResult,
    COSINE_AGREEMENT, EXACT_TOLERANCE,
};
