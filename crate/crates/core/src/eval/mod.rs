//! Frozen-representation evaluation, paired significance testing and
//! ablation-table assembly.

mod ablation;
mod probe;
mod wilcoxon;

pub use ablation::{
    build_ablation, AblationCell, AblationRow, AblationTable, RunRecord, TableSpec,
};
pub use probe::{
    cross_validated_probe, linear_probe, ProbeConfig, ProbeLoss, ProbeResult, L2_GRID,
};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult, EXACT_MAX_N};
