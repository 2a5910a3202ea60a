use std::collections::BTreeMap;
use std::path::Path;

use gcllab::diagnostics::{
    avg_pairwise_cosine, singular_spectrum, weight_norms, DEFAULT_RANK_THRESHOLD,
};
use gcllab::graph::{batch_graphs, load_native, Dataset};
use gcllab::models::{embed, project, readout, Checkpoint, GraphContext, ReadoutMode};
use gcllab::numkit::{Tape, Tensor};
use serde::Serialize;

use crate::error::{require_file, CliError};
use crate::output::{write_json, write_text};

#[derive(Debug, Serialize)]
pub struct Metrics {
    pub rows: usize,
    pub dim_h: usize,
    pub dim_z: usize,
    pub sim_h: f64,
    pub sim_z: f64,
    pub rank_h: usize,
    pub rank_z: usize,
    pub rank_threshold: f64,
    pub weight_norms: BTreeMap<String, f64>,
}

/// Node-level `H` for a single graph; pooled `H` for a collection. `Z` is the
/// head applied to that `H`.
fn representations(
    ck: &Checkpoint,
    data: &Dataset,
    mode: ReadoutMode,
) -> Result<(Tensor, Tensor), CliError> {
    let params = ck.params()?;
    let h = match data {
        Dataset::Single(g) => embed(&ck.encoder, &params, &GraphContext::new(g)?, g.features())?,
        Dataset::Collection(gs) => {
            let batch = batch_graphs(gs)?;
            let nodes = embed(
                &ck.encoder,
                &params,
                &GraphContext::from_adjacency(batch.adjacency.clone())?,
                &batch.features,
            )?;
            let tape = Tape::new();
            readout(tape.constant(nodes), &batch, mode)?.value()
        }
    };
    if h.cols() == 0 || h.rows() == 0 {
        return Err(CliError::Runtime("empty representation".into()));
    }
    let z = project(&ck.projection, &params, &h)?;
    Ok((h, z))
}

pub fn run(
    checkpoint: &Path,
    dataset: &Path,
    out: &Path,
    mode: ReadoutMode,
) -> Result<(), CliError> {
    let ck = Checkpoint::load(&require_file(checkpoint)?)?;
    let data = load_native(&require_file(dataset)?)?;
    let input_dim = match &data {
        Dataset::Single(g) => g.feature_dim(),
        Dataset::Collection(gs) => batch_graphs(gs)?.features.cols(),
    };
    if input_dim != ck.input_dim {
        return Err(CliError::Usage(format!(
            "checkpoint expects {} input features, dataset has {input_dim}",
            ck.input_dim
        )));
    }
    let (h, z) = representations(&ck, &data, mode)?;
    let spec_h = singular_spectrum(&h, DEFAULT_RANK_THRESHOLD)?;
    let spec_z = singular_spectrum(&z, DEFAULT_RANK_THRESHOLD)?;
    let metrics = Metrics {
        rows: h.rows(),
        dim_h: h.cols(),
        dim_z: z.cols(),
        sim_h: avg_pairwise_cosine(&h)?,
        sim_z: avg_pairwise_cosine(&z)?,
        rank_h: spec_h.effective_rank,
        rank_z: spec_z.effective_rank,
        rank_threshold: DEFAULT_RANK_THRESHOLD,
        weight_norms: weight_norms(&ck.params()?),
    };
    std::fs::create_dir_all(out).map_err(|e| CliError::write(out, e))?;
    write_json(&out.join("metrics.json"), &metrics)?;
    write_text(&out.join("spectrum_h.csv"), &spec_h.to_csv())?;
    write_text(&out.join("spectrum_z.csv"), &spec_z.to_csv())?;
    println!(
        "sim_h={:.4} sim_z={:.4} rank_h={} rank_z={}",
        metrics.sim_h, metrics.sim_z, metrics.rank_h, metrics.rank_z
    );
    Ok(())
}
