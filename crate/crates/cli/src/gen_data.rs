use std::path::PathBuf;

use clap::Args;
use gcllab::graph::{
    edge_homophily, generate_graph_set, generate_sbm, save_native, save_native_collection,
    GraphSetParams, SbmParams,
};

use crate::error::CliError;
use crate::DataKind;

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[arg(long, value_enum, default_value = "sbm")]
    pub kind: DataKind,
    /// Nodes (sbm).
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.1)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    pub p_out: f64,
    /// Feature noise standard deviation (sbm).
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 32)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 200)]
    pub num_graphs: usize,
    #[arg(long, default_value_t = 12)]
    pub min_nodes: usize,
    #[arg(long, default_value_t = 24)]
    pub max_nodes: usize,
    #[arg(long, default_value_t = 8)]
    pub node_types: usize,
    #[arg(long, default_value_t = 1.0)]
    pub type_bias: f64,
    /// Spread of per-graph log type weights (graphs).
    #[arg(long, default_value_t = 2.0)]
    pub composition_spread: f64,
    /// Keep raw one-hot node types instead of zero-sum rows (graphs).
    #[arg(long)]
    pub uncentered: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &GenDataArgs) -> Result<(), CliError> {
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::write(parent, e))?;
    }
    match args.kind {
        DataKind::Sbm => {
            let params = SbmParams {
                n: args.n,
                num_classes: args.classes,
                p_in: args.p_in,
                p_out: args.p_out,
                feature_dim: args.feature_dim,
                feature_noise: args.noise,
            };
            let g = generate_sbm(&params, args.seed)?;
            save_native(&g, &args.out)?;
            let h = edge_homophily(&g).map_or("n/a".to_string(), |h| format!("{h:.4}"));
            println!(
                "nodes={} edges={} homophily={h}",
                g.num_nodes(),
                g.num_edges()
            );
        }
        DataKind::Graphs => {
            let params = GraphSetParams {
                num_graphs: args.num_graphs,
                min_nodes: args.min_nodes,
                max_nodes: args.max_nodes,
                num_node_types: args.node_types,
                type_bias: args.type_bias,
                composition_spread: args.composition_spread,
                centered: !args.uncentered,
            };
            let graphs = generate_graph_set(&params, args.seed)?;
            save_native_collection(&graphs, &args.out)?;
            let nodes: usize = graphs.iter().map(|g| g.num_nodes()).sum();
            let edges: usize = graphs.iter().map(|g| g.num_edges()).sum();
            println!("graphs={} nodes={nodes} edges={edges}", graphs.len());
        }
    }
    Ok(())
}
