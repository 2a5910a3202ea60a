//! Graph data model, adjacency normalization, the neighbor pair
//! distribution, dataset generation and ingestion, splits and batching.

mod adjacency;
mod batch;
mod io;
mod model;
mod sbm;
mod split;
mod synthetic;

pub use adjacency::{
    normalize_adjacency, normalize_sparse, pair_distribution, NormalizedAdjacency, PairDistribution,
};
pub use batch::{batch_graphs, GraphBatch};
pub use io::{
    load_content_cites, load_native, save_native, save_native_collection, CitesReport, Dataset,
    NativeGraph,
};
pub use model::{edge_homophily, Graph, Labels};
pub use sbm::{generate_sbm, SbmParams};
pub use split::{random_split, Split};
pub use synthetic::{generate_graph_set, GraphSetParams};
