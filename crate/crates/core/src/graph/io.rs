//! Dataset files: the whitespace-separated content/cites pair used by the
//! Planetoid citation corpora, and a native JSON document.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Graph, Labels};
use crate::error::{Error, Result};
use crate::numkit::Tensor;

/// Counts of cites lines that did not become edges.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CitesReport {
    pub unknown_ids: usize,
    pub self_citations: usize,
    pub duplicates: usize,
}

/// Loads `content` lines (`id f_1 .. f_h label`) and `cites` lines
/// (`citing cited`). Label strings map to dense ids in first-seen order.
pub fn load_content_cites(content_path: &Path, cites_path: &Path) -> Result<(Graph, CitesReport)> {
    let content = fs::read_to_string(content_path).map_err(|e| Error::io(content_path, e))?;
    let cites = fs::read_to_string(cites_path).map_err(|e| Error::io(cites_path, e))?;
    let parse_err = |path: &Path, line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (ln, line) in content.lines().enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() < 2 {
            return Err(parse_err(
                content_path,
                ln + 1,
                "expected an id, features and a label".into(),
            ));
        }
        let h = toks.len() - 2;
        if *width.get_or_insert(h) != h {
            return Err(parse_err(
                content_path,
                ln + 1,
                format!("{h} feature fields, earlier lines had {}", width.unwrap()),
            ));
        }
        let feats = toks[1..=h]
            .iter()
            .map(|t| {
                t.parse::<f64>().map_err(|_| {
                    parse_err(content_path, ln + 1, format!("bad feature value {t:?}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if index.insert(toks[0].to_string(), rows.len()).is_some() {
            return Err(parse_err(
                content_path,
                ln + 1,
                format!("duplicate node id {:?}", toks[0]),
            ));
        }
        let next = label_ids.len();
        labels.push(*label_ids.entry(toks[h + 1].to_string()).or_insert(next));
        rows.push(feats);
    }
    if rows.is_empty() {
        return Err(Error::Data(format!(
            "{} has no nodes",
            content_path.display()
        )));
    }

    let mut report = CitesReport::default();
    let mut edges = BTreeSet::new();
    for (ln, line) in cites.lines().enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 2 {
            return Err(parse_err(
                cites_path,
                ln + 1,
                format!("expected 2 ids, found {}", toks.len()),
            ));
        }
        let (Some(&a), Some(&b)) = (index.get(toks[0]), index.get(toks[1])) else {
            report.unknown_ids += 1;
            continue;
        };
        if a == b {
            report.self_citations += 1;
        } else if !edges.insert((a.min(b), a.max(b))) {
            report.duplicates += 1;
        }
    }
    let n = rows.len();
    let edges: Vec<_> = edges.into_iter().collect();
    let name = content_path.file_stem().map_or_else(
        || "content".to_string(),
        |s| s.to_string_lossy().into_owned(),
    );
    let g = Graph::from_edges(
        name,
        n,
        &edges,
        Tensor::from_rows(&rows)?,
        Some(Labels::Node(labels)),
    )?;
    Ok((g, report))
}

/// One graph in the native JSON format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NativeGraph {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub features: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NativeCollection {
    graphs: Vec<NativeGraph>,
}

impl From<&Graph> for NativeGraph {
    fn from(g: &Graph) -> Self {
        NativeGraph {
            name: Some(g.name().to_string()),
            n: g.num_nodes(),
            edges: g.edges().into_iter().map(|(a, b)| [a, b]).collect(),
            features: g.features().to_rows(),
            labels: g.node_labels().map(<[usize]>::to_vec),
            label: g.graph_label(),
        }
    }
}

impl TryFrom<NativeGraph> for Graph {
    type Error = Error;

    fn try_from(doc: NativeGraph) -> Result<Graph> {
        let features = if doc.features.is_empty() {
            Tensor::zeros(doc.n, 0)
        } else {
            Tensor::from_rows(&doc.features)?
        };
        let labels = match (doc.labels, doc.label) {
            (Some(_), Some(_)) => {
                return Err(Error::Data(
                    "both node labels and a graph label given".into(),
                ))
            }
            (Some(l), None) => Some(Labels::Node(l)),
            (None, Some(l)) => Some(Labels::Graph(l)),
            (None, None) => None,
        };
        let edges: Vec<_> = doc.edges.iter().map(|&[a, b]| (a, b)).collect();
        Graph::from_edges(
            doc.name.unwrap_or_else(|| "graph".into()),
            doc.n,
            &edges,
            features,
            labels,
        )
    }
}

/// A native dataset file holds either one graph or `{"graphs": [...]}`.
#[derive(Clone, Debug)]
pub enum Dataset {
    Single(Graph),
    Collection(Vec<Graph>),
}

pub fn load_native(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("graphs").is_some() {
        let doc: NativeCollection = serde_json::from_value(value)?;
        let graphs = doc
            .graphs
            .into_iter()
            .map(Graph::try_from)
            .collect::<Result<Vec<_>>>()?;
        if graphs.is_empty() {
            return Err(Error::Data(format!(
                "{} contains no graphs",
                path.display()
            )));
        }
        Ok(Dataset::Collection(graphs))
    } else {
        let doc: NativeGraph = serde_json::from_value(value)?;
        Ok(Dataset::Single(Graph::try_from(doc)?))
    }
}

pub fn save_native(g: &Graph, path: &Path) -> Result<()> {
    write_json(path, &NativeGraph::from(g))
}

pub fn save_native_collection(graphs: &[Graph], path: &Path) -> Result<()> {
    write_json(
        path,
        &NativeCollection {
            graphs: graphs.iter().map(NativeGraph::from).collect(),
        },
    )
}

fn write_json<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    let mut text = serde_json::to_string(doc)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
