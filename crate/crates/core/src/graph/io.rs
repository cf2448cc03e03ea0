use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EdgeKind, GraphConfig, MapEdge, MapGraph, MapNode};
use crate::error::{HopmapError, Result};
use crate::ingest::FrameMeta;

pub const GRAPH_FORMAT: &str = "hopmap-graph/1";

#[derive(Serialize, Deserialize)]
struct MapFile {
    format: String,
    config: GraphConfig,
    frames: Vec<FrameMeta>,
    nodes: Vec<MapNode>,
    edges: Vec<MapEdge>,
}

pub fn map_to_json(g: &MapGraph) -> Result<String> {
    let file = MapFile {
        format: GRAPH_FORMAT.to_string(),
        config: g.config.clone(),
        frames: g.frames.clone(),
        nodes: g.nodes.clone(),
        edges: g.edges.clone(),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn map_from_json(text: &str) -> Result<MapGraph> {
    let file: MapFile = serde_json::from_str(text)?;
    if file.format != GRAPH_FORMAT {
        return Err(HopmapError::Format {
            found: file.format,
            expected: GRAPH_FORMAT,
        });
    }
    file.config.validate()?;
    MapGraph::from_parts(file.nodes, file.edges, file.frames, file.config)
}

pub fn save_map(g: &MapGraph, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, map_to_json(g)?)?;
    Ok(())
}

pub fn load_map(path: impl AsRef<Path>) -> Result<MapGraph> {
    map_from_json(&fs::read_to_string(path)?)
}

/// Graphviz rendering: one statement per node (labelled frame/segment,
/// clustered by frame), intra edges dashed, inter edges solid. Nodes in
/// `highlight` are filled.
pub fn map_to_dot(g: &MapGraph, highlight: &[usize]) -> String {
    let mut out = String::from("graph hopmap {\n  node [shape=ellipse fontsize=10];\n");
    for n in &g.nodes {
        let fill = if highlight.contains(&n.node_id) {
            " style=filled fillcolor=gold"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "  n{} [label=\"f{}:s{}\" pos=\"{:.1},{:.1}\"{fill}];",
            n.node_id, n.frame_id, n.segment_id, n.centroid_x, -n.centroid_y
        );
    }
    for e in &g.edges {
        let style = match e.kind {
            EdgeKind::Intra => "dashed",
            EdgeKind::Inter => "solid",
        };
        let _ = writeln!(
            out,
            "  n{} -- n{} [style={style} label=\"{:.2}\"];",
            e.a, e.b, e.similarity
        );
    }
    out.push_str("}\n");
    out
}
