//! The segment map: nodes from segment records, intra-image edges over
//! centroids, inter-image edges from descriptor association, and multi-layer
//! neighbourhood averaging of node descriptors.

pub mod delaunay;
mod io;

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{HopmapError, Result};
use crate::ingest::{FrameMeta, FrameSet, SegmentRecord};
use crate::vector::{argmax_dot, dot, normalize};

pub use io::{load_map, map_from_json, map_to_dot, map_to_json, save_map, GRAPH_FORMAT};

pub const DEFAULT_THETA: f64 = 0.7;
pub const DEFAULT_L_MAX: usize = 2;
pub const DEFAULT_WINDOW: [usize; 3] = [1, 2, 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Intra,
    Inter,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntraMode {
    #[default]
    Delaunay,
    Complete,
}

impl std::str::FromStr for IntraMode {
    type Err = HopmapError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delaunay" | "dt" => Ok(IntraMode::Delaunay),
            "complete" | "all" => Ok(IntraMode::Complete),
            _ => Err(HopmapError::Config(format!("unknown intra mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    /// Inter-edge similarity threshold.
    pub theta: f64,
    /// Frame gaps searched for inter-image matches.
    pub window: Vec<usize>,
    pub intra_mode: IntraMode,
    pub l_max: usize,
    pub renormalize_layers: bool,
    /// Treat the frame after the last one as frame 0.
    pub pano_wrap: bool,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            theta: DEFAULT_THETA,
            window: DEFAULT_WINDOW.to_vec(),
            intra_mode: IntraMode::Delaunay,
            l_max: DEFAULT_L_MAX,
            renormalize_layers: true,
            pano_wrap: false,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if self.theta.is_nan() {
            return Err(HopmapError::Config("theta is NaN".into()));
        }
        if self.window.is_empty() || self.window.contains(&0) {
            return Err(HopmapError::Config(
                "window must be a nonempty set of positive frame gaps".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapNode {
    pub node_id: usize,
    pub frame_id: usize,
    pub segment_id: usize,
    pub centroid_x: f64,
    pub centroid_y: f64,
    pub area_px: f64,
    pub bbox: [f64; 4],
    /// Descriptor per aggregation layer; layer 0 is the ingested descriptor.
    pub descriptors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semantic_vector: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_instance: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_category: Option<i64>,
}

impl MapNode {
    pub fn from_record(node_id: usize, r: &SegmentRecord) -> Self {
        MapNode {
            node_id,
            frame_id: r.frame_id,
            segment_id: r.segment_id,
            centroid_x: r.centroid_x,
            centroid_y: r.centroid_y,
            area_px: r.area_px,
            bbox: r.bbox,
            descriptors: vec![r.descriptor.clone()],
            semantic_vector: r.semantic_vector.clone(),
            gt_instance: r.gt_instance,
            gt_category: r.gt_category,
        }
    }

    pub fn descriptor(&self, layer: usize) -> &[f64] {
        &self.descriptors[layer]
    }

    pub fn centroid(&self) -> (f64, f64) {
        (self.centroid_x, self.centroid_y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapEdge {
    pub a: usize,
    pub b: usize,
    pub kind: EdgeKind,
    /// Descriptor similarity for inter edges, 1 for intra edges.
    pub similarity: f64,
}

impl MapEdge {
    pub fn new(a: usize, b: usize, kind: EdgeKind, similarity: f64) -> Self {
        MapEdge {
            a: a.min(b),
            b: a.max(b),
            kind,
            similarity,
        }
    }

    pub fn intra(a: usize, b: usize) -> Self {
        MapEdge::new(a, b, EdgeKind::Intra, 1.0)
    }

    pub fn key(&self) -> (usize, usize) {
        (self.a, self.b)
    }

    pub fn other(&self, n: usize) -> usize {
        if n == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Undirected topological map over image segments.
#[derive(Clone, Debug, PartialEq)]
pub struct MapGraph {
    pub nodes: Vec<MapNode>,
    pub edges: Vec<MapEdge>,
    pub frames: Vec<FrameMeta>,
    pub config: GraphConfig,
    adjacency: Vec<Vec<usize>>,
    frame_ranges: Vec<Range<usize>>,
}

impl MapGraph {
    /// Assembles a graph from parts. Nodes must be numbered `0..n` and
    /// grouped by frame in frame order.
    pub fn from_parts(
        nodes: Vec<MapNode>,
        edges: Vec<MapEdge>,
        frames: Vec<FrameMeta>,
        config: GraphConfig,
    ) -> Result<Self> {
        let mut frame_ranges = vec![0..0; frames.len()];
        for (i, n) in nodes.iter().enumerate() {
            if n.node_id != i {
                return Err(HopmapError::Validation(format!(
                    "node at position {i} has id {}",
                    n.node_id
                )));
            }
            let Some(r) = frame_ranges.get_mut(n.frame_id) else {
                return Err(HopmapError::Validation(format!(
                    "node {i} references unknown frame {}",
                    n.frame_id
                )));
            };
            if r.start == r.end {
                *r = i..i + 1;
            } else if r.end == i {
                r.end = i + 1;
            } else {
                return Err(HopmapError::Validation(format!(
                    "nodes of frame {} are not contiguous",
                    n.frame_id
                )));
            }
        }
        for e in &edges {
            if e.a == e.b || e.b >= nodes.len() {
                return Err(HopmapError::Validation(format!(
                    "edge ({}, {}) is invalid",
                    e.a, e.b
                )));
            }
        }
        let adjacency = adjacency_lists(nodes.len(), &edges);
        Ok(MapGraph {
            nodes,
            edges,
            frames,
            config,
            adjacency,
            frame_ranges,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    /// Sorted neighbour ids of `node`, both edge kinds.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn frame_nodes(&self, frame: usize) -> &[MapNode] {
        &self.nodes[self.frame_ranges[frame].clone()]
    }

    pub fn frame_range(&self, frame: usize) -> Range<usize> {
        self.frame_ranges[frame].clone()
    }

    /// Nodes grouped per frame.
    pub fn frames_as_nodes(&self) -> Vec<&[MapNode]> {
        (0..self.num_frames())
            .map(|t| self.frame_nodes(t))
            .collect()
    }

    pub fn count_edges(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    pub fn num_layers(&self) -> usize {
        self.nodes.first().map_or(0, |n| n.descriptors.len())
    }

    pub fn num_components(&self) -> usize {
        count_components(self.nodes.len(), self.edges.iter().map(MapEdge::key))
    }

    /// Replaces the edge set and rebuilds the adjacency lists.
    pub fn set_edges(&mut self, edges: Vec<MapEdge>) {
        self.adjacency = adjacency_lists(self.nodes.len(), &edges);
        self.edges = edges;
    }
}

fn adjacency_lists(n: usize, edges: &[MapEdge]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.a].push(e.b);
        adj[e.b].push(e.a);
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Number of connected components, via union-find.
pub fn count_components(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
            components -= 1;
        }
    }
    components
}

fn check_same_frame(nodes: &[MapNode]) {
    debug_assert!(nodes.windows(2).all(|w| w[0].frame_id == w[1].frame_id));
}

/// Delaunay edges over the centroids of one frame's nodes.
pub fn build_intra_edges_delaunay(nodes_of_frame: &[MapNode]) -> Vec<MapEdge> {
    check_same_frame(nodes_of_frame);
    let pts: Vec<(f64, f64)> = nodes_of_frame.iter().map(MapNode::centroid).collect();
    let ids: Vec<usize> = nodes_of_frame.iter().map(|n| n.segment_id).collect();
    delaunay::triangulate(&pts, &ids)
        .edges
        .into_iter()
        .map(|(i, j)| MapEdge::intra(nodes_of_frame[i].node_id, nodes_of_frame[j].node_id))
        .collect()
}

/// All pairs of one frame's nodes.
pub fn build_intra_edges_complete(nodes_of_frame: &[MapNode]) -> Vec<MapEdge> {
    check_same_frame(nodes_of_frame);
    let mut out =
        Vec::with_capacity(nodes_of_frame.len() * nodes_of_frame.len().saturating_sub(1) / 2);
    for (i, a) in nodes_of_frame.iter().enumerate() {
        for b in &nodes_of_frame[i + 1..] {
            out.push(MapEdge::intra(a.node_id, b.node_id));
        }
    }
    out
}

pub fn build_intra_edges(nodes_of_frame: &[MapNode], mode: IntraMode) -> Vec<MapEdge> {
    match mode {
        IntraMode::Delaunay => build_intra_edges_delaunay(nodes_of_frame),
        IntraMode::Complete => build_intra_edges_complete(nodes_of_frame),
    }
}

/// Target frame `gap` frames after `t`, if it exists.
fn frame_after(t: usize, gap: usize, n: usize, pano_wrap: bool) -> Option<usize> {
    let raw = t + gap;
    let target = if raw < n {
        raw
    } else if pano_wrap {
        raw % n
    } else {
        return None;
    };
    (target != t).then_some(target)
}

/// Inter-image association edges with the consecutive-frame fallback.
///
/// For every node and every gap in the window, the best-matching node of
/// the later frame is linked when the dot product of layer-0 descriptors
/// exceeds `cfg.theta`. Consecutive frames left without any edge between
/// them get their single most similar pair linked.
pub fn build_inter_edges(frames: &[&[MapNode]], cfg: &GraphConfig) -> Result<Vec<MapEdge>> {
    inter_edges(frames, &cfg.window, cfg.pano_wrap, cfg.theta, true)
}

pub(crate) fn inter_edges(
    frames: &[&[MapNode]],
    window: &[usize],
    pano_wrap: bool,
    theta: f64,
    fallback: bool,
) -> Result<Vec<MapEdge>> {
    if let Some(t) = frames.iter().position(|f| f.is_empty()) {
        return Err(HopmapError::EmptyFrame { frame_id: t });
    }
    let n = frames.len();
    let mut edges: BTreeMap<(usize, usize), MapEdge> = BTreeMap::new();
    fn insert(edges: &mut BTreeMap<(usize, usize), MapEdge>, e: MapEdge) {
        edges
            .entry(e.key())
            .and_modify(|old| old.similarity = old.similarity.max(e.similarity))
            .or_insert(e);
    }
    for (t, src) in frames.iter().enumerate() {
        for &gap in window {
            let Some(t2) = frame_after(t, gap, n, pano_wrap) else {
                continue;
            };
            let dst = frames[t2];
            for node in src.iter() {
                let (j, s) = argmax_dot(node.descriptor(0), dst.iter().map(|m| m.descriptor(0)))
                    .expect("frames are nonempty");
                if s > theta {
                    insert(
                        &mut edges,
                        MapEdge::new(node.node_id, dst[j].node_id, EdgeKind::Inter, s),
                    );
                }
            }
        }
    }

    if fallback {
        let frame_of: BTreeMap<usize, usize> = frames
            .iter()
            .flat_map(|f| f.iter().map(|m| (m.node_id, m.frame_id)))
            .collect();
        let linked: BTreeSet<(usize, usize)> = edges
            .keys()
            .map(|(a, b)| {
                let (fa, fb) = (frame_of[a], frame_of[b]);
                (fa.min(fb), fa.max(fb))
            })
            .collect();
        for t in 0..n {
            let Some(t2) = frame_after(t, 1, n, pano_wrap) else {
                continue;
            };
            let (ft, ft2) = (frames[t][0].frame_id, frames[t2][0].frame_id);
            if linked.contains(&(ft.min(ft2), ft.max(ft2))) {
                continue;
            }
            let mut best: Option<(usize, usize, f64)> = None;
            for a in frames[t].iter() {
                for b in frames[t2].iter() {
                    let s = dot(a.descriptor(0), b.descriptor(0));
                    if best.is_none_or(|(_, _, bs)| s > bs) {
                        best = Some((a.node_id, b.node_id, s));
                    }
                }
            }
            let (a, b, s) = best.expect("frames are nonempty");
            insert(&mut edges, MapEdge::new(a, b, EdgeKind::Inter, s));
        }
    }
    Ok(edges.into_values().collect())
}

/// Per-node descriptor layers `0..=l_max`: layer `l + 1` of a node is the
/// mean of layer `l` over the node and its neighbours, optionally rescaled
/// to unit length.
pub fn aggregate_layers(
    base: Vec<Vec<f64>>,
    adjacency: &[Vec<usize>],
    l_max: usize,
    renormalize: bool,
) -> Vec<Vec<Vec<f64>>> {
    let n = base.len();
    let mut layers: Vec<Vec<Vec<f64>>> = base.into_iter().map(|d| vec![d]).collect();
    for l in 0..l_max {
        let next: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut acc = layers[i][l].clone();
                for &j in &adjacency[i] {
                    acc.iter_mut().zip(&layers[j][l]).for_each(|(a, x)| *a += x);
                }
                let count = (adjacency[i].len() + 1) as f64;
                acc.iter_mut().for_each(|a| *a /= count);
                if renormalize {
                    normalize(&mut acc);
                }
                acc
            })
            .collect();
        for (node, d) in layers.iter_mut().zip(next) {
            node.push(d);
        }
    }
    layers
}

/// Recomputes descriptor layers `1..=l_max` of every node from layer 0,
/// using both intra and inter edges.
pub fn aggregate_descriptors(g: &mut MapGraph, l_max: usize, renormalize: bool) {
    let base: Vec<Vec<f64>> = g.nodes.iter().map(|n| n.descriptors[0].clone()).collect();
    let layers = aggregate_layers(base, &g.adjacency, l_max, renormalize);
    for (node, d) in g.nodes.iter_mut().zip(layers) {
        node.descriptors = d;
    }
    g.config.l_max = l_max;
    g.config.renormalize_layers = renormalize;
}

/// Builds the full map: nodes in (frame, segment) order, intra and inter
/// edges, descriptor aggregation.
pub fn build_map(fs: &FrameSet, cfg: &GraphConfig) -> Result<MapGraph> {
    cfg.validate()?;
    if fs.is_empty() {
        return Err(HopmapError::EmptyMap);
    }
    if let Some(t) = fs.records.iter().position(Vec::is_empty) {
        return Err(HopmapError::EmptyFrame { frame_id: t });
    }
    let mut cfg = cfg.clone();
    cfg.pano_wrap |= fs.pano_wrap;

    let nodes: Vec<MapNode> = fs
        .iter_records()
        .enumerate()
        .map(|(i, r)| MapNode::from_record(i, r))
        .collect();
    let mut g = MapGraph::from_parts(nodes, Vec::new(), fs.frames.clone(), cfg.clone())?;
    let edges = map_edges(&g, cfg.intra_mode, cfg.theta)?;
    g.set_edges(edges);
    aggregate_descriptors(&mut g, cfg.l_max, cfg.renormalize_layers);

    let components = g.num_components();
    if components != 1 {
        return Err(HopmapError::Validation(format!(
            "built map has {components} connected components"
        )));
    }
    Ok(g)
}

/// Intra edges under `mode` plus thresholded inter edges with fallback,
/// computed from the graph's nodes and window settings.
pub fn map_edges(g: &MapGraph, mode: IntraMode, theta: f64) -> Result<Vec<MapEdge>> {
    let frames = g.frames_as_nodes();
    let mut edges: Vec<MapEdge> = frames
        .iter()
        .flat_map(|f| build_intra_edges(f, mode))
        .collect();
    edges.extend(inter_edges(
        &frames,
        &g.config.window,
        g.config.pano_wrap,
        theta,
        true,
    )?);
    edges.sort_by_key(MapEdge::key);
    Ok(edges)
}
