//! Segment-level retrieval against the map and the Recall@1 protocol.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{HopmapError, Result};
use crate::graph::{
    aggregate_layers, build_intra_edges, inter_edges, IntraMode, MapGraph, MapNode,
};
use crate::ingest::{FrameSet, SegmentRecord};
use crate::vector::dot;

pub const DEFAULT_THETA_LOC: f64 = 0.5;
pub const DEFAULT_RECALL_RADIUS: usize = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeMatch {
    /// `(frame_id, segment_id)` of the query segment.
    pub query_segment: (usize, usize),
    pub map_node: usize,
    pub similarity: f64,
    pub layer: usize,
}

/// Aggregated descriptors of a single query image, using only that image's
/// intra edges. Returns `layers[segment][layer]`.
pub fn aggregate_query(
    query: &[SegmentRecord],
    intra_mode: IntraMode,
    l_max: usize,
    renormalize: bool,
) -> Vec<Vec<Vec<f64>>> {
    let nodes: Vec<MapNode> = query
        .iter()
        .enumerate()
        .map(|(i, r)| MapNode::from_record(i, r))
        .collect();
    let mut adjacency = vec![Vec::new(); nodes.len()];
    for e in build_intra_edges(&nodes, intra_mode) {
        adjacency[e.a].push(e.b);
        adjacency[e.b].push(e.a);
    }
    let base = query.iter().map(|r| r.descriptor.clone()).collect();
    aggregate_layers(base, &adjacency, l_max, renormalize)
}

/// Best node among `candidates` for `descriptor` at `layer`. Ties go to the
/// lowest node id.
pub fn best_node<'a>(
    descriptor: &[f64],
    candidates: impl IntoIterator<Item = &'a MapNode>,
    layer: usize,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for n in candidates {
        let s = dot(descriptor, n.descriptor(layer));
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((n.node_id, s));
        }
    }
    best
}

fn check_layer(g: &MapGraph, layer: usize) -> Result<()> {
    if g.num_nodes() == 0 {
        return Err(HopmapError::EmptyMap);
    }
    if layer >= g.num_layers() {
        return Err(HopmapError::Config(format!(
            "layer {layer} requested but the map holds layers 0..={}",
            g.num_layers() - 1
        )));
    }
    Ok(())
}

/// Matches every segment of one query image to its nearest map node at
/// `layer`; matches with similarity not above `theta_loc` are dropped.
pub fn localize_segments(
    query: &[SegmentRecord],
    g: &MapGraph,
    layer: usize,
    theta_loc: f64,
) -> Result<Vec<NodeMatch>> {
    check_layer(g, layer)?;
    let layers = aggregate_query(
        query,
        g.config.intra_mode,
        layer,
        g.config.renormalize_layers,
    );
    Ok(query
        .iter()
        .zip(&layers)
        .filter_map(|(r, d)| {
            let (node, s) = best_node(&d[layer], &g.nodes, layer)?;
            (s > theta_loc).then_some(NodeMatch {
                query_segment: (r.frame_id, r.segment_id),
                map_node: node,
                similarity: s,
                layer,
            })
        })
        .collect())
}

/// Majority vote of matched nodes' frames. Ties go to the larger summed
/// similarity, then the lower frame id. `None` means lost.
pub fn localize_frame(matches: &[NodeMatch], g: &MapGraph) -> Option<usize> {
    let mut tally = vec![(0usize, 0.0f64); g.num_frames()];
    for m in matches {
        let t = g.nodes[m.map_node].frame_id;
        tally[t].0 += 1;
        tally[t].1 += m.similarity;
    }
    let mut best: Option<(usize, (usize, f64))> = None;
    for (t, &(votes, sim)) in tally.iter().enumerate() {
        if votes == 0 {
            continue;
        }
        let better = match best {
            None => true,
            Some((_, (bv, bs))) => votes > bv || (votes == bv && sim > bs),
        };
        if better {
            best = Some((t, (votes, sim)));
        }
    }
    best.map(|(t, _)| t)
}

/// Recall@1 over a grid of aggregation layers (rows) and inter-edge
/// thresholds (columns).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallTable {
    pub layers: Vec<usize>,
    pub thetas: Vec<f64>,
    pub radius: usize,
    /// `recall[row][col]` for `layers[row]`, `thetas[col]`.
    pub recall: Vec<Vec<f64>>,
}

impl RecallTable {
    pub fn get(&self, layer: usize, theta: f64) -> Option<f64> {
        let r = self.layers.iter().position(|&l| l == layer)?;
        let c = self.thetas.iter().position(|&t| t == theta)?;
        Some(self.recall[r][c])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer");
        for t in &self.thetas {
            let _ = write!(out, ",theta={t}");
        }
        out.push('\n');
        for (l, row) in self.layers.iter().zip(&self.recall) {
            let _ = write!(out, "{l}");
            for r in row {
                let _ = write!(out, ",{r:.6}");
            }
            out.push('\n');
        }
        out
    }
}

/// For each threshold, the map's inter edges are rebuilt by thresholded
/// association alone (no connectivity fallback, so a threshold above 1
/// leaves intra edges only), descriptors are re-aggregated, and every query
/// segment is retrieved at each layer. A retrieval is correct when the
/// matched node's frame is within `radius` frames of the query frame's
/// ground-truth map frame.
pub fn eval_recall(
    query_set: &FrameSet,
    g: &MapGraph,
    layer_grid: &[usize],
    theta_grid: &[f64],
    radius: usize,
) -> Result<RecallTable> {
    if g.num_nodes() == 0 {
        return Err(HopmapError::EmptyMap);
    }
    let l_max = layer_grid.iter().copied().max().unwrap_or(0);
    let renorm = g.config.renormalize_layers;

    let mut gt = Vec::with_capacity(query_set.num_frames());
    for meta in &query_set.frames {
        let t = meta.gt_map_frame.ok_or_else(|| {
            HopmapError::Validation(format!(
                "query frame {} has no ground-truth map frame",
                meta.frame_id
            ))
        })?;
        gt.push(t);
    }
    let queries: Vec<Vec<Vec<Vec<f64>>>> = query_set
        .records
        .iter()
        .map(|frame| aggregate_query(frame, g.config.intra_mode, l_max, renorm))
        .collect();
    let total = query_set.num_records();
    let (n, pano) = (g.num_frames(), g.config.pano_wrap);

    let mut recall = vec![vec![0.0; theta_grid.len()]; layer_grid.len()];
    for (col, &theta) in theta_grid.iter().enumerate() {
        let frames = g.frames_as_nodes();
        let mut edges: Vec<_> = frames
            .iter()
            .flat_map(|f| build_intra_edges(f, g.config.intra_mode))
            .collect();
        edges.extend(inter_edges(
            &frames,
            &g.config.window,
            g.config.pano_wrap,
            theta,
            false,
        )?);
        let mut variant = g.clone();
        variant.set_edges(edges);
        crate::graph::aggregate_descriptors(&mut variant, l_max, renorm);

        for (row, &layer) in layer_grid.iter().enumerate() {
            let mut hits = 0usize;
            for (frame_layers, &truth) in queries.iter().zip(&gt) {
                for d in frame_layers {
                    let (node, _) =
                        best_node(&d[layer], &variant.nodes, layer).expect("map is nonempty");
                    if frame_distance(variant.nodes[node].frame_id, truth, n, pano) <= radius {
                        hits += 1;
                    }
                }
            }
            recall[row][col] = if total == 0 {
                0.0
            } else {
                hits as f64 / total as f64
            };
        }
    }
    Ok(RecallTable {
        layers: layer_grid.to_vec(),
        thetas: theta_grid.to_vec(),
        radius,
        recall,
    })
}

/// Frame index distance, measured around the loop for panoramic maps.
pub fn frame_distance(a: usize, b: usize, num_frames: usize, pano_wrap: bool) -> usize {
    let d = a.abs_diff(b);
    if pano_wrap && num_frames > 0 {
        d.min(num_frames - d % num_frames)
    } else {
        d
    }
}
