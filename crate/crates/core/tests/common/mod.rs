//! Fixture generators and brute-force oracles shared by the integration
//! tests. Oracles are written independently of the library code.

#![allow(dead_code)]

use std::collections::BTreeMap;

use hopmap::simworld::{generate_world, World, WorldSpec};
use hopmap::{
    build_map, EdgeKind, FrameMeta, FrameSet, GraphConfig, MapEdge, MapGraph, SegmentRecord,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = dot(&v, &v).sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn record(
    frame: usize,
    segment: usize,
    cx: f64,
    cy: f64,
    area: f64,
    descriptor: Vec<f64>,
) -> SegmentRecord {
    SegmentRecord {
        frame_id: frame,
        segment_id: segment,
        centroid_x: cx,
        centroid_y: cy,
        area_px: area,
        bbox: [cx - 5.0, cy - 5.0, cx + 5.0, cy + 5.0],
        descriptor,
        semantic_vector: None,
        gt_instance: None,
        gt_category: None,
    }
}

/// `frames` frames of 1..=`max_nodes` segments with random centroids in a
/// 640x480 image and random unit descriptors.
pub fn random_frameset(
    rng: &mut ChaCha8Rng,
    frames: usize,
    max_nodes: usize,
    dim: usize,
    pano: bool,
) -> FrameSet {
    let metas = (0..frames).map(|t| FrameMeta::new(t, 640, 480)).collect();
    let mut records = Vec::new();
    for t in 0..frames {
        for s in 0..rng.gen_range(1..=max_nodes) {
            let cx = rng.gen_range(0.0..640.0);
            let cy = rng.gen_range(0.0..480.0);
            let area = rng.gen_range(100.0..20_000.0);
            let mut r = record(t, s, cx, cy, area, unit(rng, dim));
            r.semantic_vector = Some(unit(rng, dim));
            records.push(r);
        }
    }
    FrameSet::new(metas, records, pano).unwrap()
}

/// Map of the default seed-42 corridor world.
pub fn corridor_map(spec: &WorldSpec) -> (World, MapGraph) {
    let w = generate_world(spec).unwrap();
    let g = build_map(&w.mapping_traverse().unwrap(), &GraphConfig::default()).unwrap();
    (w, g)
}

/// Independent inter-edge construction: per node and gap, the first
/// best-scoring node of the later frame, kept if above `theta`; then one
/// best pair for every consecutive frame pair still unlinked. Keys are
/// `(min id, max id)`, values the max similarity seen.
pub fn oracle_inter_edges(
    frames: &[Vec<(usize, Vec<f64>)>],
    window: &[usize],
    pano: bool,
    theta: f64,
) -> BTreeMap<(usize, usize), f64> {
    let n = frames.len();
    let next = |t: usize, g: usize| -> Option<usize> {
        let r = if t + g < n {
            t + g
        } else if pano {
            (t + g) % n
        } else {
            return None;
        };
        (r != t).then_some(r)
    };
    let mut out: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let add = |out: &mut BTreeMap<(usize, usize), f64>, a: usize, b: usize, s: f64| {
        let e = out.entry((a.min(b), a.max(b))).or_insert(s);
        *e = e.max(s);
    };
    for t in 0..n {
        for &g in window {
            let Some(t2) = next(t, g) else { continue };
            for (i, hi) in &frames[t] {
                let mut best = (usize::MAX, f64::NEG_INFINITY);
                for (j, hj) in &frames[t2] {
                    let s = dot(hi, hj);
                    if s > best.1 {
                        best = (*j, s);
                    }
                }
                if best.1 > theta {
                    add(&mut out, *i, best.0, best.1);
                }
            }
        }
    }
    let frame_of: BTreeMap<usize, usize> = frames
        .iter()
        .enumerate()
        .flat_map(|(t, f)| f.iter().map(move |(i, _)| (*i, t)))
        .collect();
    let thresholded = out.clone();
    for t in 0..n {
        let Some(t2) = next(t, 1) else { continue };
        let linked = thresholded.keys().any(|(a, b)| {
            let (fa, fb) = (frame_of[a], frame_of[b]);
            (fa == t && fb == t2) || (fa == t2 && fb == t)
        });
        if linked {
            continue;
        }
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (i, hi) in &frames[t] {
            for (j, hj) in &frames[t2] {
                let s = dot(hi, hj);
                if s > best.2 {
                    best = (*i, *j, s);
                }
            }
        }
        add(&mut out, best.0, best.1, best.2);
    }
    out
}

/// Union-find component count.
pub fn components(n: usize, edges: &[(usize, usize)]) -> usize {
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut x = x;
        while p[x] != r {
            let nx = p[x];
            p[x] = r;
            x = nx;
        }
        r
    }
    let mut p: Vec<usize> = (0..n).collect();
    let mut count = n;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut p, a), find(&mut p, b));
        if ra != rb {
            p[ra] = rb;
            count -= 1;
        }
    }
    count
}

/// Minimum number of intra edges over all simple paths from `s` to `t`.
pub fn brute_min_cost(n: usize, edges: &[MapEdge], s: usize, t: usize) -> Option<u32> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        let w = u32::from(e.kind == EdgeKind::Intra);
        adj[e.a].push((e.b, w));
        adj[e.b].push((e.a, w));
    }
    fn dfs(
        adj: &[Vec<(usize, u32)>],
        u: usize,
        t: usize,
        cost: u32,
        seen: &mut [bool],
        best: &mut Option<u32>,
    ) {
        if u == t {
            *best = Some(best.map_or(cost, |b| b.min(cost)));
            return;
        }
        for &(v, w) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                dfs(adj, v, t, cost + w, seen, best);
                seen[v] = false;
            }
        }
    }
    let mut seen = vec![false; n];
    seen[s] = true;
    let mut best = None;
    dfs(&adj, s, t, 0, &mut seen, &mut best);
    best
}

/// Random connected graph: a random spanning tree plus up to `extra`
/// additional edges, every edge of random kind.
pub fn random_connected_edges(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> Vec<MapEdge> {
    let kind = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(0.5) {
            EdgeKind::Inter
        } else {
            EdgeKind::Intra
        }
    };
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        let k = kind(rng);
        edges.push(MapEdge::new(u, v, k, 1.0));
    }
    for _ in 0..extra {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            let k = kind(rng);
            edges.push(MapEdge::new(a, b, k, 1.0));
        }
    }
    edges
}

/// Dense `D^-1 (A + I) H` for one layer.
pub fn dense_mean_layer(n: usize, edges: &[(usize, usize)], h: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for &(x, y) in edges {
        a[x][y] = 1.0;
        a[y][x] = 1.0;
    }
    let dim = h.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| {
            let deg: f64 = a[i].iter().sum();
            (0..dim)
                .map(|c| (0..n).map(|j| a[i][j] * h[j][c]).sum::<f64>() / deg)
                .collect()
        })
        .collect()
}
