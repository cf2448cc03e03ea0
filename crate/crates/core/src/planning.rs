//! Hop plans over the segment map.
//!
//! Inter-image edges cost 0 and intra-image edges cost 1, so a shortest
//! path rides segment tracks and only hops within an image when it has to.
//! The edge set depends on the [`PlanStrategy`].

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{HopmapError, Result};
use crate::graph::{map_edges, map_to_dot, EdgeKind, IntraMode, MapEdge, MapGraph};
use crate::vector::dot;

pub const DEFAULT_CANDIDATES: usize = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanStrategy {
    /// Delaunay intra edges, thresholded inter edges.
    #[default]
    IntraDt,
    /// Complete intra subgraphs, thresholded inter edges.
    IntraAll,
    /// Delaunay intra edges, an inter edge for every best match regardless
    /// of similarity.
    DaAll,
}

impl PlanStrategy {
    pub const ALL: [PlanStrategy; 3] = [
        PlanStrategy::IntraDt,
        PlanStrategy::IntraAll,
        PlanStrategy::DaAll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlanStrategy::IntraDt => "intra-dt",
            PlanStrategy::IntraAll => "intra-all",
            PlanStrategy::DaAll => "da-all",
        }
    }
}

impl std::str::FromStr for PlanStrategy {
    type Err = HopmapError;

    fn from_str(s: &str) -> Result<Self> {
        PlanStrategy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| HopmapError::Config(format!("unknown strategy {s:?}")))
    }
}

impl std::fmt::Display for PlanStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub steps: Vec<usize>,
    /// `edge_kinds[i]` is the edge taken from `steps[i]` to `steps[i + 1]`.
    pub edge_kinds: Vec<EdgeKind>,
    pub cost: u32,
}

impl Plan {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Number of intra-image transitions in the plan.
pub fn plan_cost(p: &Plan) -> u32 {
    p.edge_kinds
        .iter()
        .filter(|&&k| k == EdgeKind::Intra)
        .count() as u32
}

pub fn edge_weight(kind: EdgeKind) -> u32 {
    match kind {
        EdgeKind::Inter => 0,
        EdgeKind::Intra => 1,
    }
}

/// Edge set a strategy plans over.
pub fn strategy_edges(g: &MapGraph, strategy: PlanStrategy) -> Result<Vec<MapEdge>> {
    match strategy {
        PlanStrategy::IntraDt => map_edges(g, IntraMode::Delaunay, g.config.theta),
        PlanStrategy::IntraAll => map_edges(g, IntraMode::Complete, g.config.theta),
        PlanStrategy::DaAll => map_edges(g, IntraMode::Delaunay, f64::NEG_INFINITY),
    }
}

/// Adjacency with edge kinds, ready for repeated shortest-path queries.
#[derive(Clone, Debug)]
pub struct PlanningGraph {
    adj: Vec<Vec<(usize, EdgeKind)>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Label {
    cost: u32,
    /// Consecutive inter transitions at the end of the best path.
    run: u32,
    pred: usize,
}

impl PlanningGraph {
    pub fn new(g: &MapGraph, strategy: PlanStrategy) -> Result<Self> {
        Ok(Self::from_edges(
            g.num_nodes(),
            &strategy_edges(g, strategy)?,
        ))
    }

    pub fn from_edges(num_nodes: usize, edges: &[MapEdge]) -> Self {
        let mut adj = vec![Vec::new(); num_nodes];
        for e in edges {
            adj[e.a].push((e.b, e.kind));
            adj[e.b].push((e.a, e.kind));
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        PlanningGraph { adj }
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    /// Dijkstra from `source`, stopping early once `stop_at` is settled.
    ///
    /// Among equal-cost ways to reach a node, the one ending in the longer
    /// run of inter transitions wins, then the lower predecessor id. Only
    /// unsettled nodes are relabelled, so predecessors always form a tree.
    fn search(&self, source: usize, stop_at: Option<usize>) -> Vec<Option<Label>> {
        let n = self.adj.len();
        let mut labels: Vec<Option<Label>> = vec![None; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        labels[source] = Some(Label {
            cost: 0,
            run: 0,
            pred: source,
        });
        heap.push((Reverse(0u32), 0u32, Reverse(source)));

        while let Some((Reverse(cost), run, Reverse(u))) = heap.pop() {
            let cur = labels[u].expect("queued nodes are labelled");
            if settled[u] || cur.cost != cost || cur.run != run {
                continue;
            }
            settled[u] = true;
            if stop_at == Some(u) {
                break;
            }
            for &(v, kind) in &self.adj[u] {
                if settled[v] {
                    continue;
                }
                let cand = Label {
                    cost: cost + edge_weight(kind),
                    run: if kind == EdgeKind::Inter { run + 1 } else { 0 },
                    pred: u,
                };
                let better = match labels[v] {
                    None => true,
                    Some(old) => {
                        (cand.cost, Reverse(cand.run), cand.pred)
                            < (old.cost, Reverse(old.run), old.pred)
                    }
                };
                if better {
                    labels[v] = Some(cand);
                    heap.push((Reverse(cand.cost), cand.run, Reverse(v)));
                }
            }
        }
        labels
    }

    /// Plan cost from `source` to every node; `None` where unreachable.
    pub fn costs_from(&self, source: usize) -> Result<Vec<Option<u32>>> {
        self.check(source)?;
        Ok(self
            .search(source, None)
            .into_iter()
            .map(|l| l.map(|l| l.cost))
            .collect())
    }

    pub fn plan(&self, source: usize, target: usize) -> Result<Plan> {
        self.check(source)?;
        self.check(target)?;
        let labels = self.search(source, Some(target));
        let Some(end) = labels[target] else {
            return Err(HopmapError::Unreachable {
                source_node: source,
                target,
            });
        };
        let mut steps = vec![target];
        let mut at = target;
        while at != source {
            at = labels[at].expect("predecessors are labelled").pred;
            steps.push(at);
        }
        steps.reverse();
        let edge_kinds: Vec<EdgeKind> = steps
            .windows(2)
            .map(|w| self.kind_between(w[0], w[1]))
            .collect();
        let plan = Plan {
            steps,
            edge_kinds,
            cost: end.cost,
        };
        debug_assert_eq!(plan_cost(&plan), plan.cost);
        Ok(plan)
    }

    /// Cheapest edge kind between two adjacent nodes.
    fn kind_between(&self, a: usize, b: usize) -> EdgeKind {
        self.adj[a]
            .iter()
            .filter(|(v, _)| *v == b)
            .map(|&(_, k)| k)
            .min_by_key(|&k| edge_weight(k))
            .expect("consecutive plan steps are adjacent")
    }

    fn check(&self, node: usize) -> Result<()> {
        if node < self.adj.len() {
            Ok(())
        } else {
            Err(HopmapError::UnknownNode(node))
        }
    }
}

pub fn plan(g: &MapGraph, source: usize, target: usize, strategy: PlanStrategy) -> Result<Plan> {
    PlanningGraph::new(g, strategy)?.plan(source, target)
}

/// The `k` nodes whose semantic vectors best match `text_vector`, best
/// first, with their similarities. Ties go to the lower node id.
pub fn resolve_text_query(
    text_vector: &[f64],
    g: &MapGraph,
    k: usize,
) -> Result<Vec<(usize, f64)>> {
    let mut scored: Vec<(usize, f64)> = g
        .nodes
        .iter()
        .filter_map(|n| {
            let sem = n.semantic_vector.as_ref()?;
            if sem.len() != text_vector.len() {
                return None;
            }
            Some((n.node_id, dot(text_vector, sem)))
        })
        .collect();
    if scored.is_empty() {
        return Err(HopmapError::NoSemanticVectors);
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationalQuery {
    pub target_vector: Vec<f64>,
    pub reference_vector: Vec<f64>,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    DEFAULT_CANDIDATES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationalAnswer {
    pub goal: usize,
    pub reference: usize,
    /// Plan from the chosen target candidate to the chosen reference.
    pub plan: Plan,
    pub target_candidates: Vec<(usize, f64)>,
    pub reference_candidates: Vec<(usize, f64)>,
}

/// Picks the target candidate closest (in plan cost) to any reference
/// candidate. Ties go to the larger summed retrieval similarity, then the
/// lower target id, then the lower reference id.
pub fn resolve_relational_query(
    q: &RelationalQuery,
    g: &MapGraph,
    strategy: PlanStrategy,
) -> Result<RelationalAnswer> {
    if q.k == 0 {
        return Err(HopmapError::Query("k must be at least 1".into()));
    }
    let targets = resolve_text_query(&q.target_vector, g, q.k)?;
    let references = resolve_text_query(&q.reference_vector, g, q.k)?;
    let pg = PlanningGraph::new(g, strategy)?;

    let mut best: Option<(u32, f64, usize, usize)> = None;
    for &(t, ts) in &targets {
        let costs = pg.costs_from(t)?;
        for &(r, rs) in &references {
            let Some(c) = costs[r] else { continue };
            let cand = (c, ts + rs, t, r);
            let better = match best {
                None => true,
                Some((bc, bs, bt, br)) => {
                    (c, Reverse(OrdF64(ts + rs)), t, r) < (bc, Reverse(OrdF64(bs)), bt, br)
                }
            };
            if better {
                best = Some(cand);
            }
        }
    }
    let (_, _, goal, reference) = best.ok_or_else(|| {
        HopmapError::Query("no target candidate reaches a reference candidate".into())
    })?;
    Ok(RelationalAnswer {
        goal,
        reference,
        plan: pg.plan(goal, reference)?,
        target_candidates: targets,
        reference_candidates: references,
    })
}

#[derive(Clone, Copy)]
struct OrdF64(f64);

impl PartialEq for OrdF64 {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Serialize)]
struct PlanStepJson {
    node: usize,
    frame_id: usize,
    segment_id: usize,
    centroid: [f64; 2],
    /// Edge taken to reach this step; absent on the first step.
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<EdgeKind>,
}

#[derive(Serialize)]
struct PlanJson {
    strategy: PlanStrategy,
    cost: u32,
    steps: Vec<PlanStepJson>,
}

pub fn plan_to_json(p: &Plan, g: &MapGraph, strategy: PlanStrategy) -> Result<String> {
    let steps = p
        .steps
        .iter()
        .enumerate()
        .map(|(i, &id)| {
            let n = &g.nodes[id];
            PlanStepJson {
                node: id,
                frame_id: n.frame_id,
                segment_id: n.segment_id,
                centroid: [n.centroid_x, n.centroid_y],
                kind: i.checked_sub(1).map(|j| p.edge_kinds[j]),
            }
        })
        .collect();
    Ok(serde_json::to_string_pretty(&PlanJson {
        strategy,
        cost: p.cost,
        steps,
    })?)
}

/// Map DOT with plan nodes filled and plan transitions drawn in bold red.
pub fn plan_to_dot(p: &Plan, g: &MapGraph) -> String {
    let mut dot = map_to_dot(g, &p.steps);
    dot.truncate(dot.len() - 2);
    for (w, kind) in p.steps.windows(2).zip(&p.edge_kinds) {
        let style = match kind {
            EdgeKind::Intra => "dashed",
            EdgeKind::Inter => "solid",
        };
        dot.push_str(&format!(
            "  n{} -- n{} [color=red penwidth=3 style={style}];\n",
            w[0], w[1]
        ));
    }
    dot.push_str("}\n");
    dot
}
