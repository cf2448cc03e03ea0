mod common;

use std::collections::BTreeSet;

use common::*;
use hopmap::planning::{
    plan, plan_cost, resolve_relational_query, resolve_text_query, strategy_edges, PlanningGraph,
    RelationalQuery,
};
use hopmap::simworld::WorldSpec;
use hopmap::{
    build_map, EdgeKind, FrameMeta, FrameSet, GraphConfig, MapEdge, MapGraph, PlanStrategy,
};
use proptest::prelude::*;
use rand::Rng;

fn semantic_map(seed: u64) -> MapGraph {
    let mut r = rng(seed);
    let fs = random_frameset(&mut r, 5, 4, 6, false);
    build_map(&fs, &GraphConfig::default()).unwrap()
}

#[test]
fn top_three_equals_sorted_scan() {
    let mut r = rng(41);
    let metas = (0..4).map(|t| FrameMeta::new(t, 640, 480)).collect();
    let records: Vec<_> = (0..20)
        .map(|i| {
            let mut rec = record(i % 4, i, 100.0, 100.0, 500.0, unit(&mut r, 4));
            rec.semantic_vector = Some(unit(&mut r, 8));
            rec
        })
        .collect();
    let g = build_map(
        &FrameSet::new(metas, records, false).unwrap(),
        &GraphConfig::default(),
    )
    .unwrap();
    for _ in 0..10 {
        let q = unit(&mut r, 8);
        let mut all: Vec<(usize, f64)> = g
            .nodes
            .iter()
            .map(|n| (n.node_id, dot(&q, n.semantic_vector.as_ref().unwrap())))
            .collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        let got = resolve_text_query(&q, &g, 3).unwrap();
        assert_eq!(
            got.iter().map(|x| x.0).collect::<Vec<_>>(),
            all[..3].iter().map(|x| x.0).collect::<Vec<_>>()
        );
        assert_eq!(resolve_text_query(&q, &g, 100).unwrap().len(), 20);
    }
    let own = g.nodes[11].semantic_vector.clone().unwrap();
    assert_eq!(resolve_text_query(&own, &g, 1).unwrap()[0].0, 11);
}

#[test]
fn text_query_without_semantics_fails() {
    let mut g = semantic_map(42);
    for n in &mut g.nodes {
        n.semantic_vector = None;
    }
    let err = resolve_text_query(&[1.0; 6], &g, 3).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn relational_query_matches_pair_enumeration() {
    let (w, g) = corridor_map(&WorldSpec::default());
    let mut r = rng(43);
    for strategy in PlanStrategy::ALL {
        let pg = PlanningGraph::new(&g, strategy).unwrap();
        for _ in 0..10 {
            let tq = &w.objects[r.gen_range(0..w.objects.len())].semantic;
            let rq = &w.objects[r.gen_range(0..w.objects.len())].semantic;
            let q = RelationalQuery {
                target_vector: tq.clone(),
                reference_vector: rq.clone(),
                k: 3,
            };
            let ans = resolve_relational_query(&q, &g, strategy).unwrap();

            let score = |v: &[f64]| -> Vec<(usize, f64)> {
                let mut s: Vec<_> = g
                    .nodes
                    .iter()
                    .map(|n| (n.node_id, dot(v, n.semantic_vector.as_ref().unwrap())))
                    .collect();
                s.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                s.truncate(3);
                s
            };
            let mut best: Option<(u32, f64, usize, usize)> = None;
            for &(t, ts) in &score(tq) {
                for &(rf, rs) in &score(rq) {
                    let c = pg.plan(t, rf).unwrap().cost;
                    let better = match best {
                        None => true,
                        Some((bc, bs, bt, br)) => {
                            c < bc
                                || (c == bc
                                    && (ts + rs > bs || (ts + rs == bs && (t, rf) < (bt, br))))
                        }
                    };
                    if better {
                        best = Some((c, ts + rs, t, rf));
                    }
                }
            }
            let (c, _, t, rf) = best.unwrap();
            assert_eq!((ans.goal, ans.reference, ans.plan.cost), (t, rf, c));
        }
    }
}

#[test]
fn adjacent_target_candidate_wins() {
    // Node 1 is the stronger target match but reaches the reference (node 2)
    // only through an intra edge; node 0 shares node 2's descriptor and is
    // linked to it by an inter edge.
    let metas = (0..2).map(|t| FrameMeta::new(t, 640, 480)).collect();
    let mut recs = vec![
        record(0, 0, 10.0, 10.0, 50.0, vec![1.0, 0.0]),
        record(1, 0, 10.0, 10.0, 50.0, vec![0.0, 1.0]),
        record(1, 1, 90.0, 10.0, 50.0, vec![1.0, 0.0]),
    ];
    recs[0].semantic_vector = Some(vec![0.9, (1.0f64 - 0.81).sqrt(), 0.0]);
    recs[1].semantic_vector = Some(vec![1.0, 0.0, 0.0]);
    recs[2].semantic_vector = Some(vec![0.0, 0.0, 1.0]);
    let g = build_map(
        &FrameSet::new(metas, recs, false).unwrap(),
        &GraphConfig::default(),
    )
    .unwrap();
    let q = RelationalQuery {
        target_vector: vec![1.0, 0.0, 0.0],
        reference_vector: vec![0.0, 0.0, 1.0],
        k: 2,
    };
    let ans = resolve_relational_query(&q, &g, PlanStrategy::IntraDt).unwrap();
    assert_eq!(ans.goal, 0);
    assert_eq!(ans.plan.cost, 0);
    let k1 = RelationalQuery { k: 1, ..q };
    assert_eq!(
        resolve_relational_query(&k1, &g, PlanStrategy::IntraDt)
            .unwrap()
            .goal,
        1
    );
}

#[test]
fn plan_properties_on_corridor_world() {
    let (_, g) = corridor_map(&WorldSpec::default());
    let mut r = rng(44);
    for strategy in PlanStrategy::ALL {
        let edges = strategy_edges(&g, strategy).unwrap();
        let kinds: BTreeSet<(usize, usize, EdgeKind)> =
            edges.iter().map(|e| (e.a, e.b, e.kind)).collect();
        let pg = PlanningGraph::from_edges(g.num_nodes(), &edges);
        for _ in 0..30 {
            let s = r.gen_range(0..g.num_nodes());
            let t = r.gen_range(0..g.num_nodes());
            let p = pg.plan(s, t).unwrap();
            assert_eq!(p.steps.first(), Some(&s));
            assert_eq!(p.steps.last(), Some(&t));
            assert_eq!(plan_cost(&p), p.cost);
            assert_eq!(pg.costs_from(s).unwrap()[t], Some(p.cost));
            assert_eq!(pg.plan(t, s).unwrap().cost, p.cost);
            for (w, k) in p.steps.windows(2).zip(&p.edge_kinds) {
                let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
                assert!(kinds.contains(&(a, b, *k)));
            }
            if p.cost == 0 {
                assert!(p.edge_kinds.iter().all(|&k| k == EdgeKind::Inter));
            }
        }
    }
}

#[test]
fn dominance_on_corridor_world() {
    let (_, g) = corridor_map(&WorldSpec::default());
    let mut r = rng(45);
    for _ in 0..30 {
        let s = r.gen_range(0..g.num_nodes());
        let t = r.gen_range(0..g.num_nodes());
        let dt = plan(&g, s, t, PlanStrategy::IntraDt).unwrap().cost;
        assert!(plan(&g, s, t, PlanStrategy::IntraAll).unwrap().cost <= dt);
        assert!(plan(&g, s, t, PlanStrategy::DaAll).unwrap().cost <= dt);
    }
}

#[test]
fn missing_node_and_disconnected_target() {
    let edges = vec![MapEdge::new(0, 1, EdgeKind::Inter, 0.9)];
    let pg = PlanningGraph::from_edges(3, &edges);
    assert_eq!(pg.plan(0, 2).unwrap_err().exit_code(), 4);
    assert_eq!(pg.plan(0, 9).unwrap_err().exit_code(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn dijkstra_matches_path_enumeration(seed in any::<u64>(), n in 2usize..9, extra in 0usize..8) {
        let mut r = rng(seed);
        let edges = random_connected_edges(&mut r, n, extra);
        let pg = PlanningGraph::from_edges(n, &edges);
        for s in 0..n {
            let costs = pg.costs_from(s).unwrap();
            for (t, &c) in costs.iter().enumerate() {
                prop_assert_eq!(c, brute_min_cost(n, &edges, s, t));
            }
        }
    }
}
