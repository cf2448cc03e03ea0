mod common;

use std::f64::consts::PI;

use common::*;
use hopmap::control::ControlParams;
use hopmap::simworld::{
    assign_instances_by_iou, benchmark_pairs, eval_association, generate_world,
    run_navigation_trial, ControlMode, LabeledBox, WorldMode, WorldSpec,
};
use hopmap::PlanStrategy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn placement_follows_documented_formula() {
    for mode in [WorldMode::Corridor, WorldMode::PureRotation] {
        let spec = WorldSpec {
            mode,
            ..WorldSpec::default()
        };
        assert_eq!((spec.seed, spec.n_objects), (42, 20));
        let w = generate_world(&spec).unwrap();
        let mut place = ChaCha8Rng::seed_from_u64(42);
        let n = 20.0;
        for (k, o) in w.objects.iter().enumerate() {
            let u: Vec<f64> = (0..5).map(|_| place.gen::<f64>()).collect();
            let j = k as f64 + 0.5 + 0.6 * (u[0] - 0.5);
            let (x, y) = match mode {
                WorldMode::Corridor => {
                    let slot = (spec.corridor_length + spec.max_range) / n;
                    (
                        j * slot,
                        if u[1] < 0.5 {
                            -(1.0 + u[2])
                        } else {
                            1.0 + u[2]
                        },
                    )
                }
                WorldMode::PureRotation => {
                    let b = 2.0 * PI * j / n;
                    ((2.0 + 2.0 * u[2]) * b.cos(), (2.0 + 2.0 * u[2]) * b.sin())
                }
            };
            assert!(
                (o.x - x).abs() < 1e-12 && (o.y - y).abs() < 1e-12,
                "object {k}"
            );
            assert!((o.z - (u[3] - 0.5)).abs() < 1e-12);
            assert!((o.size - (0.2 + 0.4 * u[4])).abs() < 1e-12);
            assert_eq!(o.category, k % spec.n_categories);
        }
    }
}

#[test]
fn aliases_share_descriptor_and_category() {
    let w = generate_world(&WorldSpec {
        n_aliases: 5,
        ..WorldSpec::default()
    })
    .unwrap();
    for j in 0..5 {
        let (a, b) = (&w.objects[j], &w.objects[19 - j]);
        assert_eq!(a.descriptor, b.descriptor);
        assert_eq!(a.category, b.category);
    }
    assert_ne!(w.objects[5].descriptor, w.objects[14].descriptor);
}

#[test]
fn zero_steps_is_a_failure() {
    let (w, g) = corridor_map(&WorldSpec::default());
    let res = run_navigation_trial(
        &w,
        &g,
        w.traverse_pose(0, 0.0),
        g.num_nodes() - 1,
        ControlMode::Continuous,
        0,
        &ControlParams::default(),
        PlanStrategy::IntraDt,
    )
    .unwrap();
    assert!(!res.success);
    assert_eq!(res.steps_taken, 0);
}

#[test]
fn goal_in_view_succeeds_at_once() {
    let (w, g) = corridor_map(&WorldSpec::default());
    for t in [0, 10, 20] {
        let goal = g
            .frame_nodes(t)
            .iter()
            .max_by(|a, b| a.area_px.total_cmp(&b.area_px))
            .unwrap()
            .node_id;
        for mode in [ControlMode::Continuous, ControlMode::Discrete] {
            let res = run_navigation_trial(
                &w,
                &g,
                w.traverse_pose(t, 0.0),
                goal,
                mode,
                50,
                &ControlParams::default(),
                PlanStrategy::IntraDt,
            )
            .unwrap();
            assert!(res.success, "frame {t} {mode:?}");
            assert_eq!(res.final_min_path_len, Some(0));
            if mode == ControlMode::Continuous {
                assert!(res.steps_taken <= 1);
            }
        }
    }
}

#[test]
fn trials_are_deterministic() {
    let (w, g) = corridor_map(&WorldSpec::default());
    let pairs = benchmark_pairs(&w, &g, 3, 12, 42).unwrap();
    assert_eq!(pairs, benchmark_pairs(&w, &g, 3, 12, 42).unwrap());
    for p in pairs {
        assert!(p.goal_frame >= p.start_frame + 12);
        let run = || {
            run_navigation_trial(
                &w,
                &g,
                p.start,
                p.goal,
                ControlMode::Discrete,
                200,
                &ControlParams::default(),
                PlanStrategy::IntraDt,
            )
            .unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        if a.success {
            assert_eq!(a.final_min_path_len, Some(0));
        }
    }
}

#[test]
fn association_matches_nearest_neighbour_oracle() {
    let w = generate_world(&WorldSpec {
        noise_sigma: 0.4,
        ..WorldSpec::default()
    })
    .unwrap();
    let map = w.mapping_traverse().unwrap();
    let query = w.query_traverse().unwrap();
    let got = eval_association(&map, &query).unwrap();

    let mut inst = 0;
    let mut cat = 0;
    let mut n = 0;
    for q in query.iter_records() {
        let mut best: Option<(f64, i64, i64)> = None;
        for m in map.iter_records() {
            let s = dot(&q.descriptor, &m.descriptor);
            if best.is_none_or(|b| s > b.0) {
                best = Some((s, m.gt_instance.unwrap(), m.gt_category.unwrap()));
            }
        }
        let (_, i, c) = best.unwrap();
        inst += usize::from(i == q.gt_instance.unwrap());
        cat += usize::from(c == q.gt_category.unwrap());
        n += 1;
    }
    assert_eq!(got.n_queries, n);
    assert_eq!(got.instance_acc, inst as f64 / n as f64);
    assert_eq!(got.category_acc, cat as f64 / n as f64);
    assert!(got.category_acc >= got.instance_acc);
    assert!(got.instance_acc < 1.0);
}

#[test]
fn association_needs_labels() {
    let w = generate_world(&WorldSpec::default()).unwrap();
    let map = w.mapping_traverse().unwrap();
    let mut query = w.query_traverse().unwrap();
    query.records[3][0].gt_instance = None;
    assert!(eval_association(&map, &query).is_err());
}

#[test]
fn iou_assignment_labels_overlapping_segments() {
    let w = generate_world(&WorldSpec::default()).unwrap();
    let mut fs = w.mapping_traverse().unwrap();
    let truth: Vec<_> = fs
        .iter_records()
        .map(|r| (r.gt_instance, r.gt_category))
        .collect();
    let boxes: Vec<LabeledBox> = fs
        .iter_records()
        .map(|r| LabeledBox {
            frame_id: r.frame_id,
            bbox: r.bbox,
            instance: r.gt_instance.unwrap(),
            category: r.gt_category.unwrap(),
        })
        .collect();
    for r in fs.records.iter_mut().flatten() {
        r.gt_instance = None;
        r.gt_category = None;
    }
    let n = assign_instances_by_iou(&mut fs, &boxes, 0.2);
    let wrong = fs
        .iter_records()
        .zip(&truth)
        .filter(|(r, t)| (r.gt_instance, r.gt_category) != **t)
        .count();
    assert_eq!(n, fs.num_records());
    assert_eq!(wrong, 0);

    let far = vec![LabeledBox {
        frame_id: 0,
        bbox: [-100.0, -100.0, -90.0, -90.0],
        instance: 1,
        category: 1,
    }];
    assert_eq!(assign_instances_by_iou(&mut fs, &far, 0.2), 0);
    assert!(fs.iter_records().all(|r| r.gt_instance.is_none()));
}

#[test]
fn observation_noise_is_seeded_per_tick() {
    let w = generate_world(&WorldSpec::default()).unwrap();
    let pose = w.traverse_pose(5, 0.0);
    let a = w.observe_stream(&pose, 2, 7);
    assert_eq!(a, w.observe_stream(&pose, 2, 7));
    let b = w.observe_stream(&pose, 2, 8);
    assert_ne!(a.segments[0].descriptor, b.segments[0].descriptor);
    assert_eq!(a.segments[0].centroid_x, b.segments[0].centroid_x);
}
