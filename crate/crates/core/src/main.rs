use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hopmap::config::RunConfig;
use hopmap::graph::{load_map, map_to_dot, save_map};
use hopmap::ingest::{filter_small, filter_stuff, parse_frame_records, write_frame_records};
use hopmap::localization::{eval_recall, localize_frame, localize_segments};
use hopmap::planning::{
    plan, plan_to_dot, plan_to_json, resolve_relational_query, resolve_text_query, RelationalQuery,
};
use hopmap::simworld::{
    benchmark_pairs, eval_association, generate_world, run_navigation_trial, trial_results_csv,
    ControlMode,
};
use hopmap::{build_map, EdgeKind, HopmapError, IntraMode, MapGraph, PlanStrategy, Result};

#[derive(Parser)]
#[command(
    name = "hopmap",
    version,
    about = "Segment-graph maps: build, localize, plan, simulate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (hopmap-config/1 TOML). Defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving every artifact plus the resolved config.toml.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Build a map from an ingest file.
    BuildMap {
        #[arg(long)]
        ingest: PathBuf,
        #[arg(long)]
        pano_wrap: bool,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        intra_mode: Option<IntraMode>,
        /// JSON array of unit vectors naming background classes to drop.
        #[arg(long)]
        stuff: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Plan between two nodes, each given by id or by a text embedding file.
    Plan {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, conflicts_with = "source_text_vec")]
        source_node: Option<usize>,
        #[arg(long)]
        source_text_vec: Option<PathBuf>,
        #[arg(long, conflicts_with = "target_text_vec")]
        target_node: Option<usize>,
        #[arg(long)]
        target_text_vec: Option<PathBuf>,
        #[arg(long)]
        strategy: Option<PlanStrategy>,
        #[command(flatten)]
        common: Common,
    },
    /// Resolve "target near reference" with two text embedding files.
    Query {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        target_text_vec: PathBuf,
        #[arg(long)]
        reference_text_vec: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        strategy: Option<PlanStrategy>,
        #[command(flatten)]
        common: Common,
    },
    /// Match query images' segments to map nodes and vote a frame per image.
    Localize {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        layer: Option<usize>,
        #[arg(long)]
        theta_loc: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Run navigation trials in the synthetic world.
    SimNav {
        #[arg(long)]
        mode: Option<ControlMode>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        strategy: Option<PlanStrategy>,
        #[command(flatten)]
        common: Common,
    },
    /// Recall@1 table over aggregation layers and inter-edge thresholds.
    EvalRecall {
        /// Map to evaluate; with --query. Without both, the configured world
        /// supplies the mapping and query traverses.
        #[arg(long, requires = "query")]
        map: Option<PathBuf>,
        #[arg(long, requires = "map")]
        query: Option<PathBuf>,
        /// Comma-separated layers, e.g. 0,1,2.
        #[arg(long, value_delimiter = ',')]
        layers: Option<Vec<usize>>,
        /// Comma-separated thresholds, e.g. 0.5,0.7,0.9,1.1.
        #[arg(long, value_delimiter = ',')]
        thetas: Option<Vec<f64>>,
        #[arg(long)]
        radius: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Instance and category accuracy of nearest-descriptor association.
    EvalAssoc {
        #[arg(long, requires = "query_views")]
        map_views: Option<PathBuf>,
        #[arg(long, requires = "map_views")]
        query_views: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a map as Graphviz DOT.
    ExportDot {
        #[arg(long)]
        map: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Render the configured world's mapping and query traverses as ingest files.
    GenWorld {
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::BuildMap { common, .. }
            | Command::Plan { common, .. }
            | Command::Query { common, .. }
            | Command::Localize { common, .. }
            | Command::SimNav { common, .. }
            | Command::EvalRecall { common, .. }
            | Command::EvalAssoc { common, .. }
            | Command::ExportDot { common, .. }
            | Command::GenWorld { common } => common,
        }
    }
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn write(out_dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = out_dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn write_json<T: Serialize>(out_dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    write(
        out_dir,
        name,
        &(serde_json::to_string_pretty(value)? + "\n"),
    )
}

/// A node given directly or through the best text match.
fn resolve_endpoint(
    g: &MapGraph,
    node: Option<usize>,
    text: Option<&Path>,
    role: &str,
) -> Result<usize> {
    match (node, text) {
        (Some(n), _) if n < g.num_nodes() => Ok(n),
        (Some(n), _) => Err(HopmapError::UnknownNode(n)),
        (None, Some(path)) => {
            let hits = resolve_text_query(&read_vector(path)?, g, 1)?;
            Ok(hits[0].0)
        }
        (None, None) => Err(HopmapError::Config(format!(
            "give --{role}-node or --{role}-text-vec"
        ))),
    }
}

#[derive(Serialize)]
struct MapSummary {
    nodes: usize,
    frames: usize,
    intra_edges: usize,
    inter_edges: usize,
    components: usize,
}

fn summarize(g: &MapGraph) -> MapSummary {
    MapSummary {
        nodes: g.num_nodes(),
        frames: g.num_frames(),
        intra_edges: g.count_edges(EdgeKind::Intra),
        inter_edges: g.count_edges(EdgeKind::Inter),
        components: g.num_components(),
    }
}

fn run(cli: Cli) -> Result<()> {
    let common = cli.command.common();
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let out = common.out_dir.clone();

    match &cli.command {
        Command::BuildMap {
            pano_wrap,
            theta,
            intra_mode,
            ..
        } => {
            cfg.graph.pano_wrap |= *pano_wrap;
            if let Some(t) = theta {
                cfg.graph.theta = *t;
            }
            if let Some(m) = intra_mode {
                cfg.graph.intra_mode = *m;
            }
        }
        Command::Plan { strategy, .. } | Command::Query { strategy, .. } => {
            if let Some(s) = strategy {
                cfg.plan.strategy = *s;
            }
            if let Command::Query { k: Some(k), .. } = &cli.command {
                cfg.plan.k = *k;
            }
        }
        Command::Localize {
            layer, theta_loc, ..
        } => {
            if let Some(l) = layer {
                cfg.localization.layer = *l;
            }
            if let Some(t) = theta_loc {
                cfg.localization.theta_loc = *t;
            }
        }
        Command::SimNav {
            mode,
            trials,
            max_steps,
            strategy,
            ..
        } => {
            if let Some(m) = mode {
                cfg.nav.mode = *m;
            }
            if let Some(n) = trials {
                cfg.nav.trials = *n;
            }
            if let Some(n) = max_steps {
                cfg.nav.max_steps = *n;
            }
            if let Some(s) = strategy {
                cfg.plan.strategy = *s;
            }
        }
        Command::EvalRecall {
            layers,
            thetas,
            radius,
            ..
        } => {
            if let Some(l) = layers {
                cfg.localization.layers = l.clone();
            }
            if let Some(t) = thetas {
                cfg.localization.thetas = t.clone();
            }
            if let Some(r) = radius {
                cfg.localization.radius = *r;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    fs::create_dir_all(&out)?;
    write(&out, "config.toml", &cfg.to_toml())?;

    match cli.command {
        Command::BuildMap { ingest, stuff, .. } => {
            let mut fs_in = parse_frame_records(&ingest)?;
            if let Some(path) = stuff {
                let vectors: Vec<Vec<f64>> = serde_json::from_str(&fs::read_to_string(path)?)?;
                fs_in = filter_stuff(&fs_in, &vectors, cfg.ingest.tau_stuff);
            }
            if cfg.ingest.filter_small {
                fs_in = filter_small(&fs_in, cfg.ingest.min_area_frac);
            }
            let g = build_map(&fs_in, &cfg.graph)?;
            save_map(&g, out.join("map.json"))?;
            let summary = summarize(&g);
            write_json(&out, "summary.json", &summary)?;
            println!(
                "nodes {} frames {} intra_edges {} inter_edges {} components {}",
                summary.nodes,
                summary.frames,
                summary.intra_edges,
                summary.inter_edges,
                summary.components
            );
        }
        Command::Plan {
            map,
            source_node,
            source_text_vec,
            target_node,
            target_text_vec,
            ..
        } => {
            let g = load_map(&map)?;
            let s = resolve_endpoint(&g, source_node, source_text_vec.as_deref(), "source")?;
            let t = resolve_endpoint(&g, target_node, target_text_vec.as_deref(), "target")?;
            let strategy = cfg.plan.strategy;
            let p = plan(&g, s, t, strategy)?;
            write(&out, "plan.json", &(plan_to_json(&p, &g, strategy)? + "\n"))?;
            write(&out, "plan.dot", &plan_to_dot(&p, &g))?;
            println!(
                "strategy {strategy} source {s} target {t} cost {} steps {}",
                p.cost,
                p.len()
            );
        }
        Command::Query {
            map,
            target_text_vec,
            reference_text_vec,
            ..
        } => {
            let g = load_map(&map)?;
            let q = RelationalQuery {
                target_vector: read_vector(&target_text_vec)?,
                reference_vector: read_vector(&reference_text_vec)?,
                k: cfg.plan.k,
            };
            let answer = resolve_relational_query(&q, &g, cfg.plan.strategy)?;
            write_json(&out, "answer.json", &answer)?;
            write(&out, "plan.dot", &plan_to_dot(&answer.plan, &g))?;
            println!(
                "goal {} reference {} cost {}",
                answer.goal, answer.reference, answer.plan.cost
            );
        }
        Command::Localize { map, query, .. } => {
            let g = load_map(&map)?;
            let q = parse_frame_records(&query)?;
            let (layer, theta) = (cfg.localization.layer, cfg.localization.theta_loc);
            let mut matches_csv =
                String::from("query_frame,query_segment,map_node,map_frame,similarity\n");
            let mut frames_csv = String::from("query_frame,localized_frame,matches\n");
            for (meta, records) in q.frames.iter().zip(&q.records) {
                let matches = localize_segments(records, &g, layer, theta)?;
                for m in &matches {
                    matches_csv.push_str(&format!(
                        "{},{},{},{},{:.6}\n",
                        m.query_segment.0,
                        m.query_segment.1,
                        m.map_node,
                        g.nodes[m.map_node].frame_id,
                        m.similarity
                    ));
                }
                let frame = localize_frame(&matches, &g);
                frames_csv.push_str(&format!(
                    "{},{},{}\n",
                    meta.frame_id,
                    frame.map(|f| f.to_string()).unwrap_or_default(),
                    matches.len()
                ));
            }
            write(&out, "matches.csv", &matches_csv)?;
            write(&out, "frames.csv", &frames_csv)?;
            println!("localized {} query frames", q.num_frames());
        }
        Command::SimNav { .. } => {
            let world = generate_world(&cfg.world)?;
            let g = build_map(&world.mapping_traverse()?, &cfg.graph)?;
            let pairs = benchmark_pairs(&world, &g, cfg.nav.trials, cfg.nav.min_gap, cfg.seed)?;
            let mut results = Vec::with_capacity(pairs.len());
            for (i, p) in pairs.iter().enumerate() {
                let r = run_navigation_trial(
                    &world,
                    &g,
                    p.start,
                    p.goal,
                    cfg.nav.mode,
                    cfg.nav.max_steps,
                    &cfg.control,
                    cfg.plan.strategy,
                )?;
                write(
                    &out,
                    &format!("commands_{i}.csv"),
                    &hopmap::control::command_log_csv(&r.command_log),
                )?;
                results.push(r);
            }
            save_map(&g, out.join("map.json"))?;
            write(&out, "trials.csv", &trial_results_csv(&results))?;
            write_json(&out, "pairs.json", &pairs)?;
            let ok = results.iter().filter(|r| r.success).count();
            println!(
                "mode {} successes {ok}/{}",
                cfg.nav.mode.name(),
                results.len()
            );
        }
        Command::EvalRecall { map, query, .. } => {
            let (g, q) = match (map, query) {
                (Some(m), Some(q)) => (load_map(&m)?, parse_frame_records(&q)?),
                _ => {
                    let world = generate_world(&cfg.world)?;
                    let g = build_map(&world.mapping_traverse()?, &cfg.graph)?;
                    (g, world.query_traverse()?)
                }
            };
            let loc = &cfg.localization;
            let table = eval_recall(&q, &g, &loc.layers, &loc.thetas, loc.radius)?;
            write(&out, "recall.csv", &table.to_csv())?;
            print!("{}", table.to_csv());
        }
        Command::EvalAssoc {
            map_views,
            query_views,
            ..
        } => {
            let (m, q) = match (map_views, query_views) {
                (Some(m), Some(q)) => (parse_frame_records(&m)?, parse_frame_records(&q)?),
                _ => {
                    let world = generate_world(&cfg.world)?;
                    (world.mapping_traverse()?, world.query_traverse()?)
                }
            };
            let scores = eval_association(&m, &q)?;
            write_json(&out, "association.json", &scores)?;
            println!(
                "instance_acc {:.6} category_acc {:.6} queries {}",
                scores.instance_acc, scores.category_acc, scores.n_queries
            );
        }
        Command::ExportDot { map, .. } => {
            let g = load_map(&map)?;
            write(&out, "map.dot", &map_to_dot(&g, &[]))?;
            println!("nodes {} edges {}", g.num_nodes(), g.edges.len());
        }
        Command::GenWorld { .. } => {
            let world = generate_world(&cfg.world)?;
            write_frame_records(&world.mapping_traverse()?, out.join("mapping.jsonl"))?;
            write_frame_records(&world.query_traverse()?, out.join("query.jsonl"))?;
            write_json(&out, "objects.json", &world.objects)?;
            println!(
                "objects {} frames {}",
                world.objects.len(),
                world.spec.n_frames
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
