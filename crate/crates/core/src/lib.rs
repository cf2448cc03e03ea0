//! Topological maps whose nodes are image segments.
//!
//! Segments observed along a traverse become graph nodes. Segments of the
//! same image are linked through their centroids, segments of nearby images
//! through descriptor association. On top of that map this crate provides
//! segment-level localization, text-driven goal selection, 0/1-weighted
//! "hop" plans, object-level control, and a deterministic synthetic world
//! that exercises all of it end to end.

pub mod config;
pub mod control;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod localization;
pub mod planning;
pub mod simworld;
pub mod vector;

pub use error::{HopmapError, Result};
pub use graph::{build_map, EdgeKind, GraphConfig, IntraMode, MapEdge, MapGraph, MapNode};
pub use ingest::{FrameMeta, FrameSet, SegmentRecord};
pub use planning::{Plan, PlanStrategy};
