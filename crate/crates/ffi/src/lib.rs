//! C ABI over the `hopmap` engine.
//!
//! Objects cross the boundary as opaque handles created and destroyed by
//! this library. Fallible calls return a [`HopmapStatus`]; the message of
//! the most recent failure on the calling thread is available from
//! [`hopmap_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use hopmap::graph::{load_map, save_map};
use hopmap::ingest::{parse_frame_records, parse_frame_records_str};
use hopmap::localization::{localize_frame, localize_segments};
use hopmap::planning::resolve_text_query;
use hopmap::{
    build_map, EdgeKind, FrameSet, GraphConfig, HopmapError, IntraMode, MapGraph, Plan,
    PlanStrategy,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HopmapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    QueryFailed = 3,
    PlanningFailed = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HopmapIntraMode {
    Delaunay = 0,
    Complete = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HopmapStrategy {
    IntraDt = 0,
    IntraAll = 1,
    DaAll = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HopmapEdgeKind {
    Intra = 0,
    Inter = 1,
}

/// Map construction parameters. Inter-image matching searches frame gaps
/// `1..=window_max`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HopmapGraphConfig {
    pub theta: f64,
    pub window_max: u32,
    pub intra_mode: HopmapIntraMode,
    pub l_max: u32,
    pub renormalize_layers: bool,
    pub pano_wrap: bool,
}

pub struct HopmapFrameSet(FrameSet);
pub struct HopmapMap(MapGraph);
pub struct HopmapPlan(Plan);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul bytes were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &HopmapError) -> HopmapStatus {
    match e {
        HopmapError::Io(_) => HopmapStatus::Io,
        _ => match e.exit_code() {
            3 => HopmapStatus::QueryFailed,
            4 => HopmapStatus::PlanningFailed,
            _ => HopmapStatus::InvalidInput,
        },
    }
}

fn fail(status: HopmapStatus, msg: impl Into<String>) -> HopmapStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, recording errors and converting panics into a status.
fn guard(f: impl FnOnce() -> Result<(), HopmapStatus>) -> HopmapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HopmapStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(HopmapStatus::Panic, msg)
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, HopmapStatus>;
}

impl<T> OrStatus<T> for hopmap::Result<T> {
    fn or_status(self) -> Result<T, HopmapStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, HopmapStatus> {
    p.as_ref()
        .ok_or_else(|| fail(HopmapStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, HopmapStatus> {
    p.as_mut()
        .ok_or_else(|| fail(HopmapStatus::NullPointer, format!("{what} is null")))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, HopmapStatus> {
    Ok(PathBuf::from(str_arg(p, "path")?))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, HopmapStatus> {
    if p.is_null() {
        return Err(fail(HopmapStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(HopmapStatus::InvalidInput, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hopmap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hopmap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads an ingest file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hopmap_frameset_load(
    path: *const c_char,
    out: *mut *mut HopmapFrameSet,
) -> HopmapStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let fs = parse_frame_records(path_arg(path)?).or_status()?;
        *out = Box::into_raw(Box::new(HopmapFrameSet(fs)));
        Ok(())
    })
}

/// Parses ingest text held in memory.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hopmap_frameset_parse(
    text: *const c_char,
    out: *mut *mut HopmapFrameSet,
) -> HopmapStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let text = str_arg(text, "text")?;
        let fs = parse_frame_records_str(text, "<memory>".as_ref()).or_status()?;
        *out = Box::into_raw(Box::new(HopmapFrameSet(fs)));
        Ok(())
    })
}

/// # Safety
/// `fs` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hopmap_frameset_free(fs: *mut HopmapFrameSet) {
    if !fs.is_null() {
        drop(Box::from_raw(fs));
    }
}

/// # Safety
/// `fs` must be a valid handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn hopmap_frameset_num_frames(fs: *const HopmapFrameSet) -> usize {
    fs.as_ref().map_or(0, |f| f.0.num_frames())
}

/// # Safety
/// `fs` must be a valid handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn hopmap_frameset_num_records(fs: *const HopmapFrameSet) -> usize {
    fs.as_ref().map_or(0, |f| f.0.num_records())
}

#[no_mangle]
pub extern "C" fn hopmap_graph_config_default() -> HopmapGraphConfig {
    let d = GraphConfig::default();
    HopmapGraphConfig {
        theta: d.theta,
        window_max: d.window.iter().copied().max().unwrap_or(1) as u32,
        intra_mode: HopmapIntraMode::Delaunay,
        l_max: d.l_max as u32,
        renormalize_layers: d.renormalize_layers,
        pano_wrap: d.pano_wrap,
    }
}

fn graph_config(c: &HopmapGraphConfig) -> GraphConfig {
    GraphConfig {
        theta: c.theta,
        window: (1..=c.window_max as usize).collect(),
        intra_mode: match c.intra_mode {
            HopmapIntraMode::Delaunay => IntraMode::Delaunay,
            HopmapIntraMode::Complete => IntraMode::Complete,
        },
        l_max: c.l_max as usize,
        renormalize_layers: c.renormalize_layers,
        pano_wrap: c.pano_wrap,
    }
}

/// Builds a map. A null `config` means defaults.
///
/// # Safety
/// `fs` must be a valid handle, `config` valid or null, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hopmap_map_build(
    fs: *const HopmapFrameSet,
    config: *const HopmapGraphConfig,
    out: *mut *mut HopmapMap,
) -> HopmapStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let fs = deref(fs, "frameset")?;
        let cfg = config
            .as_ref()
            .map_or_else(GraphConfig::default, graph_config);
        let g = build_map(&fs.0, &cfg).or_status()?;
        *out = Box::into_raw(Box::new(HopmapMap(g)));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hopmap_map_load(
    path: *const c_char,
    out: *mut *mut HopmapMap,
) -> HopmapStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let g = load_map(path_arg(path)?).or_status()?;
        *out = Box::into_raw(Box::new(HopmapMap(g)));
        Ok(())
    })
}

/// # Safety
/// `map` must be a valid handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hopmap_map_save(
    map: *const HopmapMap,
    path: *const c_char,
) -> HopmapStatus {
    guard(|| {
        let g = deref(map, "map")?;
        save_map(&g.0, path_arg(path)?).or_status()
    })
}

/// # Safety
/// `map` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hopmap_map_free(map: *mut HopmapMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// # Safety
/// `map` must be a valid handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn hopmap_map_num_nodes(map: *const HopmapMap) -> usize {
    map.as_ref().map_or(0, |g| g.0.num_nodes())
}

/// # Safety
/// `map` must be a valid handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn hopmap_map_num_frames(map: *const HopmapMap) -> usize {
    map.as_ref().map_or(0, |g| g.0.num_frames())
}

/// # Safety
/// `map` must be a valid handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn hopmap_map_num_edges(
    map: *const HopmapMap,
    kind: HopmapEdgeKind,
) -> usize {
    let kind = match kind {
        HopmapEdgeKind::Intra => EdgeKind::Intra,
        HopmapEdgeKind::Inter => EdgeKind::Inter,
    };
    map.as_ref().map_or(0, |g| g.0.count_edges(kind))
}

/// Frame that node `node` was observed in.
///
/// # Safety
/// `map` must be a valid handle and `out_frame` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hopmap_map_node_frame(
    map: *const HopmapMap,
    node: usize,
    out_frame: *mut usize,
) -> HopmapStatus {
    guard(|| {
        let g = deref(map, "map")?;
        let out = out_ptr(out_frame, "out_frame")?;
        let n = g.0.nodes.get(node).ok_or_else(|| {
            fail(
                HopmapStatus::InvalidInput,
                HopmapError::UnknownNode(node).to_string(),
            )
        })?;
        *out = n.frame_id;
        Ok(())
    })
}

fn strategy(s: HopmapStrategy) -> PlanStrategy {
    match s {
        HopmapStrategy::IntraDt => PlanStrategy::IntraDt,
        HopmapStrategy::IntraAll => PlanStrategy::IntraAll,
        HopmapStrategy::DaAll => PlanStrategy::DaAll,
    }
}

/// Minimum-hop plan from `source` to `target`.
///
/// # Safety
/// `map` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hopmap_plan(
    map: *const HopmapMap,
    source: usize,
    target: usize,
    strat: HopmapStrategy,
    out: *mut *mut HopmapPlan,
) -> HopmapStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let g = deref(map, "map")?;
        let p = hopmap::planning::plan(&g.0, source, target, strategy(strat)).or_status()?;
        *out = Box::into_raw(Box::new(HopmapPlan(p)));
        Ok(())
    })
}

/// # Safety
/// `plan` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hopmap_plan_free(plan: *mut HopmapPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Number of nodes on the plan, endpoints included.
///
/// # Safety
/// `plan` must be a valid handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn hopmap_plan_len(plan: *const HopmapPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.0.len())
}

/// Number of intra-image edges on the plan.
///
/// # Safety
/// `plan` must be a valid handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn hopmap_plan_cost(plan: *const HopmapPlan) -> u32 {
    plan.as_ref().map_or(0, |p| p.0.cost)
}

/// Pointer to the plan's `hopmap_plan_len` node ids, owned by the plan.
///
/// # Safety
/// `plan` must be a valid handle or null (which yields null).
#[no_mangle]
pub unsafe extern "C" fn hopmap_plan_steps(plan: *const HopmapPlan) -> *const usize {
    plan.as_ref().map_or(ptr::null(), |p| p.0.steps.as_ptr())
}

/// Top-`k` nodes by semantic similarity to a text embedding. Writes up to
/// `capacity` node ids and similarities and the number written.
///
/// # Safety
/// `vector` must point to `dim` doubles; `out_nodes` and `out_sims` to
/// `capacity` elements each; `out_count` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hopmap_resolve_text(
    map: *const HopmapMap,
    vector: *const f64,
    dim: usize,
    k: usize,
    out_nodes: *mut usize,
    out_sims: *mut f64,
    capacity: usize,
    out_count: *mut usize,
) -> HopmapStatus {
    guard(|| {
        let g = deref(map, "map")?;
        let count = out_ptr(out_count, "out_count")?;
        if vector.is_null() || (capacity > 0 && (out_nodes.is_null() || out_sims.is_null())) {
            return Err(fail(
                HopmapStatus::NullPointer,
                "vector or output buffer is null",
            ));
        }
        let v = std::slice::from_raw_parts(vector, dim);
        let hits = resolve_text_query(v, &g.0, k).or_status()?;
        let n = hits.len().min(capacity);
        for (i, (node, sim)) in hits.into_iter().take(n).enumerate() {
            *out_nodes.add(i) = node;
            *out_sims.add(i) = sim;
        }
        *count = n;
        Ok(())
    })
}

/// Localizes frame `frame_index` of a query frame set: segments matched at
/// `layer` above `theta_loc` vote for a map frame. `out_frame` receives the
/// frame, or -1 when nothing matched.
///
/// # Safety
/// `map` and `query` must be valid handles and `out_frame` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hopmap_localize(
    map: *const HopmapMap,
    query: *const HopmapFrameSet,
    frame_index: usize,
    layer: u32,
    theta_loc: f64,
    out_frame: *mut i64,
) -> HopmapStatus {
    guard(|| {
        let g = deref(map, "map")?;
        let q = deref(query, "query")?;
        let out = out_ptr(out_frame, "out_frame")?;
        let records = q.0.records.get(frame_index).ok_or_else(|| {
            fail(
                HopmapStatus::InvalidInput,
                format!("query has {} frames", q.0.num_frames()),
            )
        })?;
        let matches = localize_segments(records, &g.0, layer as usize, theta_loc).or_status()?;
        *out = localize_frame(&matches, &g.0).map_or(-1, |f| f as i64);
        Ok(())
    })
}
