//! C ABI over the msgflow analysis library.
//!
//! Documents and flow graphs cross the boundary as opaque handles. Every fallible call
//! returns a [`MsgflowStatus`]; on failure [`msgflow_last_error`] describes the cause.
//! Strings returned through out-pointers are owned by the caller and released with
//! [`msgflow_string_free`].

use msgflow::{
    analyze,
    flow::{build_flow, export_flow, Direction, FlowFormat, FlowGraph, LatencyRow, SeedSelector},
    timeline,
    trace::load_bundle,
    AnalysisDocument, AnalyzeOptions, HostId, SyncMode,
};
use std::{
    cell::RefCell,
    ffi::{c_char, CStr, CString},
    panic::{catch_unwind, AssertUnwindSafe},
    path::PathBuf,
    ptr,
};

/// Result of every fallible call. Codes 1 to 4 match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MsgflowStatus {
    Ok = 0,
    Error = 1,
    Parse = 2,
    Sync = 3,
    Seed = 4,
    InvalidArgument = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MsgflowSyncMode {
    Pairs = 0,
    AssumeSynchronized = 1,
}

#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MsgflowDirection {
    Forward = 0,
    Backward = 1,
    Both = 2,
}

#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MsgflowFlowFormat {
    Dot = 0,
    Json = 1,
    SvgTimeline = 2,
}

#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MsgflowTimelineFormat {
    Svg = 0,
    Json = 1,
}

#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct MsgflowLinkCounts {
    pub transport: usize,
    pub direct: usize,
    pub indirect: usize,
}

/// An analyzed trace bundle.
pub struct MsgflowDocument(AnalysisDocument);

/// A message flow traced from one seed.
pub struct MsgflowFlow {
    graph: FlowGraph,
    latencies: Vec<LatencyRow>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MsgflowStatus, String);

type Result<T> = std::result::Result<T, Failure>;

fn fail<T>(status: MsgflowStatus, message: impl Into<String>) -> Result<T> {
    Err(Failure(status, message.into()))
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<()>) -> MsgflowStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MsgflowStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MsgflowStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str> {
    if p.is_null() {
        return fail(MsgflowStatus::InvalidArgument, format!("{name} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(MsgflowStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T> {
    p.as_ref().map_or_else(|| fail(MsgflowStatus::InvalidArgument, format!("{name} is null")), Ok)
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<()> {
    if p.is_null() {
        return fail(MsgflowStatus::InvalidArgument, format!("{name} is null"));
    }
    Ok(())
}

fn string_out(text: String) -> Result<*mut c_char> {
    CString::new(text)
        .map(CString::into_raw)
        .or_else(|_| fail(MsgflowStatus::Error, "output contains a nul byte"))
}

/// Message describing the last failure on this thread, or NULL after a success.
/// The pointer stays valid until the next msgflow call on the same thread.
#[no_mangle]
pub extern "C" fn msgflow_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn msgflow_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads `count` JSONL trace files and runs the analysis.
///
/// `reference_host` may be NULL to use the lexicographically smallest host.
///
/// # Safety
/// `paths` must point to `count` valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msgflow_analyze_files(
    paths: *const *const c_char,
    count: usize,
    sync_mode: MsgflowSyncMode,
    reference_host: *const c_char,
    min_one_way_delay_ns: i64,
    out: *mut *mut MsgflowDocument,
) -> MsgflowStatus {
    guard(|| {
        out_arg(out, "out")?;
        if paths.is_null() || count == 0 {
            return fail(MsgflowStatus::Parse, "no trace files given");
        }
        let files = std::slice::from_raw_parts(paths, count)
            .iter()
            .map(|p| str_arg(*p, "path").map(PathBuf::from))
            .collect::<Result<Vec<_>>>()?;
        let bundle = load_bundle(&files).or_else(|e| {
            fail(if e.is_parse() { MsgflowStatus::Parse } else { MsgflowStatus::Error }, e.to_string())
        })?;
        if bundle.event_count() == 0 {
            return fail(MsgflowStatus::Parse, "trace files contain no events");
        }
        let reference = if reference_host.is_null() {
            None
        } else {
            let r = str_arg(reference_host, "reference_host")?;
            Some(HostId::new(r).map_or_else(|| fail(MsgflowStatus::InvalidArgument, format!("invalid host id `{r}`")), Ok)?)
        };
        let sync_mode = match sync_mode {
            MsgflowSyncMode::Pairs => SyncMode::Pairs,
            MsgflowSyncMode::AssumeSynchronized => SyncMode::AssumeSynchronized,
        };
        let opts = AnalyzeOptions { sync_mode, reference, min_one_way_delay_ns };
        let doc = analyze(&bundle, &opts).or_else(|e| fail(MsgflowStatus::Sync, e.to_string()))?;
        *out = Box::into_raw(Box::new(MsgflowDocument(doc)));
        Ok(())
    })
}

/// Parses a serialized analysis document.
///
/// # Safety
/// `json` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msgflow_document_from_json(json: *const c_char, out: *mut *mut MsgflowDocument) -> MsgflowStatus {
    guard(|| {
        out_arg(out, "out")?;
        let doc = AnalysisDocument::from_json(str_arg(json, "json")?).or_else(|e| fail(MsgflowStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(MsgflowDocument(doc)));
        Ok(())
    })
}

/// Serializes the document; free the result with [`msgflow_string_free`].
///
/// # Safety
/// `doc` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msgflow_document_to_json(doc: *const MsgflowDocument, out: *mut *mut c_char) -> MsgflowStatus {
    guard(|| {
        out_arg(out, "out")?;
        *out = string_out(ref_arg(doc, "doc")?.0.to_json())?;
        Ok(())
    })
}

/// # Safety
/// `doc` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msgflow_document_link_counts(doc: *const MsgflowDocument, out: *mut MsgflowLinkCounts) -> MsgflowStatus {
    guard(|| {
        out_arg(out, "out")?;
        let (transport, direct, indirect) = ref_arg(doc, "doc")?.0.links.counts();
        *out = MsgflowLinkCounts { transport, direct, indirect };
        Ok(())
    })
}

/// Number of diagnostics recorded while building the document.
///
/// # Safety
/// `doc` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn msgflow_document_diagnostic_count(doc: *const MsgflowDocument) -> usize {
    doc.as_ref().map_or(0, |d| d.0.diagnostics.len())
}

/// # Safety
/// `doc` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn msgflow_document_free(doc: *mut MsgflowDocument) {
    if !doc.is_null() {
        drop(Box::from_raw(doc));
    }
}

fn direction(d: MsgflowDirection) -> Direction {
    match d {
        MsgflowDirection::Forward => Direction::Forward,
        MsgflowDirection::Backward => Direction::Backward,
        MsgflowDirection::Both => Direction::Both,
    }
}

unsafe fn flow(
    doc: *const MsgflowDocument,
    seed: SeedSelector,
    dir: MsgflowDirection,
    out: *mut *mut MsgflowFlow,
) -> Result<()> {
    out_arg(out, "out")?;
    let graph = build_flow(&ref_arg(doc, "doc")?.0, &seed, direction(dir)).or_else(|e| fail(MsgflowStatus::Seed, e.to_string()))?;
    let latencies = graph.latencies().or_else(|e| fail(MsgflowStatus::Error, e.to_string()))?;
    *out = Box::into_raw(Box::new(MsgflowFlow { graph, latencies }));
    Ok(())
}

/// Traces the flow through the publication on `topic` with `source_timestamp`.
///
/// # Safety
/// `doc` must be a live handle, `topic` a valid C string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn msgflow_flow_from_publication(
    doc: *const MsgflowDocument,
    topic: *const c_char,
    source_timestamp: i64,
    dir: MsgflowDirection,
    out: *mut *mut MsgflowFlow,
) -> MsgflowStatus {
    guard(|| {
        let seed = SeedSelector::Publication { topic: str_arg(topic, "topic")?.to_string(), source_timestamp };
        flow(doc, seed, dir, out)
    })
}

/// Traces the flow through the `index`-th callback of `owner`.
///
/// # Safety
/// `doc` must be a live handle, `owner` a valid C string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn msgflow_flow_from_callback(
    doc: *const MsgflowDocument,
    owner: *const c_char,
    index: u32,
    dir: MsgflowDirection,
    out: *mut *mut MsgflowFlow,
) -> MsgflowStatus {
    guard(|| {
        let seed = SeedSelector::Callback { owner: str_arg(owner, "owner")?.to_string(), index };
        flow(doc, seed, dir, out)
    })
}

/// Traces the flow through the callback of `owner` running at reference time `ts`.
///
/// # Safety
/// `doc` must be a live handle, `owner` a valid C string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn msgflow_flow_from_callback_at(
    doc: *const MsgflowDocument,
    owner: *const c_char,
    ts: i64,
    dir: MsgflowDirection,
    out: *mut *mut MsgflowFlow,
) -> MsgflowStatus {
    guard(|| {
        let seed = SeedSelector::CallbackAt { owner: str_arg(owner, "owner")?.to_string(), ts };
        flow(doc, seed, dir, out)
    })
}

/// Number of edges in the flow graph.
///
/// # Safety
/// `flow` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn msgflow_flow_edge_count(flow: *const MsgflowFlow) -> usize {
    flow.as_ref().map_or(0, |f| f.graph.edges.len())
}

/// Number of leaves with an end-to-end latency.
///
/// # Safety
/// `flow` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn msgflow_flow_leaf_count(flow: *const MsgflowFlow) -> usize {
    flow.as_ref().map_or(0, |f| f.latencies.len())
}

/// End-to-end latency of the `i`-th leaf, in leaf order of the latency table.
///
/// # Safety
/// `flow` must be a live handle; `latency_ns` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msgflow_flow_leaf_latency(flow: *const MsgflowFlow, i: usize, latency_ns: *mut i64) -> MsgflowStatus {
    guard(|| {
        out_arg(latency_ns, "latency_ns")?;
        let f = ref_arg(flow, "flow")?;
        let Some(row) = f.latencies.get(i) else {
            return fail(MsgflowStatus::InvalidArgument, format!("leaf {i} out of range ({} leaves)", f.latencies.len()));
        };
        *latency_ns = row.latency_ns;
        Ok(())
    })
}

/// Renders the flow; `px_per_ms` and `lane_height` apply to the SVG timeline only.
///
/// # Safety
/// `flow` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msgflow_flow_export(
    flow: *const MsgflowFlow,
    format: MsgflowFlowFormat,
    px_per_ms: f64,
    lane_height: u32,
    out: *mut *mut c_char,
) -> MsgflowStatus {
    guard(|| {
        out_arg(out, "out")?;
        let f = ref_arg(flow, "flow")?;
        let format = match format {
            MsgflowFlowFormat::Dot => FlowFormat::Dot,
            MsgflowFlowFormat::Json => FlowFormat::Json,
            MsgflowFlowFormat::SvgTimeline => {
                if !px_per_ms.is_finite() || px_per_ms <= 0.0 || lane_height == 0 {
                    return fail(MsgflowStatus::InvalidArgument, "timeline scale must be positive");
                }
                FlowFormat::SvgTimeline { px_per_ms, lane_height }
            }
        };
        let text = export_flow(&f.graph, format).or_else(|e| fail(MsgflowStatus::Error, e.to_string()))?;
        *out = string_out(text)?;
        Ok(())
    })
}

/// # Safety
/// `flow` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn msgflow_flow_free(flow: *mut MsgflowFlow) {
    if !flow.is_null() {
        drop(Box::from_raw(flow));
    }
}

/// Earliest and latest executor timestamps in the document.
///
/// # Safety
/// `doc` must be a live handle; `from` and `to` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msgflow_document_window(doc: *const MsgflowDocument, from: *mut i64, to: *mut i64) -> MsgflowStatus {
    guard(|| {
        out_arg(from, "from")?;
        out_arg(to, "to")?;
        let Some((t0, t1)) = timeline::full_window(&ref_arg(doc, "doc")?.0.ir) else {
            return fail(MsgflowStatus::Error, "document has no executor intervals");
        };
        (*from, *to) = (t0, t1);
        Ok(())
    })
}

/// Renders the executor state timeline over `[from, to]`.
///
/// # Safety
/// `doc` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msgflow_executor_export(
    doc: *const MsgflowDocument,
    from: i64,
    to: i64,
    format: MsgflowTimelineFormat,
    px_per_ms: f64,
    lane_height: u32,
    out: *mut *mut c_char,
) -> MsgflowStatus {
    guard(|| {
        out_arg(out, "out")?;
        let doc = ref_arg(doc, "doc")?;
        let lanes = timeline::build_timeline(&doc.0.ir, (from, to)).or_else(|e| fail(MsgflowStatus::Parse, e.to_string()))?;
        let text = match format {
            MsgflowTimelineFormat::Svg => {
                if !px_per_ms.is_finite() || px_per_ms <= 0.0 || lane_height == 0 {
                    return fail(MsgflowStatus::InvalidArgument, "timeline scale must be positive");
                }
                timeline::to_svg(&lanes, (from, to), px_per_ms, lane_height)
            }
            MsgflowTimelineFormat::Json => timeline::to_json(&lanes, (from, to)),
        };
        *out = string_out(text)?;
        Ok(())
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a string returned by msgflow and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn msgflow_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
