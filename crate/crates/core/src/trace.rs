//! Trace event vocabulary, the line-delimited trace file format, and bundle loading.
//!
//! A trace file holds the events of one host, one JSON object per line:
//!
//! ```text
//! {"ts":1000,"host":"A","pid":42,"tid":42,"kind":"timer_init","timer_handle":7,"period_ns":5000000}
//! ```
//!
//! The common fields `ts`, `host`, `pid`, `tid` and `kind` are followed by exactly the
//! payload fields of that kind. Missing or extra fields are rejected.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use std::{
    fmt,
    fs::File,
    io::{self, BufRead, BufReader, BufWriter, Write},
    path::{Path, PathBuf},
    str::FromStr,
    sync::Arc,
};
use thiserror::Error;

/// Nanoseconds. Local to the emitting host until clock offsets are applied.
pub type Timestamp = i64;

/// Opaque host identifier, stable across one host's trace.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HostId(Arc<str>);

impl HostId {
    pub fn new(id: impl AsRef<str>) -> Option<Self> {
        let id = id.as_ref();
        if id.is_empty() {
            None
        } else {
            Some(HostId(Arc::from(id)))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for HostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for HostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl Serialize for HostId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for HostId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        HostId::new(s).ok_or_else(|| serde::de::Error::custom("host id must be non-empty"))
    }
}

/// (host, pid, handle): identifies one runtime object across a distributed trace.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct ObjectKey {
    pub host: HostId,
    pub pid: u32,
    pub handle: u64,
}

impl ObjectKey {
    pub fn new(host: HostId, pid: u32, handle: u64) -> Self {
        ObjectKey { host, pid, handle }
    }
}

impl fmt::Display for ObjectKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{:#x}", self.host, self.pid, self.handle)
    }
}

impl FromStr for ObjectKey {
    type Err = String;

    /// Parses `host/pid/handle`; the handle may be decimal or `0x` hex.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.rsplitn(3, '/');
        let (handle, pid, host) = match (parts.next(), parts.next(), parts.next()) {
            (Some(h), Some(p), Some(host)) => (h, p, host),
            _ => return Err(format!("expected host/pid/handle, got `{s}`")),
        };
        let host = HostId::new(host).ok_or("empty host")?;
        let pid = pid.parse().map_err(|_| format!("bad pid `{pid}`"))?;
        let handle = parse_int(handle).ok_or_else(|| format!("bad handle `{handle}`"))?;
        Ok(ObjectKey { host, pid, handle })
    }
}

fn parse_int(s: &str) -> Option<u64> {
    match s.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => s.parse().ok(),
    }
}

/// Globally-unique identifier of a middleware data writer, 1 to 24 bytes.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gid(Vec<u8>);

impl Gid {
    pub const MAX_LEN: usize = 24;

    pub fn new(bytes: Vec<u8>) -> Option<Self> {
        (!bytes.is_empty() && bytes.len() <= Self::MAX_LEN).then_some(Gid(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Gid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gid({})", hex::encode(&self.0))
    }
}

impl fmt::Display for Gid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(&self.0))
    }
}

impl Serialize for Gid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for Gid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        Gid::new(bytes).ok_or_else(|| serde::de::Error::custom("gid must be 1 to 24 bytes"))
    }
}

/// Indirect causal link type declared by an annotation.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkType {
    PeriodicAsync,
    PartialSync,
}

impl LinkType {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkType::PeriodicAsync => "periodic_async",
            LinkType::PartialSync => "partial_sync",
        }
    }
}

/// Event kind with its payload. Initialization events come first, runtime events after.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventKind {
    NodeInit {
        node_handle: u64,
        node_name: String,
        node_namespace: String,
    },
    PubInitRcl {
        publisher_handle: u64,
        node_handle: u64,
        rmw_publisher_handle: u64,
        topic_name: String,
    },
    PubInitRmw {
        rmw_publisher_handle: u64,
        gid: Gid,
    },
    PubInitDds {
        writer_handle: u64,
        gid: Gid,
        topic_name: String,
    },
    SubInitRcl {
        subscription_handle: u64,
        node_handle: u64,
        rmw_subscription_handle: u64,
        topic_name: String,
    },
    SubInitRmw {
        rmw_subscription_handle: u64,
        gid: Gid,
    },
    CallbackRegister {
        callback_ref: u64,
        owner_handle: u64,
    },
    TimerInit {
        timer_handle: u64,
        period_ns: i64,
    },
    TimerNodeLink {
        timer_handle: u64,
        node_handle: u64,
    },
    MessageLinkAnnotation {
        link_type: LinkType,
        subscription_handles: Vec<u64>,
        publisher_handles: Vec<u64>,
    },
    PublishRclcpp {
        publisher_handle: u64,
        message_ref: u64,
    },
    PublishRcl {
        publisher_handle: u64,
        message_ref: u64,
    },
    PublishRmw {
        rmw_publisher_handle: u64,
        message_ref: u64,
    },
    DdsWrite {
        writer_handle: u64,
        message_ref: u64,
        source_timestamp: Timestamp,
    },
    RmwTake {
        rmw_subscription_handle: u64,
        message_ref: u64,
        source_timestamp: Timestamp,
        taken: bool,
    },
    CallbackStart {
        callback_ref: u64,
    },
    CallbackEnd {
        callback_ref: u64,
    },
    ExecutorWaitBegin {},
    ExecutorWaitEnd {},
    ExecutorExecuteBegin {
        target_handle: u64,
    },
    ExecutorExecuteEnd {},
}

impl EventKind {
    /// Every kind name accepted in the `kind` field.
    pub const NAMES: [&'static str; 21] = [
        "node_init",
        "pub_init_rcl",
        "pub_init_rmw",
        "pub_init_dds",
        "sub_init_rcl",
        "sub_init_rmw",
        "callback_register",
        "timer_init",
        "timer_node_link",
        "message_link_annotation",
        "publish_rclcpp",
        "publish_rcl",
        "publish_rmw",
        "dds_write",
        "rmw_take",
        "callback_start",
        "callback_end",
        "executor_wait_begin",
        "executor_wait_end",
        "executor_execute_begin",
        "executor_execute_end",
    ];

    pub fn name(&self) -> &'static str {
        use EventKind::*;
        match self {
            NodeInit { .. } => "node_init",
            PubInitRcl { .. } => "pub_init_rcl",
            PubInitRmw { .. } => "pub_init_rmw",
            PubInitDds { .. } => "pub_init_dds",
            SubInitRcl { .. } => "sub_init_rcl",
            SubInitRmw { .. } => "sub_init_rmw",
            CallbackRegister { .. } => "callback_register",
            TimerInit { .. } => "timer_init",
            TimerNodeLink { .. } => "timer_node_link",
            MessageLinkAnnotation { .. } => "message_link_annotation",
            PublishRclcpp { .. } => "publish_rclcpp",
            PublishRcl { .. } => "publish_rcl",
            PublishRmw { .. } => "publish_rmw",
            DdsWrite { .. } => "dds_write",
            RmwTake { .. } => "rmw_take",
            CallbackStart { .. } => "callback_start",
            CallbackEnd { .. } => "callback_end",
            ExecutorWaitBegin {} => "executor_wait_begin",
            ExecutorWaitEnd {} => "executor_wait_end",
            ExecutorExecuteBegin { .. } => "executor_execute_begin",
            ExecutorExecuteEnd {} => "executor_execute_end",
        }
    }

    /// One-time initialization events, as opposed to runtime events.
    pub fn is_init(&self) -> bool {
        use EventKind::*;
        matches!(
            self,
            NodeInit { .. }
                | PubInitRcl { .. }
                | PubInitRmw { .. }
                | PubInitDds { .. }
                | SubInitRcl { .. }
                | SubInitRmw { .. }
                | CallbackRegister { .. }
                | TimerInit { .. }
                | TimerNodeLink { .. }
                | MessageLinkAnnotation { .. }
        )
    }

    fn check_values(&self) -> Result<(), ParseError> {
        match self {
            EventKind::TimerInit { period_ns, .. } if *period_ns <= 0 => Err(
                ParseError::SchemaViolation(format!("timer period must be positive, got {period_ns}")),
            ),
            EventKind::MessageLinkAnnotation {
                subscription_handles,
                publisher_handles,
                ..
            } if subscription_handles.is_empty() || publisher_handles.is_empty() => Err(
                ParseError::SchemaViolation("annotation handle arrays must be non-empty".into()),
            ),
            _ => Ok(()),
        }
    }
}

/// One timestamped trace record.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TraceEvent {
    pub ts: Timestamp,
    pub host: HostId,
    pub pid: u32,
    pub tid: u32,
    pub kind: EventKind,
}

#[derive(Serialize)]
struct Record<'a> {
    ts: Timestamp,
    host: &'a HostId,
    pid: u32,
    tid: u32,
    #[serde(flatten)]
    kind: &'a EventKind,
}

impl Serialize for TraceEvent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        Record {
            ts: self.ts,
            host: &self.host,
            pid: self.pid,
            tid: self.tid,
            kind: &self.kind,
        }
        .serialize(s)
    }
}

impl TraceEvent {
    /// Serializes to one trace-file line (without the newline).
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace events always serialize")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("unknown event kind `{0}`")]
    UnknownKind(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
}

fn take_field(map: &mut Map<String, Value>, name: &str) -> Result<Value, ParseError> {
    map.remove(name)
        .ok_or_else(|| ParseError::SchemaViolation(format!("missing field `{name}`")))
}

fn take_u32(map: &mut Map<String, Value>, name: &str) -> Result<u32, ParseError> {
    take_field(map, name)?
        .as_u64()
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| ParseError::SchemaViolation(format!("`{name}` must be a 32-bit unsigned integer")))
}

/// Parses and validates one trace record.
pub fn parse_event(line: &str) -> Result<TraceEvent, ParseError> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| ParseError::MalformedRecord(e.to_string()))?;
    let Value::Object(mut map) = value else {
        return Err(ParseError::MalformedRecord("record is not a JSON object".into()));
    };

    let kind_name = match map.get("kind") {
        Some(Value::String(k)) => k.clone(),
        Some(_) => return Err(ParseError::SchemaViolation("`kind` must be a string".into())),
        None => return Err(ParseError::SchemaViolation("missing field `kind`".into())),
    };
    if !EventKind::NAMES.contains(&kind_name.as_str()) {
        return Err(ParseError::UnknownKind(kind_name));
    }

    let ts = match take_field(&mut map, "ts")?.as_i64() {
        Some(ts) if ts < 0 => {
            return Err(ParseError::SchemaViolation(format!("negative timestamp {ts}")))
        }
        Some(ts) => ts,
        None => return Err(ParseError::SchemaViolation("`ts` must be a 64-bit integer".into())),
    };
    let host = match take_field(&mut map, "host")? {
        Value::String(h) => HostId::new(h)
            .ok_or_else(|| ParseError::SchemaViolation("`host` must be non-empty".into()))?,
        _ => return Err(ParseError::SchemaViolation("`host` must be a string".into())),
    };
    let pid = take_u32(&mut map, "pid")?;
    let tid = take_u32(&mut map, "tid")?;

    let kind = EventKind::deserialize(Value::Object(map))
        .map_err(|e| ParseError::SchemaViolation(format!("{kind_name}: {e}")))?;
    kind.check_values()?;
    Ok(TraceEvent { ts, host, pid, tid, kind })
}

/// All events of one host, sorted by timestamp.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HostTrace {
    pub host: HostId,
    pub events: Vec<TraceEvent>,
}

/// Per-host traces, ordered by host id. Immutable once built.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TraceBundle {
    traces: Vec<HostTrace>,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{}:{line}: {source}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        source: ParseError,
    },
    #[error("failed to read {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("host `{host}` is declared by more than one trace ({first} and {second})")]
    DuplicateHost {
        host: HostId,
        first: String,
        second: String,
    },
    #[error("{origin}: event for host `{found}` in trace of host `{expected}`")]
    HostMismatch {
        origin: String,
        expected: HostId,
        found: HostId,
    },
}

impl LoadError {
    /// True for errors caused by trace content rather than the filesystem.
    pub fn is_parse(&self) -> bool {
        !matches!(self, LoadError::Io { .. })
    }
}

impl TraceBundle {
    /// Builds a bundle from per-host event lists. Each list is stably sorted by timestamp.
    pub fn new(traces: Vec<HostTrace>) -> Result<Self, LoadError> {
        let labelled = traces
            .into_iter()
            .map(|t| (t.host.to_string(), t))
            .collect();
        Self::from_labelled(labelled)
    }

    fn from_labelled(traces: Vec<(String, HostTrace)>) -> Result<Self, LoadError> {
        let mut out: Vec<(String, HostTrace)> = Vec::with_capacity(traces.len());
        for (origin, mut trace) in traces {
            if let Some(bad) = trace.events.iter().find(|e| e.host != trace.host) {
                return Err(LoadError::HostMismatch {
                    origin,
                    expected: trace.host.clone(),
                    found: bad.host.clone(),
                });
            }
            if let Some((first, _)) = out.iter().find(|(_, t)| t.host == trace.host) {
                return Err(LoadError::DuplicateHost {
                    host: trace.host,
                    first: first.clone(),
                    second: origin,
                });
            }
            trace.events.sort_by_key(|e| e.ts);
            out.push((origin, trace));
        }
        let mut traces: Vec<HostTrace> = out.into_iter().map(|(_, t)| t).collect();
        traces.sort_by(|a, b| a.host.cmp(&b.host));
        Ok(TraceBundle { traces })
    }

    /// Groups a flat event list by host.
    pub fn from_events(events: impl IntoIterator<Item = TraceEvent>) -> Self {
        let mut traces: Vec<HostTrace> = Vec::new();
        for e in events {
            match traces.iter_mut().find(|t| t.host == e.host) {
                Some(t) => t.events.push(e),
                None => traces.push(HostTrace {
                    host: e.host.clone(),
                    events: vec![e],
                }),
            }
        }
        Self::new(traces).expect("grouping by host cannot produce duplicates or mismatches")
    }

    pub fn traces(&self) -> &[HostTrace] {
        &self.traces
    }

    pub fn event_count(&self) -> usize {
        self.traces.iter().map(|t| t.events.len()).sum()
    }

    pub fn events(&self) -> impl Iterator<Item = &TraceEvent> {
        self.traces.iter().flat_map(|t| t.events.iter())
    }
}

fn read_trace_file(path: &Path) -> Result<HostTrace, LoadError> {
    let file = File::open(path).map_err(|source| LoadError::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut events = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| LoadError::Io {
            path: path.to_owned(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let event = parse_event(&line).map_err(|source| LoadError::Parse {
            path: path.to_owned(),
            line: i + 1,
            source,
        })?;
        if let Some(first) = events.first() {
            let first: &TraceEvent = first;
            if first.host != event.host {
                return Err(LoadError::HostMismatch {
                    origin: format!("{}:{}", path.display(), i + 1),
                    expected: first.host.clone(),
                    found: event.host,
                });
            }
        }
        events.push(event);
    }
    // An empty file still contributes a trace; its host is named after the file.
    let host = match events.first() {
        Some(e) => e.host.clone(),
        None => path
            .file_stem()
            .and_then(|s| HostId::new(s.to_string_lossy()))
            .unwrap_or_else(|| HostId::new("unknown").unwrap()),
    };
    Ok(HostTrace { host, events })
}

/// Loads one trace file per host. Files are parsed concurrently.
pub fn load_bundle<P: AsRef<Path> + Sync>(paths: &[P]) -> Result<TraceBundle, LoadError> {
    let results: Vec<Result<HostTrace, LoadError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = paths
            .iter()
            .map(|p| scope.spawn(move || read_trace_file(p.as_ref())))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("trace reader panicked"))
            .collect()
    });
    let mut labelled = Vec::with_capacity(results.len());
    for (path, result) in paths.iter().zip(results) {
        labelled.push((path.as_ref().display().to_string(), result?));
    }
    TraceBundle::from_labelled(labelled)
}

/// Writes events in trace-file format.
pub fn write_trace<'a>(
    path: &Path,
    events: impl IntoIterator<Item = &'a TraceEvent>,
) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_timer_init() {
        let e = parse_event(
            r#"{"ts":1000,"host":"A","pid":42,"tid":42,"kind":"timer_init","timer_handle":7,"period_ns":5000000}"#,
        )
        .unwrap();
        assert_eq!(e.ts, 1000);
        assert_eq!(e.host.as_str(), "A");
        assert_eq!((e.pid, e.tid), (42, 42));
        assert_eq!(
            e.kind,
            EventKind::TimerInit {
                timer_handle: 7,
                period_ns: 5_000_000
            }
        );
    }

    #[test]
    fn rejects_negative_timestamp() {
        let err = parse_event(
            r#"{"ts":-5,"host":"A","pid":1,"tid":1,"kind":"executor_wait_begin"}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ParseError::SchemaViolation(m) if m.contains("negative")));
    }

    #[test]
    fn rejects_missing_source_timestamp() {
        let err = parse_event(
            r#"{"ts":5,"host":"A","pid":1,"tid":1,"kind":"dds_write","writer_handle":1,"message_ref":2}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ParseError::SchemaViolation(_)), "{err:?}");
    }

    #[test]
    fn rejects_extra_field_and_unknown_kind_and_garbage() {
        let extra = parse_event(
            r#"{"ts":5,"host":"A","pid":1,"tid":1,"kind":"executor_wait_end","bogus":1}"#,
        );
        assert!(matches!(extra, Err(ParseError::SchemaViolation(_))), "{extra:?}");
        let extra = parse_event(
            r#"{"ts":5,"host":"A","pid":1,"tid":1,"kind":"callback_start","callback_ref":1,"x":2}"#,
        );
        assert!(matches!(extra, Err(ParseError::SchemaViolation(_))));
        let unknown = parse_event(r#"{"ts":5,"host":"A","pid":1,"tid":1,"kind":"service_call"}"#);
        assert_eq!(unknown, Err(ParseError::UnknownKind("service_call".into())));
        assert!(matches!(parse_event("{not json"), Err(ParseError::MalformedRecord(_))));
        assert!(matches!(parse_event("[1,2]"), Err(ParseError::MalformedRecord(_))));
    }

    #[test]
    fn rejects_wrong_types_and_bad_values() {
        let cases = [
            r#"{"ts":5,"host":"A","pid":1,"tid":1,"kind":"callback_start","callback_ref":"x"}"#,
            r#"{"ts":5.5,"host":"A","pid":1,"tid":1,"kind":"executor_wait_end"}"#,
            r#"{"ts":5,"host":"","pid":1,"tid":1,"kind":"executor_wait_end"}"#,
            r#"{"ts":5,"host":"A","pid":-1,"tid":1,"kind":"executor_wait_end"}"#,
            r#"{"ts":5,"host":"A","pid":1,"tid":1,"kind":"timer_init","timer_handle":1,"period_ns":0}"#,
            r#"{"ts":5,"host":"A","pid":1,"tid":1,"kind":"pub_init_rmw","rmw_publisher_handle":1,"gid":"zz"}"#,
            r#"{"ts":5,"host":"A","pid":1,"tid":1,"kind":"pub_init_rmw","rmw_publisher_handle":1,"gid":""}"#,
            r#"{"ts":5,"host":"A","pid":1,"tid":1,"kind":"message_link_annotation","link_type":"partial_sync","subscription_handles":[],"publisher_handles":[1]}"#,
            r#"{"ts":5,"host":"A","pid":1,"tid":1,"kind":"message_link_annotation","link_type":"other","subscription_handles":[1],"publisher_handles":[1]}"#,
        ];
        for c in cases {
            assert!(matches!(parse_event(c), Err(ParseError::SchemaViolation(_))), "{c}");
        }
    }

    #[test]
    fn object_key_round_trips_through_display() {
        let key = ObjectKey::new(HostId::new("host-a").unwrap(), 1348, 0xdead);
        assert_eq!(key.to_string(), "host-a/1348/0xdead");
        assert_eq!(key.to_string().parse::<ObjectKey>().unwrap(), key);
        assert!("nope".parse::<ObjectKey>().is_err());
    }

    #[test]
    fn bundle_sorts_stably_and_rejects_duplicates() {
        let a = HostId::new("A").unwrap();
        let ev = |ts, tid| TraceEvent {
            ts,
            host: a.clone(),
            pid: 1,
            tid,
            kind: EventKind::ExecutorWaitBegin {},
        };
        let bundle = TraceBundle::new(vec![HostTrace {
            host: a.clone(),
            events: vec![ev(5, 1), ev(3, 2), ev(5, 3), ev(3, 4)],
        }])
        .unwrap();
        let tids: Vec<u32> = bundle.events().map(|e| e.tid).collect();
        assert_eq!(tids, vec![2, 4, 1, 3]);

        let dup = TraceBundle::new(vec![
            HostTrace { host: a.clone(), events: vec![] },
            HostTrace { host: a.clone(), events: vec![] },
        ]);
        assert!(matches!(dup, Err(LoadError::DuplicateHost { .. })));
    }

    fn arb_kind() -> impl Strategy<Value = EventKind> {
        let h = any::<u64>();
        let name = "[a-z_/]{0,12}";
        let gid = proptest::collection::vec(any::<u8>(), 1..=24).prop_map(|b| Gid::new(b).unwrap());
        let ts = 0i64..i64::MAX;
        prop_oneof![
            (h, name, name).prop_map(|(node_handle, node_name, node_namespace)| EventKind::NodeInit {
                node_handle,
                node_name,
                node_namespace
            }),
            (h, h, h, name).prop_map(|(a, b, c, t)| EventKind::PubInitRcl {
                publisher_handle: a,
                node_handle: b,
                rmw_publisher_handle: c,
                topic_name: t
            }),
            (h, gid.clone()).prop_map(|(a, gid)| EventKind::PubInitRmw { rmw_publisher_handle: a, gid }),
            (h, gid.clone(), name).prop_map(|(a, gid, t)| EventKind::PubInitDds {
                writer_handle: a,
                gid,
                topic_name: t
            }),
            (h, gid).prop_map(|(a, gid)| EventKind::SubInitRmw { rmw_subscription_handle: a, gid }),
            (h, 1i64..i64::MAX).prop_map(|(a, p)| EventKind::TimerInit { timer_handle: a, period_ns: p }),
            (
                prop_oneof![Just(LinkType::PeriodicAsync), Just(LinkType::PartialSync)],
                proptest::collection::vec(h, 1..4),
                proptest::collection::vec(h, 1..4)
            )
                .prop_map(|(link_type, s, p)| EventKind::MessageLinkAnnotation {
                    link_type,
                    subscription_handles: s,
                    publisher_handles: p
                }),
            (h, h, ts.clone()).prop_map(|(a, b, s)| EventKind::DdsWrite {
                writer_handle: a,
                message_ref: b,
                source_timestamp: s
            }),
            (h, h, ts, any::<bool>()).prop_map(|(a, b, s, taken)| EventKind::RmwTake {
                rmw_subscription_handle: a,
                message_ref: b,
                source_timestamp: s,
                taken
            }),
            h.prop_map(|r| EventKind::CallbackStart { callback_ref: r }),
            Just(EventKind::ExecutorWaitBegin {}),
            Just(EventKind::ExecutorExecuteEnd {}),
            h.prop_map(|t| EventKind::ExecutorExecuteBegin { target_handle: t }),
        ]
    }

    proptest! {
        #[test]
        fn serialized_events_parse_back_equal(
            ts in 0i64..i64::MAX, host in "[A-Za-z0-9-]{1,8}", pid: u32, tid: u32, kind in arb_kind()
        ) {
            let event = TraceEvent { ts, host: HostId::new(host).unwrap(), pid, tid, kind };
            let parsed = parse_event(&event.to_line()).unwrap();
            prop_assert_eq!(parsed, event);
        }

        #[test]
        fn parser_never_panics_on_arbitrary_input(line in ".{0,200}") {
            let _ = parse_event(&line);
        }

        #[test]
        fn parser_never_panics_on_mutated_records(
            kind in proptest::sample::select(EventKind::NAMES.to_vec()),
            field in "[a-z_]{1,20}", value in prop_oneof![
                Just("1".to_string()), Just("-1".to_string()), Just("\"x\"".to_string()),
                Just("[]".to_string()), Just("null".to_string()), Just("1e99".to_string())
            ]
        ) {
            let line = format!(
                r#"{{"ts":1,"host":"A","pid":1,"tid":1,"kind":"{kind}","{field}":{value}}}"#
            );
            let _ = parse_event(&line);
        }
    }
}
