//! Non-fatal analysis findings.

use crate::trace::{HostId, Timestamp};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    DuplicateObject,
    UnresolvedHandle,
    IncompletePublisher,
    GidMismatch,
    TopicMismatch,
    LayerOrderViolation,
    PublicationWindowReuse,
    IncompletePublication,
    UntakenTake,
    UnconsumedTake,
    MissingTake,
    UnmatchedCallbackEnd,
    UnterminatedCallback,
    UnmatchedExecutorEvent,
    UnterminatedExecutorState,
    UnresolvedAnnotation,
    OrphanReception,
    TimestampCollision,
    AnnotationMisuse,
    EmptyInputCache,
    AmbiguousCacheState,
    ClockSync,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit enum");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

/// A finding attached to a location in the trace. `events` counts the runtime
/// events this diagnostic absorbed, so that nothing is lost silently.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub host: Option<HostId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pid: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tid: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ts: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub events: u32,
}

fn is_zero(n: &u32) -> bool {
    *n == 0
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, message: impl Into<String>) -> Self {
        Diagnostic {
            kind,
            message: message.into(),
            host: None,
            pid: None,
            tid: None,
            ts: None,
            events: 0,
        }
    }

    pub fn at(mut self, host: &HostId, pid: u32, tid: Option<u32>) -> Self {
        self.host = Some(host.clone());
        self.pid = Some(pid);
        self.tid = tid;
        self
    }

    pub fn ts(mut self, ts: Timestamp) -> Self {
        self.ts = Some(ts);
        self
    }

    pub fn absorbing(mut self, events: u32) -> Self {
        self.events = events;
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if let (Some(h), Some(p)) = (&self.host, self.pid) {
            write!(f, " [{h}/{p}")?;
            if let Some(t) = self.tid {
                write!(f, "/{t}")?;
            }
            f.write_str("]")?;
        }
        if let Some(ts) = self.ts {
            write!(f, " @{ts}")?;
        }
        write!(f, ": {}", self.message)
    }
}
