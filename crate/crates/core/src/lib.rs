//! Message flow reconstruction for distributed publish-subscribe systems.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`trace`] parses per-host line-delimited trace files into a [`trace::TraceBundle`].
//! * [`ir`] correlates initialization and runtime events into an [`ir::IrDatabase`]
//!   of objects (nodes, publishers, subscriptions, timers) and instances
//!   (publications, callbacks, executor states).
//! * [`clock`] estimates per-host clock offsets from matched cross-host messages.
//! * [`links`] infers transport, direct and indirect (annotated) causal links.
//! * [`flow`] builds the message flow DAG for one seed and computes end-to-end latency.
//! * [`timeline`] derives executor state lanes and utilization.
//! * [`sim`] is a deterministic simulator producing traces plus exact ground truth.
//! * [`validate`] diffs an analysis against simulator ground truth.

pub mod analysis;
pub mod cli;
pub mod clock;
pub mod diag;
pub mod flow;
pub mod identity;
pub mod ir;
pub mod links;
pub mod sim;
pub mod timeline;
pub mod trace;
pub mod validate;

pub use analysis::{analyze, AnalysisDocument, AnalyzeOptions, SyncMode};
pub use trace::{HostId, ObjectKey, Timestamp, TraceBundle, TraceEvent};
