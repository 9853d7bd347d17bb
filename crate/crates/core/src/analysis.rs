//! The end-to-end analysis pipeline and its self-contained output document.

use crate::{
    clock::{apply_offsets, collect_sync_pairs, estimate_offsets, identity_mappings, ClockMapping, SyncError},
    diag::Diagnostic,
    identity::Identities,
    ir::{build_ir, IrDatabase, IrIndex},
    links::{infer_all, LinkSet},
    trace::{HostId, TraceBundle},
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ANALYSIS_VERSION: u32 = 1;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyncMode {
    /// Estimate offsets from matched cross-host messages.
    #[default]
    Pairs,
    /// Treat all host clocks as already aligned.
    AssumeSynchronized,
}

impl std::str::FromStr for SyncMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pairs" => Ok(SyncMode::Pairs),
            "assume-synchronized" => Ok(SyncMode::AssumeSynchronized),
            _ => Err(format!("unknown sync mode `{s}` (pairs, assume-synchronized)")),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct AnalyzeOptions {
    pub sync_mode: SyncMode,
    /// Defaults to the lexicographically smallest host.
    pub reference: Option<HostId>,
    /// Assumed lower bound on one-way delay, used for one-directional host pairs.
    pub min_one_way_delay_ns: i64,
}

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("clock synchronization failed: {0}")]
    Sync(#[from] SyncError),
}

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("malformed analysis document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported analysis document version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct AnalysisDocument {
    pub analysis_version: u32,
    pub sync_mode: SyncMode,
    pub sync_pairs: usize,
    pub clock: Vec<ClockMapping>,
    /// Database on the reference clock.
    pub ir: IrDatabase,
    pub links: LinkSet,
    /// IR and link diagnostics together.
    pub diagnostics: Vec<Diagnostic>,
}

impl AnalysisDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DocumentError> {
        #[derive(Deserialize)]
        struct Header {
            analysis_version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.analysis_version != ANALYSIS_VERSION {
            return Err(DocumentError::Version { found: header.analysis_version, expected: ANALYSIS_VERSION });
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn index(&self) -> IrIndex {
        IrIndex::build(&self.ir)
    }

    pub fn identities(&self, index: &IrIndex) -> Identities {
        Identities::build(&self.ir, index)
    }

    pub fn reference(&self) -> Option<&HostId> {
        self.clock.first().map(|m| &m.reference)
    }
}

/// Builds the IR, aligns clocks and infers links.
pub fn analyze(bundle: &TraceBundle, opts: &AnalyzeOptions) -> Result<AnalysisDocument, AnalyzeError> {
    let db = build_ir(bundle);
    let hosts: Vec<HostId> = bundle
        .traces()
        .iter()
        .filter(|t| !t.events.is_empty())
        .map(|t| t.host.clone())
        .collect();
    let reference = opts.reference.clone().or_else(|| hosts.iter().min().cloned());
    let (clock, sync_pairs) = match (&reference, opts.sync_mode) {
        (None, _) => (Vec::new(), 0),
        (Some(r), SyncMode::AssumeSynchronized) => (identity_mappings(&hosts, r), 0),
        (Some(r), SyncMode::Pairs) => {
            let index = IrIndex::build(&db);
            let pairs = collect_sync_pairs(&db, &index);
            (estimate_offsets(&pairs, &hosts, r, opts.min_one_way_delay_ns)?, pairs.len())
        }
    };
    let ir = apply_offsets(&db, &clock);
    drop(db);
    let index = IrIndex::build(&ir);
    let links = infer_all(&ir, &index);
    let mut diagnostics = ir.diagnostics.clone();
    diagnostics.extend(links.diagnostics.iter().cloned());
    Ok(AnalysisDocument {
        analysis_version: ANALYSIS_VERSION,
        sync_mode: opts.sync_mode,
        sync_pairs,
        clock,
        ir,
        links,
        diagnostics,
    })
}
