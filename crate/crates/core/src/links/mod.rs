//! Inference of transport, direct and indirect causal links between instances.

mod direct;
mod indirect;
mod transport;

pub use direct::{enclosing_callbacks, infer_direct};
pub use indirect::{infer_partial_sync, infer_periodic_async};
pub use transport::match_transport;

use crate::{
    diag::Diagnostic,
    ir::{CbId, IrDatabase, IrIndex, PubId},
    trace::LinkType,
};
use serde::{Deserialize, Serialize};

/// One publication and the subscription callbacks that received it.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TransportLink {
    pub source: PubId,
    pub destinations: Vec<CbId>,
    /// `take_ts - dds_ts` per destination, in destination order.
    pub latencies: Vec<i64>,
}

/// A subscription callback and the publications it made on its own thread.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct DirectLink {
    pub input: CbId,
    pub outputs: Vec<PubId>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct IndirectLink {
    pub link_type: LinkType,
    /// Input callbacks in annotation input order; empty cache slots are skipped.
    pub inputs: Vec<CbId>,
    pub output: PubId,
    /// Index into the database annotations.
    pub annotation: u32,
}

#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct LinkSet {
    pub transport: Vec<TransportLink>,
    pub direct: Vec<DirectLink>,
    pub indirect: Vec<IndirectLink>,
    pub diagnostics: Vec<Diagnostic>,
}

impl LinkSet {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.transport.len(), self.direct.len(), self.indirect.len())
    }
}

/// Runs every inference over one (clock-corrected) database.
pub fn infer_all(db: &IrDatabase, index: &IrIndex) -> LinkSet {
    let enclosing = enclosing_callbacks(db, index);
    let (transport, mut diagnostics) = match_transport(db, index);
    let direct = infer_direct(db, &enclosing);
    let (mut indirect, d) = infer_periodic_async(db, index, &enclosing);
    diagnostics.extend(d);
    let (partial, d) = infer_partial_sync(db, index, &enclosing);
    diagnostics.extend(d);
    indirect.extend(partial);
    indirect.sort_by_key(|l| (l.output, l.annotation));
    LinkSet { transport, direct, indirect, diagnostics }
}
