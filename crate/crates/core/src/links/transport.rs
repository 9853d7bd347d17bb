use super::TransportLink;
use crate::{
    diag::{Diagnostic, DiagnosticKind},
    ir::{CallbackOwner, CbId, IrDatabase, IrIndex, PubId},
};
use std::collections::BTreeMap;

/// Groups subscription callbacks under the publication with the same topic and source
/// timestamp. Colliding timestamps produce a diagnostic and no link.
pub fn match_transport(db: &IrDatabase, index: &IrIndex) -> (Vec<TransportLink>, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    for (topic, ts, pubs) in index.collisions() {
        let first = db.publisher_of(pubs[0]);
        diags.push(
            Diagnostic::new(
                DiagnosticKind::TimestampCollision,
                format!("{} publications on {topic} share source timestamp {ts}; not linked", pubs.len()),
            )
            .at(&first.key.host, first.key.pid, None)
            .ts(ts),
        );
    }

    let mut groups: BTreeMap<PubId, Vec<CbId>> = BTreeMap::new();
    for (i, cb) in db.callbacks.iter().enumerate() {
        let (CallbackOwner::Subscription(sub), Some(take)) = (cb.owner, cb.take) else {
            continue;
        };
        let sub = &db.subscriptions[sub.idx()];
        match index.publications_at(&sub.topic, take.source_timestamp) {
            [] => diags.push(
                Diagnostic::new(
                    DiagnosticKind::OrphanReception,
                    format!("no publication on {} with source timestamp {}", sub.topic, take.source_timestamp),
                )
                .at(&sub.key.host, sub.key.pid, Some(cb.tid))
                .ts(cb.start),
            ),
            [p] => groups.entry(*p).or_default().push(CbId(i as u32)),
            _ => {}
        }
    }

    let links = groups
        .into_iter()
        .map(|(source, destinations)| {
            let dds = db.publication(source).dds_ts;
            let latencies = destinations
                .iter()
                .map(|c| db.callback(*c).take.map_or(0, |t| t.ts) - dds)
                .collect();
            TransportLink { source, destinations, latencies }
        })
        .collect();
    (links, diags)
}
