use super::DirectLink;
use crate::ir::{CallbackOwner, CbId, IrDatabase, IrIndex, PubId};
use std::collections::BTreeMap;

/// Innermost callback enclosing each publication on the same thread, with
/// `start < pub_ts < end`. Indexed by publication.
pub fn enclosing_callbacks(db: &IrDatabase, index: &IrIndex) -> Vec<Option<CbId>> {
    let mut out = vec![None; db.publications.len()];
    for (thread, pubs) in index.thread_publications() {
        let Some(cbs) = index.thread_callbacks().get(thread) else {
            continue;
        };
        // parent[i]: innermost earlier callback still open when callback i starts.
        let mut parent: Vec<Option<usize>> = Vec::with_capacity(cbs.len());
        let mut open: Vec<usize> = Vec::new();
        for (i, cb) in cbs.iter().enumerate() {
            let start = db.callback(*cb).start;
            while open.last().is_some_and(|&j| db.callback(cbs[j]).end <= start) {
                open.pop();
            }
            parent.push(open.last().copied());
            open.push(i);
        }
        for p in pubs {
            let ts = db.publication(*p).pub_ts();
            let n = cbs.partition_point(|c| db.callback(*c).start < ts);
            let mut cur = n.checked_sub(1);
            while let Some(i) = cur {
                if db.callback(cbs[i]).end > ts {
                    break;
                }
                cur = parent[i];
            }
            out[p.idx()] = cur.map(|i| cbs[i]);
        }
    }
    out
}

/// Direct links: publications whose innermost enclosing callback is a subscription callback.
pub fn infer_direct(db: &IrDatabase, enclosing: &[Option<CbId>]) -> Vec<DirectLink> {
    let mut groups: BTreeMap<CbId, Vec<PubId>> = BTreeMap::new();
    for (i, cb) in enclosing.iter().enumerate() {
        if let Some(cb) = cb {
            if matches!(db.callback(*cb).owner, CallbackOwner::Subscription(_)) {
                groups.entry(*cb).or_default().push(PubId(i as u32));
            }
        }
    }
    groups
        .into_iter()
        .map(|(input, outputs)| DirectLink { input, outputs })
        .collect()
}
