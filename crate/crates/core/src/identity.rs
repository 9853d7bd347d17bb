//! Stable textual identities for instances.
//!
//! Analysis output and simulator ground truth name the same instances independently,
//! so identities are derived from trace-visible facts only:
//!
//! * publication: `pub:{host}/{pid}/{publisher_handle}@{source_ts}`
//! * subscription callback: `sub:{host}/{pid}/{subscription_handle}@{source_ts}#{seq}`, where
//!   `seq` orders callbacks of one subscription that took the same source timestamp
//! * timer callback: `tmr:{host}/{pid}/{timer_handle}#{index}`, the index-th run of the timer
//!
//! Handles are formatted as `0x` hex.

use crate::{
    ir::{CallbackOwner, IrDatabase, IrIndex},
    trace::{ObjectKey, Timestamp},
};
use std::collections::HashMap;

pub fn publication_id(publisher: &ObjectKey, source_ts: Timestamp) -> String {
    format!("pub:{publisher}@{source_ts}")
}

pub fn subscription_callback_id(subscription: &ObjectKey, source_ts: Timestamp, seq: u32) -> String {
    format!("sub:{subscription}@{source_ts}#{seq}")
}

pub fn timer_callback_id(timer: &ObjectKey, index: u32) -> String {
    format!("tmr:{timer}#{index}")
}

/// Subject of a link between two instances.
pub fn link_id(from: &str, to: &str) -> String {
    format!("{from}->{to}")
}

/// Identities for every publication and callback of one database.
#[derive(Clone, Debug, Default)]
pub struct Identities {
    pub publications: Vec<String>,
    pub callbacks: Vec<String>,
}

impl Identities {
    pub fn build(db: &IrDatabase, index: &IrIndex) -> Self {
        let publications = db
            .publications
            .iter()
            .map(|p| publication_id(&db.publishers[p.publisher.idx()].key, p.source_timestamp))
            .collect();

        let mut callbacks = vec![String::new(); db.callbacks.len()];
        let mut owners: Vec<CallbackOwner> = db.callbacks.iter().map(|c| c.owner).collect();
        owners.sort_unstable();
        owners.dedup();
        for owner in owners {
            let key = db.owner_key(owner);
            let mut seen: HashMap<Timestamp, u32> = HashMap::new();
            for (k, cb) in index.callbacks_of(owner).iter().enumerate() {
                let c = db.callback(*cb);
                callbacks[cb.idx()] = match (owner, c.take) {
                    (CallbackOwner::Timer(_), _) => timer_callback_id(key, k as u32),
                    (CallbackOwner::Subscription(_), take) => {
                        let ts = take.map_or(i64::MIN, |t| t.source_timestamp);
                        let seq = seen.entry(ts).or_insert(0);
                        let id = subscription_callback_id(key, ts, *seq);
                        *seq += 1;
                        id
                    }
                };
            }
        }
        Identities { publications, callbacks }
    }
}
