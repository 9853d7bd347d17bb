//! Offset-only clock synchronization from matched cross-host messages.
//!
//! For hosts A and B, `offset_AB` is B's clock minus A's clock. Every message sent
//! from A and received on B bounds it from above (`send + offset_AB <= recv`) and every
//! message from B to A bounds it from below. Offsets are composed along a
//! breadth-first spanning tree rooted at the reference host.

use crate::{
    diag::Diagnostic,
    ir::{CallbackOwner, IrDatabase, IrIndex},
    trace::{HostId, Timestamp},
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

/// Shift applied to one host's local timestamps to reach the reference clock.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ClockMapping {
    pub host: HostId,
    pub offset: i64,
    pub reference: HostId,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SyncPair {
    pub from_host: HostId,
    pub to_host: HostId,
    /// `dds_write` time, local to `from_host`.
    pub send_ts: Timestamp,
    /// `rmw_take` time, local to `to_host`.
    pub recv_ts: Timestamp,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SyncError {
    #[error("hosts not connected to reference {reference} by any message: {}", join(.unreachable))]
    Disconnected {
        reference: HostId,
        unreachable: Vec<HostId>,
    },
    #[error("no feasible offset between {a} and {b}: lower bound {lower} exceeds upper bound {upper}")]
    InfeasibleOffsets {
        a: HostId,
        b: HostId,
        lower: i64,
        upper: i64,
    },
    #[error("reference host {0} has no events")]
    UnknownReference(HostId),
}

fn join(hosts: &[HostId]) -> String {
    hosts.iter().map(HostId::as_str).collect::<Vec<_>>().join(", ")
}

/// One sync pair per cross-host transport match. Colliding source timestamps are skipped.
pub fn collect_sync_pairs(db: &IrDatabase, index: &IrIndex) -> Vec<SyncPair> {
    let mut pairs = Vec::new();
    for cb in &db.callbacks {
        let (CallbackOwner::Subscription(sub), Some(take)) = (cb.owner, cb.take) else {
            continue;
        };
        let sub = &db.subscriptions[sub.idx()];
        let [p] = index.publications_at(&sub.topic, take.source_timestamp) else {
            continue;
        };
        let from = &db.publisher_of(*p).key.host;
        if *from != sub.key.host {
            pairs.push(SyncPair {
                from_host: from.clone(),
                to_host: sub.key.host.clone(),
                send_ts: db.publication(*p).dds_ts,
                recv_ts: take.ts,
            });
        }
    }
    pairs
}

/// Bounds on `offset_AB` for one ordered host pair `a < b`.
#[derive(Default, Clone, Copy, Debug)]
struct Bounds {
    upper: Option<i64>,
    lower: Option<i64>,
}

impl Bounds {
    fn offset(&self, min_delay: i64) -> Result<i64, (i64, i64)> {
        match (self.lower, self.upper) {
            (Some(lo), Some(hi)) if lo > hi => Err((lo, hi)),
            (Some(lo), Some(hi)) => Ok(lo + (hi - lo).div_euclid(2)),
            (None, Some(hi)) => Ok(hi - min_delay),
            (Some(lo), None) => Ok(lo + min_delay),
            (None, None) => unreachable!("bounds exist only for observed pairs"),
        }
    }
}

/// Estimates one mapping per host in `hosts`.
///
/// `min_one_way_delay` is subtracted from the tightest bound when traffic between two
/// hosts flows in one direction only.
pub fn estimate_offsets(
    pairs: &[SyncPair],
    hosts: &[HostId],
    reference: &HostId,
    min_one_way_delay: i64,
) -> Result<Vec<ClockMapping>, SyncError> {
    let hosts: BTreeSet<&HostId> = hosts.iter().collect();
    if !hosts.contains(reference) {
        return Err(SyncError::UnknownReference(reference.clone()));
    }
    let mut bounds: BTreeMap<(&HostId, &HostId), Bounds> = BTreeMap::new();
    for p in pairs {
        if p.from_host == p.to_host || !hosts.contains(&p.from_host) || !hosts.contains(&p.to_host) {
            continue;
        }
        let delta = p.recv_ts - p.send_ts;
        if p.from_host < p.to_host {
            let b = bounds.entry((&p.from_host, &p.to_host)).or_default();
            b.upper = Some(b.upper.map_or(delta, |u| u.min(delta)));
        } else {
            let b = bounds.entry((&p.to_host, &p.from_host)).or_default();
            b.lower = Some(b.lower.map_or(-delta, |l| l.max(-delta)));
        }
    }
    let mut offsets: BTreeMap<(&HostId, &HostId), i64> = BTreeMap::new();
    let mut adjacency: BTreeMap<&HostId, BTreeSet<&HostId>> = BTreeMap::new();
    for (&(a, b), bound) in &bounds {
        let off = bound.offset(min_one_way_delay).map_err(|(lower, upper)| SyncError::InfeasibleOffsets {
            a: a.clone(),
            b: b.clone(),
            lower,
            upper,
        })?;
        offsets.insert((a, b), off);
        offsets.insert((b, a), -off);
        adjacency.entry(a).or_default().insert(b);
        adjacency.entry(b).or_default().insert(a);
    }

    let mut mapping: BTreeMap<&HostId, i64> = BTreeMap::new();
    mapping.insert(reference, 0);
    let mut queue = VecDeque::from([reference]);
    while let Some(parent) = queue.pop_front() {
        let base = mapping[parent];
        for &child in adjacency.get(parent).into_iter().flatten() {
            if !mapping.contains_key(child) {
                mapping.insert(child, base - offsets[&(parent, child)]);
                queue.push_back(child);
            }
        }
    }
    let unreachable: Vec<HostId> = hosts
        .iter()
        .filter(|h| !mapping.contains_key(*h))
        .map(|h| (*h).clone())
        .collect();
    if !unreachable.is_empty() {
        return Err(SyncError::Disconnected { reference: reference.clone(), unreachable });
    }
    Ok(hosts
        .into_iter()
        .map(|h| ClockMapping { host: h.clone(), offset: mapping[h], reference: reference.clone() })
        .collect())
}

/// Zero mappings for every host, for traces already on a common clock.
pub fn identity_mappings(hosts: &[HostId], reference: &HostId) -> Vec<ClockMapping> {
    hosts
        .iter()
        .map(|h| ClockMapping { host: h.clone(), offset: 0, reference: reference.clone() })
        .collect()
}

/// Shifts every host-local timestamp by its host's offset. Source timestamps are
/// matching keys and stay untouched. Hosts without a mapping are left as they are.
pub fn apply_offsets(db: &IrDatabase, mappings: &[ClockMapping]) -> IrDatabase {
    let offset_of = |h: &HostId| mappings.iter().find(|m| m.host == *h).map_or(0, |m| m.offset);
    let mut out = db.clone();
    let pub_offsets: Vec<i64> = out.publishers.iter().map(|p| offset_of(&p.key.host)).collect();
    for p in &mut out.publications {
        let d = pub_offsets[p.publisher.idx()];
        for t in [&mut p.rclcpp_ts, &mut p.rcl_ts, &mut p.rmw_ts].into_iter().flatten() {
            *t += d;
        }
        p.dds_ts += d;
    }
    let sub_offsets: Vec<i64> = out.subscriptions.iter().map(|s| offset_of(&s.key.host)).collect();
    let timer_offsets: Vec<i64> = out.timers.iter().map(|t| offset_of(&t.key.host)).collect();
    for c in &mut out.callbacks {
        let d = match c.owner {
            CallbackOwner::Subscription(s) => sub_offsets[s.idx()],
            CallbackOwner::Timer(t) => timer_offsets[t.idx()],
        };
        c.start += d;
        c.end += d;
        if let Some(take) = &mut c.take {
            take.ts += d;
        }
    }
    for (t, d) in out.timers.iter_mut().zip(&timer_offsets) {
        t.init_ts += d;
    }
    for x in &mut out.executor_intervals {
        let d = offset_of(&x.host);
        x.start += d;
        x.end += d;
    }
    for diag in &mut out.diagnostics {
        shift_diag(diag, &offset_of);
    }
    out
}

fn shift_diag(d: &mut Diagnostic, offset_of: &impl Fn(&HostId) -> i64) {
    if let (Some(h), Some(ts)) = (&d.host, &mut d.ts) {
        *ts += offset_of(h);
    }
}
