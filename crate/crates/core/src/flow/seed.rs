use crate::{
    ir::{CallbackOwner, CbId, IrDatabase, IrIndex, PubId},
    trace::Timestamp,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
    #[default]
    Both,
}

impl Direction {
    pub fn forward(self) -> bool {
        matches!(self, Direction::Forward | Direction::Both)
    }

    pub fn backward(self) -> bool {
        matches!(self, Direction::Backward | Direction::Both)
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            "both" => Ok(Direction::Both),
            _ => Err(format!("unknown direction `{s}` (forward, backward, both)")),
        }
    }
}

/// Selects the seed edge of a flow graph.
///
/// `owner` names a subscription or timer as one of:
/// `key:<host>/<pid>/<0xhandle>`, `<node><topic>` (e.g. `/listener/chatter`) or
/// `<node>/timer/<i>` for the i-th timer of a node in initialization order.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SeedSelector {
    Publication { topic: String, source_timestamp: Timestamp },
    /// The `index`-th (0-based, by start time) callback of an owner.
    Callback { owner: String, index: u32 },
    /// The callback of an owner running at `ts` (`start <= ts <= end`).
    CallbackAt { owner: String, ts: Timestamp },
}

impl fmt::Display for SeedSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeedSelector::Publication { topic, source_timestamp } => write!(f, "publication {topic}@{source_timestamp}"),
            SeedSelector::Callback { owner, index } => write!(f, "callback {owner}#{index}"),
            SeedSelector::CallbackAt { owner, ts } => write!(f, "callback {owner} at {ts}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeedError {
    #[error("seed not found: {seed}{}", candidates_suffix(.candidates))]
    NotFound { seed: String, candidates: Vec<String> },
    #[error("seed is ambiguous: {seed}{}", candidates_suffix(.candidates))]
    Ambiguous { seed: String, candidates: Vec<String> },
}

impl SeedError {
    pub fn candidates(&self) -> &[String] {
        match self {
            SeedError::NotFound { candidates, .. } | SeedError::Ambiguous { candidates, .. } => candidates,
        }
    }
}

fn candidates_suffix(c: &[String]) -> String {
    if c.is_empty() {
        String::new()
    } else {
        format!("; candidates: {}", c.join(", "))
    }
}

/// The instance a seed resolved to.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SeedTarget {
    Publication(PubId),
    Callback(CbId),
}

const MAX_CANDIDATES: usize = 8;

fn owner_names(db: &IrDatabase, owner: CallbackOwner) -> Vec<String> {
    let key = db.owner_key(owner);
    let mut names = vec![format!("key:{key}")];
    match owner {
        CallbackOwner::Subscription(s) => {
            let sub = &db.subscriptions[s.idx()];
            if sub.node.is_some() {
                names.push(format!("{}{}", db.node_name(sub.node), sub.topic));
            }
        }
        CallbackOwner::Timer(t) => {
            let timer = &db.timers[t.idx()];
            if let Some(node) = timer.node {
                let i = db
                    .timers
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| x.node == Some(node))
                    .position(|(j, _)| j == t.idx())
                    .unwrap_or(0);
                names.push(format!("{}/timer/{i}", db.node_name(timer.node)));
            }
        }
    }
    names
}

fn all_owners(db: &IrDatabase) -> impl Iterator<Item = CallbackOwner> + '_ {
    (0..db.subscriptions.len())
        .map(|i| CallbackOwner::Subscription(crate::ir::SubscriptionId(i as u32)))
        .chain((0..db.timers.len()).map(|i| CallbackOwner::Timer(crate::ir::TimerId(i as u32))))
}

/// Resolves an owner string to exactly one subscription or timer.
pub fn resolve_owner(db: &IrDatabase, owner: &str, seed: &SeedSelector) -> Result<CallbackOwner, SeedError> {
    let mut matches: Vec<CallbackOwner> = all_owners(db)
        .filter(|o| owner_names(db, *o).iter().any(|n| n == owner))
        .collect();
    matches.sort();
    matches.dedup();
    match matches.len() {
        1 => Ok(matches[0]),
        0 => {
            let mut candidates: Vec<String> = all_owners(db)
                .flat_map(|o| owner_names(db, o).into_iter().rev().take(1))
                .collect();
            candidates.sort_by_key(|c| (common_prefix(c, owner) == 0, usize::MAX - common_prefix(c, owner), c.clone()));
            candidates.truncate(MAX_CANDIDATES);
            Err(SeedError::NotFound { seed: seed.to_string(), candidates })
        }
        _ => Err(SeedError::Ambiguous {
            seed: seed.to_string(),
            candidates: matches.iter().map(|o| format!("key:{}", db.owner_key(*o))).collect(),
        }),
    }
}

fn common_prefix(a: &str, b: &str) -> usize {
    a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count()
}

pub fn resolve_seed(db: &IrDatabase, index: &IrIndex, seed: &SeedSelector) -> Result<SeedTarget, SeedError> {
    match seed {
        SeedSelector::Publication { topic, source_timestamp } => match index.publications_at(topic, *source_timestamp) {
            [p] => Ok(SeedTarget::Publication(*p)),
            [] => {
                let on_topic = index.publications_on_topic(topic);
                let n = on_topic.partition_point(|p| db.publication(*p).source_timestamp < *source_timestamp);
                let lo = n.saturating_sub(MAX_CANDIDATES / 2);
                let candidates = on_topic[lo..(lo + MAX_CANDIDATES).min(on_topic.len())]
                    .iter()
                    .map(|p| format!("{topic}@{}", db.publication(*p).source_timestamp))
                    .collect();
                Err(SeedError::NotFound { seed: seed.to_string(), candidates })
            }
            many => Err(SeedError::Ambiguous {
                seed: seed.to_string(),
                candidates: many
                    .iter()
                    .map(|p| format!("key:{}", db.publisher_of(*p).key))
                    .collect(),
            }),
        },
        SeedSelector::Callback { owner, index: k } => {
            let o = resolve_owner(db, owner, seed)?;
            let cbs = index.callbacks_of(o);
            cbs.get(*k as usize).map(|c| SeedTarget::Callback(*c)).ok_or_else(|| SeedError::NotFound {
                seed: seed.to_string(),
                candidates: if cbs.is_empty() {
                    Vec::new()
                } else {
                    vec![format!("{owner} has {} callbacks (0..{})", cbs.len(), cbs.len() - 1)]
                },
            })
        }
        SeedSelector::CallbackAt { owner, ts } => {
            let o = resolve_owner(db, owner, seed)?;
            let cbs = index.callbacks_of(o);
            let hits: Vec<CbId> = cbs
                .iter()
                .filter(|c| db.callback(**c).start <= *ts && *ts <= db.callback(**c).end)
                .copied()
                .collect();
            match hits.as_slice() {
                [c] => Ok(SeedTarget::Callback(*c)),
                [] => {
                    let n = cbs.partition_point(|c| db.callback(*c).start <= *ts);
                    let lo = n.saturating_sub(2);
                    let candidates = cbs[lo..(lo + 4).min(cbs.len())]
                        .iter()
                        .map(|c| format!("[{}, {}]", db.callback(*c).start, db.callback(*c).end))
                        .collect();
                    Err(SeedError::NotFound { seed: seed.to_string(), candidates })
                }
                many => Err(SeedError::Ambiguous {
                    seed: seed.to_string(),
                    candidates: many
                        .iter()
                        .map(|c| format!("[{}, {}]", db.callback(*c).start, db.callback(*c).end))
                        .collect(),
                }),
            }
        }
    }
}
