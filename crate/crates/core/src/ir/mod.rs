//! Intermediate execution representation: correlated objects and their runtime instances.

mod build;
mod fold;
mod index;

pub use build::build_ir;
pub use fold::{
    fold_executor, fold_publication, ExecutorEvent, ExecutorEventKind, PublishLayer,
    PublishLayerEvent, StateSpan,
};
pub use index::{pub_thread, query_publication, IrIndex, ThreadKey};

use crate::{
    diag::Diagnostic,
    trace::{Gid, HostId, LinkType, ObjectKey, Timestamp},
};
use serde::{Deserialize, Serialize};

pub const IR_VERSION: u32 = 1;

macro_rules! id_type {
    ($($(#[$m:meta])* $name:ident),* $(,)?) => {$(
        $(#[$m])*
        #[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            pub fn idx(self) -> usize {
                self.0 as usize
            }
        }
    )*};
}

id_type!(
    /// Index into [`IrDatabase::nodes`].
    NodeId,
    /// Index into [`IrDatabase::publishers`].
    PublisherId,
    /// Index into [`IrDatabase::subscriptions`].
    SubscriptionId,
    /// Index into [`IrDatabase::timers`].
    TimerId,
    /// Index into [`IrDatabase::publications`].
    PubId,
    /// Index into [`IrDatabase::callbacks`].
    CbId,
);

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct NodeRec {
    pub key: ObjectKey,
    pub name: String,
    pub namespace: String,
}

impl NodeRec {
    /// Fully-qualified node name, e.g. `/ns/talker`.
    pub fn full_name(&self) -> String {
        if self.namespace.ends_with('/') {
            format!("{}{}", self.namespace, self.name)
        } else {
            format!("{}/{}", self.namespace, self.name)
        }
    }
}

/// Handles of one publisher at each layer.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LayerHandles {
    pub rcl: u64,
    pub rmw: u64,
    pub dds_writer: Option<u64>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct PublisherRec {
    pub key: ObjectKey,
    pub node: Option<NodeId>,
    pub topic: String,
    pub gid: Option<Gid>,
    pub layer_handles: LayerHandles,
    /// All three initialization layers were correlated.
    pub complete: bool,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SubscriptionRec {
    pub key: ObjectKey,
    pub node: Option<NodeId>,
    pub topic: String,
    pub rmw_handle: u64,
    pub gid: Option<Gid>,
    pub callback_ref: Option<u64>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TimerRec {
    pub key: ObjectKey,
    pub node: Option<NodeId>,
    pub period_ns: i64,
    pub callback_ref: Option<u64>,
    pub init_ts: Timestamp,
}

/// One message publication, folded from its per-layer events.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct PublicationInstance {
    pub publisher: PublisherId,
    pub tid: u32,
    pub rclcpp_ts: Option<Timestamp>,
    pub rcl_ts: Option<Timestamp>,
    pub rmw_ts: Option<Timestamp>,
    pub dds_ts: Timestamp,
    /// Matching key shared with receivers; never shifted by clock correction.
    pub source_timestamp: Timestamp,
}

impl PublicationInstance {
    /// Earliest available layer timestamp, i.e. the user-level publish call.
    pub fn pub_ts(&self) -> Timestamp {
        self.rclcpp_ts
            .or(self.rcl_ts)
            .or(self.rmw_ts)
            .unwrap_or(self.dds_ts)
    }

    pub fn layer_count(&self) -> u32 {
        1 + [self.rclcpp_ts, self.rcl_ts, self.rmw_ts]
            .iter()
            .filter(|t| t.is_some())
            .count() as u32
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallbackOwner {
    Subscription(SubscriptionId),
    Timer(TimerId),
}

/// The middleware fetch consumed by a subscription callback.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TakeRec {
    pub ts: Timestamp,
    /// Matching key; never shifted by clock correction.
    pub source_timestamp: Timestamp,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CallbackInstance {
    pub owner: CallbackOwner,
    pub tid: u32,
    pub start: Timestamp,
    pub end: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub take: Option<TakeRec>,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutorState {
    Waiting,
    Overhead,
    Executing,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ExecutorStateInterval {
    pub host: HostId,
    pub pid: u32,
    pub tid: u32,
    pub state: ExecutorState,
    pub start: Timestamp,
    pub end: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<CallbackOwner>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LinkAnnotation {
    pub link_type: LinkType,
    pub host: HostId,
    pub pid: u32,
    pub inputs: Vec<SubscriptionId>,
    pub outputs: Vec<PublisherId>,
}

/// Event accounting: every runtime event is either folded into an instance or
/// absorbed by a diagnostic.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct IrStats {
    pub init_events: u64,
    pub runtime_events: u64,
    pub folded_events: u64,
    pub diagnostic_events: u64,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct IrDatabase {
    pub ir_version: u32,
    pub hosts: Vec<HostId>,
    pub nodes: Vec<NodeRec>,
    pub publishers: Vec<PublisherRec>,
    pub subscriptions: Vec<SubscriptionRec>,
    pub timers: Vec<TimerRec>,
    pub publications: Vec<PublicationInstance>,
    pub callbacks: Vec<CallbackInstance>,
    pub executor_intervals: Vec<ExecutorStateInterval>,
    pub annotations: Vec<LinkAnnotation>,
    pub diagnostics: Vec<Diagnostic>,
    pub stats: IrStats,
}

impl Default for IrDatabase {
    fn default() -> Self {
        IrDatabase {
            ir_version: IR_VERSION,
            hosts: Vec::new(),
            nodes: Vec::new(),
            publishers: Vec::new(),
            subscriptions: Vec::new(),
            timers: Vec::new(),
            publications: Vec::new(),
            callbacks: Vec::new(),
            executor_intervals: Vec::new(),
            annotations: Vec::new(),
            diagnostics: Vec::new(),
            stats: IrStats::default(),
        }
    }
}

impl IrDatabase {
    pub fn publication(&self, id: PubId) -> &PublicationInstance {
        &self.publications[id.idx()]
    }

    pub fn callback(&self, id: CbId) -> &CallbackInstance {
        &self.callbacks[id.idx()]
    }

    pub fn publisher_of(&self, id: PubId) -> &PublisherRec {
        &self.publishers[self.publication(id).publisher.idx()]
    }

    /// Object key of the subscription or timer owning a callback.
    pub fn owner_key(&self, owner: CallbackOwner) -> &ObjectKey {
        match owner {
            CallbackOwner::Subscription(s) => &self.subscriptions[s.idx()].key,
            CallbackOwner::Timer(t) => &self.timers[t.idx()].key,
        }
    }

    pub fn owner_node(&self, owner: CallbackOwner) -> Option<NodeId> {
        match owner {
            CallbackOwner::Subscription(s) => self.subscriptions[s.idx()].node,
            CallbackOwner::Timer(t) => self.timers[t.idx()].node,
        }
    }

    /// Topic of a subscription callback; `None` for timer callbacks.
    pub fn callback_topic(&self, id: CbId) -> Option<&str> {
        match self.callback(id).owner {
            CallbackOwner::Subscription(s) => Some(&self.subscriptions[s.idx()].topic),
            CallbackOwner::Timer(_) => None,
        }
    }

    pub fn node_name(&self, node: Option<NodeId>) -> String {
        node.map(|n| self.nodes[n.idx()].full_name())
            .unwrap_or_else(|| "?".into())
    }

    /// Human label for a callback owner, e.g. `/sink /topic_a` or `/source timer 5ms`.
    pub fn owner_label(&self, owner: CallbackOwner) -> String {
        match owner {
            CallbackOwner::Subscription(s) => {
                let sub = &self.subscriptions[s.idx()];
                format!("{} {}", self.node_name(sub.node), sub.topic)
            }
            CallbackOwner::Timer(t) => {
                let timer = &self.timers[t.idx()];
                format!("{} timer {}ns", self.node_name(timer.node), timer.period_ns)
            }
        }
    }

    /// Checks that every instance reference resolves. Returns the first dangling reference.
    pub fn check_references(&self) -> Result<(), String> {
        let node_ok = |n: Option<NodeId>| n.is_none_or(|n| n.idx() < self.nodes.len());
        for (i, p) in self.publishers.iter().enumerate() {
            if !node_ok(p.node) {
                return Err(format!("publisher {i} references missing node"));
            }
        }
        for (i, s) in self.subscriptions.iter().enumerate() {
            if !node_ok(s.node) {
                return Err(format!("subscription {i} references missing node"));
            }
        }
        for (i, t) in self.timers.iter().enumerate() {
            if !node_ok(t.node) {
                return Err(format!("timer {i} references missing node"));
            }
        }
        for (i, p) in self.publications.iter().enumerate() {
            if p.publisher.idx() >= self.publishers.len() {
                return Err(format!("publication {i} references missing publisher"));
            }
        }
        let owner_ok = |o: CallbackOwner| match o {
            CallbackOwner::Subscription(s) => s.idx() < self.subscriptions.len(),
            CallbackOwner::Timer(t) => t.idx() < self.timers.len(),
        };
        for (i, c) in self.callbacks.iter().enumerate() {
            if !owner_ok(c.owner) {
                return Err(format!("callback {i} references missing owner"));
            }
        }
        for (i, x) in self.executor_intervals.iter().enumerate() {
            if x.target.is_some_and(|t| !owner_ok(t)) {
                return Err(format!("executor interval {i} references missing target"));
            }
        }
        for (i, a) in self.annotations.iter().enumerate() {
            if a.inputs.iter().any(|s| s.idx() >= self.subscriptions.len())
                || a.outputs.iter().any(|p| p.idx() >= self.publishers.len())
            {
                return Err(format!("annotation {i} references missing object"));
            }
        }
        Ok(())
    }
}
