use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowEdgeKind {
    TimerCallback,
    SubscriptionCallback,
    MessagePublication,
    TransportLink,
    PeriodicAsyncLink,
    PartialSyncLink,
    Take,
}

impl FlowEdgeKind {
    pub const ALL: [FlowEdgeKind; 7] = [
        FlowEdgeKind::TimerCallback,
        FlowEdgeKind::SubscriptionCallback,
        FlowEdgeKind::MessagePublication,
        FlowEdgeKind::TransportLink,
        FlowEdgeKind::PeriodicAsyncLink,
        FlowEdgeKind::PartialSyncLink,
        FlowEdgeKind::Take,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FlowEdgeKind::TimerCallback => "timer_callback",
            FlowEdgeKind::SubscriptionCallback => "subscription_callback",
            FlowEdgeKind::MessagePublication => "message_publication",
            FlowEdgeKind::TransportLink => "transport_link",
            FlowEdgeKind::PeriodicAsyncLink => "periodic_async_link",
            FlowEdgeKind::PartialSyncLink => "partial_sync_link",
            FlowEdgeKind::Take => "take",
        }
    }

    pub fn is_indirect(self) -> bool {
        matches!(self, FlowEdgeKind::PeriodicAsyncLink | FlowEdgeKind::PartialSyncLink)
    }

    /// Allowed immediate successors.
    pub fn successors(self) -> &'static [FlowEdgeKind] {
        use FlowEdgeKind::*;
        match self {
            TimerCallback => &[MessagePublication],
            SubscriptionCallback => &[MessagePublication, PeriodicAsyncLink, PartialSyncLink],
            MessagePublication => &[TransportLink],
            TransportLink => &[Take, SubscriptionCallback],
            Take => &[SubscriptionCallback],
            PeriodicAsyncLink | PartialSyncLink => &[MessagePublication],
        }
    }

    pub fn may_precede(self, next: FlowEdgeKind) -> bool {
        self.successors().contains(&next)
    }
}

impl fmt::Display for FlowEdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `{kind}:{subject}`, the identity of an edge across analysis and ground truth.
pub fn edge_key(kind: FlowEdgeKind, subject: &str) -> String {
    format!("{}:{subject}", kind.as_str())
}
