use super::{CallbackOwner, ExecutorState, PublicationInstance, PublisherId};
use crate::{
    diag::{Diagnostic, DiagnosticKind},
    trace::Timestamp,
};

/// Publication layers, top to bottom.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum PublishLayer {
    Rclcpp,
    Rcl,
    Rmw,
    Dds,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct PublishLayerEvent {
    pub layer: PublishLayer,
    pub ts: Timestamp,
    pub publisher: PublisherId,
    pub tid: u32,
    /// Present on the `Dds` layer only.
    pub source_timestamp: Option<Timestamp>,
}

/// Folds the layer events of one publication window into an instance.
///
/// The window must end with its `Dds` event; without one no instance is produced.
/// Layers whose timestamps regress against the layer below are dropped with a
/// `LayerOrderViolation` diagnostic. Each input event is accounted for exactly once,
/// either in the instance or in a diagnostic.
pub fn fold_publication(events: &[PublishLayerEvent]) -> (Option<PublicationInstance>, Vec<Diagnostic>) {
    let mut diags = Vec::new();
    let Some(dds) = events.iter().find(|e| e.layer == PublishLayer::Dds) else {
        diags.push(
            Diagnostic::new(
                DiagnosticKind::IncompletePublication,
                "publication window closed without a dds_write",
            )
            .absorbing(events.len() as u32),
        );
        return (None, diags);
    };

    let mut instance = PublicationInstance {
        publisher: dds.publisher,
        tid: dds.tid,
        rclcpp_ts: None,
        rcl_ts: None,
        rmw_ts: None,
        dds_ts: dds.ts,
        source_timestamp: dds.source_timestamp.unwrap_or(dds.ts),
    };
    let mut bound = dds.ts;
    for layer in [PublishLayer::Rmw, PublishLayer::Rcl, PublishLayer::Rclcpp] {
        let Some(e) = events.iter().find(|e| e.layer == layer) else {
            continue;
        };
        if e.ts > bound {
            diags.push(
                Diagnostic::new(
                    DiagnosticKind::LayerOrderViolation,
                    format!("{layer:?} layer at {} after the layer below it at {bound}", e.ts),
                )
                .ts(e.ts)
                .absorbing(1),
            );
            continue;
        }
        bound = e.ts;
        match layer {
            PublishLayer::Rmw => instance.rmw_ts = Some(e.ts),
            PublishLayer::Rcl => instance.rcl_ts = Some(e.ts),
            PublishLayer::Rclcpp => instance.rclcpp_ts = Some(e.ts),
            PublishLayer::Dds => unreachable!(),
        }
    }
    (Some(instance), diags)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ExecutorEventKind {
    WaitBegin,
    WaitEnd,
    ExecuteBegin(Option<CallbackOwner>),
    ExecuteEnd,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ExecutorEvent {
    pub ts: Timestamp,
    pub kind: ExecutorEventKind,
}

/// One executor state span on a single thread.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct StateSpan {
    pub state: ExecutorState,
    pub start: Timestamp,
    pub end: Timestamp,
    pub target: Option<CallbackOwner>,
}

enum ExecState {
    Idle,
    Waiting(Timestamp),
    Selecting(Timestamp),
    Executing(Timestamp, Option<CallbackOwner>),
}

/// Splits one thread's executor events into waiting, overhead and executing spans.
///
/// `trace_end` is the last timestamp seen on the thread; spans still open there are
/// closed at it with a diagnostic. The second value is the number of events folded
/// into spans; the rest are absorbed by the returned diagnostics.
pub fn fold_executor(events: &[ExecutorEvent], trace_end: Timestamp) -> (Vec<StateSpan>, Vec<Diagnostic>, u32) {
    use ExecutorEventKind::*;
    let mut spans = Vec::new();
    let mut diags = Vec::new();
    let mut folded = 0u32;
    let mut state = ExecState::Idle;
    let span = |state, start, end, target| StateSpan { state, start, end, target };
    let unmatched = |what: &str, ts| {
        Diagnostic::new(DiagnosticKind::UnmatchedExecutorEvent, what.to_string()).ts(ts)
    };

    for e in events {
        match (e.kind, &state) {
            (WaitBegin, ExecState::Waiting(s)) => {
                diags.push(unmatched("wait_begin while already waiting", e.ts));
                spans.push(span(ExecutorState::Waiting, *s, e.ts, None));
                folded += 1;
                state = ExecState::Waiting(e.ts);
            }
            (WaitBegin, ExecState::Executing(s, target)) => {
                diags.push(unmatched("wait_begin while executing", e.ts));
                spans.push(span(ExecutorState::Executing, *s, e.ts, *target));
                folded += 1;
                state = ExecState::Waiting(e.ts);
            }
            (WaitBegin, ExecState::Selecting(s)) => {
                // Woke up but found nothing runnable.
                spans.push(span(ExecutorState::Overhead, *s, e.ts, None));
                folded += 1;
                state = ExecState::Waiting(e.ts);
            }
            (WaitBegin, ExecState::Idle) => {
                folded += 1;
                state = ExecState::Waiting(e.ts);
            }
            (WaitEnd, ExecState::Waiting(s)) => {
                spans.push(span(ExecutorState::Waiting, *s, e.ts, None));
                folded += 1;
                state = ExecState::Selecting(e.ts);
            }
            (WaitEnd, _) => {
                diags.push(unmatched("wait_end without wait_begin", e.ts).absorbing(1));
            }
            (ExecuteBegin(target), current) => {
                match current {
                    ExecState::Selecting(s) => {
                        spans.push(span(ExecutorState::Overhead, *s, e.ts, None))
                    }
                    ExecState::Waiting(s) => {
                        diags.push(unmatched("execute_begin while waiting", e.ts));
                        spans.push(span(ExecutorState::Waiting, *s, e.ts, None));
                    }
                    ExecState::Executing(s, t) => {
                        diags.push(unmatched("execute_begin while executing", e.ts));
                        spans.push(span(ExecutorState::Executing, *s, e.ts, *t));
                    }
                    ExecState::Idle => {}
                }
                folded += 1;
                state = ExecState::Executing(e.ts, target);
            }
            (ExecuteEnd, ExecState::Executing(s, target)) => {
                spans.push(span(ExecutorState::Executing, *s, e.ts, *target));
                folded += 1;
                state = ExecState::Idle;
            }
            (ExecuteEnd, _) => {
                diags.push(unmatched("execute_end without execute_begin", e.ts).absorbing(1));
            }
        }
    }

    match state {
        ExecState::Waiting(s) => {
            spans.push(span(ExecutorState::Waiting, s, trace_end.max(s), None));
            diags.push(
                Diagnostic::new(
                    DiagnosticKind::UnterminatedExecutorState,
                    "trace ends while waiting",
                )
                .ts(s),
            );
        }
        ExecState::Executing(s, target) => {
            spans.push(span(ExecutorState::Executing, s, trace_end.max(s), target));
            diags.push(
                Diagnostic::new(
                    DiagnosticKind::UnterminatedExecutorState,
                    "trace ends while executing",
                )
                .ts(s),
            );
        }
        ExecState::Idle | ExecState::Selecting(_) => {}
    }
    (spans, diags, folded)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(layer: PublishLayer, ts: i64) -> PublishLayerEvent {
        PublishLayerEvent {
            layer,
            ts,
            publisher: PublisherId(0),
            tid: 7,
            source_timestamp: (layer == PublishLayer::Dds).then_some(ts),
        }
    }

    #[test]
    fn folds_all_four_layers() {
        use PublishLayer::*;
        let (inst, diags) = fold_publication(&[
            layer(Rclcpp, 100),
            layer(Rcl, 110),
            layer(Rmw, 120),
            layer(Dds, 130),
        ]);
        let inst = inst.unwrap();
        assert!(diags.is_empty());
        assert_eq!(
            (inst.rclcpp_ts, inst.rcl_ts, inst.rmw_ts, inst.dds_ts),
            (Some(100), Some(110), Some(120), 130)
        );
        assert_eq!(inst.source_timestamp, 130);
        assert_eq!(inst.pub_ts(), 100);
        assert_eq!(inst.layer_count(), 4);
    }

    #[test]
    fn dds_only_publication() {
        let (inst, diags) = fold_publication(&[layer(PublishLayer::Dds, 130)]);
        let inst = inst.unwrap();
        assert!(diags.is_empty());
        assert_eq!((inst.rclcpp_ts, inst.rcl_ts, inst.rmw_ts), (None, None, None));
        assert_eq!(inst.pub_ts(), 130);
    }

    #[test]
    fn regressing_layer_is_diagnosed() {
        use PublishLayer::*;
        let (inst, diags) = fold_publication(&[layer(Rcl, 110), layer(Rclcpp, 120), layer(Dds, 130)]);
        let inst = inst.unwrap();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::LayerOrderViolation);
        assert_eq!(diags[0].events, 1);
        assert_eq!((inst.rclcpp_ts, inst.rcl_ts), (None, Some(110)));
    }

    #[test]
    fn window_without_dds_is_incomplete() {
        let (inst, diags) = fold_publication(&[layer(PublishLayer::Rclcpp, 1), layer(PublishLayer::Rcl, 2)]);
        assert!(inst.is_none());
        assert_eq!(diags[0].kind, DiagnosticKind::IncompletePublication);
        assert_eq!(diags[0].events, 2);
    }

    fn ev(ts: i64, kind: ExecutorEventKind) -> ExecutorEvent {
        ExecutorEvent { ts, kind }
    }

    #[test]
    fn three_state_split() {
        use ExecutorEventKind::*;
        let (spans, diags, folded) = fold_executor(
            &[ev(0, WaitBegin), ev(10, WaitEnd), ev(12, ExecuteBegin(None)), ev(20, ExecuteEnd)],
            20,
        );
        assert!(diags.is_empty());
        assert_eq!(folded, 4);
        let got: Vec<_> = spans.iter().map(|s| (s.state, s.start, s.end)).collect();
        assert_eq!(
            got,
            vec![
                (ExecutorState::Waiting, 0, 10),
                (ExecutorState::Overhead, 10, 12),
                (ExecutorState::Executing, 12, 20)
            ]
        );
    }

    #[test]
    fn no_events_no_spans() {
        let (spans, diags, folded) = fold_executor(&[], 0);
        assert!(spans.is_empty() && diags.is_empty());
        assert_eq!(folded, 0);
    }

    #[test]
    fn truncated_execution_closes_at_trace_end() {
        use ExecutorEventKind::*;
        let (spans, diags, _) = fold_executor(
            &[ev(0, WaitBegin), ev(5, WaitEnd), ev(6, ExecuteBegin(None))],
            42,
        );
        assert_eq!(spans.last().map(|s| (s.state, s.start, s.end)), Some((ExecutorState::Executing, 6, 42)));
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::UnterminatedExecutorState);
    }

    #[test]
    fn wake_without_execution_is_overhead() {
        use ExecutorEventKind::*;
        let (spans, _, _) = fold_executor(&[ev(0, WaitBegin), ev(5, WaitEnd), ev(9, WaitBegin), ev(12, WaitEnd)], 12);
        let states: Vec<_> = spans.iter().map(|s| (s.state, s.start, s.end)).collect();
        assert_eq!(
            states,
            vec![
                (ExecutorState::Waiting, 0, 5),
                (ExecutorState::Overhead, 5, 9),
                (ExecutorState::Waiting, 9, 12)
            ]
        );
    }

    #[test]
    fn stray_ends_are_absorbed() {
        use ExecutorEventKind::*;
        let (spans, diags, folded) = fold_executor(&[ev(1, WaitEnd), ev(2, ExecuteEnd)], 2);
        assert!(spans.is_empty());
        assert_eq!(folded, 0);
        assert_eq!(diags.iter().map(|d| d.events).sum::<u32>(), 2);
    }
}
