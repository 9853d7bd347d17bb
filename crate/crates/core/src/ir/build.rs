use super::{
    fold::{fold_executor, fold_publication, ExecutorEvent, ExecutorEventKind, PublishLayer, PublishLayerEvent},
    CallbackInstance, CallbackOwner, ExecutorStateInterval, IrDatabase, LayerHandles, LinkAnnotation,
    NodeId, NodeRec, PublisherId, PublisherRec, SubscriptionId, SubscriptionRec, TakeRec, TimerId, TimerRec,
};
use crate::{
    diag::{Diagnostic, DiagnosticKind},
    trace::{EventKind, Gid, HostId, LinkType, ObjectKey, Timestamp, TraceBundle, TraceEvent},
};
use std::collections::{btree_map::Entry, BTreeMap, HashMap, HashSet};

type ProcKey = (HostId, u32);

/// Handle lookups scoped to one process.
#[derive(Default)]
struct ProcTables {
    nodes: HashMap<u64, NodeId>,
    pub_rcl: HashMap<u64, PublisherId>,
    pub_rmw: HashMap<u64, PublisherId>,
    pub_writer: HashMap<u64, PublisherId>,
    sub_rcl: HashMap<u64, SubscriptionId>,
    sub_rmw: HashMap<u64, SubscriptionId>,
    timers: HashMap<u64, TimerId>,
    callbacks: HashMap<u64, CallbackOwner>,
}

struct PubRclInit {
    node_handle: u64,
    rmw_handle: u64,
    topic: String,
}

struct SubRclInit {
    node_handle: u64,
    rmw_handle: u64,
    topic: String,
}

/// Raw initialization events, grouped before objects are assigned ids.
#[derive(Default)]
struct InitEvents {
    nodes: BTreeMap<ObjectKey, (String, String)>,
    pub_rcl: BTreeMap<ObjectKey, PubRclInit>,
    pub_rmw: HashMap<(ProcKey, u64), Gid>,
    pub_dds: HashMap<(ProcKey, Gid), (u64, String)>,
    sub_rcl: BTreeMap<ObjectKey, SubRclInit>,
    sub_rmw: HashMap<(ProcKey, u64), Gid>,
    timers: BTreeMap<ObjectKey, (i64, Timestamp)>,
    timer_nodes: HashMap<(ProcKey, u64), u64>,
    registrations: Vec<(ProcKey, u64, u64)>,
    annotations: Vec<(ProcKey, LinkType, Vec<u64>, Vec<u64>)>,
    count: u64,
}

fn duplicate(e: &TraceEvent, what: &str, handle: u64) -> Diagnostic {
    Diagnostic::new(
        DiagnosticKind::DuplicateObject,
        format!("{what} {handle:#x} initialized more than once; keeping the first"),
    )
    .at(&e.host, e.pid, Some(e.tid))
    .ts(e.ts)
}

fn collect_init(bundle: &TraceBundle, diags: &mut Vec<Diagnostic>) -> InitEvents {
    let mut init = InitEvents::default();
    for e in bundle.events().filter(|e| e.kind.is_init()) {
        init.count += 1;
        let proc: ProcKey = (e.host.clone(), e.pid);
        let key = |handle| ObjectKey::new(e.host.clone(), e.pid, handle);
        match &e.kind {
            EventKind::NodeInit { node_handle, node_name, node_namespace } => {
                match init.nodes.entry(key(*node_handle)) {
                    Entry::Occupied(_) => diags.push(duplicate(e, "node", *node_handle)),
                    Entry::Vacant(v) => {
                        v.insert((node_name.clone(), node_namespace.clone()));
                    }
                }
            }
            EventKind::PubInitRcl { publisher_handle, node_handle, rmw_publisher_handle, topic_name } => {
                match init.pub_rcl.entry(key(*publisher_handle)) {
                    Entry::Occupied(_) => diags.push(duplicate(e, "publisher", *publisher_handle)),
                    Entry::Vacant(v) => {
                        v.insert(PubRclInit {
                            node_handle: *node_handle,
                            rmw_handle: *rmw_publisher_handle,
                            topic: topic_name.clone(),
                        });
                    }
                }
            }
            EventKind::PubInitRmw { rmw_publisher_handle, gid } => {
                if init.pub_rmw.insert((proc, *rmw_publisher_handle), gid.clone()).is_some() {
                    diags.push(duplicate(e, "rmw publisher", *rmw_publisher_handle));
                }
            }
            EventKind::PubInitDds { writer_handle, gid, topic_name } => {
                if init
                    .pub_dds
                    .insert((proc, gid.clone()), (*writer_handle, topic_name.clone()))
                    .is_some()
                {
                    diags.push(duplicate(e, "data writer", *writer_handle));
                }
            }
            EventKind::SubInitRcl { subscription_handle, node_handle, rmw_subscription_handle, topic_name } => {
                match init.sub_rcl.entry(key(*subscription_handle)) {
                    Entry::Occupied(_) => diags.push(duplicate(e, "subscription", *subscription_handle)),
                    Entry::Vacant(v) => {
                        v.insert(SubRclInit {
                            node_handle: *node_handle,
                            rmw_handle: *rmw_subscription_handle,
                            topic: topic_name.clone(),
                        });
                    }
                }
            }
            EventKind::SubInitRmw { rmw_subscription_handle, gid } => {
                if init.sub_rmw.insert((proc, *rmw_subscription_handle), gid.clone()).is_some() {
                    diags.push(duplicate(e, "rmw subscription", *rmw_subscription_handle));
                }
            }
            EventKind::CallbackRegister { callback_ref, owner_handle } => {
                init.registrations.push((proc, *callback_ref, *owner_handle));
            }
            EventKind::TimerInit { timer_handle, period_ns } => {
                match init.timers.entry(key(*timer_handle)) {
                    Entry::Occupied(_) => diags.push(duplicate(e, "timer", *timer_handle)),
                    Entry::Vacant(v) => {
                        v.insert((*period_ns, e.ts));
                    }
                }
            }
            EventKind::TimerNodeLink { timer_handle, node_handle } => {
                init.timer_nodes.insert((proc, *timer_handle), *node_handle);
            }
            EventKind::MessageLinkAnnotation { link_type, subscription_handles, publisher_handles } => {
                init.annotations.push((
                    proc,
                    *link_type,
                    subscription_handles.clone(),
                    publisher_handles.clone(),
                ));
            }
            _ => unreachable!("filtered to init events"),
        }
    }
    init
}

fn proc_of(key: &ObjectKey) -> ProcKey {
    (key.host.clone(), key.pid)
}

fn unresolved(key: &ObjectKey, msg: String) -> Diagnostic {
    Diagnostic::new(DiagnosticKind::UnresolvedHandle, msg).at(&key.host, key.pid, None)
}

/// Merges initialization events into objects and builds per-process handle tables.
fn build_objects(
    init: InitEvents,
    db: &mut IrDatabase,
    diags: &mut Vec<Diagnostic>,
) -> HashMap<ProcKey, ProcTables> {
    let mut tables: HashMap<ProcKey, ProcTables> = HashMap::new();

    for (key, (name, namespace)) in init.nodes {
        let id = NodeId(db.nodes.len() as u32);
        tables.entry(proc_of(&key)).or_default().nodes.insert(key.handle, id);
        db.nodes.push(NodeRec { key, name, namespace });
    }
    let node_of = |tables: &HashMap<ProcKey, ProcTables>, key: &ObjectKey, handle: u64| {
        tables.get(&proc_of(key)).and_then(|t| t.nodes.get(&handle).copied())
    };

    let mut claimed_rmw = HashSet::new();
    let mut claimed_dds = HashSet::new();
    for (key, rcl) in init.pub_rcl {
        let proc = proc_of(&key);
        let node = node_of(&tables, &key, rcl.node_handle);
        if node.is_none() {
            diags.push(unresolved(&key, format!("publisher {key} references unknown node {:#x}", rcl.node_handle)));
        }
        let gid = init.pub_rmw.get(&(proc.clone(), rcl.rmw_handle)).cloned();
        if gid.is_some() {
            claimed_rmw.insert((proc.clone(), rcl.rmw_handle));
        }
        let dds = gid
            .as_ref()
            .and_then(|g| init.pub_dds.get(&(proc.clone(), g.clone())).map(|d| (g.clone(), d)));
        if let Some((g, _)) = &dds {
            claimed_dds.insert((proc.clone(), g.clone()));
        }
        let writer = dds.as_ref().map(|(_, (w, _))| *w);
        if let Some((_, (_, dds_topic))) = &dds {
            if *dds_topic != rcl.topic {
                diags.push(
                    Diagnostic::new(
                        DiagnosticKind::TopicMismatch,
                        format!("publisher {key}: rcl topic {} but data writer topic {dds_topic}", rcl.topic),
                    )
                    .at(&key.host, key.pid, None),
                );
            }
        }
        let complete = gid.is_some() && writer.is_some();
        if !complete {
            let missing = if gid.is_none() { "pub_init_rmw" } else { "pub_init_dds" };
            diags.push(
                Diagnostic::new(
                    DiagnosticKind::IncompletePublisher,
                    format!("publisher {key} on {}: no matching {missing}", rcl.topic),
                )
                .at(&key.host, key.pid, None),
            );
        }
        let id = PublisherId(db.publishers.len() as u32);
        let rcl_handle = key.handle;
        let t = tables.entry(proc).or_default();
        t.pub_rcl.insert(rcl_handle, id);
        t.pub_rmw.insert(rcl.rmw_handle, id);
        if let Some(w) = writer {
            t.pub_writer.insert(w, id);
        }
        db.publishers.push(PublisherRec {
            key,
            node,
            topic: rcl.topic,
            gid,
            layer_handles: LayerHandles { rcl: rcl_handle, rmw: rcl.rmw_handle, dds_writer: writer },
            complete,
        });
    }
    let mut orphan_rmw: Vec<_> = init.pub_rmw.keys().filter(|k| !claimed_rmw.contains(k)).collect();
    orphan_rmw.sort();
    for ((host, pid), handle) in orphan_rmw {
        diags.push(
            Diagnostic::new(
                DiagnosticKind::UnresolvedHandle,
                format!("pub_init_rmw {handle:#x} has no matching pub_init_rcl"),
            )
            .at(host, *pid, None),
        );
    }
    let mut orphan_dds: Vec<_> = init.pub_dds.iter().filter(|(k, _)| !claimed_dds.contains(k)).collect();
    orphan_dds.sort_by(|a, b| a.0.cmp(b.0));
    for (((host, pid), gid), (writer, topic)) in orphan_dds {
        diags.push(
            Diagnostic::new(
                DiagnosticKind::UnresolvedHandle,
                format!("data writer {writer:#x} on {topic} (gid {gid}) has no matching rmw publisher"),
            )
            .at(host, *pid, None),
        );
    }

    for (key, rcl) in init.sub_rcl {
        let proc = proc_of(&key);
        let node = node_of(&tables, &key, rcl.node_handle);
        if node.is_none() {
            diags.push(unresolved(&key, format!("subscription {key} references unknown node {:#x}", rcl.node_handle)));
        }
        let gid = init.sub_rmw.get(&(proc.clone(), rcl.rmw_handle)).cloned();
        let id = SubscriptionId(db.subscriptions.len() as u32);
        let t = tables.entry(proc).or_default();
        t.sub_rcl.insert(key.handle, id);
        t.sub_rmw.insert(rcl.rmw_handle, id);
        db.subscriptions.push(SubscriptionRec {
            key,
            node,
            topic: rcl.topic,
            rmw_handle: rcl.rmw_handle,
            gid,
            callback_ref: None,
        });
    }

    for (key, (period_ns, init_ts)) in init.timers {
        let proc = proc_of(&key);
        let node = init
            .timer_nodes
            .get(&(proc.clone(), key.handle))
            .and_then(|n| node_of(&tables, &key, *n));
        let id = TimerId(db.timers.len() as u32);
        tables.entry(proc).or_default().timers.insert(key.handle, id);
        db.timers.push(TimerRec { key, node, period_ns, callback_ref: None, init_ts });
    }

    for ((host, pid), callback_ref, owner) in init.registrations {
        let t = tables.entry((host.clone(), pid)).or_default();
        let resolved = if let Some(&s) = t.sub_rcl.get(&owner) {
            db.subscriptions[s.idx()].callback_ref = Some(callback_ref);
            Some(CallbackOwner::Subscription(s))
        } else if let Some(&tm) = t.timers.get(&owner) {
            db.timers[tm.idx()].callback_ref = Some(callback_ref);
            Some(CallbackOwner::Timer(tm))
        } else {
            None
        };
        match resolved {
            Some(o) => {
                t.callbacks.insert(callback_ref, o);
            }
            None => diags.push(
                Diagnostic::new(
                    DiagnosticKind::UnresolvedHandle,
                    format!("callback {callback_ref:#x} registered for unknown owner {owner:#x}"),
                )
                .at(&host, pid, None),
            ),
        }
    }

    let empty = ProcTables::default();
    for ((host, pid), link_type, subs, pubs) in init.annotations {
        let t = tables.get(&(host.clone(), pid)).unwrap_or(&empty);
        let inputs: Vec<_> = subs.iter().filter_map(|h| t.sub_rcl.get(h).copied()).collect();
        let outputs: Vec<_> = pubs.iter().filter_map(|h| t.pub_rcl.get(h).copied()).collect();
        if inputs.len() != subs.len() || outputs.len() != pubs.len() {
            diags.push(
                Diagnostic::new(
                    DiagnosticKind::UnresolvedAnnotation,
                    format!(
                        "{} annotation: {} of {} inputs and {} of {} outputs resolved",
                        link_type.as_str(),
                        inputs.len(),
                        subs.len(),
                        outputs.len(),
                        pubs.len()
                    ),
                )
                .at(&host, pid, None),
            );
        }
        if !inputs.is_empty() && !outputs.is_empty() {
            db.annotations.push(LinkAnnotation { link_type, host, pid, inputs, outputs });
        }
    }
    tables
}

struct OpenCallback {
    callback_ref: u64,
    owner: Option<CallbackOwner>,
    start: Timestamp,
    take: Option<TakeRec>,
}

struct ThreadFolder<'a> {
    host: &'a HostId,
    pid: u32,
    tid: u32,
    tables: &'a ProcTables,
    windows: HashMap<u64, Vec<PublishLayerEvent>>,
    pending_take: Option<(SubscriptionId, TakeRec)>,
    stack: Vec<OpenCallback>,
    executor: Vec<ExecutorEvent>,
    diags: Vec<Diagnostic>,
    folded: u64,
}

impl ThreadFolder<'_> {
    fn diag(&mut self, d: Diagnostic) {
        self.diags.push(d.at(self.host, self.pid, Some(self.tid)));
    }

    fn close_window(&mut self, events: Vec<PublishLayerEvent>, db: &mut IrDatabase) {
        let (instance, diags) = fold_publication(&events);
        if let Some(inst) = instance {
            self.folded += inst.layer_count() as u64;
            db.publications.push(inst);
        }
        for d in diags {
            let d = match (d.ts, events.last()) {
                (None, Some(last)) => d.ts(last.ts),
                _ => d,
            };
            self.diag(d);
        }
    }

    fn publish(&mut self, e: &TraceEvent, layer: PublishLayer, handle: u64, message_ref: u64, src: Option<Timestamp>, db: &mut IrDatabase) {
        let table = match layer {
            PublishLayer::Rclcpp | PublishLayer::Rcl => &self.tables.pub_rcl,
            PublishLayer::Rmw => &self.tables.pub_rmw,
            PublishLayer::Dds => &self.tables.pub_writer,
        };
        let Some(&publisher) = table.get(&handle) else {
            self.diag(
                Diagnostic::new(
                    DiagnosticKind::UnresolvedHandle,
                    format!("{} for unknown publisher handle {handle:#x}", e.kind.name()),
                )
                .ts(e.ts)
                .absorbing(1),
            );
            return;
        };
        let ev = PublishLayerEvent { layer, ts: e.ts, publisher, tid: e.tid, source_timestamp: src };
        let reuse = self
            .windows
            .get(&message_ref)
            .is_some_and(|w| w.iter().any(|x| x.layer == layer || x.publisher != publisher));
        if reuse {
            let prev = self.windows.remove(&message_ref).unwrap();
            self.diag(
                Diagnostic::new(
                    DiagnosticKind::PublicationWindowReuse,
                    format!("message_ref {message_ref:#x} reused before its publication reached dds_write"),
                )
                .ts(e.ts),
            );
            self.close_window(prev, db);
        }
        let window = self.windows.entry(message_ref).or_default();
        window.push(ev);
        if layer == PublishLayer::Dds {
            let window = self.windows.remove(&message_ref).unwrap();
            self.close_window(window, db);
        }
    }

    fn take(&mut self, e: &TraceEvent, handle: u64, source_timestamp: Timestamp, taken: bool) {
        if !taken {
            self.diag(Diagnostic::new(DiagnosticKind::UntakenTake, "rmw_take returned no message").ts(e.ts).absorbing(1));
            return;
        }
        let Some(&sub) = self.tables.sub_rmw.get(&handle) else {
            self.diag(
                Diagnostic::new(
                    DiagnosticKind::UnresolvedHandle,
                    format!("rmw_take for unknown subscription handle {handle:#x}"),
                )
                .ts(e.ts)
                .absorbing(1),
            );
            return;
        };
        if let Some((_, prev)) = self.pending_take.take() {
            self.diag(
                Diagnostic::new(DiagnosticKind::UnconsumedTake, "taken message was never handed to a callback")
                    .ts(prev.ts)
                    .absorbing(1),
            );
        }
        self.pending_take = Some((sub, TakeRec { ts: e.ts, source_timestamp }));
    }

    fn callback_start(&mut self, e: &TraceEvent, callback_ref: u64) {
        let owner = self.tables.callbacks.get(&callback_ref).copied();
        let mut take = None;
        if let Some(CallbackOwner::Subscription(sub)) = owner {
            match self.pending_take {
                Some((s, t)) if s == sub => {
                    take = Some(t);
                    self.pending_take = None;
                }
                Some((_, t)) => {
                    self.pending_take = None;
                    self.diag(
                        Diagnostic::new(
                            DiagnosticKind::UnconsumedTake,
                            "taken message was followed by a callback of another subscription",
                        )
                        .ts(t.ts)
                        .absorbing(1),
                    );
                }
                None => {}
            }
        }
        self.stack.push(OpenCallback { callback_ref, owner, start: e.ts, take });
    }

    /// Turns a closed callback into an instance, or a diagnostic absorbing its events.
    fn finish_callback(&mut self, cb: OpenCallback, end: Timestamp, db: &mut IrDatabase) {
        let events = 2 + cb.take.is_some() as u32;
        match cb.owner {
            None => self.diag(
                Diagnostic::new(
                    DiagnosticKind::UnresolvedHandle,
                    format!("callback {:#x} was never registered", cb.callback_ref),
                )
                .ts(cb.start)
                .absorbing(events),
            ),
            Some(CallbackOwner::Subscription(_)) if cb.take.is_none() => self.diag(
                Diagnostic::new(DiagnosticKind::MissingTake, "subscription callback without a preceding take")
                    .ts(cb.start)
                    .absorbing(events),
            ),
            Some(owner) => {
                self.folded += events as u64;
                db.callbacks.push(CallbackInstance { owner, tid: self.tid, start: cb.start, end, take: cb.take });
            }
        }
    }

    fn callback_end(&mut self, e: &TraceEvent, callback_ref: u64, db: &mut IrDatabase) {
        let Some(pos) = self.stack.iter().rposition(|c| c.callback_ref == callback_ref) else {
            self.diag(
                Diagnostic::new(DiagnosticKind::UnmatchedCallbackEnd, format!("callback_end for {callback_ref:#x} without a start"))
                    .ts(e.ts)
                    .absorbing(1),
            );
            return;
        };
        while self.stack.len() > pos + 1 {
            let inner = self.stack.pop().unwrap();
            self.unterminated(inner);
        }
        let cb = self.stack.pop().unwrap();
        self.finish_callback(cb, e.ts, db);
    }

    fn unterminated(&mut self, cb: OpenCallback) {
        self.diag(
            Diagnostic::new(DiagnosticKind::UnterminatedCallback, format!("callback {:#x} never ended", cb.callback_ref))
                .ts(cb.start)
                .absorbing(1 + cb.take.is_some() as u32),
        );
    }

    fn target(&self, handle: u64) -> Option<CallbackOwner> {
        self.tables
            .sub_rcl
            .get(&handle)
            .map(|&s| CallbackOwner::Subscription(s))
            .or_else(|| self.tables.timers.get(&handle).map(|&t| CallbackOwner::Timer(t)))
            .or_else(|| self.tables.callbacks.get(&handle).copied())
    }

    fn finish(mut self, trace_end: Timestamp, db: &mut IrDatabase) -> (Vec<Diagnostic>, u64) {
        let mut refs: Vec<u64> = self.windows.keys().copied().collect();
        refs.sort_unstable();
        for r in refs {
            let w = self.windows.remove(&r).unwrap();
            self.close_window(w, db);
        }
        if let Some((_, t)) = self.pending_take.take() {
            self.diag(
                Diagnostic::new(DiagnosticKind::UnconsumedTake, "taken message was never handed to a callback")
                    .ts(t.ts)
                    .absorbing(1),
            );
        }
        while let Some(cb) = self.stack.pop() {
            self.unterminated(cb);
        }
        let executor = std::mem::take(&mut self.executor);
        let (spans, diags, folded) = fold_executor(&executor, trace_end);
        self.folded += folded as u64;
        for d in diags {
            self.diag(d);
        }
        for s in spans {
            db.executor_intervals.push(ExecutorStateInterval {
                host: self.host.clone(),
                pid: self.pid,
                tid: self.tid,
                state: s.state,
                start: s.start,
                end: s.end,
                target: s.target,
            });
        }
        (self.diags, self.folded)
    }
}

/// Correlates a trace bundle into the intermediate representation.
///
/// Never fails: events that cannot be correlated end up in diagnostics, each
/// accounting for the runtime events it absorbed.
pub fn build_ir(bundle: &TraceBundle) -> IrDatabase {
    let mut db = IrDatabase {
        hosts: bundle.traces().iter().map(|t| t.host.clone()).collect(),
        ..IrDatabase::default()
    };
    let mut diags = Vec::new();
    let init = collect_init(bundle, &mut diags);
    let init_count = init.count;
    let tables = build_objects(init, &mut db, &mut diags);
    let empty = ProcTables::default();

    let mut runtime = 0u64;
    let mut folded = 0u64;
    for trace in bundle.traces() {
        let mut threads: BTreeMap<(u32, u32), Vec<&TraceEvent>> = BTreeMap::new();
        for e in trace.events.iter().filter(|e| !e.kind.is_init()) {
            threads.entry((e.pid, e.tid)).or_default().push(e);
        }
        for ((pid, tid), events) in threads {
            runtime += events.len() as u64;
            let mut f = ThreadFolder {
                host: &trace.host,
                pid,
                tid,
                tables: tables.get(&(trace.host.clone(), pid)).unwrap_or(&empty),
                windows: HashMap::new(),
                pending_take: None,
                stack: Vec::new(),
                executor: Vec::new(),
                diags: Vec::new(),
                folded: 0,
            };
            for e in &events {
                match &e.kind {
                    EventKind::PublishRclcpp { publisher_handle, message_ref } => {
                        f.publish(e, PublishLayer::Rclcpp, *publisher_handle, *message_ref, None, &mut db)
                    }
                    EventKind::PublishRcl { publisher_handle, message_ref } => {
                        f.publish(e, PublishLayer::Rcl, *publisher_handle, *message_ref, None, &mut db)
                    }
                    EventKind::PublishRmw { rmw_publisher_handle, message_ref } => {
                        f.publish(e, PublishLayer::Rmw, *rmw_publisher_handle, *message_ref, None, &mut db)
                    }
                    EventKind::DdsWrite { writer_handle, message_ref, source_timestamp } => f.publish(
                        e,
                        PublishLayer::Dds,
                        *writer_handle,
                        *message_ref,
                        Some(*source_timestamp),
                        &mut db,
                    ),
                    EventKind::RmwTake { rmw_subscription_handle, source_timestamp, taken, .. } => {
                        f.take(e, *rmw_subscription_handle, *source_timestamp, *taken)
                    }
                    EventKind::CallbackStart { callback_ref } => f.callback_start(e, *callback_ref),
                    EventKind::CallbackEnd { callback_ref } => f.callback_end(e, *callback_ref, &mut db),
                    EventKind::ExecutorWaitBegin {} => {
                        f.executor.push(ExecutorEvent { ts: e.ts, kind: ExecutorEventKind::WaitBegin })
                    }
                    EventKind::ExecutorWaitEnd {} => {
                        f.executor.push(ExecutorEvent { ts: e.ts, kind: ExecutorEventKind::WaitEnd })
                    }
                    EventKind::ExecutorExecuteBegin { target_handle } => {
                        let target = f.target(*target_handle);
                        f.executor.push(ExecutorEvent { ts: e.ts, kind: ExecutorEventKind::ExecuteBegin(target) })
                    }
                    EventKind::ExecutorExecuteEnd {} => {
                        f.executor.push(ExecutorEvent { ts: e.ts, kind: ExecutorEventKind::ExecuteEnd })
                    }
                    _ => unreachable!("init events filtered"),
                }
            }
            let trace_end = events.last().map_or(0, |e| e.ts);
            let (d, n) = f.finish(trace_end, &mut db);
            diags.extend(d);
            folded += n;
        }
    }

    db.publications
        .sort_by_key(|p| (p.pub_ts(), p.dds_ts, p.publisher, p.tid));
    db.callbacks
        .sort_by_key(|c| (c.start, c.end, c.owner, c.tid));
    db.executor_intervals
        .sort_by(|a, b| (a.start, a.end, &a.host, a.pid, a.tid).cmp(&(b.start, b.end, &b.host, b.pid, b.tid)));

    db.stats.init_events = init_count;
    db.stats.runtime_events = runtime;
    db.stats.folded_events = folded;
    db.stats.diagnostic_events = diags.iter().map(|d| d.events as u64).sum();
    db.diagnostics = diags;
    db
}
