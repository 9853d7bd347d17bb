//! Discrete-event execution of a scenario.

use super::config::{Delay, InvalidConfig, ScenarioConfig};
use crate::trace::{EventKind, Gid, HostId, LinkType, ObjectKey, TraceEvent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};

/// Reference time of scenario start.
pub const EPOCH_NS: i64 = 1_000_000_000;
/// Executors start waiting this long after scenario start.
pub const WORKER_START_NS: i64 = 1_000_000;
const US: i64 = 1_000;
const HANDLE_BASE: u64 = 0x1000;
const HANDLE_STEP: u64 = 0x10;
const MESSAGE_REF_BASE: u64 = 0x7f00_0000;
const MESSAGE_REF_SLOTS: u64 = 64;
const MAX_EVENTS: u64 = 50_000_000;

pub(crate) struct SimHost {
    pub id: HostId,
    pub offset: i64,
}

pub(crate) struct SimProcess {
    pub host: usize,
    pub pid: u32,
    pub threads: u32,
}

pub(crate) struct SimNode {
    pub process: usize,
}

pub(crate) struct SimPublisher {
    pub node: usize,
    pub topic: String,
    pub key: ObjectKey,
    pub rmw: u64,
    pub writer: u64,
}

pub(crate) struct SimSubscription {
    pub node: usize,
    pub topic: String,
    pub key: ObjectKey,
    pub rmw: u64,
    pub callback_ref: u64,
    pub exec: Delay,
    pub publish: Vec<usize>,
}

pub(crate) struct SimTimer {
    pub node: usize,
    pub key: ObjectKey,
    pub callback_ref: u64,
    pub period: i64,
    pub exec: Delay,
    pub publish: Vec<usize>,
}

pub(crate) struct SimAnnotation {
    pub node: usize,
    pub link_type: LinkType,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum Owner {
    Timer(usize),
    Sub(usize),
}

/// One callback execution. Times are on the reference clock.
pub(crate) struct CbRecord {
    pub owner: Owner,
    pub start: i64,
    pub end: i64,
    pub take: Option<i64>,
    /// Source timestamp of the consumed message, for subscription callbacks.
    pub source_ts: Option<i64>,
    /// Publication delivered to this callback.
    pub received: Option<usize>,
}

pub(crate) struct PubRecord {
    pub publisher: usize,
    /// Host-local, as stamped into the trace.
    pub source_ts: i64,
    pub pub_ts: i64,
    pub dds_ts: i64,
    pub enclosing: usize,
}

pub(crate) struct IndirectRecord {
    pub annotation: usize,
    pub inputs: Vec<usize>,
    pub output: usize,
}

/// Static world plus everything that happened, in causal bookkeeping form.
pub(crate) struct SimRun {
    pub hosts: Vec<SimHost>,
    pub processes: Vec<SimProcess>,
    pub nodes: Vec<SimNode>,
    pub publishers: Vec<SimPublisher>,
    pub subscriptions: Vec<SimSubscription>,
    pub timers: Vec<SimTimer>,
    pub annotations: Vec<SimAnnotation>,
    pub callbacks: Vec<CbRecord>,
    pub publications: Vec<PubRecord>,
    pub indirect: Vec<IndirectRecord>,
    pub events: Vec<Vec<TraceEvent>>,
    pub max_cross_host_delay: i64,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Ev {
    WorkersStart(usize),
    TimerDue(usize),
    Arrival(usize),
    WorkerFree(usize, usize),
}

enum Work {
    Timer(usize),
    Message(usize),
}

struct Pending {
    sub: usize,
    publication: usize,
}

#[derive(Clone, Copy)]
struct Worker {
    tid: u32,
    idle: bool,
    node: usize,
}

struct Engine<'a> {
    cfg: &'a ScenarioConfig,
    rng: ChaCha8Rng,
    run: SimRun,
    heap: BinaryHeap<Reverse<(i64, u64, Ev)>>,
    seq: u64,
    end_time: i64,
    started: Vec<bool>,
    workers: Vec<Vec<Worker>>,
    queues: Vec<VecDeque<usize>>,
    pending: Vec<Pending>,
    node_busy: Vec<bool>,
    proc_timers: Vec<Vec<usize>>,
    next_due: Vec<i64>,
    subs_by_topic: HashMap<String, Vec<usize>>,
    message_refs: Vec<u64>,
    last_input: Vec<Option<usize>>,
    slots: Vec<Vec<Option<usize>>>,
    processed: u64,
}

fn gid(prefix: u8, n: u64) -> Gid {
    let mut bytes = vec![prefix, 0x0f];
    bytes.extend_from_slice(&n.to_be_bytes());
    bytes.extend_from_slice(&[0, 0, 0, 0, 0, 0x03]);
    Gid::new(bytes).expect("16-byte gid")
}

pub(crate) fn run(cfg: &ScenarioConfig) -> Result<SimRun, InvalidConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let hosts: Vec<SimHost> = cfg
        .hosts
        .iter()
        .map(|h| SimHost { id: HostId::new(&h.id).expect("validated host id"), offset: h.clock_offset_ns })
        .collect();
    let host_idx = |name: &str| cfg.hosts.iter().position(|h| h.id == name).expect("validated host");
    let processes: Vec<SimProcess> = cfg
        .processes
        .iter()
        .enumerate()
        .map(|(i, p)| SimProcess {
            host: host_idx(&p.host),
            pid: 1000 + 100 * i as u32,
            threads: p.executor.threads,
        })
        .collect();

    let mut run = SimRun {
        hosts,
        processes,
        nodes: Vec::new(),
        publishers: Vec::new(),
        subscriptions: Vec::new(),
        timers: Vec::new(),
        annotations: Vec::new(),
        callbacks: Vec::new(),
        publications: Vec::new(),
        indirect: Vec::new(),
        events: vec![Vec::new(); cfg.hosts.len()],
        max_cross_host_delay: 0,
    };
    let mut init_clock: Vec<i64> = vec![0; run.processes.len()];
    let mut next_handle: Vec<u64> = vec![HANDLE_BASE; run.processes.len()];
    let mut writers = 0u64;
    let mut readers = 0u64;
    let mut timer_init: Vec<i64> = Vec::new();

    let emit_init = |run: &mut SimRun, clock: &mut Vec<i64>, p: usize, kind: EventKind| {
        let proc = &run.processes[p];
        let host = &run.hosts[proc.host];
        let ts = EPOCH_NS + clock[p] + host.offset;
        clock[p] += 1;
        let e = TraceEvent { ts, host: host.id.clone(), pid: proc.pid, tid: proc.pid, kind };
        run.events[proc.host].push(e);
    };

    for nc in &cfg.nodes {
        let p = cfg.processes.iter().position(|x| x.name == nc.process).expect("validated process");
        let mut handle = || {
            let h = next_handle[p];
            next_handle[p] += HANDLE_STEP;
            h
        };
        let host_id = run.hosts[run.processes[p].host].id.clone();
        let pid = run.processes[p].pid;
        let key = |h: u64| ObjectKey::new(host_id.clone(), pid, h);
        let node = run.nodes.len();
        let node_handle = handle();
        run.nodes.push(SimNode { process: p });
        emit_init(
            &mut run,
            &mut init_clock,
            p,
            EventKind::NodeInit { node_handle, node_name: nc.name.clone(), node_namespace: nc.namespace.clone() },
        );

        let first_pub = run.publishers.len();
        for topic in &nc.publishers {
            let (rcl, rmw, writer) = (handle(), handle(), handle());
            let g = gid(0x01, writers);
            writers += 1;
            emit_init(
                &mut run,
                &mut init_clock,
                p,
                EventKind::PubInitRcl {
                    publisher_handle: rcl,
                    node_handle,
                    rmw_publisher_handle: rmw,
                    topic_name: topic.clone(),
                },
            );
            emit_init(&mut run, &mut init_clock, p, EventKind::PubInitRmw { rmw_publisher_handle: rmw, gid: g.clone() });
            emit_init(
                &mut run,
                &mut init_clock,
                p,
                EventKind::PubInitDds { writer_handle: writer, gid: g, topic_name: topic.clone() },
            );
            run.publishers.push(SimPublisher { node, topic: topic.clone(), key: key(rcl), rmw, writer });
        }
        let pub_of = |topic: &str| first_pub + nc.publishers.iter().position(|t| t == topic).expect("validated topic");

        let first_sub = run.subscriptions.len();
        for sc in &nc.subscriptions {
            let (rcl, rmw, cb) = (handle(), handle(), handle());
            let g = gid(0x02, readers);
            readers += 1;
            emit_init(
                &mut run,
                &mut init_clock,
                p,
                EventKind::SubInitRcl {
                    subscription_handle: rcl,
                    node_handle,
                    rmw_subscription_handle: rmw,
                    topic_name: sc.topic.clone(),
                },
            );
            emit_init(&mut run, &mut init_clock, p, EventKind::SubInitRmw { rmw_subscription_handle: rmw, gid: g });
            emit_init(&mut run, &mut init_clock, p, EventKind::CallbackRegister { callback_ref: cb, owner_handle: rcl });
            run.subscriptions.push(SimSubscription {
                node,
                topic: sc.topic.clone(),
                key: key(rcl),
                rmw,
                callback_ref: cb,
                exec: sc.exec,
                publish: sc.publish.iter().map(|t| pub_of(t)).collect(),
            });
        }

        for tc in &nc.timers {
            let (th, cb) = (handle(), handle());
            let phase = tc.phase_ns.unwrap_or_else(|| rng.gen_range(0..tc.period_ns));
            let proc = &run.processes[p];
            let host = &run.hosts[proc.host];
            run.events[proc.host].push(TraceEvent {
                ts: EPOCH_NS + phase + host.offset,
                host: host.id.clone(),
                pid,
                tid: pid,
                kind: EventKind::TimerInit { timer_handle: th, period_ns: tc.period_ns },
            });
            emit_init(&mut run, &mut init_clock, p, EventKind::TimerNodeLink { timer_handle: th, node_handle });
            emit_init(&mut run, &mut init_clock, p, EventKind::CallbackRegister { callback_ref: cb, owner_handle: th });
            timer_init.push(EPOCH_NS + phase);
            run.timers.push(SimTimer {
                node,
                key: key(th),
                callback_ref: cb,
                period: tc.period_ns,
                exec: tc.exec,
                publish: tc.publish.iter().map(|t| pub_of(t)).collect(),
            });
        }

        for ac in &nc.annotations {
            let inputs: Vec<usize> = ac
                .inputs
                .iter()
                .map(|t| first_sub + nc.subscriptions.iter().position(|s| &s.topic == t).expect("validated input"))
                .collect();
            let outputs: Vec<usize> = ac.outputs.iter().map(|t| pub_of(t)).collect();
            run.annotations.push(SimAnnotation { node, link_type: ac.link_type, inputs, outputs });
        }
    }
    // Annotations follow all object initialization of their process.
    for a in 0..run.annotations.len() {
        let ann = &run.annotations[a];
        let p = run.nodes[ann.node].process;
        let kind = EventKind::MessageLinkAnnotation {
            link_type: ann.link_type,
            subscription_handles: ann.inputs.iter().map(|s| run.subscriptions[*s].key.handle).collect(),
            publisher_handles: ann.outputs.iter().map(|x| run.publishers[*x].key.handle).collect(),
        };
        emit_init(&mut run, &mut init_clock, p, kind);
    }

    let end_time = EPOCH_NS + cfg.duration_ns;
    let mut subs_by_topic: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, s) in run.subscriptions.iter().enumerate() {
        subs_by_topic.entry(s.topic.clone()).or_default().push(i);
    }
    let mut proc_timers = vec![Vec::new(); run.processes.len()];
    for (i, t) in run.timers.iter().enumerate() {
        proc_timers[run.nodes[t.node].process].push(i);
    }
    let workers = run
        .processes
        .iter()
        .map(|p| (0..p.threads).map(|j| Worker { tid: p.pid + j, idle: true, node: 0 }).collect())
        .collect();
    let n_procs = run.processes.len();
    let n_nodes = run.nodes.len();
    let n_subs = run.subscriptions.len();
    let slots = run.annotations.iter().map(|a| vec![None; a.inputs.len()]).collect();
    let next_due: Vec<i64> = run.timers.iter().zip(&timer_init).map(|(t, init)| init + t.period).collect();

    let mut engine = Engine {
        cfg,
        rng,
        run,
        heap: BinaryHeap::new(),
        seq: 0,
        end_time,
        started: vec![false; n_procs],
        workers,
        queues: vec![VecDeque::new(); n_procs],
        pending: Vec::new(),
        node_busy: vec![false; n_nodes],
        proc_timers,
        next_due,
        subs_by_topic,
        message_refs: vec![0; n_procs],
        last_input: vec![None; n_subs],
        slots,
        processed: 0,
    };
    if cfg.duration_ns == 0 {
        engine.run.events.iter_mut().for_each(Vec::clear);
        return Ok(engine.run);
    }
    engine.simulate()?;
    Ok(engine.run)
}

impl Engine<'_> {
    fn schedule(&mut self, t: i64, ev: Ev) {
        self.heap.push(Reverse((t, self.seq, ev)));
        self.seq += 1;
    }

    fn emit(&mut self, p: usize, tid: u32, t: i64, kind: EventKind) {
        let proc = &self.run.processes[p];
        let host = &self.run.hosts[proc.host];
        let e = TraceEvent { ts: t + host.offset, host: host.id.clone(), pid: proc.pid, tid, kind };
        self.run.events[proc.host].push(e);
    }

    fn simulate(&mut self) -> Result<(), InvalidConfig> {
        for p in 0..self.run.processes.len() {
            self.schedule(EPOCH_NS + WORKER_START_NS, Ev::WorkersStart(p));
        }
        for t in 0..self.run.timers.len() {
            if self.next_due[t] <= self.end_time {
                self.schedule(self.next_due[t], Ev::TimerDue(t));
            }
        }
        let mut now = EPOCH_NS;
        while let Some(Reverse((t, _, ev))) = self.heap.pop() {
            now = t;
            self.processed += 1;
            if self.processed > MAX_EVENTS {
                return Err(InvalidConfig {
                    path: "duration_ns".into(),
                    message: format!("simulation exceeded {MAX_EVENTS} scheduler steps"),
                });
            }
            match ev {
                Ev::WorkersStart(p) => {
                    self.started[p] = true;
                    for w in 0..self.workers[p].len() {
                        let tid = self.workers[p][w].tid;
                        self.emit(p, tid, t, EventKind::ExecutorWaitBegin {});
                    }
                    self.dispatch(p, t);
                }
                Ev::TimerDue(timer) => {
                    let p = self.run.nodes[self.run.timers[timer].node].process;
                    self.dispatch(p, t);
                }
                Ev::Arrival(m) => {
                    let p = self.run.nodes[self.run.subscriptions[self.pending[m].sub].node].process;
                    self.queues[p].push_back(m);
                    self.dispatch(p, t);
                }
                Ev::WorkerFree(p, w) => {
                    self.workers[p][w].idle = true;
                    self.node_busy[self.workers[p][w].node] = false;
                    let tid = self.workers[p][w].tid;
                    self.emit(p, tid, t, EventKind::ExecutorWaitBegin {});
                    self.dispatch(p, t);
                }
            }
        }
        for p in 0..self.run.processes.len() {
            if !self.started[p] {
                continue;
            }
            for w in 0..self.workers[p].len() {
                let tid = self.workers[p][w].tid;
                self.emit(p, tid, now, EventKind::ExecutorWaitEnd {});
            }
        }
        Ok(())
    }

    fn pick(&mut self, p: usize, t: i64) -> Option<Work> {
        let timer = self.proc_timers[p]
            .iter()
            .copied()
            .filter(|x| self.next_due[*x] <= t && !self.node_busy[self.run.timers[*x].node])
            .min_by_key(|x| (self.next_due[*x], *x));
        if let Some(x) = timer {
            return Some(Work::Timer(x));
        }
        let pos = self.queues[p]
            .iter()
            .position(|m| !self.node_busy[self.run.subscriptions[self.pending[*m].sub].node])?;
        self.queues[p].remove(pos).map(Work::Message)
    }

    fn dispatch(&mut self, p: usize, t: i64) {
        if !self.started[p] || t > self.end_time {
            return;
        }
        while let Some(w) = self.workers[p].iter().position(|w| w.idle) {
            let Some(work) = self.pick(p, t) else { break };
            self.execute(p, w, work, t);
        }
    }

    fn message_ref(&mut self, p: usize) -> u64 {
        let r = MESSAGE_REF_BASE + (self.message_refs[p] % MESSAGE_REF_SLOTS) * 0x40;
        self.message_refs[p] += 1;
        r
    }

    fn execute(&mut self, p: usize, w: usize, work: Work, t: i64) {
        let tid = self.workers[p][w].tid;
        self.workers[p][w].idle = false;
        self.emit(p, tid, t, EventKind::ExecutorWaitEnd {});
        let eb = t + self.cfg.executor_overhead.sample(&mut self.rng);

        let cb = self.run.callbacks.len();
        let (node, cb_start, exec, mut publish, target) = match work {
            Work::Timer(x) => {
                let timer = &self.run.timers[x];
                let period = timer.period;
                while self.next_due[x] <= t {
                    self.next_due[x] += period;
                }
                if self.next_due[x] <= self.end_time {
                    self.schedule(self.next_due[x], Ev::TimerDue(x));
                }
                let timer = &self.run.timers[x];
                let (node, exec, publish, handle, cb_ref) =
                    (timer.node, timer.exec, timer.publish.clone(), timer.key.handle, timer.callback_ref);
                self.emit(p, tid, eb, EventKind::ExecutorExecuteBegin { target_handle: handle });
                let start = eb + US;
                self.emit(p, tid, start, EventKind::CallbackStart { callback_ref: cb_ref });
                self.run.callbacks.push(CbRecord {
                    owner: Owner::Timer(x),
                    start,
                    end: 0,
                    take: None,
                    source_ts: None,
                    received: None,
                });
                (node, start, exec, publish, Owner::Timer(x))
            }
            Work::Message(m) => {
                let Pending { sub: s, publication } = self.pending[m];
                let sub = &self.run.subscriptions[s];
                let (node, exec, publish, handle, rmw, cb_ref) =
                    (sub.node, sub.exec, sub.publish.clone(), sub.key.handle, sub.rmw, sub.callback_ref);
                let source_ts = self.run.publications[publication].source_ts;
                self.emit(p, tid, eb, EventKind::ExecutorExecuteBegin { target_handle: handle });
                let take = eb + US;
                let message_ref = self.message_ref(p);
                self.emit(
                    p,
                    tid,
                    take,
                    EventKind::RmwTake { rmw_subscription_handle: rmw, message_ref, source_timestamp: source_ts, taken: true },
                );
                let start = take + 2 * US;
                self.emit(p, tid, start, EventKind::CallbackStart { callback_ref: cb_ref });
                self.run.callbacks.push(CbRecord {
                    owner: Owner::Sub(s),
                    start,
                    end: 0,
                    take: Some(take),
                    source_ts: Some(source_ts),
                    received: Some(publication),
                });
                (node, start, exec, publish, Owner::Sub(s))
            }
        };
        self.node_busy[node] = true;
        self.workers[p][w].node = node;

        // Annotation bookkeeping before publishing.
        let mut fired: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut periodic: Vec<(usize, Vec<usize>)> = Vec::new();
        for a in 0..self.run.annotations.len() {
            let ann = &self.run.annotations[a];
            if ann.node != node {
                continue;
            }
            match (ann.link_type, target) {
                (LinkType::PartialSync, Owner::Sub(s)) => {
                    let positions: Vec<usize> =
                        ann.inputs.iter().enumerate().filter(|(_, i)| **i == s).map(|(k, _)| k).collect();
                    if positions.is_empty() {
                        continue;
                    }
                    for k in positions {
                        self.slots[a][k] = Some(cb);
                    }
                    if self.slots[a].iter().all(Option::is_some) {
                        let snapshot = self.slots[a].iter().flatten().copied().collect();
                        self.slots[a].iter_mut().for_each(|x| *x = None);
                        fired.push((a, snapshot));
                    }
                }
                (LinkType::PeriodicAsync, Owner::Timer(_)) => {
                    let inputs = ann.inputs.iter().filter_map(|s| self.last_input[*s]).collect();
                    periodic.push((a, inputs));
                }
                _ => {}
            }
        }
        for (a, _) in &fired {
            publish.extend(self.run.annotations[*a].outputs.iter().copied());
        }

        let e = exec.sample(&mut self.rng);
        let mut published: Vec<usize> = Vec::with_capacity(publish.len());
        for (j, x) in publish.iter().enumerate() {
            let tp = cb_start + US + e + j as i64 * 4 * US;
            published.push(self.publish(p, tid, *x, tp, cb));
        }
        let cb_end = cb_start + US + e + publish.len() as i64 * 4 * US + US;
        let cb_ref = match target {
            Owner::Timer(x) => self.run.timers[x].callback_ref,
            Owner::Sub(s) => self.run.subscriptions[s].callback_ref,
        };
        self.emit(p, tid, cb_end, EventKind::CallbackEnd { callback_ref: cb_ref });
        self.run.callbacks[cb].end = cb_end;
        let ee = cb_end + US;
        self.emit(p, tid, ee, EventKind::ExecutorExecuteEnd {});
        self.schedule(ee, Ev::WorkerFree(p, w));

        if let Owner::Sub(s) = target {
            self.last_input[s] = Some(cb);
        }
        for (a, inputs) in periodic {
            for (x, pr) in publish.iter().zip(&published) {
                if self.run.annotations[a].outputs.contains(x) {
                    self.run.indirect.push(IndirectRecord { annotation: a, inputs: inputs.clone(), output: *pr });
                }
            }
        }
        for (a, inputs) in fired {
            for (x, pr) in publish.iter().zip(&published) {
                if self.run.annotations[a].outputs.contains(x) {
                    self.run.indirect.push(IndirectRecord { annotation: a, inputs: inputs.clone(), output: *pr });
                }
            }
        }
    }

    fn publish(&mut self, p: usize, tid: u32, x: usize, tp: i64, cb: usize) -> usize {
        let publisher = &self.run.publishers[x];
        let (rcl, rmw, writer, topic) = (publisher.key.handle, publisher.rmw, publisher.writer, publisher.topic.clone());
        let message_ref = self.message_ref(p);
        let host = self.run.processes[p].host;
        let dds = tp + 3 * US;
        let source_ts = dds + self.run.hosts[host].offset;
        self.emit(p, tid, tp, EventKind::PublishRclcpp { publisher_handle: rcl, message_ref });
        self.emit(p, tid, tp + US, EventKind::PublishRcl { publisher_handle: rcl, message_ref });
        self.emit(p, tid, tp + 2 * US, EventKind::PublishRmw { rmw_publisher_handle: rmw, message_ref });
        self.emit(
            p,
            tid,
            dds,
            EventKind::DdsWrite { writer_handle: writer, message_ref, source_timestamp: source_ts },
        );
        let pr = self.run.publications.len();
        self.run.publications.push(PubRecord { publisher: x, source_ts, pub_ts: tp, dds_ts: dds, enclosing: cb });

        let receivers = self.subs_by_topic.get(&topic).cloned().unwrap_or_default();
        for s in receivers {
            let dest_host = self.run.processes[self.run.nodes[self.run.subscriptions[s].node].process].host;
            let delay = self
                .cfg
                .network
                .delay(&self.cfg.hosts[host].id, &self.cfg.hosts[dest_host].id)
                .sample(&mut self.rng);
            if dest_host != host {
                self.run.max_cross_host_delay = self.run.max_cross_host_delay.max(delay);
            }
            let m = self.pending.len();
            self.pending.push(Pending { sub: s, publication: pr });
            self.schedule(dds + delay, Ev::Arrival(m));
        }
        pr
    }
}
