//! Hand-built traces for small, exactly specified scenarios.

use msgflow::{
    trace::{parse_event, TraceEvent},
    TraceBundle,
};
use serde_json::{json, Value};

const MS: i64 = 1_000_000;

/// Handles of one declared publisher.
#[derive(Clone, Copy, Debug)]
pub struct Pub {
    pub handle: u64,
    pub rmw: u64,
    pub writer: u64,
    pid: u32,
}

/// Handles of one declared subscription.
#[derive(Clone, Copy, Debug)]
pub struct Sub {
    pub handle: u64,
    pub rmw: u64,
    pub callback: u64,
    pid: u32,
}

#[derive(Clone, Copy, Debug)]
pub struct Timer {
    pub handle: u64,
    pub callback: u64,
    pid: u32,
}

#[derive(Default)]
pub struct TraceBuilder {
    events: Vec<TraceEvent>,
    next_handle: u64,
    next_msg: u64,
}

impl TraceBuilder {
    pub fn new() -> Self {
        TraceBuilder { events: Vec::new(), next_handle: 0x100, next_msg: 0x7000 }
    }

    fn handle(&mut self) -> u64 {
        self.next_handle += 0x10;
        self.next_handle
    }

    pub fn raw(&mut self, host: &str, pid: u32, tid: u32, ts: i64, kind: &str, fields: Value) {
        let mut v = json!({"ts": ts, "host": host, "pid": pid, "tid": tid, "kind": kind});
        if let (Some(obj), Value::Object(extra)) = (v.as_object_mut(), fields) {
            obj.extend(extra);
        }
        self.events.push(parse_event(&v.to_string()).expect("builder emits valid events"));
    }

    pub fn node(&mut self, host: &str, pid: u32, name: &str) -> u64 {
        let h = self.handle();
        self.raw(host, pid, pid, 0, "node_init", json!({"node_handle": h, "node_name": name, "node_namespace": "/"}));
        h
    }

    pub fn publisher(&mut self, host: &str, pid: u32, node: u64, topic: &str) -> Pub {
        let (handle, rmw, writer) = (self.handle(), self.handle(), self.handle());
        let gid = format!("01{handle:030x}");
        self.raw(host, pid, pid, 1, "pub_init_rcl", json!({"publisher_handle": handle, "node_handle": node, "rmw_publisher_handle": rmw, "topic_name": topic}));
        self.raw(host, pid, pid, 2, "pub_init_rmw", json!({"rmw_publisher_handle": rmw, "gid": gid}));
        self.raw(host, pid, pid, 3, "pub_init_dds", json!({"writer_handle": writer, "gid": gid, "topic_name": topic}));
        Pub { handle, rmw, writer, pid }
    }

    pub fn subscription(&mut self, host: &str, pid: u32, node: u64, topic: &str) -> Sub {
        let (handle, rmw, callback) = (self.handle(), self.handle(), self.handle());
        let gid = format!("02{handle:030x}");
        self.raw(host, pid, pid, 1, "sub_init_rcl", json!({"subscription_handle": handle, "node_handle": node, "rmw_subscription_handle": rmw, "topic_name": topic}));
        self.raw(host, pid, pid, 2, "sub_init_rmw", json!({"rmw_subscription_handle": rmw, "gid": gid}));
        self.raw(host, pid, pid, 3, "callback_register", json!({"callback_ref": callback, "owner_handle": handle}));
        Sub { handle, rmw, callback, pid }
    }

    pub fn timer(&mut self, host: &str, pid: u32, node: u64, period_ns: i64) -> Timer {
        let (handle, callback) = (self.handle(), self.handle());
        self.raw(host, pid, pid, 1, "timer_init", json!({"timer_handle": handle, "period_ns": period_ns}));
        self.raw(host, pid, pid, 2, "timer_node_link", json!({"timer_handle": handle, "node_handle": node}));
        self.raw(host, pid, pid, 3, "callback_register", json!({"callback_ref": callback, "owner_handle": handle}));
        Timer { handle, callback, pid }
    }

    pub fn annotate(&mut self, host: &str, pid: u32, link_type: &str, inputs: &[Sub], outputs: &[Pub]) {
        let subs: Vec<u64> = inputs.iter().map(|s| s.handle).collect();
        let pubs: Vec<u64> = outputs.iter().map(|p| p.handle).collect();
        self.raw(host, pid, pid, 4, "message_link_annotation", json!({"link_type": link_type, "subscription_handles": subs, "publisher_handles": pubs}));
    }

    /// Four-layer publication starting at `ts` on thread `tid`; returns its source timestamp.
    pub fn publish(&mut self, host: &str, tid: u32, ts: i64, p: Pub) -> i64 {
        self.publish_with_source(host, tid, ts, p, ts + 3)
    }

    pub fn publish_with_source(&mut self, host: &str, tid: u32, ts: i64, p: Pub, source_ts: i64) -> i64 {
        self.next_msg += 0x40;
        let m = self.next_msg;
        self.raw(host, p.pid, tid, ts, "publish_rclcpp", json!({"publisher_handle": p.handle, "message_ref": m}));
        self.raw(host, p.pid, tid, ts + 1, "publish_rcl", json!({"publisher_handle": p.handle, "message_ref": m}));
        self.raw(host, p.pid, tid, ts + 2, "publish_rmw", json!({"rmw_publisher_handle": p.rmw, "message_ref": m}));
        self.raw(host, p.pid, tid, ts + 3, "dds_write", json!({"writer_handle": p.writer, "message_ref": m, "source_timestamp": source_ts}));
        source_ts
    }

    pub fn callback(&mut self, host: &str, pid: u32, tid: u32, callback: u64, start: i64, end: i64) {
        self.raw(host, pid, tid, start, "callback_start", json!({"callback_ref": callback}));
        self.raw(host, pid, tid, end, "callback_end", json!({"callback_ref": callback}));
    }

    pub fn timer_callback(&mut self, host: &str, t: Timer, start: i64, end: i64) {
        self.callback(host, t.pid, t.pid, t.callback, start, end);
    }

    /// Take at `ts`, then the subscription callback over `[ts + 1, end]`.
    pub fn receive(&mut self, host: &str, s: Sub, ts: i64, source_ts: i64, end: i64) {
        self.raw(host, s.pid, s.pid, ts, "rmw_take", json!({"rmw_subscription_handle": s.rmw, "message_ref": 0x9000 + ts, "source_timestamp": source_ts, "taken": true}));
        self.callback(host, s.pid, s.pid, s.callback, ts + 1, end);
    }

    pub fn bundle(&self) -> TraceBundle {
        TraceBundle::from_events(self.events.clone())
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }
}

/// Timer source on A, relay on B, sink on A: timer 0..2 ms, sink callback ends at 30 ms.
pub fn pipeline() -> TraceBuilder {
    let mut b = TraceBuilder::new();
    let source = b.node("A", 10, "source");
    let relay = b.node("B", 20, "relay");
    let sink = b.node("A", 30, "sink");
    let pa = b.publisher("A", 10, source, "/topic_a");
    let sa = b.subscription("B", 20, relay, "/topic_a");
    let pb = b.publisher("B", 20, relay, "/topic_b");
    let sb = b.subscription("A", 30, sink, "/topic_b");
    let t = b.timer("A", 10, source, 100 * MS);
    b.timer_callback("A", t, 0, 2 * MS);
    let a = b.publish("A", 10, MS, pa);
    b.receive("B", sa, 3 * MS, a, 20 * MS);
    let bb = b.publish("B", 20, 15 * MS, pb);
    b.receive("A", sb, 22 * MS, bb, 30 * MS);
    b
}
