//! Builtin scenarios.

use super::config::*;
use crate::trace::LinkType;

const MS: i64 = 1_000_000;
const US: i64 = 1_000;

fn uniform(min: i64, max: i64) -> Delay {
    Delay::Uniform { min, max }
}

fn host(id: &str, offset: i64) -> HostConfig {
    HostConfig { id: id.into(), clock_offset_ns: offset }
}

fn process(name: &str, host: &str, executor: ExecutorConfig) -> ProcessConfig {
    ProcessConfig { name: name.into(), host: host.into(), executor }
}

fn single(name: &str, host: &str) -> ProcessConfig {
    process(name, host, ExecutorConfig::single())
}

fn network(default: Delay) -> NetworkConfig {
    NetworkConfig { default, ..NetworkConfig::default() }
}

fn scenario(name: &str, seed: u64, duration_ns: i64) -> ScenarioConfig {
    ScenarioConfig {
        version: SCENARIO_VERSION,
        name: name.into(),
        seed,
        duration_ns,
        hosts: Vec::new(),
        processes: Vec::new(),
        nodes: Vec::new(),
        network: NetworkConfig::default(),
        executor_overhead: Delay::Constant { ns: 5 * US },
    }
}

struct N(NodeConfig);

impl N {
    fn new(name: &str, process: &str) -> Self {
        N(NodeConfig::new(name, process))
    }

    fn timer(mut self, period_ns: i64, phase_ns: Option<i64>, exec: Delay, publish: &[&str]) -> Self {
        self.add_publishers(publish);
        self.0.timers.push(TimerConfig {
            period_ns,
            phase_ns,
            exec,
            publish: publish.iter().map(|t| t.to_string()).collect(),
        });
        self
    }

    fn sub(mut self, topic: &str, exec: Delay, publish: &[&str]) -> Self {
        self.add_publishers(publish);
        self.0.subscriptions.push(SubscriptionConfig {
            topic: topic.into(),
            exec,
            publish: publish.iter().map(|t| t.to_string()).collect(),
        });
        self
    }

    fn annotate(mut self, link_type: LinkType, inputs: &[&str], outputs: &[&str]) -> Self {
        self.add_publishers(outputs);
        self.0.annotations.push(AnnotationConfig {
            link_type,
            inputs: inputs.iter().map(|t| t.to_string()).collect(),
            outputs: outputs.iter().map(|t| t.to_string()).collect(),
        });
        self
    }

    fn add_publishers(&mut self, topics: &[&str]) {
        for t in topics {
            if !self.0.publishers.iter().any(|p| p == t) {
                self.0.publishers.push(t.to_string());
            }
        }
    }
}

/// Names accepted by [`builtin`], excluding the size-parameterized `stress` scenario.
pub fn builtin_names() -> &'static [&'static str] {
    &[
        "transport_distributed",
        "pipeline_direct",
        "periodic_async_2to1",
        "partial_sync_2to1",
        "reference_mini",
        "multithread_compare_single",
        "multithread_compare_multi",
        "tf_selfloop",
        "collision",
        "ping_pong",
    ]
}

pub fn builtin(name: &str, seed: u64) -> Option<ScenarioConfig> {
    Some(match name {
        "transport_distributed" => transport_distributed(seed),
        "pipeline_direct" => pipeline_direct(seed),
        "periodic_async_2to1" => periodic_async_2to1(seed),
        "partial_sync_2to1" => partial_sync_2to1(seed),
        "reference_mini" => reference_mini(seed),
        "multithread_compare_single" => multithread_compare(seed).0,
        "multithread_compare_multi" => multithread_compare(seed).1,
        "tf_selfloop" => tf_selfloop(seed),
        "collision" => collision(seed),
        "ping_pong" => ping_pong(seed, 0, uniform(100 * US, 2 * MS)),
        "stress" => stress(seed, 1_000_000),
        _ => return None,
    })
}

/// A 5 ms timer on one host publishing to a subscription on another.
fn transport_distributed(seed: u64) -> ScenarioConfig {
    let mut s = scenario("transport_distributed", seed, 500 * MS);
    s.hosts = vec![host("A", 0), host("B", 0)];
    s.processes = vec![single("talker_proc", "A"), single("listener_proc", "B")];
    s.nodes = vec![
        N::new("talker", "talker_proc").timer(5 * MS, None, uniform(100 * US, 800 * US), &["/topic_a"]).0,
        N::new("listener", "listener_proc").sub("/topic_a", uniform(200 * US, 1500 * US), &[]).0,
    ];
    s.network = network(uniform(100 * US, 2 * MS));
    s
}

/// Timer source, relay and sink chained by direct links across two hosts.
fn pipeline_direct(seed: u64) -> ScenarioConfig {
    let mut s = scenario("pipeline_direct", seed, 800 * MS);
    s.hosts = vec![host("A", 0), host("B", 0)];
    s.processes = vec![single("source_proc", "A"), single("relay_proc", "B"), single("sink_proc", "A")];
    s.nodes = vec![
        N::new("source", "source_proc").timer(100 * MS, None, uniform(MS, 5 * MS), &["/topic_a"]).0,
        N::new("relay", "relay_proc").sub("/topic_a", uniform(5 * MS, 20 * MS), &["/topic_b"]).0,
        N::new("sink", "sink_proc").sub("/topic_b", uniform(MS, 10 * MS), &[]).0,
    ];
    s.network = network(uniform(100 * US, 2 * MS));
    s
}

/// Two 24 ms sources cached by a fusion node whose 8 ms timer publishes the fused result.
fn periodic_async_2to1(seed: u64) -> ScenarioConfig {
    let mut s = scenario("periodic_async_2to1", seed, 400 * MS);
    s.hosts = vec![host("A", 0), host("B", 0)];
    s.processes = vec![single("sensors", "A"), single("fusion_proc", "B")];
    s.nodes = vec![
        N::new("source_a", "sensors").timer(24 * MS, None, uniform(200 * US, MS), &["/input_a"]).0,
        N::new("source_b", "sensors").timer(24 * MS, None, uniform(200 * US, MS), &["/input_b"]).0,
        N::new("fusion", "fusion_proc")
            .sub("/input_a", uniform(100 * US, 500 * US), &[])
            .sub("/input_b", uniform(100 * US, 500 * US), &[])
            .timer(8 * MS, None, uniform(500 * US, 2 * MS), &["/fused"])
            .annotate(LinkType::PeriodicAsync, &["/input_a", "/input_b"], &["/fused"])
            .0,
        N::new("consumer", "fusion_proc").sub("/fused", uniform(100 * US, MS), &[]).0,
    ];
    s.network = network(uniform(100 * US, 2 * MS));
    s
}

/// Sources at 20 ms and 9 ms; the sync node publishes once both caches are filled.
fn partial_sync_2to1(seed: u64) -> ScenarioConfig {
    let mut s = scenario("partial_sync_2to1", seed, 400 * MS);
    s.hosts = vec![host("A", 0), host("B", 0)];
    s.processes = vec![single("sensors", "A"), single("sync_proc", "B")];
    s.nodes = vec![
        N::new("source_a", "sensors").timer(20 * MS, None, uniform(200 * US, MS), &["/input_a"]).0,
        N::new("source_b", "sensors").timer(9 * MS, None, uniform(200 * US, MS), &["/input_b"]).0,
        N::new("sync", "sync_proc")
            .sub("/input_a", uniform(200 * US, MS), &[])
            .sub("/input_b", uniform(200 * US, MS), &[])
            .annotate(LinkType::PartialSync, &["/input_a", "/input_b"], &["/synced"])
            .0,
        N::new("consumer", "sync_proc").sub("/synced", uniform(100 * US, MS), &[]).0,
    ];
    s.network = network(uniform(100 * US, 2 * MS));
    s
}

/// Ten nodes on two hosts: three sensor roots converge through partial-sync and
/// periodic-async fusion onto one actuation leaf.
fn reference_mini(seed: u64) -> ScenarioConfig {
    let mut s = scenario("reference_mini", seed, 1_000 * MS);
    s.hosts = vec![host("A", 0), host("B", 0)];
    s.processes = vec![
        single("sensing", "A"),
        single("perception", "A"),
        single("planning", "B"),
        single("control", "B"),
    ];
    s.nodes = vec![
        N::new("lidar_front", "sensing").timer(50 * MS, None, uniform(MS, 3 * MS), &["/points_front"]).0,
        N::new("lidar_rear", "sensing").timer(50 * MS, None, uniform(MS, 3 * MS), &["/points_rear"]).0,
        N::new("camera", "sensing").timer(100 * MS, None, uniform(2 * MS, 4 * MS), &["/image"]).0,
        N::new("point_fusion", "perception")
            .sub("/points_front", uniform(MS, 2 * MS), &[])
            .sub("/points_rear", uniform(MS, 2 * MS), &[])
            .annotate(LinkType::PartialSync, &["/points_front", "/points_rear"], &["/points_fused"])
            .0,
        N::new("detector", "perception").sub("/image", uniform(8 * MS, 15 * MS), &["/objects"]).0,
        N::new("tracker", "planning").sub("/points_fused", uniform(3 * MS, 6 * MS), &["/obstacles"]).0,
        N::new("object_collision_estimator", "planning")
            .sub("/obstacles", uniform(200 * US, 600 * US), &[])
            .sub("/objects", uniform(200 * US, 600 * US), &[])
            .timer(30 * MS, None, uniform(2 * MS, 5 * MS), &["/collision"])
            .annotate(LinkType::PeriodicAsync, &["/obstacles", "/objects"], &["/collision"])
            .0,
        N::new("planner", "planning").sub("/collision", uniform(3 * MS, 8 * MS), &["/trajectory"]).0,
        N::new("controller", "control").sub("/trajectory", uniform(MS, 2 * MS), &["/vehicle_cmd"]).0,
        N::new("vehicle_interface", "control").sub("/vehicle_cmd", uniform(200 * US, MS), &[]).0,
    ];
    s.network = network(uniform(100 * US, 2 * MS));
    s
}

/// The same graph with a single-threaded and a two-threaded executor. Two filters
/// consume each sensor message; a merger publishes once both have finished.
pub fn multithread_compare(seed: u64) -> (ScenarioConfig, ScenarioConfig) {
    let build = |name: &str, executor: ExecutorConfig| {
        let mut s = scenario(name, seed, 500 * MS);
        s.hosts = vec![host("A", 0)];
        s.processes = vec![single("sensor_proc", "A"), process("pipeline", "A", executor)];
        s.nodes = vec![
            N::new("sensor", "sensor_proc").timer(50 * MS, Some(0), uniform(500 * US, MS), &["/raw"]).0,
            N::new("filter_a", "pipeline").sub("/raw", uniform(18 * MS, 22 * MS), &["/filtered_a"]).0,
            N::new("filter_b", "pipeline").sub("/raw", uniform(18 * MS, 22 * MS), &["/filtered_b"]).0,
            N::new("merger", "pipeline")
                .sub("/filtered_a", uniform(500 * US, MS), &[])
                .sub("/filtered_b", uniform(500 * US, MS), &[])
                .annotate(LinkType::PartialSync, &["/filtered_a", "/filtered_b"], &["/merged"])
                .0,
            N::new("actuator", "pipeline").sub("/merged", uniform(200 * US, 500 * US), &[]).0,
        ];
        s
    };
    (
        build("multithread_compare_single", ExecutorConfig::single()),
        build("multithread_compare_multi", ExecutorConfig::multi(2)),
    )
}

/// A node that both publishes and subscribes `/tf`, plus a downstream consumer.
fn tf_selfloop(seed: u64) -> ScenarioConfig {
    let mut s = scenario("tf_selfloop", seed, 300 * MS);
    s.hosts = vec![host("A", 0)];
    s.processes = vec![single("state_proc", "A"), single("nav_proc", "A")];
    s.nodes = vec![
        N::new("robot_state_publisher", "state_proc")
            .timer(20 * MS, None, uniform(200 * US, 500 * US), &["/tf"])
            .0,
        N::new("tf_relay", "state_proc")
            .timer(25 * MS, None, uniform(200 * US, 500 * US), &["/tf"])
            .sub("/tf", uniform(100 * US, 300 * US), &[])
            .0,
        N::new("localizer", "nav_proc").sub("/tf", uniform(500 * US, MS), &["/pose"]).0,
        N::new("navigator", "nav_proc").sub("/pose", uniform(500 * US, MS), &[]).0,
    ];
    s
}

/// Two processes with identical phase-0 talkers on `/collide` force equal source
/// timestamps; `/other` traffic is unaffected.
fn collision(seed: u64) -> ScenarioConfig {
    let mut s = scenario("collision", seed, 200 * MS);
    s.hosts = vec![host("A", 0), host("B", 0)];
    s.processes = vec![
        single("talker_1", "A"),
        single("talker_2", "A"),
        single("other_proc", "A"),
        single("listener_1", "B"),
        single("listener_2", "B"),
    ];
    let exec = Delay::Constant { ns: 300 * US };
    s.nodes = vec![
        N::new("talker", "talker_1").timer(10 * MS, Some(0), exec, &["/collide"]).0,
        N::new("talker", "talker_2").timer(10 * MS, Some(0), exec, &["/collide"]).0,
        N::new("other_talker", "other_proc").timer(7 * MS, Some(3 * MS), uniform(100 * US, 400 * US), &["/other"]).0,
        N::new("listener", "listener_1")
            .sub("/collide", uniform(100 * US, 300 * US), &[])
            .sub("/other", uniform(100 * US, 300 * US), &[])
            .0,
        N::new("listener", "listener_2")
            .sub("/collide", uniform(100 * US, 300 * US), &[])
            .sub("/other", uniform(100 * US, 300 * US), &[])
            .0,
    ];
    s.network = network(uniform(100 * US, 2 * MS));
    s
}

/// Bidirectional traffic between two hosts; host `B` runs `offset_b` ahead of `A`.
pub fn ping_pong(seed: u64, offset_b: i64, delay: Delay) -> ScenarioConfig {
    let mut s = scenario("ping_pong", seed, 200 * MS);
    s.hosts = vec![host("A", 0), host("B", offset_b)];
    s.processes = vec![single("ping_proc", "A"), single("pong_proc", "B")];
    s.nodes = vec![
        N::new("ping", "ping_proc")
            .timer(10 * MS, None, uniform(100 * US, 300 * US), &["/ping"])
            .sub("/pong", uniform(100 * US, 300 * US), &[])
            .0,
        N::new("pong", "pong_proc").sub("/ping", uniform(100 * US, 300 * US), &["/pong"]).0,
    ];
    s.network = network(delay);
    s
}

/// Many 1 kHz talker/listener pairs on one host, sized to emit about `events` trace events.
pub fn stress(seed: u64, events: u64) -> ScenarioConfig {
    const PAIRS: usize = 20;
    // About 17 events per pair and period; rounding down the rate keeps the total above `events`.
    let per_ms = PAIRS as u64 * 16;
    let duration = events.div_ceil(per_ms).max(1) as i64 * MS + 2 * MS;
    let mut s = scenario("stress", seed, duration);
    s.hosts = vec![host("A", 0)];
    for i in 0..PAIRS {
        let (tp, lp, topic) = (format!("talker_{i}"), format!("listener_{i}"), format!("/stress_{i}"));
        s.processes.push(single(&tp, "A"));
        s.processes.push(single(&lp, "A"));
        s.nodes.push(N::new("talker", &tp).timer(MS, Some(i as i64 * 10 * US), uniform(20 * US, 80 * US), &[&topic]).0);
        s.nodes.push(N::new("listener", &lp).sub(&topic, uniform(20 * US, 80 * US), &[]).0);
    }
    s
}
