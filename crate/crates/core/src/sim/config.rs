use crate::trace::LinkType;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashSet};
use thiserror::Error;

pub const SCENARIO_VERSION: u32 = 1;

/// Largest accepted clock offset magnitude; keeps every local timestamp non-negative.
pub const MAX_CLOCK_OFFSET_NS: i64 = 999_999_999;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid config at {path}: {message}")]
pub struct InvalidConfig {
    pub path: String,
    pub message: String,
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> InvalidConfig {
    InvalidConfig { path: path.into(), message: message.into() }
}

/// A duration distribution in nanoseconds.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Delay {
    Constant { ns: i64 },
    /// Inclusive bounds.
    Uniform { min: i64, max: i64 },
}

impl Delay {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> i64 {
        match *self {
            Delay::Constant { ns } => ns,
            Delay::Uniform { min, max } => rng.gen_range(min..=max),
        }
    }

    pub fn max(&self) -> i64 {
        match *self {
            Delay::Constant { ns } => ns,
            Delay::Uniform { max, .. } => max,
        }
    }

    fn check(&self, path: &str) -> Result<(), InvalidConfig> {
        match *self {
            Delay::Constant { ns } if ns < 0 => Err(invalid(path, "delay must be non-negative")),
            Delay::Uniform { min, max } if min < 0 || max < min => {
                Err(invalid(path, "uniform delay needs 0 <= min <= max"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostConfig {
    pub id: String,
    #[serde(default)]
    pub clock_offset_ns: i64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutorKind {
    Single,
    Multi,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutorConfig {
    pub kind: ExecutorKind,
    #[serde(default = "one")]
    pub threads: u32,
}

fn one() -> u32 {
    1
}

impl ExecutorConfig {
    pub fn single() -> Self {
        ExecutorConfig { kind: ExecutorKind::Single, threads: 1 }
    }

    pub fn multi(threads: u32) -> Self {
        ExecutorConfig { kind: ExecutorKind::Multi, threads }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessConfig {
    pub name: String,
    pub host: String,
    pub executor: ExecutorConfig,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimerConfig {
    pub period_ns: i64,
    /// Offset of the timer's start from the scenario start; random in `[0, period)` if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_ns: Option<i64>,
    pub exec: Delay,
    #[serde(default)]
    pub publish: Vec<String>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubscriptionConfig {
    pub topic: String,
    pub exec: Delay,
    /// Topics published on every callback.
    #[serde(default)]
    pub publish: Vec<String>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationConfig {
    pub link_type: LinkType,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub name: String,
    #[serde(default = "root_namespace")]
    pub namespace: String,
    pub process: String,
    #[serde(default)]
    pub publishers: Vec<String>,
    #[serde(default)]
    pub timers: Vec<TimerConfig>,
    #[serde(default)]
    pub subscriptions: Vec<SubscriptionConfig>,
    #[serde(default)]
    pub annotations: Vec<AnnotationConfig>,
}

fn root_namespace() -> String {
    "/".into()
}

impl NodeConfig {
    pub fn new(name: &str, process: &str) -> Self {
        NodeConfig {
            name: name.into(),
            namespace: root_namespace(),
            process: process.into(),
            publishers: Vec::new(),
            timers: Vec::new(),
            subscriptions: Vec::new(),
            annotations: Vec::new(),
        }
    }

    pub fn full_name(&self) -> String {
        if self.namespace.ends_with('/') {
            format!("{}{}", self.namespace, self.name)
        } else {
            format!("{}/{}", self.namespace, self.name)
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDelay {
    pub from: String,
    pub to: String,
    pub delay: Delay,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Between distinct hosts unless overridden per pair.
    pub default: Delay,
    /// Within one host.
    pub local: Delay,
    #[serde(default)]
    pub links: Vec<LinkDelay>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            default: Delay::Constant { ns: 200_000 },
            local: Delay::Constant { ns: 20_000 },
            links: Vec::new(),
        }
    }
}

impl NetworkConfig {
    pub fn delay(&self, from: &str, to: &str) -> Delay {
        if from == to {
            return self.local;
        }
        self.links
            .iter()
            .find(|l| l.from == from && l.to == to)
            .map_or(self.default, |l| l.delay)
    }
}

fn default_overhead() -> Delay {
    Delay::Constant { ns: 5_000 }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub duration_ns: i64,
    pub hosts: Vec<HostConfig>,
    pub processes: Vec<ProcessConfig>,
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub network: NetworkConfig,
    /// Executor selection time between wake-up and execution.
    #[serde(default = "default_overhead")]
    pub executor_overhead: Delay,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, InvalidConfig> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| invalid("$", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks structural validity. Returns warnings for suspicious but legal configs.
    pub fn validate(&self) -> Result<Vec<String>, InvalidConfig> {
        if self.version != SCENARIO_VERSION {
            return Err(invalid("version", format!("unsupported version {}", self.version)));
        }
        if self.duration_ns < 0 {
            return Err(invalid("duration_ns", "must be non-negative"));
        }
        if self.hosts.is_empty() {
            return Err(invalid("hosts", "at least one host required"));
        }
        let mut hosts = HashSet::new();
        for (i, h) in self.hosts.iter().enumerate() {
            if h.id.is_empty() || h.id.contains('/') {
                return Err(invalid(format!("hosts[{i}].id"), "must be non-empty and free of '/'"));
            }
            if !hosts.insert(h.id.as_str()) {
                return Err(invalid(format!("hosts[{i}].id"), format!("duplicate host {}", h.id)));
            }
            if h.clock_offset_ns.abs() > MAX_CLOCK_OFFSET_NS {
                return Err(invalid(format!("hosts[{i}].clock_offset_ns"), "magnitude must stay below 1 s"));
            }
        }
        let mut procs = HashSet::new();
        for (i, p) in self.processes.iter().enumerate() {
            if !procs.insert(p.name.as_str()) {
                return Err(invalid(format!("processes[{i}].name"), format!("duplicate process {}", p.name)));
            }
            if !hosts.contains(p.host.as_str()) {
                return Err(invalid(format!("processes[{i}].host"), format!("unknown host {}", p.host)));
            }
            match p.executor.kind {
                ExecutorKind::Single if p.executor.threads != 1 => {
                    return Err(invalid(format!("processes[{i}].executor.threads"), "single executor has one thread"))
                }
                ExecutorKind::Multi if p.executor.threads < 2 => {
                    return Err(invalid(format!("processes[{i}].executor.threads"), "multi executor needs at least 2 threads"))
                }
                _ => {}
            }
        }
        let mut node_names = HashSet::new();
        let mut published = BTreeSet::new();
        let mut subscribed = BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let path = |s: &str| format!("nodes[{i}].{s}");
            if !procs.contains(n.process.as_str()) {
                return Err(invalid(path("process"), format!("unknown process {}", n.process)));
            }
            if n.name.is_empty() || !n.namespace.starts_with('/') {
                return Err(invalid(path("name"), "name must be non-empty and namespace absolute"));
            }
            if !node_names.insert((n.process.as_str(), n.full_name())) {
                return Err(invalid(path("name"), format!("duplicate node {} in process {}", n.full_name(), n.process)));
            }
            let pubs: HashSet<&str> = n.publishers.iter().map(String::as_str).collect();
            if pubs.len() != n.publishers.len() {
                return Err(invalid(path("publishers"), "duplicate publisher topic"));
            }
            published.extend(n.publishers.iter().cloned());
            for (j, t) in n.timers.iter().enumerate() {
                let tp = format!("nodes[{i}].timers[{j}]");
                if t.period_ns <= 0 {
                    return Err(invalid(format!("{tp}.period_ns"), "must be positive"));
                }
                if t.phase_ns.is_some_and(|p| p < 0 || p >= t.period_ns) {
                    return Err(invalid(format!("{tp}.phase_ns"), "must lie in [0, period)"));
                }
                t.exec.check(&format!("{tp}.exec"))?;
                for topic in &t.publish {
                    if !pubs.contains(topic.as_str()) {
                        return Err(invalid(format!("{tp}.publish"), format!("node has no publisher on {topic}")));
                    }
                }
            }
            let subs: HashSet<&str> = n.subscriptions.iter().map(|s| s.topic.as_str()).collect();
            if subs.len() != n.subscriptions.len() {
                return Err(invalid(path("subscriptions"), "duplicate subscription topic"));
            }
            for (j, s) in n.subscriptions.iter().enumerate() {
                let sp = format!("nodes[{i}].subscriptions[{j}]");
                s.exec.check(&format!("{sp}.exec"))?;
                subscribed.insert(s.topic.clone());
                for topic in &s.publish {
                    if !pubs.contains(topic.as_str()) {
                        return Err(invalid(format!("{sp}.publish"), format!("node has no publisher on {topic}")));
                    }
                }
            }
            for (j, a) in n.annotations.iter().enumerate() {
                let ap = format!("nodes[{i}].annotations[{j}]");
                if a.inputs.is_empty() || a.outputs.is_empty() {
                    return Err(invalid(&ap, "inputs and outputs must be non-empty"));
                }
                for t in &a.inputs {
                    if !subs.contains(t.as_str()) {
                        return Err(invalid(format!("{ap}.inputs"), format!("node does not subscribe to {t}")));
                    }
                }
                for t in &a.outputs {
                    if !pubs.contains(t.as_str()) {
                        return Err(invalid(format!("{ap}.outputs"), format!("node has no publisher on {t}")));
                    }
                    let by_sub = n.subscriptions.iter().any(|s| s.publish.contains(t));
                    let by_timer = n.timers.iter().any(|s| s.publish.contains(t));
                    match a.link_type {
                        LinkType::PeriodicAsync if by_sub => {
                            return Err(invalid(format!("{ap}.outputs"), format!("periodic_async output {t} must only be published by timers")))
                        }
                        LinkType::PartialSync if by_sub || by_timer => {
                            return Err(invalid(
                                format!("{ap}.outputs"),
                                format!("partial_sync output {t} is published by the annotation only"),
                            ))
                        }
                        _ => {}
                    }
                }
            }
        }
        self.executor_overhead.check("executor_overhead")?;
        self.network.default.check("network.default")?;
        self.network.local.check("network.local")?;
        for (i, l) in self.network.links.iter().enumerate() {
            if !hosts.contains(l.from.as_str()) || !hosts.contains(l.to.as_str()) {
                return Err(invalid(format!("network.links[{i}]"), "unknown host"));
            }
            l.delay.check(&format!("network.links[{i}].delay"))?;
        }
        Ok(subscribed
            .difference(&published)
            .map(|t| format!("topic {t} is subscribed but never published"))
            .collect())
    }
}
