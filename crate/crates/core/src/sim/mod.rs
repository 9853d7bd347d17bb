//! Deterministic simulation of distributed publish-subscribe systems.
//!
//! [`simulate`] runs a [`ScenarioConfig`] and returns the per-host traces together with
//! the [`GroundTruth`] the simulator recorded while producing them.

mod config;
mod engine;
mod scenarios;
mod truth;

pub use config::{
    AnnotationConfig, Delay, ExecutorConfig, ExecutorKind, HostConfig, InvalidConfig, LinkDelay, NetworkConfig,
    NodeConfig, ProcessConfig, ScenarioConfig, SubscriptionConfig, TimerConfig, MAX_CLOCK_OFFSET_NS,
    SCENARIO_VERSION,
};
pub use engine::{EPOCH_NS, WORKER_START_NS};
pub use scenarios::{builtin, builtin_names, multithread_compare, ping_pong, stress};
pub use truth::{GroundTruth, TruthCollision, TruthFlow, TruthIndirect, TruthError, TruthLatency, TRUTH_VERSION};

use crate::trace::{write_trace, HostTrace, TraceBundle};
use std::{
    io,
    path::{Path, PathBuf},
};

#[derive(Clone, Debug)]
pub struct SimOutput {
    pub bundle: TraceBundle,
    pub truth: GroundTruth,
    pub warnings: Vec<String>,
}

pub fn simulate(cfg: &ScenarioConfig) -> Result<SimOutput, InvalidConfig> {
    let warnings = cfg.validate()?;
    let run = engine::run(cfg)?;
    let truth = if cfg.duration_ns == 0 {
        truth::GroundTruth::empty(&cfg.name, cfg.seed)
    } else {
        truth::build(&run, &cfg.name, cfg.seed)
    };
    let traces = run
        .hosts
        .iter()
        .zip(run.events)
        .map(|(h, events)| HostTrace { host: h.id.clone(), events })
        .collect();
    let bundle = TraceBundle::new(traces).expect("simulated hosts are distinct");
    Ok(SimOutput { bundle, truth, warnings })
}

/// Writes `<host>.jsonl` per host and `ground_truth.json` into `dir`.
pub fn write_output(out: &SimOutput, dir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for t in out.bundle.traces() {
        let path = dir.join(format!("{}.jsonl", t.host));
        write_trace(&path, &t.events)?;
        written.push(path);
    }
    let path = dir.join("ground_truth.json");
    std::fs::write(&path, out.truth.to_json() + "\n")?;
    written.push(path);
    Ok(written)
}
