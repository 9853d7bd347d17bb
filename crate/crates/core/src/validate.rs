//! Diffs an analysis document against simulator ground truth.

use crate::{
    analysis::AnalysisDocument,
    flow::FlowContext,
    identity::link_id,
    sim::{GroundTruth, TruthFlow, TruthIndirect, TRUTH_VERSION},
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValidateError {
    #[error("unsupported ground truth version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
}

#[derive(Clone, Copy, Debug)]
pub struct ValidateOptions {
    pub latency_tolerance_ns: i64,
    pub check_flows: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions { latency_tolerance_ns: 0, check_flows: true }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct SetDiff {
    pub expected: usize,
    pub found: usize,
    pub missing: Vec<String>,
    pub spurious: Vec<String>,
}

impl SetDiff {
    pub fn of(expected: &[String], found: &[String]) -> Self {
        fn count(v: &[String]) -> BTreeMap<&str, i64> {
            let mut m: BTreeMap<&str, i64> = BTreeMap::new();
            for s in v {
                *m.entry(s.as_str()).or_default() += 1;
            }
            m
        }
        let (e, f) = (count(expected), count(found));
        let keys: BTreeSet<&str> = e.keys().chain(f.keys()).copied().collect();
        let mut missing = Vec::new();
        let mut spurious = Vec::new();
        for k in keys {
            let d = e.get(k).copied().unwrap_or(0) - f.get(k).copied().unwrap_or(0);
            for _ in 0..d.max(0) {
                missing.push(k.to_string());
            }
            for _ in 0..(-d).max(0) {
                spurious.push(k.to_string());
            }
        }
        SetDiff { expected: expected.len(), found: found.len(), missing, spurious }
    }

    pub fn is_empty(&self) -> bool {
        self.missing.is_empty() && self.spurious.is_empty()
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LatencyMismatch {
    pub leaf: String,
    pub expected_ns: Option<i64>,
    pub found_ns: Option<i64>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FlowDiff {
    pub seed: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub edges: SetDiff,
    pub latencies: Vec<LatencyMismatch>,
}

impl FlowDiff {
    pub fn is_empty(&self) -> bool {
        self.error.is_none() && self.edges.is_empty() && self.latencies.is_empty()
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ClockError {
    pub host: String,
    pub true_offset_ns: i64,
    pub estimated_offset_ns: i64,
    pub error_ns: i64,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub report_version: u32,
    pub ok: bool,
    pub transport: SetDiff,
    pub direct: SetDiff,
    pub indirect: SetDiff,
    pub flows: Vec<FlowDiff>,
    pub clock: Vec<ClockError>,
    pub max_clock_error_ns: i64,
    pub max_one_way_delay_ns: i64,
}

impl ValidationReport {
    pub fn links_ok(&self) -> bool {
        self.transport.is_empty() && self.direct.is_empty() && self.indirect.is_empty()
    }

    /// One line per family plus one per differing flow.
    pub fn summary(&self) -> String {
        let fam = |name: &str, d: &SetDiff| {
            format!("{name}: expected {} found {} missing {} spurious {}\n", d.expected, d.found, d.missing.len(), d.spurious.len())
        };
        let mut s = fam("transport", &self.transport) + &fam("direct", &self.direct) + &fam("indirect", &self.indirect);
        let bad = self.flows.iter().filter(|f| !f.is_empty()).count();
        s += &format!("flows: {} checked, {bad} differing\n", self.flows.len());
        for f in self.flows.iter().filter(|f| !f.is_empty()) {
            s += &format!(
                "  {}: missing {} spurious {} latency mismatches {}{}\n",
                f.seed,
                f.edges.missing.len(),
                f.edges.spurious.len(),
                f.latencies.len(),
                f.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
            );
        }
        s += &format!("clock: max error {} ns (max one-way delay {} ns)\n", self.max_clock_error_ns, self.max_one_way_delay_ns);
        s
    }
}

/// Canonical string for an indirect link: `type:in1,in2->out`.
pub fn indirect_key(link_type: &str, inputs: &[String], output: &str) -> String {
    format!("{link_type}:{}", link_id(&inputs.join(","), output))
}

fn truth_indirect_key(t: &TruthIndirect) -> String {
    indirect_key(t.link_type.as_str(), &t.inputs, &t.output)
}

/// Link identities found by the analysis, in ground-truth form.
pub fn document_links(doc: &AnalysisDocument) -> (Vec<String>, Vec<String>, Vec<String>) {
    let index = doc.index();
    let ids = doc.identities(&index);
    let mut transport = Vec::new();
    for t in &doc.links.transport {
        for d in &t.destinations {
            transport.push(link_id(&ids.publications[t.source.idx()], &ids.callbacks[d.idx()]));
        }
    }
    let mut direct = Vec::new();
    for l in &doc.links.direct {
        for o in &l.outputs {
            direct.push(link_id(&ids.callbacks[l.input.idx()], &ids.publications[o.idx()]));
        }
    }
    let indirect = doc
        .links
        .indirect
        .iter()
        .map(|l| {
            let inputs: Vec<String> = l.inputs.iter().map(|c| ids.callbacks[c.idx()].clone()).collect();
            indirect_key(l.link_type.as_str(), &inputs, &ids.publications[l.output.idx()])
        })
        .collect();
    (transport, direct, indirect)
}

fn diff_flow(ctx: &FlowContext, flow: &TruthFlow, tolerance: i64) -> FlowDiff {
    let seed = flow.seed.to_string();
    let graph = match ctx.build(&flow.seed, flow.direction) {
        Ok(g) => g,
        Err(e) => {
            return FlowDiff {
                seed,
                error: Some(e.to_string()),
                edges: SetDiff::of(&flow.edges, &[]),
                latencies: Vec::new(),
            }
        }
    };
    let edges = SetDiff::of(&flow.edges, &graph.edge_keys());
    let rows = match graph.latencies() {
        Ok(r) => r,
        Err(e) => return FlowDiff { seed, error: Some(e.to_string()), edges, latencies: Vec::new() },
    };
    let found: BTreeMap<&str, i64> = rows.iter().map(|r| (r.leaf.as_str(), r.latency_ns)).collect();
    let expected: BTreeMap<&str, i64> = flow.latencies.iter().map(|l| (l.leaf.as_str(), l.latency_ns)).collect();
    let leaves: BTreeSet<&str> = found.keys().chain(expected.keys()).copied().collect();
    let latencies = leaves
        .into_iter()
        .filter_map(|leaf| {
            let (e, f) = (expected.get(leaf).copied(), found.get(leaf).copied());
            let ok = matches!((e, f), (Some(a), Some(b)) if (a - b).abs() <= tolerance);
            (!ok).then(|| LatencyMismatch { leaf: leaf.to_string(), expected_ns: e, found_ns: f })
        })
        .collect();
    FlowDiff { seed, error: None, edges, latencies }
}

pub fn validate(doc: &AnalysisDocument, truth: &GroundTruth, opts: &ValidateOptions) -> Result<ValidationReport, ValidateError> {
    if truth.truth_version != TRUTH_VERSION {
        return Err(ValidateError::Version { found: truth.truth_version, expected: TRUTH_VERSION });
    }
    let (transport, direct, indirect) = document_links(doc);
    let truth_indirect: Vec<String> = truth.indirect.iter().map(truth_indirect_key).collect();
    let transport = SetDiff::of(&truth.transport, &transport);
    let direct = SetDiff::of(&truth.direct, &direct);
    let indirect = SetDiff::of(&truth_indirect, &indirect);

    let flows: Vec<FlowDiff> = if opts.check_flows && !truth.flows.is_empty() {
        let ctx = FlowContext::new(doc);
        truth.flows.iter().map(|f| diff_flow(&ctx, f, opts.latency_tolerance_ns)).collect()
    } else {
        Vec::new()
    };

    let clock: Vec<ClockError> = doc
        .clock
        .iter()
        .filter_map(|m| {
            let true_offset = *truth.true_offsets.get(m.host.as_str())?;
            Some(ClockError {
                host: m.host.to_string(),
                true_offset_ns: true_offset,
                estimated_offset_ns: m.offset,
                error_ns: (m.offset - true_offset).abs(),
            })
        })
        .collect();
    let max_clock_error_ns = clock.iter().map(|c| c.error_ns).max().unwrap_or(0);
    let ok = transport.is_empty() && direct.is_empty() && indirect.is_empty() && flows.iter().all(FlowDiff::is_empty);
    Ok(ValidationReport {
        report_version: REPORT_VERSION,
        ok,
        transport,
        direct,
        indirect,
        flows,
        clock,
        max_clock_error_ns,
        max_one_way_delay_ns: truth.max_one_way_delay_ns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn multiset_diff() {
        let d = SetDiff::of(&v(&["a", "b", "b"]), &v(&["b", "c"]));
        assert_eq!(d.missing, v(&["a", "b"]));
        assert_eq!(d.spurious, v(&["c"]));
        assert!(SetDiff::of(&v(&["x"]), &v(&["x"])).is_empty());
    }
}
