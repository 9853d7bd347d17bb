use super::{
    graph::{FlowGraph, IntegrityError},
    kinds::FlowEdgeKind,
};
use serde::Serialize;
use std::fmt::Write;

#[derive(Clone, Copy, PartialEq, Debug)]
pub enum FlowFormat {
    Dot,
    Json,
    SvgTimeline { px_per_ms: f64, lane_height: u32 },
}

impl FlowFormat {
    pub fn parse(s: &str, px_per_ms: f64, lane_height: u32) -> Result<Self, String> {
        match s {
            "dot" => Ok(FlowFormat::Dot),
            "json" => Ok(FlowFormat::Json),
            "svg-timeline" => Ok(FlowFormat::SvgTimeline { px_per_ms, lane_height }),
            _ => Err(format!("unknown flow format `{s}` (dot, json, svg-timeline)")),
        }
    }
}

pub fn kind_color(kind: FlowEdgeKind) -> &'static str {
    match kind {
        FlowEdgeKind::TimerCallback => "#1f77b4",
        FlowEdgeKind::SubscriptionCallback => "#2ca02c",
        FlowEdgeKind::MessagePublication => "#9467bd",
        FlowEdgeKind::TransportLink => "#7f7f7f",
        FlowEdgeKind::PeriodicAsyncLink => "#ff7f0e",
        FlowEdgeKind::PartialSyncLink => "#d62728",
        FlowEdgeKind::Take => "#17becf",
    }
}

fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[derive(Serialize)]
struct FlowJson<'a> {
    #[serde(flatten)]
    graph: &'a FlowGraph,
    latencies: Vec<super::LatencyRow>,
}

/// Renders a graph after checking its integrity; malformed graphs are refused.
pub fn export_flow(graph: &FlowGraph, format: FlowFormat) -> Result<String, IntegrityError> {
    graph.check_integrity()?;
    Ok(match format {
        FlowFormat::Dot => to_dot(graph),
        FlowFormat::Json => {
            let doc = FlowJson { graph, latencies: graph.latencies()? };
            serde_json::to_string_pretty(&doc).expect("flow serializes") + "\n"
        }
        FlowFormat::SvgTimeline { px_per_ms, lane_height } => to_svg(graph, px_per_ms, lane_height),
    })
}

fn to_dot(g: &FlowGraph) -> String {
    let mut out = String::from("digraph flow {\n  rankdir=LR;\n  node [shape=point];\n");
    for v in 0..g.vertex_count {
        let _ = writeln!(out, "  v{v};");
    }
    for e in &g.edges {
        let _ = writeln!(
            out,
            "  v{} -> v{} [kind=\"{}\", color=\"{}\", label=\"{}\", subject=\"{}\", start_ns=\"{}\", weight_ns=\"{}\"];",
            e.from_vertex,
            e.to_vertex,
            e.kind.as_str(),
            kind_color(e.kind),
            escape_dot(&e.label),
            escape_dot(&e.subject),
            e.start_ts,
            e.weight
        );
    }
    out.push_str("}\n");
    out
}

fn to_svg(g: &FlowGraph, px_per_ms: f64, lane_height: u32) -> String {
    const LABEL_WIDTH: f64 = 220.0;
    let mut lanes: Vec<&str> = Vec::new();
    for e in &g.edges {
        if !lanes.contains(&e.lane.as_str()) {
            lanes.push(&e.lane);
        }
    }
    let t0 = g.edges.iter().map(|e| e.start_ts).min().unwrap_or(0);
    let t1 = g.edges.iter().map(|e| e.end_ts).max().unwrap_or(0);
    let x = |t: i64| LABEL_WIDTH + (t - t0) as f64 * px_per_ms / 1e6;
    let h = lane_height as f64;
    let width = x(t1) + 10.0;
    let height = h * lanes.len() as f64 + 4.0;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.1}\" height=\"{height:.1}\" font-size=\"{:.1}\">\n",
        (h * 0.8).max(6.0)
    );
    for (i, lane) in lanes.iter().enumerate() {
        let _ = writeln!(
            out,
            "  <text x=\"2\" y=\"{:.1}\">{}</text>",
            h * (i as f64 + 0.8),
            escape_xml(lane)
        );
    }
    out.push_str("  <g class=\"edges\">\n");
    for e in &g.edges {
        let lane = lanes.iter().position(|l| *l == e.lane).expect("lane listed");
        let _ = writeln!(
            out,
            "    <rect class=\"{}\" x=\"{:.3}\" y=\"{:.1}\" width=\"{:.3}\" height=\"{:.1}\" fill=\"{}\"><title>{} [{} ns]</title></rect>",
            e.kind.as_str(),
            x(e.start_ts),
            h * lane as f64 + 1.0,
            (x(e.end_ts) - x(e.start_ts)).max(0.5),
            h - 2.0,
            kind_color(e.kind),
            escape_xml(&e.label),
            e.weight
        );
    }
    out.push_str("  </g>\n</svg>\n");
    out
}
