mod common;

use common::{analyze_synced, builder::{pipeline, TraceBuilder}, run};
use msgflow::{
    flow::{build_flow, export_flow, Direction, FlowEdgeKind, FlowFormat, FlowGraph, IntegrityError, SeedSelector},
    sim::{builtin, builtin_names},
    AnalysisDocument,
};
use proptest::prelude::*;
use std::collections::BTreeSet;

const MS: i64 = 1_000_000;

fn cb(owner: &str, index: u32) -> SeedSelector {
    SeedSelector::Callback { owner: owner.into(), index }
}

fn kinds(g: &FlowGraph) -> Vec<FlowEdgeKind> {
    let order = g.topological_order().unwrap();
    order.into_iter().map(|i| g.edges[i].kind).collect()
}

fn pipeline_doc() -> AnalysisDocument {
    analyze_synced(&pipeline().bundle())
}

#[test]
fn pipeline_chain_from_first_timer_callback() {
    use FlowEdgeKind::*;
    let g = build_flow(&pipeline_doc(), &cb("/source/timer/0", 0), Direction::Both).unwrap();
    assert_eq!(
        kinds(&g),
        vec![
            TimerCallback,
            MessagePublication,
            TransportLink,
            Take,
            SubscriptionCallback,
            MessagePublication,
            TransportLink,
            Take,
            SubscriptionCallback
        ]
    );
    assert_eq!((g.roots.len(), g.leaves.len()), (1, 1));
}

#[test]
fn pipeline_chain_discovered_backward_from_last_callback() {
    let doc = pipeline_doc();
    let fwd = build_flow(&doc, &cb("/source/timer/0", 0), Direction::Both).unwrap();
    let back = build_flow(&doc, &cb("/sink/topic_b", 0), Direction::Both).unwrap();
    assert_eq!(back.edge_keys(), fwd.edge_keys());
    let only_back = build_flow(&doc, &cb("/sink/topic_b", 0), Direction::Backward).unwrap();
    assert_eq!(only_back.edge_keys(), fwd.edge_keys());
}

#[test]
fn pipeline_latency_is_leaf_end_minus_root_start() {
    let g = build_flow(&pipeline_doc(), &cb("/source/timer/0", 0), Direction::Both).unwrap();
    let rows = g.latencies().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].latency_ns, 30 * MS);
    assert_eq!(rows[0].path_sum(), rows[0].latency_ns);
    assert_eq!(rows[0].path.len(), 9);
}

#[test]
fn long_chain_latency() {
    let mut b = TraceBuilder::new();
    let n1 = b.node("A", 10, "src");
    let n2 = b.node("A", 20, "dst");
    let p = b.publisher("A", 10, n1, "/x");
    let s = b.subscription("A", 20, n2, "/x");
    let t = b.timer("A", 10, n1, 500 * MS);
    b.timer_callback("A", t, 0, MS);
    let src = b.publish("A", 10, MS / 2, p);
    b.receive("A", s, 200 * MS, src, 260 * MS);
    let g = build_flow(&analyze_synced(&b.bundle()), &cb("/src/timer/0", 0), Direction::Forward).unwrap();
    assert_eq!(g.latencies().unwrap()[0].latency_ns, 260 * MS);
}

#[test]
fn unreceived_publication_is_a_single_edge() {
    let mut b = TraceBuilder::new();
    let n = b.node("A", 10, "lonely");
    let p = b.publisher("A", 10, n, "/nobody");
    let src = b.publish("A", 10, 1_000, p);
    let doc = analyze_synced(&b.bundle());
    let seed = SeedSelector::Publication { topic: "/nobody".into(), source_timestamp: src };
    let g = build_flow(&doc, &seed, Direction::Both).unwrap();
    assert_eq!(g.edges.len(), 1);
    assert_eq!(g.edges[0].kind, FlowEdgeKind::MessagePublication);
    let dot = export_flow(&g, FlowFormat::Dot).unwrap();
    let parsed = parse_dot(&dot).unwrap();
    assert_eq!((parsed.vertices.len(), parsed.edges.len()), (2, 1));
}

/// Robot publishes /tf; relay republishes /tf inside its own /tf callback; localizer
/// turns /tf into /pose; a looper node talks to itself on /loop.
fn tf_doc() -> AnalysisDocument {
    let mut b = TraceBuilder::new();
    let robot = b.node("A", 10, "robot");
    let relay = b.node("A", 20, "relay");
    let loc = b.node("A", 30, "localizer");
    let looper = b.node("A", 40, "looper");
    let p_robot = b.publisher("A", 10, robot, "/tf");
    let s_relay = b.subscription("A", 20, relay, "/tf");
    let p_relay = b.publisher("A", 20, relay, "/tf");
    let s_loc = b.subscription("A", 30, loc, "/tf");
    let p_pose = b.publisher("A", 30, loc, "/pose");
    let p_loop = b.publisher("A", 40, looper, "/loop");
    let s_loop = b.subscription("A", 40, looper, "/loop");
    let t = b.timer("A", 10, robot, 100 * MS);
    let tl = b.timer("A", 40, looper, 100 * MS);

    b.timer_callback("A", t, 0, MS);
    let m1 = b.publish("A", 10, MS / 2, p_robot);
    b.receive("A", s_relay, 2 * MS, m1, 4 * MS);
    let m2 = b.publish("A", 20, 3 * MS, p_relay);
    b.receive("A", s_loc, 5 * MS, m1, 6 * MS);
    b.receive("A", s_relay, 7 * MS, m2, 8 * MS);
    b.receive("A", s_loc, 9 * MS, m2, 11 * MS);
    b.publish("A", 30, 10 * MS, p_pose);

    b.timer_callback("A", tl, 20 * MS, 21 * MS);
    let l = b.publish("A", 40, 20 * MS + 500, p_loop);
    b.receive("A", s_loop, 22 * MS, l, 23 * MS);
    analyze_synced(&b.bundle())
}

#[test]
fn tf_self_reception_is_pruned_and_tf_callbacks_end_branches() {
    let doc = tf_doc();
    let g = build_flow(&doc, &cb("/robot/timer/0", 0), Direction::Forward).unwrap();
    g.check_integrity().unwrap();
    let callbacks: Vec<&str> = g
        .edges
        .iter()
        .filter(|e| e.kind == FlowEdgeKind::SubscriptionCallback)
        .map(|e| e.label.as_str())
        .collect();
    // The robot's message reaches relay and localizer; nothing continues past either /tf callback.
    assert_eq!(callbacks.len(), 2, "{callbacks:?}");
    assert_eq!(g.edges.iter().filter(|e| e.kind == FlowEdgeKind::MessagePublication).count(), 1);

    // Seeded on the relay's own /tf output: its reception by the relay itself is pruned.
    let relay_pub = doc
        .ir
        .publications
        .iter()
        .find(|p| doc.ir.publishers[p.publisher.idx()].key.pid == 20)
        .unwrap();
    let seed = SeedSelector::Publication { topic: "/tf".into(), source_timestamp: relay_pub.source_timestamp };
    let g = build_flow(&doc, &seed, Direction::Forward).unwrap();
    let transports = g.edges.iter().filter(|e| e.kind == FlowEdgeKind::TransportLink).count();
    assert_eq!(transports, 1, "only the localizer reception remains");
    assert!(!g.notes.is_empty(), "pruning is reported");
}

#[test]
fn same_node_reception_outside_tf_is_kept() {
    let doc = tf_doc();
    let g = build_flow(&doc, &cb("/looper/timer/0", 0), Direction::Forward).unwrap();
    assert!(g.edges.iter().any(|e| e.kind == FlowEdgeKind::TransportLink));
    assert!(g.edges.iter().any(|e| e.kind == FlowEdgeKind::SubscriptionCallback));
}

#[test]
fn ambiguous_and_missing_seeds_list_candidates() {
    let doc = pipeline_doc();
    let err = build_flow(&doc, &cb("/sourc/timer/0", 0), Direction::Both).unwrap_err();
    assert!(err.candidates().iter().any(|c| c == "/source/timer/0"), "{err}");
    let err = build_flow(&doc, &cb("/source/timer/0", 5), Direction::Both).unwrap_err();
    assert!(err.to_string().contains("not found"));
}

#[test]
fn callback_at_resolves_by_time() {
    let doc = pipeline_doc();
    let seed = SeedSelector::CallbackAt { owner: "/relay/topic_a".into(), ts: 10 * MS };
    let g = build_flow(&doc, &seed, Direction::Both).unwrap();
    assert_eq!(g.edges.len(), 9);
    let seed = SeedSelector::CallbackAt { owner: "/relay/topic_a".into(), ts: 50 * MS };
    assert!(build_flow(&doc, &seed, Direction::Both).is_err());
}

#[test]
fn export_refuses_grammar_violations_and_cycles() {
    let g = build_flow(&pipeline_doc(), &cb("/source/timer/0", 0), Direction::Both).unwrap();
    let mut bad = g.clone();
    let pub_edge = bad.edges.iter().position(|e| e.kind == FlowEdgeKind::MessagePublication).unwrap();
    bad.edges[pub_edge].kind = FlowEdgeKind::Take;
    assert!(matches!(export_flow(&bad, FlowFormat::Dot), Err(IntegrityError::Grammar { .. })));

    let mut cyclic = g.clone();
    let (first, last) = (cyclic.roots[0], cyclic.leaves[0]);
    cyclic.adjacency.push((last, first));
    assert!(export_flow(&cyclic, FlowFormat::Json).is_err());
    assert!(export_flow(&g, FlowFormat::Json).is_ok());
}

#[test]
fn pipeline_dot_has_nine_edges_and_parses_back() {
    let g = build_flow(&pipeline_doc(), &cb("/source/timer/0", 0), Direction::Both).unwrap();
    let dot = export_flow(&g, FlowFormat::Dot).unwrap();
    let parsed = parse_dot(&dot).unwrap();
    assert_eq!(parsed.edges.len(), 9);
    assert_eq!(parsed.vertices.len(), 10);
    for (i, (from, to, attrs)) in parsed.edges.iter().enumerate() {
        assert!(parsed.vertices.contains(from) && parsed.vertices.contains(to));
        assert_eq!(attrs.iter().find(|(k, _)| k == "kind").unwrap().1, g.edges[i].kind.as_str());
    }
}

#[test]
fn json_and_svg_exports() {
    let g = build_flow(&pipeline_doc(), &cb("/source/timer/0", 0), Direction::Both).unwrap();
    let json: serde_json::Value = serde_json::from_str(&export_flow(&g, FlowFormat::Json).unwrap()).unwrap();
    assert_eq!(json["flow_version"], 1);
    assert_eq!(json["edges"].as_array().unwrap().len(), 9);
    assert_eq!(json["seed"]["form"], "callback");
    assert_eq!(json["latencies"][0]["latency_ns"], 30 * MS);
    let svg = export_flow(&g, FlowFormat::SvgTimeline { px_per_ms: 10.0, lane_height: 12 }).unwrap();
    assert_eq!(svg.matches("<rect").count(), 9);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

type Attrs = Vec<(String, String)>;

struct Dot {
    vertices: BTreeSet<String>,
    edges: Vec<(String, String, Attrs)>,
}

/// Parser for the DOT subset emitted by the exporter: node statements, edge
/// statements with quoted attributes, and graph-level defaults.
fn parse_dot(text: &str) -> Result<Dot, String> {
    let body = text
        .trim()
        .strip_prefix("digraph flow {")
        .and_then(|s| s.strip_suffix('}'))
        .ok_or("not a digraph")?;
    let mut dot = Dot { vertices: BTreeSet::new(), edges: Vec::new() };
    for stmt in split_statements(body)? {
        let stmt = stmt.trim();
        if stmt.is_empty() || stmt.starts_with("rankdir=") || stmt.starts_with("node ") {
            continue;
        }
        if let Some((lhs, rest)) = stmt.split_once(" -> ") {
            let (rhs, attrs) = rest.split_once(' ').ok_or("edge without attributes")?;
            let attrs = attrs.trim().strip_prefix('[').and_then(|a| a.strip_suffix(']')).ok_or("bad attribute list")?;
            dot.edges.push((lhs.to_string(), rhs.to_string(), parse_attrs(attrs)?));
        } else if stmt.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            dot.vertices.insert(stmt.to_string());
        } else {
            return Err(format!("unexpected statement `{stmt}`"));
        }
    }
    Ok(dot)
}

fn split_statements(body: &str) -> Result<Vec<String>, String> {
    let (mut out, mut cur, mut quoted, mut escaped) = (Vec::new(), String::new(), false, false);
    for c in body.chars() {
        match c {
            _ if escaped => escaped = false,
            '\\' if quoted => escaped = true,
            '"' => quoted = !quoted,
            ';' if !quoted => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if quoted || !cur.trim().is_empty() {
        return Err("unterminated statement".into());
    }
    Ok(out)
}

fn parse_attrs(s: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    let mut rest = s.trim();
    while !rest.is_empty() {
        let (key, after) = rest.split_once("=\"").ok_or("attribute without quoted value")?;
        let mut value = String::new();
        let mut chars = after.char_indices();
        let end = loop {
            match chars.next() {
                Some((_, '\\')) => value.push(chars.next().ok_or("dangling escape")?.1),
                Some((i, '"')) => break i,
                Some((_, c)) => value.push(c),
                None => return Err("unterminated value".into()),
            }
        };
        out.push((key.trim().to_string(), value));
        rest = after[end + 1..].trim_start().trim_start_matches(',').trim_start();
    }
    Ok(out)
}

fn check_graph(doc: &AnalysisDocument, seed: &SeedSelector, dir: Direction) -> FlowGraph {
    let g = build_flow(doc, seed, dir).unwrap();
    g.check_integrity().unwrap();
    for (a, b) in &g.adjacency {
        assert!(g.edges[*a].kind.may_precede(g.edges[*b].kind));
    }
    for r in g.latencies().unwrap() {
        assert_eq!(r.path_sum(), r.latency_ns, "{seed}: {}", r.leaf);
        let leaf = g.edges.iter().find(|e| e.key() == r.leaf).unwrap();
        assert_eq!(leaf.end_ts, r.leaf_end);
    }
    g
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn graphs_are_acyclic_grammatical_and_consistent(seed in 0u64..10_000, which in 0usize..10) {
        let name = builtin_names()[which];
        let (out, doc) = run(&builtin(name, seed).unwrap());
        for f in &out.truth.flows {
            for dir in [Direction::Forward, Direction::Backward, Direction::Both] {
                check_graph(&doc, &f.seed, dir);
            }
        }
    }

    #[test]
    fn forward_and_backward_graphs_share_the_root_to_leaf_path(seed in 0u64..10_000) {
        let (_, doc) = run(&builtin("pipeline_direct", seed).unwrap());
        let fwd = check_graph(&doc, &cb("/source/timer/0", 1), Direction::Forward);
        prop_assert_eq!(fwd.roots.len(), 1);
        let leaf = &fwd.edges[fwd.leaves[0]];
        let seed_back = SeedSelector::CallbackAt { owner: "/sink/topic_b".into(), ts: leaf.start_ts };
        let back = check_graph(&doc, &seed_back, Direction::Backward);
        let fwd_keys: BTreeSet<String> = fwd.edge_keys().into_iter().collect();
        let back_keys: BTreeSet<String> = back.edge_keys().into_iter().collect();
        let rows = fwd.latencies().unwrap();
        let row = rows.iter().find(|r| r.leaf == leaf.key()).unwrap();
        for k in &row.path {
            prop_assert!(fwd_keys.contains(k) && back_keys.contains(k), "{} missing", k);
        }
    }
}
