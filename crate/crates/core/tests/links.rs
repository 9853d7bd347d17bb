mod common;

use common::{analyze_synced, builder::{pipeline, TraceBuilder}, direct_oracle, direct_pairs, run};
use msgflow::{
    diag::DiagnosticKind,
    ir::{build_ir, CallbackOwner, CbId},
    links::{infer_all, IndirectLink},
    sim::{builtin, builtin_names},
    trace::LinkType,
    AnalysisDocument,
};
use proptest::prelude::*;
use std::collections::{BTreeMap, BTreeSet};

const MS: i64 = 1_000_000;

fn topic_of_cb(doc: &AnalysisDocument, c: CbId) -> String {
    doc.ir.callback_topic(c).unwrap_or("<timer>").to_string()
}

fn input_topics(doc: &AnalysisDocument, l: &IndirectLink) -> Vec<String> {
    l.inputs.iter().map(|c| topic_of_cb(doc, *c)).collect()
}

#[test]
fn timer_publication_received_on_other_host() {
    let mut b = TraceBuilder::new();
    let talker = b.node("A", 10, "talker");
    let listener = b.node("B", 20, "listener");
    let p = b.publisher("A", 10, talker, "/topic_a");
    let s = b.subscription("B", 20, listener, "/topic_a");
    let t = b.timer("A", 10, talker, 10 * MS);
    b.timer_callback("A", t, 10 * MS, 11 * MS);
    let src = b.publish("A", 10, 10 * MS + 100, p);
    b.receive("B", s, 12 * MS, src, 13 * MS);
    let doc = analyze_synced(&b.bundle());
    assert_eq!(doc.links.counts(), (1, 0, 0));
    assert_eq!(doc.links.transport[0].destinations.len(), 1);
    assert_eq!(doc.links.transport[0].latencies, vec![12 * MS - (10 * MS + 103)]);
}

#[test]
fn one_publication_two_subscriptions() {
    let mut b = TraceBuilder::new();
    let n = b.node("A", 10, "talker");
    let l1 = b.node("B", 20, "l1");
    let l2 = b.node("B", 30, "l2");
    let p = b.publisher("A", 10, n, "/t");
    let s1 = b.subscription("B", 20, l1, "/t");
    let s2 = b.subscription("B", 30, l2, "/t");
    let src = b.publish("A", 10, 100, p);
    b.receive("B", s1, 1_000, src, 2_000);
    b.receive("B", s2, 1_500, src, 2_500);
    let doc = analyze_synced(&b.bundle());
    assert_eq!(doc.links.transport.len(), 1);
    assert_eq!(doc.links.transport[0].destinations.len(), 2);
}

#[test]
fn colliding_source_timestamps_are_not_linked() {
    let mut b = TraceBuilder::new();
    let n1 = b.node("A", 10, "t1");
    let n2 = b.node("A", 11, "t2");
    let l = b.node("B", 20, "listener");
    let p1 = b.publisher("A", 10, n1, "/c");
    let p2 = b.publisher("A", 11, n2, "/c");
    let s = b.subscription("B", 20, l, "/c");
    b.publish_with_source("A", 10, 100, p1, 5_000);
    b.publish_with_source("A", 11, 200, p2, 5_000);
    let other = b.publish("A", 10, 9_000, p1);
    b.receive("B", s, 10_000, 5_000, 11_000);
    b.receive("B", s, 12_000, other, 13_000);
    let doc = analyze_synced(&b.bundle());
    assert_eq!(doc.links.transport.len(), 1, "only the non-colliding message is linked");
    let source = doc.ir.publication(doc.links.transport[0].source);
    assert_eq!(source.source_timestamp, other);
    assert!(doc.diagnostics.iter().any(|d| d.kind == DiagnosticKind::TimestampCollision));
}

#[test]
fn containment_on_same_thread_only() {
    let mut b = TraceBuilder::new();
    let n = b.node("A", 7, "relay");
    let up = b.node("A", 5, "up");
    let pin = b.publisher("A", 5, up, "/in");
    let s = b.subscription("A", 7, n, "/in");
    let p = b.publisher("A", 7, n, "/out");
    let src = b.publish("A", 5, 50, pin);
    // Callback X=101..200 on thread 7 after a take at 100.
    b.receive("A", s, 100, src, 200);
    b.publish("A", 7, 150, p);
    // Same window on another thread of the process: no containment.
    b.publish("A", 8, 160, p);
    let doc = analyze_synced(&b.bundle());
    assert_eq!(doc.links.direct.len(), 1);
    assert_eq!(doc.links.direct[0].outputs.len(), 1);
    let out = doc.ir.publication(doc.links.direct[0].outputs[0]);
    assert_eq!((out.tid, out.pub_ts()), (7, 150));
}

#[test]
fn three_node_pipeline_is_a_chain() {
    let doc = analyze_synced(&pipeline().bundle());
    assert_eq!(doc.links.counts(), (2, 1, 0));
}

fn periodic_async(second_input: bool) -> AnalysisDocument {
    let mut b = TraceBuilder::new();
    let na = b.node("A", 10, "a");
    let nb = b.node("A", 11, "b");
    let fusion = b.node("A", 30, "fusion");
    let sink = b.node("A", 40, "sink");
    let pa = b.publisher("A", 10, na, "/topic_a");
    let pb = b.publisher("A", 11, nb, "/topic_b");
    let sa = b.subscription("A", 30, fusion, "/topic_a");
    let sb = b.subscription("A", 30, fusion, "/topic_b");
    let pc = b.publisher("A", 30, fusion, "/topic_c");
    let sc = b.subscription("A", 40, sink, "/topic_c");
    let t = b.timer("A", 30, fusion, 8 * MS);
    b.annotate("A", 30, "periodic_async", &[sa, sb], &[pc]);
    let a = b.publish("A", 10, MS, pa);
    b.receive("A", sa, 2 * MS, a, 3 * MS);
    if second_input {
        let bm = b.publish("A", 11, 3 * MS, pb);
        b.receive("A", sb, 4 * MS, bm, 5 * MS);
    }
    for k in 1..=2 {
        b.timer_callback("A", t, 8 * k * MS, 8 * k * MS + MS);
        let c = b.publish("A", 30, 8 * k * MS + 500, pc);
        b.receive("A", sc, 8 * k * MS + 2 * MS, c, 8 * k * MS + 3 * MS);
    }
    analyze_synced(&b.bundle())
}

#[test]
fn periodic_async_links_cached_inputs_to_timer_output() {
    let doc = periodic_async(true);
    let (t, d, i) = doc.links.counts();
    assert_eq!((t, d), (4, 0), "timer publications are not direct outputs");
    assert_eq!(i, 2);
    let l = &doc.links.indirect[0];
    assert_eq!(l.link_type, LinkType::PeriodicAsync);
    assert_eq!(input_topics(&doc, l), vec!["/topic_a", "/topic_b"]);
    // No new input between the two timer fires: both outputs reuse the same instances.
    assert_eq!(doc.links.indirect[0].inputs, doc.links.indirect[1].inputs);
    for l in &doc.links.indirect {
        let out = doc.ir.publication(l.output).pub_ts();
        assert!(l.inputs.iter().all(|c| doc.ir.callback(*c).end <= out));
    }
}

#[test]
fn periodic_async_with_empty_cache_is_diagnosed() {
    let doc = periodic_async(false);
    assert_eq!(input_topics(&doc, &doc.links.indirect[0]), vec!["/topic_a"]);
    assert!(doc.diagnostics.iter().any(|d| d.kind == DiagnosticKind::EmptyInputCache));
}

/// `/topic_b` arrives `b_count` times, then `/topic_a` arrives and its callback publishes.
fn partial_sync(b_count: usize, publish: bool) -> AnalysisDocument {
    let mut b = TraceBuilder::new();
    let na = b.node("A", 10, "a");
    let nb = b.node("A", 11, "b");
    let sync = b.node("A", 30, "sync");
    let pa = b.publisher("A", 10, na, "/topic_a");
    let pb = b.publisher("A", 11, nb, "/topic_b");
    let sa = b.subscription("A", 30, sync, "/topic_a");
    let sb = b.subscription("A", 30, sync, "/topic_b");
    let pc = b.publisher("A", 30, sync, "/topic_c");
    b.annotate("A", 30, "partial_sync", &[sa, sb], &[pc]);
    let mut t = MS;
    for _ in 0..b_count {
        let m = b.publish("A", 11, t, pb);
        b.receive("A", sb, t + MS, m, t + 2 * MS);
        t += 3 * MS;
    }
    if publish {
        let m = b.publish("A", 10, t, pa);
        b.receive("A", sa, t + MS, m, t + 3 * MS);
        b.publish("A", 30, t + 2 * MS, pc);
    }
    analyze_synced(&b.bundle())
}

#[test]
fn partial_sync_uses_latest_input_per_slot() {
    let doc = partial_sync(1, true);
    assert_eq!(doc.links.indirect.len(), 1);
    let l = &doc.links.indirect[0];
    assert_eq!(l.link_type, LinkType::PartialSync);
    let mut topics = input_topics(&doc, l);
    topics.sort();
    assert_eq!(topics, vec!["/topic_a", "/topic_b"]);
    // The publishing callback is also the direct-link input; both records are kept.
    assert_eq!(doc.links.direct.len(), 1);

    let doc = partial_sync(2, true);
    let l = &doc.links.indirect[0];
    let b_inputs: Vec<_> = l.inputs.iter().filter(|c| topic_of_cb(&doc, **c) == "/topic_b").collect();
    assert_eq!(b_inputs.len(), 1);
    let latest_b = (0..doc.ir.callbacks.len())
        .map(|i| CbId(i as u32))
        .filter(|c| topic_of_cb(&doc, *c) == "/topic_b")
        .max_by_key(|c| doc.ir.callback(*c).start)
        .unwrap();
    assert_eq!(*b_inputs[0], latest_b);
}

#[test]
fn partial_sync_waits_without_publication() {
    let doc = partial_sync(1, false);
    assert!(doc.links.indirect.is_empty());
}

#[test]
fn empty_database_gives_empty_links() {
    let db = build_ir(&msgflow::TraceBundle::default());
    let index = msgflow::ir::IrIndex::build(&db);
    let links = infer_all(&db, &index);
    assert_eq!(links.counts(), (0, 0, 0));
    assert!(links.diagnostics.is_empty());
}

fn check_link_invariants(doc: &AnalysisDocument) {
    // Each subscription callback is the destination of at most one transport link.
    let mut seen = BTreeSet::new();
    for t in &doc.links.transport {
        let topic = &doc.ir.publisher_of(t.source).topic;
        let src_ts = doc.ir.publication(t.source).source_timestamp;
        assert!(!t.destinations.is_empty());
        for d in &t.destinations {
            assert!(seen.insert(*d), "callback {d:?} has two sources");
            assert_eq!(doc.ir.callback_topic(*d), Some(topic.as_str()));
            assert_eq!(doc.ir.callback(*d).take.unwrap().source_timestamp, src_ts);
        }
    }
    for l in &doc.links.direct {
        let input = doc.ir.callback(l.input);
        assert!(matches!(input.owner, CallbackOwner::Subscription(_)));
        for o in &l.outputs {
            let p = doc.ir.publication(*o);
            assert_eq!(p.tid, input.tid);
            assert!(input.start <= p.pub_ts() && p.pub_ts() <= input.end);
        }
    }
    for l in &doc.links.indirect {
        let ann = &doc.ir.annotations[l.annotation as usize];
        let out = doc.ir.publication(l.output);
        assert!(ann.outputs.contains(&out.publisher));
        for c in &l.inputs {
            let CallbackOwner::Subscription(s) = doc.ir.callback(*c).owner else {
                panic!("timer callback as indirect input");
            };
            assert!(ann.inputs.contains(&s), "input outside its annotation");
            // The input whose callback publishes the output is related by containment instead.
            let cb = doc.ir.callback(*c);
            let encloses = cb.tid == out.tid && cb.start <= out.pub_ts() && out.pub_ts() <= cb.end;
            assert!(encloses || cb.end <= out.pub_ts(), "input ends after output");
        }
    }
}

#[test]
fn link_invariants_hold_on_every_builtin() {
    for name in builtin_names() {
        let (_, doc) = run(&builtin(name, 4).unwrap());
        check_link_invariants(&doc);
    }
}

#[test]
fn periodic_async_scenario_reuses_cached_inputs() {
    // Counting how often each input instance is referenced exposes reuse across timer fires.
    let (_, doc) = run(&builtin("periodic_async_2to1", 0).unwrap());
    let mut uses: BTreeMap<CbId, usize> = BTreeMap::new();
    for l in &doc.links.indirect {
        for c in &l.inputs {
            *uses.entry(*c).or_default() += 1;
        }
    }
    assert!(uses.values().any(|n| *n >= 2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn links_match_oracles_for_random_seeds(seed in 0u64..10_000, which in 0usize..10) {
        let name = builtin_names()[which];
        let (_, doc) = run(&builtin(name, seed).unwrap());
        prop_assert_eq!(direct_pairs(&doc), direct_oracle(&doc.ir));
        check_link_invariants(&doc);
    }
}
