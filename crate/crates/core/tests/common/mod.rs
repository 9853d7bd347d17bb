#![allow(dead_code)]

pub mod builder;

use msgflow::{
    analyze,
    ir::{CallbackOwner, IrDatabase},
    sim::{simulate, ScenarioConfig, SimOutput},
    AnalysisDocument, AnalyzeOptions, SyncMode,
};
use std::collections::BTreeSet;

pub fn run(cfg: &ScenarioConfig) -> (SimOutput, AnalysisDocument) {
    run_with(cfg, SyncMode::Pairs)
}

pub fn run_with(cfg: &ScenarioConfig, sync_mode: SyncMode) -> (SimOutput, AnalysisDocument) {
    let out = simulate(cfg).expect("scenario simulates");
    let opts = AnalyzeOptions { sync_mode, ..AnalyzeOptions::default() };
    let doc = analyze(&out.bundle, &opts).expect("analysis succeeds");
    (out, doc)
}

/// Quadratic reference for direct links: publication Y belongs to subscription
/// callback X when both ran on the same thread and X.start < Y < X.end, taking the
/// latest-starting such X when callbacks nest.
pub fn direct_oracle(db: &IrDatabase) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for (y, p) in db.publications.iter().enumerate() {
        let pk = &db.publishers[p.publisher.idx()].key;
        let t = p.pub_ts();
        let mut best: Option<(i64, usize)> = None;
        for (x, c) in db.callbacks.iter().enumerate() {
            let ck = db.owner_key(c.owner);
            let contains = ck.host == pk.host && ck.pid == pk.pid && c.tid == p.tid && c.start < t && t < c.end;
            if contains && best.is_none_or(|(s, _)| c.start > s) {
                best = Some((c.start, x));
            }
        }
        if let Some((_, x)) = best {
            if matches!(db.callbacks[x].owner, CallbackOwner::Subscription(_)) {
                out.insert((x, y));
            }
        }
    }
    out
}

pub fn direct_pairs(doc: &AnalysisDocument) -> BTreeSet<(usize, usize)> {
    doc.links
        .direct
        .iter()
        .flat_map(|l| l.outputs.iter().map(move |o| (l.input.idx(), o.idx())))
        .collect()
}

/// Analysis of a hand-built bundle with host clocks taken as aligned.
pub fn analyze_synced(bundle: &msgflow::TraceBundle) -> AnalysisDocument {
    let opts = AnalyzeOptions { sync_mode: SyncMode::AssumeSynchronized, ..AnalyzeOptions::default() };
    analyze(bundle, &opts).expect("analysis succeeds")
}
