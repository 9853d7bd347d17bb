use super::IndirectLink;
use crate::{
    diag::{Diagnostic, DiagnosticKind},
    ir::{CallbackOwner, CbId, IrDatabase, IrIndex, LinkAnnotation, PubId},
    trace::{LinkType, Timestamp},
};
use std::collections::HashMap;

fn annotated_outputs<'a>(
    db: &'a IrDatabase,
    index: &'a IrIndex,
    link_type: LinkType,
) -> impl Iterator<Item = (u32, &'a LinkAnnotation, Vec<PubId>)> + 'a {
    db.annotations
        .iter()
        .enumerate()
        .filter(move |(_, a)| a.link_type == link_type)
        .map(move |(i, a)| {
            let mut pubs: Vec<PubId> = a
                .outputs
                .iter()
                .flat_map(|p| index.publications_of(*p).iter().copied())
                .collect();
            pubs.sort_by_key(|p| (db.publication(*p).pub_ts(), *p));
            (i as u32, a, pubs)
        })
}

fn misuse(db: &IrDatabase, p: PubId, msg: String) -> Diagnostic {
    let key = &db.publisher_of(p).key;
    Diagnostic::new(DiagnosticKind::AnnotationMisuse, msg)
        .at(&key.host, key.pid, Some(db.publication(p).tid))
        .ts(db.publication(p).pub_ts())
}

/// Latest-ending callback of `cbs` (sorted by start) with `end <= t`.
fn latest_ended_before(db: &IrDatabase, cbs: &[CbId], t: Timestamp) -> Option<CbId> {
    let n = cbs.partition_point(|c| db.callback(*c).start <= t);
    let mut best: Option<CbId> = None;
    for c in cbs[..n].iter().rev() {
        let cb = db.callback(*c);
        match best {
            Some(b) if cb.end <= db.callback(b).start => break,
            _ => {}
        }
        if cb.end <= t && best.is_none_or(|b| (cb.end, cb.start, *c) > (db.callback(b).end, db.callback(b).start, b)) {
            best = Some(*c);
        }
    }
    best
}

/// Timer-driven fusion: each output published in a timer callback uses, per input,
/// the latest input callback that finished before the timer callback started.
pub fn infer_periodic_async(
    db: &IrDatabase,
    index: &IrIndex,
    enclosing: &[Option<CbId>],
) -> (Vec<IndirectLink>, Vec<Diagnostic>) {
    let mut links = Vec::new();
    let mut diags = Vec::new();
    for (ai, ann, pubs) in annotated_outputs(db, index, LinkType::PeriodicAsync) {
        for p in pubs {
            let timer_cb = enclosing[p.idx()].filter(|c| matches!(db.callback(*c).owner, CallbackOwner::Timer(_)));
            let Some(tc) = timer_cb else {
                diags.push(misuse(db, p, format!("periodic_async output on {} published outside a timer callback", db.publisher_of(p).topic)));
                continue;
            };
            let t = db.callback(tc).start;
            let inputs: Vec<CbId> = ann
                .inputs
                .iter()
                .filter_map(|s| latest_ended_before(db, index.callbacks_of(CallbackOwner::Subscription(*s)), t))
                .collect();
            if inputs.len() < ann.inputs.len() {
                let key = &db.publisher_of(p).key;
                diags.push(
                    Diagnostic::new(
                        DiagnosticKind::EmptyInputCache,
                        format!(
                            "periodic_async output on {}: {} of {} input caches empty",
                            db.publisher_of(p).topic,
                            ann.inputs.len() - inputs.len(),
                            ann.inputs.len()
                        ),
                    )
                    .at(&key.host, key.pid, Some(db.publication(p).tid))
                    .ts(t),
                );
            }
            links.push(IndirectLink { link_type: LinkType::PeriodicAsync, inputs, output: p, annotation: ai });
        }
    }
    (links, diags)
}

enum Step {
    Fill(usize, CbId),
    Output(PubId),
}

/// Synchronizing fusion: input callbacks fill per-input cache slots when they start;
/// an output published inside an input callback consumes a snapshot of all slots and
/// resets them. Outputs of the same enclosing callback share one snapshot.
pub fn infer_partial_sync(
    db: &IrDatabase,
    index: &IrIndex,
    enclosing: &[Option<CbId>],
) -> (Vec<IndirectLink>, Vec<Diagnostic>) {
    let mut links = Vec::new();
    let mut diags = Vec::new();
    for (ai, ann, pubs) in annotated_outputs(db, index, LinkType::PartialSync) {
        let mut steps: Vec<(Timestamp, u8, u32, Step)> = Vec::new();
        let mut input_cbs: Vec<CbId> = Vec::new();
        for (slot, s) in ann.inputs.iter().enumerate() {
            for c in index.callbacks_of(CallbackOwner::Subscription(*s)) {
                steps.push((db.callback(*c).start, 0, c.0, Step::Fill(slot, *c)));
                input_cbs.push(*c);
            }
        }
        for p in pubs {
            steps.push((db.publication(p).pub_ts(), 1, p.0, Step::Output(p)));
        }
        steps.sort_by_key(|(ts, order, id, _)| (*ts, *order, *id));

        input_cbs.sort_by_key(|c| (db.callback(*c).start, *c));
        let overlaps = input_cbs
            .windows(2)
            .filter(|w| db.callback(w[1]).start < db.callback(w[0]).end)
            .count();
        if overlaps > 0 {
            diags.push(
                Diagnostic::new(
                    DiagnosticKind::AmbiguousCacheState,
                    format!("partial_sync annotation {ai}: {overlaps} overlapping input callbacks"),
                )
                .at(&ann.host, ann.pid, None),
            );
        }

        let mut slots: Vec<Option<CbId>> = vec![None; ann.inputs.len()];
        let mut snapshots: HashMap<CbId, Vec<CbId>> = HashMap::new();
        for (_, _, _, step) in steps {
            match step {
                Step::Fill(slot, c) => slots[slot] = Some(c),
                Step::Output(p) => {
                    let enc = enclosing[p.idx()]
                        .filter(|c| matches!(db.callback(*c).owner, CallbackOwner::Subscription(s) if ann.inputs.contains(&s)));
                    let Some(enc) = enc else {
                        diags.push(misuse(
                            db,
                            p,
                            format!("partial_sync output on {} published outside an input callback", db.publisher_of(p).topic),
                        ));
                        continue;
                    };
                    let inputs = snapshots.entry(enc).or_insert_with(|| {
                        let snap: Vec<CbId> = slots.iter().flatten().copied().collect();
                        if snap.len() < slots.len() {
                            let key = &db.publisher_of(p).key;
                            diags.push(
                                Diagnostic::new(
                                    DiagnosticKind::EmptyInputCache,
                                    format!(
                                        "partial_sync output on {} with {} of {} cache slots empty",
                                        db.publisher_of(p).topic,
                                        slots.len() - snap.len(),
                                        slots.len()
                                    ),
                                )
                                .at(&key.host, key.pid, Some(db.publication(p).tid))
                                .ts(db.publication(p).pub_ts()),
                            );
                        }
                        slots.iter_mut().for_each(|s| *s = None);
                        snap
                    });
                    links.push(IndirectLink {
                        link_type: LinkType::PartialSync,
                        inputs: inputs.clone(),
                        output: p,
                        annotation: ai,
                    });
                }
            }
        }
    }
    (links, diags)
}
