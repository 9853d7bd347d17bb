//! Ground truth recorded from the simulator's own causal bookkeeping.

use super::engine::{Owner, SimRun};
use crate::{
    flow::{edge_key, Direction, FlowEdgeKind, SeedSelector},
    identity::{link_id, publication_id, subscription_callback_id, timer_callback_id},
    trace::LinkType,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

pub const TRUTH_VERSION: u32 = 1;
const MAX_FLOW_SEEDS: usize = 24;
const TIMER_SEED_RUNS: [usize; 2] = [2, 5];
const SINK_SEED_RUN: usize = 3;

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TruthIndirect {
    pub link_type: LinkType,
    pub inputs: Vec<String>,
    pub output: String,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TruthCollision {
    pub topic: String,
    pub source_timestamp: i64,
    pub publications: Vec<String>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TruthLatency {
    pub leaf: String,
    pub latency_ns: i64,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TruthFlow {
    pub seed: SeedSelector,
    pub direction: Direction,
    /// Sorted edge keys.
    pub edges: Vec<String>,
    /// Sorted by leaf end time.
    pub latencies: Vec<TruthLatency>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct GroundTruth {
    pub truth_version: u32,
    pub scenario: String,
    pub seed: u64,
    /// Host whose clock the analysis corrects to.
    pub reference: String,
    /// Correction to add to each host's local timestamps to reach the reference clock.
    pub true_offsets: BTreeMap<String, i64>,
    /// Largest sampled cross-host delivery delay.
    pub max_one_way_delay_ns: i64,
    /// `publication->callback` pairs, excluding colliding publications.
    pub transport: Vec<String>,
    /// `callback->publication` pairs.
    pub direct: Vec<String>,
    pub indirect: Vec<TruthIndirect>,
    pub collisions: Vec<TruthCollision>,
    pub flows: Vec<TruthFlow>,
}

impl GroundTruth {
    pub fn empty(scenario: &str, seed: u64) -> Self {
        GroundTruth {
            truth_version: TRUTH_VERSION,
            scenario: scenario.into(),
            seed,
            reference: String::new(),
            true_offsets: BTreeMap::new(),
            max_one_way_delay_ns: 0,
            transport: Vec::new(),
            direct: Vec::new(),
            indirect: Vec::new(),
            collisions: Vec::new(),
            flows: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TruthError> {
        #[derive(Deserialize)]
        struct Header {
            truth_version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.truth_version != TRUTH_VERSION {
            return Err(TruthError::Version { found: header.truth_version, expected: TRUTH_VERSION });
        }
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TruthError {
    #[error("malformed ground truth: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported ground truth version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
enum Edge {
    Callback(usize),
    Take(usize),
    Publication(usize),
    Transport(usize, usize),
    Indirect(usize, usize, LinkType),
}

struct Ctx<'a> {
    run: &'a SimRun,
    shift: i64,
    cb_ids: Vec<String>,
    pub_ids: Vec<String>,
    colliding: HashSet<usize>,
    contained: Vec<Vec<usize>>,
    delivered: Vec<Vec<usize>>,
    indirect_by_input: HashMap<usize, Vec<(usize, LinkType)>>,
    indirect_by_output: HashMap<usize, Vec<(usize, LinkType)>>,
}

impl Ctx<'_> {
    fn is_tf_sub(&self, c: usize) -> bool {
        matches!(self.run.callbacks[c].owner, Owner::Sub(s) if self.run.subscriptions[s].topic == "/tf")
    }

    fn pruned(&self, p: usize, c: usize) -> bool {
        let Owner::Sub(s) = self.run.callbacks[c].owner else { return true };
        let publisher = &self.run.publishers[self.run.publications[p].publisher];
        publisher.topic == "/tf" && self.run.subscriptions[s].node == publisher.node
    }

    fn transport_ok(&self, p: usize, c: usize) -> bool {
        !self.colliding.contains(&p) && !self.pruned(p, c)
    }

    fn kind(&self, e: Edge) -> FlowEdgeKind {
        match e {
            Edge::Callback(c) => match self.run.callbacks[c].owner {
                Owner::Timer(_) => FlowEdgeKind::TimerCallback,
                Owner::Sub(_) => FlowEdgeKind::SubscriptionCallback,
            },
            Edge::Take(_) => FlowEdgeKind::Take,
            Edge::Publication(_) => FlowEdgeKind::MessagePublication,
            Edge::Transport(..) => FlowEdgeKind::TransportLink,
            Edge::Indirect(_, _, LinkType::PeriodicAsync) => FlowEdgeKind::PeriodicAsyncLink,
            Edge::Indirect(_, _, LinkType::PartialSync) => FlowEdgeKind::PartialSyncLink,
        }
    }

    fn key(&self, e: Edge) -> String {
        let subject = match e {
            Edge::Callback(c) | Edge::Take(c) => self.cb_ids[c].clone(),
            Edge::Publication(p) => self.pub_ids[p].clone(),
            Edge::Transport(p, c) => link_id(&self.pub_ids[p], &self.cb_ids[c]),
            Edge::Indirect(c, p, _) => link_id(&self.cb_ids[c], &self.pub_ids[p]),
        };
        edge_key(self.kind(e), &subject)
    }

    /// Span on the reference host clock.
    fn span(&self, e: Edge) -> (i64, i64) {
        let cbs = &self.run.callbacks;
        let pubs = &self.run.publications;
        let (a, b) = match e {
            Edge::Callback(c) => (cbs[c].start, cbs[c].end),
            Edge::Take(c) => (cbs[c].take.expect("subscription callback"), cbs[c].start),
            Edge::Publication(p) => (pubs[p].pub_ts, pubs[p].dds_ts),
            Edge::Transport(p, c) => (pubs[p].dds_ts, cbs[c].take.expect("subscription callback")),
            Edge::Indirect(c, p, _) => (cbs[c].end, pubs[p].pub_ts),
        };
        (a + self.shift, b + self.shift)
    }

    fn successors(&self, e: Edge) -> Vec<Edge> {
        match e {
            Edge::Callback(c) => {
                if self.is_tf_sub(c) {
                    return Vec::new();
                }
                let mut out: Vec<Edge> = self.contained[c].iter().map(|p| Edge::Publication(*p)).collect();
                for (p, t) in self.indirect_by_input.get(&c).into_iter().flatten() {
                    if self.run.publications[*p].enclosing != c {
                        out.push(Edge::Indirect(c, *p, *t));
                    }
                }
                out
            }
            Edge::Publication(p) => self.delivered[p]
                .iter()
                .filter(|c| self.transport_ok(p, **c))
                .map(|c| Edge::Transport(p, *c))
                .collect(),
            Edge::Transport(_, c) => vec![Edge::Take(c)],
            Edge::Take(c) => vec![Edge::Callback(c)],
            Edge::Indirect(_, p, _) => vec![Edge::Publication(p)],
        }
    }

    fn predecessors(&self, e: Edge) -> Vec<Edge> {
        match e {
            Edge::Callback(c) => match self.run.callbacks[c].owner {
                Owner::Timer(_) => Vec::new(),
                Owner::Sub(_) => vec![Edge::Take(c)],
            },
            Edge::Take(c) => match self.run.callbacks[c].received {
                Some(p) if self.transport_ok(p, c) => vec![Edge::Transport(p, c)],
                _ => Vec::new(),
            },
            Edge::Transport(p, _) => vec![Edge::Publication(p)],
            Edge::Indirect(c, _, _) => vec![Edge::Callback(c)],
            Edge::Publication(p) => {
                let enc = self.run.publications[p].enclosing;
                let mut out = Vec::new();
                if !self.is_tf_sub(enc) {
                    out.push(Edge::Callback(enc));
                }
                for (c, t) in self.indirect_by_output.get(&p).into_iter().flatten() {
                    if *c != enc && !self.is_tf_sub(*c) {
                        out.push(Edge::Indirect(*c, p, *t));
                    }
                }
                out
            }
        }
    }

    fn flow(&self, seed: Edge, direction: Direction) -> (Vec<String>, Vec<TruthLatency>) {
        let mut edges: BTreeSet<Edge> = BTreeSet::from([seed]);
        let mut pairs: BTreeSet<(Edge, Edge)> = BTreeSet::new();
        let mut visited: HashSet<(Edge, bool)> = HashSet::new();
        let mut work: VecDeque<(Edge, bool)> = VecDeque::new();
        if direction.forward() {
            work.push_back((seed, true));
        }
        if direction.backward() {
            work.push_back((seed, false));
        }
        while let Some((e, fwd)) = work.pop_front() {
            if !visited.insert((e, fwd)) {
                continue;
            }
            let next = if fwd { self.successors(e) } else { self.predecessors(e) };
            for n in next {
                edges.insert(n);
                pairs.insert(if fwd { (e, n) } else { (n, e) });
                work.push_back((n, fwd));
            }
        }

        let mut preds: HashMap<Edge, Vec<Edge>> = HashMap::new();
        let mut has_succ: HashSet<Edge> = HashSet::new();
        for (a, b) in &pairs {
            preds.entry(*b).or_default().push(*a);
            has_succ.insert(*a);
        }
        // Earliest root start reaching each edge, by memoized recursion over predecessors.
        let mut memo: HashMap<Edge, i64> = HashMap::new();
        fn earliest(e: Edge, ctx: &Ctx, preds: &HashMap<Edge, Vec<Edge>>, memo: &mut HashMap<Edge, i64>) -> i64 {
            if let Some(v) = memo.get(&e) {
                return *v;
            }
            let v = match preds.get(&e) {
                None => ctx.span(e).0,
                Some(ps) => ps.iter().map(|p| earliest(*p, ctx, preds, memo)).min().expect("non-empty"),
            };
            memo.insert(e, v);
            v
        }
        let mut leaves: Vec<(i64, String, i64)> = edges
            .iter()
            .filter(|e| !has_succ.contains(e))
            .map(|e| {
                let (_, end) = self.span(*e);
                (end, self.key(*e), end - earliest(*e, self, &preds, &mut memo))
            })
            .collect();
        leaves.sort();
        let mut keys: Vec<String> = edges.iter().map(|e| self.key(*e)).collect();
        keys.sort();
        let latencies = leaves.into_iter().map(|(_, leaf, latency_ns)| TruthLatency { leaf, latency_ns }).collect();
        (keys, latencies)
    }
}

pub(crate) fn build(run: &SimRun, scenario: &str, seed: u64) -> GroundTruth {
    let mut truth = GroundTruth::empty(scenario, seed);
    let Some(reference) = run.hosts.iter().min_by(|a, b| a.id.cmp(&b.id)) else {
        return truth;
    };
    truth.reference = reference.id.to_string();
    truth.true_offsets = run.hosts.iter().map(|h| (h.id.to_string(), reference.offset - h.offset)).collect();
    truth.max_one_way_delay_ns = run.max_cross_host_delay;

    let pub_ids: Vec<String> = run
        .publications
        .iter()
        .map(|p| publication_id(&run.publishers[p.publisher].key, p.source_ts))
        .collect();
    let mut cb_ids = vec![String::new(); run.callbacks.len()];
    let mut timer_runs: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut sub_runs: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut order: Vec<usize> = (0..run.callbacks.len()).collect();
    order.sort_by_key(|c| (run.callbacks[*c].start, *c));
    let mut seqs: HashMap<(usize, i64), u32> = HashMap::new();
    for c in order {
        let cb = &run.callbacks[c];
        cb_ids[c] = match cb.owner {
            Owner::Timer(t) => {
                let runs = timer_runs.entry(t).or_default();
                runs.push(c);
                timer_callback_id(&run.timers[t].key, runs.len() as u32 - 1)
            }
            Owner::Sub(s) => {
                sub_runs.entry(s).or_default().push(c);
                let ts = cb.source_ts.expect("subscription callback");
                let seq = seqs.entry((s, ts)).or_insert(0);
                let id = subscription_callback_id(&run.subscriptions[s].key, ts, *seq);
                *seq += 1;
                id
            }
        };
    }

    let mut groups: BTreeMap<(&str, i64), Vec<usize>> = BTreeMap::new();
    for (i, p) in run.publications.iter().enumerate() {
        groups.entry((run.publishers[p.publisher].topic.as_str(), p.source_ts)).or_default().push(i);
    }
    let mut colliding = HashSet::new();
    for ((topic, ts), ps) in &groups {
        if ps.len() > 1 {
            colliding.extend(ps.iter().copied());
            let mut publications: Vec<String> = ps.iter().map(|p| pub_ids[*p].clone()).collect();
            publications.sort();
            truth.collisions.push(TruthCollision { topic: topic.to_string(), source_timestamp: *ts, publications });
        }
    }

    let mut contained = vec![Vec::new(); run.callbacks.len()];
    for (i, p) in run.publications.iter().enumerate() {
        contained[p.enclosing].push(i);
    }
    let mut delivered = vec![Vec::new(); run.publications.len()];
    for (c, cb) in run.callbacks.iter().enumerate() {
        if let Some(p) = cb.received {
            delivered[p].push(c);
        }
    }
    let mut indirect_by_input: HashMap<usize, Vec<(usize, LinkType)>> = HashMap::new();
    let mut indirect_by_output: HashMap<usize, Vec<(usize, LinkType)>> = HashMap::new();
    for rec in &run.indirect {
        let t = run.annotations[rec.annotation].link_type;
        for c in &rec.inputs {
            indirect_by_input.entry(*c).or_default().push((rec.output, t));
            indirect_by_output.entry(rec.output).or_default().push((*c, t));
        }
    }

    for (p, cbs) in delivered.iter().enumerate() {
        if colliding.contains(&p) {
            continue;
        }
        for c in cbs {
            truth.transport.push(link_id(&pub_ids[p], &cb_ids[*c]));
        }
    }
    truth.transport.sort();
    for (c, ps) in contained.iter().enumerate() {
        if matches!(run.callbacks[c].owner, Owner::Sub(_)) {
            for p in ps {
                truth.direct.push(link_id(&cb_ids[c], &pub_ids[*p]));
            }
        }
    }
    truth.direct.sort();
    truth.indirect = run
        .indirect
        .iter()
        .map(|rec| TruthIndirect {
            link_type: run.annotations[rec.annotation].link_type,
            inputs: rec.inputs.iter().map(|c| cb_ids[*c].clone()).collect(),
            output: pub_ids[rec.output].clone(),
        })
        .collect();
    truth.indirect.sort_by(|a, b| (&a.output, a.link_type, &a.inputs).cmp(&(&b.output, b.link_type, &b.inputs)));

    let ctx = Ctx {
        run,
        shift: reference.offset,
        cb_ids,
        pub_ids,
        colliding,
        contained,
        delivered,
        indirect_by_input,
        indirect_by_output,
    };

    let mut seeds: Vec<(SeedSelector, Edge)> = Vec::new();
    for (t, timer) in run.timers.iter().enumerate() {
        for k in TIMER_SEED_RUNS {
            if let Some(c) = timer_runs.get(&t).and_then(|r| r.get(k)) {
                seeds.push((SeedSelector::Callback { owner: format!("key:{}", timer.key), index: k as u32 }, Edge::Callback(*c)));
            }
        }
    }
    let annotated: HashSet<usize> = run.annotations.iter().flat_map(|a| a.inputs.iter().copied()).collect();
    for (s, sub) in run.subscriptions.iter().enumerate() {
        if !sub.publish.is_empty() || annotated.contains(&s) {
            continue;
        }
        if let Some(c) = sub_runs.get(&s).and_then(|r| r.get(SINK_SEED_RUN)) {
            seeds.push((
                SeedSelector::Callback { owner: format!("key:{}", sub.key), index: SINK_SEED_RUN as u32 },
                Edge::Callback(*c),
            ));
        }
    }
    seeds.truncate(MAX_FLOW_SEEDS);
    truth.flows = seeds
        .into_iter()
        .map(|(seed, edge)| {
            let (edges, latencies) = ctx.flow(edge, Direction::Both);
            TruthFlow { seed, direction: Direction::Both, edges, latencies }
        })
        .collect();
    truth
}
