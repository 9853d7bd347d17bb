use super::{
    kinds::{edge_key, FlowEdgeKind},
    seed::{resolve_seed, Direction, SeedError, SeedSelector, SeedTarget},
};
use crate::{
    analysis::AnalysisDocument,
    identity::{link_id, Identities},
    ir::{CallbackOwner, CbId, IrDatabase, IrIndex, PubId},
    links::enclosing_callbacks,
    trace::{LinkType, Timestamp},
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, VecDeque};
use thiserror::Error;

pub const FLOW_VERSION: u32 = 1;
pub const TF_TOPIC: &str = "/tf";

/// The instance or link an edge stands for.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum EdgeRef {
    Callback(CbId),
    Take(CbId),
    Publication(PubId),
    Transport(PubId, CbId),
    Indirect(CbId, PubId, LinkType),
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FlowEdge {
    pub kind: FlowEdgeKind,
    pub start_ts: Timestamp,
    pub end_ts: Timestamp,
    pub weight: i64,
    pub subject: String,
    pub label: String,
    /// Timeline lane: owning node, or the topic for transport links.
    pub lane: String,
    pub from_vertex: usize,
    pub to_vertex: usize,
}

impl FlowEdge {
    pub fn key(&self) -> String {
        edge_key(self.kind, &self.subject)
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LatencyRow {
    /// Key of the leaf edge.
    pub leaf: String,
    pub root: String,
    pub leaf_end: Timestamp,
    pub latency_ns: i64,
    /// Edge keys from root to leaf.
    pub path: Vec<String>,
    /// Summed edge weights along the path, per edge kind.
    pub breakdown: BTreeMap<FlowEdgeKind, i64>,
    /// Summed dwell time between consecutive path edges.
    pub gaps_ns: i64,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct FlowGraph {
    pub flow_version: u32,
    pub seed: SeedSelector,
    pub direction: Direction,
    pub seed_edge: usize,
    pub vertex_count: usize,
    /// In discovery order.
    pub edges: Vec<FlowEdge>,
    /// `(a, b)`: edge `b` directly follows edge `a`.
    pub adjacency: Vec<(usize, usize)>,
    pub roots: Vec<usize>,
    pub leaves: Vec<usize>,
    /// Pruned receptions and other remarks from construction.
    pub notes: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IntegrityError {
    #[error("flow graph has a cycle through {0}")]
    Cycle(String),
    #[error("grammar violation: {from} may not precede {to}")]
    Grammar { from: String, to: String },
    #[error("edge {0} has negative weight")]
    NegativeWeight(String),
    #[error("adjacency references edge {0} out of range")]
    Dangling(usize),
}

/// Precomputed lookups for graph construction over one analysis document.
pub struct FlowContext<'a> {
    pub db: &'a IrDatabase,
    pub index: IrIndex,
    pub ids: Identities,
    enclosing: Vec<Option<CbId>>,
    contained: Vec<Vec<PubId>>,
    destinations: HashMap<PubId, Vec<CbId>>,
    source: HashMap<CbId, PubId>,
    indirect_by_input: HashMap<CbId, Vec<(PubId, LinkType)>>,
    indirect_by_output: HashMap<PubId, Vec<(CbId, LinkType)>>,
}

impl<'a> FlowContext<'a> {
    pub fn new(doc: &'a AnalysisDocument) -> Self {
        let db = &doc.ir;
        let index = IrIndex::build(db);
        let ids = Identities::build(db, &index);
        let enclosing = enclosing_callbacks(db, &index);
        let mut contained = vec![Vec::new(); db.callbacks.len()];
        for (p, c) in enclosing.iter().enumerate() {
            if let Some(c) = c {
                contained[c.idx()].push(PubId(p as u32));
            }
        }
        let mut destinations = HashMap::new();
        let mut source = HashMap::new();
        for t in &doc.links.transport {
            destinations.insert(t.source, t.destinations.clone());
            for d in &t.destinations {
                source.insert(*d, t.source);
            }
        }
        let mut indirect_by_input: HashMap<CbId, Vec<(PubId, LinkType)>> = HashMap::new();
        let mut indirect_by_output: HashMap<PubId, Vec<(CbId, LinkType)>> = HashMap::new();
        for l in &doc.links.indirect {
            for c in &l.inputs {
                indirect_by_input.entry(*c).or_default().push((l.output, l.link_type));
                indirect_by_output.entry(l.output).or_default().push((*c, l.link_type));
            }
        }
        FlowContext {
            db,
            index,
            ids,
            enclosing,
            contained,
            destinations,
            source,
            indirect_by_input,
            indirect_by_output,
        }
    }

    fn is_tf_callback(&self, c: CbId) -> bool {
        self.db.callback_topic(c) == Some(TF_TOPIC)
    }

    /// A `/tf` reception by the publishing node itself.
    fn pruned(&self, p: PubId, c: CbId) -> bool {
        let publisher = self.db.publisher_of(p);
        publisher.topic == TF_TOPIC
            && publisher.node.is_some()
            && publisher.node == self.db.owner_node(self.db.callback(c).owner)
    }

    pub fn kind(&self, e: EdgeRef) -> FlowEdgeKind {
        match e {
            EdgeRef::Callback(c) => match self.db.callback(c).owner {
                CallbackOwner::Timer(_) => FlowEdgeKind::TimerCallback,
                CallbackOwner::Subscription(_) => FlowEdgeKind::SubscriptionCallback,
            },
            EdgeRef::Take(_) => FlowEdgeKind::Take,
            EdgeRef::Publication(_) => FlowEdgeKind::MessagePublication,
            EdgeRef::Transport(..) => FlowEdgeKind::TransportLink,
            EdgeRef::Indirect(_, _, LinkType::PeriodicAsync) => FlowEdgeKind::PeriodicAsyncLink,
            EdgeRef::Indirect(_, _, LinkType::PartialSync) => FlowEdgeKind::PartialSyncLink,
        }
    }

    pub fn subject(&self, e: EdgeRef) -> String {
        let cb = |c: CbId| &self.ids.callbacks[c.idx()];
        let pb = |p: PubId| &self.ids.publications[p.idx()];
        match e {
            EdgeRef::Callback(c) | EdgeRef::Take(c) => cb(c).clone(),
            EdgeRef::Publication(p) => pb(p).clone(),
            EdgeRef::Transport(p, c) => link_id(pb(p), cb(c)),
            EdgeRef::Indirect(c, p, _) => link_id(cb(c), pb(p)),
        }
    }

    pub fn span(&self, e: EdgeRef) -> (Timestamp, Timestamp) {
        let db = self.db;
        match e {
            EdgeRef::Callback(c) => (db.callback(c).start, db.callback(c).end),
            EdgeRef::Take(c) => {
                let cb = db.callback(c);
                (cb.take.map_or(cb.start, |t| t.ts), cb.start)
            }
            EdgeRef::Publication(p) => (db.publication(p).pub_ts(), db.publication(p).dds_ts),
            EdgeRef::Transport(p, c) => {
                let cb = db.callback(c);
                (db.publication(p).dds_ts, cb.take.map_or(cb.start, |t| t.ts))
            }
            EdgeRef::Indirect(c, p, _) => (db.callback(c).end, db.publication(p).pub_ts()),
        }
    }

    pub fn label(&self, e: EdgeRef) -> String {
        let db = self.db;
        let topic = |p: PubId| db.publisher_of(p).topic.clone();
        match e {
            EdgeRef::Callback(c) => db.owner_label(db.callback(c).owner),
            EdgeRef::Take(c) => format!("take {}", db.callback_topic(c).unwrap_or("?")),
            EdgeRef::Publication(p) => format!("{} {}", db.node_name(db.publisher_of(p).node), topic(p)),
            EdgeRef::Transport(p, c) => {
                let dest = db.owner_node(db.callback(c).owner);
                format!("{} -> {}", topic(p), db.node_name(dest))
            }
            EdgeRef::Indirect(c, p, t) => {
                format!("{} {} -> {}", t.as_str(), db.callback_topic(c).unwrap_or("?"), topic(p))
            }
        }
    }

    pub fn lane(&self, e: EdgeRef) -> String {
        let db = self.db;
        match e {
            EdgeRef::Callback(c) | EdgeRef::Take(c) => db.node_name(db.owner_node(db.callback(c).owner)),
            EdgeRef::Publication(p) | EdgeRef::Indirect(_, p, _) => db.node_name(db.publisher_of(p).node),
            EdgeRef::Transport(p, _) => format!("transport {}", db.publisher_of(p).topic),
        }
    }

    fn receive_edge(&self, c: CbId) -> EdgeRef {
        if self.db.callback(c).take.is_some() {
            EdgeRef::Take(c)
        } else {
            EdgeRef::Callback(c)
        }
    }

    pub fn successors(&self, e: EdgeRef, notes: &mut Vec<String>) -> Vec<EdgeRef> {
        match e {
            EdgeRef::Callback(c) => {
                if self.is_tf_callback(c) {
                    return Vec::new();
                }
                let mut out: Vec<EdgeRef> = self.contained[c.idx()].iter().map(|p| EdgeRef::Publication(*p)).collect();
                for (p, t) in self.indirect_by_input.get(&c).into_iter().flatten() {
                    if self.enclosing[p.idx()] != Some(c) {
                        out.push(EdgeRef::Indirect(c, *p, *t));
                    }
                }
                out
            }
            EdgeRef::Publication(p) => {
                let mut out = Vec::new();
                for c in self.destinations.get(&p).into_iter().flatten() {
                    if self.pruned(p, *c) {
                        notes.push(format!("pruned /tf self-reception {}", self.subject(EdgeRef::Transport(p, *c))));
                    } else {
                        out.push(EdgeRef::Transport(p, *c));
                    }
                }
                out
            }
            EdgeRef::Transport(_, c) => vec![self.receive_edge(c)],
            EdgeRef::Take(c) => vec![EdgeRef::Callback(c)],
            EdgeRef::Indirect(_, p, _) => vec![EdgeRef::Publication(p)],
        }
    }

    pub fn predecessors(&self, e: EdgeRef, notes: &mut Vec<String>) -> Vec<EdgeRef> {
        let via_transport = |c: CbId, notes: &mut Vec<String>| match self.source.get(&c) {
            Some(p) if self.pruned(*p, c) => {
                notes.push(format!("pruned /tf self-reception {}", self.subject(EdgeRef::Transport(*p, c))));
                Vec::new()
            }
            Some(p) => vec![EdgeRef::Transport(*p, c)],
            None => Vec::new(),
        };
        match e {
            EdgeRef::Callback(c) => match self.db.callback(c).owner {
                CallbackOwner::Timer(_) => Vec::new(),
                CallbackOwner::Subscription(_) if self.db.callback(c).take.is_some() => vec![EdgeRef::Take(c)],
                CallbackOwner::Subscription(_) => via_transport(c, notes),
            },
            EdgeRef::Take(c) => via_transport(c, notes),
            EdgeRef::Transport(p, _) => vec![EdgeRef::Publication(p)],
            EdgeRef::Indirect(c, _, _) => vec![EdgeRef::Callback(c)],
            EdgeRef::Publication(p) => {
                let enc = self.enclosing[p.idx()];
                let mut out = Vec::new();
                if let Some(c) = enc.filter(|c| !self.is_tf_callback(*c)) {
                    out.push(EdgeRef::Callback(c));
                }
                for (c, t) in self.indirect_by_output.get(&p).into_iter().flatten() {
                    if Some(*c) != enc && !self.is_tf_callback(*c) {
                        out.push(EdgeRef::Indirect(*c, p, *t));
                    }
                }
                out
            }
        }
    }

    pub fn build(&self, seed: &SeedSelector, direction: Direction) -> Result<FlowGraph, SeedError> {
        let target = resolve_seed(self.db, &self.index, seed)?;
        let seed_ref = match target {
            SeedTarget::Publication(p) => EdgeRef::Publication(p),
            SeedTarget::Callback(c) => EdgeRef::Callback(c),
        };
        Ok(self.build_from(seed_ref, seed.clone(), direction))
    }

    pub fn build_from(&self, seed_ref: EdgeRef, seed: SeedSelector, direction: Direction) -> FlowGraph {
        let mut refs: Vec<EdgeRef> = vec![seed_ref];
        let mut pos: HashMap<EdgeRef, usize> = HashMap::from([(seed_ref, 0)]);
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut seen_pairs: std::collections::HashSet<(usize, usize)> = Default::default();
        let mut visited: std::collections::HashSet<(usize, bool)> = Default::default();
        let mut notes = Vec::new();
        let mut work: VecDeque<(usize, bool)> = VecDeque::new();
        if direction.forward() {
            work.push_back((0, true));
        }
        if direction.backward() {
            work.push_back((0, false));
        }
        while let Some((i, fwd)) = work.pop_front() {
            if !visited.insert((i, fwd)) {
                continue;
            }
            let e = refs[i];
            let next = if fwd { self.successors(e, &mut notes) } else { self.predecessors(e, &mut notes) };
            for n in next {
                let j = *pos.entry(n).or_insert_with(|| {
                    refs.push(n);
                    refs.len() - 1
                });
                let pair = if fwd { (i, j) } else { (j, i) };
                if seen_pairs.insert(pair) {
                    pairs.push(pair);
                }
                work.push_back((j, fwd));
            }
        }
        notes.sort();
        notes.dedup();

        let (from_vertex, to_vertex, vertex_count) = assign_vertices(refs.len(), &pairs);
        let edges: Vec<FlowEdge> = refs
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let (start_ts, end_ts) = self.span(*r);
                FlowEdge {
                    kind: self.kind(*r),
                    start_ts,
                    end_ts,
                    weight: end_ts - start_ts,
                    subject: self.subject(*r),
                    label: self.label(*r),
                    lane: self.lane(*r),
                    from_vertex: from_vertex[i],
                    to_vertex: to_vertex[i],
                }
            })
            .collect();
        let mut has_pred = vec![false; edges.len()];
        let mut has_succ = vec![false; edges.len()];
        for (a, b) in &pairs {
            has_succ[*a] = true;
            has_pred[*b] = true;
        }
        FlowGraph {
            flow_version: FLOW_VERSION,
            seed,
            direction,
            seed_edge: 0,
            vertex_count,
            roots: (0..edges.len()).filter(|i| !has_pred[*i]).collect(),
            leaves: (0..edges.len()).filter(|i| !has_succ[*i]).collect(),
            edges,
            adjacency: pairs,
            notes,
        }
    }
}

/// Joins the end vertex of each edge with the start vertex of its successors;
/// vertex ids follow discovery order.
fn assign_vertices(n: usize, pairs: &[(usize, usize)]) -> (Vec<usize>, Vec<usize>, usize) {
    // Slots 2i and 2i+1 are the start and end of edge i.
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, b) in pairs {
        let (x, y) = (find(&mut parent, 2 * a + 1), find(&mut parent, 2 * b));
        if x != y {
            parent[x.max(y)] = x.min(y);
        }
    }
    let mut ids: HashMap<usize, usize> = HashMap::new();
    let mut from = vec![0; n];
    let mut to = vec![0; n];
    for i in 0..n {
        for (slot, out) in [(2 * i, &mut from), (2 * i + 1, &mut to)] {
            let root = find(&mut parent, slot);
            let next = ids.len();
            out[i] = *ids.entry(root).or_insert(next);
        }
    }
    (from, to, ids.len())
}

impl FlowGraph {
    pub fn edge_keys(&self) -> Vec<String> {
        let mut keys: Vec<String> = self.edges.iter().map(FlowEdge::key).collect();
        keys.sort();
        keys
    }

    /// Kahn topological order of edges, or the first edge left on a cycle.
    pub fn topological_order(&self) -> Result<Vec<usize>, usize> {
        let n = self.edges.len();
        let mut indegree = vec![0usize; n];
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (a, b) in &self.adjacency {
            succ[*a].push(*b);
            indegree[*b] += 1;
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|i| indegree[*i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for j in &succ[i] {
                indegree[*j] -= 1;
                if indegree[*j] == 0 {
                    queue.push_back(*j);
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            Err((0..n).find(|i| indegree[*i] > 0).expect("cycle member"))
        }
    }

    /// Acyclicity, edge grammar and non-negative weights.
    pub fn check_integrity(&self) -> Result<(), IntegrityError> {
        for (a, b) in &self.adjacency {
            let (Some(ea), Some(eb)) = (self.edges.get(*a), self.edges.get(*b)) else {
                return Err(IntegrityError::Dangling((*a).max(*b)));
            };
            if !ea.kind.may_precede(eb.kind) {
                return Err(IntegrityError::Grammar { from: ea.key(), to: eb.key() });
            }
        }
        if let Some(e) = self.edges.iter().find(|e| e.weight < 0) {
            return Err(IntegrityError::NegativeWeight(e.key()));
        }
        self.topological_order()
            .map(|_| ())
            .map_err(|i| IntegrityError::Cycle(self.edges[i].key()))
    }

    /// One row per leaf: latency from the earliest-starting root that reaches it.
    /// Rows are sorted by leaf end time.
    pub fn latencies(&self) -> Result<Vec<LatencyRow>, IntegrityError> {
        let order = self
            .topological_order()
            .map_err(|i| IntegrityError::Cycle(self.edges[i].key()))?;
        let n = self.edges.len();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (a, b) in &self.adjacency {
            preds[*b].push(*a);
        }
        let keys: Vec<String> = self.edges.iter().map(FlowEdge::key).collect();
        // best[i] = (root start, root key index, predecessor on the chosen path)
        let mut best: Vec<(Timestamp, usize, Option<usize>)> = vec![(0, 0, None); n];
        for &i in &order {
            best[i] = preds[i]
                .iter()
                .map(|p| (best[*p].0, best[*p].1, Some(*p)))
                .min_by(|x, y| (x.0, &keys[x.1], x.2.map(|p| &keys[p])).cmp(&(y.0, &keys[y.1], y.2.map(|p| &keys[p]))))
                .unwrap_or((self.edges[i].start_ts, i, None));
        }
        let mut rows: Vec<LatencyRow> = self
            .leaves
            .iter()
            .map(|&leaf| {
                let mut path = vec![leaf];
                while let Some(p) = best[*path.last().expect("non-empty")].2 {
                    path.push(p);
                }
                path.reverse();
                let mut breakdown: BTreeMap<FlowEdgeKind, i64> = BTreeMap::new();
                let mut gaps = 0;
                for (k, &i) in path.iter().enumerate() {
                    *breakdown.entry(self.edges[i].kind).or_default() += self.edges[i].weight;
                    if k > 0 {
                        gaps += self.edges[i].start_ts - self.edges[path[k - 1]].end_ts;
                    }
                }
                let root = path[0];
                LatencyRow {
                    leaf: keys[leaf].clone(),
                    root: keys[root].clone(),
                    leaf_end: self.edges[leaf].end_ts,
                    latency_ns: self.edges[leaf].end_ts - self.edges[root].start_ts,
                    path: path.iter().map(|i| keys[*i].clone()).collect(),
                    breakdown,
                    gaps_ns: gaps,
                }
            })
            .collect();
        rows.sort_by(|a, b| (a.leaf_end, &a.leaf).cmp(&(b.leaf_end, &b.leaf)));
        Ok(rows)
    }
}

impl LatencyRow {
    /// Sum of edge weights and inter-edge gaps along the path.
    pub fn path_sum(&self) -> i64 {
        self.breakdown.values().sum::<i64>() + self.gaps_ns
    }
}

/// Convenience wrapper building one graph from a document.
pub fn build_flow(doc: &AnalysisDocument, seed: &SeedSelector, direction: Direction) -> Result<FlowGraph, SeedError> {
    FlowContext::new(doc).build(seed, direction)
}
