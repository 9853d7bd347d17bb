use super::{CallbackOwner, CbId, IrDatabase, NodeId, PubId, PublicationInstance, PublisherId, SubscriptionId, TimerId};
use crate::trace::{HostId, ObjectKey, Timestamp};
use std::collections::HashMap;

/// One executor thread.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct ThreadKey {
    pub host: HostId,
    pub pid: u32,
    pub tid: u32,
}

/// Lookup tables derived from an [`IrDatabase`]. Rebuilt on demand, never serialized.
#[derive(Debug, Default)]
pub struct IrIndex {
    topics: HashMap<String, u32>,
    topic_names: Vec<String>,
    by_topic_ts: HashMap<(u32, Timestamp), Vec<PubId>>,
    pubs_by_topic: Vec<Vec<PubId>>,
    pubs_by_publisher: Vec<Vec<PubId>>,
    cbs_by_owner: HashMap<CallbackOwner, Vec<CbId>>,
    pubs_by_thread: HashMap<ThreadKey, Vec<PubId>>,
    cbs_by_thread: HashMap<ThreadKey, Vec<CbId>>,
    nodes: HashMap<ObjectKey, NodeId>,
    publishers: HashMap<ObjectKey, PublisherId>,
    subscriptions: HashMap<ObjectKey, SubscriptionId>,
    timers: HashMap<ObjectKey, TimerId>,
}

impl IrIndex {
    pub fn build(db: &IrDatabase) -> Self {
        let mut ix = IrIndex::default();
        let mut publisher_topic = Vec::with_capacity(db.publishers.len());
        for p in &db.publishers {
            let next = ix.topics.len() as u32;
            let t = *ix.topics.entry(p.topic.clone()).or_insert(next);
            if t as usize == ix.pubs_by_topic.len() {
                ix.pubs_by_topic.push(Vec::new());
                ix.topic_names.push(p.topic.clone());
            }
            publisher_topic.push(t);
        }
        ix.pubs_by_publisher = vec![Vec::new(); db.publishers.len()];

        for (i, p) in db.publications.iter().enumerate() {
            let id = PubId(i as u32);
            let t = publisher_topic[p.publisher.idx()];
            ix.by_topic_ts.entry((t, p.source_timestamp)).or_default().push(id);
            ix.pubs_by_topic[t as usize].push(id);
            ix.pubs_by_publisher[p.publisher.idx()].push(id);
            ix.pubs_by_thread.entry(pub_thread(db, p)).or_default().push(id);
        }
        for (i, c) in db.callbacks.iter().enumerate() {
            let id = CbId(i as u32);
            ix.cbs_by_owner.entry(c.owner).or_default().push(id);
            let key = db.owner_key(c.owner);
            ix.cbs_by_thread
                .entry(ThreadKey { host: key.host.clone(), pid: key.pid, tid: c.tid })
                .or_default()
                .push(id);
        }
        // Flat lists are already time-ordered, but sort defensively by the fields used for searches.
        for v in ix.pubs_by_thread.values_mut() {
            v.sort_by_key(|p| (db.publication(*p).pub_ts(), *p));
        }
        for v in ix.cbs_by_thread.values_mut().chain(ix.cbs_by_owner.values_mut()) {
            v.sort_by_key(|c| (db.callback(*c).start, *c));
        }

        for (i, n) in db.nodes.iter().enumerate() {
            ix.nodes.insert(n.key.clone(), NodeId(i as u32));
        }
        for (i, p) in db.publishers.iter().enumerate() {
            ix.publishers.insert(p.key.clone(), PublisherId(i as u32));
        }
        for (i, s) in db.subscriptions.iter().enumerate() {
            ix.subscriptions.insert(s.key.clone(), SubscriptionId(i as u32));
        }
        for (i, t) in db.timers.iter().enumerate() {
            ix.timers.insert(t.key.clone(), TimerId(i as u32));
        }
        ix
    }

    /// Publications on `topic` with the given source timestamp. More than one means a collision.
    pub fn publications_at(&self, topic: &str, source_ts: Timestamp) -> &[PubId] {
        self.topics
            .get(topic)
            .and_then(|t| self.by_topic_ts.get(&(*t, source_ts)))
            .map_or(&[], Vec::as_slice)
    }

    /// Groups of two or more publications sharing topic and source timestamp, sorted.
    pub fn collisions(&self) -> Vec<(&str, Timestamp, &[PubId])> {
        let mut out: Vec<_> = self
            .by_topic_ts
            .iter()
            .filter(|(_, v)| v.len() > 1)
            .map(|((t, ts), v)| (self.topic_names[*t as usize].as_str(), *ts, v.as_slice()))
            .collect();
        out.sort();
        out
    }

    pub fn publications_on_topic(&self, topic: &str) -> &[PubId] {
        self.topics
            .get(topic)
            .map_or(&[], |t| self.pubs_by_topic[*t as usize].as_slice())
    }

    pub fn publications_of(&self, publisher: PublisherId) -> &[PubId] {
        self.pubs_by_publisher.get(publisher.idx()).map_or(&[], Vec::as_slice)
    }

    /// Callbacks of one owner, ordered by start.
    pub fn callbacks_of(&self, owner: CallbackOwner) -> &[CbId] {
        self.cbs_by_owner.get(&owner).map_or(&[], Vec::as_slice)
    }

    /// Publications on one thread, ordered by publish time.
    pub fn thread_publications(&self) -> &HashMap<ThreadKey, Vec<PubId>> {
        &self.pubs_by_thread
    }

    /// Callbacks on one thread, ordered by start.
    pub fn thread_callbacks(&self) -> &HashMap<ThreadKey, Vec<CbId>> {
        &self.cbs_by_thread
    }

    pub fn node(&self, key: &ObjectKey) -> Option<NodeId> {
        self.nodes.get(key).copied()
    }

    pub fn publisher(&self, key: &ObjectKey) -> Option<PublisherId> {
        self.publishers.get(key).copied()
    }

    pub fn subscription(&self, key: &ObjectKey) -> Option<SubscriptionId> {
        self.subscriptions.get(key).copied()
    }

    pub fn timer(&self, key: &ObjectKey) -> Option<TimerId> {
        self.timers.get(key).copied()
    }
}

/// Thread on which a publication was made.
pub fn pub_thread(db: &IrDatabase, p: &PublicationInstance) -> ThreadKey {
    let key = &db.publishers[p.publisher.idx()].key;
    ThreadKey { host: key.host.clone(), pid: key.pid, tid: p.tid }
}

/// All publications whose publisher topic and source timestamp match. Linear scan.
pub fn query_publication<'a>(db: &'a IrDatabase, topic: &str, source_ts: Timestamp) -> Vec<&'a PublicationInstance> {
    db.publications
        .iter()
        .filter(|p| p.source_timestamp == source_ts && db.publishers[p.publisher.idx()].topic == topic)
        .collect()
}
