//! Virtual stigmergy: a per-agent replica of a shared key-value store.
//!
//! Entries carry a per-key Lamport timestamp and the writer id. An incoming
//! entry replaces the local one iff `(ts, writer)` is lexicographically
//! greater, so ties on the clock go to the higher writer id. Reads send the
//! reader's belief to its neighbours, which either adopt it or answer with
//! their newer entry (read-repair).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::kernel::{AgentId, Symbol, Value};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StigEntry {
    pub key: Symbol,
    pub value: Value,
    pub ts: u64,
    pub writer: AgentId,
}

impl StigEntry {
    /// Conflict order: timestamp first, writer id breaks ties.
    pub fn rank(&self) -> (u64, AgentId) {
        (self.ts, self.writer)
    }

    pub fn beats(&self, other: Option<&StigEntry>) -> bool {
        other.is_none_or(|o| self.rank() > o.rank())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StigMessage {
    Write { sender: AgentId, entry: StigEntry },
    Query { sender: AgentId, key: Symbol, belief: Option<StigEntry> },
}

impl StigMessage {
    pub fn sender(&self) -> AgentId {
        match self {
            StigMessage::Write { sender, .. } | StigMessage::Query { sender, .. } => *sender,
        }
    }

    pub fn key(&self) -> &Symbol {
        match self {
            StigMessage::Write { entry, .. } => &entry.key,
            StigMessage::Query { key, .. } => key,
        }
    }
}

/// Where a message produced by a replica should go.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outbound {
    /// To every current neighbour of the replica's owner.
    Broadcast(StigMessage),
    /// Back to one agent.
    Reply(AgentId, StigMessage),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Replica {
    owner: AgentId,
    entries: BTreeMap<Symbol, StigEntry>,
}

impl Replica {
    pub fn new(owner: AgentId) -> Self {
        Replica { owner, entries: BTreeMap::new() }
    }

    pub fn owner(&self) -> AgentId {
        self.owner
    }

    pub fn entry(&self, key: &Symbol) -> Option<&StigEntry> {
        self.entries.get(key)
    }

    pub fn entries(&self) -> impl Iterator<Item = &StigEntry> {
        self.entries.values()
    }

    /// Local write. The new entry's clock is one past the stored one.
    pub fn put(&mut self, key: Symbol, value: Value) -> StigMessage {
        let ts = self.entries.get(&key).map_or(0, |e| e.ts) + 1;
        let entry = StigEntry { key: key.clone(), value, ts, writer: self.owner };
        self.entries.insert(key, entry.clone());
        StigMessage::Write { sender: self.owner, entry }
    }

    /// Local read plus the query that asks neighbours to confirm it.
    pub fn get(&self, key: &Symbol) -> (Option<&Value>, StigMessage) {
        let local = self.entries.get(key);
        let query = StigMessage::Query { sender: self.owner, key: key.clone(), belief: local.cloned() };
        (local.map(|e| &e.value), query)
    }

    /// Every stored entry as a WRITE, for periodic gossip.
    pub fn gossip(&self) -> Vec<StigMessage> {
        self.entries.values().map(|e| StigMessage::Write { sender: self.owner, entry: e.clone() }).collect()
    }

    pub fn on_receive(&mut self, msg: &StigMessage) -> Vec<Outbound> {
        let (sender, key, incoming) = match msg {
            StigMessage::Write { sender, entry } => (*sender, &entry.key, Some(entry)),
            StigMessage::Query { sender, key, belief } => (*sender, key, belief.as_ref()),
        };
        let local = self.entries.get(key);
        match incoming {
            Some(inc) if inc.beats(local) => {
                self.entries.insert(key.clone(), inc.clone());
                vec![Outbound::Broadcast(StigMessage::Write { sender: self.owner, entry: inc.clone() })]
            }
            _ => match local {
                Some(loc) if loc.beats(incoming) => {
                    vec![Outbound::Reply(sender, StigMessage::Write { sender: self.owner, entry: loc.clone() })]
                }
                _ => Vec::new(),
            },
        }
    }
}

/// Free function forms matching the operation names.
pub fn vstig_put(r: &mut Replica, key: Symbol, v: Value) -> StigMessage {
    r.put(key, v)
}

pub fn vstig_get<'a>(r: &'a Replica, key: &Symbol) -> (Option<&'a Value>, StigMessage) {
    r.get(key)
}

pub fn on_receive(r: &mut Replica, m: &StigMessage) -> Vec<Outbound> {
    r.on_receive(m)
}

/// Replicas on a fixed undirected graph with unordered in-flight messages.
/// Used to exercise convergence without the full simulator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mesh {
    replicas: Vec<Replica>,
    adjacency: Vec<BTreeSet<usize>>,
    /// (receiver index, message), kept sorted.
    in_flight: Vec<(usize, StigMessage)>,
}

impl Mesh {
    /// Replica `i` is owned by `AgentId(i as u32)`.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![BTreeSet::new(); n];
        for &(a, b) in edges {
            if a != b {
                adjacency[a].insert(b);
                adjacency[b].insert(a);
            }
        }
        Mesh { replicas: (0..n).map(|i| Replica::new(AgentId(i as u32))).collect(), adjacency, in_flight: Vec::new() }
    }

    pub fn replicas(&self) -> &[Replica] {
        &self.replicas
    }

    pub fn in_flight(&self) -> &[(usize, StigMessage)] {
        &self.in_flight
    }

    pub fn is_quiescent(&self) -> bool {
        self.in_flight.is_empty()
    }

    /// Longest shortest path; `None` when disconnected.
    pub fn diameter(&self) -> Option<usize> {
        let n = self.replicas.len();
        let mut diam = 0;
        for s in 0..n {
            let mut dist = vec![usize::MAX; n];
            dist[s] = 0;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adjacency[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            diam = diam.max(*dist.iter().max()?);
            if dist.contains(&usize::MAX) {
                return None;
            }
        }
        Some(diam)
    }

    pub fn put(&mut self, at: usize, key: &Symbol, value: Value) {
        let msg = self.replicas[at].put(key.clone(), value);
        self.route(at, Outbound::Broadcast(msg));
    }

    pub fn get(&mut self, at: usize, key: &Symbol) -> Option<Value> {
        let (value, query) = self.replicas[at].get(key);
        let value = value.cloned();
        self.route(at, Outbound::Broadcast(query));
        value
    }

    fn route(&mut self, from: usize, out: Outbound) {
        match out {
            Outbound::Broadcast(msg) => {
                for &to in &self.adjacency[from] {
                    self.in_flight.push((to, msg.clone()));
                }
            }
            Outbound::Reply(to, msg) => {
                let to = to.0 as usize;
                if to < self.replicas.len() {
                    self.in_flight.push((to, msg));
                }
            }
        }
        self.in_flight.sort();
    }

    /// Delivers the `idx`-th in-flight message.
    pub fn deliver(&mut self, idx: usize) {
        let (to, msg) = self.in_flight.remove(idx);
        for out in self.replicas[to].on_receive(&msg) {
            self.route(to, out);
        }
    }

    /// Indices of in-flight messages addressed to the lowest-numbered
    /// receiver that has any. Deliveries to different replicas commute, so
    /// branching over this set alone reaches every quiescent outcome.
    pub fn persistent_choices(&self) -> Vec<usize> {
        let Some(first) = self.in_flight.first().map(|(to, _)| *to) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (i, (to, msg)) in self.in_flight.iter().enumerate() {
            if *to != first {
                break;
            }
            if i == 0 || self.in_flight[i - 1] != (*to, msg.clone()) {
                out.push(i);
            }
        }
        out
    }

    /// One gossip round: every replica re-broadcasts its entries, then all
    /// pending messages (including replies produced on the way) are drained.
    pub fn gossip_round(&mut self) {
        for i in 0..self.replicas.len() {
            for msg in self.replicas[i].gossip() {
                self.route(i, Outbound::Broadcast(msg));
            }
        }
        self.drain();
    }

    pub fn drain(&mut self) {
        while !self.in_flight.is_empty() {
            self.deliver(0);
        }
    }

    /// True when every replica holds the same entry for `key`.
    pub fn agree_on(&self, key: &Symbol) -> bool {
        let first = self.replicas[0].entry(key);
        self.replicas.iter().all(|r| r.entry(key) == first)
    }
}
