//! Flocking on a virtual stigmergy. Every agent writes its initial heading
//! under one key; on each activation it reads the key (sending a read-repair
//! query to its neighbours) and runs `control()`: rotate one quantisation
//! step towards the stored heading when the error reaches the threshold,
//! otherwise move one cell forward. Messages travel on bounded FIFO queues.

use std::collections::VecDeque;

use super::{fixed_links, seeded_heading, ConfigError, Network, ScenarioConfig};
use crate::engine::{Model, ModelError, Step};
use crate::kernel::{AgentId, Direction, Metric, Pos, Symbol, Value};
use crate::stigmergy::{Outbound, Replica, StigMessage};
use crate::world::Arena;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StigAgent {
    pub pos: Pos,
    pub heading: u16,
    pub replica: Replica,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StigState {
    pub agents: Vec<StigAgent>,
    /// Sender `i` to receiver `j` at `i * n + j`.
    pub queues: Vec<VecDeque<StigMessage>>,
}

#[derive(Clone, Debug)]
pub struct StigFlocking {
    pub arena: Arena,
    pub key: Symbol,
    pub step: u16,
    pub threshold: u16,
    pub capacity: usize,
    pub network: Network,
    pub comm_range: i64,
    links: Vec<Vec<usize>>,
    init: StigState,
}

fn heading_value(h: u16) -> Value {
    Value::Dir(Direction::Degrees(h))
}

fn heading_of(v: &Value) -> Option<u16> {
    match v {
        Value::Dir(Direction::Degrees(d)) => Some(*d),
        _ => None,
    }
}

/// Signed angular error from `from` to `to`, in `[-180, 180)`.
pub fn angle_error(from: u16, to: u16) -> i32 {
    (i32::from(to) - i32::from(from) + 540).rem_euclid(360) - 180
}

pub fn flocking_vstig(cfg: &ScenarioConfig) -> Result<StigFlocking, ConfigError> {
    cfg.require_agents(1)?;
    let step = cfg.step()?;
    let arena = cfg.arena()?;
    if cfg.queue_capacity == 0 {
        return super::invalid("queue_capacity must be positive");
    }
    let n = cfg.agents;
    let mut model = StigFlocking {
        arena,
        key: Symbol::new(&cfg.key),
        step,
        threshold: cfg.threshold(),
        capacity: cfg.queue_capacity,
        network: cfg.network,
        comm_range: cfg.comm_range,
        links: fixed_links(n, cfg.network),
        init: StigState { agents: Vec::new(), queues: vec![VecDeque::new(); n * n] },
    };
    let mut state = StigState { agents: Vec::new(), queues: vec![VecDeque::new(); n * n] };
    for i in 0..n {
        let heading = cfg.initial_direction.unwrap_or_else(|| seeded_heading(i as u32, step)) % 360;
        state.agents.push(StigAgent {
            pos: cfg.agent_cell(&arena, i)?,
            heading,
            replica: Replica::new(AgentId(i as u32)),
        });
    }
    for i in 0..n {
        let h = state.agents[i].heading;
        let msg = state.agents[i].replica.put(model.key.clone(), heading_value(h));
        model.broadcast(&mut state, i, &msg);
    }
    model.init = state;
    Ok(model)
}

impl StigFlocking {
    pub fn initial(&self) -> &StigState {
        &self.init
    }

    pub fn neighbours(&self, s: &StigState, i: usize) -> Vec<usize> {
        match self.network {
            Network::Range => (0..s.agents.len())
                .filter(|&j| j != i && self.arena.within(s.agents[i].pos, s.agents[j].pos, self.comm_range))
                .collect(),
            _ => self.links[i].clone(),
        }
    }

    fn send(&self, s: &mut StigState, from: usize, to: usize, msg: StigMessage) {
        let n = s.agents.len();
        let q = &mut s.queues[from * n + to];
        if q.len() < self.capacity {
            q.push_back(msg);
        }
    }

    fn broadcast(&self, s: &mut StigState, from: usize, msg: &StigMessage) {
        for j in self.neighbours(s, from) {
            self.send(s, from, j, msg.clone());
        }
    }

    /// Whether every replica holds the same entry for the key.
    pub fn agreed(&self, s: &StigState) -> bool {
        let entries: Vec<_> = s.agents.iter().map(|a| a.replica.entry(&self.key)).collect();
        entries.windows(2).all(|w| w[0] == w[1])
    }
}

impl Model for StigFlocking {
    type State = StigState;

    fn initial_states(&self) -> Result<Vec<StigState>, ModelError> {
        Ok(vec![self.init.clone()])
    }

    fn successors(&self, s: &StigState) -> Result<Vec<Step<StigState>>, ModelError> {
        let n = s.agents.len();
        let mut out = Vec::new();
        for i in 0..n {
            let mut next = s.clone();
            let (stored, query) = {
                let (v, q) = next.agents[i].replica.get(&self.key);
                (v.and_then(heading_of), q)
            };
            self.broadcast(&mut next, i, &query);
            let agent = &mut next.agents[i];
            let err = stored.map_or(0, |t| angle_error(agent.heading, t));
            let action = if err != 0 && err.unsigned_abs() >= u32::from(self.threshold) {
                let turn = if err > 0 { i32::from(self.step) } else { -i32::from(self.step) };
                agent.heading = (i32::from(agent.heading) + turn).rem_euclid(360) as u16;
                format!("control: rotate to {}", agent.heading)
            } else {
                agent.pos = self.arena.forward(agent.pos, agent.heading);
                format!("control: forward to {}", agent.pos)
            };
            out.push(Step { actor: format!("agent{i}"), action, target: next });
        }
        for from in 0..n {
            for to in 0..n {
                if s.queues[from * n + to].is_empty() {
                    continue;
                }
                let mut next = s.clone();
                let msg = next.queues[from * n + to].pop_front().expect("non-empty");
                let kind = match &msg {
                    StigMessage::Write { entry, .. } => format!("write ts={} writer={}", entry.ts, entry.writer),
                    StigMessage::Query { belief, .. } => match belief {
                        Some(e) => format!("query ts={} writer={}", e.ts, e.writer),
                        None => "query empty".into(),
                    },
                };
                for o in next.agents[to].replica.on_receive(&msg) {
                    match o {
                        Outbound::Broadcast(m) => self.broadcast(&mut next, to, &m),
                        Outbound::Reply(who, m) => self.send(&mut next, to, who.0 as usize, m),
                    }
                }
                out.push(Step {
                    actor: format!("agent{to}"),
                    action: format!("receive {kind} from agent{from}"),
                    target: next,
                });
            }
        }
        Ok(out)
    }

    fn propositions(&self) -> Vec<String> {
        ["agree", "consensus", "quiet"].map(String::from).to_vec()
    }

    fn proposition(&self, name: &str, s: &StigState) -> Option<bool> {
        Some(match name {
            "agree" => self.agreed(s),
            "consensus" => s.agents.windows(2).all(|w| w[0].heading == w[1].heading),
            "quiet" => s.queues.iter().all(VecDeque::is_empty),
            _ => return None,
        })
    }

    fn describe(&self, s: &StigState) -> String {
        format!("{s:?}")
    }
}
