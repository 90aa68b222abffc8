//! Broadcast foraging over a lossy message network.
//!
//! Foragers random-walk and broadcast a pick-up request (their id and cell)
//! to every item within `comm_range`. An item answers each request whose
//! sender is within `sense_range` of it with a response carrying the
//! requester's id; it keeps answering after it has been collected. A
//! forager receiving a response for its own id is credited with the item.
//! Nothing stops two foragers from both being credited.
//!
//! Each sender/receiver pair has a FIFO queue of `queue_capacity` messages;
//! sending into a full queue drops the message. A forager has at most one
//! request in flight.

use std::collections::VecDeque;

use super::{ConfigError, ScenarioConfig};
use crate::engine::{Model, ModelError, Step};
use crate::kernel::{AgentId, Metric, Pos};
use crate::world::Arena;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Forager {
    pub pos: Pos,
    /// `credited[j]`: this forager was told it picked item `j`.
    pub credited: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BroadcastState {
    pub foragers: Vec<Forager>,
    /// Forager `f` to item `j` at `f * items + j`: (requester, requester cell).
    pub requests: Vec<VecDeque<(AgentId, Pos)>>,
    /// Item `j` to forager `f` at `j * foragers + f`: requester id.
    pub responses: Vec<VecDeque<AgentId>>,
}

#[derive(Clone, Debug)]
pub struct BroadcastForaging {
    pub arena: Arena,
    pub items: Vec<Pos>,
    pub comm_range: i64,
    pub sense_range: i64,
    pub capacity: usize,
    pub walk: bool,
    init: BroadcastState,
}

pub fn foraging_broadcast(cfg: &ScenarioConfig) -> Result<BroadcastForaging, ConfigError> {
    cfg.require_agents(1)?;
    let arena = cfg.arena()?;
    let items = cfg.item_cells(&arena)?;
    if items.is_empty() {
        return super::invalid("foraging_broadcast needs at least one item");
    }
    if cfg.queue_capacity == 0 {
        return super::invalid("queue_capacity must be positive");
    }
    let foragers = (0..cfg.agents)
        .map(|i| Ok(Forager { pos: cfg.agent_cell(&arena, i)?, credited: vec![false; items.len()] }))
        .collect::<Result<Vec<_>, ConfigError>>()?;
    let n = foragers.len();
    let m = items.len();
    Ok(BroadcastForaging {
        arena,
        comm_range: cfg.comm_range,
        sense_range: cfg.sense_range,
        capacity: cfg.queue_capacity,
        walk: cfg.walk,
        init: BroadcastState {
            foragers,
            requests: vec![VecDeque::new(); n * m],
            responses: vec![VecDeque::new(); n * m],
        },
        items,
    })
}

impl BroadcastForaging {
    pub fn initial(&self) -> &BroadcastState {
        &self.init
    }

    fn item_name(j: usize) -> String {
        format!("item{j}")
    }

    fn forager_name(f: usize) -> String {
        format!("forager{f}")
    }

    /// Number of foragers credited with each item.
    pub fn credits(&self, s: &BroadcastState) -> Vec<usize> {
        (0..self.items.len()).map(|j| s.foragers.iter().filter(|f| f.credited[j]).count()).collect()
    }
}

impl Model for BroadcastForaging {
    type State = BroadcastState;

    fn initial_states(&self) -> Result<Vec<BroadcastState>, ModelError> {
        Ok(vec![self.init.clone()])
    }

    fn successors(&self, s: &BroadcastState) -> Result<Vec<Step<BroadcastState>>, ModelError> {
        let n = s.foragers.len();
        let m = self.items.len();
        let mut out = Vec::new();
        for (f, forager) in s.foragers.iter().enumerate() {
            if self.walk {
                for cell in self.arena.walk_options(forager.pos) {
                    let mut next = s.clone();
                    next.foragers[f].pos = cell;
                    out.push(Step { actor: Self::forager_name(f), action: format!("walk {cell}"), target: next });
                }
            }
            let idle = (0..m).all(|j| s.requests[f * m + j].is_empty());
            if idle {
                let mut next = s.clone();
                let mut heard = Vec::new();
                for (j, item) in self.items.iter().enumerate() {
                    if self.arena.within(forager.pos, *item, self.comm_range) {
                        let q = &mut next.requests[f * m + j];
                        if q.len() < self.capacity {
                            q.push_back((AgentId(f as u32), forager.pos));
                            heard.push(Self::item_name(j));
                        }
                    }
                }
                out.push(Step {
                    actor: Self::forager_name(f),
                    action: format!("request from {} to [{}]", forager.pos, heard.join(", ")),
                    target: next,
                });
            }
        }
        for (j, item) in self.items.iter().enumerate() {
            for f in 0..n {
                if let Some(&(who, at)) = s.requests[f * m + j].front() {
                    let mut next = s.clone();
                    next.requests[f * m + j].pop_front();
                    let mut action = format!("receive request of {who} at {at}");
                    if self.arena.within(at, *item, self.sense_range) {
                        let q = &mut next.responses[j * n + f];
                        if q.len() < self.capacity {
                            q.push_back(who);
                            action.push_str(", respond");
                        } else {
                            action.push_str(", response dropped");
                        }
                    }
                    out.push(Step { actor: Self::item_name(j), action, target: next });
                }
            }
        }
        for f in 0..n {
            for j in 0..m {
                if let Some(&who) = s.responses[j * n + f].front() {
                    let mut next = s.clone();
                    next.responses[j * n + f].pop_front();
                    let mine = who == AgentId(f as u32);
                    if mine {
                        next.foragers[f].credited[j] = true;
                    }
                    out.push(Step {
                        actor: Self::forager_name(f),
                        action: format!(
                            "receive response from {}{}",
                            Self::item_name(j),
                            if mine { ", pick up" } else { "" }
                        ),
                        target: next,
                    });
                }
            }
        }
        Ok(out)
    }

    fn propositions(&self) -> Vec<String> {
        ["double_credit", "collected", "all_collected", "quiet"].map(String::from).to_vec()
    }

    fn proposition(&self, name: &str, s: &BroadcastState) -> Option<bool> {
        let credits = self.credits(s);
        Some(match name {
            "double_credit" => credits.iter().any(|&c| c >= 2),
            "collected" => credits.iter().any(|&c| c >= 1),
            "all_collected" => credits.iter().all(|&c| c >= 1),
            "quiet" => s.requests.iter().all(VecDeque::is_empty) && s.responses.iter().all(VecDeque::is_empty),
            _ => return None,
        })
    }

    fn describe(&self, s: &BroadcastState) -> String {
        format!("{s:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{check, run, validate_witness, CheckOptions};
    use crate::formula::{Formula, PropExpr};
    use crate::scenarios::ScenarioKind;

    fn cfg(agents: usize, items: Vec<[i32; 2]>, positions: Vec<[i32; 2]>) -> ScenarioConfig {
        ScenarioConfig {
            agents,
            width: 3,
            height: 3,
            items,
            positions,
            ..ScenarioConfig::new(ScenarioKind::ForagingBroadcast)
        }
    }

    #[test]
    fn co_located_forager_picks_up() {
        let model = foraging_broadcast(&cfg(1, vec![[2, 2]], vec![[2, 2]])).unwrap();
        let p = PropExpr::atom("collected");
        for seed in 0..20 {
            let r = run(&model, seed, 500, Some(&p)).unwrap();
            assert!(r.reached.is_some(), "seed {seed}");
        }
    }

    #[test]
    fn never_co_located_never_collects() {
        let mut c = cfg(1, vec![[3, 3]], vec![[1, 1]]);
        c.walk = false;
        let model = foraging_broadcast(&c).unwrap();
        let f: Formula = "AG !collected".parse().unwrap();
        assert!(check(&model, &f, &CheckOptions::default()).unwrap().verdict.holds());
    }

    #[test]
    fn double_credit_is_reachable() {
        let model = foraging_broadcast(&cfg(2, vec![[2, 2]], vec![])).unwrap();
        let f: Formula = "EF double_credit".parse().unwrap();
        let r = check(&model, &f, &CheckOptions::default()).unwrap();
        assert!(r.verdict.holds());
        validate_witness(&model, &f, r.verdict.witness().unwrap()).unwrap();
    }

    #[test]
    fn full_queue_drops() {
        let mut c = cfg(1, vec![[1, 1]], vec![[1, 1]]);
        c.queue_capacity = 1;
        c.walk = false;
        let model = foraging_broadcast(&c).unwrap();
        let mut s = model.initial().clone();
        s.responses[0].push_back(AgentId(0));
        s.requests[0].push_back((AgentId(0), Pos::new(1, 1)));
        let delivered = model.successors(&s).unwrap().into_iter().find(|st| st.actor == "item0").unwrap();
        assert!(delivered.action.ends_with("response dropped"));
        assert_eq!(delivered.target.responses[0].len(), 1);
    }
}
