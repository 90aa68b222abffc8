//! Voter-model flocking. On each activation an agent broadcasts its heading
//! to its neighbours. Every `period` of its own activations it first adopts
//! the heading of one neighbour heard since its last adoption (chosen
//! nondeterministically), unless it is a zealot. Broadcasts are delivered
//! within the activation.

use super::{fixed_links, seeded_heading, ConfigError, Network, ScenarioConfig};
use crate::engine::{Model, ModelError, Step};
use crate::kernel::Metric;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Voter {
    pub heading: u16,
    /// Activations since the last adoption round, modulo the period.
    pub clock: u32,
    /// Last heading heard from each agent since the last adoption.
    pub heard: Vec<Option<u16>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VoterState {
    pub agents: Vec<Voter>,
}

#[derive(Clone, Debug)]
pub struct VoterFlocking {
    pub period: u32,
    pub zealots: Vec<bool>,
    links: Vec<Vec<usize>>,
    init: VoterState,
}

pub fn flocking_voter(cfg: &ScenarioConfig) -> Result<VoterFlocking, ConfigError> {
    cfg.require_agents(1)?;
    let step = cfg.step()?;
    if cfg.period == 0 {
        return super::invalid("period must be positive");
    }
    let n = cfg.agents;
    let mut zealots = vec![false; n];
    for &z in &cfg.zealots {
        match zealots.get_mut(z as usize) {
            Some(slot) => *slot = true,
            None => return super::invalid(format!("zealot {z} is not an agent")),
        }
    }
    let links = match cfg.network {
        Network::Range => {
            let arena = cfg.arena()?;
            let cells = (0..n).map(|i| cfg.agent_cell(&arena, i)).collect::<Result<Vec<_>, _>>()?;
            (0..n)
                .map(|i| (0..n).filter(|&j| j != i && arena.within(cells[i], cells[j], cfg.comm_range)).collect())
                .collect()
        }
        other => fixed_links(n, other),
    };
    let agents = (0..n)
        .map(|i| Voter {
            heading: cfg.initial_direction.unwrap_or_else(|| seeded_heading(i as u32, step)) % 360,
            clock: 0,
            heard: vec![None; n],
        })
        .collect();
    Ok(VoterFlocking { period: cfg.period, zealots, links, init: VoterState { agents } })
}

impl VoterFlocking {
    pub fn initial(&self) -> &VoterState {
        &self.init
    }

    fn broadcast(&self, s: &mut VoterState, i: usize) {
        let h = s.agents[i].heading;
        for &j in &self.links[i] {
            s.agents[j].heard[i] = Some(h);
        }
    }
}

impl Model for VoterFlocking {
    type State = VoterState;

    fn initial_states(&self) -> Result<Vec<VoterState>, ModelError> {
        Ok(vec![self.init.clone()])
    }

    fn successors(&self, s: &VoterState) -> Result<Vec<Step<VoterState>>, ModelError> {
        let mut out = Vec::new();
        for i in 0..s.agents.len() {
            let mut base = s.clone();
            let me = &mut base.agents[i];
            me.clock = (me.clock + 1) % self.period;
            let due = me.clock == 0 && !self.zealots[i];
            let options: Vec<(usize, u16)> = if due {
                me.heard.iter().enumerate().filter_map(|(j, h)| h.map(|h| (j, h))).collect()
            } else {
                Vec::new()
            };
            if due {
                me.heard.iter_mut().for_each(|h| *h = None);
            }
            if options.is_empty() {
                let mut next = base.clone();
                self.broadcast(&mut next, i);
                out.push(Step {
                    actor: format!("agent{i}"),
                    action: format!("broadcast {}", next.agents[i].heading),
                    target: next,
                });
            }
            for (j, h) in options {
                let mut next = base.clone();
                next.agents[i].heading = h;
                self.broadcast(&mut next, i);
                out.push(Step {
                    actor: format!("agent{i}"),
                    action: format!("adopt {h} from agent{j}, broadcast {h}"),
                    target: next,
                });
            }
        }
        Ok(out)
    }

    fn propositions(&self) -> Vec<String> {
        vec!["consensus".into()]
    }

    fn proposition(&self, name: &str, s: &VoterState) -> Option<bool> {
        (name == "consensus").then(|| s.agents.windows(2).all(|w| w[0].heading == w[1].heading))
    }

    fn describe(&self, s: &VoterState) -> String {
        format!("{s:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run;
    use crate::formula::PropExpr;
    use crate::scenarios::ScenarioKind;

    fn cfg(agents: usize) -> ScenarioConfig {
        ScenarioConfig { agents, ..ScenarioConfig::new(ScenarioKind::FlockingVoter) }
    }

    #[test]
    fn lone_agent_keeps_heading() {
        let m = flocking_voter(&cfg(1)).unwrap();
        let r = run(&m, 1, 200, None).unwrap();
        assert!(r.states.iter().all(|s| s.agents[0].heading == m.initial().agents[0].heading));
    }

    #[test]
    fn two_neighbours_always_agree() {
        let mut c = cfg(2);
        c.initial_direction = None;
        let m = flocking_voter(&c).unwrap();
        let consensus = PropExpr::atom("consensus");
        for seed in 0..50 {
            assert!(run(&m, seed, 2000, Some(&consensus)).unwrap().reached.is_some(), "seed {seed}");
        }
    }

    #[test]
    fn zealot_decides_the_outcome() {
        let mut c = cfg(6);
        c.zealots = vec![2];
        let m = flocking_voter(&c).unwrap();
        let zealot = m.initial().agents[2].heading;
        let consensus = PropExpr::atom("consensus");
        let mut reached = 0;
        for seed in 0..30 {
            let r = run(&m, seed, 5000, Some(&consensus)).unwrap();
            if r.reached.is_some() {
                reached += 1;
                assert!(r.final_state().agents.iter().all(|a| a.heading == zealot));
            }
            assert!(r.states.iter().all(|s| s.agents[2].heading == zealot));
        }
        assert!(reached > 0);
    }
}
