//! Arena geometry, neighbourhoods and movement actuation.
//!
//! Range tests use Euclidean distance on cells (minimal wrap-around deltas on
//! a torus). Movement is 4-directional, one cell per activation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{AgentId, Metric, Pos};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WorldError {
    #[error("arena dimensions must be positive, got {0}x{1}")]
    EmptyArena(i32, i32),
    #[error("position {0} lies outside the {1}x{2} arena")]
    OutOfArena(Pos, i32, i32),
    #[error("agent {0} is not placed in the world")]
    UnknownAgent(AgentId),
    #[error("agent {0} has no active movement intent")]
    NoIntent(AgentId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    #[default]
    Bounded,
    Toroidal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Step4 {
    Up,
    Down,
    Left,
    Right,
}

impl Step4 {
    pub const ALL: [Step4; 4] = [Step4::Up, Step4::Down, Step4::Left, Step4::Right];

    fn delta(self) -> (i32, i32) {
        match self {
            Step4::Up => (0, 1),
            Step4::Down => (0, -1),
            Step4::Left => (-1, 0),
            Step4::Right => (1, 0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Arena {
    width: i32,
    height: i32,
    topology: Topology,
}

impl Arena {
    pub fn new(width: i32, height: i32, topology: Topology) -> Result<Self, WorldError> {
        if width < 1 || height < 1 {
            return Err(WorldError::EmptyArena(width, height));
        }
        Ok(Arena { width, height, topology })
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn contains(&self, p: Pos) -> bool {
        (1..=self.width).contains(&p.x) && (1..=self.height).contains(&p.y)
    }

    pub fn check(&self, p: Pos) -> Result<Pos, WorldError> {
        if self.contains(p) {
            Ok(p)
        } else {
            Err(WorldError::OutOfArena(p, self.width, self.height))
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Pos> + '_ {
        (1..=self.height).flat_map(move |y| (1..=self.width).map(move |x| Pos::new(x, y)))
    }

    /// Signed per-axis offset from `from` to `to`, shortest way round on a torus.
    pub fn delta(&self, from: Pos, to: Pos) -> (i32, i32) {
        let (mut dx, mut dy) = (to.x - from.x, to.y - from.y);
        if self.topology == Topology::Toroidal {
            dx = wrap_delta(dx, self.width);
            dy = wrap_delta(dy, self.height);
        }
        (dx, dy)
    }

    pub fn dist_sq(&self, a: Pos, b: Pos) -> i64 {
        let (dx, dy) = self.delta(a, b);
        i64::from(dx) * i64::from(dx) + i64::from(dy) * i64::from(dy)
    }

    /// Cell one step away, or `None` when a bounded arena ends there.
    pub fn step(&self, p: Pos, dir: Step4) -> Option<Pos> {
        let (dx, dy) = dir.delta();
        self.offset(p, dx, dy)
    }

    fn offset(&self, p: Pos, dx: i32, dy: i32) -> Option<Pos> {
        let q = Pos::new(p.x + dx, p.y + dy);
        match self.topology {
            Topology::Bounded => self.contains(q).then_some(q),
            Topology::Toroidal => {
                Some(Pos::new((q.x - 1).rem_euclid(self.width) + 1, (q.y - 1).rem_euclid(self.height) + 1))
            }
        }
    }

    /// Valid 4-neighbour cells, in Up/Down/Left/Right order, deduplicated.
    pub fn walk_options(&self, p: Pos) -> Vec<Pos> {
        let mut out = Vec::with_capacity(4);
        for d in Step4::ALL {
            if let Some(q) = self.step(p, d) {
                if q != p && !out.contains(&q) {
                    out.push(q);
                }
            }
        }
        out
    }

    /// One cell along a heading in degrees (0 = +x, 90 = +y). A bounded
    /// arena keeps the agent in place when the move would leave it.
    pub fn forward(&self, p: Pos, degrees: u16) -> Pos {
        let rad = f64::from(degrees).to_radians();
        let dx = rad.cos().round() as i32;
        let dy = rad.sin().round() as i32;
        self.offset(p, dx, dy).unwrap_or(p)
    }

    /// Next cell on a shortest 4-directional path: x axis first, then y.
    pub fn step_toward(&self, from: Pos, to: Pos) -> Pos {
        let (dx, dy) = self.delta(from, to);
        let (sx, sy) = if dx != 0 { (dx.signum(), 0) } else { (0, dy.signum()) };
        self.offset(from, sx, sy).unwrap_or(from)
    }

    /// Number of 4-directional steps between two cells.
    pub fn path_len(&self, a: Pos, b: Pos) -> i32 {
        let (dx, dy) = self.delta(a, b);
        dx.abs() + dy.abs()
    }
}

fn wrap_delta(d: i32, n: i32) -> i32 {
    let d = d.rem_euclid(n);
    if d > n / 2 {
        d - n
    } else {
        d
    }
}

impl Metric for Arena {
    fn within(&self, a: Pos, b: Pos, range: i64) -> bool {
        range >= 0 && self.dist_sq(a, b) <= range * range
    }
}

/// Agents other than `me` within `range` of it.
pub fn neighbours(arena: &Arena, positions: &BTreeMap<AgentId, Pos>, me: AgentId, range: i64) -> BTreeSet<AgentId> {
    let Some(&here) = positions.get(&me) else {
        return BTreeSet::new();
    };
    positions.iter().filter(|(id, p)| **id != me && arena.within(here, **p, range)).map(|(id, _)| *id).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Intent {
    Goto(Pos),
    Walk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveEvent {
    Stepped { agent: AgentId, to: Pos },
    Reached { agent: AgentId, at: Pos },
}

/// Positions and the (at most one) movement intent of each agent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct World {
    pub arena: Arena,
    positions: BTreeMap<AgentId, Pos>,
    intents: BTreeMap<AgentId, Intent>,
}

impl World {
    pub fn new(arena: Arena) -> Self {
        World { arena, positions: BTreeMap::new(), intents: BTreeMap::new() }
    }

    pub fn place(&mut self, agent: AgentId, p: Pos) -> Result<(), WorldError> {
        self.positions.insert(agent, self.arena.check(p)?);
        Ok(())
    }

    pub fn position(&self, agent: AgentId) -> Option<Pos> {
        self.positions.get(&agent).copied()
    }

    pub fn positions(&self) -> &BTreeMap<AgentId, Pos> {
        &self.positions
    }

    pub fn intent(&self, agent: AgentId) -> Option<Intent> {
        self.intents.get(&agent).copied()
    }

    /// Replaces any previous intent. Targets outside the arena are rejected here.
    pub fn set_intent(&mut self, agent: AgentId, intent: Intent) -> Result<(), WorldError> {
        if !self.positions.contains_key(&agent) {
            return Err(WorldError::UnknownAgent(agent));
        }
        if let Intent::Goto(p) = intent {
            self.arena.check(p)?;
        }
        self.intents.insert(agent, intent);
        Ok(())
    }

    pub fn neighbours(&self, me: AgentId, range: i64) -> BTreeSet<AgentId> {
        neighbours(&self.arena, &self.positions, me, range)
    }

    /// One activation of the agent's intent. A walk picks one of the valid
    /// 4-neighbours through `choose` (given the option count, returns an index).
    pub fn advance_movement(
        &mut self,
        agent: AgentId,
        choose: impl FnOnce(usize) -> usize,
    ) -> Result<Vec<MoveEvent>, WorldError> {
        let here = self.position(agent).ok_or(WorldError::UnknownAgent(agent))?;
        let intent = self.intent(agent).ok_or(WorldError::NoIntent(agent))?;
        let mut events = Vec::new();
        match intent {
            Intent::Walk => {
                let options = self.arena.walk_options(here);
                if !options.is_empty() {
                    let to = options[choose(options.len()) % options.len()];
                    self.positions.insert(agent, to);
                    events.push(MoveEvent::Stepped { agent, to });
                }
                self.intents.remove(&agent);
            }
            Intent::Goto(target) => {
                let mut at = here;
                if at != target {
                    at = self.arena.step_toward(here, target);
                    self.positions.insert(agent, at);
                    events.push(MoveEvent::Stepped { agent, to: at });
                }
                if at == target {
                    events.push(MoveEvent::Reached { agent, at });
                    self.intents.remove(&agent);
                }
            }
        }
        Ok(events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bounded(n: i32) -> Arena {
        Arena::new(n, n, Topology::Bounded).unwrap()
    }

    fn torus(n: i32) -> Arena {
        Arena::new(n, n, Topology::Toroidal).unwrap()
    }

    fn placed(list: &[(u32, (i32, i32))]) -> BTreeMap<AgentId, Pos> {
        list.iter().map(|(id, (x, y))| (AgentId(*id), Pos::new(*x, *y))).collect()
    }

    #[test]
    fn range_zero_only_colocated() {
        let pos = placed(&[(1, (2, 2)), (2, (2, 2)), (3, (2, 3))]);
        let n = neighbours(&bounded(10), &pos, AgentId(1), 0);
        assert_eq!(n.into_iter().collect::<Vec<_>>(), vec![AgentId(2)]);
    }

    #[test]
    fn euclidean_two_cells_apart() {
        let pos = placed(&[(1, (1, 1)), (2, (1, 3)), (3, (2, 3))]);
        let n = neighbours(&bounded(10), &pos, AgentId(1), 2);
        // (2,3) is at sqrt(5) > 2
        assert_eq!(n.into_iter().collect::<Vec<_>>(), vec![AgentId(2)]);
    }

    #[test]
    fn torus_wraps_distance() {
        let pos = placed(&[(1, (1, 4)), (2, (10, 4))]);
        assert!(neighbours(&torus(10), &pos, AgentId(1), 1).contains(&AgentId(2)));
        assert!(!neighbours(&bounded(10), &pos, AgentId(1), 1).contains(&AgentId(2)));
        assert_eq!(torus(10).step(Pos::new(1, 4), Step4::Left), Some(Pos::new(10, 4)));
        assert_eq!(bounded(10).step(Pos::new(3, 10), Step4::Up), None);
    }

    #[test]
    fn goto_own_cell_reaches_immediately() {
        let mut w = World::new(bounded(3));
        w.place(AgentId(1), Pos::new(2, 2)).unwrap();
        w.set_intent(AgentId(1), Intent::Goto(Pos::new(2, 2))).unwrap();
        let ev = w.advance_movement(AgentId(1), |_| 0).unwrap();
        assert_eq!(ev, vec![MoveEvent::Reached { agent: AgentId(1), at: Pos::new(2, 2) }]);
        assert_eq!(w.intent(AgentId(1)), None);
    }

    #[test]
    fn goto_two_cells_takes_two_activations() {
        let mut w = World::new(bounded(5));
        w.place(AgentId(1), Pos::new(1, 1)).unwrap();
        w.set_intent(AgentId(1), Intent::Goto(Pos::new(3, 1))).unwrap();
        let first = w.advance_movement(AgentId(1), |_| 0).unwrap();
        assert_eq!(first, vec![MoveEvent::Stepped { agent: AgentId(1), to: Pos::new(2, 1) }]);
        let second = w.advance_movement(AgentId(1), |_| 0).unwrap();
        assert!(second.contains(&MoveEvent::Reached { agent: AgentId(1), at: Pos::new(3, 1) }));
    }

    #[test]
    fn goto_outside_rejected() {
        let mut w = World::new(bounded(3));
        w.place(AgentId(1), Pos::new(1, 1)).unwrap();
        assert!(w.set_intent(AgentId(1), Intent::Goto(Pos::new(4, 1))).is_err());
        assert!(w.place(AgentId(2), Pos::new(0, 1)).is_err());
    }

    #[test]
    fn walk_moves_to_valid_neighbour() {
        let arena = bounded(3);
        assert_eq!(arena.walk_options(Pos::new(1, 1)), vec![Pos::new(1, 2), Pos::new(2, 1)]);
        assert_eq!(arena.walk_options(Pos::new(2, 2)).len(), 4);
        let mut w = World::new(arena);
        w.place(AgentId(1), Pos::new(1, 1)).unwrap();
        w.set_intent(AgentId(1), Intent::Walk).unwrap();
        let ev = w.advance_movement(AgentId(1), |n| n - 1).unwrap();
        assert_eq!(ev, vec![MoveEvent::Stepped { agent: AgentId(1), to: Pos::new(2, 1) }]);
    }

    #[test]
    fn forward_follows_heading() {
        let a = bounded(5);
        assert_eq!(a.forward(Pos::new(3, 3), 0), Pos::new(4, 3));
        assert_eq!(a.forward(Pos::new(3, 3), 90), Pos::new(3, 4));
        assert_eq!(a.forward(Pos::new(3, 3), 225), Pos::new(2, 2));
        assert_eq!(a.forward(Pos::new(5, 3), 0), Pos::new(5, 3));
        assert_eq!(torus(5).forward(Pos::new(5, 3), 0), Pos::new(1, 3));
    }

    proptest! {
        #[test]
        fn neighbour_relation_symmetric(
            a in (1i32..8, 1i32..8), b in (1i32..8, 1i32..8), r in 0i64..5, wrap in any::<bool>()
        ) {
            let arena = if wrap { torus(7) } else { bounded(7) };
            let pos = placed(&[(1, a), (2, b)]);
            prop_assert_eq!(
                neighbours(&arena, &pos, AgentId(1), r).contains(&AgentId(2)),
                neighbours(&arena, &pos, AgentId(2), r).contains(&AgentId(1))
            );
        }

        #[test]
        fn goto_terminates_and_stays_inside(
            from in (1i32..7, 1i32..6), to in (1i32..7, 1i32..6), wrap in any::<bool>()
        ) {
            let arena = Arena::new(6, 5, if wrap { Topology::Toroidal } else { Topology::Bounded }).unwrap();
            let mut w = World::new(arena);
            w.place(AgentId(1), Pos::new(from.0, from.1)).unwrap();
            w.set_intent(AgentId(1), Intent::Goto(Pos::new(to.0, to.1))).unwrap();
            let mut steps = 0;
            while w.intent(AgentId(1)).is_some() {
                let before = arena.path_len(w.position(AgentId(1)).unwrap(), Pos::new(to.0, to.1));
                w.advance_movement(AgentId(1), |_| 0).unwrap();
                let p = w.position(AgentId(1)).unwrap();
                prop_assert!(arena.contains(p));
                let after = arena.path_len(p, Pos::new(to.0, to.1));
                prop_assert!(after < before || after == 0);
                steps += 1;
                prop_assert!(steps <= 6 + 5 + 1);
            }
        }

        #[test]
        fn walk_and_forward_stay_inside(x in 1i32..6, y in 1i32..6, deg in 0u16..8, wrap in any::<bool>()) {
            let arena = if wrap { torus(5) } else { bounded(5) };
            let p = Pos::new(x, y);
            for q in arena.walk_options(p) {
                prop_assert!(arena.contains(q));
            }
            prop_assert!(arena.contains(arena.forward(p, deg * 45)));
        }
    }
}
