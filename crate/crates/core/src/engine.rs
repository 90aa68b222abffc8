//! Seeded interleaving simulator, explicit-state checker for `AG`, `AF`,
//! `EF`, `EG`, and a Monte Carlo estimator.
//!
//! Any [`Model`] can be simulated or checked. A transition is one atomic
//! step (a process action, a message delivery, a movement step, or one
//! synchronous joint step). `AG`/`AF` must hold from every initial state;
//! `EF`/`EG` hold when some initial state satisfies them, which makes
//! `AF p` fail exactly when `EG !p` holds.

use std::collections::VecDeque;
use std::fmt::Debug;
use std::hash::{Hash, Hasher};

use indexmap::IndexSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxBuildHasher;
use serde::Serialize;
use thiserror::Error;

use crate::formula::{Formula, PropExpr, Temporal};

pub type SimRng = ChaCha8Rng;

/// Name of the generator behind [`SimRng`], recorded in every trace.
pub const RNG_ALGORITHM: &str = "ChaCha8";

pub fn rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct ModelError(pub String);

impl From<crate::interp::IsplError> for ModelError {
    fn from(e: crate::interp::IsplError) -> Self {
        ModelError(e.to_string())
    }
}

impl From<crate::tuplespace::ScelError> for ModelError {
    fn from(e: crate::tuplespace::ScelError) -> Self {
        ModelError(e.to_string())
    }
}

impl From<crate::world::WorldError> for ModelError {
    fn from(e: crate::world::WorldError) -> Self {
        ModelError(e.to_string())
    }
}

impl From<crate::kernel::KernelError> for ModelError {
    fn from(e: crate::kernel::KernelError) -> Self {
        ModelError(e.to_string())
    }
}

/// One enabled transition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step<S> {
    pub actor: String,
    pub action: String,
    pub target: S,
}

pub trait Model: Sync {
    type State: Clone + Eq + Hash + Send + Sync + Debug;

    fn initial_states(&self) -> Result<Vec<Self::State>, ModelError>;

    fn initial_count(&self) -> Result<u128, ModelError> {
        Ok(self.initial_states()?.len() as u128)
    }

    fn is_initial(&self, s: &Self::State) -> Result<bool, ModelError> {
        Ok(self.initial_states()?.contains(s))
    }

    fn sample_initial(&self, rng: &mut SimRng) -> Result<Self::State, ModelError> {
        let mut all = self.initial_states()?;
        if all.is_empty() {
            return Err(ModelError("no initial state".into()));
        }
        let k = rng.gen_range(0..all.len());
        Ok(all.swap_remove(k))
    }

    /// Enabled transitions, in a deterministic order.
    fn successors(&self, s: &Self::State) -> Result<Vec<Step<Self::State>>, ModelError>;

    /// Targets of [`Model::successors`], in the same order. Override when
    /// labels are costly to build.
    fn successor_states(&self, s: &Self::State) -> Result<Vec<Self::State>, ModelError> {
        Ok(self.successors(s)?.into_iter().map(|st| st.target).collect())
    }

    fn propositions(&self) -> Vec<String>;

    /// `None` when the proposition is not defined.
    fn proposition(&self, name: &str, s: &Self::State) -> Option<bool>;

    fn describe(&self, s: &Self::State) -> String;
}

/// FNV-1a digest of a state's description, as 16 hex digits.
pub fn digest<M: Model>(model: &M, s: &M::State) -> String {
    let mut h = fnv::FnvHasher::default();
    h.write(model.describe(s).as_bytes());
    format!("{:016x}", h.finish())
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid witness: {0}")]
    InvalidWitness(String),
}

fn check_atoms<M: Model>(model: &M, p: &PropExpr) -> Result<(), EngineError> {
    let known = model.propositions();
    for a in p.atoms() {
        if !known.iter().any(|k| k == a) {
            return Err(EngineError::UnknownProposition(a.to_string()));
        }
    }
    Ok(())
}

pub fn holds<M: Model>(model: &M, p: &PropExpr, s: &M::State) -> bool {
    p.eval(&mut |a| model.proposition(a, s).unwrap_or(false))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Label {
    pub actor: String,
    pub action: String,
}

/// A path from an initial state. It is either finite (ending in the state of
/// interest or in a deadlock) or a lasso whose last state steps back to
/// `states[lasso.to]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness<S> {
    pub states: Vec<S>,
    pub labels: Vec<Label>,
    pub lasso: Option<Lasso>,
    pub deadlock: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Lasso {
    pub to: usize,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict<S> {
    Holds { witness: Option<Witness<S>> },
    Fails { witness: Option<Witness<S>> },
    ResourceLimit,
}

impl<S> Verdict<S> {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Holds { .. } => "holds",
            Verdict::Fails { .. } => "fails",
            Verdict::ResourceLimit => "resource_limit",
        }
    }

    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds { .. })
    }

    pub fn fails(&self) -> bool {
        matches!(self, Verdict::Fails { .. })
    }

    pub fn witness(&self) -> Option<&Witness<S>> {
        match self {
            Verdict::Holds { witness } | Verdict::Fails { witness } => witness.as_ref(),
            Verdict::ResourceLimit => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckResult<S> {
    pub formula: Formula,
    pub verdict: Verdict<S>,
    /// Distinct states stored by the search.
    pub states: usize,
    pub transitions: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckOptions {
    pub budget: usize,
    pub workers: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { budget: 10_000_000, workers: 1 }
    }
}

const ROOT: u32 = u32::MAX;

/// Breadth-first exploration, level by level. Successors of a level are
/// computed in parallel; states are numbered sequentially in a fixed order,
/// so ids, parents and early exits do not depend on the worker count.
struct Explorer<'m, M: Model> {
    model: &'m M,
    states: IndexSet<M::State, FxBuildHasher>,
    parent: Vec<u32>,
    /// Forward edges, only when `keep_edges`.
    edges: Vec<Vec<u32>>,
    /// Whether the state has any successor in the full model.
    live: Vec<bool>,
    transitions: usize,
    keep_edges: bool,
}

enum Explored {
    Done,
    Found(u32),
    Budget,
}

impl<'m, M: Model> Explorer<'m, M> {
    fn new(model: &'m M, keep_edges: bool) -> Self {
        Explorer {
            model,
            states: IndexSet::default(),
            parent: Vec::new(),
            edges: Vec::new(),
            live: Vec::new(),
            transitions: 0,
            keep_edges,
        }
    }

    fn insert(&mut self, s: M::State, parent: u32) -> (u32, bool) {
        let (id, fresh) = self.states.insert_full(s);
        if fresh {
            self.parent.push(parent);
            self.edges.push(Vec::new());
            self.live.push(false);
        }
        (id as u32, fresh)
    }

    /// Explores from the initial states. `expand` decides whether a state's
    /// successors are followed; `stop` ends the search at the first state
    /// (in numbering order) that satisfies it.
    fn run(
        &mut self,
        opts: &CheckOptions,
        pool: &rayon::ThreadPool,
        expand: &(dyn Fn(&M::State) -> bool + Sync),
        stop: &(dyn Fn(&M::State) -> bool + Sync),
    ) -> Result<Explored, EngineError> {
        if self.model.initial_count()? > opts.budget as u128 {
            return Ok(Explored::Budget);
        }
        let mut frontier = Vec::new();
        for s in self.model.initial_states()? {
            let hit = stop(&s);
            let (id, fresh) = self.insert(s, ROOT);
            if fresh {
                if hit {
                    return Ok(Explored::Found(id));
                }
                frontier.push(id);
            }
        }
        while !frontier.is_empty() {
            let expanded: Vec<Option<Vec<M::State>>> = {
                let states = &self.states;
                let model = self.model;
                pool.install(|| {
                    frontier
                        .par_iter()
                        .map(|&id| {
                            let s = &states[id as usize];
                            if expand(s) {
                                model.successor_states(s).map(Some)
                            } else {
                                Ok(None)
                            }
                        })
                        .collect::<Result<Vec<_>, ModelError>>()
                })?
            };
            let mut next = Vec::new();
            for (&src, succ) in frontier.iter().zip(expanded) {
                let Some(succ) = succ else { continue };
                self.live[src as usize] = !succ.is_empty();
                self.transitions += succ.len();
                for target in succ {
                    let (id, fresh) = self.insert(target, src);
                    if self.keep_edges {
                        self.edges[src as usize].push(id);
                    }
                    if fresh {
                        if stop(&self.states[id as usize]) {
                            return Ok(Explored::Found(id));
                        }
                        if self.states.len() > opts.budget {
                            return Ok(Explored::Budget);
                        }
                        next.push(id);
                    }
                }
            }
            frontier = next;
        }
        Ok(Explored::Done)
    }

    fn path_to(&self, id: u32) -> Vec<u32> {
        let mut path = vec![id];
        let mut cur = id;
        while self.parent[cur as usize] != ROOT {
            cur = self.parent[cur as usize];
            path.push(cur);
        }
        path.reverse();
        path
    }

    fn label(&self, from: u32, to: u32) -> Result<Label, EngineError> {
        let target = &self.states[to as usize];
        self.model
            .successors(&self.states[from as usize])?
            .into_iter()
            .find(|s| &s.target == target)
            .map(|s| Label { actor: s.actor, action: s.action })
            .ok_or_else(|| EngineError::InvalidWitness("successor relation is not deterministic".into()))
    }

    fn witness(&self, path: &[u32], lasso_to: Option<usize>, deadlock: bool) -> Result<Witness<M::State>, EngineError> {
        let labels = path.windows(2).map(|w| self.label(w[0], w[1])).collect::<Result<Vec<_>, _>>()?;
        let lasso = match lasso_to {
            Some(to) => Some(Lasso { to, label: self.label(*path.last().unwrap(), path[to])? }),
            None => None,
        };
        Ok(Witness { states: path.iter().map(|&i| self.states[i as usize].clone()).collect(), labels, lasso, deadlock })
    }

    /// Within the explored subgraph (edges only out of expanded states),
    /// finds a path from a root to a deadlock or a lasso. `expanded` marks
    /// states whose successors were followed.
    fn find_lasso(&self, expanded: &[bool]) -> Result<Option<Witness<M::State>>, EngineError> {
        let n = self.states.len();
        let succ = |v: usize| -> &[u32] {
            if expanded[v] {
                &self.edges[v]
            } else {
                &[]
            }
        };
        let scc = tarjan(n, &succ);
        let mut scc_size = vec![0usize; n];
        for &c in &scc {
            scc_size[c] += 1;
        }
        let core = |v: usize| -> bool {
            expanded[v] && (!self.live[v] || scc_size[scc[v]] > 1 || succ(v).contains(&(v as u32)))
        };
        // Shortest path from the roots through expanded states to a core state.
        let mut prev = vec![u32::MAX; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        for v in 0..n {
            if self.parent[v] == ROOT && expanded[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
        let mut hit = None;
        while let Some(v) = queue.pop_front() {
            if core(v) {
                hit = Some(v);
                break;
            }
            for &w in succ(v) {
                let w = w as usize;
                if expanded[w] && !seen[w] {
                    seen[w] = true;
                    prev[w] = v as u32;
                    queue.push_back(w);
                }
            }
        }
        let Some(t) = hit else { return Ok(None) };
        let mut path = vec![t as u32];
        let mut cur = t;
        while prev[cur] != u32::MAX {
            cur = prev[cur] as usize;
            path.push(cur as u32);
        }
        path.reverse();
        if !self.live[t] {
            return Ok(Some(self.witness(&path, None, true)?));
        }
        // Cycle through t inside its component.
        let anchor = path.len() - 1;
        if succ(t).contains(&(t as u32)) {
            return Ok(Some(self.witness(&path, Some(anchor), false)?));
        }
        let comp = scc[t];
        let mut back = vec![u32::MAX; n];
        let mut queue = VecDeque::new();
        let mut seen = vec![false; n];
        seen[t] = true;
        queue.push_back(t);
        let mut last = None;
        'bfs: while let Some(v) = queue.pop_front() {
            for &w in succ(v) {
                let w = w as usize;
                if w == t {
                    last = Some(v);
                    break 'bfs;
                }
                if scc[w] == comp && !seen[w] {
                    seen[w] = true;
                    back[w] = v as u32;
                    queue.push_back(w);
                }
            }
        }
        let mut cycle = Vec::new();
        let mut cur = last.expect("non-trivial component has a cycle");
        while cur != t {
            cycle.push(cur as u32);
            cur = back[cur] as usize;
        }
        cycle.reverse();
        path.extend(cycle);
        Ok(Some(self.witness(&path, Some(anchor), false)?))
    }
}

/// Iterative Tarjan; returns the component index of every vertex.
fn tarjan<'a>(n: usize, succ: &dyn Fn(usize) -> &'a [u32]) -> Vec<usize> {
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut counter = 0;
    let mut ncomp = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut k)) = call.last_mut() {
            let edges = succ(v);
            if *k < edges.len() {
                let w = edges[*k] as usize;
                *k += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(u, _)) = call.last() {
                    low[u] = low[u].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    comp
}

fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().expect("thread pool")
}

pub fn check<M: Model>(
    model: &M,
    formula: &Formula,
    opts: &CheckOptions,
) -> Result<CheckResult<M::State>, EngineError> {
    check_atoms(model, &formula.prop)?;
    let p = &formula.prop;
    let pool = pool(opts.workers);
    let sat = |s: &M::State| holds(model, p, s);
    let mut ex = Explorer::new(model, matches!(formula.op, Temporal::AF | Temporal::EG));
    let verdict = match formula.op {
        Temporal::AG => match ex.run(opts, &pool, &|_| true, &|s| !sat(s))? {
            Explored::Budget => Verdict::ResourceLimit,
            Explored::Done => Verdict::Holds { witness: None },
            Explored::Found(id) => Verdict::Fails { witness: Some(ex.witness(&ex.path_to(id), None, false)?) },
        },
        Temporal::EF => match ex.run(opts, &pool, &|_| true, &sat)? {
            Explored::Budget => Verdict::ResourceLimit,
            Explored::Done => Verdict::Fails { witness: None },
            Explored::Found(id) => Verdict::Holds { witness: Some(ex.witness(&ex.path_to(id), None, false)?) },
        },
        Temporal::AF | Temporal::EG => {
            // Both reduce to: is there a maximal path staying inside `q`?
            let inside = |s: &M::State| if formula.op == Temporal::AF { !sat(s) } else { sat(s) };
            match ex.run(opts, &pool, &inside, &|_| false)? {
                Explored::Budget => Verdict::ResourceLimit,
                Explored::Found(_) => unreachable!(),
                Explored::Done => {
                    let expanded: Vec<bool> = ex.states.iter().map(inside).collect();
                    let w = ex.find_lasso(&expanded)?;
                    match (formula.op, w) {
                        (Temporal::AF, Some(w)) => Verdict::Fails { witness: Some(w) },
                        (Temporal::AF, None) => Verdict::Holds { witness: None },
                        (_, Some(w)) => Verdict::Holds { witness: Some(w) },
                        (_, None) => Verdict::Fails { witness: None },
                    }
                }
            }
        }
    };
    Ok(CheckResult { formula: formula.clone(), verdict, states: ex.states.len(), transitions: ex.transitions })
}

/// Replays a witness against the model and confirms it demonstrates the
/// verdict: a path to `!p` (AG fails), to `p` (EF holds), or a maximal
/// path avoiding `p` (AF fails) / staying in `p` (EG holds).
pub fn validate_witness<M: Model>(model: &M, formula: &Formula, w: &Witness<M::State>) -> Result<(), EngineError> {
    let bad = |m: String| Err(EngineError::InvalidWitness(m));
    if w.states.is_empty() || w.labels.len() + 1 != w.states.len() {
        return bad("path shape".into());
    }
    if !model.is_initial(&w.states[0])? {
        return bad("first state is not initial".into());
    }
    let has_step = |from: &M::State, label: &Label, to: &M::State| -> Result<bool, EngineError> {
        Ok(model
            .successors(from)?
            .iter()
            .any(|s| &s.target == to && s.actor == label.actor && s.action == label.action))
    };
    for (i, label) in w.labels.iter().enumerate() {
        if !has_step(&w.states[i], label, &w.states[i + 1])? {
            return bad(format!("step {i} is not a transition"));
        }
    }
    let last = w.states.last().unwrap();
    if let Some(l) = &w.lasso {
        if l.to >= w.states.len() || !has_step(last, &l.label, &w.states[l.to])? {
            return bad("lasso edge is not a transition".into());
        }
    }
    if w.deadlock && !model.successors(last)?.is_empty() {
        return bad("final state is not a deadlock".into());
    }
    let p = |s: &M::State| holds(model, &formula.prop, s);
    let maximal = w.lasso.is_some() || w.deadlock;
    match formula.op {
        Temporal::AG if p(last) => bad("final state satisfies the invariant".into()),
        Temporal::EF if !p(last) => bad("final state does not satisfy the target".into()),
        Temporal::AF if !maximal || w.states.iter().any(p) => {
            bad("path is not a maximal path avoiding the target".into())
        }
        Temporal::EG if !maximal || !w.states.iter().all(p) => {
            bad("path is not a maximal path inside the proposition".into())
        }
        _ => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StateSpaceStats {
    pub states: usize,
    pub transitions: usize,
    /// Largest breadth-first depth from the initial states.
    pub diameter: usize,
    pub deadlocks: usize,
    /// Set when the budget stopped the exploration; counts are then lower bounds.
    pub partial: bool,
}

pub fn state_space_stats<M: Model>(model: &M, opts: &CheckOptions) -> Result<StateSpaceStats, EngineError> {
    let pool = pool(opts.workers);
    let mut ex = Explorer::new(model, false);
    let partial = matches!(ex.run(opts, &pool, &|_| true, &|_| false)?, Explored::Budget);
    let mut depth = vec![0usize; ex.states.len()];
    for i in 0..ex.states.len() {
        let p = ex.parent[i];
        if p != ROOT {
            depth[i] = depth[p as usize] + 1;
        }
    }
    let expanded = ex.live.len();
    Ok(StateSpaceStats {
        states: ex.states.len(),
        transitions: ex.transitions,
        diameter: depth.into_iter().max().unwrap_or(0),
        deadlocks: if partial { 0 } else { (0..expanded).filter(|&i| !ex.live[i]).count() },
        partial,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub tick: u64,
    pub actor: String,
    pub action: String,
    /// Digest of the state after the event.
    pub state: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEnd {
    MaxTicks,
    Deadlock,
    Reached,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub seed: u64,
    pub rng: &'static str,
    pub initial: String,
    pub events: Vec<TraceEvent>,
    pub end: TraceEnd,
}

impl Trace {
    /// One JSON object per line: a header, the events, and an end record.
    pub fn to_json_lines(&self, scenario: &str) -> String {
        let mut out = String::new();
        let header = serde_json::json!({
            "record": "header",
            "scenario": scenario,
            "seed": self.seed,
            "rng": self.rng,
            "initial": self.initial,
        });
        out.push_str(&header.to_string());
        out.push('\n');
        for e in &self.events {
            let mut v = serde_json::to_value(e).expect("event serialises");
            v.as_object_mut().unwrap().insert("record".into(), "event".into());
            out.push_str(&v.to_string());
            out.push('\n');
        }
        let end = serde_json::json!({
            "record": "end",
            "reason": self.end,
            "ticks": self.events.len(),
        });
        out.push_str(&end.to_string());
        out.push('\n');
        out
    }
}

#[derive(Clone, Debug)]
pub struct Run<S> {
    pub trace: Trace,
    pub states: Vec<S>,
    /// First tick at which the stop proposition held (0 = initially).
    pub reached: Option<u64>,
}

impl<S> Run<S> {
    pub fn final_state(&self) -> &S {
        self.states.last().expect("a run has an initial state")
    }
}

/// Runs one seeded simulation: each tick commits one enabled transition
/// chosen uniformly. Stops at `max_ticks`, at a deadlock, or when `stop`
/// holds.
pub fn run<M: Model>(
    model: &M,
    seed: u64,
    max_ticks: u64,
    stop: Option<&PropExpr>,
) -> Result<Run<M::State>, EngineError> {
    if let Some(p) = stop {
        check_atoms(model, p)?;
    }
    let mut r = rng(seed);
    let mut s = model.sample_initial(&mut r)?;
    let initial = digest(model, &s);
    let mut events = Vec::new();
    let mut states = vec![s.clone()];
    let mut end = TraceEnd::MaxTicks;
    let mut reached = None;
    if stop.is_some_and(|p| holds(model, p, &s)) {
        reached = Some(0);
        end = TraceEnd::Reached;
    }
    let mut tick = 0;
    while reached.is_none() && tick < max_ticks {
        let mut succ = model.successors(&s)?;
        if succ.is_empty() {
            end = TraceEnd::Deadlock;
            break;
        }
        let k = r.gen_range(0..succ.len());
        let step = succ.swap_remove(k);
        tick += 1;
        s = step.target;
        events.push(TraceEvent { tick, actor: step.actor, action: step.action, state: digest(model, &s) });
        states.push(s.clone());
        if stop.is_some_and(|p| holds(model, p, &s)) {
            reached = Some(tick);
            end = TraceEnd::Reached;
        }
    }
    Ok(Run { trace: Trace { seed, rng: RNG_ALGORITHM, initial, events, end }, states, reached })
}

pub fn simulate<M: Model>(model: &M, seed: u64, max_ticks: u64) -> Result<Trace, EngineError> {
    Ok(run(model, seed, max_ticks, None)?.trace)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub proposition: String,
    pub runs: usize,
    pub hits: usize,
    pub fraction: f64,
    pub max_ticks: u64,
    pub seed: u64,
    pub mean_ticks_to_hit: Option<f64>,
}

/// Seed of run `i` of an estimate started from `seed`.
pub fn run_seed(seed: u64, i: usize) -> u64 {
    let mut r = rng(seed);
    r.set_word_pos(2 * i as u128);
    r.gen()
}

/// Fraction of independent seeded runs in which `p` holds within `max_ticks`.
pub fn estimate<M: Model>(
    model: &M,
    p: &PropExpr,
    runs: usize,
    max_ticks: u64,
    seed: u64,
) -> Result<Estimate, EngineError> {
    check_atoms(model, p)?;
    let reached = (0..runs.max(1))
        .into_par_iter()
        .map(|i| run(model, run_seed(seed, i), max_ticks, Some(p)).map(|r| r.reached))
        .collect::<Result<Vec<_>, _>>()?;
    let hits: Vec<u64> = reached.into_iter().flatten().collect();
    let n = runs.max(1);
    Ok(Estimate {
        proposition: p.to_string(),
        runs: n,
        hits: hits.len(),
        fraction: hits.len() as f64 / n as f64,
        max_ticks,
        seed,
        mean_ticks_to_hit: (!hits.is_empty()).then(|| hits.iter().sum::<u64>() as f64 / hits.len() as f64),
    })
}
