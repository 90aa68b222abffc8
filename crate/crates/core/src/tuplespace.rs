//! Attribute-based tuple-space components.
//!
//! Each component owns a multiset repository, exposes an attribute map and
//! runs one process. Actions address either the component's own repository
//! or every *other* component whose attributes satisfy a predicate. `put`
//! never blocks; `get` and `qry` are disabled when nothing matches, and
//! otherwise offer one outcome per (component, distinct matching tuple).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::{Arc, Mutex};

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::kernel::{AgentId, AttributeMap, Bindings, KernelError, Predicate, Slot, Symbol, Template, Tuple, Value};
use crate::world::{Arena, Intent};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScelError {
    #[error("no component with id {0}")]
    UnknownComponent(AgentId),
    #[error("component {0} appears twice")]
    DuplicateComponent(AgentId),
    #[error("unbound variable `{0}`")]
    UnboundVariable(Symbol),
    #[error("component {actor} has no attribute `{name}`")]
    MissingAttribute { actor: AgentId, name: Symbol },
    #[error("cannot add to a {0} value")]
    NotAnInteger(&'static str),
    #[error("no process definition named `{0}`")]
    UnknownDefinition(Symbol),
    #[error("`{name}` expects {expected} arguments, got {got}")]
    Arity { name: Symbol, expected: usize, got: usize },
    #[error("process `{0}` recurses without a guarding action")]
    UnguardedRecursion(Symbol),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Expression inside an action. `Own` reads the acting component's attribute.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Lit(Value),
    Var(Symbol),
    Own(Symbol),
    Add(Box<Expr>, i64),
}

impl Expr {
    pub fn lit(v: impl Into<Value>) -> Self {
        Expr::Lit(v.into())
    }

    pub fn var(name: &str) -> Self {
        Expr::Var(Symbol::new(name))
    }

    pub fn own(name: &str) -> Self {
        Expr::Own(Symbol::new(name))
    }

    pub fn plus(self, k: i64) -> Self {
        Expr::Add(Box::new(self), k)
    }

    fn eval(&self, actor: AgentId, attrs: &AttributeMap) -> Result<Value, ScelError> {
        match self {
            Expr::Lit(v) => Ok(v.clone()),
            Expr::Var(n) => Err(ScelError::UnboundVariable(n.clone())),
            Expr::Own(n) => attrs.get(n).cloned().ok_or_else(|| ScelError::MissingAttribute { actor, name: n.clone() }),
            Expr::Add(e, k) => match e.eval(actor, attrs)? {
                Value::Int(i) => Ok(Value::Int(i + k)),
                other => Err(ScelError::NotAnInteger(other.kind())),
            },
        }
    }

    fn subst(&self, b: &Bindings) -> Expr {
        match self {
            Expr::Var(n) => b.get(n).map_or_else(|| self.clone(), |v| Expr::Lit(v.clone())),
            Expr::Add(e, k) => Expr::Add(Box::new(e.subst(b)), *k),
            other => other.clone(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Var(n) => write!(f, "{n}"),
            Expr::Own(n) => write!(f, "this.{n}"),
            Expr::Add(e, k) => write!(f, "{e}+{k}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatSlot {
    Expr(Expr),
    Bind(Symbol),
}

impl PatSlot {
    pub fn bind(name: &str) -> Self {
        PatSlot::Bind(Symbol::new(name))
    }
}

impl From<Expr> for PatSlot {
    fn from(e: Expr) -> Self {
        PatSlot::Expr(e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    SelfRepo,
    Where(Predicate),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::SelfRepo => f.write_str("self"),
            Target::Where(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Put(Target, Vec<Expr>),
    Get(Target, Vec<PatSlot>),
    Qry(Target, Vec<PatSlot>),
}

impl Action {
    fn binders(&self) -> Vec<Symbol> {
        match self {
            Action::Put(..) => Vec::new(),
            Action::Get(_, slots) | Action::Qry(_, slots) => slots
                .iter()
                .filter_map(|s| match s {
                    PatSlot::Bind(n) => Some(n.clone()),
                    PatSlot::Expr(_) => None,
                })
                .collect(),
        }
    }

    fn subst(&self, b: &Bindings) -> Action {
        let target = |t: &Target| match t {
            Target::SelfRepo => Target::SelfRepo,
            Target::Where(p) => Target::Where(p.bind(b)),
        };
        let slots = |s: &[PatSlot]| {
            s.iter()
                .map(|s| match s {
                    PatSlot::Expr(e) => PatSlot::Expr(e.subst(b)),
                    bind => bind.clone(),
                })
                .collect()
        };
        match self {
            Action::Put(t, es) => Action::Put(target(t), es.iter().map(|e| e.subst(b)).collect()),
            Action::Get(t, s) => Action::Get(target(t), slots(s)),
            Action::Qry(t, s) => Action::Qry(target(t), slots(s)),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, target) = match self {
            Action::Put(t, _) => ("put", t),
            Action::Get(t, _) => ("get", t),
            Action::Qry(t, _) => ("qry", t),
        };
        write!(f, "{name}(")?;
        match self {
            Action::Put(_, es) => {
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{e}")?;
                }
            }
            Action::Get(_, s) | Action::Qry(_, s) => {
                for (i, slot) in s.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    match slot {
                        PatSlot::Expr(e) => write!(f, "{e}")?,
                        PatSlot::Bind(n) => write!(f, "?{n}")?,
                    }
                }
            }
        }
        write!(f, ")@{target}")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Process {
    Nil,
    Prefix(Arc<Action>, Arc<Process>),
    Choice(Vec<Process>),
    Call(Symbol, Vec<Expr>),
}

impl Process {
    pub fn then(action: Action, next: Process) -> Self {
        Process::Prefix(Arc::new(action), Arc::new(next))
    }

    pub fn call(name: &str, args: Vec<Expr>) -> Self {
        Process::Call(Symbol::new(name), args)
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Process::Nil)
    }

    /// Replaces free variables; binders of a prefix shadow its continuation.
    pub fn subst(&self, b: &Bindings) -> Process {
        if b.is_empty() {
            return self.clone();
        }
        match self {
            Process::Nil => Process::Nil,
            Process::Prefix(a, k) => {
                let mut inner = b.clone();
                for n in a.binders() {
                    inner.remove(&n);
                }
                Process::Prefix(Arc::new(a.subst(b)), Arc::new(k.subst(&inner)))
            }
            Process::Choice(bs) => Process::Choice(bs.iter().map(|p| p.subst(b)).collect()),
            Process::Call(n, args) => Process::Call(n.clone(), args.iter().map(|e| e.subst(b)).collect()),
        }
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Process::Nil => f.write_str("nil"),
            Process::Prefix(a, k) => write!(f, "{a}.{k}"),
            Process::Choice(bs) => {
                f.write_str("(")?;
                for (i, b) in bs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{b}")?;
                }
                f.write_str(")")
            }
            Process::Call(n, args) => {
                write!(f, "{n}")?;
                if !args.is_empty() {
                    f.write_str("(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "{a}")?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Definition {
    pub params: Vec<Symbol>,
    pub body: Process,
}

/// Sorted multiset of tuples.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Repo(Vec<Tuple>);

impl Repo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, t: Tuple) {
        let at = self.0.partition_point(|x| x <= &t);
        self.0.insert(at, t);
    }

    pub fn remove_one(&mut self, t: &Tuple) -> bool {
        match self.0.binary_search(t) {
            Ok(i) => {
                self.0.remove(i);
                true
            }
            Err(_) => false,
        }
    }

    pub fn contains(&self, t: &Tuple) -> bool {
        self.0.binary_search(t).is_ok()
    }

    pub fn count(&self, t: &Tuple) -> usize {
        self.0.iter().filter(|x| *x == t).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tuple> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Distinct tuples matching `template`, with their bindings.
    pub fn matching(&self, template: &Template) -> Vec<(Tuple, Bindings)> {
        let mut out: Vec<(Tuple, Bindings)> = Vec::new();
        for t in &self.0 {
            if out.last().is_some_and(|(prev, _)| prev == t) {
                continue;
            }
            if let Some(b) = template.matches(t) {
                out.push((t.clone(), b));
            }
        }
        out
    }

    pub fn retain(&mut self, keep: impl FnMut(&Tuple) -> bool) {
        self.0.retain(keep);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Component {
    pub id: AgentId,
    pub repo: Repo,
    pub attrs: AttributeMap,
    pub process: Process,
    /// Pending movement, driven by the world rather than the process.
    pub intent: Option<Intent>,
}

impl Component {
    pub fn new(id: AgentId, attrs: AttributeMap, process: Process) -> Self {
        Component { id, repo: Repo::new(), attrs, process, intent: None }
    }
}

/// Dynamic part of an ensemble: every component, ordered by id.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SysState {
    /// Shared between states; use [`SysState::comp_mut`] to modify.
    pub comps: Vec<Arc<Component>>,
}

impl SysState {
    pub fn new(mut comps: Vec<Component>) -> Result<Self, ScelError> {
        comps.sort_by_key(|c| c.id);
        for w in comps.windows(2) {
            if w[0].id == w[1].id {
                return Err(ScelError::DuplicateComponent(w[0].id));
            }
        }
        Ok(SysState { comps: comps.into_iter().map(Arc::new).collect() })
    }

    pub fn comp_mut(&mut self, i: usize) -> &mut Component {
        Arc::make_mut(&mut self.comps[i])
    }

    pub fn index_of(&self, id: AgentId) -> Result<usize, ScelError> {
        self.comps.binary_search_by_key(&id, |c| c.id).map_err(|_| ScelError::UnknownComponent(id))
    }

    pub fn component(&self, id: AgentId) -> Option<&Component> {
        self.index_of(id).ok().map(|i| &*self.comps[i])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub state: SysState,
    pub label: String,
}

/// Static part of an ensemble: process definitions and repository policies.
#[derive(Clone, Debug)]
pub struct System {
    defs: BTreeMap<Symbol, Definition>,
    /// Instantiated definition bodies, by name and argument values.
    bodies: Bodies,
    pub arena: Arena,
    /// Tuples `(name, v, ..)` whose head is listed here keep attribute
    /// `name` equal to `v`; a new one replaces the old.
    pub mirrored: BTreeSet<Symbol>,
    /// Heads held at most once per repository; a duplicate put is dropped.
    pub saturating: BTreeSet<Symbol>,
}

const UNFOLD_LIMIT: usize = 64;

#[derive(Default)]
struct Bodies(Mutex<FxHashMap<(Symbol, Vec<Value>), Process>>);

impl Clone for Bodies {
    fn clone(&self) -> Self {
        Bodies::default()
    }
}

impl fmt::Debug for Bodies {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Bodies")
    }
}

impl System {
    pub fn new(arena: Arena) -> Self {
        System {
            defs: BTreeMap::new(),
            bodies: Bodies::default(),
            arena,
            mirrored: BTreeSet::new(),
            saturating: BTreeSet::new(),
        }
    }

    pub fn define(&mut self, name: &str, params: &[&str], body: Process) {
        self.defs
            .insert(Symbol::new(name), Definition { params: params.iter().map(|p| Symbol::new(p)).collect(), body });
        self.bodies = Bodies::default();
    }

    /// Inserts into one component, applying mirroring and saturation.
    pub fn deposit(&self, comp: &mut Component, t: Tuple) {
        let head = t.head_symbol().cloned();
        if let Some(h) = &head {
            if self.saturating.contains(h) && comp.repo.contains(&t) {
                return;
            }
            if self.mirrored.contains(h) && t.arity() >= 2 {
                comp.repo.retain(|x| x.head_symbol() != Some(h));
                comp.attrs.set(h.clone(), t.items()[1].clone());
            }
        }
        comp.repo.insert(t);
    }

    fn recipients(&self, sys: &SysState, actor: usize, p: &Predicate) -> Vec<usize> {
        let own = &sys.comps[actor].attrs;
        (0..sys.comps.len()).filter(|&j| j != actor && p.eval_with(own, &sys.comps[j].attrs, &self.arena)).collect()
    }

    pub fn act_put(&self, sys: &SysState, actor: AgentId, target: &Target, t: Tuple) -> Result<SysState, ScelError> {
        let a = sys.index_of(actor)?;
        let mut next = sys.clone();
        match target {
            Target::SelfRepo => self.deposit_at(&mut next, a, t),
            Target::Where(p) => {
                for j in self.recipients(sys, a, p) {
                    self.deposit_at(&mut next, j, t.clone());
                }
            }
        }
        Ok(next)
    }

    fn deposit_at(&self, s: &mut SysState, j: usize, t: Tuple) {
        let held = t.head_symbol().is_some_and(|h| self.saturating.contains(h)) && s.comps[j].repo.contains(&t);
        if !held {
            self.deposit(s.comp_mut(j), t);
        }
    }

    fn lookups(&self, sys: &SysState, a: usize, target: &Target, tpl: &Template) -> Vec<(usize, Tuple, Bindings)> {
        let holders = match target {
            Target::SelfRepo => vec![a],
            Target::Where(p) => self.recipients(sys, a, p),
        };
        holders
            .into_iter()
            .flat_map(|j| sys.comps[j].repo.matching(tpl).into_iter().map(move |(t, b)| (j, t, b)))
            .collect()
    }

    /// Empty result means the action is disabled.
    pub fn act_get(
        &self,
        sys: &SysState,
        actor: AgentId,
        target: &Target,
        tpl: &Template,
    ) -> Result<Vec<(SysState, Bindings)>, ScelError> {
        let a = sys.index_of(actor)?;
        Ok(self
            .lookups(sys, a, target, tpl)
            .into_iter()
            .map(|(j, t, b)| {
                let mut next = sys.clone();
                next.comp_mut(j).repo.remove_one(&t);
                (next, b)
            })
            .collect())
    }

    pub fn act_qry(
        &self,
        sys: &SysState,
        actor: AgentId,
        target: &Target,
        tpl: &Template,
    ) -> Result<Vec<(SysState, Bindings)>, ScelError> {
        let a = sys.index_of(actor)?;
        Ok(self.lookups(sys, a, target, tpl).into_iter().map(|(_, _, b)| (sys.clone(), b)).collect())
    }

    fn unfold(
        &self,
        p: &Process,
        actor: AgentId,
        attrs: &AttributeMap,
        depth: usize,
    ) -> Result<Vec<(Arc<Action>, Process)>, ScelError> {
        match p {
            Process::Nil => Ok(Vec::new()),
            Process::Prefix(a, k) => Ok(vec![(a.clone(), (**k).clone())]),
            Process::Choice(bs) => {
                let mut out = Vec::new();
                for b in bs {
                    out.extend(self.unfold(b, actor, attrs, depth)?);
                }
                Ok(out)
            }
            Process::Call(name, args) => {
                if depth >= UNFOLD_LIMIT {
                    return Err(ScelError::UnguardedRecursion(name.clone()));
                }
                let def = self.defs.get(name).ok_or_else(|| ScelError::UnknownDefinition(name.clone()))?;
                if def.params.len() != args.len() {
                    return Err(ScelError::Arity { name: name.clone(), expected: def.params.len(), got: args.len() });
                }
                let values = args.iter().map(|a| a.eval(actor, attrs)).collect::<Result<Vec<_>, _>>()?;
                let key = (name.clone(), values);
                let cached = self.bodies.0.lock().expect("bodies lock").get(&key).cloned();
                let body = match cached {
                    Some(body) => body,
                    None => {
                        let b: Bindings = def.params.iter().cloned().zip(key.1.iter().cloned()).collect();
                        let body = def.body.subst(&b);
                        self.bodies.0.lock().expect("bodies lock").insert(key, body.clone());
                        body
                    }
                };
                self.unfold(&body, actor, attrs, depth + 1)
            }
        }
    }

    fn template(&self, slots: &[PatSlot], actor: AgentId, attrs: &AttributeMap) -> Result<Template, ScelError> {
        let slots = slots
            .iter()
            .map(|s| match s {
                PatSlot::Expr(e) => e.eval(actor, attrs).map(Slot::Lit),
                PatSlot::Bind(n) => Ok(Slot::Bind(n.clone())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Template::new(slots)?)
    }

    /// Every enabled first action of the actor's process; each outcome
    /// carries the committed continuation.
    pub fn step_process(&self, sys: &SysState, actor: AgentId) -> Result<Vec<Outcome>, ScelError> {
        self.step(sys, actor, true)
    }

    /// As [`System::step_process`], without building labels.
    pub fn step_states(&self, sys: &SysState, actor: AgentId) -> Result<Vec<SysState>, ScelError> {
        Ok(self.step(sys, actor, false)?.into_iter().map(|o| o.state).collect())
    }

    fn step(&self, sys: &SysState, actor: AgentId, labelled: bool) -> Result<Vec<Outcome>, ScelError> {
        let a = sys.index_of(actor)?;
        let comp = &sys.comps[a];
        let mut out = Vec::new();
        for (action, next) in self.unfold(&comp.process, actor, &comp.attrs, 0)? {
            match &*action {
                Action::Put(target, exprs) => {
                    let items = exprs.iter().map(|e| e.eval(actor, &comp.attrs)).collect::<Result<Vec<_>, _>>()?;
                    let t = Tuple::new(items)?;
                    let label = if labelled { format!("put{t}@{target}") } else { String::new() };
                    let mut state = self.act_put(sys, actor, target, t)?;
                    if state.comps[a].process != next {
                        state.comp_mut(a).process = next;
                    }
                    out.push(Outcome { state, label });
                }
                Action::Get(target, slots) | Action::Qry(target, slots) => {
                    let tpl = self.template(slots, actor, &comp.attrs)?;
                    let (results, verb) = if matches!(*action, Action::Get(..)) {
                        (self.act_get(sys, actor, target, &tpl)?, "get")
                    } else {
                        (self.act_qry(sys, actor, target, &tpl)?, "qry")
                    };
                    for (mut state, b) in results {
                        let label = match (labelled, tpl.instantiate(&b)) {
                            (false, _) => String::new(),
                            (true, Some(t)) => format!("{verb}{t}@{target}"),
                            (true, None) => action.to_string(),
                        };
                        state.comp_mut(a).process = next.subst(&b);
                        out.push(Outcome { state, label });
                    }
                }
            }
        }
        Ok(out)
    }
}
