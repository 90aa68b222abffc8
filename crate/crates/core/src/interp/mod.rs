//! Interpreted systems: agents with local variables, a protocol (local state
//! to enabled actions) and an evolution (joint action to local update),
//! composed synchronously with an environment whose `Obsvars` every agent can
//! read.
//!
//! Text is parsed into a [`SpecAst`], then resolved and type-checked into a
//! [`SystemSpec`]. States are flat valuations: booleans as 0/1, enumerations
//! as the index of the value, ranges as the value itself.

mod ast;
mod parser;
mod pretty;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use rand::Rng;
use thiserror::Error;

pub use ast::*;
pub use parser::{parse, SyntaxError};
pub use pretty::{expr as pretty_expr, pretty};

use crate::engine::{Model, ModelError, SimRng, Step};
use crate::formula::Formula;

pub const ENVIRONMENT: &str = "Environment";

/// Largest number of joint assignments enumerated for one group of coupled
/// variables in the initial-state constraint.
const INIT_GROUP_LIMIT: u128 = 50_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IsplError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{context}: undeclared identifier `{name}`")]
    Undeclared { context: String, name: String },
    #[error("{context}: {message}")]
    Type { context: String, message: String },
    #[error("duplicate {what} `{name}`")]
    Duplicate { what: &'static str, name: String },
    #[error("{context}: `{owner}.{var}` is not observable here")]
    NotObservable { context: String, owner: String, var: String },
    #[error("initial-state constraint is unsatisfiable")]
    EmptyInit,
    #[error("initial-state constraint couples more than {0} joint assignments")]
    InitTooLarge(u128),
    #[error("agent {agent} has no enabled action in state {state}")]
    ProtocolViolation { agent: String, state: String },
    #[error(
        "agent {agent}: evolution rules {first} and {second} assign `{var}` different values under one joint action"
    )]
    EvolutionConflict { agent: String, var: String, first: usize, second: usize },
    #[error("agent {agent}: `{var}` = {value} is outside its domain")]
    OutOfDomain { agent: String, var: String, value: i64 },
    #[error("formula refers to unknown proposition `{0}`")]
    UnknownProposition(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VarType {
    Bool,
    Range(i64, i64),
    Enum(Vec<String>),
}

impl VarType {
    fn from_ast(t: &TypeAst) -> Self {
        match t {
            TypeAst::Boolean => VarType::Bool,
            TypeAst::Range(lo, hi) => VarType::Range(*lo, *hi),
            TypeAst::Enum(vs) => VarType::Enum(vs.clone()),
        }
    }

    pub fn size(&self) -> u128 {
        match self {
            VarType::Bool => 2,
            VarType::Range(lo, hi) => (hi - lo + 1) as u128,
            VarType::Enum(vs) => vs.len() as u128,
        }
    }

    /// Encoded value of the `k`-th domain element.
    fn nth(&self, k: u128) -> i32 {
        match self {
            VarType::Range(lo, _) => (*lo + k as i64) as i32,
            _ => k as i32,
        }
    }

    fn contains(&self, v: i64) -> bool {
        match self {
            VarType::Bool => v == 0 || v == 1,
            VarType::Range(lo, hi) => (*lo..=*hi).contains(&v),
            VarType::Enum(vs) => v >= 0 && (v as usize) < vs.len(),
        }
    }

    pub fn render(&self, v: i32) -> String {
        match self {
            VarType::Bool => (v != 0).to_string(),
            VarType::Range(..) => v.to_string(),
            VarType::Enum(vs) => vs.get(v as usize).cloned().unwrap_or_else(|| format!("#{v}")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VarInfo {
    pub agent: usize,
    pub name: String,
    pub ty: VarType,
    pub observable: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum CExpr {
    Const(i64),
    Var(usize),
    Act(usize),
    Not(Box<CExpr>),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
}

impl CExpr {
    fn eval(&self, s: &[i32], acts: &[usize]) -> i64 {
        match self {
            CExpr::Const(c) => *c,
            CExpr::Var(i) => i64::from(s[*i]),
            CExpr::Act(a) => acts.get(*a).map_or(-1, |x| *x as i64),
            CExpr::Not(e) => i64::from(e.eval(s, acts) == 0),
            CExpr::Bin(op, l, r) => {
                let a = l.eval(s, acts);
                match op {
                    BinOp::And => i64::from(a != 0 && r.eval(s, acts) != 0),
                    BinOp::Or => i64::from(a != 0 || r.eval(s, acts) != 0),
                    _ => {
                        let b = r.eval(s, acts);
                        match op {
                            BinOp::Eq => i64::from(a == b),
                            BinOp::Ne => i64::from(a != b),
                            BinOp::Lt => i64::from(a < b),
                            BinOp::Le => i64::from(a <= b),
                            BinOp::Gt => i64::from(a > b),
                            BinOp::Ge => i64::from(a >= b),
                            BinOp::Add => a + b,
                            BinOp::Sub => a - b,
                            BinOp::And | BinOp::Or => unreachable!(),
                        }
                    }
                }
            }
        }
    }

    fn holds(&self, s: &[i32], acts: &[usize]) -> bool {
        self.eval(s, acts) != 0
    }

    fn vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            CExpr::Var(i) => {
                out.insert(*i);
            }
            CExpr::Not(e) => e.vars(out),
            CExpr::Bin(_, l, r) => {
                l.vars(out);
                r.vars(out);
            }
            CExpr::Const(_) | CExpr::Act(_) => {}
        }
    }

    fn conjuncts(self, out: &mut Vec<CExpr>) {
        match self {
            CExpr::Bin(BinOp::And, l, r) => {
                l.conjuncts(out);
                r.conjuncts(out);
            }
            other => out.push(other),
        }
    }
}

#[derive(Clone, Debug)]
struct CRule {
    assigns: Vec<(usize, CExpr)>,
    guard: CExpr,
}

#[derive(Clone, Debug)]
pub struct AgentInfo {
    pub name: String,
    pub actions: Vec<String>,
    protocol: Vec<(CExpr, Vec<usize>)>,
    other: Option<Vec<usize>>,
    evolution: Vec<CRule>,
    slots: Vec<usize>,
}

impl AgentInfo {
    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == name)
    }
}

/// One point of the synchronous product: a valuation of every variable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GlobalState(pub Box<[i32]>);

impl GlobalState {
    pub fn values(&self) -> &[i32] {
        &self.0
    }
}

/// The actions chosen by each participant, indexed like [`SystemSpec::agents`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct JointAction(pub Vec<usize>);

#[derive(Clone, Debug)]
pub struct SystemSpec {
    ast: SpecAst,
    agents: Vec<AgentInfo>,
    vars: Vec<VarInfo>,
    props: IndexMap<String, CExpr>,
    init: CExpr,
    formulas: Vec<Formula>,
    warnings: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Protocol,
    Evolution,
    Global,
}

#[derive(Clone, Debug)]
enum Ty {
    Bool,
    Int,
    Enum(Vec<String>),
    Action(usize),
    Lit(String),
}

impl Ty {
    fn describe(&self) -> String {
        match self {
            Ty::Bool => "boolean".into(),
            Ty::Int => "integer".into(),
            Ty::Enum(vs) => format!("{{{}}}", vs.join(", ")),
            Ty::Action(_) => "action".into(),
            Ty::Lit(s) => format!("literal `{s}`"),
        }
    }
}

struct Resolver<'a> {
    agents: &'a [AgentInfo],
    vars: &'a [VarInfo],
    /// (agent index, var name) -> slot
    lookup: &'a BTreeMap<(usize, String), usize>,
    env: Option<usize>,
}

struct Ctx {
    me: Option<usize>,
    section: Section,
    label: String,
}

impl Resolver<'_> {
    fn agent_named(&self, name: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.name == name)
    }

    fn type_of_slot(&self, slot: usize) -> Ty {
        match &self.vars[slot].ty {
            VarType::Bool => Ty::Bool,
            VarType::Range(..) => Ty::Int,
            VarType::Enum(vs) => Ty::Enum(vs.clone()),
        }
    }

    fn err_type<T>(&self, ctx: &Ctx, message: String) -> Result<T, IsplError> {
        Err(IsplError::Type { context: ctx.label.clone(), message })
    }

    fn expr(&self, e: &Expr, ctx: &Ctx) -> Result<(CExpr, Ty), IsplError> {
        match e {
            Expr::Int(i) => Ok((CExpr::Const(*i), Ty::Int)),
            Expr::Bool(b) => Ok((CExpr::Const(i64::from(*b)), Ty::Bool)),
            Expr::Ident(name) => {
                if let Some(me) = ctx.me {
                    if let Some(&slot) = self.lookup.get(&(me, name.clone())) {
                        return Ok((CExpr::Var(slot), self.type_of_slot(slot)));
                    }
                }
                Ok((CExpr::Const(0), Ty::Lit(name.clone())))
            }
            Expr::Action => match (ctx.me, ctx.section) {
                (Some(me), Section::Evolution) => Ok((CExpr::Act(me), Ty::Action(me))),
                _ => self.err_type(ctx, "`Action` is only available in Evolution rules".into()),
            },
            Expr::Qualified(owner, field) => {
                let Some(o) = self.agent_named(owner) else {
                    return Err(IsplError::Undeclared { context: ctx.label.clone(), name: owner.clone() });
                };
                if field == "Action" {
                    if ctx.section != Section::Evolution {
                        return self.err_type(ctx, format!("`{owner}.Action` is only available in Evolution rules"));
                    }
                    return Ok((CExpr::Act(o), Ty::Action(o)));
                }
                let Some(&slot) = self.lookup.get(&(o, field.clone())) else {
                    return Err(IsplError::Undeclared { context: ctx.label.clone(), name: format!("{owner}.{field}") });
                };
                let visible = match ctx.me {
                    None => true,
                    Some(me) if me == o => true,
                    Some(_) if Some(o) == self.env => self.vars[slot].observable,
                    // The environment's evolution may read agents' local state.
                    Some(me) => Some(me) == self.env && ctx.section == Section::Evolution,
                };
                if !visible {
                    return Err(IsplError::NotObservable {
                        context: ctx.label.clone(),
                        owner: owner.clone(),
                        var: field.clone(),
                    });
                }
                Ok((CExpr::Var(slot), self.type_of_slot(slot)))
            }
            Expr::Not(inner) => {
                let c = self.boolean(inner, ctx)?;
                Ok((CExpr::Not(Box::new(c)), Ty::Bool))
            }
            Expr::Bin(op, l, r) => match op {
                BinOp::And | BinOp::Or => {
                    let (a, b) = (self.boolean(l, ctx)?, self.boolean(r, ctx)?);
                    Ok((CExpr::Bin(*op, Box::new(a), Box::new(b)), Ty::Bool))
                }
                BinOp::Add | BinOp::Sub => {
                    let (a, b) = (self.integer(l, ctx)?, self.integer(r, ctx)?);
                    Ok((CExpr::Bin(*op, Box::new(a), Box::new(b)), Ty::Int))
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    let (a, b) = (self.integer(l, ctx)?, self.integer(r, ctx)?);
                    Ok((CExpr::Bin(*op, Box::new(a), Box::new(b)), Ty::Bool))
                }
                BinOp::Eq | BinOp::Ne => {
                    let (a, b) = self.unify(l, r, ctx)?;
                    Ok((CExpr::Bin(*op, Box::new(a), Box::new(b)), Ty::Bool))
                }
            },
        }
    }

    fn literal_in(&self, lit: &str, ty: &Ty, ctx: &Ctx) -> Result<CExpr, IsplError> {
        let idx = match ty {
            Ty::Enum(vs) => vs.iter().position(|v| v == lit),
            Ty::Action(a) => self.agents[*a].action_index(lit),
            _ => return Err(IsplError::Undeclared { context: ctx.label.clone(), name: lit.to_string() }),
        };
        match idx {
            Some(i) => Ok(CExpr::Const(i as i64)),
            None => self.err_type(ctx, format!("`{lit}` is not a value of {}", ty.describe())),
        }
    }

    fn unify(&self, l: &Expr, r: &Expr, ctx: &Ctx) -> Result<(CExpr, CExpr), IsplError> {
        let (a, ta) = self.expr(l, ctx)?;
        let (b, tb) = self.expr(r, ctx)?;
        match (&ta, &tb) {
            (Ty::Lit(x), Ty::Lit(y)) => {
                Err(IsplError::Undeclared { context: ctx.label.clone(), name: format!("{x}` / `{y}") })
            }
            (Ty::Lit(x), other) => Ok((self.literal_in(x, other, ctx)?, b)),
            (other, Ty::Lit(y)) => Ok((a, self.literal_in(y, other, ctx)?)),
            (Ty::Bool, Ty::Bool) | (Ty::Int, Ty::Int) => Ok((a, b)),
            (Ty::Enum(x), Ty::Enum(y)) if x == y => Ok((a, b)),
            (Ty::Action(x), Ty::Action(y)) if self.agents[*x].actions == self.agents[*y].actions => Ok((a, b)),
            _ => self.err_type(ctx, format!("cannot compare {} with {}", ta.describe(), tb.describe())),
        }
    }

    fn boolean(&self, e: &Expr, ctx: &Ctx) -> Result<CExpr, IsplError> {
        match self.expr(e, ctx)? {
            (c, Ty::Bool) => Ok(c),
            (_, Ty::Lit(name)) => Err(IsplError::Undeclared { context: ctx.label.clone(), name }),
            (_, t) => self.err_type(ctx, format!("expected boolean, found {}", t.describe())),
        }
    }

    fn integer(&self, e: &Expr, ctx: &Ctx) -> Result<CExpr, IsplError> {
        match self.expr(e, ctx)? {
            (c, Ty::Int) => Ok(c),
            (_, Ty::Lit(name)) => Err(IsplError::Undeclared { context: ctx.label.clone(), name }),
            (_, t) => self.err_type(ctx, format!("expected integer, found {}", t.describe())),
        }
    }

    fn assignment(&self, target_slot: usize, rhs: &Expr, ctx: &Ctx) -> Result<CExpr, IsplError> {
        let target = self.type_of_slot(target_slot);
        let (c, t) = self.expr(rhs, ctx)?;
        match (&target, &t) {
            (_, Ty::Lit(lit)) => self.literal_in(lit, &target, ctx),
            (Ty::Bool, Ty::Bool) | (Ty::Int, Ty::Int) => Ok(c),
            (Ty::Enum(x), Ty::Enum(y)) if x == y => Ok(c),
            _ => self.err_type(
                ctx,
                format!(
                    "cannot assign {} to `{}` of type {}",
                    t.describe(),
                    self.vars[target_slot].name,
                    target.describe()
                ),
            ),
        }
    }
}

impl SystemSpec {
    pub fn parse(text: &str) -> Result<Self, IsplError> {
        Self::from_ast(parse(text)?)
    }

    pub fn from_ast(ast: SpecAst) -> Result<Self, IsplError> {
        let mut order: Vec<&AgentAst> = Vec::new();
        if let Some(env) = ast.agents.iter().find(|a| a.name == ENVIRONMENT) {
            order.push(env);
        }
        order.extend(ast.agents.iter().filter(|a| a.name != ENVIRONMENT));

        let mut names = BTreeSet::new();
        let mut vars = Vec::new();
        let mut lookup = BTreeMap::new();
        let mut agents = Vec::new();
        for (i, a) in order.iter().enumerate() {
            if !names.insert(a.name.clone()) {
                return Err(IsplError::Duplicate { what: "agent", name: a.name.clone() });
            }
            let mut slots = Vec::new();
            let decls = a.obsvars.iter().map(|d| (d, true)).chain(a.vars.iter().map(|d| (d, false)));
            for (d, observable) in decls {
                if lookup.insert((i, d.name.clone()), vars.len()).is_some() {
                    return Err(IsplError::Duplicate { what: "variable", name: format!("{}.{}", a.name, d.name) });
                }
                if let TypeAst::Enum(vs) = &d.ty {
                    let distinct: BTreeSet<_> = vs.iter().collect();
                    if vs.is_empty() || distinct.len() != vs.len() {
                        return Err(IsplError::Type {
                            context: format!("{}.{}", a.name, d.name),
                            message: "enumeration must list distinct values".into(),
                        });
                    }
                }
                slots.push(vars.len());
                vars.push(VarInfo { agent: i, name: d.name.clone(), ty: VarType::from_ast(&d.ty), observable });
            }
            let distinct: BTreeSet<_> = a.actions.iter().collect();
            if a.actions.is_empty() || distinct.len() != a.actions.len() {
                return Err(IsplError::Type {
                    context: format!("{} Actions", a.name),
                    message: "action set must be non-empty with distinct names".into(),
                });
            }
            agents.push(AgentInfo {
                name: a.name.clone(),
                actions: a.actions.clone(),
                protocol: Vec::new(),
                other: None,
                evolution: Vec::new(),
                slots,
            });
        }
        let env = order.first().filter(|a| a.name == ENVIRONMENT).map(|_| 0);

        let mut warnings = Vec::new();
        let mut compiled = Vec::new();
        {
            let r = Resolver { agents: &agents, vars: &vars, lookup: &lookup, env };
            for (i, a) in order.iter().enumerate() {
                let mut protocol = Vec::new();
                let mut other = None;
                for (k, rule) in a.protocol.iter().enumerate() {
                    let ctx = Ctx {
                        me: Some(i),
                        section: Section::Protocol,
                        label: format!("{} Protocol rule {}", a.name, k + 1),
                    };
                    let mut acts = Vec::new();
                    for name in &rule.actions {
                        match agents[i].action_index(name) {
                            Some(x) => acts.push(x),
                            None => return r.err_type(&ctx, format!("`{name}` is not one of the agent's actions")),
                        }
                    }
                    match &rule.guard {
                        Guard::Other => {
                            if other.is_some() {
                                return r.err_type(&ctx, "more than one Other rule".into());
                            }
                            other = Some(acts);
                        }
                        Guard::When(g) => protocol.push((r.boolean(g, &ctx)?, acts)),
                    }
                }
                if other.is_none() {
                    warnings.push(format!(
                        "agent {} has no Other rule; states matching no protocol rule will have no enabled action",
                        a.name
                    ));
                }
                let mut evolution = Vec::new();
                for (k, rule) in a.evolution.iter().enumerate() {
                    let ctx = Ctx {
                        me: Some(i),
                        section: Section::Evolution,
                        label: format!("{} Evolution rule {}", a.name, k + 1),
                    };
                    let mut assigns = Vec::new();
                    for (var, rhs) in &rule.assigns {
                        let Some(&slot) = lookup.get(&(i, var.clone())) else {
                            return Err(IsplError::Undeclared { context: ctx.label, name: var.clone() });
                        };
                        assigns.push((slot, r.assignment(slot, rhs, &ctx)?));
                    }
                    evolution.push(CRule { assigns, guard: r.boolean(&rule.guard, &ctx)? });
                }
                compiled.push((protocol, other, evolution));
            }
        }
        for (agent, (protocol, other, evolution)) in agents.iter_mut().zip(compiled) {
            agent.protocol = protocol;
            agent.other = other;
            agent.evolution = evolution;
        }

        let r = Resolver { agents: &agents, vars: &vars, lookup: &lookup, env };
        let mut props = IndexMap::new();
        for p in &ast.evaluation {
            let ctx = Ctx { me: None, section: Section::Global, label: format!("proposition {}", p.name) };
            let c = r.boolean(&p.body, &ctx)?;
            if props.insert(p.name.clone(), c).is_some() {
                return Err(IsplError::Duplicate { what: "proposition", name: p.name.clone() });
            }
        }
        let init = r.boolean(&ast.init, &Ctx { me: None, section: Section::Global, label: "InitStates".into() })?;
        for f in &ast.formulae {
            for atom in f.prop.atoms() {
                if !props.contains_key(atom) {
                    return Err(IsplError::UnknownProposition(atom.to_string()));
                }
            }
        }
        Ok(SystemSpec { formulas: ast.formulae.clone(), ast, agents, vars, props, init, warnings })
    }

    pub fn ast(&self) -> &SpecAst {
        &self.ast
    }

    /// Participants in composition order; the environment, when declared, is first.
    pub fn agents(&self) -> &[AgentInfo] {
        &self.agents
    }

    pub fn agent_index(&self, name: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.name == name)
    }

    pub fn vars(&self) -> &[VarInfo] {
        &self.vars
    }

    pub fn formulas(&self) -> &[Formula] {
        &self.formulas
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn proposition_names(&self) -> impl Iterator<Item = &str> {
        self.props.keys().map(String::as_str)
    }

    pub fn slot(&self, agent: &str, var: &str) -> Option<usize> {
        let a = self.agent_index(agent)?;
        self.agents[a].slots.iter().copied().find(|&s| self.vars[s].name == var)
    }

    /// Value of `agent.var`, rendered (enumeration names, `true`/`false`).
    pub fn value(&self, state: &GlobalState, agent: &str, var: &str) -> Option<String> {
        let s = self.slot(agent, var)?;
        Some(self.vars[s].ty.render(state.0[s]))
    }

    /// Builds a state from rendered `(agent, var, value)` triples; unlisted
    /// variables take the first value of their domain.
    pub fn state_from(&self, values: &[(&str, &str, &str)]) -> Option<GlobalState> {
        let mut s: Vec<i32> = self.vars.iter().map(|v| v.ty.nth(0)).collect();
        for (agent, var, value) in values {
            let slot = self.slot(agent, var)?;
            let ty = &self.vars[slot].ty;
            s[slot] = match ty {
                VarType::Bool => i32::from(value.parse::<bool>().ok()?),
                VarType::Range(..) => value.parse().ok().filter(|v| ty.contains(i64::from(*v)))?,
                VarType::Enum(vs) => vs.iter().position(|x| x == value)? as i32,
            };
        }
        Some(GlobalState(s.into()))
    }

    pub fn proposition_holds(&self, name: &str, state: &GlobalState) -> Option<bool> {
        self.props.get(name).map(|c| c.holds(&state.0, &[]))
    }

    fn enabled_indices(&self, agent: usize, s: &GlobalState) -> Result<Vec<usize>, IsplError> {
        let info = &self.agents[agent];
        let mut set = BTreeSet::new();
        let mut matched = false;
        for (guard, acts) in &info.protocol {
            if guard.holds(&s.0, &[]) {
                matched = true;
                set.extend(acts.iter().copied());
            }
        }
        if !matched {
            if let Some(other) = &info.other {
                set.extend(other.iter().copied());
            }
        }
        if set.is_empty() {
            return Err(IsplError::ProtocolViolation { agent: info.name.clone(), state: self.describe_state(s) });
        }
        Ok(set.into_iter().collect())
    }

    /// Names of the actions the agent's protocol enables in `state`.
    pub fn enabled_actions(&self, agent: &str, state: &GlobalState) -> Result<BTreeSet<String>, IsplError> {
        let a = self
            .agent_index(agent)
            .ok_or_else(|| IsplError::Undeclared { context: "enabled_actions".into(), name: agent.to_string() })?;
        Ok(self.enabled_indices(a, state)?.into_iter().map(|i| self.agents[a].actions[i].clone()).collect())
    }

    /// Successor under one joint action; every firing rule of every
    /// participant is applied to the pre-state at once.
    pub fn apply(&self, s: &GlobalState, joint: &JointAction) -> Result<GlobalState, IsplError> {
        let mut next = s.0.clone();
        for (ai, agent) in self.agents.iter().enumerate() {
            let mut written: BTreeMap<usize, (i64, usize)> = BTreeMap::new();
            for (ri, rule) in agent.evolution.iter().enumerate() {
                if !rule.guard.holds(&s.0, &joint.0) {
                    continue;
                }
                for (slot, rhs) in &rule.assigns {
                    let v = rhs.eval(&s.0, &joint.0);
                    match written.get(slot) {
                        Some(&(prev, first)) if prev != v => {
                            return Err(IsplError::EvolutionConflict {
                                agent: agent.name.clone(),
                                var: self.vars[*slot].name.clone(),
                                first: first + 1,
                                second: ri + 1,
                            })
                        }
                        Some(_) => {}
                        None => {
                            written.insert(*slot, (v, ri));
                        }
                    }
                }
            }
            for (slot, (v, _)) in written {
                if !self.vars[slot].ty.contains(v) {
                    return Err(IsplError::OutOfDomain {
                        agent: self.agents[ai].name.clone(),
                        var: self.vars[slot].name.clone(),
                        value: v,
                    });
                }
                next[slot] = v as i32;
            }
        }
        Ok(GlobalState(next))
    }

    /// Every joint action of the enabled-action product with its successor.
    pub fn joint_successors(&self, s: &GlobalState) -> Result<Vec<(JointAction, GlobalState)>, IsplError> {
        if self.agents.is_empty() {
            return Ok(Vec::new());
        }
        let enabled = (0..self.agents.len()).map(|a| self.enabled_indices(a, s)).collect::<Result<Vec<_>, _>>()?;
        let mut out = Vec::new();
        let mut pick = vec![0usize; enabled.len()];
        loop {
            let joint = JointAction(pick.iter().zip(&enabled).map(|(&k, e)| e[k]).collect());
            let next = self.apply(s, &joint)?;
            out.push((joint, next));
            let mut i = enabled.len();
            loop {
                if i == 0 {
                    return Ok(out);
                }
                i -= 1;
                pick[i] += 1;
                if pick[i] < enabled[i].len() {
                    break;
                }
                pick[i] = 0;
            }
        }
    }

    pub fn describe_joint(&self, joint: &JointAction) -> String {
        self.agents
            .iter()
            .zip(&joint.0)
            .map(|(a, &i)| format!("{}={}", a.name, a.actions[i]))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn describe_state(&self, s: &GlobalState) -> String {
        self.vars
            .iter()
            .zip(s.0.iter())
            .map(|(v, &x)| format!("{}.{}={}", self.agents[v.agent].name, v.name, v.ty.render(x)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Factored view of the initial states satisfying `InitStates`.
    pub fn init_space(&self) -> Result<InitSpace, IsplError> {
        let mut conjuncts = Vec::new();
        self.init.clone().conjuncts(&mut conjuncts);
        let n = self.vars.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        let mut conj_vars = Vec::new();
        for c in &conjuncts {
            let mut vs = BTreeSet::new();
            c.vars(&mut vs);
            if vs.is_empty() && !c.holds(&vec![0; n], &[]) {
                return Err(IsplError::EmptyInit);
            }
            let mut it = vs.iter();
            if let Some(&first) = it.next() {
                for &v in it {
                    let (a, b) = (find(&mut parent, first), find(&mut parent, v));
                    parent[a] = b;
                }
            }
            conj_vars.push(vs);
        }
        let mut constrained = BTreeSet::new();
        for vs in &conj_vars {
            constrained.extend(vs.iter().copied());
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &v in &constrained {
            groups.entry(find(&mut parent, v)).or_default().push(v);
        }
        let mut factors = Vec::new();
        for (_, slots) in groups {
            let members: Vec<&CExpr> = conjuncts
                .iter()
                .zip(&conj_vars)
                .filter(|(_, vs)| vs.first().is_some_and(|v| slots.contains(v)))
                .map(|(c, _)| c)
                .collect();
            let size: u128 = slots.iter().map(|&s| self.vars[s].ty.size()).product();
            if size > INIT_GROUP_LIMIT {
                return Err(IsplError::InitTooLarge(INIT_GROUP_LIMIT));
            }
            let mut scratch = vec![0i32; n];
            let mut sols = Vec::new();
            for k in 0..size {
                let mut rest = k;
                for &s in &slots {
                    let d = self.vars[s].ty.size();
                    scratch[s] = self.vars[s].ty.nth(rest % d);
                    rest /= d;
                }
                if members.iter().all(|c| c.holds(&scratch, &[])) {
                    sols.push(slots.iter().map(|&s| scratch[s]).collect::<Vec<_>>());
                }
            }
            if sols.is_empty() {
                return Err(IsplError::EmptyInit);
            }
            factors.push(Factor::Joint { slots, sols });
        }
        for v in 0..n {
            if !constrained.contains(&v) {
                factors.push(Factor::Free { slot: v, ty: self.vars[v].ty.clone() });
            }
        }
        Ok(InitSpace { n, factors })
    }

    /// All initial states, materialised.
    pub fn enumerate_init(&self) -> Result<Vec<GlobalState>, IsplError> {
        Ok(self.init_space()?.iter().collect())
    }
}

#[derive(Clone, Debug)]
enum Factor {
    Joint { slots: Vec<usize>, sols: Vec<Vec<i32>> },
    Free { slot: usize, ty: VarType },
}

impl Factor {
    fn size(&self) -> u128 {
        match self {
            Factor::Joint { sols, .. } => sols.len() as u128,
            Factor::Free { ty, .. } => ty.size(),
        }
    }

    fn write(&self, k: u128, s: &mut [i32]) {
        match self {
            Factor::Joint { slots, sols } => {
                for (slot, v) in slots.iter().zip(&sols[k as usize]) {
                    s[*slot] = *v;
                }
            }
            Factor::Free { slot, ty } => s[*slot] = ty.nth(k),
        }
    }
}

/// Initial states as a product of independent factors: groups of variables
/// coupled by the constraint (pre-solved) and unconstrained variables.
#[derive(Clone, Debug)]
pub struct InitSpace {
    n: usize,
    factors: Vec<Factor>,
}

impl InitSpace {
    pub fn count(&self) -> u128 {
        self.factors.iter().map(Factor::size).product()
    }

    pub fn nth(&self, mut k: u128) -> GlobalState {
        let mut s = vec![0i32; self.n];
        for f in &self.factors {
            let d = f.size();
            f.write(k % d, &mut s);
            k /= d;
        }
        GlobalState(s.into())
    }

    pub fn iter(&self) -> impl Iterator<Item = GlobalState> + '_ {
        (0..self.count()).map(|k| self.nth(k))
    }

    pub fn sample(&self, rng: &mut impl Rng) -> GlobalState {
        let mut s = vec![0i32; self.n];
        for f in &self.factors {
            f.write(rng.gen_range(0..f.size()), &mut s);
        }
        GlobalState(s.into())
    }
}

impl fmt::Display for GlobalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl Model for SystemSpec {
    type State = GlobalState;

    fn initial_states(&self) -> Result<Vec<GlobalState>, ModelError> {
        Ok(self.enumerate_init()?)
    }

    fn initial_count(&self) -> Result<u128, ModelError> {
        Ok(self.init_space()?.count())
    }

    fn sample_initial(&self, rng: &mut SimRng) -> Result<GlobalState, ModelError> {
        Ok(self.init_space()?.sample(rng))
    }

    fn successors(&self, s: &GlobalState) -> Result<Vec<Step<GlobalState>>, ModelError> {
        Ok(self
            .joint_successors(s)?
            .into_iter()
            .map(|(j, next)| Step { actor: "joint".into(), action: self.describe_joint(&j), target: next })
            .collect())
    }

    fn propositions(&self) -> Vec<String> {
        self.props.keys().cloned().collect()
    }

    fn proposition(&self, name: &str, s: &GlobalState) -> Option<bool> {
        self.proposition_holds(name, s)
    }

    fn describe(&self, s: &GlobalState) -> String {
        self.describe_state(s)
    }
}
