use serde::Serialize;

use crate::formula::Formula;

/// Parsed description, before name resolution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SpecAst {
    pub agents: Vec<AgentAst>,
    pub evaluation: Vec<PropDef>,
    pub init: Expr,
    pub formulae: Vec<Formula>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AgentAst {
    pub name: String,
    /// Only the environment declares observable variables.
    pub obsvars: Vec<VarDecl>,
    pub vars: Vec<VarDecl>,
    pub actions: Vec<String>,
    pub protocol: Vec<ProtocolRule>,
    pub evolution: Vec<EvolutionRule>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VarDecl {
    pub name: String,
    pub ty: TypeAst,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum TypeAst {
    Boolean,
    Range(i64, i64),
    Enum(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Guard {
    Other,
    When(Expr),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProtocolRule {
    pub guard: Guard,
    pub actions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EvolutionRule {
    pub assigns: Vec<(String, Expr)>,
    pub guard: Expr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PropDef {
    pub name: String,
    pub body: Expr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BinOp {
    And,
    Or,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    /// Unqualified name: a local variable, or an enumeration / action literal.
    Ident(String),
    /// `Owner.field`; `field` may be `Action`.
    Qualified(String, String),
    /// The agent's own action (`Action`).
    Action,
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}
