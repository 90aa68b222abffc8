//! Temporal formulas over named state propositions: `AG p`, `AF p`, `EF p`,
//! `EG p`, where `p` is a boolean combination of proposition names.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Temporal {
    AG,
    AF,
    EF,
    EG,
}

impl Temporal {
    pub fn is_universal(self) -> bool {
        matches!(self, Temporal::AG | Temporal::AF)
    }
}

impl fmt::Display for Temporal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Temporal {
    type Err = FormulaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "AG" => Ok(Temporal::AG),
            "AF" => Ok(Temporal::AF),
            "EF" => Ok(Temporal::EF),
            "EG" => Ok(Temporal::EG),
            other => Err(FormulaError::Operator(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PropExpr {
    True,
    False,
    Atom(String),
    Not(Box<PropExpr>),
    And(Box<PropExpr>, Box<PropExpr>),
    Or(Box<PropExpr>, Box<PropExpr>),
}

impl PropExpr {
    pub fn atom(name: &str) -> Self {
        PropExpr::Atom(name.to_string())
    }

    pub fn negate(self) -> Self {
        PropExpr::Not(Box::new(self))
    }

    pub fn atoms(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            PropExpr::Atom(a) => out.push(a),
            PropExpr::Not(p) => p.collect_atoms(out),
            PropExpr::And(l, r) | PropExpr::Or(l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
            PropExpr::True | PropExpr::False => {}
        }
    }

    /// Evaluates with `atom` supplying each proposition's truth value.
    pub fn eval(&self, atom: &mut impl FnMut(&str) -> bool) -> bool {
        match self {
            PropExpr::True => true,
            PropExpr::False => false,
            PropExpr::Atom(a) => atom(a),
            PropExpr::Not(p) => !p.eval(atom),
            PropExpr::And(l, r) => l.eval(atom) && r.eval(atom),
            PropExpr::Or(l, r) => l.eval(atom) || r.eval(atom),
        }
    }
}

impl fmt::Display for PropExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropExpr::True => f.write_str("true"),
            PropExpr::False => f.write_str("false"),
            PropExpr::Atom(a) => f.write_str(a),
            PropExpr::Not(p) => write!(f, "!{p}"),
            PropExpr::And(l, r) => write!(f, "({l} and {r})"),
            PropExpr::Or(l, r) => write!(f, "({l} or {r})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Formula {
    pub op: Temporal,
    pub prop: PropExpr,
}

impl Formula {
    pub fn new(op: Temporal, prop: PropExpr) -> Self {
        Formula { op, prop }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.op, self.prop)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("unknown temporal operator `{0}` (expected AG, AF, EF or EG)")]
    Operator(String),
    #[error("malformed proposition at `{0}`")]
    Syntax(String),
}

impl FromStr for Formula {
    type Err = FormulaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (op, rest) = s.split_at(s.find(char::is_whitespace).unwrap_or(s.len()));
        let op: Temporal = op.parse()?;
        Ok(Formula { op, prop: rest.parse()? })
    }
}

impl FromStr for PropExpr {
    type Err = FormulaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let tokens = tokenize(s)?;
        let mut p = PropParser { tokens: &tokens, pos: 0 };
        let prop = p.or()?;
        if p.pos != tokens.len() {
            return Err(FormulaError::Syntax(tokens[p.pos..].join(" ")));
        }
        Ok(prop)
    }
}

fn tokenize(s: &str) -> Result<Vec<String>, FormulaError> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if "()!".contains(c) {
            out.push(c.to_string());
            chars.next();
        } else if c == '&' || c == '|' {
            chars.next();
            if chars.peek() == Some(&c) {
                chars.next();
            }
            out.push(if c == '&' { "and" } else { "or" }.to_string());
        } else if c.is_alphanumeric() || c == '_' {
            let mut w = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_alphanumeric() || c == '_' {
                    w.push(c);
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(w);
        } else {
            return Err(FormulaError::Syntax(c.to_string()));
        }
    }
    Ok(out)
}

struct PropParser<'a> {
    tokens: &'a [String],
    pos: usize,
}

impl PropParser<'_> {
    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(String::as_str)
    }

    fn or(&mut self) -> Result<PropExpr, FormulaError> {
        let mut l = self.and()?;
        while self.peek() == Some("or") {
            self.pos += 1;
            l = PropExpr::Or(Box::new(l), Box::new(self.and()?));
        }
        Ok(l)
    }

    fn and(&mut self) -> Result<PropExpr, FormulaError> {
        let mut l = self.unary()?;
        while self.peek() == Some("and") {
            self.pos += 1;
            l = PropExpr::And(Box::new(l), Box::new(self.unary()?));
        }
        Ok(l)
    }

    fn unary(&mut self) -> Result<PropExpr, FormulaError> {
        let tok = self.peek().ok_or_else(|| FormulaError::Syntax("<end>".into()))?.to_string();
        self.pos += 1;
        match tok.as_str() {
            "!" => Ok(self.unary()?.negate()),
            "(" => {
                let inner = self.or()?;
                if self.peek() != Some(")") {
                    return Err(FormulaError::Syntax(self.peek().unwrap_or("<end>").to_string()));
                }
                self.pos += 1;
                Ok(inner)
            }
            "true" => Ok(PropExpr::True),
            "false" => Ok(PropExpr::False),
            ")" | "and" | "or" => Err(FormulaError::Syntax(tok)),
            _ => Ok(PropExpr::Atom(tok)),
        }
    }
}
