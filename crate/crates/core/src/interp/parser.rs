//! Recursive-descent parser for the interpreted-system description language.
//! The grammar is documented in `docs/ispl-grammar.md`.

use std::fmt;

use super::ast::*;
use crate::formula::{Formula, PropExpr, Temporal};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for SyntaxError {}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(i64),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const PUNCT: [&str; 18] =
    ["..", "!=", "<=", ">=", ":", ";", ",", "{", "}", "(", ")", "=", "<", ">", "+", "-", ".", "!"];

fn lex(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut out = Vec::new();
    let (mut line, mut col) = (1, 1);
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && bytes.get(i + 1) == Some(&'-') {
            while i < bytes.len() && bytes[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = bytes[start..i].iter().collect();
            let value = text.parse().map_err(|_| SyntaxError {
                line: l0,
                col: c0,
                message: format!("integer `{text}` out of range"),
            })?;
            col += i - start;
            out.push(Token { tok: Tok::Int(value), line: l0, col: c0 });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_alphanumeric() || bytes[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token { tok: Tok::Ident(bytes[start..i].iter().collect()), line: l0, col: c0 });
            continue;
        }
        let rest: String = bytes[i..bytes.len().min(i + 2)].iter().collect();
        let Some(p) = PUNCT.iter().find(|p| rest.starts_with(**p)) else {
            return Err(SyntaxError { line, col, message: format!("unexpected character `{c}`") });
        };
        i += p.len();
        col += p.len();
        out.push(Token { tok: Tok::Punct(p), line: l0, col: c0 });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

pub fn parse(src: &str) -> Result<SpecAst, SyntaxError> {
    let tokens = lex(src)?;
    Parser { tokens, pos: 0 }.spec()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.tokens[(self.pos + k).min(self.tokens.len() - 1)].tok
    }

    fn err<T>(&self, message: impl Into<String>) -> PResult<T> {
        let t = &self.tokens[self.pos];
        Err(SyntaxError { line: t.line, col: t.col, message: message.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{kw}`, found {}", self.peek()))
        }
    }

    fn punct(&mut self, p: &str) -> PResult<()> {
        if self.is_punct(p) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{p}`, found {}", self.peek()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.err(format!("expected identifier, found {other}")),
        }
    }

    fn int(&mut self) -> PResult<i64> {
        let neg = if self.is_punct("-") {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(if neg { -i } else { i })
            }
            other => self.err(format!("expected integer, found {other}")),
        }
    }

    fn end(&mut self, block: &str) -> PResult<()> {
        self.kw("end")?;
        self.kw(block)
    }

    fn spec(&mut self) -> PResult<SpecAst> {
        let mut agents = Vec::new();
        let mut evaluation = Vec::new();
        let mut init = None;
        let mut formulae = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof => break,
                Tok::Ident(s) if s == "Agent" => agents.push(self.agent()?),
                Tok::Ident(s) if s == "Evaluation" => {
                    self.bump();
                    while !self.is_kw("end") {
                        let name = self.ident()?;
                        self.kw("if")?;
                        let body = self.expr()?;
                        self.punct(";")?;
                        evaluation.push(PropDef { name, body });
                    }
                    self.end("Evaluation")?;
                }
                Tok::Ident(s) if s == "InitStates" => {
                    if init.is_some() {
                        return self.err("duplicate InitStates block");
                    }
                    self.bump();
                    init = Some(self.expr()?);
                    self.punct(";")?;
                    self.end("InitStates")?;
                }
                Tok::Ident(s) if s == "Formulae" => {
                    self.bump();
                    while !self.is_kw("end") {
                        formulae.push(self.formula()?);
                        self.punct(";")?;
                    }
                    self.end("Formulae")?;
                }
                other => {
                    return self
                        .err(format!("expected `Agent`, `Evaluation`, `InitStates` or `Formulae`, found {other}"))
                }
            }
        }
        let Some(init) = init else {
            return self.err("missing InitStates block");
        };
        Ok(SpecAst { agents, evaluation, init, formulae })
    }

    fn agent(&mut self) -> PResult<AgentAst> {
        self.kw("Agent")?;
        let name = self.ident()?;
        let mut obsvars = Vec::new();
        let mut vars = Vec::new();
        if self.is_kw("Obsvars") {
            if name != "Environment" {
                return self.err("only the Environment agent may declare Obsvars");
            }
            self.bump();
            self.punct(":")?;
            obsvars = self.decls()?;
            self.end("Obsvars")?;
        }
        if self.is_kw("Vars") {
            self.bump();
            self.punct(":")?;
            vars = self.decls()?;
            self.end("Vars")?;
        }
        self.kw("Actions")?;
        self.punct("=")?;
        let actions = self.ident_set()?;
        self.punct(";")?;
        self.kw("Protocol")?;
        self.punct(":")?;
        let mut protocol = Vec::new();
        while !self.is_kw("end") {
            let guard = if self.is_kw("Other") && matches!(self.peek_at(1), Tok::Punct(":")) {
                self.bump();
                Guard::Other
            } else {
                Guard::When(self.expr()?)
            };
            self.punct(":")?;
            let actions = self.ident_set()?;
            self.punct(";")?;
            protocol.push(ProtocolRule { guard, actions });
        }
        self.end("Protocol")?;
        self.kw("Evolution")?;
        self.punct(":")?;
        let mut evolution = Vec::new();
        while !self.is_kw("end") {
            let mut assigns = vec![self.assign()?];
            while self.is_kw("and") {
                self.bump();
                assigns.push(self.assign()?);
            }
            self.kw("if")?;
            let guard = self.expr()?;
            self.punct(";")?;
            evolution.push(EvolutionRule { assigns, guard });
        }
        self.end("Evolution")?;
        self.end("Agent")?;
        Ok(AgentAst { name, obsvars, vars, actions, protocol, evolution })
    }

    fn assign(&mut self) -> PResult<(String, Expr)> {
        let var = self.ident()?;
        self.punct("=")?;
        Ok((var, self.sum()?))
    }

    fn decls(&mut self) -> PResult<Vec<VarDecl>> {
        let mut out = Vec::new();
        while !self.is_kw("end") {
            let name = self.ident()?;
            self.punct(":")?;
            let ty = if self.is_kw("boolean") {
                self.bump();
                TypeAst::Boolean
            } else if self.is_punct("{") {
                TypeAst::Enum(self.ident_set()?)
            } else {
                let lo = self.int()?;
                self.punct("..")?;
                let hi = self.int()?;
                if lo > hi {
                    return self.err(format!("empty range {lo}..{hi}"));
                }
                TypeAst::Range(lo, hi)
            };
            self.punct(";")?;
            out.push(VarDecl { name, ty });
        }
        Ok(out)
    }

    fn ident_set(&mut self) -> PResult<Vec<String>> {
        self.punct("{")?;
        let mut out = Vec::new();
        if !self.is_punct("}") {
            out.push(self.ident()?);
            while self.is_punct(",") {
                self.bump();
                out.push(self.ident()?);
            }
        }
        self.punct("}")?;
        Ok(out)
    }

    fn formula(&mut self) -> PResult<Formula> {
        let op_name = self.ident()?;
        let Ok(op) = op_name.parse::<Temporal>() else {
            self.pos -= 1;
            return self.err(format!("expected AG, AF, EF or EG, found `{op_name}`"));
        };
        Ok(Formula::new(op, self.prop_or()?))
    }

    fn prop_or(&mut self) -> PResult<PropExpr> {
        let mut l = self.prop_and()?;
        while self.is_kw("or") {
            self.bump();
            l = PropExpr::Or(Box::new(l), Box::new(self.prop_and()?));
        }
        Ok(l)
    }

    fn prop_and(&mut self) -> PResult<PropExpr> {
        let mut l = self.prop_unary()?;
        while self.is_kw("and") {
            self.bump();
            l = PropExpr::And(Box::new(l), Box::new(self.prop_unary()?));
        }
        Ok(l)
    }

    fn prop_unary(&mut self) -> PResult<PropExpr> {
        if self.is_punct("!") {
            self.bump();
            return Ok(self.prop_unary()?.negate());
        }
        if self.is_punct("(") {
            self.bump();
            let inner = self.prop_or()?;
            self.punct(")")?;
            return Ok(inner);
        }
        match self.ident()?.as_str() {
            "true" => Ok(PropExpr::True),
            "false" => Ok(PropExpr::False),
            name => Ok(PropExpr::atom(name)),
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut l = self.conj()?;
        while self.is_kw("or") {
            self.bump();
            l = Expr::Bin(BinOp::Or, Box::new(l), Box::new(self.conj()?));
        }
        Ok(l)
    }

    fn conj(&mut self) -> PResult<Expr> {
        let mut l = self.negation()?;
        while self.is_kw("and") {
            self.bump();
            l = Expr::Bin(BinOp::And, Box::new(l), Box::new(self.negation()?));
        }
        Ok(l)
    }

    fn negation(&mut self) -> PResult<Expr> {
        if self.is_punct("!") {
            self.bump();
            return Ok(Expr::Not(Box::new(self.negation()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let l = self.sum()?;
        let op = match self.peek() {
            Tok::Punct("=") => BinOp::Eq,
            Tok::Punct("!=") => BinOp::Ne,
            Tok::Punct("<") => BinOp::Lt,
            Tok::Punct("<=") => BinOp::Le,
            Tok::Punct(">") => BinOp::Gt,
            Tok::Punct(">=") => BinOp::Ge,
            _ => return Ok(l),
        };
        self.bump();
        let r = self.sum()?;
        Ok(Expr::Bin(op, Box::new(l), Box::new(r)))
    }

    fn sum(&mut self) -> PResult<Expr> {
        let mut l = self.atom()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("+") => BinOp::Add,
                Tok::Punct("-") => BinOp::Sub,
                _ => return Ok(l),
            };
            self.bump();
            l = Expr::Bin(op, Box::new(l), Box::new(self.atom()?));
        }
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Expr::Int(i))
            }
            Tok::Punct("-") if matches!(self.peek_at(1), Tok::Int(_)) => Ok(Expr::Int(self.int()?)),
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.punct(")")?;
                Ok(e)
            }
            Tok::Ident(s) => {
                self.bump();
                match s.as_str() {
                    "true" => return Ok(Expr::Bool(true)),
                    "false" => return Ok(Expr::Bool(false)),
                    "Action" => return Ok(Expr::Action),
                    "and" | "or" | "if" | "end" => {
                        self.pos -= 1;
                        return self.err(format!("unexpected keyword `{s}`"));
                    }
                    _ => {}
                }
                if self.is_punct(".") {
                    self.bump();
                    let field = self.ident()?;
                    Ok(Expr::Qualified(s, field))
                } else {
                    Ok(Expr::Ident(s))
                }
            }
            other => self.err(format!("expected expression, found {other}")),
        }
    }
}
