//! Value model shared by every substrate: values, tuples, templates with
//! binders, attribute maps and the attribute predicate language.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("tuples must hold at least one item")]
    EmptyTuple,
    #[error("templates must hold at least one slot")]
    EmptyTemplate,
    #[error("binder `?{0}` appears more than once in a template")]
    DuplicateBinder(Symbol),
    #[error("cannot compare {left} with {right} using `{op}`")]
    IncompatibleComparison { op: CmpOp, left: &'static str, right: &'static str },
    #[error("distance test expects {expected}, found {found}")]
    DistanceOperand { expected: &'static str, found: &'static str },
}

/// Identifier string. Clones share one allocation.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(s: &str) -> Self {
        Symbol(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Opaque agent identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Grid cell, 1-based on both axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub x: i32,
    pub y: i32,
}

impl Pos {
    pub const fn new(x: i32, y: i32) -> Self {
        Pos { x, y }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Heading. The interpreted-system scenarios use the four compass moves;
/// the swarm scenarios use quantised angles in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
    Degrees(u16),
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Up => f.write_str("Up"),
            Direction::Down => f.write_str("Down"),
            Direction::Left => f.write_str("Left"),
            Direction::Right => f.write_str("Right"),
            Direction::Degrees(d) => write!(f, "{d}deg"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Sym(Symbol),
    Agent(AgentId),
    Pos(Pos),
    Dir(Direction),
}

impl Value {
    pub fn sym(s: &str) -> Self {
        Value::Sym(Symbol::new(s))
    }

    pub fn pos(x: i32, y: i32) -> Self {
        Value::Pos(Pos::new(x, y))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Int(_) => "integer",
            Value::Sym(_) => "symbol",
            Value::Agent(_) => "agent-id",
            Value::Pos(_) => "position",
            Value::Dir(_) => "direction",
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_pos(&self) -> Option<Pos> {
        match self {
            Value::Pos(p) => Some(*p),
            _ => None,
        }
    }

    fn orderable(&self) -> bool {
        matches!(self, Value::Int(_) | Value::Agent(_))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Sym(s) => write!(f, "\"{s}\""),
            Value::Agent(a) => write!(f, "{a}"),
            Value::Pos(p) => write!(f, "{p}"),
            Value::Dir(d) => write!(f, "{d}"),
        }
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::sym(s)
    }
}

impl From<Pos> for Value {
    fn from(p: Pos) -> Self {
        Value::Pos(p)
    }
}

impl From<Direction> for Value {
    fn from(d: Direction) -> Self {
        Value::Dir(d)
    }
}

/// Immutable, non-empty ordered list of values.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Tuple(Arc<[Value]>);

impl Tuple {
    pub fn new(items: Vec<Value>) -> Result<Self, KernelError> {
        if items.is_empty() {
            return Err(KernelError::EmptyTuple);
        }
        Ok(Tuple(items.into()))
    }

    pub fn items(&self) -> &[Value] {
        &self.0
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn head(&self) -> &Value {
        &self.0[0]
    }

    /// First item if it is a symbol.
    pub fn head_symbol(&self) -> Option<&Symbol> {
        match &self.0[0] {
            Value::Sym(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// Builds a tuple from a non-empty list of `Into<Value>` items.
#[macro_export]
macro_rules! tuple {
    ($($item:expr),+ $(,)?) => {
        $crate::kernel::Tuple::new(vec![$($crate::kernel::Value::from($item)),+])
            .expect("tuple! always has at least one item")
    };
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Slot {
    Lit(Value),
    Bind(Symbol),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Template(Vec<Slot>);

pub type Bindings = BTreeMap<Symbol, Value>;

impl Template {
    pub fn new(slots: Vec<Slot>) -> Result<Self, KernelError> {
        if slots.is_empty() {
            return Err(KernelError::EmptyTemplate);
        }
        let mut seen = std::collections::BTreeSet::new();
        for slot in &slots {
            if let Slot::Bind(name) = slot {
                if !seen.insert(name.clone()) {
                    return Err(KernelError::DuplicateBinder(name.clone()));
                }
            }
        }
        Ok(Template(slots))
    }

    pub fn slots(&self) -> &[Slot] {
        &self.0
    }

    /// Bindings when `tuple` matches, `None` otherwise.
    pub fn matches(&self, tuple: &Tuple) -> Option<Bindings> {
        if self.0.len() != tuple.arity() {
            return None;
        }
        let mut bindings = Bindings::new();
        for (slot, item) in self.0.iter().zip(tuple.items()) {
            match slot {
                Slot::Lit(v) if v == item => {}
                Slot::Lit(_) => return None,
                Slot::Bind(name) => {
                    bindings.insert(name.clone(), item.clone());
                }
            }
        }
        Some(bindings)
    }

    /// Replaces binders with their bound values. `None` if any binder is unbound.
    pub fn instantiate(&self, bindings: &Bindings) -> Option<Tuple> {
        self.0
            .iter()
            .map(|slot| match slot {
                Slot::Lit(v) => Some(v.clone()),
                Slot::Bind(name) => bindings.get(name).cloned(),
            })
            .collect::<Option<Vec<_>>>()
            .map(|v| Tuple(v.into()))
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match s {
                Slot::Lit(v) => write!(f, "{v}")?,
                Slot::Bind(n) => write!(f, "?{n}")?,
            }
        }
        f.write_str(")")
    }
}

/// Free function form of [`Template::matches`].
pub fn match_template(template: &Template, tuple: &Tuple) -> Option<Bindings> {
    template.matches(tuple)
}

/// Named values a component exposes.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttributeMap(BTreeMap<Symbol, Value>);

impl AttributeMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: impl Into<Value>) -> Self {
        self.set(Symbol::new(name), value.into());
        self
    }

    pub fn get(&self, name: &Symbol) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn get_str(&self, name: &str) -> Option<&Value> {
        self.0.get(&Symbol::new(name))
    }

    pub fn set(&mut self, name: Symbol, value: Value) {
        self.0.insert(name, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, &Value)> {
        self.0.iter()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn is_ordering(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        })
    }
}

/// Predicate operand. `Var` is a process parameter, substituted by
/// [`Predicate::bind`] before the predicate is evaluated.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Operand {
    Attr(Symbol),
    SelfAttr(Symbol),
    Lit(Value),
    Var(Symbol),
}

impl Operand {
    pub fn attr(name: &str) -> Self {
        Operand::Attr(Symbol::new(name))
    }

    pub fn own(name: &str) -> Self {
        Operand::SelfAttr(Symbol::new(name))
    }

    pub fn lit(v: impl Into<Value>) -> Self {
        Operand::Lit(v.into())
    }

    pub fn var(name: &str) -> Self {
        Operand::Var(Symbol::new(name))
    }

    fn resolve<'a>(&'a self, own: &'a AttributeMap, target: &'a AttributeMap) -> Option<&'a Value> {
        match self {
            Operand::Attr(n) => target.get(n),
            Operand::SelfAttr(n) => own.get(n),
            Operand::Lit(v) => Some(v),
            Operand::Var(_) => None,
        }
    }

    fn bind(&self, bindings: &Bindings) -> Operand {
        match self {
            Operand::Var(n) => bindings.get(n).map(|v| Operand::Lit(v.clone())).unwrap_or_else(|| self.clone()),
            other => other.clone(),
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Attr(n) => write!(f, "{n}"),
            Operand::SelfAttr(n) => write!(f, "self.{n}"),
            Operand::Lit(v) => write!(f, "{v}"),
            Operand::Var(n) => write!(f, "{n}"),
        }
    }
}

/// Distance test used by `dist(a, b) <= r`. The default is plain
/// Euclidean distance; arenas supply their own (e.g. toroidal wrap).
pub trait Metric {
    fn within(&self, a: Pos, b: Pos, range: i64) -> bool;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Euclidean;

impl Metric for Euclidean {
    fn within(&self, a: Pos, b: Pos, range: i64) -> bool {
        if range < 0 {
            return false;
        }
        let dx = i64::from(a.x - b.x);
        let dy = i64::from(a.y - b.y);
        dx * dx + dy * dy <= range * range
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Predicate {
    True,
    False,
    Cmp(CmpOp, Operand, Operand),
    Within { a: Operand, b: Operand, range: Operand },
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    /// Comparison, rejected up front when both kinds are known and incompatible.
    pub fn cmp(op: CmpOp, left: Operand, right: Operand) -> Result<Self, KernelError> {
        let kinds = |o: &Operand| match o {
            Operand::Lit(v) => Some(v.clone()),
            _ => None,
        };
        let (l, r) = (kinds(&left), kinds(&right));
        if let (Some(l), Some(r)) = (&l, &r) {
            if l.kind() != r.kind() {
                return Err(KernelError::IncompatibleComparison { op, left: l.kind(), right: r.kind() });
            }
        }
        if op.is_ordering() {
            for v in [&l, &r].into_iter().flatten() {
                if !v.orderable() {
                    return Err(KernelError::IncompatibleComparison { op, left: v.kind(), right: v.kind() });
                }
            }
        }
        Ok(Predicate::Cmp(op, left, right))
    }

    pub fn eq(left: Operand, right: Operand) -> Result<Self, KernelError> {
        Self::cmp(CmpOp::Eq, left, right)
    }

    /// `dist(a, b) <= range`.
    pub fn within(a: Operand, b: Operand, range: Operand) -> Result<Self, KernelError> {
        for o in [&a, &b] {
            if let Operand::Lit(v) = o {
                if v.as_pos().is_none() {
                    return Err(KernelError::DistanceOperand { expected: "position", found: v.kind() });
                }
            }
        }
        if let Operand::Lit(v) = &range {
            if v.as_int().is_none() {
                return Err(KernelError::DistanceOperand { expected: "integer", found: v.kind() });
            }
        }
        Ok(Predicate::Within { a, b, range })
    }

    #[allow(clippy::should_implement_trait)]
    pub fn and(self, other: Predicate) -> Predicate {
        Predicate::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Predicate) -> Predicate {
        Predicate::Or(Box::new(self), Box::new(other))
    }

    pub fn negate(self) -> Predicate {
        Predicate::Not(Box::new(self))
    }

    /// Substitutes process variables by their bound values.
    pub fn bind(&self, bindings: &Bindings) -> Predicate {
        match self {
            Predicate::True | Predicate::False => self.clone(),
            Predicate::Cmp(op, l, r) => Predicate::Cmp(*op, l.bind(bindings), r.bind(bindings)),
            Predicate::Within { a, b, range } => {
                Predicate::Within { a: a.bind(bindings), b: b.bind(bindings), range: range.bind(bindings) }
            }
            Predicate::And(l, r) => l.bind(bindings).and(r.bind(bindings)),
            Predicate::Or(l, r) => l.bind(bindings).or(r.bind(bindings)),
            Predicate::Not(p) => p.bind(bindings).negate(),
        }
    }

    /// Evaluates with the Euclidean metric.
    pub fn eval(&self, own: &AttributeMap, target: &AttributeMap) -> bool {
        self.eval_with(own, target, &Euclidean)
    }

    /// Evaluates against `target`'s attributes, with `self.` references
    /// resolved in `own`. Any missing attribute or kind mismatch in a
    /// comparison makes that comparison false.
    pub fn eval_with(&self, own: &AttributeMap, target: &AttributeMap, metric: &dyn Metric) -> bool {
        match self {
            Predicate::True => true,
            Predicate::False => false,
            Predicate::Cmp(op, l, r) => {
                let (Some(l), Some(r)) = (l.resolve(own, target), r.resolve(own, target)) else {
                    return false;
                };
                compare(*op, l, r)
            }
            Predicate::Within { a, b, range } => {
                let a = a.resolve(own, target).and_then(Value::as_pos);
                let b = b.resolve(own, target).and_then(Value::as_pos);
                let r = range.resolve(own, target).and_then(Value::as_int);
                match (a, b, r) {
                    (Some(a), Some(b), Some(r)) => metric.within(a, b, r),
                    _ => false,
                }
            }
            Predicate::And(l, r) => l.eval_with(own, target, metric) && r.eval_with(own, target, metric),
            Predicate::Or(l, r) => l.eval_with(own, target, metric) || r.eval_with(own, target, metric),
            Predicate::Not(p) => !p.eval_with(own, target, metric),
        }
    }
}

fn compare(op: CmpOp, l: &Value, r: &Value) -> bool {
    if l.kind() != r.kind() {
        return false;
    }
    match op {
        CmpOp::Eq => l == r,
        CmpOp::Ne => l != r,
        _ => {
            let ord = match (l, r) {
                (Value::Int(a), Value::Int(b)) => a.cmp(b),
                (Value::Agent(a), Value::Agent(b)) => a.cmp(b),
                _ => return false,
            };
            match op {
                CmpOp::Lt => ord.is_lt(),
                CmpOp::Le => ord.is_le(),
                CmpOp::Gt => ord.is_gt(),
                CmpOp::Ge => ord.is_ge(),
                CmpOp::Eq | CmpOp::Ne => unreachable!(),
            }
        }
    }
}

/// Free function form of [`Predicate::eval`].
pub fn eval_predicate(p: &Predicate, own: &AttributeMap, target: &AttributeMap) -> bool {
    p.eval(own, target)
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::True => f.write_str("true"),
            Predicate::False => f.write_str("false"),
            Predicate::Cmp(op, l, r) => write!(f, "{l} {op} {r}"),
            Predicate::Within { a, b, range } => write!(f, "dist({a}, {b}) <= {range}"),
            Predicate::And(l, r) => write!(f, "({l} && {r})"),
            Predicate::Or(l, r) => write!(f, "({l} || {r})"),
            Predicate::Not(p) => write!(f, "!{p}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn food_template() -> Template {
        Template::new(vec![Slot::Lit(Value::sym("food")), Slot::Bind("f".into())]).unwrap()
    }

    /// `task = "idle" && dist(pos, self.pos) <= range`
    fn food_guard() -> Predicate {
        Predicate::eq(Operand::attr("task"), Operand::lit("idle"))
            .unwrap()
            .and(Predicate::within(Operand::attr("pos"), Operand::own("pos"), Operand::attr("range")).unwrap())
    }

    #[test]
    fn binder_captures_position() {
        let b = food_template().matches(&tuple!("food", Pos::new(3, 4))).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[&Symbol::new("f")], Value::pos(3, 4));
    }

    #[test]
    fn literal_only_template_binds_nothing() {
        let t = Template::new(vec![Slot::Lit(Value::sym("lock"))]).unwrap();
        assert_eq!(t.matches(&tuple!("lock")), Some(Bindings::new()));
    }

    #[test]
    fn head_mismatch_and_arity_mismatch() {
        assert_eq!(food_template().matches(&tuple!("water", 7)), None);
        assert_eq!(food_template().matches(&tuple!("food")), None);
    }

    #[test]
    fn constructors_reject_bad_shapes() {
        assert_eq!(Tuple::new(vec![]), Err(KernelError::EmptyTuple));
        assert_eq!(Template::new(vec![]), Err(KernelError::EmptyTemplate));
        let dup = Template::new(vec![Slot::Bind("x".into()), Slot::Bind("x".into())]);
        assert_eq!(dup, Err(KernelError::DuplicateBinder("x".into())));
    }

    #[test]
    fn food_guard_selects_idle_forager_in_range() {
        // This predicate is evaluated from the item's point of view: `self`
        // is the item and `range` belongs to the forager.
        let item = AttributeMap::new().with("pos", Pos::new(2, 3)).with("range", 2);
        let forager = AttributeMap::new().with("task", "idle").with("pos", Pos::new(2, 2)).with("range", 2);
        assert!(food_guard().eval(&item, &forager));
        let busy = forager.clone().with("task", "work");
        assert!(!food_guard().eval(&item, &busy));
    }

    #[test]
    fn missing_attribute_is_false_not_error() {
        let item = AttributeMap::new().with("pos", Pos::new(2, 3));
        let other_item = AttributeMap::new().with("pos", Pos::new(2, 3));
        assert!(!food_guard().eval(&item, &other_item));
        assert!(food_guard().negate().eval(&item, &other_item));
    }

    #[test]
    fn constant_true_and_reflexive_inequality() {
        let m = AttributeMap::new().with("direction", Direction::Degrees(90));
        assert!(Predicate::True.eval(&m, &AttributeMap::new()));
        let ne = Predicate::cmp(CmpOp::Ne, Operand::attr("direction"), Operand::own("direction")).unwrap();
        assert!(!ne.eval(&m, &m));
    }

    #[test]
    fn incompatible_literals_rejected_at_construction() {
        let err = Predicate::cmp(CmpOp::Lt, Operand::lit(3), Operand::lit("a")).unwrap_err();
        assert!(matches!(err, KernelError::IncompatibleComparison { .. }));
        assert!(Predicate::cmp(CmpOp::Lt, Operand::attr("pos"), Operand::lit(Pos::new(1, 1))).is_err());
        assert!(Predicate::within(Operand::lit(3), Operand::own("pos"), Operand::lit(1)).is_err());
        assert!(Predicate::within(Operand::attr("pos"), Operand::own("pos"), Operand::lit("x")).is_err());
    }

    #[test]
    fn bind_substitutes_parameters() {
        let p = Predicate::eq(Operand::attr("pos"), Operand::var("food")).unwrap();
        let target = AttributeMap::new().with("pos", Pos::new(1, 1));
        assert!(!p.eval(&AttributeMap::new(), &target));
        let mut b = Bindings::new();
        b.insert("food".into(), Value::pos(1, 1));
        assert!(p.bind(&b).eval(&AttributeMap::new(), &target));
    }

    fn arb_value() -> impl Strategy<Value = Value> {
        prop_oneof![
            (-5i64..5).prop_map(Value::Int),
            prop::sample::select(vec!["a", "b", "food"]).prop_map(Value::sym),
            (1i32..4, 1i32..4).prop_map(|(x, y)| Value::pos(x, y)),
        ]
    }

    proptest! {
        #[test]
        fn match_then_instantiate_round_trips(
            items in prop::collection::vec(arb_value(), 1..5),
            mask in prop::collection::vec(any::<bool>(), 5),
        ) {
            let tuple = Tuple::new(items.clone()).unwrap();
            let slots = items.iter().enumerate().map(|(i, v)| {
                if mask[i] { Slot::Bind(Symbol::new(&format!("x{i}"))) } else { Slot::Lit(v.clone()) }
            }).collect();
            let template = Template::new(slots).unwrap();
            let b1 = template.matches(&tuple).expect("template built from the tuple matches it");
            let b2 = template.matches(&tuple).unwrap();
            prop_assert_eq!(&b1, &b2);
            prop_assert_eq!(template.instantiate(&b1).unwrap(), tuple);
        }

        #[test]
        fn evaluation_leaves_maps_untouched(x in 1i32..5, y in 1i32..5, r in 0i64..4) {
            let own = AttributeMap::new().with("pos", Pos::new(x, y)).with("range", r);
            let target = AttributeMap::new().with("pos", Pos::new(y, x)).with("task", "idle").with("range", r);
            let (own0, target0) = (own.clone(), target.clone());
            let _ = food_guard().eval(&own, &target);
            prop_assert_eq!(own, own0);
            prop_assert_eq!(target, target0);
        }
    }
}
