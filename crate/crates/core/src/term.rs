//! Abstract syntax of CCS with signals.
//!
//! Terms are immutable and shared through [`Arc`], so a state space can hold
//! many terms that share sub-terms. Names may carry parameters; inside
//! defining equations those parameters are expressions over the equation's
//! pattern variables, everywhere else they are ground values.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Atomic parameter value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Parameter expression. Ground names only contain [`Expr::Val`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Val(Value),
    Var(Arc<str>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
}

pub type Bindings = HashMap<Arc<str>, Value>;

impl Expr {
    pub fn int(n: i64) -> Self {
        Expr::Val(Value::Int(n))
    }

    pub fn var(v: &str) -> Self {
        Expr::Var(v.into())
    }

    pub fn is_ground(&self) -> bool {
        matches!(self, Expr::Val(_))
    }

    /// Substitutes bound variables and folds constant arithmetic. Unbound
    /// variables are left in place.
    pub fn subst(&self, env: &Bindings) -> Result<Expr, ModelError> {
        Ok(match self {
            Expr::Val(_) => self.clone(),
            Expr::Var(v) => match env.get(v) {
                Some(val) => Expr::Val(val.clone()),
                None => self.clone(),
            },
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                let (a, b) = (a.subst(env)?, b.subst(env)?);
                match (&a, &b) {
                    (Expr::Val(Value::Int(x)), Expr::Val(Value::Int(y))) => {
                        let r = if matches!(self, Expr::Add(..)) { x + y } else { x - y };
                        Expr::int(r)
                    }
                    (Expr::Val(Value::Bool(_)), Expr::Val(_)) | (Expr::Val(_), Expr::Val(Value::Bool(_))) => {
                        return Err(ModelError::TypeError(format!("arithmetic on boolean in `{self}`")))
                    }
                    _ if matches!(self, Expr::Add(..)) => Expr::Add(Box::new(a), Box::new(b)),
                    _ => Expr::Sub(Box::new(a), Box::new(b)),
                }
            }
        })
    }

    pub fn eval(&self, env: &Bindings) -> Result<Value, ModelError> {
        match self.subst(env)? {
            Expr::Val(v) => Ok(v),
            other => Err(ModelError::UnboundVariable(other.free_vars().into_iter().next().unwrap_or_default())),
        }
    }

    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Val(_) => {}
            Expr::Var(v) => out.push(v.to_string()),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Val(v) => write!(f, "{v}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Add(a, b) => write!(f, "{a}+{}", Paren(b)),
            Expr::Sub(a, b) => write!(f, "{a}-{}", Paren(b)),
        }
    }
}

/// Wraps compound right operands so `a-(b-c)` survives a print/parse cycle.
struct Paren<'a>(&'a Expr);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Expr::Add(..) | Expr::Sub(..) => write!(f, "({})", self.0),
            e => write!(f, "{e}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// Boolean side condition of an indexed sum.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Guard {
    True,
    Cmp(CmpOp, Expr, Expr),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
    Not(Box<Guard>),
}

impl Guard {
    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Self {
        Guard::Cmp(op, a, b)
    }

    pub fn and(self, other: Guard) -> Self {
        Guard::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Guard) -> Self {
        Guard::Or(Box::new(self), Box::new(other))
    }

    pub fn subst(&self, env: &Bindings) -> Result<Guard, ModelError> {
        Ok(match self {
            Guard::True => Guard::True,
            Guard::Cmp(op, a, b) => Guard::Cmp(*op, a.subst(env)?, b.subst(env)?),
            Guard::And(a, b) => Guard::And(Box::new(a.subst(env)?), Box::new(b.subst(env)?)),
            Guard::Or(a, b) => Guard::Or(Box::new(a.subst(env)?), Box::new(b.subst(env)?)),
            Guard::Not(a) => Guard::Not(Box::new(a.subst(env)?)),
        })
    }

    pub fn eval(&self, env: &Bindings) -> Result<bool, ModelError> {
        Ok(match self {
            Guard::True => true,
            Guard::Cmp(op, a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                match (op, &a, &b) {
                    (CmpOp::Eq, _, _) => a == b,
                    (CmpOp::Ne, _, _) => a != b,
                    (_, Value::Int(x), Value::Int(y)) => match op {
                        CmpOp::Lt => x < y,
                        CmpOp::Le => x <= y,
                        CmpOp::Gt => x > y,
                        CmpOp::Ge => x >= y,
                        CmpOp::Eq | CmpOp::Ne => unreachable!(),
                    },
                    _ => return Err(ModelError::TypeError(format!("ordering on boolean in `{self}`"))),
                }
            }
            Guard::And(a, b) => a.eval(env)? && b.eval(env)?,
            Guard::Or(a, b) => a.eval(env)? || b.eval(env)?,
            Guard::Not(a) => !a.eval(env)?,
        })
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Precedence: || < && < ! < comparison.
        fn go(g: &Guard, level: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match g {
                Guard::True => write!(f, "true"),
                Guard::Cmp(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
                Guard::Or(a, b) => {
                    if level > 0 {
                        write!(f, "(")?;
                    }
                    go(a, 0, f)?;
                    write!(f, " || ")?;
                    go(b, 1, f)?;
                    if level > 0 {
                        write!(f, ")")?;
                    }
                    Ok(())
                }
                Guard::And(a, b) => {
                    if level > 1 {
                        write!(f, "(")?;
                    }
                    go(a, 1, f)?;
                    write!(f, " && ")?;
                    go(b, 2, f)?;
                    if level > 1 {
                        write!(f, ")")?;
                    }
                    Ok(())
                }
                Guard::Not(a) => {
                    write!(f, "!")?;
                    go(a, 3, f)
                }
            }
        }
        go(self, 0, f)
    }
}

/// A (possibly parameterised) name: `noti_number[2]_3` has base
/// `noti_number` and parameters `[2, 3]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name {
    pub base: Arc<str>,
    pub params: Vec<Expr>,
}

impl Name {
    pub fn new(base: &str) -> Self {
        Name { base: base.into(), params: Vec::new() }
    }

    pub fn indexed(base: &str, params: impl IntoIterator<Item = i64>) -> Self {
        Name { base: base.into(), params: params.into_iter().map(Expr::int).collect() }
    }

    pub fn with_params(base: &str, params: Vec<Expr>) -> Self {
        Name { base: base.into(), params }
    }

    pub fn is_ground(&self) -> bool {
        self.params.iter().all(Expr::is_ground)
    }

    pub fn subst(&self, env: &Bindings) -> Result<Name, ModelError> {
        if self.params.is_empty() {
            return Ok(self.clone());
        }
        let params = self.params.iter().map(|p| p.subst(env)).collect::<Result<_, _>>()?;
        Ok(Name { base: self.base.clone(), params })
    }

    /// Ground parameter values; `None` if some parameter is not ground.
    pub fn values(&self) -> Option<Vec<Value>> {
        self.params
            .iter()
            .map(|p| match p {
                Expr::Val(v) => Some(v.clone()),
                _ => None,
            })
            .collect()
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.base)?;
        for (i, p) in self.params.iter().enumerate() {
            if i == 0 {
                write!(f, "[{p}]")?;
            } else {
                match p {
                    Expr::Val(_) | Expr::Var(_) => write!(f, "_{p}")?,
                    _ => write!(f, "_({p})")?,
                }
            }
        }
        Ok(())
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

/// Action alphabet: handshake names and co-names, signal reads and τ.
///
/// `Emit` only occurs in the loop encoding of signal emission used to
/// cross-check bisimilarity; terms never perform it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Tau,
    Name(Name),
    CoName(Name),
    Signal(Name),
    Emit(Name),
}

impl Action {
    pub fn name(&self) -> Option<&Name> {
        match self {
            Action::Tau => None,
            Action::Name(n) | Action::CoName(n) | Action::Signal(n) | Action::Emit(n) => Some(n),
        }
    }

    pub fn is_handshake(&self) -> bool {
        matches!(self, Action::Name(_) | Action::CoName(_))
    }

    /// Complement of a handshake action (and the emit/read pair of the loop
    /// encoding). τ and plain signal reads outside the encoding have none.
    pub fn complement(&self) -> Option<Action> {
        match self {
            Action::Name(n) => Some(Action::CoName(n.clone())),
            Action::CoName(n) => Some(Action::Name(n.clone())),
            Action::Emit(n) => Some(Action::Signal(n.clone())),
            Action::Signal(_) | Action::Tau => None,
        }
    }

    pub fn subst(&self, env: &Bindings) -> Result<Action, ModelError> {
        Ok(match self {
            Action::Tau => Action::Tau,
            Action::Name(n) => Action::Name(n.subst(env)?),
            Action::CoName(n) => Action::CoName(n.subst(env)?),
            Action::Signal(n) => Action::Signal(n.subst(env)?),
            Action::Emit(n) => Action::Emit(n.subst(env)?),
        })
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Tau => write!(f, "tau"),
            Action::Name(n) | Action::Signal(n) => write!(f, "{n}"),
            Action::CoName(n) => write!(f, "'{n}"),
            Action::Emit(n) => write!(f, "!{n}"),
        }
    }
}

impl Action {
    /// Unambiguous text form used in JSON: like `Display`, but signal reads
    /// carry a `?` so they cannot be confused with handshake names.
    pub fn to_key(&self) -> String {
        match self {
            Action::Signal(n) => format!("?{n}"),
            other => other.to_string(),
        }
    }

    pub fn from_key(text: &str) -> Result<Action, crate::error::ParseError> {
        let name = crate::parser::parse_name;
        Ok(if text == "tau" {
            Action::Tau
        } else if let Some(rest) = text.strip_prefix('\'') {
            Action::CoName(name(rest)?)
        } else if let Some(rest) = text.strip_prefix('?') {
            Action::Signal(name(rest)?)
        } else if let Some(rest) = text.strip_prefix('!') {
            Action::Emit(name(rest)?)
        } else {
            Action::Name(name(text)?)
        })
    }
}

impl Serialize for Action {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_key())
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Action::from_key(&text).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Name {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Name {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        crate::parser::parse_name(&text).map_err(serde::de::Error::custom)
    }
}

/// Renaming of base handshake names and of signals; identity elsewhere.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Relabelling {
    pub handshake: BTreeMap<Name, Name>,
    pub signal: BTreeMap<Name, Name>,
}

impl Relabelling {
    pub fn apply(&self, action: &Action) -> Action {
        let map = |m: &BTreeMap<Name, Name>, n: &Name| m.get(n).cloned().unwrap_or_else(|| n.clone());
        match action {
            Action::Tau => Action::Tau,
            Action::Name(n) => Action::Name(map(&self.handshake, n)),
            Action::CoName(n) => Action::CoName(map(&self.handshake, n)),
            Action::Signal(n) => Action::Signal(map(&self.signal, n)),
            Action::Emit(n) => Action::Emit(map(&self.signal, n)),
        }
    }

    pub fn apply_signal(&self, s: &Name) -> Name {
        self.signal.get(s).cloned().unwrap_or_else(|| s.clone())
    }

    /// Pairs `(new, old)` in the order they are printed.
    pub fn pairs(&self) -> impl Iterator<Item = (&Name, &Name)> {
        self.handshake.iter().chain(self.signal.iter()).map(|(old, new)| (new, old))
    }

    fn subst(&self, env: &Bindings) -> Result<Relabelling, ModelError> {
        let go = |m: &BTreeMap<Name, Name>| -> Result<BTreeMap<Name, Name>, ModelError> {
            m.iter().map(|(k, v)| Ok((k.subst(env)?, v.subst(env)?))).collect()
        };
        Ok(Relabelling { handshake: go(&self.handshake)?, signal: go(&self.signal)? })
    }
}

/// Index domain of an indexed sum.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    /// A `range N = lo..hi` declared in the environment.
    Named(Arc<str>),
    /// Inclusive bounds.
    Span(Expr, Expr),
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Named(n) => write!(f, "{n}"),
            Domain::Span(lo, hi) => write!(f, "{}..{}", Bracket(lo), Bracket(hi)),
        }
    }
}

struct Bracket<'a>(&'a Expr);

impl fmt::Display for Bracket<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Expr::Add(..) | Expr::Sub(..) => write!(f, "({})", self.0),
            e => write!(f, "{e}"),
        }
    }
}

/// `sum var in domain when guard . body`
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexedSum {
    pub var: Arc<str>,
    pub domain: Domain,
    pub guard: Guard,
    pub body: Arc<Term>,
}

/// A CCS^s process term.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Nil,
    Prefix(Action, Arc<Term>),
    /// Binary or wider choice; always at least two branches.
    Sum(Vec<Arc<Term>>),
    IndexedSum(Box<IndexedSum>),
    Par(Arc<Term>, Arc<Term>),
    Restrict(Arc<Term>, Arc<BTreeSet<Name>>),
    Relabel(Arc<Term>, Arc<Relabelling>),
    /// `P ^ s`
    Signal(Arc<Term>, Name),
    Ident(Name),
}

impl Term {
    pub fn nil() -> Arc<Term> {
        Arc::new(Term::Nil)
    }

    pub fn prefix(action: Action, body: Arc<Term>) -> Arc<Term> {
        Arc::new(Term::Prefix(action, body))
    }

    /// Choice over `branches`; collapses to `0` or the single branch.
    pub fn sum(mut branches: Vec<Arc<Term>>) -> Arc<Term> {
        match branches.len() {
            0 => Term::nil(),
            1 => branches.pop().unwrap(),
            _ => Arc::new(Term::Sum(branches)),
        }
    }

    pub fn par(left: Arc<Term>, right: Arc<Term>) -> Arc<Term> {
        Arc::new(Term::Par(left, right))
    }

    /// Left-nested parallel composition of all components.
    pub fn par_all(components: impl IntoIterator<Item = Arc<Term>>) -> Arc<Term> {
        let mut it = components.into_iter();
        let first = it.next().unwrap_or_else(Term::nil);
        it.fold(first, Term::par)
    }

    pub fn restrict(body: Arc<Term>, names: impl IntoIterator<Item = Name>) -> Arc<Term> {
        Arc::new(Term::Restrict(body, Arc::new(names.into_iter().collect())))
    }

    pub fn relabel(body: Arc<Term>, f: Relabelling) -> Arc<Term> {
        Arc::new(Term::Relabel(body, Arc::new(f)))
    }

    pub fn signal(body: Arc<Term>, s: Name) -> Arc<Term> {
        Arc::new(Term::Signal(body, s))
    }

    pub fn ident(name: Name) -> Arc<Term> {
        Arc::new(Term::Ident(name))
    }

    pub fn indexed_sum(var: &str, domain: Domain, guard: Guard, body: Arc<Term>) -> Arc<Term> {
        Arc::new(Term::IndexedSum(Box::new(IndexedSum { var: var.into(), domain, guard, body })))
    }

    /// Every sub-term, pre-order, including `self`.
    pub fn walk<'a>(self: &'a Arc<Term>, visit: &mut dyn FnMut(&'a Arc<Term>)) {
        visit(self);
        match &**self {
            Term::Nil | Term::Ident(_) => {}
            Term::Prefix(_, b) | Term::Restrict(b, _) | Term::Relabel(b, _) | Term::Signal(b, _) => b.walk(visit),
            Term::Sum(bs) => bs.iter().for_each(|b| b.walk(visit)),
            Term::IndexedSum(s) => s.body.walk(visit),
            Term::Par(l, r) => {
                l.walk(visit);
                r.walk(visit);
            }
        }
    }

    pub fn size(self: &Arc<Term>) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }
}

/// Pattern in the head of a defining equation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Pattern {
    Var(Arc<str>),
    Val(Value),
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Var(v) => write!(f, "{v}"),
            Pattern::Val(v) => write!(f, "{v}"),
        }
    }
}

/// `head = body`, where the head's parameters are patterns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equation {
    pub base: Arc<str>,
    pub params: Vec<Pattern>,
    pub body: Arc<Term>,
}

impl Equation {
    pub fn simple(base: &str, body: Arc<Term>) -> Self {
        Equation { base: base.into(), params: Vec::new(), body }
    }

    pub fn head(&self) -> Name {
        Name {
            base: self.base.clone(),
            params: self
                .params
                .iter()
                .map(|p| match p {
                    Pattern::Var(v) => Expr::Var(v.clone()),
                    Pattern::Val(v) => Expr::Val(v.clone()),
                })
                .collect(),
        }
    }

    fn matches(&self, args: &[Value]) -> Option<Bindings> {
        let mut env = Bindings::new();
        for (p, a) in self.params.iter().zip(args) {
            match p {
                Pattern::Val(v) if v != a => return None,
                Pattern::Val(_) => {}
                Pattern::Var(x) => match env.get(x) {
                    Some(prev) if prev != a => return None,
                    _ => {
                        env.insert(x.clone(), a.clone());
                    }
                },
            }
        }
        Some(env)
    }
}

/// Defining equations plus the declarations that classify the alphabet.
#[derive(Clone, Debug, Default)]
pub struct Environment {
    equations: Vec<Equation>,
    by_base: HashMap<Arc<str>, Vec<usize>>,
    /// Base names declared as signals.
    pub signals: BTreeSet<Arc<str>>,
    /// Actions the model author classifies as blocking.
    pub blocking: BTreeSet<Action>,
    /// Actions explicitly classified as non-blocking; these may never be
    /// restricted or relabelled into blocking actions.
    pub nonblocking: BTreeSet<Action>,
    /// Named finite ranges for indexed sums, inclusive.
    pub ranges: BTreeMap<Arc<str>, (i64, i64)>,
}

impl Environment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn define(&mut self, eq: Equation) {
        self.by_base.entry(eq.base.clone()).or_default().push(self.equations.len());
        self.equations.push(eq);
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn declare_signal(&mut self, base: &str) {
        self.signals.insert(base.into());
    }

    pub fn is_signal(&self, name: &Name) -> bool {
        self.signals.contains(&name.base)
    }

    pub fn range(&self, domain: &Domain, bindings: &Bindings) -> Result<(i64, i64), ModelError> {
        match domain {
            Domain::Named(n) => self.ranges.get(n).copied().ok_or_else(|| ModelError::UnknownRange(n.to_string())),
            Domain::Span(lo, hi) => match (lo.eval(bindings)?, hi.eval(bindings)?) {
                (Value::Int(lo), Value::Int(hi)) => Ok((lo, hi)),
                _ => Err(ModelError::TypeError(format!("non-integer range {domain}"))),
            },
        }
    }

    /// Defining body of a ground agent identifier with its parameters
    /// substituted and every indexed sum expanded.
    ///
    /// Equations are tried in definition order; the first whose literal
    /// patterns match wins.
    pub fn resolve(&self, id: &Name) -> Result<Arc<Term>, ModelError> {
        let args = id.values().ok_or_else(|| ModelError::NotGround(id.to_string()))?;
        let candidates = self.by_base.get(&id.base).ok_or_else(|| ModelError::UnknownAgent(id.to_string()))?;
        let mut arity_seen = false;
        for &i in candidates {
            let eq = &self.equations[i];
            if eq.params.len() != args.len() {
                continue;
            }
            arity_seen = true;
            if let Some(bindings) = eq.matches(&args) {
                return self.instantiate(&eq.body, &bindings);
            }
        }
        if arity_seen {
            Err(ModelError::UnknownAgent(id.to_string()))
        } else {
            Err(ModelError::ArityMismatch { agent: id.to_string(), given: args.len() })
        }
    }

    /// Substitutes `bindings` into `term` and expands indexed sums. The
    /// result must be ground.
    pub fn instantiate(&self, term: &Arc<Term>, bindings: &Bindings) -> Result<Arc<Term>, ModelError> {
        let ground = |n: &Name| -> Result<Name, ModelError> {
            let n = n.subst(bindings)?;
            if n.is_ground() {
                Ok(n)
            } else {
                Err(ModelError::UnboundVariable(n.params.iter().flat_map(Expr::free_vars).next().unwrap_or_default()))
            }
        };
        Ok(match &**term {
            Term::Nil => term.clone(),
            Term::Ident(n) => {
                if n.is_ground() {
                    term.clone()
                } else {
                    Term::ident(ground(n)?)
                }
            }
            Term::Prefix(a, b) => {
                let a = match a.name() {
                    Some(n) if !n.is_ground() => {
                        let a = a.subst(bindings)?;
                        ground(a.name().unwrap())?;
                        a
                    }
                    _ => a.clone(),
                };
                Term::prefix(a, self.instantiate(b, bindings)?)
            }
            Term::Sum(bs) => Term::sum(bs.iter().map(|b| self.instantiate(b, bindings)).collect::<Result<_, _>>()?),
            Term::IndexedSum(s) => {
                let (lo, hi) = self.range(&s.domain, bindings)?;
                let mut branches = Vec::new();
                let mut inner = bindings.clone();
                for v in lo..=hi {
                    inner.insert(s.var.clone(), Value::Int(v));
                    if s.guard.eval(&inner)? {
                        branches.push(self.instantiate(&s.body, &inner)?);
                    }
                }
                Term::sum(branches)
            }
            Term::Par(l, r) => Term::par(self.instantiate(l, bindings)?, self.instantiate(r, bindings)?),
            Term::Restrict(b, l) => {
                let names = l.iter().map(ground).collect::<Result<BTreeSet<_>, _>>()?;
                Arc::new(Term::Restrict(self.instantiate(b, bindings)?, Arc::new(names)))
            }
            Term::Relabel(b, f) => {
                let f = f.subst(bindings)?;
                Term::relabel(self.instantiate(b, bindings)?, f)
            }
            Term::Signal(b, s) => Term::signal(self.instantiate(b, bindings)?, ground(s)?),
        })
    }

    /// Whether `action` is classified blocking. τ never is.
    pub fn is_blocking(&self, action: &Action) -> bool {
        !matches!(action, Action::Tau) && self.blocking.contains(action)
    }

    /// Checks the well-formedness conditions of `root` and every equation.
    pub fn validate(&self, root: &Arc<Term>) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.blocking.contains(&Action::Tau) {
            report.push(Violation::TauBlocking);
        }
        self.validate_term(root, &mut report);
        for eq in &self.equations {
            self.validate_term(&eq.body, &mut report);
        }
        report.violations.sort();
        report.violations.dedup();
        report
    }

    fn validate_term(&self, term: &Arc<Term>, report: &mut ValidationReport) {
        term.walk(&mut |t| match &**t {
            Term::Ident(n) => {
                if n.is_ground() {
                    match self.resolve(n) {
                        Err(ModelError::ArityMismatch { agent, given }) => {
                            report.push(Violation::ArityMismatch { agent, given })
                        }
                        Err(ModelError::UnknownAgent(a)) => report.push(Violation::UnknownAgent(a)),
                        Err(e) => report.push(Violation::Malformed(e.to_string())),
                        Ok(_) => {}
                    }
                } else {
                    let known = self
                        .by_base
                        .get(&n.base)
                        .map(|ix| ix.iter().any(|&i| self.equations[i].params.len() == n.params.len()));
                    match known {
                        None => report.push(Violation::UnknownAgent(n.to_string())),
                        Some(false) => {
                            report.push(Violation::ArityMismatch { agent: n.to_string(), given: n.params.len() })
                        }
                        Some(true) => {}
                    }
                }
            }
            Term::Restrict(_, l) => {
                for n in l.iter() {
                    for a in [Action::Name(n.clone()), Action::CoName(n.clone()), Action::Signal(n.clone())] {
                        if self.nonblocking.contains(&a) {
                            report.push(Violation::NonBlockingRestricted(a.to_string()));
                        }
                    }
                }
            }
            Term::Relabel(_, f) => {
                for a in &self.nonblocking {
                    let image = f.apply(a);
                    if self.blocking.contains(&image) {
                        report.push(Violation::RelabelledIntoBlocking { from: a.to_string(), to: image.to_string() });
                    }
                }
                if f.handshake.keys().any(|k| f.signal.contains_key(k)) {
                    report.push(Violation::Malformed("relabelling maps a name both as handshake and signal".into()));
                }
            }
            Term::Signal(_, s) => {
                if !self.is_signal(s) {
                    report.push(Violation::UndeclaredSignal(s.to_string()));
                }
            }
            Term::IndexedSum(s) => {
                if let Domain::Named(r) = &s.domain {
                    if !self.ranges.contains_key(r) {
                        report.push(Violation::UnknownRange(r.to_string()));
                    }
                }
            }
            Term::Prefix(Action::CoName(n), _) if self.is_signal(n) => {
                report.push(Violation::Malformed(format!("signal `{n}` used as co-name")));
            }
            _ => {}
        });
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Violation {
    UnknownAgent(String),
    ArityMismatch { agent: String, given: usize },
    NonBlockingRestricted(String),
    RelabelledIntoBlocking { from: String, to: String },
    UndeclaredSignal(String),
    UnknownRange(String),
    TauBlocking,
    Malformed(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownAgent(a) => write!(f, "unknown agent `{a}`"),
            Violation::ArityMismatch { agent, given } => write!(f, "no equation for `{agent}` with {given} parameters"),
            Violation::NonBlockingRestricted(a) => write!(f, "non-blocking action `{a}` is restricted"),
            Violation::RelabelledIntoBlocking { from, to } => {
                write!(f, "non-blocking action `{from}` relabelled into blocking `{to}`")
            }
            Violation::UndeclaredSignal(s) => write!(f, "`{s}` is emitted but not declared as a signal"),
            Violation::UnknownRange(r) => write!(f, "unknown range `{r}`"),
            Violation::TauBlocking => write!(f, "tau is declared blocking"),
            Violation::Malformed(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(n: &str) -> Action {
        Action::Name(Name::new(n))
    }

    #[test]
    fn complement_is_an_involution() {
        for act in [a("x"), Action::CoName(Name::indexed("y", [1, 2]))] {
            assert_eq!(act.complement().unwrap().complement().unwrap(), act);
        }
        assert_eq!(Action::Tau.complement(), None);
        assert_eq!(Action::Signal(Name::new("s")).complement(), None);
    }

    #[test]
    fn resolve_zero_equation() {
        let mut env = Environment::new();
        env.define(Equation::simple("A", Term::nil()));
        assert_eq!(*env.resolve(&Name::new("A")).unwrap(), Term::Nil);
    }

    #[test]
    fn resolve_errors() {
        let mut env = Environment::new();
        env.define(Equation { base: "B".into(), params: vec![Pattern::Var("i".into())], body: Term::nil() });
        assert!(matches!(env.resolve(&Name::new("Z")), Err(ModelError::UnknownAgent(_))));
        assert!(matches!(env.resolve(&Name::indexed("B", [1, 2])), Err(ModelError::ArityMismatch { .. })));
    }

    #[test]
    fn literal_patterns_take_priority_in_order() {
        let mut env = Environment::new();
        env.define(Equation {
            base: "C".into(),
            params: vec![Pattern::Val(Value::Int(3))],
            body: Term::prefix(a("done"), Term::nil()),
        });
        env.define(Equation {
            base: "C".into(),
            params: vec![Pattern::Var("j".into())],
            body: Term::prefix(
                Action::Name(Name::with_params("step", vec![Expr::var("j")])),
                Term::ident(Name::with_params("C", vec![Expr::Add(Box::new(Expr::var("j")), Box::new(Expr::int(1)))])),
            ),
        });
        let t = env.resolve(&Name::indexed("C", [1])).unwrap();
        assert_eq!(t, Term::prefix(Action::Name(Name::indexed("step", [1])), Term::ident(Name::indexed("C", [2]))));
        let t = env.resolve(&Name::indexed("C", [3])).unwrap();
        assert_eq!(t, Term::prefix(a("done"), Term::nil()));
    }

    #[test]
    fn indexed_sum_expands_with_guard() {
        let mut env = Environment::new();
        env.ranges.insert("V".into(), (0, 3));
        let body = Term::indexed_sum(
            "k",
            Domain::Named("V".into()),
            Guard::cmp(CmpOp::Gt, Expr::var("k"), Expr::var("m")),
            Term::prefix(Action::Name(Name::with_params("r", vec![Expr::var("k")])), Term::nil()),
        );
        env.define(Equation { base: "D".into(), params: vec![Pattern::Var("m".into())], body });
        let t = env.resolve(&Name::indexed("D", [1])).unwrap();
        let expect = Term::sum(vec![
            Term::prefix(Action::Name(Name::indexed("r", [2])), Term::nil()),
            Term::prefix(Action::Name(Name::indexed("r", [3])), Term::nil()),
        ]);
        assert_eq!(t, expect);
        // Empty domain after filtering collapses to 0.
        assert_eq!(*env.resolve(&Name::indexed("D", [3])).unwrap(), Term::Nil);
    }

    #[test]
    fn validate_flags_restricted_nonblocking_and_unknown_agent() {
        let mut env = Environment::new();
        env.nonblocking.insert(a("critA"));
        let t = Term::restrict(Term::prefix(a("critA"), Term::nil()), [Name::new("critA")]);
        assert_eq!(env.validate(&t).violations, vec![Violation::NonBlockingRestricted("critA".into())]);
        let z = Term::ident(Name::new("Z"));
        assert_eq!(env.validate(&z).violations, vec![Violation::UnknownAgent("Z".into())]);
    }

    #[test]
    fn validate_flags_undeclared_signal_and_tau_blocking() {
        let mut env = Environment::new();
        env.blocking.insert(Action::Tau);
        let t = Term::signal(Term::nil(), Name::new("s"));
        let r = env.validate(&t);
        assert!(r.violations.contains(&Violation::TauBlocking));
        assert!(r.violations.contains(&Violation::UndeclaredSignal("s".into())));
    }

    #[test]
    fn name_display() {
        let n = Name::with_params(
            "doorway",
            vec![Expr::var("i"), Expr::int(0), Expr::Add(Box::new(Expr::var("j")), Box::new(Expr::int(1)))],
        );
        assert_eq!(n.to_string(), "doorway[i]_0_(j+1)");
    }
}
