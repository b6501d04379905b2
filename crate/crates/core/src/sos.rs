//! Structural operational semantics with derivation provenance.
//!
//! Every derived transition records which sequential components moved
//! (`participants`) and, for a signal read, which component emitted the
//! signal (`signal_partner`). Provenance is collected while the rules are
//! applied, so path decomposition never has to reconstruct it.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ModelError;
use crate::term::{Action, Bindings, Environment, Name, Term};

pub const DEFAULT_MAX_UNFOLD: usize = 10_000;

/// One step from a term to one of its immediate sub-terms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    ParLeft,
    ParRight,
    UnderRestrict,
    UnderRelabel,
    UnderSignal,
    UnderSum(usize),
    UnderIdent(Name),
}

/// Address of a sub-term, read from the root downwards.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComponentPath(pub Vec<Step>);

impl ComponentPath {
    pub fn root() -> Self {
        ComponentPath(Vec::new())
    }

    pub fn steps(&self) -> &[Step] {
        &self.0
    }

    pub fn child(&self, step: Step) -> Self {
        let mut v = self.0.clone();
        v.push(step);
        ComponentPath(v)
    }

    pub fn starts_with(&self, prefix: &ComponentPath) -> bool {
        self.0.starts_with(&prefix.0)
    }

    /// The sub-term addressed by this path. Identifier steps are followed by
    /// resolving the identifier; `None` if the path does not fit the term.
    pub fn locate(&self, env: &Environment, term: &Arc<Term>) -> Option<Arc<Term>> {
        let mut cur = term.clone();
        for step in &self.0 {
            cur = match (step, &*cur) {
                (Step::ParLeft, Term::Par(l, _)) => l.clone(),
                (Step::ParRight, Term::Par(_, r)) => r.clone(),
                (Step::UnderRestrict, Term::Restrict(b, _))
                | (Step::UnderRelabel, Term::Relabel(b, _))
                | (Step::UnderSignal, Term::Signal(b, _)) => b.clone(),
                (Step::UnderSum(i), Term::Sum(bs)) => bs.get(*i)?.clone(),
                (Step::UnderIdent(n), Term::Ident(m)) if n == m => env.resolve(n).ok()?,
                _ => return None,
            };
        }
        Some(cur)
    }
}

impl fmt::Display for ComponentPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "root");
        }
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ".")?;
            }
            match s {
                Step::ParLeft => write!(f, "left")?,
                Step::ParRight => write!(f, "right")?,
                Step::UnderRestrict => write!(f, "restrict")?,
                Step::UnderRelabel => write!(f, "relabel")?,
                Step::UnderSignal => write!(f, "signal")?,
                Step::UnderSum(i) => write!(f, "sum{i}")?,
                Step::UnderIdent(n) => write!(f, "ident({n})")?,
            }
        }
        Ok(())
    }
}

impl FromStr for ComponentPath {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "root" {
            return Ok(ComponentPath::root());
        }
        let mut steps = Vec::new();
        let mut rest = s;
        while !rest.is_empty() {
            // Identifier steps may contain dots inside the parentheses.
            let (tok, tail) = if let Some(inner) = rest.strip_prefix("ident(") {
                let close = inner.find(')').ok_or_else(|| format!("unclosed ident step in `{s}`"))?;
                (&rest[..close + 7], &inner[close + 1..])
            } else {
                match rest.find('.') {
                    Some(i) => (&rest[..i], &rest[i..]),
                    None => (rest, ""),
                }
            };
            let step = match tok {
                "left" => Step::ParLeft,
                "right" => Step::ParRight,
                "restrict" => Step::UnderRestrict,
                "relabel" => Step::UnderRelabel,
                "signal" => Step::UnderSignal,
                t if t.starts_with("sum") => Step::UnderSum(t[3..].parse().map_err(|_| format!("bad step `{t}`"))?),
                t if t.starts_with("ident(") => {
                    let name = crate::parser::parse_name(&t[6..t.len() - 1]).map_err(|e| e.to_string())?;
                    Step::UnderIdent(name)
                }
                t => return Err(format!("bad step `{t}`")),
            };
            steps.push(step);
            rest = tail.strip_prefix('.').unwrap_or(tail);
        }
        Ok(ComponentPath(steps))
    }
}

impl Serialize for ComponentPath {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ComponentPath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A derived transition with its provenance.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TransitionDerivation {
    pub source: Arc<Term>,
    pub label: Action,
    pub target: Arc<Term>,
    /// Sequential components that moved: one, or two for a handshake.
    pub participants: Vec<ComponentPath>,
    /// Component whose emitted signal was read; present only for the
    /// signal-read synchronisation rules.
    pub signal_partner: Option<ComponentPath>,
}

pub type SignalSet = BTreeSet<Name>;

/// Derivation result before the path prefix is known. Paths are collected
/// leaf-first and reversed once at the top.
struct Local {
    label: Action,
    target: Arc<Term>,
    participants: Vec<Vec<Step>>,
    partner: Option<Vec<Step>>,
}

impl Local {
    fn push(mut self, step: Step) -> Self {
        for p in &mut self.participants {
            p.push(step.clone());
        }
        if let Some(p) = &mut self.partner {
            p.push(step);
        }
        self
    }
}

/// Rule engine bound to one environment. Keeps a cache of resolved
/// identifiers, so create one per exploration.
pub struct Sos<'e> {
    env: &'e Environment,
    max_unfold: usize,
    cache: RefCell<HashMap<Name, Arc<Term>>>,
}

impl<'e> Sos<'e> {
    pub fn new(env: &'e Environment) -> Self {
        Self::with_max_unfold(env, DEFAULT_MAX_UNFOLD)
    }

    pub fn with_max_unfold(env: &'e Environment, max_unfold: usize) -> Self {
        Sos { env, max_unfold, cache: RefCell::new(HashMap::new()) }
    }

    pub fn env(&self) -> &'e Environment {
        self.env
    }

    pub fn resolve(&self, id: &Name) -> Result<Arc<Term>, ModelError> {
        if let Some(t) = self.cache.borrow().get(id) {
            return Ok(t.clone());
        }
        let body = self.env.resolve(id)?;
        self.cache.borrow_mut().insert(id.clone(), body.clone());
        Ok(body)
    }

    /// All transitions derivable from `term`, in a deterministic order.
    pub fn transitions(&self, term: &Arc<Term>) -> Result<Vec<TransitionDerivation>, ModelError> {
        Ok(self.step(term)?.0)
    }

    /// Signals emitted by `term`.
    pub fn signals(&self, term: &Arc<Term>) -> Result<SignalSet, ModelError> {
        let mut stack = Vec::new();
        self.emitted(term, &mut stack)
    }

    /// Transitions and signals in one pass.
    pub fn step(&self, term: &Arc<Term>) -> Result<(Vec<TransitionDerivation>, SignalSet), ModelError> {
        let mut stack = Vec::new();
        let (locals, signals) = self.derive(term, &mut stack)?;
        let out = locals
            .into_iter()
            .map(|l| TransitionDerivation {
                source: term.clone(),
                label: l.label,
                target: l.target,
                participants: l
                    .participants
                    .into_iter()
                    .map(|mut p| {
                        p.reverse();
                        ComponentPath(p)
                    })
                    .collect(),
                signal_partner: l.partner.map(|mut p| {
                    p.reverse();
                    ComponentPath(p)
                }),
            })
            .collect();
        Ok((out, signals))
    }

    fn enter(&self, id: &Name, stack: &mut Vec<Name>) -> Result<Arc<Term>, ModelError> {
        if stack.contains(id) || stack.len() >= self.max_unfold {
            return Err(ModelError::UnguardedRecursion(id.to_string()));
        }
        stack.push(id.clone());
        self.resolve(id)
    }

    fn emitted(&self, term: &Arc<Term>, stack: &mut Vec<Name>) -> Result<SignalSet, ModelError> {
        Ok(match &**term {
            Term::Nil | Term::Prefix(..) => SignalSet::new(),
            Term::Signal(b, s) => {
                let mut set = self.emitted(b, stack)?;
                set.insert(s.clone());
                set
            }
            Term::Sum(bs) => {
                let mut set = SignalSet::new();
                for b in bs {
                    set.extend(self.emitted(b, stack)?);
                }
                set
            }
            Term::IndexedSum(_) => {
                let expanded = self.env.instantiate(term, &Bindings::new())?;
                self.emitted(&expanded, stack)?
            }
            Term::Par(l, r) => {
                let mut set = self.emitted(l, stack)?;
                set.extend(self.emitted(r, stack)?);
                set
            }
            Term::Restrict(b, l) => {
                let mut set = self.emitted(b, stack)?;
                set.retain(|s| !l.contains(s));
                set
            }
            Term::Relabel(b, f) => self.emitted(b, stack)?.iter().map(|s| f.apply_signal(s)).collect(),
            Term::Ident(id) => {
                let body = self.enter(id, stack)?;
                let set = self.emitted(&body, stack);
                stack.pop();
                set?
            }
        })
    }

    fn derive(&self, term: &Arc<Term>, stack: &mut Vec<Name>) -> Result<(Vec<Local>, SignalSet), ModelError> {
        Ok(match &**term {
            Term::Nil => (Vec::new(), SignalSet::new()),
            Term::Prefix(a, body) => (
                vec![Local { label: a.clone(), target: body.clone(), participants: vec![Vec::new()], partner: None }],
                SignalSet::new(),
            ),
            Term::Sum(bs) => {
                let mut out = Vec::new();
                let mut signals = SignalSet::new();
                for (i, b) in bs.iter().enumerate() {
                    let (ts, ss) = self.derive(b, stack)?;
                    out.extend(ts.into_iter().map(|l| l.push(Step::UnderSum(i))));
                    signals.extend(ss);
                }
                (out, signals)
            }
            Term::IndexedSum(_) => {
                let expanded = self.env.instantiate(term, &Bindings::new())?;
                self.derive(&expanded, stack)?
            }
            Term::Par(l, r) => {
                let (lt, ls) = self.derive(l, stack)?;
                let (rt, rs) = self.derive(r, stack)?;
                let mut out = Vec::new();
                for t in &lt {
                    out.push(
                        Local {
                            label: t.label.clone(),
                            target: Term::par(t.target.clone(), r.clone()),
                            participants: t.participants.clone(),
                            partner: t.partner.clone(),
                        }
                        .push(Step::ParLeft),
                    );
                }
                for t in &rt {
                    out.push(
                        Local {
                            label: t.label.clone(),
                            target: Term::par(l.clone(), t.target.clone()),
                            participants: t.participants.clone(),
                            partner: t.partner.clone(),
                        }
                        .push(Step::ParRight),
                    );
                }
                // Handshake synchronisation.
                for a in &lt {
                    if !a.label.is_handshake() {
                        continue;
                    }
                    let co = a.label.complement();
                    for b in rt.iter().filter(|b| Some(&b.label) == co.as_ref()) {
                        let mut participants = Vec::with_capacity(2);
                        participants.extend(a.participants.iter().cloned().map(|mut p| {
                            p.push(Step::ParLeft);
                            p
                        }));
                        participants.extend(b.participants.iter().cloned().map(|mut p| {
                            p.push(Step::ParRight);
                            p
                        }));
                        out.push(Local {
                            label: Action::Tau,
                            target: Term::par(a.target.clone(), b.target.clone()),
                            participants,
                            partner: None,
                        });
                    }
                }
                // Signal reads: the emitting side is left unchanged.
                for b in &rt {
                    if let Action::Signal(s) = &b.label {
                        if ls.contains(s) {
                            out.push(
                                Local {
                                    label: Action::Tau,
                                    target: Term::par(l.clone(), b.target.clone()),
                                    participants: b.participants.clone(),
                                    partner: None,
                                }
                                .push(Step::ParRight)
                                .with_partner(vec![Step::ParLeft]),
                            );
                        }
                    }
                }
                for a in &lt {
                    if let Action::Signal(s) = &a.label {
                        if rs.contains(s) {
                            out.push(
                                Local {
                                    label: Action::Tau,
                                    target: Term::par(a.target.clone(), r.clone()),
                                    participants: a.participants.clone(),
                                    partner: None,
                                }
                                .push(Step::ParLeft)
                                .with_partner(vec![Step::ParRight]),
                            );
                        }
                    }
                }
                let mut signals = ls;
                signals.extend(rs);
                (out, signals)
            }
            Term::Restrict(b, names) => {
                let (ts, mut ss) = self.derive(b, stack)?;
                let out = ts
                    .into_iter()
                    .filter(|t| t.label.name().is_none_or(|n| !names.contains(n)))
                    .map(|t| {
                        Local { target: Arc::new(Term::Restrict(t.target.clone(), names.clone())), ..t }
                            .push(Step::UnderRestrict)
                    })
                    .collect();
                ss.retain(|s| !names.contains(s));
                (out, ss)
            }
            Term::Relabel(b, f) => {
                let (ts, ss) = self.derive(b, stack)?;
                let out = ts
                    .into_iter()
                    .map(|t| {
                        Local {
                            label: f.apply(&t.label),
                            target: Arc::new(Term::Relabel(t.target.clone(), f.clone())),
                            ..t
                        }
                        .push(Step::UnderRelabel)
                    })
                    .collect();
                (out, ss.iter().map(|s| f.apply_signal(s)).collect())
            }
            Term::Signal(b, s) => {
                let (ts, mut ss) = self.derive(b, stack)?;
                ss.insert(s.clone());
                (ts.into_iter().map(|t| t.push(Step::UnderSignal)).collect(), ss)
            }
            Term::Ident(id) => {
                let body = self.enter(id, stack)?;
                let res = self.derive(&body, stack);
                stack.pop();
                let (ts, ss) = res?;
                (ts.into_iter().map(|t| t.push(Step::UnderIdent(id.clone()))).collect(), ss)
            }
        })
    }
}

impl Local {
    /// Attaches a partner path (leaf-first, relative to the current node).
    fn with_partner(mut self, partner: Vec<Step>) -> Self {
        self.partner = Some(partner);
        self
    }
}

/// Convenience wrapper around [`Sos::transitions`].
pub fn transitions(env: &Environment, term: &Arc<Term>) -> Result<Vec<TransitionDerivation>, ModelError> {
    Sos::new(env).transitions(term)
}

/// Convenience wrapper around [`Sos::signals`].
pub fn signals(env: &Environment, term: &Arc<Term>) -> Result<SignalSet, ModelError> {
    Sos::new(env).signals(term)
}
