//! Reachable state spaces.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::print::print_term;
use crate::sos::{ComponentPath, SignalSet, Sos};
use crate::term::{Action, Bindings, Environment, Name, Term};

pub const DEFAULT_MAX_STATES: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_states: usize,
    /// Breadth-first depth beyond which states are not expanded.
    pub max_depth: Option<usize>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_states: DEFAULT_MAX_STATES, max_depth: None }
    }
}

impl Limits {
    pub fn states(max_states: usize) -> Self {
        Limits { max_states, ..Limits::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Transition {
    pub source: usize,
    pub target: usize,
    pub label: Action,
    pub participants: Vec<ComponentPath>,
    pub signal_partner: Option<ComponentPath>,
}

#[derive(Clone, Debug)]
pub struct Lts {
    pub states: Vec<Arc<Term>>,
    pub initial: usize,
    pub transitions: Vec<Transition>,
    pub state_signals: Vec<SignalSet>,
    /// Set when exploration stopped at a limit; the LTS is then a prefix of
    /// the real one and unsound for bisimulation or verification.
    pub truncated: bool,
    /// Base names declared as signals, needed to read state terms back.
    pub signal_names: BTreeSet<Arc<str>>,
    index: HashMap<Arc<Term>, usize>,
}

impl Lts {
    pub fn state_of(&self, term: &Term) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// Transition indices leaving each state.
    pub fn outgoing(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.states.len()];
        for (i, t) in self.transitions.iter().enumerate() {
            out[t.source].push(i);
        }
        out
    }

    fn insert(&mut self, term: Arc<Term>, signals: SignalSet) -> (usize, bool) {
        if let Some(&i) = self.index.get(&term) {
            return (i, false);
        }
        let i = self.states.len();
        self.index.insert(term.clone(), i);
        self.states.push(term);
        self.state_signals.push(signals);
        (i, true)
    }

    fn empty(signal_names: BTreeSet<Arc<str>>) -> Self {
        Lts {
            states: Vec::new(),
            initial: 0,
            transitions: Vec::new(),
            state_signals: Vec::new(),
            truncated: false,
            signal_names,
            index: HashMap::new(),
        }
    }
}

/// Replaces identifiers whose body is just another identifier by the end of
/// the alias chain and expands indexed sums, so that syntactically different
/// spellings of one state coincide.
pub fn canonicalize(env: &Environment, term: &Arc<Term>) -> Result<Arc<Term>, ModelError> {
    let mut aliases = HashMap::new();
    canon(env, term, &mut aliases)
}

fn canon(env: &Environment, t: &Arc<Term>, aliases: &mut HashMap<Name, Name>) -> Result<Arc<Term>, ModelError> {
    let rebuild = |b: &Arc<Term>, nb: Arc<Term>, make: &dyn Fn(Arc<Term>) -> Term| {
        if Arc::ptr_eq(b, &nb) {
            t.clone()
        } else {
            Arc::new(make(nb))
        }
    };
    Ok(match &**t {
        Term::Nil => t.clone(),
        Term::Ident(id) => {
            let end = alias_end(env, id, aliases)?;
            if &end == id {
                t.clone()
            } else {
                Term::ident(end)
            }
        }
        Term::IndexedSum(_) => {
            let expanded = env.instantiate(t, &Bindings::new())?;
            canon(env, &expanded, aliases)?
        }
        Term::Prefix(a, b) => {
            let nb = canon(env, b, aliases)?;
            rebuild(b, nb, &|nb| Term::Prefix(a.clone(), nb))
        }
        Term::Restrict(b, l) => {
            let nb = canon(env, b, aliases)?;
            rebuild(b, nb, &|nb| Term::Restrict(nb, l.clone()))
        }
        Term::Relabel(b, f) => {
            let nb = canon(env, b, aliases)?;
            rebuild(b, nb, &|nb| Term::Relabel(nb, f.clone()))
        }
        Term::Signal(b, s) => {
            let nb = canon(env, b, aliases)?;
            rebuild(b, nb, &|nb| Term::Signal(nb, s.clone()))
        }
        Term::Sum(bs) => {
            let nbs = bs.iter().map(|b| canon(env, b, aliases)).collect::<Result<Vec<_>, _>>()?;
            if nbs.iter().zip(bs).all(|(n, b)| Arc::ptr_eq(n, b)) {
                t.clone()
            } else {
                Arc::new(Term::Sum(nbs))
            }
        }
        Term::Par(l, r) => {
            let (nl, nr) = (canon(env, l, aliases)?, canon(env, r, aliases)?);
            if Arc::ptr_eq(&nl, l) && Arc::ptr_eq(&nr, r) {
                t.clone()
            } else {
                Term::par(nl, nr)
            }
        }
    })
}

fn alias_end(env: &Environment, id: &Name, aliases: &mut HashMap<Name, Name>) -> Result<Name, ModelError> {
    if let Some(end) = aliases.get(id) {
        return Ok(end.clone());
    }
    let mut seen = vec![id.clone()];
    let mut cur = id.clone();
    while let Term::Ident(next) = &*env.resolve(&cur)? {
        if seen.contains(next) {
            return Err(ModelError::UnguardedRecursion(next.to_string()));
        }
        seen.push(next.clone());
        cur = next.clone();
    }
    aliases.insert(id.clone(), cur.clone());
    Ok(cur)
}

/// Unfolds identifiers that stand for parallel systems, so that the
/// initial state shows the parallel structure later states have.
pub fn unfold_structure(env: &Environment, t: &Arc<Term>) -> Result<Arc<Term>, ModelError> {
    fn structural(t: &Term) -> bool {
        matches!(t, Term::Par(..) | Term::Restrict(..) | Term::Relabel(..) | Term::Ident(_))
    }
    let mut t = t.clone();
    let mut seen = Vec::new();
    while let Term::Ident(id) = &*t {
        let body = env.resolve(id)?;
        if !structural(&body) || seen.contains(id) {
            break;
        }
        seen.push(id.clone());
        t = body;
    }
    Ok(match &*t {
        Term::Par(l, r) => Term::par(unfold_structure(env, l)?, unfold_structure(env, r)?),
        Term::Restrict(b, l) => Arc::new(Term::Restrict(unfold_structure(env, b)?, l.clone())),
        Term::Relabel(b, f) => Arc::new(Term::Relabel(unfold_structure(env, b)?, f.clone())),
        _ => t,
    })
}

/// Breadth-first exploration of the states reachable from `root`.
pub fn explore(env: &Environment, root: &Arc<Term>, limits: Limits) -> Result<Lts, ModelError> {
    let sos = Sos::new(env);
    let mut aliases = HashMap::new();
    let mut lts = Lts::empty(env.signals.clone());
    let root = canon(env, &unfold_structure(env, root)?, &mut aliases)?;
    let signals = sos.signals(&root)?;
    lts.insert(root, signals);
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    while let Some((s, depth)) = queue.pop_front() {
        if limits.max_depth.is_some_and(|d| depth >= d) {
            if !sos.transitions(&lts.states[s])?.is_empty() {
                lts.truncated = true;
            }
            continue;
        }
        let term = lts.states[s].clone();
        let mut seen = BTreeSet::new();
        for d in sos.transitions(&term)? {
            let target = canon(env, &d.target, &mut aliases)?;
            let t = match lts.state_of(&target) {
                Some(t) => t,
                None if lts.states.len() >= limits.max_states => {
                    lts.truncated = true;
                    continue;
                }
                None => {
                    let signals = sos.signals(&target)?;
                    let (t, _) = lts.insert(target, signals);
                    queue.push_back((t, depth + 1));
                    t
                }
            };
            let tr = Transition {
                source: s,
                target: t,
                label: d.label,
                participants: d.participants,
                signal_partner: d.signal_partner,
            };
            if seen.insert((tr.label.clone(), t, tr.participants.clone(), tr.signal_partner.clone())) {
                lts.transitions.push(tr);
            }
        }
    }
    Ok(lts)
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering. The initial state is drawn as a double circle and
/// emitted signals are listed under the state term.
pub fn export_dot(lts: &Lts) -> String {
    let mut out = String::from("digraph lts {\n");
    for (i, t) in lts.states.iter().enumerate() {
        let mut label = format!("{i}: {}", print_term(t));
        let signals = &lts.state_signals[i];
        if !signals.is_empty() {
            let names: Vec<String> = signals.iter().map(ToString::to_string).collect();
            write!(label, "\n{{{}}}", names.join(", ")).unwrap();
        }
        let shape = if i == lts.initial { "doublecircle" } else { "ellipse" };
        writeln!(out, "  {i} [shape={shape}, label=\"{}\"];", escape(&label).replace('\n', "\\n")).unwrap();
    }
    for t in &lts.transitions {
        writeln!(out, "  {} -> {} [label=\"{}\"];", t.source, t.target, escape(&t.label.to_string())).unwrap();
    }
    out.push_str("}\n");
    out
}

#[derive(Serialize, Deserialize)]
struct JsonLts {
    signals: Vec<String>,
    initial: usize,
    truncated: bool,
    states: Vec<JsonState>,
    transitions: Vec<JsonTransition>,
}

#[derive(Serialize, Deserialize)]
struct JsonState {
    id: usize,
    term: String,
    signals: Vec<Name>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct JsonTransition {
    from: usize,
    label: Action,
    to: usize,
    participants: Vec<ComponentPath>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    signal_partner: Option<ComponentPath>,
}

pub fn export_json(lts: &Lts) -> String {
    let doc = JsonLts {
        signals: lts.signal_names.iter().map(|s| s.to_string()).collect(),
        initial: lts.initial,
        truncated: lts.truncated,
        states: lts
            .states
            .iter()
            .enumerate()
            .map(|(id, t)| JsonState {
                id,
                term: print_term(t),
                signals: lts.state_signals[id].iter().cloned().collect(),
            })
            .collect(),
        transitions: lts
            .transitions
            .iter()
            .map(|t| JsonTransition {
                from: t.source,
                label: t.label.clone(),
                to: t.target,
                participants: t.participants.clone(),
                signal_partner: t.signal_partner.clone(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("LTS serialises");
    text.push('\n');
    text
}

#[derive(Debug, thiserror::Error)]
pub enum ImportError {
    #[error("malformed LTS JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("state {0}: {1}")]
    Term(usize, crate::error::ParseError),
    #[error("inconsistent LTS: {0}")]
    Inconsistent(String),
}

pub fn import_json(text: &str) -> Result<Lts, ImportError> {
    let doc: JsonLts = serde_json::from_str(text)?;
    let names: BTreeSet<Arc<str>> = doc.signals.iter().map(|s| Arc::from(s.as_str())).collect();
    let mut lts = Lts::empty(names);
    for (i, s) in doc.states.into_iter().enumerate() {
        if s.id != i {
            return Err(ImportError::Inconsistent(format!("state ids must be 0..n in order, found {}", s.id)));
        }
        let term = crate::parser::parse_term(&s.term, &lts.signal_names).map_err(|e| ImportError::Term(i, e))?;
        if !lts.insert(term, s.signals.into_iter().collect()).1 {
            return Err(ImportError::Inconsistent(format!("state {i} duplicates an earlier state")));
        }
    }
    let n = lts.states.len();
    if doc.initial >= n {
        return Err(ImportError::Inconsistent("initial state out of range".into()));
    }
    lts.initial = doc.initial;
    lts.truncated = doc.truncated;
    for t in doc.transitions {
        if t.from >= n || t.to >= n {
            return Err(ImportError::Inconsistent(format!("transition {} -> {} out of range", t.from, t.to)));
        }
        lts.transitions.push(Transition {
            source: t.from,
            target: t.to,
            label: t.label,
            participants: t.participants,
            signal_partner: t.signal_partner,
        });
    }
    Ok(lts)
}
