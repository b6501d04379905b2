//! Strong bisimilarity on finite state spaces, respecting emitted signals.
//!
//! States start out grouped by their signal sets and are split by signature
//! refinement until stable. Each round is kept so that a pair of separated
//! states can be explained move by move.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::ModelError;
use crate::lts::{explore, Limits, Lts, Transition};
use crate::sos::SignalSet;
use crate::term::{Action, Environment, Name, Relabelling, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// One attacker move in the distinguishing game.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Move {
    pub side: Side,
    pub label: Action,
    /// States reached on the left and right after the move and the answer.
    pub left: usize,
    pub right: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Reason {
    SignalMismatch { left: SignalSet, right: SignalSet },
    NoMatchingTransition { side: Side, label: Action },
}

/// Why two states are not bisimilar: a sequence of moves the other side can
/// only answer by going to a state that is distinguished again, ending in a
/// signal mismatch or an unanswerable move.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Evidence {
    pub moves: Vec<Move>,
    pub reason: Reason,
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.moves {
            let side = match m.side {
                Side::Left => "left",
                Side::Right => "right",
            };
            writeln!(f, "{side} does {} (now {} / {})", m.label, m.left, m.right)?;
        }
        let set = |s: &SignalSet| s.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
        match &self.reason {
            Reason::SignalMismatch { left, right } => {
                write!(f, "signals differ: {{{}}} vs {{{}}}", set(left), set(right))
            }
            Reason::NoMatchingTransition { side, label } => {
                let other = if *side == Side::Left { "right" } else { "left" };
                write!(f, "{other} cannot answer {label}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BisimResult {
    pub bisimilar: bool,
    pub evidence: Option<Evidence>,
}

/// Disjoint union of two state spaces with interned labels.
struct Union {
    signals: Vec<SignalSet>,
    succ: Vec<Vec<(usize, usize)>>,
    labels: Vec<Action>,
    offset: usize,
}

impl Union {
    fn new(a: &Lts, b: &Lts) -> Self {
        let offset = a.states.len();
        let mut label_ids = HashMap::new();
        let mut labels = Vec::new();
        let mut succ = vec![Vec::new(); offset + b.states.len()];
        for (lts, base) in [(a, 0), (b, offset)] {
            for t in &lts.transitions {
                let id = *label_ids.entry(t.label.clone()).or_insert_with(|| {
                    labels.push(t.label.clone());
                    labels.len() - 1
                });
                succ[base + t.source].push((id, base + t.target));
            }
        }
        let signals = a.state_signals.iter().chain(&b.state_signals).cloned().collect();
        Union { signals, succ, labels, offset }
    }
}

/// Block numbers per state after each refinement round; the last round is
/// the coarsest bisimulation.
fn refine(u: &Union) -> Vec<Vec<usize>> {
    let mut ids: HashMap<&SignalSet, usize> = HashMap::new();
    let first: Vec<usize> = u
        .signals
        .iter()
        .map(|s| {
            let n = ids.len();
            *ids.entry(s).or_insert(n)
        })
        .collect();
    let mut rounds = vec![first];
    loop {
        let prev = rounds.last().unwrap();
        let mut ids: HashMap<(usize, Vec<(usize, usize)>), usize> = HashMap::new();
        let next: Vec<usize> = (0..u.succ.len())
            .map(|s| {
                let mut sig: Vec<(usize, usize)> = u.succ[s].iter().map(|&(l, t)| (l, prev[t])).collect();
                sig.sort_unstable();
                sig.dedup();
                let n = ids.len();
                *ids.entry((prev[s], sig)).or_insert(n)
            })
            .collect();
        let stable = ids.len() == count_blocks(prev);
        rounds.push(next);
        if stable {
            return rounds;
        }
    }
}

fn count_blocks(p: &[usize]) -> usize {
    p.iter().collect::<BTreeSet<_>>().len()
}

pub fn bisimilar(a: &Lts, sa: usize, b: &Lts, sb: usize) -> Result<BisimResult, ModelError> {
    if a.truncated || b.truncated {
        return Err(ModelError::TruncatedInput);
    }
    let u = Union::new(a, b);
    let rounds = refine(&u);
    let (p, q) = (sa, u.offset + sb);
    if rounds.last().unwrap()[p] == rounds.last().unwrap()[q] {
        return Ok(BisimResult { bisimilar: true, evidence: None });
    }
    Ok(BisimResult { bisimilar: false, evidence: Some(explain(&u, &rounds, p, q)) })
}

/// Explores both terms and compares their initial states.
pub fn bisimilar_terms(
    env: &Environment,
    p: &Arc<Term>,
    q: &Arc<Term>,
    limits: Limits,
) -> Result<BisimResult, ModelError> {
    let a = explore(env, p, limits)?;
    let b = explore(env, q, limits)?;
    bisimilar(&a, a.initial, &b, b.initial)
}

fn explain(u: &Union, rounds: &[Vec<usize>], mut p: usize, mut q: usize) -> Evidence {
    let local = |s: usize| if s >= u.offset { s - u.offset } else { s };
    let mut moves = Vec::new();
    loop {
        // First round in which p and q are separated.
        let k = rounds.iter().position(|r| r[p] != r[q]).expect("states are separated");
        if k == 0 {
            let reason = Reason::SignalMismatch { left: u.signals[p].clone(), right: u.signals[q].clone() };
            return Evidence { moves, reason };
        }
        let prev = &rounds[k - 1];
        let attack = |x: usize, y: usize| {
            u.succ[x].iter().copied().find(|&(l, t)| !u.succ[y].iter().any(|&(l2, t2)| l2 == l && prev[t2] == prev[t]))
        };
        let (side, (l, t), defender) = match attack(p, q) {
            Some(m) => (Side::Left, m, q),
            None => (Side::Right, attack(q, p).expect("signatures differ"), p),
        };
        let answers: Vec<usize> = u.succ[defender].iter().filter(|&&(l2, _)| l2 == l).map(|&(_, t2)| t2).collect();
        let label = u.labels[l].clone();
        let Some(&answer) = answers.first() else {
            return Evidence { moves, reason: Reason::NoMatchingTransition { side, label } };
        };
        (p, q) = if side == Side::Left { (t, answer) } else { (answer, t) };
        moves.push(Move { side, label, left: local(p), right: local(q) });
    }
}

/// Greatest fixed point computed pair by pair. Quadratic in the number of
/// states; kept as a reference for the refinement algorithm.
pub fn naive_bisimilar(a: &Lts, sa: usize, b: &Lts, sb: usize) -> Result<bool, ModelError> {
    if a.truncated || b.truncated {
        return Err(ModelError::TruncatedInput);
    }
    let u = Union::new(a, b);
    let n = u.succ.len();
    let mut rel = vec![vec![false; n]; n];
    for (x, row) in rel.iter_mut().enumerate() {
        for (y, cell) in row.iter_mut().enumerate() {
            *cell = u.signals[x] == u.signals[y];
        }
    }
    let simulates = |rel: &Vec<Vec<bool>>, x: usize, y: usize| {
        u.succ[x].iter().all(|&(l, t)| u.succ[y].iter().any(|&(l2, t2)| l == l2 && rel[t][t2]))
    };
    loop {
        let mut changed = false;
        for x in 0..n {
            for y in 0..n {
                if rel[x][y] && !(simulates(&rel, x, y) && simulates(&rel, y, x)) {
                    rel[x][y] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(rel[sa][u.offset + sb]);
        }
    }
}

/// Replaces signal sets by `!s` self-loops: a state emitting `s` gets a
/// transition labelled `!s` to itself and no longer carries `s`.
pub fn encode_signals(lts: &Lts) -> Lts {
    let mut out = lts.clone();
    for (s, signals) in lts.state_signals.iter().enumerate() {
        for sig in signals {
            out.transitions.push(Transition {
                source: s,
                target: s,
                label: Action::Emit(sig.clone()),
                participants: Vec::new(),
                signal_partner: None,
            });
        }
    }
    out.state_signals = vec![SignalSet::new(); lts.states.len()];
    out
}

/// One-hole context of depth one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Context {
    Prefix(Action),
    SumLeft(Arc<Term>),
    SumRight(Arc<Term>),
    ParLeft(Arc<Term>),
    ParRight(Arc<Term>),
    Restrict(BTreeSet<Name>),
    Relabel(Relabelling),
    Signal(Name),
}

impl Context {
    pub fn apply(&self, hole: &Arc<Term>) -> Arc<Term> {
        let h = hole.clone();
        match self {
            Context::Prefix(a) => Term::prefix(a.clone(), h),
            Context::SumLeft(r) => Arc::new(Term::Sum(vec![h, r.clone()])),
            Context::SumRight(r) => Arc::new(Term::Sum(vec![r.clone(), h])),
            Context::ParLeft(r) => Term::par(h, r.clone()),
            Context::ParRight(r) => Term::par(r.clone(), h),
            Context::Restrict(l) => Term::restrict(h, l.iter().cloned()),
            Context::Relabel(f) => Term::relabel(h, f.clone()),
            Context::Signal(s) => Term::signal(h, s.clone()),
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hole = Term::ident(Name::new("HOLE"));
        write!(f, "{}", crate::print::print_term(&self.apply(&hole)))
    }
}

/// Contexts covering every operator, built from the given ingredients.
pub fn contexts(actions: &[Action], names: &[Name], signals: &[Name], others: &[Arc<Term>]) -> Vec<Context> {
    let mut out: Vec<Context> = actions.iter().cloned().map(Context::Prefix).collect();
    for r in others {
        out.extend([
            Context::SumLeft(r.clone()),
            Context::SumRight(r.clone()),
            Context::ParLeft(r.clone()),
            Context::ParRight(r.clone()),
        ]);
    }
    for n in names.iter().chain(signals) {
        out.push(Context::Restrict([n.clone()].into()));
    }
    for (i, old) in names.iter().enumerate() {
        let new = &names[(i + 1) % names.len()];
        let mut f = Relabelling::default();
        f.handshake.insert(old.clone(), new.clone());
        out.push(Context::Relabel(f));
    }
    for (i, old) in signals.iter().enumerate() {
        let new = &signals[(i + 1) % signals.len()];
        let mut f = Relabelling::default();
        f.signal.insert(old.clone(), new.clone());
        out.push(Context::Relabel(f));
    }
    out.extend(signals.iter().cloned().map(Context::Signal));
    out
}

#[derive(Clone, Debug, Default)]
pub struct CongruenceReport {
    pub checked: usize,
    /// Contexts that separate the two terms; any entry is a toolkit bug.
    pub failures: Vec<(Context, Evidence)>,
}

pub fn congruence_check(
    env: &Environment,
    p: &Arc<Term>,
    q: &Arc<Term>,
    contexts: &[Context],
    limits: Limits,
) -> Result<CongruenceReport, ModelError> {
    let mut report = CongruenceReport::default();
    for c in contexts {
        let r = bisimilar_terms(env, &c.apply(p), &c.apply(q), limits)?;
        report.checked += 1;
        if let Some(e) = r.evidence {
            report.failures.push((c.clone(), e));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn check(src_p: &str, src_q: &str) -> BisimResult {
        let spec = parse(&format!("signals {{ s, t }}\nsystem = 0\nP = {src_p}\nQ = {src_q}")).unwrap();
        let r =
            bisimilar_terms(&spec.env, &Term::ident("P".into()), &Term::ident("Q".into()), Limits::default()).unwrap();
        let a = explore(&spec.env, &Term::ident("P".into()), Limits::default()).unwrap();
        let b = explore(&spec.env, &Term::ident("Q".into()), Limits::default()).unwrap();
        assert_eq!(naive_bisimilar(&a, a.initial, &b, b.initial).unwrap(), r.bisimilar);
        r
    }

    #[test]
    fn idempotent_choice() {
        assert!(check("a.0 + a.0", "a.0").bisimilar);
    }

    #[test]
    fn branching_time_is_observed() {
        let r = check("a.(b.0 + c.0)", "a.b.0 + a.c.0");
        assert!(!r.bisimilar);
        let e = r.evidence.unwrap();
        assert_eq!(e.moves[0].label, Action::Name("a".into()));
    }

    #[test]
    fn signals_are_observed() {
        let r = check("(a.0) ^ s", "a.0");
        assert!(matches!(r.evidence.unwrap().reason, Reason::SignalMismatch { .. }));
        assert!(check("(a.0) ^ s ^ t", "(a.0) ^ t ^ s").bisimilar);
    }

    #[test]
    fn unanswerable_move() {
        let r = check("a.0 + b.0", "a.0");
        let e = r.evidence.unwrap();
        assert_eq!(e.reason, Reason::NoMatchingTransition { side: Side::Left, label: Action::Name("b".into()) });
    }

    #[test]
    fn truncated_input_is_rejected() {
        let spec = parse("C[n] = a.C[n+1]\nsystem = C[0]").unwrap();
        let lts = explore(&spec.env, &spec.root, Limits::states(3)).unwrap();
        assert_eq!(bisimilar(&lts, 0, &lts, 0), Err(ModelError::TruncatedInput));
    }

    #[test]
    fn encoding_uses_self_loops() {
        let spec = parse("signals { s }\nsystem = (a.0) ^ s").unwrap();
        let lts = explore(&spec.env, &spec.root, Limits::default()).unwrap();
        let enc = encode_signals(&lts);
        assert_eq!(enc.transitions.len(), 2);
        assert!(enc.transitions.iter().any(|t| t.label == Action::Emit("s".into()) && t.source == t.target));
        assert!(enc.state_signals.iter().all(|s| s.is_empty()));
    }

    #[test]
    fn congruence_for_idempotence() {
        let spec = parse("signals { s }\nsystem = 0").unwrap();
        let p = crate::parser::parse_term("a.0 + a.0", &spec.env.signals).unwrap();
        let q = crate::parser::parse_term("a.0", &spec.env.signals).unwrap();
        let ctx = contexts(
            &[Action::Name("a".into()), Action::Tau],
            &["a".into(), "b".into()],
            &["s".into()],
            &[crate::parser::parse_term("'a.0", &spec.env.signals).unwrap()],
        );
        let report = congruence_check(&spec.env, &p, &q, &ctx, Limits::default()).unwrap();
        assert_eq!(report.checked, ctx.len());
        assert!(report.failures.is_empty());
    }
}
