//! Justness of lasso-shaped paths.
//!
//! A path is decomposed along the static parallel structure of the system:
//! every leaf of the [`ComponentTree`] either keeps moving in the cycle
//! (its projection is infinite and unconstrained) or comes to rest at some
//! term. Resting leaves contribute the actions they keep enabling and the
//! signals they keep emitting. These minimal sets are pushed up the tree;
//! parallel nodes check that no resting component waits for a partner that
//! is itself resting and willing, restriction hides names, relabelling
//! renames them. The path is just when the root set only contains blocking
//! actions.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::error::ModelError;
use crate::lts::Lts;
use crate::sos::{ComponentPath, SignalSet, Sos, Step};
use crate::term::{Action, Environment, Name, Relabelling, Term};

/// Which definition of justness to apply. `Ccs` ignores signals entirely.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Semantics {
    Ccs,
    #[default]
    Signals,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Leaf,
    Par(usize, usize),
    Restrict(Arc<BTreeSet<Name>>, usize),
    Relabel(Arc<Relabelling>, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    pub path: ComponentPath,
    pub kind: NodeKind,
}

/// Static parallel structure of a system: parallel composition, restriction
/// and relabelling above sequential leaves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentTree {
    pub nodes: Vec<TreeNode>,
    pub root: usize,
}

/// Whether `t` has a parallel composition below restrictions, relabellings
/// and signal emissions only.
fn has_structure(t: &Term) -> bool {
    match t {
        Term::Par(..) => true,
        Term::Restrict(b, _) | Term::Relabel(b, _) | Term::Signal(b, _) => has_structure(b),
        _ => false,
    }
}

impl ComponentTree {
    pub fn build(term: &Arc<Term>) -> Result<Self, ModelError> {
        let mut tree = ComponentTree { nodes: Vec::new(), root: 0 };
        tree.root = tree.add(term, ComponentPath::root())?;
        Ok(tree)
    }

    fn add(&mut self, t: &Arc<Term>, path: ComponentPath) -> Result<usize, ModelError> {
        let kind = match &**t {
            Term::Par(l, r) => {
                let l = self.add(l, path.child(Step::ParLeft))?;
                let r = self.add(r, path.child(Step::ParRight))?;
                NodeKind::Par(l, r)
            }
            Term::Restrict(b, names) if has_structure(b) => {
                NodeKind::Restrict(names.clone(), self.add(b, path.child(Step::UnderRestrict))?)
            }
            Term::Relabel(b, f) if has_structure(b) => {
                NodeKind::Relabel(f.clone(), self.add(b, path.child(Step::UnderRelabel))?)
            }
            Term::Signal(b, s) if has_structure(b) => {
                return Err(ModelError::DynamicParallelism(format!(
                    "signal `{s}` is emitted by a parallel composition at {path}"
                )))
            }
            _ => NodeKind::Leaf,
        };
        self.nodes.push(TreeNode { path, kind });
        Ok(self.nodes.len() - 1)
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].kind == NodeKind::Leaf).collect()
    }

    /// The leaf that a participant address lies in.
    pub fn leaf_of(&self, path: &ComponentPath) -> Option<usize> {
        let mut node = self.root;
        let mut steps = path.steps().iter();
        loop {
            let next = match (&self.nodes[node].kind, steps.next()) {
                (NodeKind::Leaf, _) => return Some(node),
                (NodeKind::Par(l, _), Some(Step::ParLeft)) => *l,
                (NodeKind::Par(_, r), Some(Step::ParRight)) => *r,
                (NodeKind::Restrict(_, c), Some(Step::UnderRestrict)) => *c,
                (NodeKind::Relabel(_, c), Some(Step::UnderRelabel)) => *c,
                _ => return None,
            };
            node = next;
        }
    }

    /// Checks that `term` has this tree's structure.
    pub fn conforms(&self, term: &Arc<Term>) -> Result<(), ModelError> {
        self.check(self.root, term)
    }

    fn check(&self, node: usize, t: &Arc<Term>) -> Result<(), ModelError> {
        let ok = match (&self.nodes[node].kind, &**t) {
            (NodeKind::Leaf, t) => !has_structure(t),
            (NodeKind::Par(l, r), Term::Par(tl, tr)) => {
                self.check(*l, tl)?;
                self.check(*r, tr)?;
                true
            }
            (NodeKind::Restrict(names, c), Term::Restrict(b, tn)) if names == tn => {
                self.check(*c, b)?;
                true
            }
            (NodeKind::Relabel(f, c), Term::Relabel(b, tf)) if f == tf => {
                self.check(*c, b)?;
                true
            }
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::DynamicParallelism(format!(
                "component {} changes its parallel structure",
                self.nodes[node].path
            )))
        }
    }

    /// Sub-term of `term` at leaf `leaf`; `term` must conform.
    pub fn leaf_term(&self, leaf: usize, term: &Arc<Term>) -> Arc<Term> {
        let mut t = term;
        for step in self.nodes[leaf].path.steps() {
            t = match (step, &**t) {
                (Step::ParLeft, Term::Par(l, _)) => l,
                (Step::ParRight, Term::Par(_, r)) => r,
                (Step::UnderRestrict, Term::Restrict(b, _)) | (Step::UnderRelabel, Term::Relabel(b, _)) => b,
                _ => panic!("term does not conform to the component tree"),
            };
        }
        t.clone()
    }
}

/// Finite presentation of a path: transitions from the initial state, then
/// either a cycle repeated forever or the state the path ends in.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Lasso {
    pub stem: Vec<usize>,
    pub cycle: Cycle,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Cycle {
    Loop(Vec<usize>),
    Terminal(usize),
}

impl Lasso {
    /// Checks connectivity against `lts` and returns the state where the
    /// cycle starts (or the terminal state).
    pub fn validate(&self, lts: &Lts) -> Result<usize, ModelError> {
        let bad = |m: String| Err(ModelError::InvalidLasso(m));
        let mut at = lts.initial;
        let walk = |ts: &[usize], at: &mut usize| -> Result<(), ModelError> {
            for &i in ts {
                let Some(t) = lts.transitions.get(i) else {
                    return Err(ModelError::InvalidLasso(format!("no transition {i}")));
                };
                if t.source != *at {
                    return Err(ModelError::InvalidLasso(format!("transition {i} does not leave state {at}")));
                }
                *at = t.target;
            }
            Ok(())
        };
        walk(&self.stem, &mut at)?;
        let start = at;
        match &self.cycle {
            Cycle::Loop(c) if c.is_empty() => bad("empty cycle".into()),
            Cycle::Loop(c) => {
                walk(c, &mut at)?;
                if at != start {
                    return bad(format!("cycle ends in state {at}, not {start}"));
                }
                Ok(start)
            }
            Cycle::Terminal(s) if *s != start => bad(format!("path ends in state {start}, not {s}")),
            Cycle::Terminal(s) => Ok(*s),
        }
    }

    pub fn states(&self, lts: &Lts) -> Vec<usize> {
        let mut out = vec![lts.initial];
        out.extend(self.stem.iter().map(|&i| lts.transitions[i].target));
        if let Cycle::Loop(c) = &self.cycle {
            out.extend(c.iter().map(|&i| lts.transitions[i].target));
        }
        out
    }

    fn cycle_transitions(&self) -> &[usize] {
        match &self.cycle {
            Cycle::Loop(c) => c,
            Cycle::Terminal(_) => &[],
        }
    }
}

impl fmt::Display for Lasso {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        write!(f, "{};{}", join(&self.stem), join(self.cycle_transitions()))
    }
}

impl FromStr for Lasso {
    type Err = ModelError;

    /// `stem;cycle` with comma-separated transition indices. An empty cycle
    /// denotes a path ending after the stem; its end state is filled in by
    /// [`Lasso::resolve_terminal`].
    fn from_str(s: &str) -> Result<Self, ModelError> {
        let (stem, cycle) =
            s.split_once(';').ok_or_else(|| ModelError::InvalidLasso("expected `stem;cycle`".into()))?;
        let list = |p: &str| -> Result<Vec<usize>, ModelError> {
            p.split(',')
                .map(str::trim)
                .filter(|x| !x.is_empty())
                .map(|x| x.parse().map_err(|_| ModelError::InvalidLasso(format!("bad index `{x}`"))))
                .collect()
        };
        let cycle = list(cycle)?;
        Ok(Lasso {
            stem: list(stem)?,
            cycle: if cycle.is_empty() { Cycle::Terminal(usize::MAX) } else { Cycle::Loop(cycle) },
        })
    }
}

impl Lasso {
    /// Replaces a placeholder terminal state by the end of the stem.
    pub fn resolve_terminal(mut self, lts: &Lts) -> Self {
        if let Cycle::Terminal(s) = &mut self.cycle {
            *s = self.stem.last().map_or(lts.initial, |&i| lts.transitions.get(i).map_or(usize::MAX, |t| t.target));
        }
        self
    }
}

/// Projection of a path onto one leaf.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeafProjection {
    pub leaf: ComponentPath,
    /// Indices into the lasso's stem followed by its cycle.
    pub steps: Vec<usize>,
    pub infinite: bool,
    /// The term the leaf rests at, for finite projections.
    pub resting: Option<Arc<Term>>,
}

pub fn decompose(lts: &Lts, lasso: &Lasso, tree: &ComponentTree) -> Result<Vec<LeafProjection>, ModelError> {
    let start = lasso.validate(lts)?;
    for s in lasso.states(lts) {
        tree.conforms(&lts.states[s])?;
    }
    let all: Vec<usize> = lasso.stem.iter().chain(lasso.cycle_transitions()).copied().collect();
    let mut out = Vec::new();
    for leaf in tree.leaves() {
        let mut steps = Vec::new();
        let mut infinite = false;
        for (pos, &i) in all.iter().enumerate() {
            if participants(lts, tree, i)?.contains(&leaf) {
                steps.push(pos);
                infinite |= pos >= lasso.stem.len();
            }
        }
        let resting = (!infinite).then(|| tree.leaf_term(leaf, &lts.states[start]));
        out.push(LeafProjection { leaf: tree.nodes[leaf].path.clone(), steps, infinite, resting });
    }
    Ok(out)
}

fn participants(lts: &Lts, tree: &ComponentTree, i: usize) -> Result<BTreeSet<usize>, ModelError> {
    lts.transitions[i]
        .participants
        .iter()
        .map(|p| {
            tree.leaf_of(p).ok_or_else(|| ModelError::DynamicParallelism(format!("participant {p} is not a component")))
        })
        .collect()
}

pub fn minimal_signalling_set(env: &Environment, projection: &LeafProjection) -> Result<SignalSet, ModelError> {
    match &projection.resting {
        Some(t) if !projection.infinite => Sos::new(env).signals(t),
        _ => Ok(SignalSet::new()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clause {
    /// A resting component can still do τ, or the whole path waits on
    /// actions that are not blocking.
    FiniteEnd,
    /// Two resting components offer complementary handshakes.
    ParHandshake,
    /// A resting component on the left reads a signal that the right one
    /// keeps emitting.
    ParLeftReads,
    /// The mirror image of `ParLeftReads`.
    ParRightReads,
    /// The least `Y` contains actions that are not blocking.
    NotBlocking,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Witness {
    pub node: ComponentPath,
    pub clause: Clause,
    pub offending_actions: Vec<Action>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct JustnessVerdict {
    pub just: bool,
    /// Least `Y` for which the path is `Y`-just.
    #[serde(rename = "minimalY")]
    pub minimal_y: Option<BTreeSet<Action>>,
    pub witness: Option<Witness>,
}

impl JustnessVerdict {
    fn unjust(node: &ComponentPath, clause: Clause, offending: impl IntoIterator<Item = Action>) -> Self {
        JustnessVerdict {
            just: false,
            minimal_y: None,
            witness: Some(Witness { node: node.clone(), clause, offending_actions: offending.into_iter().collect() }),
        }
    }
}

/// Justness evaluation for one system, with per-term caches.
pub struct Analyzer<'e> {
    env: &'e Environment,
    sos: Sos<'e>,
    pub tree: ComponentTree,
    pub semantics: Semantics,
    enabled: RefCell<HashMap<Arc<Term>, Sets>>,
}

type Sets = (BTreeSet<Action>, SignalSet);

impl<'e> Analyzer<'e> {
    pub fn new(env: &'e Environment, tree: ComponentTree, semantics: Semantics) -> Self {
        Analyzer { env, sos: Sos::new(env), tree, semantics, enabled: RefCell::new(HashMap::new()) }
    }

    /// Analyzer for the system whose initial state is `lts.initial`.
    pub fn for_lts(env: &'e Environment, lts: &Lts, semantics: Semantics) -> Result<Self, ModelError> {
        Ok(Self::new(env, ComponentTree::build(&lts.states[lts.initial])?, semantics))
    }

    pub fn env(&self) -> &'e Environment {
        self.env
    }

    fn leaf_sets(&self, t: &Arc<Term>) -> Result<Sets, ModelError> {
        if let Some(hit) = self.enabled.borrow().get(t) {
            return Ok(hit.clone());
        }
        let (ts, signals) = self.sos.step(t)?;
        let sets = (ts.into_iter().map(|d| d.label).collect(), signals);
        self.enabled.borrow_mut().insert(t.clone(), sets.clone());
        Ok(sets)
    }

    /// Verdict for an ultimately periodic path whose cycle moves exactly the
    /// leaves in `moving`, while every other leaf rests at its sub-term of
    /// `state` (any state of the cycle).
    pub fn evaluate(&self, state: &Arc<Term>, moving: &BTreeSet<usize>) -> Result<JustnessVerdict, ModelError> {
        self.tree.conforms(state)?;
        let y = match self.node(self.tree.root, state, moving)? {
            Ok((y, _)) => y,
            Err(v) => return Ok(v),
        };
        let bad: Vec<Action> = y.iter().filter(|a| !self.env.is_blocking(a)).cloned().collect();
        if !bad.is_empty() {
            return Ok(JustnessVerdict::unjust(&self.tree.nodes[self.tree.root].path, Clause::NotBlocking, bad));
        }
        Ok(JustnessVerdict { just: true, minimal_y: Some(y), witness: None })
    }

    fn node(
        &self,
        n: usize,
        state: &Arc<Term>,
        moving: &BTreeSet<usize>,
    ) -> Result<Result<Sets, JustnessVerdict>, ModelError> {
        let path = &self.tree.nodes[n].path;
        Ok(Ok(match &self.tree.nodes[n].kind {
            NodeKind::Leaf if moving.contains(&n) => (BTreeSet::new(), SignalSet::new()),
            NodeKind::Leaf => {
                let (x, mut xs) = self.leaf_sets(&self.tree.leaf_term(n, state))?;
                if x.contains(&Action::Tau) {
                    return Ok(Err(JustnessVerdict::unjust(path, Clause::FiniteEnd, [Action::Tau])));
                }
                if self.semantics == Semantics::Ccs {
                    xs.clear();
                }
                (x, xs)
            }
            NodeKind::Par(l, r) => {
                let (x, xs) = match self.node(*l, state, moving)? {
                    Ok(v) => v,
                    err => return Ok(err),
                };
                let (z, zs) = match self.node(*r, state, moving)? {
                    Ok(v) => v,
                    err => return Ok(err),
                };
                let hs: Vec<Action> = x
                    .iter()
                    .filter(|a| a.is_handshake() && a.complement().is_some_and(|c| z.contains(&c)))
                    .cloned()
                    .collect();
                if !hs.is_empty() {
                    return Ok(Err(JustnessVerdict::unjust(path, Clause::ParHandshake, hs)));
                }
                let reads = |acts: &BTreeSet<Action>, sigs: &SignalSet| -> Vec<Action> {
                    acts.iter().filter(|a| matches!(a, Action::Signal(s) if sigs.contains(s))).cloned().collect()
                };
                let lr = reads(&x, &zs);
                if !lr.is_empty() {
                    return Ok(Err(JustnessVerdict::unjust(path, Clause::ParLeftReads, lr)));
                }
                let rr = reads(&z, &xs);
                if !rr.is_empty() {
                    return Ok(Err(JustnessVerdict::unjust(path, Clause::ParRightReads, rr)));
                }
                (x.union(&z).cloned().collect(), xs.union(&zs).cloned().collect())
            }
            NodeKind::Restrict(names, c) => {
                let (x, xs) = match self.node(*c, state, moving)? {
                    Ok(v) => v,
                    err => return Ok(err),
                };
                (
                    x.into_iter().filter(|a| a.name().is_none_or(|n| !names.contains(n))).collect(),
                    xs.into_iter().filter(|s| !names.contains(s)).collect(),
                )
            }
            NodeKind::Relabel(f, c) => {
                let (x, xs) = match self.node(*c, state, moving)? {
                    Ok(v) => v,
                    err => return Ok(err),
                };
                (x.iter().map(|a| f.apply(a)).collect(), xs.iter().map(|s| f.apply_signal(s)).collect())
            }
        }))
    }

    /// Leaves that take part in transition `i`, over every derivation of the
    /// same step. A decomposition may pick a different derivation each time
    /// round the cycle, so all of them count as moving.
    pub fn movers(&self, lts: &Lts, i: usize, alternatives: &[usize]) -> Result<BTreeSet<usize>, ModelError> {
        let mut out = participants(lts, &self.tree, i)?;
        for &j in alternatives {
            out.extend(participants(lts, &self.tree, j)?);
        }
        Ok(out)
    }
}

/// Transitions grouped by (source, label, target).
pub fn alternatives(lts: &Lts) -> Vec<Vec<usize>> {
    let mut groups: HashMap<(usize, &Action, usize), Vec<usize>> = HashMap::new();
    for (i, t) in lts.transitions.iter().enumerate() {
        groups.entry((t.source, &t.label, t.target)).or_default().push(i);
    }
    let mut out = vec![Vec::new(); lts.transitions.len()];
    for group in groups.into_values() {
        for &i in &group {
            out[i] = group.clone();
        }
    }
    out
}

pub fn is_just(
    env: &Environment,
    lts: &Lts,
    lasso: &Lasso,
    semantics: Semantics,
) -> Result<JustnessVerdict, ModelError> {
    if lts.truncated {
        return Err(ModelError::TruncatedInput);
    }
    let analyzer = Analyzer::for_lts(env, lts, semantics)?;
    let start = lasso.validate(lts)?;
    for s in lasso.states(lts) {
        analyzer.tree.conforms(&lts.states[s])?;
    }
    for &i in lasso.stem.iter() {
        participants(lts, &analyzer.tree, i)?;
    }
    let alts = alternatives(lts);
    let mut moving = BTreeSet::new();
    for &i in lasso.cycle_transitions() {
        moving.extend(analyzer.movers(lts, i, &alts[i])?);
    }
    analyzer.evaluate(&lts.states[start], &moving)
}

/// Complete paths: just cycles, and finite paths ending where only blocking
/// actions are enabled.
pub fn is_complete(env: &Environment, lts: &Lts, lasso: &Lasso) -> Result<bool, ModelError> {
    match lasso.cycle {
        Cycle::Loop(_) => Ok(is_just(env, lts, lasso, Semantics::Signals)?.just),
        Cycle::Terminal(s) => {
            lasso.validate(lts)?;
            Ok(lts.transitions.iter().filter(|t| t.source == s).all(|t| env.is_blocking(&t.label)))
        }
    }
}
