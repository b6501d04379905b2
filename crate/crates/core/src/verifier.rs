//! Safety and liveness checks for mutual-exclusion models.
//!
//! Liveness is checked on a graph whose nodes are LTS states paired with
//! the set of processes that have left their non-critical section without
//! reaching the critical section yet. A process `i` starves on a just path
//! iff the path eventually stays in a strongly connected set of nodes where
//! `i` is pending and `crit[i]` never happens. Making more components move
//! can only make a path more just, so it is enough to test each strongly
//! connected component once, with every leaf that moves somewhere inside it
//! counted as moving.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use serde::Serialize;

use crate::error::ModelError;
use crate::justness::{
    alternatives, is_complete, is_just, Analyzer, ComponentTree, Cycle, JustnessVerdict, Lasso, Semantics,
};
use crate::lts::{canonicalize, explore, unfold_structure, Limits, Lts};
use crate::protocols::{MutexRole, ProtocolModel};
use crate::sos::{ComponentPath, Sos};
use crate::term::{Action, Environment, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_states: usize,
    /// Justness evaluations allowed before giving up with `Unknown`.
    pub max_checks: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_states: crate::lts::DEFAULT_MAX_STATES, max_checks: 1_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Holds,
    Violated,
    Unknown,
}

/// One transition of a witness, as it appears in the LTS.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WitnessStep {
    pub transition: usize,
    pub label: Action,
    pub participants: Vec<ComponentPath>,
    pub target: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SafetyVerdict {
    pub holds: bool,
    pub states: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<SafetyWitness>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SafetyWitness {
    pub path: Vec<WitnessStep>,
    /// Processes (indices into the model's roles) in their critical section
    /// at the end of the path.
    pub in_critical: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LivenessVerdict {
    pub outcome: Outcome,
    /// Every candidate was examined, so `holds` is a proof for this model.
    pub exhaustive: bool,
    pub states: usize,
    pub checks: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

impl LivenessVerdict {
    pub fn holds(&self) -> bool {
        self.outcome == Outcome::Holds
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    pub starving: usize,
    #[serde(serialize_with = "as_display")]
    pub lasso: Lasso,
    pub stem: Vec<WitnessStep>,
    pub cycle: Vec<WitnessStep>,
    pub justness: JustnessVerdict,
}

fn as_display<S: serde::Serializer, T: std::fmt::Display>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Clone, Debug, Serialize)]
pub struct PathReport {
    pub complete: bool,
    pub justness: JustnessVerdict,
    pub liveness_ok: bool,
    /// Processes with an occurrence of `noncrit` never followed by `crit`.
    pub starving: Vec<usize>,
}

/// LTS of a model, failing on truncation.
pub fn model_lts(model: &ProtocolModel, max_states: usize) -> Result<Lts, ModelError> {
    let lts = explore(&model.env, &model.root, Limits::states(max_states))?;
    if lts.truncated {
        return Err(ModelError::TruncatedInput);
    }
    Ok(lts)
}

fn role_of(roles: &[MutexRole], label: &Action, crit: bool) -> Option<usize> {
    roles.iter().position(|r| if crit { r.crit == *label } else { r.noncrit == *label })
}

fn step_of(lts: &Lts, i: usize) -> WitnessStep {
    let t = &lts.transitions[i];
    WitnessStep {
        transition: i,
        label: t.label.clone(),
        participants: t.participants.clone(),
        target: lts.states[t.target].to_string(),
    }
}

pub fn check_safety(model: &ProtocolModel, max_states: usize) -> Result<SafetyVerdict, ModelError> {
    let lts = model_lts(model, max_states)?;
    safety_on(&lts, &model.roles, &model.overflow)
}

/// Leaves taking part in each transition.
fn leaf_sets(lts: &Lts, tree: &ComponentTree) -> Result<Vec<BTreeSet<usize>>, ModelError> {
    lts.transitions
        .iter()
        .map(|t| {
            t.participants
                .iter()
                .map(|p| {
                    tree.leaf_of(p)
                        .ok_or_else(|| ModelError::DynamicParallelism(format!("participant {p} is not a component")))
                })
                .collect()
        })
        .collect()
}

/// A state paired with a bit mask over processes.
type Node = (usize, u32);

/// Breadth-first search over states paired with the set of processes in
/// their critical section. A process enters with its `crit` action and
/// leaves with the next transition its component takes part in.
pub fn safety_on(lts: &Lts, roles: &[MutexRole], overflow: &BTreeSet<Action>) -> Result<SafetyVerdict, ModelError> {
    if lts.truncated {
        return Err(ModelError::TruncatedInput);
    }
    let tree = ComponentTree::build(&lts.states[lts.initial])?;
    let leaves = leaf_sets(lts, &tree)?;
    let out = lts.outgoing();
    // (state, in-CS mask) -> predecessor node and the transition taken.
    let mut seen: HashMap<Node, Option<(usize, u32, usize)>> = HashMap::new();
    let mut queue = VecDeque::from([(lts.initial, 0u32)]);
    seen.insert((lts.initial, 0), None);
    // Component of each process, learnt from its crit transitions.
    let mut owner: Vec<Option<usize>> = vec![None; roles.len()];
    while let Some((s, mask)) = queue.pop_front() {
        if mask.count_ones() >= 2 {
            let mut path = Vec::new();
            let mut at = (s, mask);
            while let Some(Some((ps, pm, t))) = seen.get(&at) {
                path.push(step_of(lts, *t));
                at = (*ps, *pm);
            }
            path.reverse();
            let in_critical = (0..roles.len()).filter(|i| mask & (1 << i) != 0).collect();
            let witness = SafetyWitness { path, in_critical };
            return Ok(SafetyVerdict { holds: false, states: lts.states.len(), witness: Some(witness) });
        }
        for &ti in &out[s] {
            let t = &lts.transitions[ti];
            if overflow.contains(&t.label) {
                continue;
            }
            let mut next = mask;
            for (i, o) in owner.iter().enumerate() {
                if o.is_some_and(|l| leaves[ti].contains(&l)) {
                    next &= !(1 << i);
                }
            }
            if let Some(i) = role_of(roles, &t.label, true) {
                owner[i] = leaves[ti].first().copied();
                next |= 1 << i;
            }
            if let std::collections::hash_map::Entry::Vacant(e) = seen.entry((t.target, next)) {
                e.insert(Some((s, mask, ti)));
                queue.push_back((t.target, next));
            }
        }
    }
    Ok(SafetyVerdict { holds: true, states: lts.states.len(), witness: None })
}

/// Graph of (state, pending processes) reachable from the initial state.
struct Pending {
    nodes: Vec<(usize, u32)>,
    index: HashMap<(usize, u32), usize>,
    /// (LTS transition, target node) per node.
    edges: Vec<Vec<(usize, usize)>>,
    parent: Vec<Option<(usize, usize)>>,
}

impl Pending {
    fn build(lts: &Lts, roles: &[MutexRole], overflow: &BTreeSet<Action>) -> Self {
        let out = lts.outgoing();
        let mut g = Pending {
            nodes: vec![(lts.initial, 0)],
            index: HashMap::new(),
            edges: vec![Vec::new()],
            parent: vec![None],
        };
        g.index.insert((lts.initial, 0), 0);
        let mut queue = VecDeque::from([0usize]);
        while let Some(n) = queue.pop_front() {
            let (s, mask) = g.nodes[n];
            for &ti in &out[s] {
                let t = &lts.transitions[ti];
                if overflow.contains(&t.label) {
                    continue;
                }
                let mut next = mask;
                if let Some(i) = role_of(roles, &t.label, false) {
                    next |= 1 << i;
                }
                if let Some(i) = role_of(roles, &t.label, true) {
                    next &= !(1 << i);
                }
                let m = match g.index.get(&(t.target, next)) {
                    Some(&m) => m,
                    None => {
                        let m = g.nodes.len();
                        g.nodes.push((t.target, next));
                        g.index.insert((t.target, next), m);
                        g.edges.push(Vec::new());
                        g.parent.push(Some((n, ti)));
                        queue.push_back(m);
                        m
                    }
                };
                g.edges[n].push((ti, m));
            }
        }
        g
    }

    fn stem(&self, mut n: usize) -> Vec<usize> {
        let mut out = Vec::new();
        while let Some((p, t)) = self.parent[n] {
            out.push(t);
            n = p;
        }
        out.reverse();
        out
    }
}

/// Strongly connected components of the nodes satisfying `keep`, using
/// only edges accepted by `edge`. Iterative Tarjan.
fn sccs(edges: &[Vec<(usize, usize)>], keep: &dyn Fn(usize) -> bool, edge: &dyn Fn(usize) -> bool) -> Vec<Vec<usize>> {
    const NONE: usize = usize::MAX;
    let n = edges.len();
    let mut index = vec![NONE; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    for root in 0..n {
        if index[root] != NONE || !keep(root) {
            continue;
        }
        let mut work = vec![(root, 0usize)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut k)) = work.last_mut() {
            if let Some(&(t, w)) = edges[v].get(*k) {
                *k += 1;
                if !keep(w) || !edge(t) {
                    continue;
                }
                if index[w] == NONE {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some(&(u, _)) = work.last() {
                low[u] = low[u].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                out.push(comp);
            }
        }
    }
    out
}

/// Shortest path of LTS transitions from `from` to `to` inside `inside`.
fn path_within(
    g: &Pending,
    inside: &BTreeSet<usize>,
    edge: &dyn Fn(usize) -> bool,
    from: usize,
    to: usize,
) -> Vec<usize> {
    let mut prev: HashMap<usize, (usize, usize)> = HashMap::new();
    let mut queue = VecDeque::from([from]);
    let mut seen = BTreeSet::from([from]);
    while let Some(n) = queue.pop_front() {
        if n == to {
            break;
        }
        for &(t, m) in &g.edges[n] {
            if inside.contains(&m) && edge(t) && seen.insert(m) {
                prev.insert(m, (n, t));
                queue.push_back(m);
            }
        }
    }
    let mut out = Vec::new();
    let mut at = to;
    while at != from {
        let (p, t) = prev[&at];
        out.push(t);
        at = p;
    }
    out.reverse();
    out
}

pub fn check_liveness(model: &ProtocolModel, budget: Budget) -> Result<LivenessVerdict, ModelError> {
    let lts = model_lts(model, budget.max_states)?;
    liveness_on(&model.env, &lts, &model.roles, &model.overflow, budget)
}

pub fn liveness_on(
    env: &Environment,
    lts: &Lts,
    roles: &[MutexRole],
    overflow: &BTreeSet<Action>,
    budget: Budget,
) -> Result<LivenessVerdict, ModelError> {
    if lts.truncated {
        return Err(ModelError::TruncatedInput);
    }
    let analyzer = Analyzer::for_lts(env, lts, Semantics::Signals)?;
    let alts = alternatives(lts);
    let g = Pending::build(lts, roles, overflow);
    let mut checks = 0;
    let verdict = |outcome, counterexample, checks| LivenessVerdict {
        outcome,
        exhaustive: outcome != Outcome::Unknown,
        states: lts.states.len(),
        checks,
        counterexample,
    };
    let mut movers_of: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    for i in 0..roles.len() {
        let pending = |n: usize| g.nodes[n].1 & (1 << i) != 0;
        let crit = &roles[i].crit;
        let allowed = |t: usize| lts.transitions[t].label != *crit;

        // Paths that stop for good while `i` is pending.
        let mut tried = BTreeSet::new();
        for n in (0..g.nodes.len()).filter(|&n| pending(n)) {
            let s = g.nodes[n].0;
            if !tried.insert(s) {
                continue;
            }
            checks += 1;
            if checks > budget.max_checks {
                return Ok(verdict(Outcome::Unknown, None, checks));
            }
            if analyzer.evaluate(&lts.states[s], &BTreeSet::new())?.just {
                let lasso = Lasso { stem: g.stem(n), cycle: Cycle::Terminal(s) };
                let cx = counterexample(env, lts, i, lasso)?;
                return Ok(verdict(Outcome::Violated, Some(cx), checks));
            }
        }

        // Paths that cycle forever while `i` is pending.
        for comp in sccs(&g.edges, &pending, &allowed) {
            let inside: BTreeSet<usize> = comp.iter().copied().collect();
            let internal: Vec<(usize, usize, usize)> = comp
                .iter()
                .flat_map(|&n| g.edges[n].iter().map(move |&(t, m)| (n, t, m)))
                .filter(|&(_, t, m)| inside.contains(&m) && allowed(t))
                .collect();
            if internal.is_empty() {
                continue;
            }
            checks += 1;
            if checks > budget.max_checks {
                return Ok(verdict(Outcome::Unknown, None, checks));
            }
            let mut moving = BTreeSet::new();
            for &(_, t, _) in &internal {
                let m = match movers_of.get(&t) {
                    Some(m) => m.clone(),
                    None => {
                        let m = analyzer.movers(lts, t, &alts[t])?;
                        movers_of.insert(t, m.clone());
                        m
                    }
                };
                moving.extend(m);
            }
            let start = comp[0];
            if !analyzer.evaluate(&lts.states[g.nodes[start].0], &moving)?.just {
                continue;
            }
            // A closed walk through one edge per moving leaf and per crit
            // action available in the component.
            let crits_of = |t: usize| role_of(roles, &lts.transitions[t].label, true);
            let mut covered = BTreeSet::new();
            let mut crits = BTreeSet::new();
            let mut cycle = Vec::new();
            let mut at = start;
            let mut walk = |steps: Vec<usize>, covered: &mut BTreeSet<usize>, crits: &mut BTreeSet<usize>| {
                for t in steps {
                    covered.extend(movers_of[&t].iter().copied());
                    crits.extend(crits_of(t));
                    cycle.push(t);
                }
            };
            for &(n, t, m) in &internal {
                let new_crit = crits_of(t).is_some_and(|j| !crits.contains(&j));
                if new_crit || !movers_of[&t].is_subset(&covered) {
                    let mut steps = path_within(&g, &inside, &allowed, at, n);
                    steps.push(t);
                    walk(steps, &mut covered, &mut crits);
                    at = m;
                }
            }
            walk(path_within(&g, &inside, &allowed, at, start), &mut covered, &mut crits);
            let lasso = Lasso { stem: g.stem(start), cycle: Cycle::Loop(cycle) };
            let cx = counterexample(env, lts, i, lasso)?;
            return Ok(verdict(Outcome::Violated, Some(cx), checks));
        }
    }
    Ok(verdict(Outcome::Holds, None, checks))
}

fn counterexample(env: &Environment, lts: &Lts, starving: usize, lasso: Lasso) -> Result<Counterexample, ModelError> {
    let justness = is_just(env, lts, &lasso, Semantics::Signals)?;
    debug_assert!(justness.just, "counterexample {lasso} is not just");
    let cycle = match &lasso.cycle {
        Cycle::Loop(c) => c.iter().map(|&t| step_of(lts, t)).collect(),
        Cycle::Terminal(_) => Vec::new(),
    };
    Ok(Counterexample { starving, stem: lasso.stem.iter().map(|&t| step_of(lts, t)).collect(), cycle, lasso, justness })
}

/// Processes with an occurrence of `noncrit` that is not followed by
/// `crit` on the infinite unfolding of `lasso` (or on the finite path).
pub fn starving_processes(lts: &Lts, roles: &[MutexRole], lasso: &Lasso) -> Vec<usize> {
    let labels = |ts: &[usize]| -> Vec<&Action> { ts.iter().map(|&t| &lts.transitions[t].label).collect() };
    let stem = labels(&lasso.stem);
    let cycle = match &lasso.cycle {
        Cycle::Loop(c) => labels(c),
        Cycle::Terminal(_) => Vec::new(),
    };
    (0..roles.len())
        .filter(|&i| {
            let r = &roles[i];
            let cycle_has = |a: &Action| cycle.contains(&a);
            let open_in_stem =
                stem.iter().rposition(|l| **l == r.noncrit).is_some_and(|p| !stem[p..].iter().any(|l| **l == r.crit));
            (open_in_stem || cycle_has(&r.noncrit)) && !cycle_has(&r.crit)
        })
        .collect()
}

pub fn classify_path(
    env: &Environment,
    lts: &Lts,
    roles: &[MutexRole],
    lasso: &Lasso,
) -> Result<PathReport, ModelError> {
    let justness = is_just(env, lts, lasso, Semantics::Signals)?;
    let complete = is_complete(env, lts, lasso)?;
    let starving = starving_processes(lts, roles, lasso);
    Ok(PathReport { complete, justness, liveness_ok: starving.is_empty(), starving })
}

/// Replays LTS transitions from the model's root with the rule engine
/// alone, returning the reached terms. Each step must be derivable with
/// the recorded label and participants and must reach the recorded state.
pub fn replay(env: &Environment, root: &Arc<Term>, lts: &Lts, transitions: &[usize]) -> Result<Vec<Arc<Term>>, String> {
    let sos = Sos::new(env);
    let err = |e: ModelError| e.to_string();
    let mut at = canonicalize(env, &unfold_structure(env, root).map_err(err)?).map_err(err)?;
    let mut out = vec![at.clone()];
    for (k, &ti) in transitions.iter().enumerate() {
        let t = lts.transitions.get(ti).ok_or_else(|| format!("step {k}: no transition {ti}"))?;
        let found = sos
            .transitions(&at)
            .map_err(err)?
            .into_iter()
            .filter(|d| d.label == t.label && d.participants == t.participants)
            .map(|d| canonicalize(env, &d.target))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let next = found
            .into_iter()
            .find(|n| **n == *lts.states[t.target])
            .ok_or_else(|| format!("step {k}: `{}` by {:?} is not derivable", t.label, t.participants))?;
        at = next;
        out.push(at.clone());
    }
    Ok(out)
}

/// Replays a safety witness and checks that its last state has two
/// processes in their critical sections.
pub fn replay_safety(model: &ProtocolModel, lts: &Lts, w: &SafetyWitness) -> Result<(), String> {
    let path: Vec<usize> = w.path.iter().map(|s| s.transition).collect();
    let terms = replay(&model.env, &model.root, lts, &path)?;
    let tree = ComponentTree::build(&terms[0]).map_err(|e| e.to_string())?;
    let mut in_cs: Vec<Option<usize>> = vec![None; model.roles.len()];
    for s in &w.path {
        let leaves: BTreeSet<usize> = s.participants.iter().filter_map(|p| tree.leaf_of(p)).collect();
        for slot in in_cs.iter_mut() {
            if slot.is_some_and(|l| leaves.contains(&l)) {
                *slot = None;
            }
        }
        if let Some(i) = role_of(&model.roles, &s.label, true) {
            in_cs[i] = leaves.first().copied();
        }
    }
    let inside: Vec<usize> = (0..in_cs.len()).filter(|&i| in_cs[i].is_some()).collect();
    if inside.len() < 2 || inside != w.in_critical {
        return Err(format!("path ends with {inside:?} in the critical section"));
    }
    Ok(())
}

/// Replays a liveness counterexample and re-derives its claims: the cycle
/// closes, the path is just and complete, and the starving process never
/// reaches its critical section.
pub fn replay_liveness(model: &ProtocolModel, lts: &Lts, cx: &Counterexample) -> Result<(), String> {
    let mut all = cx.lasso.stem.clone();
    let stem_len = all.len();
    if let Cycle::Loop(c) = &cx.lasso.cycle {
        all.extend(c);
    }
    let terms = replay(&model.env, &model.root, lts, &all)?;
    if matches!(cx.lasso.cycle, Cycle::Loop(_)) && terms[stem_len] != *terms.last().unwrap() {
        return Err("cycle does not return to its first state".into());
    }
    let report = classify_path(&model.env, lts, &model.roles, &cx.lasso).map_err(|e| e.to_string())?;
    if !report.justness.just || !report.complete {
        return Err(format!("path is not just and complete: {:?}", report.justness.witness));
    }
    if !report.starving.contains(&cx.starving) {
        return Err(format!("process {} is not starved", cx.starving));
    }
    Ok(())
}
