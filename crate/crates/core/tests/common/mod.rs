//! Helpers shared by the integration tests: a generator of closed terms and
//! a brute-force justness checker.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use ccss::justness::{Cycle, Lasso};
use ccss::lts::Lts;
use ccss::parser::parse;
use ccss::sos::{ComponentPath, Sos, Step};
use ccss::term::{Relabelling, Term};
use ccss::{Action, Environment, Name};
use proptest::prelude::*;

pub const NAMES: [&str; 4] = ["a", "b", "c", "d"];
pub const SIGNALS: [&str; 2] = ["s", "t"];

/// Environment of the generated terms: two recursive agents so that some
/// terms have cycles.
pub fn term_env() -> Environment {
    parse("signals { s, t }\nX = (a.X) ^ s\nY = 'b.Y + tau.0\nsystem = 0").unwrap().env
}

fn n(s: &str) -> Name {
    Name::new(s)
}

pub fn arb_action() -> impl Strategy<Value = Action> {
    prop_oneof![
        Just(Action::Tau),
        prop::sample::select(NAMES.to_vec()).prop_map(|a| Action::Name(n(a))),
        prop::sample::select(NAMES.to_vec()).prop_map(|a| Action::CoName(n(a))),
        prop::sample::select(SIGNALS.to_vec()).prop_map(|s| Action::Signal(n(s))),
    ]
}

pub fn arb_relabelling() -> impl Strategy<Value = Relabelling> {
    (prop::sample::select(NAMES.to_vec()), prop::sample::select(NAMES.to_vec()), any::<bool>()).prop_map(
        |(old, new, swap_signals)| {
            let mut f = Relabelling::default();
            f.handshake.insert(n(old), n(new));
            if swap_signals {
                f.signal.insert(n("s"), n("t"));
            }
            f
        },
    )
}

/// Closed terms of depth at most `depth` over four names and two signals.
pub fn arb_term(depth: u32) -> BoxedStrategy<Arc<Term>> {
    let leaf = prop_oneof![
        Just(Term::nil()),
        arb_action().prop_map(|a| Term::prefix(a, Term::nil())),
        Just(Term::ident(n("X"))),
        Just(Term::ident(n("Y"))),
    ];
    leaf.prop_recursive(depth, 24, 2, |inner| {
        prop_oneof![
            (arb_action(), inner.clone()).prop_map(|(a, t)| Term::prefix(a, t)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Term::sum(vec![l, r])),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Term::par(l, r)),
            (inner.clone(), prop::sample::select(vec!["a", "b", "s"])).prop_map(|(t, x)| Term::restrict(t, [n(x)])),
            (inner.clone(), arb_relabelling()).prop_map(|(t, f)| Term::relabel(t, f)),
            (inner, prop::sample::select(SIGNALS.to_vec())).prop_map(|(t, s)| Term::signal(t, n(s))),
        ]
    })
    .boxed()
}

/// Small systems for exhaustive justness comparisons.
pub const LEAVES: [(&str, &str); 8] = [
    ("0", ""),
    ("A", "A = a.A"),
    ("Ac", "Ac = 'a.Ac"),
    ("Rs", "Rs = s.Rs"),
    ("Es", "Es = (b.Es) ^ s"),
    ("Ab", "Ab = a.0 + 'b.Ab"),
    ("tau.0", ""),
    ("'b.0", ""),
];

pub fn shapes(k: usize) -> &'static [&'static str] {
    match k {
        1 => &["$1", "$1 \\ {a}"],
        2 => &["$1 | $2", "($1 | $2) \\ {a}", "($1 | $2) \\ {a, b, s}", "($1 | $2) [b/a]"],
        _ => &[
            "($1 | $2) | $3",
            "(($1 | $2) \\ {a}) | $3",
            "($1 | ($2 | $3)) \\ {a, b, s}",
            "((($1 | $2) \\ {s}) | $3) \\ {b}",
        ],
    }
}

/// Every system over [`LEAVES`] with one to three components, as source text.
pub fn small_systems() -> Vec<String> {
    let mut out = Vec::new();
    let defs: String = LEAVES.iter().filter(|l| !l.1.is_empty()).map(|l| format!("{}\n", l.1)).collect();
    for k in 1..=3 {
        let mut picks = vec![vec![]];
        for _ in 0..k {
            picks = picks
                .into_iter()
                .flat_map(|p: Vec<usize>| (0..LEAVES.len()).map(move |i| [p.clone(), vec![i]].concat()))
                .collect();
        }
        for shape in shapes(k) {
            for p in &picks {
                let mut sys = shape.to_string();
                for (j, &i) in p.iter().enumerate() {
                    sys = sys.replace(&format!("${}", j + 1), LEAVES[i].0);
                }
                out.push(format!("signals {{ s }}\n{defs}system = {sys}"));
            }
        }
    }
    out
}

/// Calls `visit` on every lasso with stem length at most `max_stem` and
/// cycle length at most `max_cycle`, including paths that end after the
/// stem.
pub fn for_each_lasso(lts: &Lts, max_stem: usize, max_cycle: usize, visit: &mut dyn FnMut(&[usize], &Cycle)) {
    let out = lts.outgoing();
    let mut stem = Vec::new();
    stems(lts, &out, lts.initial, &mut stem, max_stem, max_cycle, visit);
}

fn stems(
    lts: &Lts,
    out: &[Vec<usize>],
    at: usize,
    stem: &mut Vec<usize>,
    max_stem: usize,
    max_cycle: usize,
    visit: &mut dyn FnMut(&[usize], &Cycle),
) {
    visit(stem, &Cycle::Terminal(at));
    let mut cycle = Vec::new();
    cycles(lts, out, at, at, &mut cycle, max_cycle, &mut |c| visit(stem, &Cycle::Loop(c.to_vec())));
    if stem.len() < max_stem {
        for &t in &out[at] {
            stem.push(t);
            stems(lts, out, lts.transitions[t].target, stem, max_stem, max_cycle, visit);
            stem.pop();
        }
    }
}

fn cycles(
    lts: &Lts,
    out: &[Vec<usize>],
    home: usize,
    at: usize,
    walk: &mut Vec<usize>,
    max: usize,
    visit: &mut dyn FnMut(&[usize]),
) {
    if walk.len() == max {
        return;
    }
    for &t in &out[at] {
        walk.push(t);
        let tgt = lts.transitions[t].target;
        if tgt == home {
            visit(walk);
        }
        cycles(lts, out, home, tgt, walk, max, visit);
        walk.pop();
    }
}

/// Elements a justness set may contain, one bit each.
pub struct Alphabet {
    pub items: Vec<Action>,
}

impl Alphabet {
    pub fn of(names: &[&str], signals: &[&str]) -> Self {
        let mut items = Vec::new();
        for a in names {
            items.push(Action::Name(n(a)));
            items.push(Action::CoName(n(a)));
        }
        for s in signals {
            items.push(Action::Signal(n(s)));
        }
        Alphabet { items }
    }

    fn bit(&self, a: &Action) -> u32 {
        let i = self.items.iter().position(|x| x == a).unwrap_or_else(|| panic!("{a} is outside the alphabet"));
        1 << i
    }

    pub fn mask(&self, set: impl IntoIterator<Item = Action>) -> u32 {
        set.into_iter().filter(|a| *a != Action::Tau).map(|a| self.bit(&a)).fold(0, |m, b| m | b)
    }

    fn full(&self) -> u32 {
        (1 << self.items.len()) - 1
    }

    /// All sets, as masks.
    fn sets(&self) -> std::ops::RangeInclusive<u32> {
        0..=self.full()
    }

    fn complement_mask(&self, m: u32) -> u32 {
        let mut out = 0;
        for (i, a) in self.items.iter().enumerate() {
            if m & (1 << i) != 0 {
                if let Some(c) = a.complement() {
                    out |= self.bit(&c);
                }
            }
        }
        out
    }

    fn signal_mask(&self) -> u32 {
        self.mask(self.items.iter().filter(|a| matches!(a, Action::Signal(_))).cloned())
    }
}

/// A family of sets given by its members; bit `m` is set iff set `m` is in
/// the family.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Family(pub Vec<bool>);

impl Family {
    fn new(al: &Alphabet, member: impl Fn(u32) -> bool) -> Self {
        Family(al.sets().map(member).collect())
    }

    pub fn contains(&self, m: u32) -> bool {
        self.0[m as usize]
    }

    fn union(&mut self, other: &Family) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= *b;
        }
    }

    pub fn members(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().enumerate().filter(|(_, b)| **b).map(|(m, _)| m as u32)
    }
}

enum Node {
    Leaf(ComponentPath),
    Par(Box<Node>, Box<Node>),
    Restrict(BTreeSet<Name>, Box<Node>),
    Relabel(Relabelling, Box<Node>),
}

fn structure(t: &Arc<Term>, path: ComponentPath) -> Node {
    match &**t {
        Term::Par(l, r) => Node::Par(
            Box::new(structure(l, path.child(Step::ParLeft))),
            Box::new(structure(r, path.child(Step::ParRight))),
        ),
        Term::Restrict(b, l) => Node::Restrict((**l).clone(), Box::new(structure(b, path.child(Step::UnderRestrict)))),
        Term::Relabel(b, f) => Node::Relabel((**f).clone(), Box::new(structure(b, path.child(Step::UnderRelabel)))),
        _ => Node::Leaf(path),
    }
}

/// Sub-term at a path made of structural steps only.
fn subterm(t: &Arc<Term>, path: &ComponentPath) -> Arc<Term> {
    let mut cur = t.clone();
    for s in path.steps() {
        cur = match (s, &*cur) {
            (Step::ParLeft, Term::Par(l, _)) => l.clone(),
            (Step::ParRight, Term::Par(_, r)) => r.clone(),
            (Step::UnderRestrict, Term::Restrict(b, _)) | (Step::UnderRelabel, Term::Relabel(b, _)) => b.clone(),
            _ => panic!("path {path} does not fit"),
        };
    }
    cur
}

/// Justness by enumeration of the set assignments in the definitions.
///
/// For every decomposition of the lasso, the sets `Y` for
/// which the path is `Y`-just are computed bottom-up by trying all `X`,
/// `X'`, `Z`, `Z'` at parallel compositions. Returns the family of `Y`
/// for which the lasso is `Y`-just.
pub fn brute_force(env: &Environment, lts: &Lts, lasso: &Lasso, al: &Alphabet, with_signals: bool) -> Family {
    let sos = Sos::new(env);
    let start = lasso.validate(lts).unwrap();
    let root = structure(&lts.states[lts.initial], ComponentPath::root());
    let cycle: Vec<usize> = match &lasso.cycle {
        Cycle::Loop(c) => c.clone(),
        Cycle::Terminal(_) => vec![],
    };
    // Derivations that yield the same step.
    let same = |t: usize| -> Vec<usize> {
        let x = &lts.transitions[t];
        (0..lts.transitions.len())
            .filter(|&j| {
                let y = &lts.transitions[j];
                (y.source, &y.label, y.target) == (x.source, &x.label, x.target)
            })
            .collect()
    };
    // For each cycle position, the non-empty sets of derivations used
    // infinitely often.
    let mut choices: Vec<Vec<Vec<usize>>> = Vec::new();
    for &t in &cycle {
        let alts = same(t);
        let mut subsets = Vec::new();
        for bits in 1u32..(1 << alts.len()) {
            subsets.push(alts.iter().enumerate().filter(|(i, _)| bits & (1 << i) != 0).map(|(_, &a)| a).collect());
        }
        choices.push(subsets);
    }
    let mut combos: Vec<Vec<usize>> = vec![vec![]];
    for c in &choices {
        combos = combos
            .into_iter()
            .flat_map(|p| c.iter().map(move |s: &Vec<usize>| [p.clone(), s.clone()].concat()))
            .collect();
    }
    // Every suffix of a lasso ends in the same cycle, and components that
    // stop moving rest in the same terms, so one evaluation covers them all.
    let mut result = Family::new(al, |_| false);
    for used in &combos {
        let moved: Vec<&ComponentPath> = used.iter().flat_map(|&t| lts.transitions[t].participants.iter()).collect();
        let (just, _) = sets(&root, &sos, &lts.states[start], &moved, al, with_signals);
        result.union(&just);
    }
    result
}

/// (Y-just family, Y-signalling family) of the projection onto `node`.
fn sets(
    node: &Node,
    sos: &Sos,
    state: &Arc<Term>,
    moved: &[&ComponentPath],
    al: &Alphabet,
    with_signals: bool,
) -> (Family, Family) {
    match node {
        Node::Leaf(path) => {
            if moved.iter().any(|p| p.starts_with(path)) {
                return (Family::new(al, |_| true), Family::new(al, |_| true));
            }
            let t = subterm(state, path);
            let (ts, sig) = sos.step(&t).unwrap();
            let labels: Vec<Action> = ts.into_iter().map(|d| d.label).collect();
            let has_tau = labels.contains(&Action::Tau);
            let enabled = al.mask(labels);
            let emitted = if with_signals { al.mask(sig.into_iter().map(Action::Signal)) } else { 0 };
            (Family::new(al, |y| !has_tau && enabled & !y == 0), Family::new(al, |y| emitted & !y == 0))
        }
        Node::Par(l, r) => {
            let (xl, sl) = sets(l, sos, state, moved, al, with_signals);
            let (xr, sr) = sets(r, sos, state, moved, al, with_signals);
            let mut just = Family::new(al, |_| false);
            for x in xl.members() {
                for z in xr.members() {
                    if x & al.complement_mask(z) != 0 {
                        continue;
                    }
                    let xp = sl.members().any(|xp| xp & z == 0);
                    let zp = sr.members().any(|zp| x & zp == 0);
                    if !(xp && zp) {
                        continue;
                    }
                    for y in al.sets() {
                        if (x | z) & !y == 0 {
                            just.0[y as usize] = true;
                        }
                    }
                }
            }
            let sig = Family::new(al, |y| sl.members().any(|a| sr.members().any(|b| (a | b) & !y == 0)));
            (just, sig)
        }
        Node::Restrict(names, c) => {
            let (j, s) = sets(c, sos, state, moved, al, with_signals);
            let mut hidden = 0;
            for (i, a) in al.items.iter().enumerate() {
                if a.name().is_some_and(|x| names.contains(x)) {
                    hidden |= 1 << i;
                }
            }
            let hidden_signals = hidden & al.signal_mask();
            (Family::new(al, |y| j.contains(y | hidden)), Family::new(al, |y| s.contains(y | hidden_signals)))
        }
        Node::Relabel(f, c) => {
            let (j, s) = sets(c, sos, state, moved, al, with_signals);
            let inverse = |y: u32| -> u32 {
                let mut m = 0;
                for (i, a) in al.items.iter().enumerate() {
                    let fa = f.apply(a);
                    if al.items.contains(&fa) && y & al.mask([fa]) != 0 {
                        m |= 1 << i;
                    }
                }
                m
            };
            (Family::new(al, |y| j.contains(inverse(y))), Family::new(al, |y| s.contains(inverse(y))))
        }
    }
}

/// Key that determines a lasso's justness: the state the cycle starts in
/// (or the path ends in) and the transitions of the cycle.
pub fn lasso_key(lts: &Lts, stem: &[usize], cycle: &Cycle) -> (usize, BTreeSet<usize>) {
    let start = stem.last().map_or(lts.initial, |&t| lts.transitions[t].target);
    let set = match cycle {
        Cycle::Loop(c) => c.iter().copied().collect(),
        Cycle::Terminal(_) => BTreeSet::new(),
    };
    (start, set)
}

pub type Memo<V> = HashMap<(usize, BTreeSet<usize>), V>;
