//! Pretty printer producing text the parser reads back to the same term.

use std::fmt::Write;
use std::sync::Arc;

use crate::parser::SpecFile;
use crate::term::{Guard, Term};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Level {
    Sum,
    Par,
    Prefix,
    Postfix,
}

/// Prints a term with the minimal parentheses needed to parse it back.
pub fn print_term(t: &Arc<Term>) -> String {
    let mut out = String::new();
    term(&mut out, t, Level::Sum);
    out
}

impl std::fmt::Display for Term {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&print_term(&Arc::new(self.clone())))
    }
}

fn level_of(t: &Term) -> Level {
    match t {
        Term::Sum(_) | Term::IndexedSum(_) => Level::Sum,
        Term::Par(..) => Level::Par,
        Term::Prefix(..) => Level::Prefix,
        Term::Restrict(..) | Term::Relabel(..) | Term::Signal(..) | Term::Nil | Term::Ident(_) => Level::Postfix,
    }
}

fn term(out: &mut String, t: &Arc<Term>, ctx: Level) {
    if level_of(t) < ctx {
        out.push('(');
        term(out, t, Level::Sum);
        out.push(')');
        return;
    }
    match &**t {
        Term::Nil => out.push('0'),
        Term::Ident(n) => write!(out, "{n}").unwrap(),
        Term::Prefix(a, b) => {
            write!(out, "{a}.").unwrap();
            // A prefix body may itself be a prefix; postfix operators there
            // bind to the body, not to the whole prefix.
            term(out, b, Level::Prefix);
        }
        Term::Sum(bs) => {
            for (i, b) in bs.iter().enumerate() {
                if i > 0 {
                    out.push_str(" + ");
                }
                if matches!(**b, Term::Sum(_)) {
                    out.push('(');
                    term(out, b, Level::Sum);
                    out.push(')');
                } else {
                    term(out, b, Level::Sum);
                }
            }
        }
        Term::IndexedSum(s) => {
            write!(out, "sum {} in {}", s.var, s.domain).unwrap();
            if s.guard != Guard::True {
                write!(out, " when {}", s.guard).unwrap();
            }
            out.push_str(" . ");
            term(out, &s.body, Level::Par);
        }
        Term::Par(l, r) => {
            term(out, l, Level::Par);
            out.push_str(" | ");
            term(out, r, Level::Prefix);
        }
        Term::Restrict(b, names) => {
            term(out, b, Level::Postfix);
            let names: Vec<String> = names.iter().map(ToString::to_string).collect();
            write!(out, " \\ {{{}}}", names.join(", ")).unwrap();
        }
        Term::Relabel(b, f) => {
            term(out, b, Level::Postfix);
            let pairs: Vec<String> = f.pairs().map(|(new, old)| format!("{new}/{old}")).collect();
            write!(out, " [{}]", pairs.join(", ")).unwrap();
        }
        Term::Signal(b, s) => {
            term(out, b, Level::Postfix);
            write!(out, " ^ {s}").unwrap();
        }
    }
}

/// Prints a whole specification file.
pub fn print_spec(spec: &SpecFile) -> String {
    let env = &spec.env;
    let mut out = String::new();
    let list = |items: Vec<String>| items.join(", ");
    if !env.signals.is_empty() {
        writeln!(out, "signals {{ {} }}", list(env.signals.iter().map(|s| s.to_string()).collect())).unwrap();
    }
    for (name, (lo, hi)) in &env.ranges {
        writeln!(out, "range {name} = {lo}..{hi}").unwrap();
    }
    let actions = |set: &std::collections::BTreeSet<crate::Action>| list(set.iter().map(ToString::to_string).collect());
    if !env.blocking.is_empty() {
        writeln!(out, "blocking {{ {} }}", actions(&env.blocking)).unwrap();
    }
    if !env.nonblocking.is_empty() {
        writeln!(out, "nonblocking {{ {} }}", actions(&env.nonblocking)).unwrap();
    }
    if !spec.overflow.is_empty() {
        writeln!(out, "overflow {{ {} }}", actions(&spec.overflow)).unwrap();
    }
    if !spec.mutex.is_empty() {
        let roles = spec.mutex.iter().map(|r| format!("{} -> {}", r.noncrit, r.crit)).collect();
        writeln!(out, "mutex {{ {} }}", list(roles)).unwrap();
    }
    for eq in env.equations() {
        writeln!(out, "{} = {};", eq.head(), print_term(&eq.body)).unwrap();
    }
    writeln!(out, "system = {};", print_term(&spec.root)).unwrap();
    out
}
