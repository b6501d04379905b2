//! Generators for the shared-memory examples and mutual-exclusion protocols.
//!
//! Every generator writes its model as `.ccss` text and parses it back, so
//! a generated model and its file rendering are the same thing.

use std::collections::BTreeSet;
use std::fmt::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::parser::{parse, SpecFile};
use crate::print::print_spec;
use crate::term::{Action, Environment, Name, Term};

/// Largest process count accepted by the N-process generators.
pub const MAX_PROCESSES: usize = 4;

/// A process of a mutual-exclusion model, identified by the action that
/// leaves its non-critical section and its critical-section action.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MutexRole {
    pub noncrit: Action,
    pub crit: Action,
}

/// How shared variables let readers see their value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// The variable offers a complementary handshake for each read.
    Ccs,
    /// The variable emits its value as a signal.
    Ccss,
}

impl std::str::FromStr for Flavor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ccs" => Ok(Flavor::Ccs),
            "ccss" => Ok(Flavor::Ccss),
            other => Err(format!("unknown flavor `{other}` (expected ccs or ccss)")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Meta {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flavor: Option<Flavor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ticket_bound: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct ProtocolModel {
    pub env: Environment,
    pub root: Arc<Term>,
    pub roles: Vec<MutexRole>,
    /// Actions leading out of the finite model; searches prune them.
    pub overflow: BTreeSet<Action>,
    pub meta: Meta,
}

impl ProtocolModel {
    pub fn from_spec(spec: SpecFile, meta: Meta) -> Self {
        ProtocolModel { env: spec.env, root: spec.root, roles: spec.mutex, overflow: spec.overflow, meta }
    }

    fn generated(text: &str, meta: Meta) -> Self {
        let spec = parse(text).unwrap_or_else(|e| panic!("generated model does not parse: {e}\n{text}"));
        Self::from_spec(spec, meta)
    }

    pub fn spec(&self) -> SpecFile {
        SpecFile {
            env: self.env.clone(),
            root: self.root.clone(),
            mutex: self.roles.clone(),
            overflow: self.overflow.clone(),
        }
    }

    /// `.ccss` rendering that parses back to this model.
    pub fn to_ccss(&self) -> String {
        let mut header = format!("# {}", self.meta.family);
        if let Some(f) = self.meta.flavor {
            write!(header, ", flavor {}", if f == Flavor::Ccs { "ccs" } else { "ccss" }).unwrap();
        }
        if let Some(n) = self.meta.n {
            write!(header, ", N = {n}").unwrap();
        }
        if let Some(k) = self.meta.ticket_bound {
            write!(header, ", tickets up to {k}").unwrap();
        }
        format!("{header}\n{}", print_spec(&self.spec()))
    }
}

fn meta(family: &str, flavor: Option<Flavor>, n: Option<usize>, k: Option<usize>) -> Meta {
    Meta { family: family.into(), flavor, n, ticket_bound: k }
}

/// Boolean variable `x` as two agents `{agent}_true` and `{agent}_false`.
fn bool_variable(out: &mut String, agent: &str, var: &str, flavor: Flavor) {
    for v in ["true", "false"] {
        let writes = format!("assign_{var}_true.{agent}_true + assign_{var}_false.{agent}_false");
        match flavor {
            Flavor::Ccs => writeln!(out, "{agent}_{v} = {writes} + 'noti_{var}_{v}.{agent}_{v}").unwrap(),
            Flavor::Ccss => writeln!(out, "{agent}_{v} = ({writes}) ^ noti_{var}_{v}").unwrap(),
        }
    }
}

const EX_L: &str = "{assign_x_true, assign_x_false, noti_x_true, noti_x_false}";

/// One Boolean variable, a reader that keeps reading `true` and a writer
/// that sets the variable to `false` once.
pub fn example1() -> ProtocolModel {
    let mut text = String::new();
    bool_variable(&mut text, "x", "x", Flavor::Ccs);
    text.push_str("R = noti_x_true.R\nW = 'assign_x_false.0\n");
    writeln!(text, "system = (x_true | R | W) \\ {EX_L}").unwrap();
    ProtocolModel::generated(&text, meta("example1", Some(Flavor::Ccs), None, None))
}

/// [`example1`] with the variable emitting its value as a signal.
pub fn example2() -> ProtocolModel {
    let mut text = String::from("signals { noti_x_true, noti_x_false }\n");
    bool_variable(&mut text, "x", "x", Flavor::Ccss);
    text.push_str("R = noti_x_true.R\nW = 'assign_x_false.0\n");
    writeln!(text, "system = (x_true | R | W) \\ {EX_L}").unwrap();
    ProtocolModel::generated(&text, meta("example2", Some(Flavor::Ccss), None, None))
}

fn declarations(out: &mut String, signals: &[String], flavor: Flavor, roles: &[(String, String)]) {
    if flavor == Flavor::Ccss {
        writeln!(out, "signals {{ {} }}", signals.join(", ")).unwrap();
    }
    let noncrit: Vec<&str> = roles.iter().map(|r| r.0.as_str()).collect();
    let crit: Vec<&str> = roles.iter().map(|r| r.1.as_str()).collect();
    writeln!(out, "blocking {{ {} }}", noncrit.join(", ")).unwrap();
    writeln!(out, "nonblocking {{ {} }}", crit.join(", ")).unwrap();
    let pairs: Vec<String> = roles.iter().map(|(n, c)| format!("{n} -> {c}")).collect();
    writeln!(out, "mutex {{ {} }}", pairs.join(", ")).unwrap();
}

/// Peterson's protocol for two processes `A` and `B`.
pub fn peterson2(flavor: Flavor) -> ProtocolModel {
    let mut text = String::new();
    let mut names = Vec::new();
    for (var, vals) in [("readyA", ["true", "false"]), ("readyB", ["true", "false"]), ("turn", ["A", "B"])] {
        for v in vals {
            names.push(format!("assign_{var}_{v}"));
        }
    }
    let signals: Vec<String> = names.iter().map(|n| n.replacen("assign", "noti", 1)).collect();
    let roles = [("noncritA".to_string(), "critA".to_string()), ("noncritB".into(), "critB".into())];
    declarations(&mut text, &signals, flavor, &roles);
    for (me, other) in [("A", "B"), ("B", "A")] {
        let tail = format!("crit{me}.'assign_ready{me}_false.{me}");
        writeln!(
            text,
            "{me} = noncrit{me}.'assign_ready{me}_true.'assign_turn_{other}.\
             (noti_ready{other}_false.{tail} + noti_turn_{me}.{tail})"
        )
        .unwrap();
    }
    bool_variable(&mut text, "ReadyA", "readyA", flavor);
    bool_variable(&mut text, "ReadyB", "readyB", flavor);
    for v in ["A", "B"] {
        let writes = "assign_turn_A.Turn_A + assign_turn_B.Turn_B";
        match flavor {
            Flavor::Ccs => writeln!(text, "Turn_{v} = {writes} + 'noti_turn_{v}.Turn_{v}").unwrap(),
            Flavor::Ccss => writeln!(text, "Turn_{v} = ({writes}) ^ noti_turn_{v}").unwrap(),
        }
    }
    let all: Vec<String> = names.iter().chain(&signals).cloned().collect();
    writeln!(text, "system = (A | B | ReadyA_false | ReadyB_false | Turn_A) \\ {{{}}}", all.join(", ")).unwrap();
    ProtocolModel::generated(&text, meta("peterson2", Some(flavor), Some(2), None))
}

fn check_n(n: usize) -> Result<(), ModelError> {
    if !(2..=MAX_PROCESSES).contains(&n) {
        return Err(ModelError::ParameterOutOfRange(format!("N = {n}, expected 2..={MAX_PROCESSES}")));
    }
    Ok(())
}

/// Integer variable `{agent}_v` over range `range`, read as `noti_{var}_v`.
fn int_variable(out: &mut String, agent: &str, var: &str, range: &str, flavor: Flavor) {
    let writes = format!("sum w in {range} . assign_{var}_w.{agent}_w");
    match flavor {
        Flavor::Ccs => writeln!(out, "{agent}_v = {writes} + 'noti_{var}_v.{agent}_v").unwrap(),
        Flavor::Ccss => writeln!(out, "{agent}_v = ({writes}) ^ noti_{var}_v").unwrap(),
    }
}

/// Peterson's filter lock for `n` processes numbered `1..=n`.
///
/// Process `i` passes room `j` when it reads `last[j] != i`, or when it has
/// read `room[k] < j` for every other `k`, one variable at a time in index
/// order. The `last[j]` alternative stays available during that scan.
pub fn filter_lock(n: usize, flavor: Flavor) -> Result<ProtocolModel, ModelError> {
    check_n(n)?;
    let mut text = String::new();
    writeln!(text, "range Rooms = 0..{}", n - 1).unwrap();
    writeln!(text, "range Procs = 1..{n}").unwrap();
    let mut names = Vec::new();
    let mut signals = Vec::new();
    for i in 1..=n {
        for w in 0..n {
            names.push(format!("assign_room[{i}]_{w}"));
            signals.push(format!("noti_room[{i}]_{w}"));
        }
    }
    for j in 1..n {
        for v in 1..=n {
            names.push(format!("assign_last[{j}]_{v}"));
            signals.push(format!("noti_last[{j}]_{v}"));
        }
    }
    let roles: Vec<(String, String)> = (1..=n).map(|i| (format!("noncrit[{i}]"), format!("crit[{i}]"))).collect();
    declarations(&mut text, &["noti_room".into(), "noti_last".into()], flavor, &roles);
    int_variable(&mut text, "Room[i]", "room[i]", "Rooms", flavor);
    int_variable(&mut text, "Last[j]", "last[j]", "Procs", flavor);
    text.push_str("P[i] = noncrit[i].Loop[i]_1\n");
    writeln!(text, "Loop[i]_{n} = crit[i].'assign_room[i]_0.P[i]").unwrap();
    text.push_str("Loop[i]_j = 'assign_room[i]_j.'assign_last[j]_i.Await[i]_j\n");
    let escape = |i: usize| format!("sum v in Procs when v != {i} . noti_last[j]_v.Loop[{i}]_(j+1)");
    for i in 1..=n {
        let others: Vec<usize> = (1..=n).filter(|&k| k != i).collect();
        writeln!(text, "Await[{i}]_j = {} + Scan[{i}]_j_{}", escape(i), others[0]).unwrap();
        for (pos, &k) in others.iter().enumerate() {
            let next = match others.get(pos + 1) {
                Some(k2) => format!("Scan[{i}]_j_{k2}"),
                None => format!("Loop[{i}]_(j+1)"),
            };
            let read = format!("sum v in Rooms when v < j . noti_room[{k}]_v.{next}");
            if pos == 0 {
                writeln!(text, "Scan[{i}]_j_{k} = {read}").unwrap();
            } else {
                writeln!(text, "Scan[{i}]_j_{k} = {read} + {}", escape(i)).unwrap();
            }
        }
    }
    let mut parts: Vec<String> = (1..=n).map(|i| format!("P[{i}]")).collect();
    parts.extend((1..=n).map(|i| format!("Room[{i}]_0")));
    parts.extend((1..n).map(|j| format!("Last[{j}]_1")));
    let hidden: Vec<String> = names.iter().chain(&signals).cloned().collect();
    writeln!(text, "system = ({}) \\ {{{}}}", parts.join(" | "), hidden.join(", ")).unwrap();
    Ok(ProtocolModel::generated(&text, meta("filter", Some(flavor), Some(n), None)))
}

/// Lamport's bakery algorithm for `n` processes with ticket numbers
/// truncated to `0..=k`. Taking ticket `k + 1` performs `overflow[i]` and
/// stops the process.
pub fn bakery(n: usize, k: usize) -> Result<ProtocolModel, ModelError> {
    check_n(n)?;
    if k < n {
        return Err(ModelError::ParameterOutOfRange(format!("ticket bound {k} is below N = {n}")));
    }
    let mut text = String::new();
    writeln!(text, "range Tickets = 0..{k}").unwrap();
    let roles: Vec<(String, String)> = (1..=n).map(|i| (format!("noncrit[{i}]"), format!("crit[{i}]"))).collect();
    declarations(&mut text, &["noti_number".into(), "noti_choosing".into()], Flavor::Ccss, &roles);
    let overflow: Vec<String> = (1..=n).map(|i| format!("overflow[{i}]")).collect();
    writeln!(text, "overflow {{ {} }}", overflow.join(", ")).unwrap();
    text.push_str(
        "Number[i]_v = (sum w in Tickets . assign_number[i]_w.Number[i]_w) ^ noti_number[i]_v\n\
         Choosing[i]_v = (assign_choosing[i]_true.Choosing[i]_true + assign_choosing[i]_false.Choosing[i]_false) \
         ^ noti_choosing[i]_v\n\
         P[i] = noncrit[i].'assign_choosing[i]_true.Doorway[i]_0_1\n",
    );
    let exit = n + 1;
    writeln!(text, "Doorway[i]_{k}_{exit} = overflow[i].0").unwrap();
    writeln!(text, "Doorway[i]_m_{exit} = 'assign_number[i]_(m+1).'assign_choosing[i]_false.Bakery[i]_(m+1)_1")
        .unwrap();
    text.push_str(
        "Doorway[i]_m_j = sum v in Tickets when v > m . noti_number[j]_v.Doorway[i]_v_(j+1) \
         + sum v in Tickets when v <= m . noti_number[j]_v.Doorway[i]_m_(j+1)\n",
    );
    writeln!(text, "Bakery[i]_m_{exit} = crit[i].'assign_number[i]_0.P[i]").unwrap();
    text.push_str(
        "Bakery[i]_m_j = noti_choosing[j]_false.(noti_number[j]_0.Bakery[i]_m_(j+1) \
         + sum v in Tickets when v > m || (v == m && j >= i) . noti_number[j]_v.Bakery[i]_m_(j+1))\n",
    );
    let parts: Vec<String> = (1..=n).map(|i| format!("P[{i}] | Choosing[{i}]_false | Number[{i}]_0")).collect();
    let mut hidden = Vec::new();
    for i in 1..=n {
        for v in ["true", "false"] {
            hidden.push(format!("assign_choosing[{i}]_{v}"));
            hidden.push(format!("noti_choosing[{i}]_{v}"));
        }
        for w in 0..=k {
            hidden.push(format!("assign_number[{i}]_{w}"));
            hidden.push(format!("noti_number[{i}]_{w}"));
        }
    }
    text.push_str("nonblocking { ");
    text.push_str(&overflow.join(", "));
    text.push_str(" }\n");
    writeln!(text, "system = ({}) \\ {{{}}}", parts.join(" | "), hidden.join(", ")).unwrap();
    Ok(ProtocolModel::generated(&text, meta("bakery", Some(Flavor::Ccss), Some(n), Some(k))))
}

/// Variable whose writes of the current value are reads of its signal, so
/// a writer is never kept waiting by a reader: `x_v` only accepts the
/// assignment that changes its value, and a writer offers
/// `'assign_x_v.P + noti_x_v.P`.
pub fn dekker_variable() -> ProtocolModel {
    let text = "signals { noti_x_true, noti_x_false }\n\
                x_true = (assign_x_false.x_false) ^ noti_x_true\n\
                x_false = (assign_x_true.x_true) ^ noti_x_false\n\
                W = 'assign_x_true.0 + noti_x_true.0\n\
                system = (x_true | W) \\ {assign_x_true, assign_x_false, noti_x_true, noti_x_false}\n";
    ProtocolModel::generated(text, meta("dekker-variable", Some(Flavor::Ccss), None, None))
}

/// Writer term `'assign_{var}_{value}.cont + noti_{var}_{value}.cont`.
pub fn idempotent_write(var: &str, value: &str, cont: Arc<Term>) -> Arc<Term> {
    let name = |p: &str| Name::new(&format!("{p}_{var}_{value}"));
    Term::sum(vec![
        Term::prefix(Action::CoName(name("assign")), cont.clone()),
        Term::prefix(Action::Signal(name("noti")), cont),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::{explore, Limits};
    use crate::sos::transitions;

    #[test]
    fn every_model_validates_and_round_trips() {
        let mut models =
            vec![example1(), example2(), peterson2(Flavor::Ccs), peterson2(Flavor::Ccss), dekker_variable()];
        for f in [Flavor::Ccs, Flavor::Ccss] {
            models.push(filter_lock(2, f).unwrap());
            models.push(filter_lock(3, f).unwrap());
        }
        models.push(bakery(2, 4).unwrap());
        for m in models {
            let report = m.env.validate(&m.root);
            assert!(report.is_empty(), "{}: {report:?}", m.meta.family);
            let back = parse(&m.to_ccss()).unwrap();
            assert_eq!(back.root, m.root);
            assert_eq!(back.env.equations(), m.env.equations());
        }
    }

    #[test]
    fn peterson_initially_enables_noncrit_only() {
        for f in [Flavor::Ccs, Flavor::Ccss] {
            let m = peterson2(f);
            let labels: BTreeSet<String> =
                transitions(&m.env, &m.root).unwrap().iter().map(|t| t.label.to_string()).collect();
            assert_eq!(labels, ["noncritA".to_string(), "noncritB".to_string()].into());
        }
    }

    #[test]
    fn turn_variable_emits_its_value() {
        let m = peterson2(Flavor::Ccss);
        let s = crate::sos::signals(&m.env, &Term::ident(Name::new("Turn_A"))).unwrap();
        assert_eq!(s, [Name::new("noti_turn_A")].into());
    }

    #[test]
    fn parameter_checks() {
        assert!(filter_lock(1, Flavor::Ccss).is_err());
        assert!(filter_lock(MAX_PROCESSES + 1, Flavor::Ccss).is_err());
        assert!(bakery(3, 2).is_err());
    }

    #[test]
    fn doorway_moves_to_larger_ticket() {
        let m = bakery(2, 4).unwrap();
        let body = m.env.resolve(&Name::indexed("Doorway", [1, 1, 2])).unwrap();
        let ts = transitions(&m.env, &body).unwrap();
        let to_3 = ts.iter().find(|t| t.label.to_string() == "noti_number[2]_3").unwrap();
        assert_eq!(*to_3.target, Term::Ident(Name::indexed("Doorway", [1, 3, 3])));
        let to_0 = ts.iter().find(|t| t.label.to_string() == "noti_number[2]_0").unwrap();
        assert_eq!(*to_0.target, Term::Ident(Name::indexed("Doorway", [1, 1, 3])));
    }

    #[test]
    fn ticket_overflow_is_an_action() {
        let m = bakery(2, 2).unwrap();
        let body = m.env.resolve(&Name::indexed("Doorway", [1, 2, 3])).unwrap();
        let ts = transitions(&m.env, &body).unwrap();
        assert_eq!(ts[0].label, Action::Name(Name::indexed("overflow", [1])));
    }

    #[test]
    fn dekker_writer_reads_current_value() {
        let m = dekker_variable();
        let lts = explore(&m.env, &m.root, Limits::default()).unwrap();
        let from0: Vec<_> = lts.transitions.iter().filter(|t| t.source == 0).collect();
        assert_eq!(from0.len(), 1);
        assert_eq!(from0[0].label, Action::Tau);
        assert!(from0[0].signal_partner.is_some());
        assert_eq!(
            lts.states[from0[0].target].to_string(),
            "(x_true | 0) \\ {assign_x_false, assign_x_true, noti_x_false, noti_x_true}"
        );
    }
}
