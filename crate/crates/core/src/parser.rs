//! Reader for `.ccss` specification files.
//!
//! ```text
//! # comment
//! signals { noti_x_true, noti_x_false }
//! blocking { noncritA }
//! nonblocking { critA }
//! range V = 0..4
//! mutex { noncritA -> critA }
//! X[i]_v = sum k in V when k != v . assign_x[i]_k . X[i]_k
//! system = (A | X[1]_0) \ {assign_x}
//! ```
//!
//! Operator binding, strongest first: restriction, relabelling and signalling
//! (postfix); prefixing; parallel composition; choice. `'a` is the co-name
//! of `a`. Whether a name is a signal is decided by the `signals` block, so
//! `s.P` reads signal `s` when `s` is declared and is a handshake otherwise.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::error::ParseError;
use crate::protocols::MutexRole;
use crate::term::{Action, CmpOp, Domain, Environment, Equation, Expr, Guard, Name, Pattern, Relabelling, Term, Value};

/// A parsed specification file.
#[derive(Clone, Debug)]
pub struct SpecFile {
    pub env: Environment,
    pub root: Arc<Term>,
    /// `noncrit -> crit` pairs naming the processes of a mutual-exclusion
    /// model; empty for other systems.
    pub mutex: Vec<MutexRole>,
    /// Actions that mark leaving the finite model (ticket overflow).
    pub overflow: BTreeSet<Action>,
}

const KEYWORDS: &[&str] =
    &["signals", "blocking", "nonblocking", "range", "mutex", "overflow", "system", "sum", "in", "when", "tau"];

pub fn parse(text: &str) -> Result<SpecFile, ParseError> {
    let mut p = Parser::new(text);
    p.file()
}

pub fn parse_bytes(bytes: &[u8]) -> Result<SpecFile, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ParseError::Syntax {
        line: 1,
        column: 1,
        message: format!("input is not UTF-8: {e}"),
    })?;
    parse(text)
}

/// Parses a single process expression. Names are classified against
/// `signals` (base names).
pub fn parse_term(text: &str, signals: &BTreeSet<Arc<str>>) -> Result<Arc<Term>, ParseError> {
    let mut p = Parser::new(text);
    p.scope_checks = false;
    let t = p.proc()?;
    p.ws();
    if !p.at_end() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(classify_term(&t, signals))
}

/// Parses a bare name such as `noti_number[2]_0`.
pub fn parse_name(text: &str) -> Result<Name, ParseError> {
    let mut p = Parser::new(text);
    p.scope_checks = false;
    let n = p.name()?;
    if !p.at_end() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(n)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    scope: Vec<Arc<str>>,
    scope_checks: bool,
    range_uses: Vec<(Arc<str>, usize)>,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { src, pos: 0, scope: Vec::new(), scope_checks: true, range_uses: Vec::new() }
    }

    fn line_col(&self, pos: usize) -> (usize, usize) {
        let before = &self.src[..pos.min(self.src.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
        (line, column)
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        let (line, column) = self.line_col(self.pos);
        ParseError::Syntax { line, column, message: message.into() }
    }

    fn scope_err(&self, at: usize, message: impl Into<String>) -> ParseError {
        let (line, column) = self.line_col(at);
        ParseError::Scope { line, column, message: message.into() }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    /// Skips whitespace and `#` comments.
    fn ws(&mut self) {
        loop {
            let r = self.rest();
            let trimmed = r.trim_start();
            self.pos += r.len() - trimmed.len();
            if trimmed.starts_with('#') {
                self.pos += trimmed.find('\n').unwrap_or(trimmed.len());
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> PResult<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected `{tok}`")))
        }
    }

    /// Consumes `kw` only if it is a whole word.
    fn eat_keyword(&mut self, kw: &str) -> bool {
        self.ws();
        let r = self.rest();
        if r.starts_with(kw) && !r[kw.len()..].starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_') {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    fn peek_keyword(&mut self, kw: &str) -> bool {
        let save = self.pos;
        let hit = self.eat_keyword(kw);
        self.pos = save;
        hit
    }

    /// `[A-Za-z][A-Za-z0-9_]*`, without skipping whitespace first.
    fn raw_ident(&mut self, underscores: bool) -> Option<&'a str> {
        let r = self.rest();
        let mut chars = r.char_indices();
        match chars.next() {
            Some((_, c)) if c.is_ascii_alphabetic() => {}
            _ => return None,
        }
        let end =
            chars.find(|&(_, c)| !(c.is_ascii_alphanumeric() || (underscores && c == '_'))).map_or(r.len(), |(i, _)| i);
        self.pos += end;
        Some(&r[..end])
    }

    fn ident(&mut self) -> PResult<&'a str> {
        self.ws();
        self.raw_ident(true).ok_or_else(|| self.syntax("expected identifier"))
    }

    fn int(&mut self) -> Option<i64> {
        let r = self.rest();
        let end = r.find(|c: char| !c.is_ascii_digit()).unwrap_or(r.len());
        if end == 0 {
            return None;
        }
        self.pos += end;
        r[..end].parse().ok()
    }

    fn file(&mut self) -> PResult<SpecFile> {
        let mut env = Environment::new();
        let mut root = None;
        let mut mutex_raw = Vec::new();
        let mut blocking_raw = Vec::new();
        let mut nonblocking_raw = Vec::new();
        let mut overflow_raw = Vec::new();
        loop {
            self.ws();
            if self.at_end() {
                break;
            }
            if self.eat_keyword("signals") {
                self.expect("{")?;
                for n in self.list(|p| p.ident().map(str::to_owned))? {
                    env.declare_signal(&n);
                }
            } else if self.eat_keyword("blocking") {
                self.expect("{")?;
                blocking_raw.extend(self.list(Parser::action)?);
            } else if self.eat_keyword("nonblocking") {
                self.expect("{")?;
                nonblocking_raw.extend(self.list(Parser::action)?);
            } else if self.eat_keyword("overflow") {
                self.expect("{")?;
                overflow_raw.extend(self.list(Parser::action)?);
            } else if self.eat_keyword("mutex") {
                self.expect("{")?;
                mutex_raw.extend(self.list(|p| {
                    let noncrit = p.action()?;
                    p.expect("->")?;
                    Ok((noncrit, p.action()?))
                })?);
            } else if self.eat_keyword("range") {
                let name = self.ident()?;
                self.expect("=")?;
                self.ws();
                let lo = self.int().ok_or_else(|| self.syntax("expected integer"))?;
                self.expect("..")?;
                self.ws();
                let hi = self.int().ok_or_else(|| self.syntax("expected integer"))?;
                env.ranges.insert(name.into(), (lo, hi));
            } else if self.eat_keyword("system") {
                self.expect("=")?;
                if root.is_some() {
                    return Err(self.syntax("more than one `system` definition"));
                }
                root = Some(self.proc()?);
            } else {
                env.define(self.equation()?);
            }
            self.eat(";");
        }
        for (r, at) in std::mem::take(&mut self.range_uses) {
            if !env.ranges.contains_key(&r) {
                return Err(self.scope_err(at, format!("unknown range `{r}`")));
            }
        }
        let root = root.ok_or_else(|| self.syntax("missing `system = ...`"))?;
        let signals = env.signals.clone();
        let classify = |a: Action| classify_action(&a, &signals);
        env.blocking = blocking_raw.into_iter().map(classify).collect();
        env.nonblocking = nonblocking_raw.into_iter().map(classify).collect();
        let eqs: Vec<Equation> =
            env.equations().iter().map(|e| Equation { body: classify_term(&e.body, &signals), ..e.clone() }).collect();
        let mut out = Environment::new();
        out.signals = env.signals.clone();
        out.blocking = env.blocking.clone();
        out.nonblocking = env.nonblocking.clone();
        out.ranges = env.ranges.clone();
        for e in eqs {
            out.define(e);
        }
        Ok(SpecFile {
            root: classify_term(&root, &signals),
            env: out,
            mutex: mutex_raw.into_iter().map(|(n, c)| MutexRole { noncrit: classify(n), crit: classify(c) }).collect(),
            overflow: overflow_raw.into_iter().map(classify).collect(),
        })
    }

    /// Comma-separated items up to `}`; the `{` is already consumed.
    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        let mut out = Vec::new();
        if self.eat("}") {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat("}") {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    fn equation(&mut self) -> PResult<Equation> {
        self.ws();
        let start = self.pos;
        let checks = std::mem::replace(&mut self.scope_checks, false);
        let head = self.name();
        self.scope_checks = checks;
        let head = head?;
        if KEYWORDS.contains(&&*head.base) {
            self.pos = start;
            return Err(self.syntax(format!("`{}` is reserved", head.base)));
        }
        let params = head
            .params
            .iter()
            .map(|p| match p {
                Expr::Var(v) => Ok(Pattern::Var(v.clone())),
                Expr::Val(v) => Ok(Pattern::Val(v.clone())),
                _ => Err(self.syntax("equation parameters must be variables or literals")),
            })
            .collect::<PResult<Vec<_>>>()?;
        self.expect("=")?;
        let saved = std::mem::take(&mut self.scope);
        self.scope = params
            .iter()
            .filter_map(|p| match p {
                Pattern::Var(v) => Some(v.clone()),
                Pattern::Val(_) => None,
            })
            .collect();
        let body = self.proc();
        self.scope = saved;
        Ok(Equation { base: head.base, params, body: body? })
    }

    /// `co-name | tau | name`
    fn action(&mut self) -> PResult<Action> {
        if self.eat("'") {
            return Ok(Action::CoName(self.name()?));
        }
        if self.eat_keyword("tau") {
            return Ok(Action::Tau);
        }
        Ok(Action::Name(self.name()?))
    }

    pub(crate) fn name(&mut self) -> PResult<Name> {
        self.ws();
        let base = self.raw_ident(true).ok_or_else(|| self.syntax("expected name"))?;
        let mut params = Vec::new();
        if self.rest().starts_with('[') {
            let save = self.pos;
            self.pos += 1;
            // Scope is checked only once we know this is a parameter list and
            // not a relabelling such as `[b/a]`.
            let checks = std::mem::replace(&mut self.scope_checks, false);
            let first = self.expr();
            self.scope_checks = checks;
            match first {
                Ok(e) if self.eat("]") => {
                    self.check_scope(&e, save + 1)?;
                    params.push(e);
                    while self.rest().starts_with('_') {
                        self.pos += 1;
                        params.push(self.param_atom()?);
                    }
                }
                _ => self.pos = save,
            }
        }
        Ok(Name { base: base.into(), params })
    }

    fn check_scope(&self, e: &Expr, at: usize) -> PResult<()> {
        if !self.scope_checks {
            return Ok(());
        }
        match e.free_vars().into_iter().find(|v| !self.scope.iter().any(|s| **s == **v)) {
            Some(v) => Err(self.scope_err(at, format!("unbound variable `{v}`"))),
            None => Ok(()),
        }
    }

    /// Parameter following `_`: literal, variable, or parenthesised expression.
    fn param_atom(&mut self) -> PResult<Expr> {
        if self.rest().starts_with('(') {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(")")?;
            return Ok(e);
        }
        self.atom_expr(false)
    }

    fn atom_expr(&mut self, skip_ws: bool) -> PResult<Expr> {
        if skip_ws {
            self.ws();
        }
        let at = self.pos;
        if let Some(n) = self.int() {
            return Ok(Expr::int(n));
        }
        if self.rest().starts_with('(') {
            self.pos += 1;
            let e = self.expr()?;
            self.expect(")")?;
            return Ok(e);
        }
        match self.raw_ident(false) {
            Some("true") => Ok(Expr::Val(Value::Bool(true))),
            Some("false") => Ok(Expr::Val(Value::Bool(false))),
            Some(v) => {
                if self.scope_checks && !self.scope.iter().any(|s| &**s == v) {
                    return Err(self.scope_err(at, format!("unbound variable `{v}`")));
                }
                Ok(Expr::Var(v.into()))
            }
            None => Err(self.syntax("expected parameter expression")),
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut e = self.atom_expr(true)?;
        loop {
            self.ws();
            if self.rest().starts_with('+') {
                self.pos += 1;
                e = Expr::Add(Box::new(e), Box::new(self.atom_expr(true)?));
            } else if self.rest().starts_with('-') && !self.rest().starts_with("->") {
                self.pos += 1;
                e = Expr::Sub(Box::new(e), Box::new(self.atom_expr(true)?));
            } else {
                return Ok(e);
            }
        }
    }

    fn guard(&mut self) -> PResult<Guard> {
        let mut g = self.guard_and()?;
        while self.eat("||") {
            g = g.or(self.guard_and()?);
        }
        Ok(g)
    }

    fn guard_and(&mut self) -> PResult<Guard> {
        let mut g = self.guard_not()?;
        while self.eat("&&") {
            g = g.and(self.guard_not()?);
        }
        Ok(g)
    }

    fn guard_not(&mut self) -> PResult<Guard> {
        self.ws();
        if self.rest().starts_with('!') && !self.rest().starts_with("!=") {
            self.pos += 1;
            return Ok(Guard::Not(Box::new(self.guard_not()?)));
        }
        if self.rest().starts_with('(') {
            let save = self.pos;
            self.pos += 1;
            if let Ok(g) = self.guard() {
                if self.eat(")") {
                    return Ok(g);
                }
            }
            self.pos = save;
        }
        let save = self.pos;
        match self.comparison() {
            Ok(g) => Ok(g),
            Err(e) => {
                self.pos = save;
                if self.eat_keyword("true") {
                    Ok(Guard::True)
                } else {
                    Err(e)
                }
            }
        }
    }

    fn comparison(&mut self) -> PResult<Guard> {
        let a = self.expr()?;
        self.ws();
        let op = [
            ("==", CmpOp::Eq),
            ("!=", CmpOp::Ne),
            ("<=", CmpOp::Le),
            (">=", CmpOp::Ge),
            ("<", CmpOp::Lt),
            (">", CmpOp::Gt),
        ]
        .into_iter()
        .find(|(tok, _)| self.rest().starts_with(tok));
        let (tok, op) = op.ok_or_else(|| self.syntax("expected comparison operator"))?;
        self.pos += tok.len();
        Ok(Guard::Cmp(op, a, self.expr()?))
    }

    /// `summand ("+" summand)*`
    fn proc(&mut self) -> PResult<Arc<Term>> {
        let mut branches = vec![self.summand()?];
        while self.eat("+") {
            branches.push(self.summand()?);
        }
        Ok(Term::sum(branches))
    }

    fn summand(&mut self) -> PResult<Arc<Term>> {
        if !self.eat_keyword("sum") {
            return self.par();
        }
        let var: Arc<str> = self.ident()?.into();
        if !self.eat_keyword("in") {
            return Err(self.syntax("expected `in`"));
        }
        self.ws();
        let at = self.pos;
        let save = self.pos;
        let named = self.raw_ident(true).filter(|_| {
            self.ws();
            !self.rest().starts_with("..")
        });
        let domain = match named {
            Some(r) => {
                self.range_uses.push((r.into(), at));
                Domain::Named(r.into())
            }
            None => {
                self.pos = save;
                let lo = self.expr()?;
                self.expect("..")?;
                Domain::Span(lo, self.expr()?)
            }
        };
        self.scope.push(var.clone());
        let guard = if self.eat_keyword("when") { self.guard() } else { Ok(Guard::True) };
        let guard = guard.and_then(|g| {
            self.expect(".")?;
            Ok(g)
        });
        let body = guard.and_then(|g| Ok((g, self.par()?)));
        self.scope.pop();
        let (guard, body) = body?;
        Ok(Term::indexed_sum(&var, domain, guard, body))
    }

    /// `prefixed ("|" prefixed)*`, left-nested.
    fn par(&mut self) -> PResult<Arc<Term>> {
        let mut t = self.prefixed()?;
        loop {
            self.ws();
            if self.rest().starts_with("||") || !self.rest().starts_with('|') {
                return Ok(t);
            }
            self.pos += 1;
            t = Term::par(t, self.prefixed()?);
        }
    }

    fn prefixed(&mut self) -> PResult<Arc<Term>> {
        let mut actions = Vec::new();
        let atom = loop {
            self.ws();
            match self.peek() {
                Some('\'') => {
                    self.pos += 1;
                    actions.push(Action::CoName(self.name()?));
                    self.expect_dot()?;
                }
                Some('0') => {
                    self.pos += 1;
                    break Term::nil();
                }
                Some('(') => {
                    self.pos += 1;
                    let t = self.proc()?;
                    self.expect(")")?;
                    break t;
                }
                Some(c) if c.is_ascii_alphabetic() => {
                    if self.eat_keyword("tau") {
                        actions.push(Action::Tau);
                        self.expect_dot()?;
                        continue;
                    }
                    if self.peek_keyword("sum") {
                        return Err(self.syntax("indexed sum must be parenthesised here"));
                    }
                    let n = self.name()?;
                    if self.is_dot() {
                        self.pos += 1;
                        actions.push(Action::Name(n));
                    } else {
                        break Term::ident(n);
                    }
                }
                _ => return Err(self.syntax("expected process")),
            }
        };
        let body = self.postfix(atom)?;
        Ok(actions.into_iter().rev().fold(body, |b, a| Term::prefix(a, b)))
    }

    fn is_dot(&mut self) -> bool {
        self.ws();
        self.rest().starts_with('.') && !self.rest().starts_with("..")
    }

    fn expect_dot(&mut self) -> PResult<()> {
        if self.is_dot() {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax("expected `.` after action"))
        }
    }

    fn postfix(&mut self, mut t: Arc<Term>) -> PResult<Arc<Term>> {
        loop {
            self.ws();
            let r = self.rest();
            if r.starts_with('\\') {
                self.pos += 1;
                self.expect("{")?;
                let names = self.list(Parser::name)?;
                t = Term::restrict(t, names);
            } else if r.starts_with('[') {
                self.pos += 1;
                let pairs = self.relabel_list()?;
                let mut f = Relabelling::default();
                for (new, old) in pairs {
                    f.handshake.insert(old, new);
                }
                t = Term::relabel(t, f);
            } else if r.starts_with('^') {
                self.pos += 1;
                t = Term::signal(t, self.name()?);
            } else {
                return Ok(t);
            }
        }
    }

    fn relabel_list(&mut self) -> PResult<Vec<(Name, Name)>> {
        let mut out = Vec::new();
        if self.eat("]") {
            return Ok(out);
        }
        loop {
            let new = self.name()?;
            self.expect("/")?;
            let old = self.name()?;
            out.push((new, old));
            if self.eat("]") {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }
}

fn classify_action(a: &Action, signals: &BTreeSet<Arc<str>>) -> Action {
    match a {
        Action::Name(n) if signals.contains(&n.base) => Action::Signal(n.clone()),
        _ => a.clone(),
    }
}

/// Turns handshake prefixes on declared signal names into signal reads and
/// moves relabelling entries for signals into the signal map.
pub(crate) fn classify_term(t: &Arc<Term>, signals: &BTreeSet<Arc<str>>) -> Arc<Term> {
    match &**t {
        Term::Nil | Term::Ident(_) => t.clone(),
        Term::Prefix(a, b) => Term::prefix(classify_action(a, signals), classify_term(b, signals)),
        Term::Sum(bs) => Arc::new(Term::Sum(bs.iter().map(|b| classify_term(b, signals)).collect())),
        Term::IndexedSum(s) => {
            let mut s = (**s).clone();
            s.body = classify_term(&s.body, signals);
            Arc::new(Term::IndexedSum(Box::new(s)))
        }
        Term::Par(l, r) => Term::par(classify_term(l, signals), classify_term(r, signals)),
        Term::Restrict(b, l) => Arc::new(Term::Restrict(classify_term(b, signals), l.clone())),
        Term::Relabel(b, f) => {
            let mut g = Relabelling::default();
            for (old, new) in f.handshake.iter().chain(f.signal.iter()) {
                let map: &mut BTreeMap<Name, Name> =
                    if signals.contains(&old.base) { &mut g.signal } else { &mut g.handshake };
                map.insert(old.clone(), new.clone());
            }
            Term::relabel(classify_term(b, signals), g)
        }
        Term::Signal(b, s) => Term::signal(classify_term(b, signals), s.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn term(src: &str) -> Arc<Term> {
        parse(&format!("system = {src}")).unwrap().root
    }

    fn n(s: &str) -> Name {
        Name::new(s)
    }

    #[test]
    fn writer_of_the_shared_memory_example() {
        assert_eq!(term("'assign_x_false.0"), Term::prefix(Action::CoName(n("assign_x_false")), Term::nil()));
    }

    #[test]
    fn nil() {
        assert_eq!(term("0"), Term::nil());
    }

    #[test]
    fn signalling_under_restriction() {
        let spec = parse("signals { s }\nsystem = (0 ^ s | s.0) \\ {s}").unwrap();
        let expect = Term::restrict(
            Term::par(Term::signal(Term::nil(), n("s")), Term::prefix(Action::Signal(n("s")), Term::nil())),
            [n("s")],
        );
        assert_eq!(spec.root, expect);
    }

    #[test]
    fn precedence_of_prefix_par_and_choice() {
        let a = |s: &str| Action::Name(n(s));
        let expect = Term::sum(vec![
            Term::par(Term::prefix(a("a"), Term::ident(n("P"))), Term::ident(n("Q"))),
            Term::ident(n("R")),
        ]);
        assert_eq!(term("a.P|Q + R"), expect);
    }

    #[test]
    fn postfix_binds_tighter_than_prefix() {
        let t = term("a.P \\ {a}");
        assert!(matches!(&*t, Term::Prefix(_, b) if matches!(**b, Term::Restrict(..))));
    }

    #[test]
    fn indexed_names_and_relabelling_disambiguate() {
        let t = term("doorway[1]_0_1 [b/a]");
        match &*t {
            Term::Relabel(b, f) => {
                assert_eq!(**b, Term::Ident(Name::indexed("doorway", [1, 0, 1])));
                assert_eq!(f.handshake.get(&n("a")), Some(&n("b")));
            }
            other => panic!("{other:?}"),
        }
        // No whitespace before the relabelling also works.
        assert!(matches!(&*term("A[b/a]"), Term::Relabel(..)));
    }

    #[test]
    fn parameterised_equations_and_indexed_sums() {
        let spec = parse(
            "range V = 0..3\n\
             D[i]_m = sum k in V when k > m || (k == m && i >= 1) . r[i]_k.D[i]_k\n\
             system = D[1]_2",
        )
        .unwrap();
        let body = spec.env.resolve(&Name::indexed("D", [1, 2])).unwrap();
        match &*body {
            Term::Sum(bs) => assert_eq!(bs.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        match parse("system = a.\n  | b") {
            Err(ParseError::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scope_errors() {
        assert!(matches!(parse("X[i] = a[j].0\nsystem = X[1]"), Err(ParseError::Scope { .. })));
        assert!(matches!(parse("system = sum k in W . a[k].0"), Err(ParseError::Scope { .. })));
    }

    #[test]
    fn comments_and_declarations() {
        let spec = parse(
            "# header\nsignals { s }\nblocking { noncritA }\nnonblocking { critA }\n\
             mutex { noncritA -> critA }\noverflow { over }\nsystem = noncritA.critA.0 ^ s # trailing\n",
        )
        .unwrap();
        assert!(spec.env.blocking.contains(&Action::Name(n("noncritA"))));
        assert_eq!(spec.mutex.len(), 1);
        assert_eq!(spec.overflow.len(), 1);
    }

    #[test]
    fn missing_system_is_an_error() {
        assert!(parse("A = 0").is_err());
    }
}
