use std::collections::BTreeSet;

use bigdecimal::BigDecimal;
use num_traits::ToPrimitive;

use super::document::{
    ActionBinding, ModelDocument, ModuleBinding, NamedDistribution, NetworkSpec, QueryMode, QuerySpec,
};
use super::lexer::{lex, Tok, Token};
use super::{Diagnostic, Span, FORMAT_VERSION};
use crate::distributions::{DelayCdf, Tick};
use crate::model::transform::{flag_name, location_var};
use crate::model::{
    validate_prtesm, ClockInterval, Direction, EsmTransition, GuardStyle, ParameterEvent, Prtesm, PrtesmIssue,
    StateExpr, Trigger,
};
use crate::prob::{Prob, ProbError};
use crate::sim::{Micros, ScenarioConfig};

const TOP_LEVEL: [&str; 6] = ["prtspace", "distribution", "prtesm", "network", "query", "scenario"];
const MAX_DEPTH: usize = 64;
const MAX_DIAGNOSTICS: usize = 100;

type PResult<T> = Result<T, ()>;

#[derive(Debug, Clone)]
struct Name {
    text: String,
    span: Span,
}

struct RawDist {
    name: Name,
    points: Vec<(Tick, Prob)>,
    span: Span,
}

struct RawTransition {
    src: Name,
    dst: Name,
    event: Option<ParameterEvent>,
    guard: Option<ClockInterval>,
    resets: Vec<Name>,
    delay: Option<Name>,
    span: Span,
}

struct RawMachine {
    name: Name,
    clocks: Vec<Name>,
    states: Vec<Name>,
    transitions: Vec<RawTransition>,
}

struct RawExpr {
    expr: StateExpr,
    names: Vec<(Name, bool)>,
}

struct RawAction {
    pin: Name,
    delay: Option<Name>,
    label: Option<Name>,
}

struct RawModule {
    machine: Name,
    id: Name,
    after: Vec<Name>,
    done: Option<Name>,
    actions: Vec<RawAction>,
}

struct RawNetwork {
    name: Option<Name>,
    timing: Option<GuardStyle>,
    modules: Vec<RawModule>,
    target: Option<RawExpr>,
    span: Span,
}

struct RawQuery {
    name: Name,
    target: Option<RawExpr>,
    bound: Option<Tick>,
    mode: Option<QueryMode>,
    reference: Option<Prob>,
}

enum Value {
    Number { text: String, unit: Option<String>, span: Span },
    Word(Name),
}

struct RawScenario {
    entries: Vec<(Name, Vec<Value>)>,
    span: Span,
}

#[derive(Default)]
struct Raw {
    dists: Vec<RawDist>,
    machines: Vec<RawMachine>,
    networks: Vec<RawNetwork>,
    queries: Vec<RawQuery>,
    scenarios: Vec<RawScenario>,
}

/// Lexes, parses and resolves `text`. The document is returned only when no
/// error was found; warnings may accompany it.
pub fn parse(text: &str) -> (Option<ModelDocument>, Vec<Diagnostic>) {
    let (toks, mut diags) = lex(text);
    let mut p = Parser { toks, pos: 0, diags: Vec::new(), depth: 0 };
    let raw = p.document();
    diags.append(&mut p.diags);
    if diags.iter().any(Diagnostic::is_error) {
        diags.truncate(MAX_DIAGNOSTICS);
        return (None, diags);
    }
    let (doc, mut more) = resolve(raw);
    diags.append(&mut more);
    diags.truncate(MAX_DIAGNOSTICS);
    if diags.iter().any(Diagnostic::is_error) {
        (None, diags)
    } else {
        (Some(doc), diags)
    }
}

/// Parses a standalone target expression such as `flag_c2 & s_c3 = 1`.
pub fn parse_expr(text: &str) -> Result<StateExpr, Vec<Diagnostic>> {
    let (toks, mut diags) = lex(text);
    if diags.iter().any(Diagnostic::is_error) {
        return Err(diags);
    }
    let mut p = Parser { toks, pos: 0, diags: Vec::new(), depth: 0 };
    let r = p.expr_top().and_then(|e| p.expect(Tok::Eof).map(|_| e));
    diags.append(&mut p.diags);
    match r {
        Ok(e) if diags.is_empty() => Ok(e.expr),
        _ => Err(diags),
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at(&self, tok: &Tok) -> bool {
        &self.peek().tok == tok
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.at(tok) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error<T>(&mut self, message: impl Into<String>, span: Span) -> PResult<T> {
        self.diags.push(Diagnostic::error(message, span));
        Err(())
    }

    fn unexpected<T>(&mut self, what: &str) -> PResult<T> {
        let t = self.peek().clone();
        self.error(format!("expected {what}, found {}", t.tok.describe()), t.span)
    }

    fn expect(&mut self, tok: Tok) -> PResult<Span> {
        if self.at(&tok) {
            Ok(self.bump().span)
        } else {
            self.unexpected(&tok.describe())
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        if self.at_kw(kw) {
            Ok(self.bump().span)
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn name(&mut self, what: &str) -> PResult<Name> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let text = s.clone();
                let span = self.bump().span;
                Ok(Name { text, span })
            }
            _ => self.unexpected(what),
        }
    }

    fn names(&mut self, what: &str) -> PResult<Vec<Name>> {
        let mut out = vec![self.name(what)?];
        while self.eat(&Tok::Comma) {
            out.push(self.name(what)?);
        }
        Ok(out)
    }

    fn number(&mut self, what: &str) -> PResult<(String, Span)> {
        match &self.peek().tok {
            Tok::Number(s) => {
                let text = s.clone();
                Ok((text, self.bump().span))
            }
            _ => self.unexpected(what),
        }
    }

    /// A unit word written directly after a number.
    fn glued_unit(&mut self) -> Option<String> {
        match &self.peek().tok {
            Tok::Ident(u) if self.peek().glued => {
                let u = u.clone();
                self.bump();
                Some(u)
            }
            _ => None,
        }
    }

    /// Integer ticks, or a duration in `s`, `ms` or `us` that is a whole
    /// number of ticks.
    fn time(&mut self) -> PResult<Tick> {
        let (text, span) = self.number("a time")?;
        let unit = self.glued_unit();
        match to_ticks(&text, unit.as_deref()) {
            Ok(t) => Ok(t),
            Err(m) => self.error(m, span),
        }
    }

    fn prob(&mut self) -> PResult<Prob> {
        let (text, span) = self.number("a probability")?;
        let percent = self.peek().glued && self.at(&Tok::Percent);
        if percent {
            self.bump();
        }
        let r = if percent { Prob::parse_percent(&text) } else { Prob::parse(&text) };
        match r {
            Ok(p) => Ok(p),
            Err(ProbError::OutOfRange(_)) => self.error(format!("probability `{text}` is outside [0, 1]"), span),
            Err(ProbError::Syntax(_)) => self.error(format!("`{text}` is not a probability"), span),
        }
    }

    fn bail(&self) -> bool {
        self.diags.len() >= MAX_DIAGNOSTICS
    }

    /// Skips past the next `;`, or up to a `}` closing the current block.
    fn recover_member(&mut self) {
        let mut depth = 0usize;
        loop {
            match self.peek().tok {
                Tok::Eof => return,
                Tok::Semi if depth == 0 => {
                    self.bump();
                    return;
                }
                Tok::RBrace if depth == 0 => return,
                Tok::LBrace => depth += 1,
                Tok::RBrace => depth -= 1,
                _ => {}
            }
            self.bump();
        }
    }

    fn recover_top(&mut self) {
        let mut depth = 0usize;
        loop {
            match &self.peek().tok {
                Tok::Eof => return,
                Tok::Ident(s) if depth == 0 && TOP_LEVEL.contains(&s.as_str()) => return,
                Tok::LBrace => depth += 1,
                Tok::RBrace => depth = depth.saturating_sub(1),
                _ => {}
            }
            self.bump();
        }
    }

    /// `{ member* }` where `member` parses one entry up to its terminator.
    fn block(&mut self, mut member: impl FnMut(&mut Self) -> PResult<()>) -> PResult<()> {
        self.expect(Tok::LBrace)?;
        loop {
            if self.bail() {
                return Err(());
            }
            if self.eat(&Tok::RBrace) {
                return Ok(());
            }
            if self.at(&Tok::Eof) {
                let span = self.peek().span;
                return self.error("unclosed block, expected `}`", span);
            }
            let before = self.pos;
            if member(self).is_err() {
                self.recover_member();
                if self.pos == before && !self.at(&Tok::RBrace) {
                    self.bump();
                }
            }
        }
    }

    fn document(&mut self) -> Raw {
        let mut raw = Raw::default();
        let mut decls = 0;
        if self.at_kw("prtspace") {
            let _ = self.header();
        }
        loop {
            if self.bail() {
                break;
            }
            let t = self.peek().clone();
            let ok = match &t.tok {
                Tok::Eof => break,
                Tok::Ident(k) if k == "distribution" => self.distribution().map(|d| raw.dists.push(d)),
                Tok::Ident(k) if k == "prtesm" => self.machine().map(|m| raw.machines.push(m)),
                Tok::Ident(k) if k == "network" => self.network().map(|n| raw.networks.push(n)),
                Tok::Ident(k) if k == "query" => self.query().map(|q| raw.queries.push(q)),
                Tok::Ident(k) if k == "scenario" => self.scenario().map(|s| raw.scenarios.push(s)),
                Tok::Ident(k) if k == "prtspace" => self.error("the format header must come first", t.span),
                _ => self.unexpected("top-level declaration"),
            };
            decls += 1;
            if ok.is_err() {
                let before = self.pos;
                self.recover_top();
                if self.pos == before && !self.at(&Tok::Eof) {
                    self.bump();
                    self.recover_top();
                }
            }
        }
        if decls == 0 {
            let span = self.peek().span;
            let _: PResult<()> = self.error("expected top-level declaration", span);
        }
        raw
    }

    fn header(&mut self) -> PResult<()> {
        self.expect_kw("prtspace")?;
        let (text, span) = self.number("a format version")?;
        if text != FORMAT_VERSION.to_string() {
            return self.error(format!("unsupported format version `{text}`, expected {FORMAT_VERSION}"), span);
        }
        self.expect(Tok::Semi)?;
        Ok(())
    }

    fn distribution(&mut self) -> PResult<RawDist> {
        let span = self.expect_kw("distribution")?;
        let name = self.name("a distribution name")?;
        let mut points = Vec::new();
        self.block(|p| {
            let t = p.time()?;
            p.expect(Tok::Colon)?;
            let pr = p.prob()?;
            p.expect(Tok::Semi)?;
            points.push((t, pr));
            Ok(())
        })?;
        Ok(RawDist { name, points, span })
    }

    fn machine(&mut self) -> PResult<RawMachine> {
        self.expect_kw("prtesm")?;
        let name = self.name("a machine name")?;
        let mut m = RawMachine { name, clocks: vec![], states: vec![], transitions: vec![] };
        self.block(|p| {
            if p.eat_kw("clock") {
                m.clocks.extend(p.names("a clock name")?);
            } else if p.eat_kw("state") {
                m.states.extend(p.names("a state name")?);
            } else if p.at_kw("transition") {
                m.transitions.push(p.transition()?);
            } else {
                return p.unexpected("`clock`, `state` or `transition`");
            }
            p.expect(Tok::Semi)?;
            Ok(())
        })?;
        Ok(m)
    }

    fn transition(&mut self) -> PResult<RawTransition> {
        let span = self.expect_kw("transition")?;
        let src = self.name("a source state")?;
        self.expect(Tok::Arrow)?;
        let dst = self.name("a target state")?;
        let mut t = RawTransition { src, dst, event: None, guard: None, resets: vec![], delay: None, span };
        loop {
            let kw = self.peek().clone();
            if self.eat_kw("on") {
                if t.event.is_some() {
                    return self.error("duplicate `on` clause", kw.span);
                }
                t.event = Some(if self.eat(&Tok::Slash) {
                    ParameterEvent { pin: self.name("a pin name")?.text, direction: Direction::FromBlock }
                } else {
                    let pin = self.name("a pin name")?.text;
                    self.expect(Tok::Slash)?;
                    ParameterEvent { pin, direction: Direction::ToBlock }
                });
            } else if self.eat_kw("guard") {
                if t.guard.is_some() {
                    return self.error("duplicate `guard` clause", kw.span);
                }
                let clock = self.name("a clock name")?.text;
                self.expect_kw("in")?;
                self.expect(Tok::LBracket)?;
                let lower = if self.at(&Tok::Comma) { None } else { Some(self.time()?) };
                self.expect(Tok::Comma)?;
                let upper = if self.at(&Tok::RBracket) { None } else { Some(self.time()?) };
                self.expect(Tok::RBracket)?;
                t.guard = Some(ClockInterval { clock, lower, upper });
            } else if self.eat_kw("reset") {
                t.resets.extend(self.names("a clock name")?);
            } else if self.eat_kw("delay") {
                if t.delay.is_some() {
                    return self.error("duplicate `delay` clause", kw.span);
                }
                t.delay = Some(self.name("a distribution name")?);
            } else {
                break;
            }
        }
        Ok(t)
    }

    fn network(&mut self) -> PResult<RawNetwork> {
        let span = self.expect_kw("network")?;
        let name = if matches!(self.peek().tok, Tok::Ident(_)) { Some(self.name("a network name")?) } else { None };
        let mut n = RawNetwork { name, timing: None, modules: vec![], target: None, span };
        self.block(|p| {
            let kw = p.peek().clone();
            if p.eat_kw("timing") {
                let style = if p.eat_kw("interval") {
                    GuardStyle::Interval
                } else if p.eat_kw("knot") {
                    GuardStyle::Knot
                } else {
                    return p.unexpected("`interval` or `knot`");
                };
                if n.timing.replace(style).is_some() {
                    return p.error("duplicate `timing`", kw.span);
                }
                p.expect(Tok::Semi)?;
            } else if p.at_kw("module") {
                n.modules.push(p.module()?);
            } else if p.eat_kw("target") {
                let e = p.expr_top()?;
                if n.target.replace(e).is_some() {
                    return p.error("duplicate `target`", kw.span);
                }
                p.expect(Tok::Semi)?;
            } else {
                return p.unexpected("`timing`, `module` or `target`");
            }
            Ok(())
        })?;
        Ok(n)
    }

    fn module(&mut self) -> PResult<RawModule> {
        self.expect_kw("module")?;
        let machine = self.name("a machine name")?;
        self.expect_kw("as")?;
        let id = self.name("a module id")?;
        let after = if self.eat_kw("after") { self.names("a module id")? } else { vec![] };
        let done = if self.eat_kw("done") { Some(self.name("a label")?) } else { None };
        let mut actions = Vec::new();
        self.block(|p| {
            p.expect_kw("action")?;
            let pin = p.name("a pin name")?;
            let mut a = RawAction { pin, delay: None, label: None };
            loop {
                let kw = p.peek().clone();
                if p.eat_kw("delay") {
                    if a.delay.replace(p.name("a distribution name")?).is_some() {
                        return p.error("duplicate `delay`", kw.span);
                    }
                } else if p.eat_kw("label") {
                    if a.label.replace(p.name("a label")?).is_some() {
                        return p.error("duplicate `label`", kw.span);
                    }
                } else {
                    break;
                }
            }
            p.expect(Tok::Semi)?;
            actions.push(a);
            Ok(())
        })?;
        Ok(RawModule { machine, id, after, done, actions })
    }

    fn query(&mut self) -> PResult<RawQuery> {
        self.expect_kw("query")?;
        let name = self.name("a query name")?;
        let mut q = RawQuery { name, target: None, bound: None, mode: None, reference: None };
        self.block(|p| {
            let kw = p.peek().clone();
            let dup = if p.eat_kw("target") {
                let e = p.expr_top()?;
                q.target.replace(e).is_some()
            } else if p.eat_kw("bound") {
                let t = p.time()?;
                q.bound.replace(t).is_some()
            } else if p.eat_kw("mode") {
                let m = if p.eat_kw("max") {
                    QueryMode::Max
                } else if p.eat_kw("min") {
                    QueryMode::Min
                } else if p.eat_kw("both") {
                    QueryMode::Both
                } else {
                    return p.unexpected("`max`, `min` or `both`");
                };
                q.mode.replace(m).is_some()
            } else if p.eat_kw("reference") {
                let r = p.prob()?;
                q.reference.replace(r).is_some()
            } else {
                return p.unexpected("`target`, `bound`, `mode` or `reference`");
            };
            if dup {
                return p.error(format!("duplicate {}", kw.tok.describe()), kw.span);
            }
            p.expect(Tok::Semi)?;
            Ok(())
        })?;
        Ok(q)
    }

    fn scenario(&mut self) -> PResult<RawScenario> {
        let span = self.expect_kw("scenario")?;
        let mut entries = Vec::new();
        self.block(|p| {
            let key = p.name("a setting name")?;
            let mut values = Vec::new();
            while !p.at(&Tok::Semi) {
                match &p.peek().tok {
                    Tok::Number(_) => {
                        let (text, span) = p.number("a value")?;
                        let unit = p.glued_unit();
                        values.push(Value::Number { text, unit, span });
                    }
                    Tok::Ident(_) => values.push(Value::Word(p.name("a value")?)),
                    _ => return p.unexpected("a value or `;`"),
                }
            }
            p.expect(Tok::Semi)?;
            entries.push((key, values));
            Ok(())
        })?;
        Ok(RawScenario { entries, span })
    }

    fn expr_top(&mut self) -> PResult<RawExpr> {
        let mut names = Vec::new();
        self.depth = 0;
        let expr = self.expr_or(&mut names)?;
        Ok(RawExpr { expr, names })
    }

    fn expr_or(&mut self, names: &mut Vec<(Name, bool)>) -> PResult<StateExpr> {
        let mut e = self.expr_and(names)?;
        while self.eat(&Tok::Pipe) {
            let r = self.expr_and(names)?;
            e = StateExpr::or(e, r);
        }
        Ok(e)
    }

    fn expr_and(&mut self, names: &mut Vec<(Name, bool)>) -> PResult<StateExpr> {
        let mut e = self.expr_unary(names)?;
        while self.eat(&Tok::Amp) {
            let r = self.expr_unary(names)?;
            e = StateExpr::and(e, r);
        }
        Ok(e)
    }

    fn expr_unary(&mut self, names: &mut Vec<(Name, bool)>) -> PResult<StateExpr> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            let span = self.peek().span;
            return self.error("expression nested too deeply", span);
        }
        let r = if self.eat(&Tok::Bang) {
            self.expr_unary(names).map(StateExpr::negate)
        } else if self.eat(&Tok::LParen) {
            let e = self.expr_or(names);
            e.and_then(|e| self.expect(Tok::RParen).map(|_| e))
        } else if self.eat_kw("true") {
            Ok(StateExpr::Const(true))
        } else if self.eat_kw("false") {
            Ok(StateExpr::Const(false))
        } else {
            let n = self.name("a flag, `var = n`, `true`, `false`, `!` or `(`")?;
            if self.eat(&Tok::Eq) {
                let (text, span) = self.number("a location number")?;
                match text.parse::<u32>() {
                    Ok(v) => {
                        names.push((n.clone(), false));
                        Ok(StateExpr::At(n.text, v))
                    }
                    Err(_) => self.error(format!("`{text}` is not a location number"), span),
                }
            } else {
                names.push((n.clone(), true));
                Ok(StateExpr::Flag(n.text))
            }
        };
        self.depth -= 1;
        r
    }
}

/// Exact conversion of a literal with an optional unit to ticks.
pub(super) fn to_ticks(text: &str, unit: Option<&str>) -> Result<Tick, String> {
    let per_unit: i64 = match unit {
        None => 1,
        Some("s") => 10_000,
        Some("ms") => 10,
        Some("us") => 1,
        Some(u) => return Err(format!("unknown time unit `{u}`; use s, ms or us")),
    };
    let d: BigDecimal = text.parse().map_err(|_| format!("`{text}` is not a number"))?;
    let ticks = match unit {
        Some("us") => d / BigDecimal::from(100),
        _ => d * BigDecimal::from(per_unit),
    };
    let shown = format!("{text}{}", unit.unwrap_or(""));
    if !ticks.is_integer() {
        return Err(format!("`{shown}` is not a whole number of 100 us ticks"));
    }
    ticks.to_u64().ok_or_else(|| format!("`{shown}` is out of range"))
}

fn to_micros(text: &str, unit: Option<&str>) -> Result<Micros, String> {
    let per_unit: i64 = match unit {
        Some("s") => 1_000_000,
        Some("ms") => 1_000,
        Some("us") => 1,
        None => return Err("a duration needs a unit (s, ms or us)".into()),
        Some(u) => return Err(format!("unknown time unit `{u}`; use s, ms or us")),
    };
    let d: BigDecimal = text.parse().map_err(|_| format!("`{text}` is not a number"))?;
    let us = d * BigDecimal::from(per_unit);
    if !us.is_integer() {
        return Err(format!("`{text}` is not a whole number of microseconds"));
    }
    us.to_u64().ok_or_else(|| format!("`{text}` is out of range"))
}

struct Resolver {
    diags: Vec<Diagnostic>,
}

impl Resolver {
    fn error(&mut self, message: impl Into<String>, span: Span) {
        self.diags.push(Diagnostic::error(message, span));
    }

    fn unique<'a, I: IntoIterator<Item = &'a Name>>(&mut self, what: &str, names: I) {
        let mut seen = BTreeSet::new();
        for n in names {
            if !seen.insert(n.text.as_str()) {
                self.error(format!("{what} `{}` is declared more than once", n.text), n.span);
            }
        }
    }
}

fn resolve(raw: Raw) -> (ModelDocument, Vec<Diagnostic>) {
    let mut r = Resolver { diags: Vec::new() };
    let mut doc = ModelDocument::default();

    r.unique("distribution", raw.dists.iter().map(|d| &d.name));
    for d in raw.dists {
        match DelayCdf::new(d.points) {
            Ok(cdf) => doc.distributions.push(NamedDistribution { name: d.name.text, cdf }),
            Err(e) => r.error(format!("distribution `{}`: {e}", d.name.text), d.span),
        }
    }
    let dist_names: BTreeSet<&str> = doc.distributions.iter().map(|d| d.name.as_str()).collect();
    let mut used_dists: BTreeSet<String> = BTreeSet::new();

    r.unique("machine", raw.machines.iter().map(|m| &m.name));
    for m in &raw.machines {
        let machine = Prtesm {
            name: m.name.text.clone(),
            states: m.states.iter().map(|s| s.text.clone()).collect(),
            clocks: m.clocks.iter().map(|c| c.text.clone()).collect(),
            transitions: m
                .transitions
                .iter()
                .map(|t| EsmTransition {
                    source: t.src.text.clone(),
                    target: t.dst.text.clone(),
                    trigger: t.event.clone().map_or(Trigger::Internal, Trigger::Parameter),
                    resets: t.resets.iter().map(|c| c.text.clone()).collect(),
                    guard: t.guard.clone(),
                    delay: t.delay.as_ref().map(|d| d.text.clone()),
                })
                .collect(),
        };
        for issue in validate_prtesm(&machine) {
            let state_span = |s: &str| m.states.iter().rev().find(|n| n.text == s).map_or(m.name.span, |n| n.span);
            let span = match &issue {
                PrtesmIssue::MissingInitial => m.name.span,
                PrtesmIssue::DuplicateState(s) | PrtesmIssue::Unreachable(s) => state_span(s),
                PrtesmIssue::DuplicateClock(c) => {
                    m.clocks.iter().rev().find(|n| &n.text == c).map_or(m.name.span, |n| n.span)
                }
                PrtesmIssue::UnknownState { transition, .. }
                | PrtesmIssue::UndeclaredClock { transition, .. }
                | PrtesmIssue::EmptyGuard { transition } => m.transitions[*transition].span,
            };
            r.error(format!("machine `{}`: {issue}", m.name.text), span);
        }
        for t in &m.transitions {
            if let Some(d) = &t.delay {
                if dist_names.contains(d.text.as_str()) {
                    used_dists.insert(d.text.clone());
                } else {
                    r.error(format!("unknown distribution `{}`", d.text), d.span);
                }
            }
        }
        doc.machines.push(machine);
    }

    for extra in raw.networks.iter().skip(1) {
        r.error("only one network may be declared", extra.span);
    }
    let mut flags: BTreeSet<String> = BTreeSet::new();
    let mut locations: BTreeSet<String> = BTreeSet::new();
    if let Some(n) = raw.networks.into_iter().next() {
        r.unique("module id", n.modules.iter().map(|m| &m.id));
        let ids: BTreeSet<&str> = n.modules.iter().map(|m| m.id.text.as_str()).collect();
        for id in &ids {
            flags.insert(flag_name(id));
            locations.insert(location_var(id));
        }
        let mut modules = Vec::new();
        for m in &n.modules {
            let machine = doc.machines.iter().find(|x| x.name == m.machine.text);
            if machine.is_none() {
                r.error(format!("unknown machine `{}`", m.machine.text), m.machine.span);
            }
            for a in &m.after {
                if !ids.contains(a.text.as_str()) {
                    r.error(format!("unknown module id `{}`", a.text), a.span);
                } else if a.text == m.id.text {
                    r.error(format!("module `{}` cannot wait for itself", a.text), a.span);
                }
            }
            if m.actions.is_empty() {
                r.error(format!("module `{}` binds no actions", m.id.text), m.id.span);
            }
            for a in &m.actions {
                let trans = machine.and_then(|mc| mc.transitions.iter().find(|t| t.pin() == Some(a.pin.text.as_str())));
                if machine.is_some() && trans.is_none() {
                    r.error(format!("`{}` is not a trigger of machine `{}`", a.pin.text, m.machine.text), a.pin.span);
                }
                match &a.delay {
                    Some(d) if !dist_names.contains(d.text.as_str()) => {
                        r.error(format!("unknown distribution `{}`", d.text), d.span)
                    }
                    Some(d) => {
                        used_dists.insert(d.text.clone());
                    }
                    None if trans.is_some() && trans.unwrap().delay.is_none() => r.error(
                        format!("action `{}` has no delay: add `delay NAME` here or on the transition", a.pin.text),
                        a.pin.span,
                    ),
                    None => {}
                }
            }
            modules.push(ModuleBinding {
                machine: m.machine.text.clone(),
                id: m.id.text.clone(),
                after: m.after.iter().map(|a| a.text.clone()).collect(),
                done: m.done.as_ref().map(|d| d.text.clone()),
                actions: m
                    .actions
                    .iter()
                    .map(|a| ActionBinding {
                        pin: a.pin.text.clone(),
                        delay: a.delay.as_ref().map(|d| d.text.clone()),
                        label: a.label.as_ref().map(|l| l.text.clone()),
                    })
                    .collect(),
            });
        }
        if let Some(t) = &n.target {
            check_names(&mut r, t, &flags, &locations);
        }
        doc.network = Some(NetworkSpec {
            name: n.name.map(|x| x.text),
            timing: n.timing.unwrap_or_default(),
            modules,
            target: n.target.map(|t| t.expr),
        });
        if r.diags.is_empty() {
            if let Err(e) = doc.build_network() {
                r.error(format!("cannot build the network: {e}"), n.span);
            }
        }
    }

    r.unique("query", raw.queries.iter().map(|q| &q.name));
    for q in raw.queries {
        if doc.network.is_none() {
            r.error(format!("query `{}` needs a network", q.name.text), q.name.span);
        }
        let Some(bound) = q.bound else {
            r.error(format!("query `{}` has no `bound`", q.name.text), q.name.span);
            continue;
        };
        if let Some(t) = &q.target {
            check_names(&mut r, t, &flags, &locations);
        } else if doc.network.as_ref().and_then(|n| n.target.as_ref()).is_none() {
            r.error(format!("query `{}` has no target and the network declares none", q.name.text), q.name.span);
        }
        doc.queries.push(QuerySpec {
            name: q.name.text,
            target: q.target.map(|t| t.expr),
            bound,
            mode: q.mode.unwrap_or(QueryMode::Both),
            reference: q.reference,
        });
    }

    for extra in raw.scenarios.iter().skip(1) {
        r.error("only one scenario may be declared", extra.span);
    }
    if let Some(s) = raw.scenarios.into_iter().next() {
        doc.scenario = scenario_config(&mut r, &s);
    }

    for d in &doc.distributions {
        if !used_dists.contains(&d.name) {
            r.diags.push(Diagnostic::warning(
                format!("distribution `{}` is never used", d.name),
                Span { offset: 0, len: 0, line: 1, column: 1 },
            ));
        }
    }
    (doc, r.diags)
}

fn check_names(r: &mut Resolver, e: &RawExpr, flags: &BTreeSet<String>, locations: &BTreeSet<String>) {
    for (n, is_flag) in &e.names {
        if *is_flag && !flags.contains(&n.text) {
            r.error(format!("unknown flag `{}`", n.text), n.span);
        } else if !*is_flag && !locations.contains(&n.text) {
            r.error(format!("unknown location variable `{}`", n.text), n.span);
        }
    }
}

fn scenario_config(r: &mut Resolver, s: &RawScenario) -> Option<ScenarioConfig> {
    let mut c = ScenarioConfig::default();
    let mut seen = BTreeSet::new();
    let before = r.diags.len();
    for (key, values) in &s.entries {
        if !seen.insert(key.text.as_str()) {
            r.error(format!("setting `{}` appears more than once", key.text), key.span);
            continue;
        }
        let real = |r: &mut Resolver, idx: usize| -> Option<f64> {
            match values.get(idx) {
                Some(Value::Number { text, unit, span }) => {
                    if let Some(u) = unit {
                        r.error(format!("`{}` takes a plain number, found unit `{u}`", key.text), *span);
                        return None;
                    }
                    text.parse::<f64>().ok()
                }
                Some(Value::Word(w)) => {
                    r.error(format!("expected a number for `{}`, found `{}`", key.text, w.text), w.span);
                    None
                }
                None => {
                    r.error(format!("`{}` needs a value", key.text), key.span);
                    None
                }
            }
        };
        let duration = |r: &mut Resolver| -> Option<Micros> {
            match values.first() {
                Some(Value::Number { text, unit, span }) => match to_micros(text, unit.as_deref()) {
                    Ok(v) => Some(v),
                    Err(m) => {
                        r.error(m, *span);
                        None
                    }
                },
                _ => {
                    r.error(format!("`{}` needs a duration such as `0.5s`", key.text), key.span);
                    None
                }
            }
        };
        let arity = if key.text == "human_start" {
            if matches!(values.first(), Some(Value::Word(w)) if w.text == "none") {
                1
            } else {
                2
            }
        } else {
            1
        };
        if values.len() != arity {
            r.error(format!("`{}` takes {arity} value(s), found {}", key.text, values.len()), key.span);
            continue;
        }
        macro_rules! set_real {
            ($field:ident) => {
                if let Some(v) = real(r, 0) {
                    c.$field = v;
                }
            };
        }
        macro_rules! set_time {
            ($field:ident) => {
                if let Some(v) = duration(r) {
                    c.$field = v;
                }
            };
        }
        match key.text.as_str() {
            "hall_width" => set_real!(hall_width),
            "hall_depth" => set_real!(hall_depth),
            "robot_size" => set_real!(robot_size),
            "track_start_x" => set_real!(track_start_x),
            "track_length" => set_real!(track_length),
            "robot_max_speed" => set_real!(robot_max_speed),
            "normal_accel" => set_real!(normal_accel),
            "yellow_decel" => set_real!(yellow_decel),
            "red_decel" => set_real!(red_decel),
            "yellow_speed" => set_real!(yellow_speed),
            "creep_speed" => set_real!(creep_speed),
            "creep_zone" => set_real!(creep_zone),
            "yellow_threshold" => set_real!(yellow_threshold),
            "red_threshold" => set_real!(red_threshold),
            "human_speed" => set_real!(human_speed),
            "human_size" => set_real!(human_size),
            "robot_start" => set_real!(robot_start),
            "robot_start_speed" => set_real!(robot_start_speed),
            "physics_step" => set_time!(physics_step),
            "poll_period" => set_time!(poll_period),
            "poll_phase" => set_time!(poll_phase),
            "reaction_delay" => set_time!(reaction_delay),
            "time_cap" => set_time!(time_cap),
            "human_start" => {
                if arity == 1 {
                    c.human_start = None;
                } else if let (Some(x), Some(y)) = (real(r, 0), real(r, 1)) {
                    c.human_start = Some((x, y));
                }
            }
            other => r.error(format!("unknown scenario setting `{other}`"), key.span),
        }
    }
    if r.diags.len() > before {
        return None;
    }
    if let Err(e) = c.validate() {
        r.error(format!("invalid scenario: {e}"), s.span);
        return None;
    }
    Some(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_conversion() {
        assert_eq!(to_ticks("16.9", Some("ms")), Ok(169));
        assert_eq!(to_ticks("0.46", Some("s")), Ok(4600));
        assert_eq!(to_ticks("200", None), Ok(200));
        assert_eq!(to_ticks("300", Some("us")), Ok(3));
        assert!(to_ticks("0.01", Some("ms")).is_err());
        assert!(to_ticks("1.5", None).is_err());
        assert!(to_ticks("1", Some("h")).is_err());
        assert_eq!(to_micros("0.47", Some("s")), Ok(470_000));
    }
}
