//! Export to the PRISM `pta` dialect, and a reader for exactly that subset.
//!
//! Grammar of the emitted text (whitespace and `//` comments are free):
//!
//! ```text
//! file     := "pta" const* module*
//! const    := "const" ("int" | "double") IDENT "=" NUMBER ";"
//! module   := "module" IDENT decl* command* "endmodule"
//! decl     := IDENT ":" "[" INT ".." INT "]" "init" "0" ";"
//!           | IDENT ":" "clock" ";"
//!           | IDENT ":" "bool" "init" "false" ";"
//! command  := "[" IDENT? "]" guard "->" branches ";"
//! guard    := IDENT "=" INT ("&" atom)*
//! atom     := IDENT ("<=" | ">=") (INT | IDENT) | IDENT | "!" IDENT
//! branches := updates | prob ":" updates ("+" prob ":" updates)*
//! prob     := NUMBER | IDENT | IDENT "-" IDENT
//! updates  := "(" IDENT "'" "=" (INT | "true" | "false") ")" ("&" "(" ... ")")*
//! ```
//!
//! The first guard atom tests the module's own location variable. Updates
//! list the location first, then clock resets (`=0`), then flags.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use thiserror::Error;

use crate::distributions::Tick;
use crate::model::transform::sanitize;
use crate::model::{
    Branch, ClockConstraint, Cmp, ConstValue, Constant, FlagTest, Guard, LocationVar, NetworkError, PtaCommand,
    PtaModule, PtaNetwork, TickBound, Update,
};
use crate::prob::Prob;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrismStyle {
    /// Branch probabilities as differences of cumulative constants.
    #[default]
    Symbolic,
    /// Branch probabilities as decimal literals.
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrismError {
    #[error("`{0}` and `{1}` collide as `{2}` after sanitization")]
    NameCollision(String, String, String),
    #[error("probability {0} cannot be written as a PRISM probability")]
    BadProbability(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

struct Names {
    map: HashMap<String, String>,
    back: HashMap<String, String>,
}

impl Names {
    fn add(&mut self, name: &str) -> Result<(), PrismError> {
        if self.map.contains_key(name) {
            return Ok(());
        }
        let s = sanitize(name);
        if let Some(prev) = self.back.get(&s) {
            return Err(PrismError::NameCollision(prev.clone(), name.to_string(), s));
        }
        self.back.insert(s.clone(), name.to_string());
        self.map.insert(name.to_string(), s);
        Ok(())
    }

    fn get<'a>(&'a self, name: &'a str) -> &'a str {
        self.map.get(name).map_or(name, String::as_str)
    }
}

/// Renders a network. In symbolic style a branch uses its recorded spelling
/// (`cu_r2-cu_r1`) when it has one.
pub fn export_prism(net: &PtaNetwork, style: PrismStyle) -> Result<String, PrismError> {
    let mut names = Names { map: HashMap::new(), back: HashMap::new() };
    for c in &net.constants {
        names.add(&c.name)?;
    }
    for m in &net.modules {
        names.add(&m.name)?;
        names.add(&m.location.name)?;
        for x in m.clocks.iter().chain(&m.flags) {
            names.add(x)?;
        }
    }
    for l in &net.sync_alphabet {
        names.add(l)?;
    }

    let mut o = String::from("pta\n");
    let mut first = true;
    for c in &net.constants {
        if let ConstValue::Ticks(v) = &c.value {
            let note = if first { " // time unit 0.0001 s" } else { "" };
            first = false;
            let _ = writeln!(o, "const int {} = {v};{note}", names.get(&c.name));
        }
    }
    let mut first = true;
    for c in &net.constants {
        if let ConstValue::Probability(p) = &c.value {
            if !p.in_unit_interval() {
                return Err(PrismError::BadProbability(p.to_plain_string()));
            }
            let note = if first { " // accumulative probability" } else { "" };
            first = false;
            let _ = writeln!(o, "const double {} = {};{note}", names.get(&c.name), p.to_plain_string());
        }
    }
    for m in &net.modules {
        let loc = names.get(&m.location.name);
        let _ = writeln!(o, "\nmodule {}", names.get(&m.name));
        let _ = writeln!(o, "    {loc} : [0..{}] init 0;", m.location.max);
        for c in &m.clocks {
            let _ = writeln!(o, "    {} : clock;", names.get(c));
        }
        for f in &m.flags {
            let _ = writeln!(o, "    {} : bool init false;", names.get(f));
        }
        for cmd in &m.commands {
            let label = cmd.label.as_deref().map_or("", |l| names.get(l));
            let mut guard = format!("{loc}={}", cmd.guard.location);
            for cc in &cmd.guard.clocks {
                let bound = match &cc.bound.constant {
                    Some(n) => names.get(n).to_string(),
                    None => cc.bound.value.to_string(),
                };
                let _ = write!(guard, "&{}{}{bound}", names.get(&cc.clock), cc.cmp.symbol());
            }
            for ft in &cmd.guard.flags {
                let _ = write!(guard, "&{}{}", if ft.value { "" } else { "!" }, names.get(&ft.flag));
            }
            let mut branches = Vec::new();
            for b in &cmd.branches {
                if b.probability.is_zero() || !b.probability.in_unit_interval() {
                    return Err(PrismError::BadProbability(b.probability.to_plain_string()));
                }
                let upd = render_update(&b.update, loc, &names);
                if cmd.branches.len() == 1 && b.probability.is_one() {
                    branches.push(upd);
                    continue;
                }
                let p = match (&b.expr, style) {
                    (Some(e), PrismStyle::Symbolic) => {
                        e.split('-').map(|part| names.get(part).to_string()).collect::<Vec<_>>().join("-")
                    }
                    _ => b.probability.to_plain_string(),
                };
                branches.push(format!("{p} : {upd}"));
            }
            let _ = writeln!(o, "    [{label}] {guard} -> {};", branches.join(" + "));
        }
        o.push_str("endmodule\n");
    }
    Ok(o)
}

fn render_update(u: &Update, loc: &str, names: &Names) -> String {
    let mut parts = vec![format!("({loc}'={})", u.location)];
    for r in &u.resets {
        parts.push(format!("({}'=0)", names.get(r)));
    }
    for (f, v) in &u.flags {
        parts.push(format!("({}'={v})", names.get(f)));
    }
    parts.join(" & ")
}

#[derive(Debug, Clone, PartialEq)]
enum PTok {
    Ident(String),
    Number(String),
    Sym(&'static str),
}

fn tokenize(text: &str) -> Result<Vec<(PTok, usize)>, PrismError> {
    const SYMS: [&str; 18] =
        ["..", "<=", ">=", "->", "[", "]", "(", ")", ":", ";", "=", "&", "+", "-", "'", "!", ",", "|"];
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split("//").next().unwrap_or("");
        let b = line.as_bytes();
        let mut i = 0;
        while i < b.len() {
            let c = b[i] as char;
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let s = i;
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                    i += 1;
                }
                out.push((PTok::Ident(line[s..i].to_string()), ln + 1));
            } else if c.is_ascii_digit() {
                let s = i;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
                if i + 1 < b.len() && b[i] == b'.' && b[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < b.len() && b[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                    let mut j = i + 1;
                    if j < b.len() && (b[j] == b'-' || b[j] == b'+') {
                        j += 1;
                    }
                    if j < b.len() && b[j].is_ascii_digit() {
                        i = j;
                        while i < b.len() && b[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                out.push((PTok::Number(line[s..i].to_string()), ln + 1));
            } else if let Some(s) = SYMS.iter().find(|s| line[i..].starts_with(**s)) {
                out.push((PTok::Sym(s), ln + 1));
                i += s.len();
            } else {
                return Err(PrismError::Syntax { line: ln + 1, message: format!("unexpected character `{c}`") });
            }
        }
    }
    Ok(out)
}

struct Reader {
    toks: Vec<(PTok, usize)>,
    pos: usize,
    ticks: BTreeMap<String, Tick>,
    probs: BTreeMap<String, Prob>,
}

impl Reader {
    fn line(&self) -> usize {
        self.toks.get(self.pos).or(self.toks.last()).map_or(1, |t| t.1)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, PrismError> {
        Err(PrismError::Syntax { line: self.line(), message: message.into() })
    }

    fn peek(&self) -> Option<&PTok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(PTok::Sym(x)) if *x == s)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Some(PTok::Ident(x)) if x == w)
    }

    fn sym(&mut self, s: &str) -> Result<(), PrismError> {
        if self.is_sym(s) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(format!("expected `{s}`"))
        }
    }

    fn word(&mut self, w: &str) -> Result<(), PrismError> {
        if self.is_word(w) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(format!("expected `{w}`"))
        }
    }

    fn ident(&mut self) -> Result<String, PrismError> {
        match self.peek() {
            Some(PTok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.fail("expected an identifier"),
        }
    }

    fn number(&mut self) -> Result<String, PrismError> {
        match self.peek() {
            Some(PTok::Number(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.fail("expected a number"),
        }
    }

    fn int(&mut self) -> Result<u64, PrismError> {
        let n = self.number()?;
        n.parse().or_else(|_| self.fail(format!("`{n}` is not an integer")))
    }

    fn prob_value(&self, name: &str) -> Result<Prob, PrismError> {
        self.probs.get(name).cloned().map_or_else(|| self.fail(format!("unknown probability constant `{name}`")), Ok)
    }

    fn file(&mut self) -> Result<PtaNetwork, PrismError> {
        self.word("pta")?;
        let mut constants = Vec::new();
        while self.is_word("const") {
            self.pos += 1;
            let kind = self.ident()?;
            let name = self.ident()?;
            self.sym("=")?;
            let n = self.number()?;
            self.sym(";")?;
            let value = match kind.as_str() {
                "int" => {
                    let v: Tick = n.parse().or_else(|_| self.fail(format!("`{n}` is not an integer")))?;
                    self.ticks.insert(name.clone(), v);
                    ConstValue::Ticks(v)
                }
                "double" => {
                    let p = Prob::parse(&n).or_else(|e| self.fail(e.to_string()))?;
                    self.probs.insert(name.clone(), p.clone());
                    ConstValue::Probability(p)
                }
                other => return self.fail(format!("unsupported constant type `{other}`")),
            };
            constants.push(Constant { name, value });
        }
        let mut modules = Vec::new();
        while self.is_word("module") {
            self.pos += 1;
            modules.push(self.module()?);
        }
        if self.pos < self.toks.len() {
            return self.fail("expected `module` or end of input");
        }
        Ok(PtaNetwork::new(constants, modules)?)
    }

    fn module(&mut self) -> Result<PtaModule, PrismError> {
        let name = self.ident()?;
        let mut location: Option<LocationVar> = None;
        let mut clocks = Vec::new();
        let mut flags = Vec::new();
        while matches!(self.toks.get(self.pos + 1), Some((PTok::Sym(":"), _))) {
            let v = self.ident()?;
            self.sym(":")?;
            if self.is_word("clock") {
                self.pos += 1;
                clocks.push(v);
            } else if self.is_word("bool") {
                self.pos += 1;
                self.word("init")?;
                self.word("false")?;
                flags.push(v);
            } else {
                self.sym("[")?;
                if self.int()? != 0 {
                    return self.fail("location ranges must start at 0");
                }
                self.sym("..")?;
                let max = self.int()? as u32;
                self.sym("]")?;
                self.word("init")?;
                if self.int()? != 0 {
                    return self.fail("locations must start at 0");
                }
                if location.replace(LocationVar { name: v, max }).is_some() {
                    return self.fail("a module has exactly one location variable");
                }
            }
            self.sym(";")?;
        }
        let Some(location) = location else {
            return self.fail(format!("module `{name}` declares no location variable"));
        };
        let mut commands = Vec::new();
        while self.is_sym("[") {
            commands.push(self.command(&location.name)?);
        }
        self.word("endmodule")?;
        Ok(PtaModule { name, location, clocks, flags, commands })
    }

    fn command(&mut self, loc: &str) -> Result<PtaCommand, PrismError> {
        self.sym("[")?;
        let label = if self.is_sym("]") { None } else { Some(self.ident()?) };
        self.sym("]")?;
        let v = self.ident()?;
        if v != loc {
            return self.fail(format!("guard must start with `{loc}=`"));
        }
        self.sym("=")?;
        let mut guard = Guard::at(self.int()? as u32);
        while self.is_sym("&") {
            self.pos += 1;
            if self.is_sym("!") {
                self.pos += 1;
                guard.flags.push(FlagTest { flag: self.ident()?, value: false });
                continue;
            }
            let name = self.ident()?;
            let cmp = if self.is_sym("<=") {
                Cmp::Le
            } else if self.is_sym(">=") {
                Cmp::Ge
            } else {
                guard.flags.push(FlagTest { flag: name, value: true });
                continue;
            };
            self.pos += 1;
            let bound = match self.peek() {
                Some(PTok::Ident(c)) => {
                    let c = c.clone();
                    self.pos += 1;
                    match self.ticks.get(&c) {
                        Some(v) => TickBound::named(*v, c),
                        None => return self.fail(format!("unknown int constant `{c}`")),
                    }
                }
                _ => TickBound::literal(self.int()?),
            };
            guard.clocks.push(ClockConstraint { clock: name, cmp, bound });
        }
        self.sym("->")?;
        let mut branches = Vec::new();
        if self.is_sym("(") {
            branches.push(Branch { probability: Prob::one(), expr: None, update: self.updates(loc)? });
        } else {
            loop {
                let (probability, expr) = self.prob()?;
                self.sym(":")?;
                branches.push(Branch { probability, expr, update: self.updates(loc)? });
                if !self.is_sym("+") {
                    break;
                }
                self.pos += 1;
            }
        }
        self.sym(";")?;
        Ok(PtaCommand { label, guard, branches })
    }

    fn prob(&mut self) -> Result<(Prob, Option<String>), PrismError> {
        if let Some(PTok::Number(_)) = self.peek() {
            let n = self.number()?;
            return Ok((Prob::parse(&n).or_else(|e| self.fail(e.to_string()))?, None));
        }
        let a = self.ident()?;
        let pa = self.prob_value(&a)?;
        if self.is_sym("-") {
            self.pos += 1;
            let b = self.ident()?;
            let pb = self.prob_value(&b)?;
            Ok((&pa - &pb, Some(format!("{a}-{b}"))))
        } else {
            Ok((pa, Some(a)))
        }
    }

    fn updates(&mut self, loc: &str) -> Result<Update, PrismError> {
        let mut location = None;
        let mut resets = Vec::new();
        let mut flags = Vec::new();
        loop {
            self.sym("(")?;
            let v = self.ident()?;
            self.sym("'")?;
            self.sym("=")?;
            if self.is_word("true") || self.is_word("false") {
                flags.push((v, self.is_word("true")));
                self.pos += 1;
            } else {
                let n = self.int()?;
                if v == loc {
                    location = Some(n as u32);
                } else if n == 0 {
                    resets.push(v);
                } else {
                    return self.fail(format!("clock `{v}` can only be reset to 0"));
                }
            }
            self.sym(")")?;
            if !self.is_sym("&") {
                break;
            }
            self.pos += 1;
        }
        match location {
            Some(location) => Ok(Update { location, resets, flags }),
            None => self.fail(format!("update must assign `{loc}`")),
        }
    }
}

/// Reads text in the dialect written by [`export_prism`].
pub fn read_prism(text: &str) -> Result<PtaNetwork, PrismError> {
    let toks = tokenize(text)?;
    let mut r = Reader { toks, pos: 0, ticks: BTreeMap::new(), probs: BTreeMap::new() };
    r.file()
}
