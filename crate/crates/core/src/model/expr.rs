//! Boolean state predicates over flags and module locations.

use std::fmt;

use thiserror::Error;

use super::pta::PtaNetwork;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateExpr {
    Const(bool),
    Flag(String),
    /// `location_var = value`.
    At(String, u32),
    Not(Box<StateExpr>),
    And(Box<StateExpr>, Box<StateExpr>),
    Or(Box<StateExpr>, Box<StateExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("unknown flag `{0}`")]
    UnknownFlag(String),
    #[error("unknown location variable `{0}`")]
    UnknownLocation(String),
}

impl StateExpr {
    pub fn flag(name: impl Into<String>) -> Self {
        StateExpr::Flag(name.into())
    }

    pub fn and(a: StateExpr, b: StateExpr) -> Self {
        StateExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: StateExpr, b: StateExpr) -> Self {
        StateExpr::Or(Box::new(a), Box::new(b))
    }

    pub fn negate(a: StateExpr) -> Self {
        StateExpr::Not(Box::new(a))
    }

    /// Conjunction of all flags; `true` when empty.
    pub fn all_flags<S: AsRef<str>>(flags: &[S]) -> Self {
        let mut it = flags.iter().map(|f| StateExpr::flag(f.as_ref()));
        match it.next() {
            None => StateExpr::Const(true),
            Some(first) => it.fold(first, StateExpr::and),
        }
    }

    /// Names of flags referenced, in order of appearance.
    pub fn flags(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let StateExpr::Flag(f) = e {
                out.push(f.as_str());
            }
        });
        out
    }

    pub fn locations(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let StateExpr::At(v, _) = e {
                out.push(v.as_str());
            }
        });
        out
    }

    fn walk<'a>(&'a self, f: &mut impl FnMut(&'a StateExpr)) {
        f(self);
        match self {
            StateExpr::Not(a) => a.walk(f),
            StateExpr::And(a, b) | StateExpr::Or(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            _ => {}
        }
    }

    /// Checks every name against the network.
    pub fn check(&self, net: &PtaNetwork) -> Result<(), ExprError> {
        for f in self.flags() {
            if !net.flag_names().any(|n| n == f) {
                return Err(ExprError::UnknownFlag(f.to_string()));
            }
        }
        for v in self.locations() {
            if !net.modules.iter().any(|m| m.location.name == v) {
                return Err(ExprError::UnknownLocation(v.to_string()));
            }
        }
        Ok(())
    }

    fn precedence(&self) -> u8 {
        match self {
            StateExpr::Or(..) => 1,
            StateExpr::And(..) => 2,
            _ => 3,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            StateExpr::Const(b) => write!(f, "{b}")?,
            StateExpr::Flag(n) => f.write_str(n)?,
            StateExpr::At(v, l) => write!(f, "{v}={l}")?,
            StateExpr::Not(a) => {
                f.write_str("!")?;
                a.fmt_prec(f, 3)?;
            }
            // Right operands get a higher floor so left-nested trees print
            // without parentheses and re-parse to the same shape.
            StateExpr::And(a, b) => {
                a.fmt_prec(f, 2)?;
                f.write_str(" & ")?;
                b.fmt_prec(f, 3)?;
            }
            StateExpr::Or(a, b) => {
                a.fmt_prec(f, 1)?;
                f.write_str(" | ")?;
                b.fmt_prec(f, 2)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for StateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}
