//! Probabilistic real-time external state machines.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use crate::distributions::Tick;

/// Name of the distinguished start/final state.
pub const INITIAL: &str = "initial";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    /// `pin/`: the environment hands a parameter to the block.
    ToBlock,
    /// `/pin`: the block emits a parameter.
    FromBlock,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParameterEvent {
    pub pin: String,
    pub direction: Direction,
}

impl fmt::Display for ParameterEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.direction {
            Direction::ToBlock => write!(f, "{}/", self.pin),
            Direction::FromBlock => write!(f, "/{}", self.pin),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Trigger {
    Parameter(ParameterEvent),
    Internal,
}

/// `lower <= clock <= upper`; either side may be open.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockInterval {
    pub clock: String,
    pub lower: Option<Tick>,
    pub upper: Option<Tick>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EsmTransition {
    pub source: String,
    pub target: String,
    pub trigger: Trigger,
    pub resets: Vec<String>,
    pub guard: Option<ClockInterval>,
    /// Name of the delay distribution annotating this transition.
    pub delay: Option<String>,
}

impl EsmTransition {
    pub fn pin(&self) -> Option<&str> {
        match &self.trigger {
            Trigger::Parameter(e) => Some(&e.pin),
            Trigger::Internal => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prtesm {
    pub name: String,
    pub states: Vec<String>,
    pub clocks: Vec<String>,
    pub transitions: Vec<EsmTransition>,
}

impl Prtesm {
    /// `initial -> active` on `start/`, then `active -> active` on `pin/`.
    pub fn single_action(name: &str, pin: &str) -> Self {
        let on = |src: &str, dst: &str, p: &str| EsmTransition {
            source: src.into(),
            target: dst.into(),
            trigger: Trigger::Parameter(ParameterEvent { pin: p.into(), direction: Direction::ToBlock }),
            resets: vec![],
            guard: None,
            delay: None,
        };
        Prtesm {
            name: name.into(),
            states: vec![INITIAL.into(), "active".into()],
            clocks: vec![],
            transitions: vec![on(INITIAL, "active", "start"), on("active", "active", pin)],
        }
    }

    pub fn pins(&self) -> BTreeSet<&str> {
        self.transitions.iter().filter_map(|t| t.pin()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrtesmIssue {
    MissingInitial,
    DuplicateState(String),
    DuplicateClock(String),
    UnknownState { transition: usize, state: String },
    Unreachable(String),
    UndeclaredClock { transition: usize, clock: String },
    EmptyGuard { transition: usize },
}

impl fmt::Display for PrtesmIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrtesmIssue::MissingInitial => write!(f, "no `{INITIAL}` state"),
            PrtesmIssue::DuplicateState(s) => write!(f, "state `{s}` declared twice"),
            PrtesmIssue::DuplicateClock(c) => write!(f, "clock `{c}` declared twice"),
            PrtesmIssue::UnknownState { transition, state } => {
                write!(f, "transition {transition} refers to unknown state `{state}`")
            }
            PrtesmIssue::Unreachable(s) => write!(f, "state `{s}` is unreachable from `{INITIAL}`"),
            PrtesmIssue::UndeclaredClock { transition, clock } => {
                write!(f, "transition {transition} uses undeclared clock `{clock}`")
            }
            PrtesmIssue::EmptyGuard { transition } => {
                write!(f, "transition {transition} has a clock guard with lower bound above upper bound")
            }
        }
    }
}

/// Checks the structural invariants. An empty result means the machine is
/// well formed.
pub fn validate_prtesm(m: &Prtesm) -> Vec<PrtesmIssue> {
    let mut issues = Vec::new();
    let mut seen = BTreeSet::new();
    for s in &m.states {
        if !seen.insert(s.as_str()) {
            issues.push(PrtesmIssue::DuplicateState(s.clone()));
        }
    }
    if !seen.contains(INITIAL) {
        issues.push(PrtesmIssue::MissingInitial);
    }
    let mut clocks = BTreeSet::new();
    for c in &m.clocks {
        if !clocks.insert(c.as_str()) {
            issues.push(PrtesmIssue::DuplicateClock(c.clone()));
        }
    }
    for (i, t) in m.transitions.iter().enumerate() {
        for s in [&t.source, &t.target] {
            if !seen.contains(s.as_str()) {
                issues.push(PrtesmIssue::UnknownState { transition: i, state: s.clone() });
            }
        }
        for c in t.resets.iter().chain(t.guard.as_ref().map(|g| &g.clock)) {
            if !clocks.contains(c.as_str()) {
                issues.push(PrtesmIssue::UndeclaredClock { transition: i, clock: c.clone() });
            }
        }
        if let Some(ClockInterval { lower: Some(lo), upper: Some(hi), .. }) = &t.guard {
            if lo > hi {
                issues.push(PrtesmIssue::EmptyGuard { transition: i });
            }
        }
    }
    if seen.contains(INITIAL) {
        let reach = reachable_states(m);
        let mut reported = BTreeSet::new();
        for s in &m.states {
            if !reach.contains(s.as_str()) && reported.insert(s.as_str()) {
                issues.push(PrtesmIssue::Unreachable(s.clone()));
            }
        }
    }
    issues
}

pub(crate) fn reachable_states(m: &Prtesm) -> BTreeSet<&str> {
    let mut reach = BTreeSet::from([INITIAL]);
    let mut queue = VecDeque::from([INITIAL]);
    while let Some(s) = queue.pop_front() {
        for t in m.transitions.iter().filter(|t| t.source == s) {
            if reach.insert(t.target.as_str()) {
                queue.push_back(&t.target);
            }
        }
    }
    reach
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(src: &str, dst: &str, pin: Option<&str>) -> EsmTransition {
        EsmTransition {
            source: src.into(),
            target: dst.into(),
            trigger: match pin {
                Some(p) => Trigger::Parameter(ParameterEvent { pin: p.into(), direction: Direction::ToBlock }),
                None => Trigger::Internal,
            },
            resets: vec![],
            guard: None,
            delay: None,
        }
    }

    fn machine() -> Prtesm {
        Prtesm {
            name: "m".into(),
            states: vec!["initial".into(), "active".into()],
            clocks: vec!["c".into()],
            transitions: vec![tr("initial", "active", Some("start")), tr("active", "active", Some("go"))],
        }
    }

    #[test]
    fn well_formed() {
        assert!(validate_prtesm(&machine()).is_empty());
    }

    #[test]
    fn unreachable_state() {
        let mut m = machine();
        m.states.push("orphan".into());
        assert_eq!(validate_prtesm(&m), vec![PrtesmIssue::Unreachable("orphan".into())]);
    }

    #[test]
    fn undeclared_reset() {
        let mut m = machine();
        m.transitions[1].resets.push("x".into());
        assert_eq!(validate_prtesm(&m), vec![PrtesmIssue::UndeclaredClock { transition: 1, clock: "x".into() }]);
    }

    #[test]
    fn missing_initial() {
        let m = Prtesm { name: "m".into(), states: vec!["a".into()], clocks: vec![], transitions: vec![] };
        assert_eq!(validate_prtesm(&m), vec![PrtesmIssue::MissingInitial]);
    }
}
