//! Probabilistic timed automata in the PRISM `pta` shape.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::distributions::Tick;
use crate::prob::Prob;

/// A tick value, optionally spelled through a named constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TickBound {
    pub value: Tick,
    pub constant: Option<String>,
}

impl TickBound {
    pub fn literal(value: Tick) -> Self {
        TickBound { value, constant: None }
    }

    pub fn named(value: Tick, name: impl Into<String>) -> Self {
        TickBound { value, constant: Some(name.into()) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Ge,
    Le,
}

impl Cmp {
    pub fn symbol(self) -> &'static str {
        match self {
            Cmp::Ge => ">=",
            Cmp::Le => "<=",
        }
    }

    pub fn holds(self, value: Tick, bound: Tick) -> bool {
        match self {
            Cmp::Ge => value >= bound,
            Cmp::Le => value <= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockConstraint {
    pub clock: String,
    pub cmp: Cmp,
    pub bound: TickBound,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlagTest {
    pub flag: String,
    pub value: bool,
}

/// `s = location & clock constraints & flag tests`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Guard {
    pub location: u32,
    pub clocks: Vec<ClockConstraint>,
    pub flags: Vec<FlagTest>,
}

impl Guard {
    pub fn at(location: u32) -> Self {
        Guard { location, clocks: Vec::new(), flags: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Update {
    pub location: u32,
    pub resets: Vec<String>,
    pub flags: Vec<(String, bool)>,
}

impl Update {
    pub fn goto(location: u32) -> Self {
        Update { location, resets: Vec::new(), flags: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub probability: Prob,
    /// Spelling of the probability in exported text (`r1`, `r2-r1`), if any.
    pub expr: Option<String>,
    pub update: Update,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PtaCommand {
    pub label: Option<String>,
    pub guard: Guard,
    pub branches: Vec<Branch>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocationVar {
    pub name: String,
    pub max: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PtaModule {
    pub name: String,
    pub location: LocationVar,
    pub clocks: Vec<String>,
    pub flags: Vec<String>,
    pub commands: Vec<PtaCommand>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstValue {
    Ticks(Tick),
    Probability(Prob),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constant {
    pub name: String,
    pub value: ConstValue,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PtaNetwork {
    pub constants: Vec<Constant>,
    pub modules: Vec<PtaModule>,
    pub sync_alphabet: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("name `{0}` is declared more than once")]
    DuplicateName(String),
    #[error("module `{module}`: location {location} is outside 0..{max}")]
    LocationOutOfRange { module: String, location: u32, max: u32 },
    #[error("module `{module}`: unknown clock `{clock}`")]
    UnknownClock { module: String, clock: String },
    #[error("module `{module}`: unknown flag `{flag}`")]
    UnknownFlag { module: String, flag: String },
    #[error("module `{module}`: flag `{flag}` belongs to another module")]
    ForeignFlagUpdate { module: String, flag: String },
    #[error("module `{module}`: unknown constant `{name}`")]
    UnknownConstant { module: String, name: String },
    #[error("module `{module}`: constant `{name}` is {declared}, but used as {used}")]
    ConstantMismatch { module: String, name: String, declared: String, used: String },
    #[error("module `{module}`: command {command} has branch probabilities summing to {sum}")]
    MassNotOne { module: String, command: usize, sum: Prob },
    #[error("module `{module}`: command {command} has a probability outside (0, 1]")]
    BadProbability { module: String, command: usize },
    #[error("module `{module}`: command {command} has no branches")]
    NoBranches { module: String, command: usize },
    #[error("label `{0}` is not in the synchronization alphabet")]
    UnknownLabel(String),
}

impl PtaNetwork {
    /// Builds a network whose alphabet is every label used by a command.
    /// Tick constants are ordered before probability constants.
    pub fn new(mut constants: Vec<Constant>, modules: Vec<PtaModule>) -> Result<Self, NetworkError> {
        constants.sort_by_key(|c| matches!(c.value, ConstValue::Probability(_)));
        let sync_alphabet = modules.iter().flat_map(|m| m.commands.iter().filter_map(|c| c.label.clone())).collect();
        let net = PtaNetwork { constants, modules, sync_alphabet };
        net.validate()?;
        Ok(net)
    }

    pub fn constant(&self, name: &str) -> Option<&ConstValue> {
        self.constants.iter().find(|c| c.name == name).map(|c| &c.value)
    }

    pub fn flag_names(&self) -> impl Iterator<Item = &str> {
        self.modules.iter().flat_map(|m| m.flags.iter().map(String::as_str))
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let mut names = BTreeSet::new();
        let all_names = self.constants.iter().map(|c| &c.name).chain(self.modules.iter().flat_map(|m| {
            std::iter::once(&m.name)
                .chain(std::iter::once(&m.location.name))
                .chain(m.clocks.iter())
                .chain(m.flags.iter())
        }));
        for n in all_names {
            if !names.insert(n.as_str()) {
                return Err(NetworkError::DuplicateName(n.clone()));
            }
        }
        let consts: BTreeMap<&str, &ConstValue> = self.constants.iter().map(|c| (c.name.as_str(), &c.value)).collect();
        let all_flags: BTreeSet<&str> = self.flag_names().collect();
        for m in &self.modules {
            let loc_ok = |l: u32| {
                if l > m.location.max {
                    Err(NetworkError::LocationOutOfRange { module: m.name.clone(), location: l, max: m.location.max })
                } else {
                    Ok(())
                }
            };
            let clock_ok = |c: &String| {
                if m.clocks.contains(c) {
                    Ok(())
                } else {
                    Err(NetworkError::UnknownClock { module: m.name.clone(), clock: c.clone() })
                }
            };
            for (ci, cmd) in m.commands.iter().enumerate() {
                if let Some(l) = &cmd.label {
                    if !self.sync_alphabet.contains(l) {
                        return Err(NetworkError::UnknownLabel(l.clone()));
                    }
                }
                loc_ok(cmd.guard.location)?;
                for cc in &cmd.guard.clocks {
                    clock_ok(&cc.clock)?;
                    if let Some(name) = &cc.bound.constant {
                        match consts.get(name.as_str()) {
                            None => {
                                return Err(NetworkError::UnknownConstant {
                                    module: m.name.clone(),
                                    name: name.clone(),
                                })
                            }
                            Some(ConstValue::Ticks(v)) if *v == cc.bound.value => {}
                            Some(other) => {
                                return Err(NetworkError::ConstantMismatch {
                                    module: m.name.clone(),
                                    name: name.clone(),
                                    declared: describe(other),
                                    used: cc.bound.value.to_string(),
                                })
                            }
                        }
                    }
                }
                for ft in &cmd.guard.flags {
                    if !all_flags.contains(ft.flag.as_str()) {
                        return Err(NetworkError::UnknownFlag { module: m.name.clone(), flag: ft.flag.clone() });
                    }
                }
                if cmd.branches.is_empty() {
                    return Err(NetworkError::NoBranches { module: m.name.clone(), command: ci });
                }
                let mut sum = Prob::zero();
                for b in &cmd.branches {
                    if b.probability.is_zero() || !b.probability.in_unit_interval() {
                        return Err(NetworkError::BadProbability { module: m.name.clone(), command: ci });
                    }
                    sum = &sum + &b.probability;
                    loc_ok(b.update.location)?;
                    for r in &b.update.resets {
                        clock_ok(r)?;
                    }
                    for (f, _) in &b.update.flags {
                        if !m.flags.contains(f) {
                            return Err(if all_flags.contains(f.as_str()) {
                                NetworkError::ForeignFlagUpdate { module: m.name.clone(), flag: f.clone() }
                            } else {
                                NetworkError::UnknownFlag { module: m.name.clone(), flag: f.clone() }
                            });
                        }
                    }
                }
                if !sum.is_one() {
                    return Err(NetworkError::MassNotOne { module: m.name.clone(), command: ci, sum });
                }
            }
        }
        Ok(())
    }
}

fn describe(v: &ConstValue) -> String {
    match v {
        ConstValue::Ticks(t) => t.to_string(),
        ConstValue::Probability(p) => p.to_string(),
    }
}

/// Per clock, one more than the largest constant it is compared against.
/// Valuations above that are indistinguishable, so the digital semantics
/// caps them there.
pub fn saturate_clock_bound(network: &PtaNetwork) -> BTreeMap<String, Tick> {
    let mut out = BTreeMap::new();
    for m in &network.modules {
        for c in &m.clocks {
            let max = m
                .commands
                .iter()
                .flat_map(|cmd| cmd.guard.clocks.iter())
                .filter(|cc| &cc.clock == c)
                .map(|cc| cc.bound.value)
                .max()
                .unwrap_or(0);
            let has_any = m.commands.iter().flat_map(|cmd| cmd.guard.clocks.iter()).any(|cc| &cc.clock == c);
            out.insert(c.clone(), if has_any { max + 1 } else { 1 });
        }
    }
    out
}

impl fmt::Display for Update {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s'={}", self.location)?;
        for r in &self.resets {
            write!(f, " {r}'=0")?;
        }
        for (n, v) in &self.flags {
            write!(f, " {n}'={v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn module(name: &str, clock: &str, bounds: &[Tick]) -> PtaModule {
        let commands = bounds
            .iter()
            .map(|b| PtaCommand {
                label: None,
                guard: Guard {
                    location: 0,
                    clocks: vec![ClockConstraint { clock: clock.into(), cmp: Cmp::Ge, bound: TickBound::literal(*b) }],
                    flags: vec![],
                },
                branches: vec![Branch { probability: Prob::one(), expr: None, update: Update::goto(0) }],
            })
            .collect();
        PtaModule {
            name: name.into(),
            location: LocationVar { name: format!("s_{name}"), max: 0 },
            clocks: vec![clock.into()],
            flags: vec![],
            commands,
        }
    }

    #[test]
    fn bounds() {
        let net = PtaNetwork::new(
            vec![],
            vec![module("a", "x", &[150, 160, 165, 169, 200]), module("b", "y", &[]), module("c", "z", &[7])],
        )
        .unwrap();
        let b = saturate_clock_bound(&net);
        assert_eq!(b["x"], 201);
        assert_eq!(b["y"], 1);
        assert_eq!(b["z"], 8);
    }

    #[test]
    fn detects_bad_mass() {
        let mut m = module("a", "x", &[1]);
        m.commands[0].branches[0].probability = Prob::parse("0.5").unwrap();
        assert!(matches!(PtaNetwork::new(vec![], vec![m]), Err(NetworkError::MassNotOne { .. })));
    }

    #[test]
    fn detects_unknown_clock_and_range() {
        let mut m = module("a", "x", &[1]);
        m.commands[0].guard.clocks[0].clock = "q".into();
        assert!(matches!(PtaNetwork::new(vec![], vec![m]), Err(NetworkError::UnknownClock { .. })));
        let mut m = module("a", "x", &[1]);
        m.commands[0].branches[0].update.location = 3;
        assert!(matches!(PtaNetwork::new(vec![], vec![m]), Err(NetworkError::LocationOutOfRange { .. })));
    }
}
