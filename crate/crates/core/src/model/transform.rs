//! PRTESM to PTA generation.

use std::collections::BTreeMap;

use thiserror::Error;

use super::prtesm::{validate_prtesm, Prtesm, PrtesmIssue, INITIAL};
use super::pta::{
    Branch, ClockConstraint, Cmp, ConstValue, Constant, FlagTest, Guard, LocationVar, PtaCommand, PtaModule, TickBound,
    Update,
};
use crate::distributions::DelayCdf;
use crate::prob::Prob;

/// How each probabilistic branch constrains its completion time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GuardStyle {
    /// Branch `i` completes anywhere in `[tick_{i-1}, tick_i]` (`c <= tick_1`
    /// for the first). The scheduler picks the instant.
    #[default]
    Interval,
    /// Branch `i` completes exactly at `tick_i`.
    Knot,
}

impl GuardStyle {
    pub fn keyword(self) -> &'static str {
        match self {
            GuardStyle::Interval => "interval",
            GuardStyle::Knot => "knot",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformOptions {
    /// Short module id; names become `s_{id}`, `c_{id}`, `flag_{id}`.
    pub id: String,
    pub guard_style: GuardStyle,
    /// Sync label per comm action. Defaults to the sanitized pin name.
    pub labels: BTreeMap<String, String>,
    /// Flags that must all be true before a comm action may start.
    pub arm_on: Vec<String>,
    /// Label carried by the completion commands.
    pub done_label: Option<String>,
    /// Label of the start command.
    pub start_label: String,
}

impl TransformOptions {
    pub fn new(id: impl Into<String>) -> Self {
        TransformOptions {
            id: id.into(),
            guard_style: GuardStyle::default(),
            labels: BTreeMap::new(),
            arm_on: Vec::new(),
            done_label: None,
            start_label: "i".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transformed {
    pub module: PtaModule,
    pub constants: Vec<Constant>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("machine `{machine}` is malformed: {}", issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidMachine { machine: String, issues: Vec<PrtesmIssue> },
    #[error("no communication actions selected for `{0}`")]
    NoCommActions(String),
    #[error("`{pin}` is not a trigger of machine `{machine}`")]
    NotATrigger { machine: String, pin: String },
    #[error("no delay distribution for communication action `{0}`")]
    MissingDistribution(String),
    #[error("communication action `{0}` must be a self-transition")]
    NotSelfLoop(String),
    #[error("communication actions of `{0}` leave different states")]
    InconsistentSource(String),
    #[error("communication action `{0}` leaves the initial state")]
    FromInitial(String),
}

/// Maps any character outside `[A-Za-z0-9_]` to `_`.
pub fn sanitize(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
    if s.starts_with(|c: char| c.is_ascii_digit()) {
        format!("_{s}")
    } else {
        s
    }
}

pub fn module_name(id: &str, machine: &str) -> String {
    format!("{}_{}_prtesm", sanitize(id), sanitize(machine))
}

pub fn location_var(id: &str) -> String {
    format!("s_{}", sanitize(id))
}

pub fn clock_name(id: &str) -> String {
    format!("c_{}", sanitize(id))
}

pub fn flag_name(id: &str) -> String {
    format!("flag_{}", sanitize(id))
}

/// Keeps only the communication actions of `m` and expands each into a
/// probabilistic delay.
///
/// Location layout: 0 initial, 1 armed, then per distinct distribution a
/// pending location and its branch locations (none for a point mass), then
/// the terminal location that raises the flag.
pub fn prtesm_to_pta(
    m: &Prtesm,
    comm_actions: &[String],
    dists: &BTreeMap<String, DelayCdf>,
    opts: &TransformOptions,
) -> Result<Transformed, TransformError> {
    let issues = validate_prtesm(m);
    if !issues.is_empty() {
        return Err(TransformError::InvalidMachine { machine: m.name.clone(), issues });
    }
    if comm_actions.is_empty() {
        return Err(TransformError::NoCommActions(m.name.clone()));
    }
    let mut armed_state: Option<&str> = None;
    for pin in comm_actions {
        let trs: Vec<_> = m.transitions.iter().filter(|t| t.pin() == Some(pin.as_str())).collect();
        if trs.is_empty() {
            return Err(TransformError::NotATrigger { machine: m.name.clone(), pin: pin.clone() });
        }
        if !dists.contains_key(pin) {
            return Err(TransformError::MissingDistribution(pin.clone()));
        }
        for t in trs {
            if t.source != t.target {
                return Err(TransformError::NotSelfLoop(pin.clone()));
            }
            if t.source == INITIAL {
                return Err(TransformError::FromInitial(pin.clone()));
            }
            match armed_state {
                None => armed_state = Some(&t.source),
                Some(s) if s == t.source => {}
                Some(_) => return Err(TransformError::InconsistentSource(m.name.clone())),
            }
        }
    }

    let id = sanitize(&opts.id);
    let s_var = location_var(&id);
    let clock = clock_name(&id);
    let flag = flag_name(&id);

    // Distinct distributions in order of first use.
    let mut groups: Vec<(&DelayCdf, Vec<&String>)> = Vec::new();
    for pin in comm_actions {
        let d = &dists[pin];
        match groups.iter_mut().find(|(g, _)| *g == d) {
            Some((_, pins)) => pins.push(pin),
            None => groups.push((d, vec![pin])),
        }
    }

    let mut constants = Vec::new();
    let mut commands = vec![PtaCommand {
        label: Some(opts.start_label.clone()),
        guard: Guard::at(0),
        branches: vec![one(Update::goto(1))],
    }];
    let mut completions = Vec::new();
    let mut next_loc = 2u32;
    let mut knot_no = 0usize;
    for (cdf, pins) in &groups {
        let pending = next_loc;
        next_loc += 1;
        for pin in pins {
            let label = opts.labels.get(*pin).cloned().unwrap_or_else(|| sanitize(pin));
            commands.push(PtaCommand {
                label: Some(label),
                guard: Guard {
                    location: 1,
                    clocks: vec![],
                    flags: opts.arm_on.iter().map(|f| FlagTest { flag: f.clone(), value: true }).collect(),
                },
                branches: vec![one(Update { location: pending, resets: vec![clock.clone()], flags: vec![] })],
            });
        }

        // (probability, its spelling, guard) per non-empty knot.
        let mut parts: Vec<(Prob, String, Vec<ClockConstraint>)> = Vec::new();
        let mut prev: Option<(TickBound, Prob, String)> = None;
        for (t, cum) in cdf.points() {
            knot_no += 1;
            let tname = format!("{id}_{knot_no}");
            let rname = format!("{id}_r{knot_no}");
            constants.push(Constant { name: tname.clone(), value: ConstValue::Ticks(*t) });
            constants.push(Constant { name: rname.clone(), value: ConstValue::Probability(cum.clone()) });
            let here = TickBound::named(*t, tname);
            let (mass, expr) = match &prev {
                None => (cum.clone(), rname.clone()),
                Some((_, pc, pn)) => (cum - pc, format!("{rname}-{pn}")),
            };
            if !mass.is_zero() {
                let upper = ClockConstraint { clock: clock.clone(), cmp: Cmp::Le, bound: here.clone() };
                let guard = match (opts.guard_style, &prev) {
                    (GuardStyle::Knot, _) => {
                        vec![ClockConstraint { clock: clock.clone(), cmp: Cmp::Ge, bound: here.clone() }, upper]
                    }
                    (GuardStyle::Interval, None) => vec![upper],
                    (GuardStyle::Interval, Some((lo, _, _))) => {
                        vec![ClockConstraint { clock: clock.clone(), cmp: Cmp::Ge, bound: lo.clone() }, upper]
                    }
                };
                parts.push((mass, expr, guard));
            }
            prev = Some((here, cum.clone(), rname));
        }

        if parts.len() == 1 {
            completions.push((pending, parts.pop().unwrap().2));
        } else {
            let mut branches = Vec::new();
            for (mass, expr, guard) in parts {
                let loc = next_loc;
                next_loc += 1;
                branches.push(Branch { probability: mass, expr: Some(expr), update: Update::goto(loc) });
                completions.push((loc, guard));
            }
            commands.push(PtaCommand { label: None, guard: Guard::at(pending), branches });
        }
    }
    let terminal = next_loc;
    for (loc, clocks) in completions {
        commands.push(PtaCommand {
            label: opts.done_label.clone(),
            guard: Guard { location: loc, clocks, flags: vec![] },
            branches: vec![one(Update::goto(terminal))],
        });
    }
    commands.push(PtaCommand {
        label: None,
        guard: Guard::at(terminal),
        branches: vec![one(Update { location: terminal, resets: vec![], flags: vec![(flag.clone(), true)] })],
    });

    let module = PtaModule {
        name: module_name(&id, &m.name),
        location: LocationVar { name: s_var, max: terminal },
        clocks: vec![clock],
        flags: vec![flag],
        commands,
    };
    Ok(Transformed { module, constants })
}

fn one(update: Update) -> Branch {
    Branch { probability: Prob::one(), expr: None, update }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::table1;
    use crate::model::prtesm::{Direction, EsmTransition, ParameterEvent, Trigger};

    fn on(src: &str, dst: &str, pin: &str) -> EsmTransition {
        EsmTransition {
            source: src.into(),
            target: dst.into(),
            trigger: Trigger::Parameter(ParameterEvent { pin: pin.into(), direction: Direction::ToBlock }),
            resets: vec![],
            guard: None,
            delay: None,
        }
    }

    fn single(pin: &str) -> Prtesm {
        Prtesm {
            name: "Single".into(),
            states: vec!["initial".into(), "active".into()],
            clocks: vec![],
            transitions: vec![on("initial", "active", "start"), on("active", "active", pin)],
        }
    }

    #[test]
    fn point_mass_has_four_locations() {
        let d = BTreeMap::from([("go".to_string(), DelayCdf::from_strs(&[(10, "1")]))]);
        let t = prtesm_to_pta(&single("go"), &["go".into()], &d, &TransformOptions::new("x")).unwrap();
        assert_eq!(t.module.location.max, 3);
        let probabilistic: Vec<_> = t.module.commands.iter().filter(|c| c.branches.len() > 1).collect();
        assert!(probabilistic.is_empty());
        assert!(t.module.commands.iter().all(|c| c.branches.len() == 1 && c.branches[0].probability.is_one()));
    }

    #[test]
    fn robot_masses_and_guards() {
        let d = BTreeMap::from([("go".to_string(), table1::robot_processing())]);
        let mut opts = TransformOptions::new("ro");
        opts.guard_style = GuardStyle::Interval;
        let t = prtesm_to_pta(&single("go"), &["go".into()], &d, &opts).unwrap();
        let branch = t.module.commands.iter().find(|c| c.branches.len() == 5).unwrap();
        let masses: Vec<String> = branch.branches.iter().map(|b| b.probability.to_string()).collect();
        assert_eq!(masses, ["0.05", "0.85", "0.05", "0.049995", "0.000005"]);
        let uppers: Vec<u64> = t
            .module
            .commands
            .iter()
            .filter_map(|c| c.guard.clocks.iter().find(|cc| cc.cmp == Cmp::Le).map(|cc| cc.bound.value))
            .collect();
        assert_eq!(uppers, [1500, 1590, 1600, 1650, 1700]);
    }

    #[test]
    fn errors() {
        let d = BTreeMap::new();
        let e = prtesm_to_pta(&single("go"), &["go".into()], &d, &TransformOptions::new("x")).unwrap_err();
        assert_eq!(e, TransformError::MissingDistribution("go".into()));
        let e = prtesm_to_pta(&single("go"), &["nope".into()], &d, &TransformOptions::new("x")).unwrap_err();
        assert!(matches!(e, TransformError::NotATrigger { .. }));
    }

    #[test]
    fn sanitizing() {
        assert_eq!(sanitize("Control Unit"), "Control_Unit");
        assert_eq!(module_name("c2", "Control Unit"), "c2_Control_Unit_prtesm");
        assert_eq!(sanitize("2x"), "_2x");
    }
}
