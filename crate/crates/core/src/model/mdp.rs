//! Digital-clocks expansion of a PTA network into a finite MDP.

use std::collections::VecDeque;

use indexmap::IndexSet;
use thiserror::Error;

use super::expr::{ExprError, StateExpr};
use super::pta::{saturate_clock_bound, Cmp, PtaNetwork};
use crate::prob::Prob;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error(transparent)]
    Network(#[from] super::pta::NetworkError),
    #[error("state space exceeds {0} states")]
    TooManyStates(usize),
    #[error("zero-time cycle through {0} states; time can stop")]
    ZeroTimeCycle(usize),
    #[error("state {state}: action probabilities sum to {sum}")]
    BadDistribution { state: usize, sum: Prob },
    #[error("state {state}: successor {target} out of range")]
    BadSuccessor { state: usize, target: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComposeOptions {
    pub max_states: usize,
}

impl Default for ComposeOptions {
    fn default() -> Self {
        ComposeOptions { max_states: 2_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    /// One time unit passes.
    Tick,
    /// An unlabeled command of one module.
    Local { module: u32 },
    /// Commands sharing a label fire together.
    Sync { label: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdpAction {
    pub kind: ActionKind,
    pub branches: Vec<(Prob, u32)>,
}

impl MdpAction {
    pub fn takes_time(&self) -> bool {
        self.kind == ActionKind::Tick
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitalMdp {
    pub location_vars: Vec<String>,
    pub clock_names: Vec<String>,
    pub clock_bounds: Vec<u32>,
    pub flag_names: Vec<String>,
    pub labels: Vec<String>,
    states: Vec<Box<[u32]>>,
    action_start: Vec<u32>,
    actions: Vec<MdpAction>,
    zero_time_order: Vec<u32>,
}

/// Borrowed view of one state's valuation.
#[derive(Debug, Clone, Copy)]
pub struct StateView<'a> {
    pub locations: &'a [u32],
    pub clocks: &'a [u32],
    pub flags: &'a [u32],
}

struct CCmd {
    module: usize,
    label: Option<u32>,
    clocks: Vec<(usize, Cmp, u32)>,
    flags: Vec<(usize, bool)>,
    branches: Vec<(Prob, CUpd)>,
}

struct CUpd {
    location: u32,
    resets: Vec<usize>,
    flags: Vec<(usize, bool)>,
}

struct Compiled {
    nm: usize,
    nc: usize,
    /// `by_loc[m][l]` lists commands of module `m` at location `l`.
    by_loc: Vec<Vec<Vec<CCmd>>>,
    /// Modules declaring each label.
    participants: Vec<Vec<usize>>,
    clock_owner: Vec<usize>,
    /// `active[m][l][k]`: owned clock `k` of module `m` may still be read from `l`.
    active: Vec<Vec<Vec<bool>>>,
    owned: Vec<Vec<usize>>,
    bounds: Vec<u32>,
}

impl CCmd {
    fn enabled(&self, st: &[u32], nm: usize, nc: usize, delta: u32, bounds: &[u32]) -> bool {
        self.flags.iter().all(|&(f, v)| (st[nm + nc + f] == 1) == v)
            && self.clocks.iter().all(|&(c, cmp, b)| {
                let val = (st[nm + c] + delta).min(bounds[c]);
                cmp.holds(val as u64, b as u64)
            })
    }
}

/// Builds the reachable digital-clocks MDP of `network`.
///
/// Time advances by a global tick. The tick is withheld while some enabled,
/// state-changing command is urgent: it has no clock constraint, or one
/// more tick would disable it. Commands whose every branch leaves the state
/// unchanged are dropped. Clocks saturate one above their largest constant,
/// and clocks that can no longer be read are held at 0.
pub fn compose(network: &PtaNetwork) -> Result<DigitalMdp, ComposeError> {
    compose_with(network, ComposeOptions::default())
}

pub fn compose_with(network: &PtaNetwork, opts: ComposeOptions) -> Result<DigitalMdp, ComposeError> {
    network.validate()?;
    let cp = compile(network);
    let nm = cp.nm;
    let nc = cp.nc;
    let nf: usize = network.modules.iter().map(|m| m.flags.len()).sum();
    let width = nm + nc + nf;

    let mut index: IndexSet<Box<[u32]>> = IndexSet::new();
    index.insert(vec![0; width].into_boxed_slice());
    let mut action_start = vec![0u32];
    let mut actions: Vec<MdpAction> = Vec::new();
    let mut next = 0usize;
    let mut scratch: Vec<MdpAction> = Vec::new();
    while next < index.len() {
        let st: Box<[u32]> = index[next].clone();
        scratch.clear();
        let mut urgent = false;

        let emit = |kind: ActionKind,
                    parts: &[&CCmd],
                    index: &mut IndexSet<Box<[u32]>>,
                    scratch: &mut Vec<MdpAction>|
         -> Result<bool, ComposeError> {
            let mut combos: Vec<(Prob, Vec<u32>)> = vec![(Prob::one(), st.to_vec())];
            for cmd in parts {
                let mut out = Vec::with_capacity(combos.len() * cmd.branches.len());
                for (p, s) in &combos {
                    for (q, u) in &cmd.branches {
                        let mut s2 = s.clone();
                        apply(&mut s2, u, nm, nc, cmd.module);
                        out.push((p * q, s2));
                    }
                }
                combos = out;
            }
            let mut branches: Vec<(Prob, u32)> = Vec::new();
            for (p, mut s) in combos {
                normalize(&mut s, &cp);
                let (id, _) = index.insert_full(s.into_boxed_slice());
                if index.len() > opts.max_states {
                    return Err(ComposeError::TooManyStates(opts.max_states));
                }
                match branches.iter_mut().find(|(_, t)| *t as usize == id) {
                    Some(b) => b.0 = &b.0 + &p,
                    None => branches.push((p, id as u32)),
                }
            }
            if branches.len() == 1 && branches[0].1 as usize == next {
                return Ok(false);
            }
            scratch.push(MdpAction { kind, branches });
            let timed = parts.iter().any(|c| !c.clocks.is_empty());
            let survives = parts.iter().all(|c| c.enabled(&st, nm, nc, 1, &cp.bounds));
            Ok(!timed || !survives)
        };

        for m in 0..nm {
            for cmd in &cp.by_loc[m][st[m] as usize] {
                if cmd.label.is_none() && cmd.enabled(&st, nm, nc, 0, &cp.bounds) {
                    urgent |= emit(ActionKind::Local { module: m as u32 }, &[cmd], &mut index, &mut scratch)?;
                }
            }
        }
        for (label, mods) in cp.participants.iter().enumerate() {
            let choices: Vec<Vec<&CCmd>> = mods
                .iter()
                .map(|&m| {
                    cp.by_loc[m][st[m] as usize]
                        .iter()
                        .filter(|c| c.label == Some(label as u32) && c.enabled(&st, nm, nc, 0, &cp.bounds))
                        .collect()
                })
                .collect();
            if choices.iter().any(Vec::is_empty) {
                continue;
            }
            let mut pick = vec![0usize; choices.len()];
            loop {
                let parts: Vec<&CCmd> = pick.iter().zip(&choices).map(|(&i, c)| c[i]).collect();
                urgent |= emit(ActionKind::Sync { label: label as u32 }, &parts, &mut index, &mut scratch)?;
                let mut k = 0;
                while k < pick.len() {
                    pick[k] += 1;
                    if pick[k] < choices[k].len() {
                        break;
                    }
                    pick[k] = 0;
                    k += 1;
                }
                if k == pick.len() {
                    break;
                }
            }
        }
        if !urgent {
            let mut s = st.to_vec();
            for c in 0..nc {
                let m = cp.clock_owner[c];
                if cp.active[m][s[m] as usize][local_clock(&cp, c)] {
                    s[nm + c] = (s[nm + c] + 1).min(cp.bounds[c]);
                }
            }
            let (id, _) = index.insert_full(s.into_boxed_slice());
            if index.len() > opts.max_states {
                return Err(ComposeError::TooManyStates(opts.max_states));
            }
            scratch.insert(0, MdpAction { kind: ActionKind::Tick, branches: vec![(Prob::one(), id as u32)] });
        }
        actions.append(&mut scratch);
        action_start.push(actions.len() as u32);
        next += 1;
    }

    let states: Vec<Box<[u32]>> = index.into_iter().collect();
    let zero_time_order = zero_time_order(&action_start, &actions, states.len())?;
    let labels = label_table(network);
    Ok(DigitalMdp {
        location_vars: network.modules.iter().map(|m| m.location.name.clone()).collect(),
        clock_names: network.modules.iter().flat_map(|m| m.clocks.iter().cloned()).collect(),
        clock_bounds: cp.bounds,
        flag_names: network.modules.iter().flat_map(|m| m.flags.iter().cloned()).collect(),
        labels,
        states,
        action_start,
        actions,
        zero_time_order,
    })
}

fn local_clock(cp: &Compiled, c: usize) -> usize {
    cp.owned[cp.clock_owner[c]].iter().position(|&k| k == c).unwrap()
}

fn apply(s: &mut [u32], u: &CUpd, nm: usize, nc: usize, module: usize) {
    s[module] = u.location;
    for &r in &u.resets {
        s[nm + r] = 0;
    }
    for &(f, v) in &u.flags {
        s[nm + nc + f] = v as u32;
    }
}

fn normalize(s: &mut [u32], cp: &Compiled) {
    for m in 0..cp.nm {
        let loc = s[m] as usize;
        for (k, &c) in cp.owned[m].iter().enumerate() {
            if !cp.active[m][loc][k] {
                s[cp.nm + c] = 0;
            }
        }
    }
}

fn label_table(network: &PtaNetwork) -> Vec<String> {
    network.sync_alphabet.iter().cloned().collect()
}

fn compile(network: &PtaNetwork) -> Compiled {
    let bounds_map = saturate_clock_bound(network);
    let labels = label_table(network);
    let clock_names: Vec<&String> = network.modules.iter().flat_map(|m| m.clocks.iter()).collect();
    let flag_names: Vec<&String> = network.modules.iter().flat_map(|m| m.flags.iter()).collect();
    let clock_idx = |n: &str| clock_names.iter().position(|c| *c == n).unwrap();
    let flag_idx = |n: &str| flag_names.iter().position(|f| *f == n).unwrap();
    let label_idx = |n: &str| labels.iter().position(|l| l == n).unwrap() as u32;

    let nm = network.modules.len();
    let nc = clock_names.len();
    let mut by_loc = Vec::with_capacity(nm);
    let mut participants = vec![Vec::new(); labels.len()];
    let mut clock_owner = vec![0; nc];
    let mut owned = Vec::with_capacity(nm);
    let mut active = Vec::with_capacity(nm);
    for (mi, m) in network.modules.iter().enumerate() {
        let nloc = m.location.max as usize + 1;
        let mut locs: Vec<Vec<CCmd>> = (0..nloc).map(|_| Vec::new()).collect();
        for cmd in &m.commands {
            let label = cmd.label.as_deref().map(label_idx);
            if let Some(l) = label {
                if !participants[l as usize].contains(&mi) {
                    participants[l as usize].push(mi);
                }
            }
            locs[cmd.guard.location as usize].push(CCmd {
                module: mi,
                label,
                clocks: cmd
                    .guard
                    .clocks
                    .iter()
                    .map(|cc| (clock_idx(&cc.clock), cc.cmp, cc.bound.value as u32))
                    .collect(),
                flags: cmd.guard.flags.iter().map(|ft| (flag_idx(&ft.flag), ft.value)).collect(),
                branches: cmd
                    .branches
                    .iter()
                    .map(|b| {
                        (
                            b.probability.clone(),
                            CUpd {
                                location: b.update.location,
                                resets: b.update.resets.iter().map(|r| clock_idx(r)).collect(),
                                flags: b.update.flags.iter().map(|(f, v)| (flag_idx(f), *v)).collect(),
                            },
                        )
                    })
                    .collect(),
            });
        }
        let mine: Vec<usize> = m.clocks.iter().map(|c| clock_idx(c)).collect();
        for &c in &mine {
            clock_owner[c] = mi;
        }
        // Fixpoint: a clock is active where some command reads it, or where
        // some branch moves to an active location without resetting it.
        let mut act = vec![vec![false; mine.len()]; nloc];
        loop {
            let mut changed = false;
            for l in 0..nloc {
                for (k, &c) in mine.iter().enumerate() {
                    if act[l][k] {
                        continue;
                    }
                    let live = locs[l].iter().any(|cmd| {
                        cmd.clocks.iter().any(|&(cc, _, _)| cc == c)
                            || cmd.branches.iter().any(|(_, u)| !u.resets.contains(&c) && act[u.location as usize][k])
                    });
                    if live {
                        act[l][k] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        by_loc.push(locs);
        owned.push(mine);
        active.push(act);
    }
    let bounds = clock_names.iter().map(|c| bounds_map[c.as_str()] as u32).collect();
    Compiled { nm, nc, by_loc, participants, clock_owner, active, owned, bounds }
}

/// Kahn order of the zero-time part of the graph; fails on a cycle.
fn zero_time_order(action_start: &[u32], actions: &[MdpAction], n: usize) -> Result<Vec<u32>, ComposeError> {
    let mut indeg = vec![0u32; n];
    for s in 0..n {
        for a in &actions[action_start[s] as usize..action_start[s + 1] as usize] {
            if !a.takes_time() {
                for &(_, t) in &a.branches {
                    indeg[t as usize] += 1;
                }
            }
        }
    }
    let mut queue: VecDeque<u32> = (0..n as u32).filter(|&s| indeg[s as usize] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(s) = queue.pop_front() {
        order.push(s);
        let s = s as usize;
        for a in &actions[action_start[s] as usize..action_start[s + 1] as usize] {
            if !a.takes_time() {
                for &(_, t) in &a.branches {
                    indeg[t as usize] -= 1;
                    if indeg[t as usize] == 0 {
                        queue.push_back(t);
                    }
                }
            }
        }
    }
    if order.len() < n {
        return Err(ComposeError::ZeroTimeCycle(n - order.len()));
    }
    Ok(order)
}

impl DigitalMdp {
    /// An MDP given directly by its actions. Each state carries flag values
    /// so targets can be named; there are no locations or clocks.
    pub fn from_explicit(
        flag_names: Vec<String>,
        flags: Vec<Vec<bool>>,
        state_actions: Vec<Vec<MdpAction>>,
    ) -> Result<Self, ComposeError> {
        let n = state_actions.len();
        let mut action_start = vec![0u32];
        let mut actions = Vec::new();
        for (s, acts) in state_actions.into_iter().enumerate() {
            for a in &acts {
                let sum: Prob = a.branches.iter().map(|(p, _)| p.clone()).sum();
                if !sum.is_one() {
                    return Err(ComposeError::BadDistribution { state: s, sum });
                }
                if let Some(&(_, t)) = a.branches.iter().find(|(_, t)| *t as usize >= n) {
                    return Err(ComposeError::BadSuccessor { state: s, target: t as usize });
                }
            }
            actions.extend(acts);
            action_start.push(actions.len() as u32);
        }
        let states =
            flags.into_iter().map(|f| f.into_iter().map(u32::from).collect::<Vec<_>>().into_boxed_slice()).collect();
        let zero_time_order = zero_time_order(&action_start, &actions, n)?;
        Ok(DigitalMdp {
            location_vars: vec![],
            clock_names: vec![],
            clock_bounds: vec![],
            flag_names,
            labels: vec![],
            states,
            action_start,
            actions,
            zero_time_order,
        })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn state(&self, s: usize) -> StateView<'_> {
        let st = &self.states[s];
        let nm = self.location_vars.len();
        let nc = self.clock_names.len();
        StateView { locations: &st[..nm], clocks: &st[nm..nm + nc], flags: &st[nm + nc..] }
    }

    pub fn actions(&self, s: usize) -> &[MdpAction] {
        &self.actions[self.action_start[s] as usize..self.action_start[s + 1] as usize]
    }

    /// States ordered so that every zero-time action leads forward.
    pub fn zero_time_order(&self) -> &[u32] {
        &self.zero_time_order
    }

    /// States with no action at all.
    pub fn deadlocks(&self) -> usize {
        (0..self.num_states()).filter(|&s| self.actions(s).is_empty()).count()
    }

    /// Evaluates `expr` in every state.
    pub fn eval(&self, expr: &StateExpr) -> Result<Vec<bool>, ExprError> {
        let compiled = self.compile_expr(expr)?;
        Ok((0..self.num_states()).map(|s| compiled.holds(&self.states[s])).collect())
    }

    fn compile_expr(&self, e: &StateExpr) -> Result<CExpr, ExprError> {
        let nm = self.location_vars.len();
        let nc = self.clock_names.len();
        Ok(match e {
            StateExpr::Const(b) => CExpr::Const(*b),
            StateExpr::Flag(f) => {
                let i = self.flag_names.iter().position(|n| n == f).ok_or_else(|| ExprError::UnknownFlag(f.clone()))?;
                CExpr::Eq(nm + nc + i, 1)
            }
            StateExpr::At(v, l) => {
                let i = self
                    .location_vars
                    .iter()
                    .position(|n| n == v)
                    .ok_or_else(|| ExprError::UnknownLocation(v.clone()))?;
                CExpr::Eq(i, *l)
            }
            StateExpr::Not(a) => CExpr::Not(Box::new(self.compile_expr(a)?)),
            StateExpr::And(a, b) => CExpr::And(Box::new(self.compile_expr(a)?), Box::new(self.compile_expr(b)?)),
            StateExpr::Or(a, b) => CExpr::Or(Box::new(self.compile_expr(a)?), Box::new(self.compile_expr(b)?)),
        })
    }

    /// Human-readable listing, one state per line.
    pub fn listing(&self) -> String {
        let mut out = String::new();
        for s in 0..self.num_states() {
            let v = self.state(s);
            out.push_str(&format!("{s}: loc={:?} clk={:?} flags={:?}\n", v.locations, v.clocks, v.flags));
            for a in self.actions(s) {
                let kind = match a.kind {
                    ActionKind::Tick => "tick".to_string(),
                    ActionKind::Local { module } => format!("[] of {}", self.location_vars[module as usize]),
                    ActionKind::Sync { label } => format!("[{}]", self.labels[label as usize]),
                };
                let br: Vec<String> = a.branches.iter().map(|(p, t)| format!("{p}:{t}")).collect();
                out.push_str(&format!("    {kind} -> {}\n", br.join(" + ")));
            }
        }
        out
    }
}

enum CExpr {
    Const(bool),
    Eq(usize, u32),
    Not(Box<CExpr>),
    And(Box<CExpr>, Box<CExpr>),
    Or(Box<CExpr>, Box<CExpr>),
}

impl CExpr {
    fn holds(&self, st: &[u32]) -> bool {
        match self {
            CExpr::Const(b) => *b,
            CExpr::Eq(i, v) => st[*i] == *v,
            CExpr::Not(a) => !a.holds(st),
            CExpr::And(a, b) => a.holds(st) && b.holds(st),
            CExpr::Or(a, b) => a.holds(st) || b.holds(st),
        }
    }
}
