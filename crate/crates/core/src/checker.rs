//! Time-bounded reachability on digital-clocks MDPs.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::distributions::Tick;
use crate::model::{DigitalMdp, ExprError, StateExpr};
use crate::prob::Weight;

pub const HORIZON_CAP_VAR: &str = "PRTSPACE_HORIZON_CAP";
pub const DEFAULT_HORIZON_CAP: Tick = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Max,
    Min,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Max => "max",
            Mode::Min => "min",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachabilityQuery {
    pub target: StateExpr,
    pub bound: Tick,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilityResult<W> {
    pub probability: W,
    pub iterations: u64,
    pub states_explored: usize,
}

/// Mass of `(from, to]`; the first bin runs from 0 and includes it.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityBin<W> {
    pub from: Option<Tick>,
    pub to: Tick,
    pub mass: W,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityResult<W> {
    pub grid: Vec<(Tick, W)>,
    pub density: Vec<DensityBin<W>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("time bound {bound} exceeds the horizon cap {cap}")]
    HorizonOverflow { bound: Tick, cap: Tick },
    #[error(transparent)]
    Target(#[from] ExprError),
    #[error("grid must be strictly increasing (at position {0})")]
    UnsortedGrid(usize),
    #[error("grid is empty")]
    EmptyGrid,
}

/// Reads the horizon cap from the environment.
pub fn horizon_cap() -> Tick {
    std::env::var(HORIZON_CAP_VAR).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_HORIZON_CAP)
}

/// Value iteration over remaining time. Entry `n` of the result is the
/// optimal probability of reaching the target from the initial state within
/// `n` ticks, for `n = 0..=horizon`.
pub struct ValueIteration<'a, W> {
    mdp: &'a DigitalMdp,
    target: Vec<bool>,
    order: Vec<u32>,
    /// Per live state: range into `acts`.
    starts: Vec<(u32, u32)>,
    acts: Vec<(bool, u32, u32)>,
    branches: Vec<(W, u32)>,
    /// Positions in `order` of live states reading each state through a tick.
    tick_preds: Vec<Vec<u32>>,
    /// Same, through a zero-time action.
    zero_preds: Vec<Vec<u32>>,
}

impl<'a, W: Weight> ValueIteration<'a, W> {
    pub fn new(mdp: &'a DigitalMdp, target: &StateExpr) -> Result<Self, CheckError> {
        let target = mdp.eval(target)?;
        Ok(Self::from_target(mdp, target))
    }

    pub fn from_target(mdp: &'a DigitalMdp, target: Vec<bool>) -> Self {
        let n = mdp.num_states();
        // States that cannot reach the target keep value 0 and are skipped.
        let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
        for s in 0..n {
            for a in mdp.actions(s) {
                for &(_, t) in &a.branches {
                    preds[t as usize].push(s as u32);
                }
            }
        }
        let mut reach = target.clone();
        let mut queue: VecDeque<usize> = (0..n).filter(|&s| target[s]).collect();
        while let Some(t) = queue.pop_front() {
            for &s in &preds[t] {
                if !reach[s as usize] {
                    reach[s as usize] = true;
                    queue.push_back(s as usize);
                }
            }
        }
        let order: Vec<u32> =
            mdp.zero_time_order().iter().rev().copied().filter(|&s| reach[s as usize] && !target[s as usize]).collect();
        let mut starts = vec![(0, 0); n];
        let mut acts = Vec::new();
        let mut branches = Vec::new();
        let mut tick_preds: Vec<Vec<u32>> = vec![Vec::new(); n];
        let mut zero_preds: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (pos, &s) in order.iter().enumerate() {
            let a0 = acts.len() as u32;
            for a in mdp.actions(s as usize) {
                let b0 = branches.len() as u32;
                for (p, t) in &a.branches {
                    if reach[*t as usize] {
                        branches.push((W::from_prob(p), *t));
                        let preds = if a.takes_time() { &mut tick_preds } else { &mut zero_preds };
                        let list = &mut preds[*t as usize];
                        if list.last() != Some(&(pos as u32)) {
                            list.push(pos as u32);
                        }
                    }
                }
                acts.push((a.takes_time(), b0, branches.len() as u32));
            }
            starts[s as usize] = (a0, acts.len() as u32);
        }
        ValueIteration { mdp, target, order, starts, acts, branches, tick_preds, zero_preds }
    }

    /// States whose value is actually iterated.
    pub fn live_states(&self) -> usize {
        self.order.len()
    }

    pub fn curve(&self, horizon: Tick, mode: Mode) -> Vec<W> {
        let init = self.mdp.initial();
        if self.target[init] {
            return vec![W::one(); horizon as usize + 1];
        }
        let n = self.mdp.num_states();
        // `cur` is updated in place during a sweep; `prev` holds the values
        // one tick earlier and is only touched where something changed.
        let mut cur: Vec<W> = self.target.iter().map(|&t| if t { W::one() } else { W::zero() }).collect();
        let mut prev = cur.clone();
        let mut stamp = vec![u64::MAX; n];
        let mut heap: BinaryHeap<Reverse<u32>> = BinaryHeap::new();
        let mut changed: Vec<u32> = Vec::new();
        let mut out = Vec::with_capacity(horizon as usize + 1);
        for step in 0..=horizon {
            let seeds: Vec<u32> = if step <= 1 {
                (0..self.order.len() as u32).collect()
            } else {
                changed.iter().flat_map(|&t| self.tick_preds[t as usize].iter().copied()).collect()
            };
            for pos in seeds {
                let s = self.order[pos as usize] as usize;
                if stamp[s] != step {
                    stamp[s] = step;
                    heap.push(Reverse(pos));
                }
            }
            changed.clear();
            while let Some(Reverse(pos)) = heap.pop() {
                let s = self.order[pos as usize] as usize;
                let v = self.bellman(s, step, mode, &prev, &cur);
                if step == 0 || v != cur[s] {
                    cur[s] = v;
                    changed.push(s as u32);
                    for &q in &self.zero_preds[s] {
                        let qs = self.order[q as usize] as usize;
                        if stamp[qs] != step {
                            stamp[qs] = step;
                            heap.push(Reverse(q));
                        }
                    }
                }
            }
            for &s in &changed {
                prev[s as usize] = cur[s as usize].clone();
            }
            out.push(cur[init].clone());
        }
        out
    }

    fn bellman(&self, s: usize, step: Tick, mode: Mode, prev: &[W], cur: &[W]) -> W {
        let (a0, a1) = self.starts[s];
        let mut best: Option<W> = None;
        for &(tick, b0, b1) in &self.acts[a0 as usize..a1 as usize] {
            let v = if tick && step == 0 {
                W::zero()
            } else {
                let src = if tick { prev } else { cur };
                let mut acc = W::zero();
                for (w, t) in &self.branches[b0 as usize..b1 as usize] {
                    acc = acc.add(&w.mul(&src[*t as usize]));
                }
                acc
            };
            best = Some(match best {
                None => v,
                Some(b) => pick(mode, b, v),
            });
        }
        best.unwrap_or_else(W::zero)
    }
}

fn pick<W: Weight>(mode: Mode, a: W, b: W) -> W {
    let b_better = match mode {
        Mode::Max => b > a,
        Mode::Min => b < a,
    };
    if b_better {
        b
    } else {
        a
    }
}

fn check_cap(bound: Tick, cap: Tick) -> Result<(), CheckError> {
    if bound > cap {
        Err(CheckError::HorizonOverflow { bound, cap })
    } else {
        Ok(())
    }
}

/// `P_max` or `P_min` of reaching `q.target` within `q.bound` ticks.
pub fn check_bounded_reachability<W: Weight>(
    mdp: &DigitalMdp,
    q: &ReachabilityQuery,
) -> Result<ReachabilityResult<W>, CheckError> {
    check_bounded_reachability_capped(mdp, q, horizon_cap())
}

pub fn check_bounded_reachability_capped<W: Weight>(
    mdp: &DigitalMdp,
    q: &ReachabilityQuery,
    cap: Tick,
) -> Result<ReachabilityResult<W>, CheckError> {
    check_cap(q.bound, cap)?;
    let vi = ValueIteration::<W>::new(mdp, &q.target)?;
    let mut curve = vi.curve(q.bound, q.mode);
    Ok(ReachabilityResult {
        probability: curve.pop().expect("non-empty curve"),
        iterations: q.bound + 1,
        states_explored: mdp.num_states(),
    })
}

/// Cumulative values at each grid point and their first differences. A
/// single pass up to the last grid point serves every point.
pub fn density_sweep<W: Weight>(
    mdp: &DigitalMdp,
    target: &StateExpr,
    grid: &[Tick],
    mode: Mode,
) -> Result<DensityResult<W>, CheckError> {
    if grid.is_empty() {
        return Err(CheckError::EmptyGrid);
    }
    if let Some(i) = grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(CheckError::UnsortedGrid(i + 1));
    }
    let last = *grid.last().unwrap();
    check_cap(last, horizon_cap())?;
    let vi = ValueIteration::<W>::new(mdp, target)?;
    let curve = vi.curve(last, mode);
    Ok(density_from_curve(&curve, grid))
}

pub fn density_from_curve<W: Weight>(curve: &[W], grid: &[Tick]) -> DensityResult<W> {
    let mut out = DensityResult { grid: Vec::new(), density: Vec::new() };
    let mut prev: Option<(Tick, W)> = None;
    for &t in grid {
        let c = curve[t as usize].clone();
        let (from, mass) = match &prev {
            None => (None, c.clone()),
            Some((pt, pc)) => (Some(*pt), c.sub(pc)),
        };
        out.density.push(DensityBin { from, to: t, mass });
        out.grid.push((t, c.clone()));
        prev = Some((t, c));
    }
    out
}

/// Both scheduler extremes for one bound.
pub fn min_max_gap<W: Weight>(mdp: &DigitalMdp, target: &StateExpr, bound: Tick) -> Result<(W, W), CheckError> {
    check_cap(bound, horizon_cap())?;
    let vi = ValueIteration::<W>::new(mdp, target)?;
    let min = vi.curve(bound, Mode::Min).pop().unwrap();
    let max = vi.curve(bound, Mode::Max).pop().unwrap();
    Ok((min, max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActionKind, MdpAction};
    use crate::prob::Prob;

    fn p(s: &str) -> Prob {
        Prob::parse(s).unwrap()
    }

    fn tick(branches: Vec<(Prob, u32)>) -> MdpAction {
        MdpAction { kind: ActionKind::Tick, branches }
    }

    fn step(to: u32) -> MdpAction {
        MdpAction { kind: ActionKind::Local { module: 0 }, branches: vec![(Prob::one(), to)] }
    }

    #[test]
    fn three_state_branch() {
        // 0 --tick--> {0.3: target 1, 0.7: sink 2}
        let mdp = DigitalMdp::from_explicit(
            vec!["goal".into()],
            vec![vec![false], vec![true], vec![false]],
            vec![
                vec![tick(vec![(p("0.3"), 1), (p("0.7"), 2)])],
                vec![tick(vec![(Prob::one(), 1)])],
                vec![tick(vec![(Prob::one(), 2)])],
            ],
        )
        .unwrap();
        let vi = ValueIteration::<Prob>::new(&mdp, &StateExpr::flag("goal")).unwrap();
        assert_eq!(vi.curve(2, Mode::Max), vec![Prob::zero(), p("0.3"), p("0.3")]);
    }

    #[test]
    fn choice_between_delays() {
        // 0 chooses zero-time to 1 (one tick to goal) or to 2 (three ticks).
        let mdp = DigitalMdp::from_explicit(
            vec!["goal".into()],
            vec![vec![false], vec![false], vec![false], vec![false], vec![false], vec![true]],
            vec![
                vec![step(1), step(2)],
                vec![tick(vec![(Prob::one(), 5)])],
                vec![tick(vec![(Prob::one(), 3)])],
                vec![tick(vec![(Prob::one(), 4)])],
                vec![tick(vec![(Prob::one(), 5)])],
                vec![tick(vec![(Prob::one(), 5)])],
            ],
        )
        .unwrap();
        let (lo, hi) = min_max_gap::<Prob>(&mdp, &StateExpr::flag("goal"), 2).unwrap();
        assert_eq!((lo, hi), (Prob::zero(), Prob::one()));
        let (lo, hi) = min_max_gap::<f64>(&mdp, &StateExpr::flag("goal"), 3).unwrap();
        assert_eq!((lo, hi), (1.0, 1.0));
    }

    #[test]
    fn zero_time_cycle_rejected() {
        let e =
            DigitalMdp::from_explicit(vec![], vec![vec![], vec![]], vec![vec![step(1)], vec![step(0)]]).unwrap_err();
        assert!(matches!(e, crate::model::ComposeError::ZeroTimeCycle(2)));
    }

    #[test]
    fn grid_and_horizon_errors() {
        let mdp =
            DigitalMdp::from_explicit(vec!["g".into()], vec![vec![true]], vec![vec![tick(vec![(Prob::one(), 0)])]])
                .unwrap();
        let t = StateExpr::flag("g");
        assert_eq!(density_sweep::<f64>(&mdp, &t, &[3, 2], Mode::Max).unwrap_err(), CheckError::UnsortedGrid(1));
        assert_eq!(density_sweep::<f64>(&mdp, &t, &[], Mode::Max).unwrap_err(), CheckError::EmptyGrid);
        let q = ReachabilityQuery { target: t.clone(), bound: 11, mode: Mode::Max };
        assert!(matches!(
            check_bounded_reachability_capped::<f64>(&mdp, &q, 10),
            Err(CheckError::HorizonOverflow { bound: 11, cap: 10 })
        ));
        let q = ReachabilityQuery { target: StateExpr::flag("nope"), bound: 1, mode: Mode::Max };
        assert!(matches!(check_bounded_reachability::<f64>(&mdp, &q), Err(CheckError::Target(_))));
    }
}
