//! Independent oracles and random model generators shared by tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use bigdecimal::BigDecimal;
use prtspace::checker::Mode;
use prtspace::distributions::{DelayCdf, Tick};
use prtspace::model::transform::flag_name;
use prtspace::model::{
    prtesm_to_pta, ActionKind, DigitalMdp, GuardStyle, MdpAction, Prtesm, PtaNetwork, StateExpr, TransformOptions,
};
use prtspace::{Prob, Weight};
use rand::Rng;

/// Optimal probability of reaching `target` from `s` within `n` ticks, by
/// direct recursion over the MDP's actions.
pub fn enumerate<W: Weight>(mdp: &DigitalMdp, target: &[bool], n: Tick, mode: Mode) -> W {
    fn go<W: Weight>(
        mdp: &DigitalMdp,
        target: &[bool],
        s: usize,
        n: Tick,
        mode: Mode,
        memo: &mut HashMap<(usize, Tick), W>,
    ) -> W {
        if target[s] {
            return W::one();
        }
        if let Some(v) = memo.get(&(s, n)) {
            return v.clone();
        }
        let mut best: Option<W> = None;
        for a in mdp.actions(s) {
            let v = if a.kind == ActionKind::Tick && n == 0 {
                W::zero()
            } else {
                let m = if a.kind == ActionKind::Tick { n - 1 } else { n };
                let mut acc = W::zero();
                for (p, t) in &a.branches {
                    let sub = go(mdp, target, *t as usize, m, mode, memo);
                    acc = acc.add(&W::from_prob(p).mul(&sub));
                }
                acc
            };
            best = Some(match best {
                None => v,
                Some(b) => match mode {
                    Mode::Max if v > b => v,
                    Mode::Min if v < b => v,
                    _ => b,
                },
            });
        }
        let v = best.unwrap_or_else(W::zero);
        memo.insert((s, n), v.clone());
        v
    }
    go(mdp, target, mdp.initial(), n, mode, &mut HashMap::new())
}

/// Random CDF with 1..=3 knots on ticks 1..=6 and two-digit probabilities.
pub fn random_cdf<R: Rng>(rng: &mut R) -> DelayCdf {
    let k = rng.gen_range(1..=3);
    let mut ticks: Vec<Tick> = (1..=6).collect();
    while ticks.len() > k {
        ticks.remove(rng.gen_range(0..ticks.len()));
    }
    let mut cums: Vec<u32> = Vec::new();
    while cums.len() < k - 1 {
        let c = rng.gen_range(1..100);
        if !cums.contains(&c) {
            cums.push(c);
        }
    }
    cums.sort();
    cums.push(100);
    let points = ticks
        .into_iter()
        .zip(cums)
        .map(|(t, c)| (t, Prob::from_decimal(BigDecimal::new(c.into(), 2).normalized())))
        .collect();
    DelayCdf::new(points).unwrap()
}

/// One to three single-action modules with random distributions, random
/// arming on earlier modules, optionally a shared label, and a random
/// target over their flags.
pub fn random_network<R: Rng>(rng: &mut R) -> (PtaNetwork, StateExpr) {
    let k = rng.gen_range(1..=3);
    let style = if rng.gen_bool(0.5) { GuardStyle::Interval } else { GuardStyle::Knot };
    let share = k >= 2 && rng.gen_bool(0.25);
    let mut constants = Vec::new();
    let mut modules = Vec::new();
    let mut flags = Vec::new();
    for i in 0..k {
        let id = format!("m{i}");
        let mut opts = TransformOptions::new(&id);
        opts.guard_style = style;
        for j in 0..i {
            if rng.gen_bool(0.5) {
                opts.arm_on.push(flag_name(&format!("m{j}")));
            }
        }
        let label = if share && i < 2 { "both".to_string() } else { format!("go{i}") };
        opts.labels.insert("go".into(), label);
        let dists = BTreeMap::from([("go".to_string(), random_cdf(rng))]);
        let machine = Prtesm::single_action(&format!("M{i}"), "go");
        let t = prtesm_to_pta(&machine, &["go".into()], &dists, &opts).unwrap();
        constants.extend(t.constants);
        modules.push(t.module);
        flags.push(StateExpr::flag(flag_name(&id)));
    }
    let target = match rng.gen_range(0..3) {
        0 => StateExpr::all_flags(&flags.iter().map(|f| f.to_string()).collect::<Vec<_>>()),
        1 => flags.iter().cloned().reduce(StateExpr::or).unwrap(),
        _ => flags[rng.gen_range(0..k)].clone(),
    };
    (PtaNetwork::new(constants, modules).unwrap(), target)
}

/// A random explicit MDP: zero-time actions only go to higher-numbered
/// states, ticks go anywhere, some states are deadlocks.
pub fn random_explicit_mdp<R: Rng>(rng: &mut R) -> (DigitalMdp, Vec<bool>) {
    let n = rng.gen_range(2..=8);
    let mut acts = Vec::new();
    let mut flags = Vec::new();
    for s in 0..n {
        let target = s > 0 && rng.gen_bool(0.25);
        flags.push(vec![target]);
        let mut a = Vec::new();
        if rng.gen_bool(0.85) {
            for _ in 0..rng.gen_range(1..=3) {
                let tick = s + 1 >= n || rng.gen_bool(0.5);
                let lo = if tick { 0 } else { s + 1 };
                let width = rng.gen_range(1..=2);
                let mut cut: Vec<u32> = (0..width - 1).map(|_| rng.gen_range(1..10)).collect();
                cut.sort();
                cut.dedup();
                cut.push(10);
                let mut prev = 0;
                let branches = cut
                    .into_iter()
                    .map(|c| {
                        let p = Prob::from_decimal(BigDecimal::new((c - prev).into(), 1).normalized());
                        prev = c;
                        (p, rng.gen_range(lo..n) as u32)
                    })
                    .collect();
                let kind = if tick { ActionKind::Tick } else { ActionKind::Local { module: 0 } };
                a.push(MdpAction { kind, branches });
            }
        }
        acts.push(a);
    }
    let target = flags.iter().map(|f| f[0]).collect();
    (DigitalMdp::from_explicit(vec!["goal".into()], flags, acts).unwrap(), target)
}

/// Distribution of the sum of independent knot-valued delays, by
/// enumerating every combination of knots.
pub fn brute_force_sum(cdfs: &[DelayCdf]) -> BTreeMap<Tick, Prob> {
    let masses: Vec<Vec<(Tick, Prob)>> = cdfs
        .iter()
        .map(|c| {
            let mut prev = Prob::zero();
            c.points()
                .iter()
                .map(|(t, cum)| {
                    let m = cum - &prev;
                    prev = cum.clone();
                    (*t, m)
                })
                .collect()
        })
        .collect();
    let mut out: BTreeMap<Tick, Prob> = BTreeMap::new();
    let mut idx = vec![0usize; masses.len()];
    'outer: loop {
        let mut t = 0;
        let mut p = Prob::one();
        for (d, &i) in masses.iter().zip(&idx) {
            t += d[i].0;
            p = &p * &d[i].1;
        }
        if !p.is_zero() {
            let e = out.entry(t).or_insert_with(Prob::zero);
            *e = &*e + &p;
        }
        for k in 0..idx.len() {
            idx[k] += 1;
            if idx[k] < masses[k].len() {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    out
}

pub fn combos(cdfs: &[DelayCdf]) -> usize {
    cdfs.iter().map(|c| c.points().len()).product()
}
