use std::collections::BTreeMap;

use prtspace::checker::{Mode, ValueIteration};
use prtspace::distributions::{cdf_to_pmf, convolve_all, earliest_completion, prob_at_most, table1, DelayCdf};
use prtspace::model::transform::flag_name;
use prtspace::model::{compose, prtesm_to_pta, GuardStyle, Prtesm, PtaNetwork, StateExpr, TransformOptions};
use prtspace::Prob;

fn chain(cdfs: &[DelayCdf], style: GuardStyle) -> PtaNetwork {
    let mut constants = Vec::new();
    let mut modules = Vec::new();
    for (i, cdf) in cdfs.iter().enumerate() {
        let id = format!("m{i}");
        let mut opts = TransformOptions::new(&id);
        opts.guard_style = style;
        if i > 0 {
            opts.arm_on = vec![flag_name(&format!("m{}", i - 1))];
        }
        let dists = BTreeMap::from([("go".to_string(), cdf.clone())]);
        let t =
            prtesm_to_pta(&Prtesm::single_action(&format!("Stage{i}"), "go"), &["go".into()], &dists, &opts).unwrap();
        // Distinct labels so the stages do not synchronize on `go`.
        let mut module = t.module;
        for c in &mut module.commands {
            if c.label.as_deref() == Some("go") {
                c.label = Some(format!("go{i}"));
            }
        }
        constants.extend(t.constants);
        modules.push(module);
    }
    PtaNetwork::new(constants, modules).unwrap()
}

fn last_flag(n: usize) -> StateExpr {
    StateExpr::flag(flag_name(&format!("m{}", n - 1)))
}

#[test]
fn single_module_knot_guards_reproduce_every_cdf_value() {
    for (name, cdf) in table1::all() {
        let net = chain(&[cdf.clone()], GuardStyle::Knot);
        let mdp = compose(&net).unwrap();
        let vi = ValueIteration::<Prob>::new(&mdp, &last_flag(1)).unwrap();
        let horizon = cdf.max_tick() + 3;
        let pmf = cdf_to_pmf(&cdf);
        for mode in [Mode::Max, Mode::Min] {
            let curve = vi.curve(horizon, mode);
            for t in 0..=horizon {
                assert_eq!(curve[t as usize], prob_at_most(&pmf, t), "{name} {mode} t={t}");
            }
        }
    }
}

#[test]
fn single_module_interval_guards_bracket_the_cdf() {
    for (name, cdf) in table1::all() {
        let net = chain(&[cdf.clone()], GuardStyle::Interval);
        let mdp = compose(&net).unwrap();
        let vi = ValueIteration::<Prob>::new(&mdp, &last_flag(1)).unwrap();
        let horizon = cdf.max_tick() + 3;
        let late = cdf_to_pmf(&cdf);
        let early = earliest_completion(&cdf);
        let min = vi.curve(horizon, Mode::Min);
        let max = vi.curve(horizon, Mode::Max);
        for t in 0..=horizon {
            assert_eq!(min[t as usize], prob_at_most(&late, t), "{name} min t={t}");
            assert_eq!(max[t as usize], prob_at_most(&early, t), "{name} max t={t}");
        }
    }
}

#[test]
fn series_chains_match_convolution() {
    let all: Vec<DelayCdf> = table1::all().into_iter().map(|(_, c)| c).collect();
    for k in 2..=4 {
        let cdfs = &all[..k];
        let net = chain(cdfs, GuardStyle::Knot);
        let mdp = compose(&net).unwrap();
        let pmfs: Vec<_> = cdfs.iter().map(cdf_to_pmf).collect();
        let conv = convolve_all(&pmfs);
        let horizon = conv.max_tick() + 2;
        let vi = ValueIteration::<Prob>::new(&mdp, &last_flag(k)).unwrap();
        let curve = vi.curve(horizon, Mode::Max);
        for t in 0..=horizon {
            assert_eq!(curve[t as usize], prob_at_most(&conv, t), "k={k} t={t}");
        }
    }
}
