use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

use prtspace::checker::{density_sweep, horizon_cap, CheckError, Mode, ValueIteration};
use prtspace::distributions::Tick;
use prtspace::model::{compose, DigitalMdp, PtaNetwork, StateExpr};
use prtspace::sim::{self, format_seconds, parse_seconds, run_scenario, ImpactReport, Micros, ScenarioConfig};
use prtspace::spatial::{self, check_collision, threshold_filter, trace_to_spec, Entity, SpatioTemporalSpec};
use prtspace::textio::{self, Diagnostic, ModelDocument, PrismStyle};
use prtspace::Prob;

use crate::manifest::Run;
use crate::{EntityArg, Failure, ModeArg};

/// Agreement with a published value that counts as a full reproduction.
const REPRODUCTION_TOLERANCE: &str = "0.0000000001";

fn seconds(t: Tick) -> String {
    format_seconds(t * 100)
}

fn fmt_prob(run: &Run, p: &Prob) -> String {
    match run.digits {
        Some(d) => p.to_rounded_string(d),
        None => p.to_plain_string(),
    }
}

fn fmt_real(run: &Run, v: f64) -> String {
    match run.digits {
        Some(d) => format!("{v:.*}", d as usize),
        None => format!("{v}"),
    }
}

fn report_diagnostics(path: &Path, diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("{}:{d}", path.display());
    }
}

/// Parses a model, reporting diagnostics. Returns the document (if any) and
/// the error and warning counts.
fn parse(run: &mut Run, path: &Path) -> Result<(Option<ModelDocument>, usize, usize), Failure> {
    let bytes = run.read(path)?;
    let (doc, diags) = match std::str::from_utf8(&bytes) {
        Ok(text) => textio::parse_model_full(text),
        Err(_) => (None, textio::parse_model_bytes(&bytes).err().unwrap_or_default()),
    };
    report_diagnostics(path, &diags);
    let errors = diags.iter().filter(|d| d.is_error()).count();
    Ok((doc, errors, diags.len() - errors))
}

fn load(run: &mut Run, path: &Path) -> Result<ModelDocument, Failure> {
    match parse(run, path)? {
        (Some(doc), _, _) => Ok(doc),
        (None, errors, _) => Err(Failure::Domain(format!("{}: {errors} error(s)", path.display()))),
    }
}

fn network(doc: &ModelDocument) -> Result<PtaNetwork, Failure> {
    doc.build_network().map_err(|e| Failure::Domain(e.to_string()))
}

fn mdp(net: &PtaNetwork) -> Result<DigitalMdp, Failure> {
    compose(net).map_err(|e| Failure::Domain(e.to_string()))
}

fn domain(e: CheckError) -> Failure {
    Failure::Domain(e.to_string())
}

fn parse_ticks(what: &str, text: &str) -> Result<Tick, Failure> {
    textio::seconds_to_ticks(text).map_err(|e| Failure::Usage(format!("--{what}: {e}")))
}

fn parse_target(text: &str) -> Result<StateExpr, Failure> {
    textio::parse_state_expr(text).map_err(|diags| {
        for d in &diags {
            eprintln!("--target:{d}");
        }
        Failure::Domain("invalid target expression".into())
    })
}

/// Target from `--query`, `--target` or the network, in that order.
fn resolve_target<'a>(
    doc: &'a ModelDocument,
    query: Option<&str>,
    target: Option<&str>,
) -> Result<(StateExpr, Option<&'a textio::QuerySpec>), Failure> {
    if let Some(name) = query {
        let q = doc.query(name).ok_or_else(|| Failure::Domain(format!("unknown query `{name}`")))?;
        let t = doc.query_target(q).ok_or_else(|| Failure::Domain(format!("query `{name}` has no target")))?;
        return Ok((t.clone(), Some(q)));
    }
    if let Some(text) = target {
        return Ok((parse_target(text)?, None));
    }
    let t = doc.network.as_ref().and_then(|n| n.target.clone());
    t.map(|t| (t, None)).ok_or_else(|| Failure::Usage("the network has no target; pass --target".into()))
}

fn modes(mode: ModeArg) -> Vec<Mode> {
    match mode {
        ModeArg::Max => vec![Mode::Max],
        ModeArg::Min => vec![Mode::Min],
        ModeArg::Both => vec![Mode::Max, Mode::Min],
    }
}

fn mode_arg(m: textio::QueryMode) -> ModeArg {
    match m {
        textio::QueryMode::Max => ModeArg::Max,
        textio::QueryMode::Min => ModeArg::Min,
        textio::QueryMode::Both => ModeArg::Both,
    }
}

fn abs(p: &Prob) -> Prob {
    if p.is_negative() {
        &Prob::zero() - p
    } else {
        p.clone()
    }
}

pub fn validate(run: &mut Run, model: &Path) -> Result<(), Failure> {
    run.param("model", model.display().to_string());
    let (doc, errors, warnings) = parse(run, model)?;
    run.result("errors", errors);
    run.result("warnings", warnings);
    match doc {
        Some(doc) => {
            println!(
                "{}: ok ({} distributions, {} machines, {} modules, {} queries, {warnings} warning(s))",
                model.display(),
                doc.distributions.len(),
                doc.machines.len(),
                doc.network.as_ref().map_or(0, |n| n.modules.len()),
                doc.queries.len(),
            );
            Ok(())
        }
        None => Err(Failure::Domain(format!("{}: {errors} error(s)", model.display()))),
    }
}

pub fn check(
    run: &mut Run,
    model: &Path,
    query: Option<&str>,
    target: Option<&str>,
    bound: Option<&str>,
    mode: Option<ModeArg>,
) -> Result<(), Failure> {
    run.param("model", model.display().to_string());
    run.param("query", query);
    run.param("target", target);
    run.param("bound", bound);
    let doc = load(run, model)?;
    let (target, q) = resolve_target(&doc, query, target)?;
    let bound = match (bound, q) {
        (Some(b), _) => parse_ticks("bound", b)?,
        (None, Some(q)) => q.bound,
        (None, None) => return Err(Failure::Usage("pass --query NAME or --bound SECONDS".into())),
    };
    let mode = mode.or(q.map(|q| mode_arg(q.mode))).unwrap_or(ModeArg::Both);
    let reference = q.and_then(|q| q.reference.clone());
    let cap = horizon_cap();
    if bound > cap {
        return Err(domain(CheckError::HorizonOverflow { bound, cap }));
    }
    let net = network(&doc)?;
    let mdp = mdp(&net)?;
    let vi = ValueIteration::<Prob>::new(&mdp, &target).map_err(domain)?;

    let mut out = String::new();
    let _ = writeln!(out, "model: {}", model.display());
    if let Some(q) = q {
        let _ = writeln!(out, "query: {}", q.name);
    }
    let _ = writeln!(out, "target: {target}");
    let _ = writeln!(out, "bound: {} s ({bound} ticks)", seconds(bound));
    let _ = writeln!(out, "states: {}", mdp.num_states());
    let _ = writeln!(out, "iterations: {}", bound + 1);
    run.result("target", target.to_string());
    run.result("bound_ticks", bound);
    run.result("states", mdp.num_states());
    run.result("iterations", bound + 1);

    let mut values = Vec::new();
    for m in modes(mode) {
        let v = vi.curve(bound, m).pop().expect("non-empty curve");
        let _ = writeln!(out, "P_{m}: {}", fmt_prob(run, &v));
        run.result(&format!("p_{m}"), v.to_plain_string());
        values.push((m, v));
    }
    if let [(_, max), (_, min)] = values.as_slice() {
        let gap = max - min;
        let _ = writeln!(out, "gap (max - min): {}", fmt_prob(run, &gap));
        run.result("gap", gap.to_plain_string());
    }
    if let Some(r) = reference {
        let tol = Prob::parse(REPRODUCTION_TOLERANCE).expect("valid literal");
        let _ = writeln!(out, "reference: {}", r.to_plain_string());
        run.result("reference", r.to_plain_string());
        let mut reproduced = false;
        for (m, v) in &values {
            let diff = v - &r;
            let within = abs(&diff) <= tol;
            reproduced |= within;
            let _ = writeln!(
                out,
                "P_{m} - reference: {} ({})",
                fmt_prob(run, &diff),
                if within { "within 1e-10" } else { "outside 1e-10" }
            );
            run.result(&format!("p_{m}_minus_reference"), diff.to_plain_string());
        }
        let verdict = if reproduced { "full" } else { "partial" };
        let _ = writeln!(out, "reproduction: {verdict}");
        run.result("reproduction", verdict);
    }
    print!("{out}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn density(
    run: &mut Run,
    model: &Path,
    query: Option<&str>,
    target: Option<&str>,
    bin: &str,
    upto: &str,
    mode: ModeArg,
    output: Option<&Path>,
) -> Result<(), Failure> {
    run.param("model", model.display().to_string());
    run.param("query", query);
    run.param("target", target);
    run.param("bin", bin);
    run.param("upto", upto);
    let bin = parse_ticks("bin", bin)?;
    let upto = parse_ticks("upto", upto)?;
    if bin == 0 {
        return Err(Failure::Usage("--bin must be positive".into()));
    }
    if upto < bin {
        return Err(Failure::Usage("--upto must be at least one bin".into()));
    }
    let mode = match mode {
        ModeArg::Max => Mode::Max,
        ModeArg::Min => Mode::Min,
        ModeArg::Both => return Err(Failure::Usage("density takes --mode max or --mode min".into())),
    };
    run.param("mode", mode.to_string());
    let doc = load(run, model)?;
    let (target, _) = resolve_target(&doc, query, target)?;
    let mut grid: Vec<Tick> = (1..=upto / bin).map(|k| k * bin).collect();
    if upto % bin != 0 {
        grid.push(upto);
    }
    let net = network(&doc)?;
    let mdp = mdp(&net)?;
    let res = density_sweep::<Prob>(&mdp, &target, &grid, mode).map_err(domain)?;

    let mut csv = String::from("T_seconds,cumulative,density\n");
    for ((t, c), b) in res.grid.iter().zip(&res.density) {
        let _ = writeln!(csv, "{},{},{}", seconds(*t), fmt_prob(run, c), fmt_prob(run, &b.mass));
    }
    let total: Prob = res.density.iter().map(|b| b.mass.clone()).sum();
    run.result("rows", res.grid.len());
    run.result("final_cumulative", res.grid.last().map(|(_, c)| c.to_plain_string()));
    run.result("density_sum", total.to_plain_string());
    match output {
        Some(path) => run.write(path, csv.as_bytes()),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn parse_delays(delay: Option<&str>, sweep: Option<&str>) -> Result<Vec<Micros>, Failure> {
    let bad = |t: &str| Failure::Usage(format!("`{t}` is not a delay in seconds"));
    match (delay, sweep) {
        (Some(d), _) => Ok(vec![parse_seconds(d).ok_or_else(|| bad(d))?]),
        (None, Some(list)) => {
            let delays = list
                .split(',')
                .map(|t| parse_seconds(t).ok_or_else(|| bad(t.trim())))
                .collect::<Result<Vec<_>, _>>()?;
            if delays.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Failure::Usage("sweep delays must be strictly increasing".into()));
            }
            Ok(delays)
        }
        (None, None) => Err(Failure::Usage("pass --delay or --sweep".into())),
    }
}

fn speed_cell(run: &Run, v: Option<f64>) -> String {
    v.map(|v| fmt_real(run, v)).unwrap_or_default()
}

pub fn simulate(
    run: &mut Run,
    model: Option<&Path>,
    delay: Option<&str>,
    sweep: Option<&str>,
    trace: Option<&Path>,
    no_human: bool,
) -> Result<(), Failure> {
    run.param("model", model.map(|m| m.display().to_string()));
    run.param("delay", delay);
    run.param("sweep", sweep);
    run.param("no_human", no_human);
    let delays = parse_delays(delay, sweep)?;
    let mut config = match model {
        Some(path) => load(run, path)?.scenario.unwrap_or_default(),
        None => ScenarioConfig::default(),
    };
    if no_human {
        config.human_start = None;
    }
    config.validate().map_err(|e| Failure::Domain(e.to_string()))?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(run.jobs).build().map_err(|e| Failure::Io(e.to_string()))?;
    let runs: Vec<(Vec<sim::TraceRecord>, ImpactReport)> = pool
        .install(|| {
            delays
                .par_iter()
                .map(|&d| run_scenario(&ScenarioConfig { reaction_delay: d, ..config.clone() }))
                .collect::<Result<Vec<_>, _>>()
        })
        .map_err(|e| Failure::Domain(e.to_string()))?;

    if let Some(out) = trace {
        if sweep.is_some() {
            fs::create_dir_all(out).map_err(|e| Failure::Io(format!("cannot create {}: {e}", out.display())))?;
        }
        for (records, report) in &runs {
            let path = if sweep.is_some() {
                out.join(format!("trace_{}s.csv", format_seconds(report.reaction_delay)))
            } else {
                out.to_path_buf()
            };
            let mut bytes = Vec::new();
            sim::write_trace(&mut bytes, records).map_err(|e| Failure::Io(e.to_string()))?;
            run.write(&path, &bytes)?;
        }
    }

    let mut out =
        String::from("reaction_delay_s,collided,impact_time_s,impact_speed_mps,arrival_time_s,arrival_speed_mps\n");
    let mut summary = Vec::new();
    for (_, r) in &runs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            format_seconds(r.reaction_delay),
            r.collided,
            r.impact_time.map(format_seconds).unwrap_or_default(),
            speed_cell(run, r.robot_speed_at_impact),
            r.arrival.map(|a| format_seconds(a.0)).unwrap_or_default(),
            speed_cell(run, r.arrival.map(|a| a.1)),
        );
        summary.push(json!({
            "reaction_delay_s": format_seconds(r.reaction_delay),
            "collided": r.collided,
            "impact_time_s": r.impact_time.map(format_seconds),
            "impact_speed_mps": r.robot_speed_at_impact,
        }));
    }
    print!("{out}");
    let reports: Vec<ImpactReport> = runs.into_iter().map(|(_, r)| r).collect();
    let monotone = sim::is_monotone(&reports);
    if reports.len() > 1 {
        eprintln!("impact speed non-decreasing in delay: {}", if monotone { "yes" } else { "no" });
    }
    run.result("runs", summary);
    run.result("monotone", monotone);
    Ok(())
}

fn check_probability(name: &str, p: f64) -> Result<(), Failure> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--{name} must lie in (0, 1]")))
    }
}

fn load_specs(
    run: &mut Run,
    trace: &Path,
    robot_probability: f64,
    human_probability: f64,
) -> Result<(SpatioTemporalSpec, SpatioTemporalSpec), Failure> {
    check_probability("robot-probability", robot_probability)?;
    check_probability("human-probability", human_probability)?;
    run.param("trace", trace.display().to_string());
    run.param("robot_probability", robot_probability);
    run.param("human_probability", human_probability);
    let bytes = run.read(trace)?;
    let records =
        sim::read_trace(bytes.as_slice()).map_err(|e| Failure::Domain(format!("{}: {e}", trace.display())))?;
    let to_spec = |entity, p| trace_to_spec(&records, entity, p).map_err(|e| Failure::Domain(e.to_string()));
    Ok((to_spec(Entity::Robot, robot_probability)?, to_spec(Entity::Human, human_probability)?))
}

fn write_specs(run: &mut Run, dir: &Path, specs: &[&SpatioTemporalSpec]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
    for spec in specs {
        let text = spatial::export_bespaced(spec);
        run.write(&dir.join(format!("{}.bsd", spec.entity)), text.as_bytes())?;
    }
    Ok(())
}

pub fn spatial(
    run: &mut Run,
    trace: &Path,
    threshold: f64,
    bespaced: Option<&Path>,
    robot_probability: f64,
    human_probability: f64,
) -> Result<(), Failure> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Failure::Usage("--threshold must lie in [0, 1]".into()));
    }
    run.param("threshold", threshold);
    let (robot, human) = load_specs(run, trace, robot_probability, human_probability)?;
    let events = check_collision(&robot, &human).map_err(|e| Failure::Domain(e.to_string()))?;
    let kept = threshold_filter(&events, threshold);
    if let Some(dir) = bespaced {
        write_specs(run, dir, &[&robot, &human])?;
    }
    let mut out = String::from("time_s,overlap_xmin,overlap_xmax,overlap_ymin,overlap_ymax,joint_probability\n");
    for e in &kept {
        let o = e.overlap;
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{:?}",
            format_seconds(e.time),
            o.x_min,
            o.x_max,
            o.y_min,
            o.y_max,
            e.joint_probability
        );
    }
    print!("{out}");
    eprintln!("{} collision event(s), {} at or above {threshold}", events.len(), kept.len());
    run.result("events", events.len());
    run.result("kept", kept.len());
    run.result("first_time_s", kept.first().map(|e| format_seconds(e.time)));
    Ok(())
}

pub fn export_prism(run: &mut Run, model: &Path, out: &Path, numeric: bool) -> Result<(), Failure> {
    run.param("model", model.display().to_string());
    run.param("numeric", numeric);
    let doc = load(run, model)?;
    let net = network(&doc)?;
    let style = if numeric { PrismStyle::Numeric } else { PrismStyle::Symbolic };
    let text = textio::export_prism(&net, style).map_err(|e| Failure::Domain(e.to_string()))?;
    run.result("modules", net.modules.len());
    run.result("constants", net.constants.len());
    if out == Path::new("-") {
        print!("{text}");
        Ok(())
    } else {
        run.write(out, text.as_bytes())
    }
}

pub fn export_bespaced(
    run: &mut Run,
    trace: &Path,
    out: &Path,
    entity: EntityArg,
    robot_probability: f64,
    human_probability: f64,
) -> Result<(), Failure> {
    let (robot, human) = load_specs(run, trace, robot_probability, human_probability)?;
    let specs: Vec<&SpatioTemporalSpec> = match entity {
        EntityArg::Robot => vec![&robot],
        EntityArg::Human => vec![&human],
        EntityArg::Both => vec![&robot, &human],
    };
    write_specs(run, out, &specs)?;
    run.result("robot_entries", robot.entries().len());
    run.result("human_entries", human.entries().len());
    Ok(())
}
