use std::fmt::Write;

use super::document::ModelDocument;
use super::FORMAT_VERSION;
use crate::model::{Direction, Trigger};
use crate::sim::{Micros, ScenarioConfig};

/// Renders a document in canonical form. Times are written in ticks,
/// probabilities as exact decimals, declarations in document order.
pub fn print_model(doc: &ModelDocument) -> String {
    let mut out = String::new();
    let o = &mut out;
    let _ = writeln!(o, "prtspace {FORMAT_VERSION};");
    for d in &doc.distributions {
        let _ = writeln!(o, "\ndistribution {} {{", d.name);
        for (t, p) in d.cdf.points() {
            let _ = writeln!(o, "    {t} : {};", p.to_plain_string());
        }
        o.push_str("}\n");
    }
    for m in &doc.machines {
        let _ = writeln!(o, "\nprtesm {} {{", m.name);
        if !m.clocks.is_empty() {
            let _ = writeln!(o, "    clock {};", m.clocks.join(", "));
        }
        let _ = writeln!(o, "    state {};", m.states.join(", "));
        for t in &m.transitions {
            let _ = write!(o, "    transition {} -> {}", t.source, t.target);
            if let Trigger::Parameter(e) = &t.trigger {
                match e.direction {
                    Direction::ToBlock => {
                        let _ = write!(o, " on {}/", e.pin);
                    }
                    Direction::FromBlock => {
                        let _ = write!(o, " on /{}", e.pin);
                    }
                }
            }
            if let Some(g) = &t.guard {
                let lo = g.lower.map(|v| v.to_string()).unwrap_or_default();
                let hi = g.upper.map(|v| v.to_string()).unwrap_or_default();
                let _ = write!(o, " guard {} in [{lo}, {hi}]", g.clock);
            }
            if !t.resets.is_empty() {
                let _ = write!(o, " reset {}", t.resets.join(", "));
            }
            if let Some(d) = &t.delay {
                let _ = write!(o, " delay {d}");
            }
            o.push_str(";\n");
        }
        o.push_str("}\n");
    }
    if let Some(n) = &doc.network {
        match &n.name {
            Some(name) => {
                let _ = writeln!(o, "\nnetwork {name} {{");
            }
            None => o.push_str("\nnetwork {\n"),
        }
        let _ = writeln!(o, "    timing {};", n.timing.keyword());
        for m in &n.modules {
            let _ = write!(o, "    module {} as {}", m.machine, m.id);
            if !m.after.is_empty() {
                let _ = write!(o, " after {}", m.after.join(", "));
            }
            if let Some(d) = &m.done {
                let _ = write!(o, " done {d}");
            }
            o.push_str(" {\n");
            for a in &m.actions {
                let _ = write!(o, "        action {}", a.pin);
                if let Some(d) = &a.delay {
                    let _ = write!(o, " delay {d}");
                }
                if let Some(l) = &a.label {
                    let _ = write!(o, " label {l}");
                }
                o.push_str(";\n");
            }
            o.push_str("    }\n");
        }
        if let Some(t) = &n.target {
            let _ = writeln!(o, "    target {t};");
        }
        o.push_str("}\n");
    }
    for q in &doc.queries {
        let _ = writeln!(o, "\nquery {} {{", q.name);
        if let Some(t) = &q.target {
            let _ = writeln!(o, "    target {t};");
        }
        let _ = writeln!(o, "    bound {};", q.bound);
        let _ = writeln!(o, "    mode {};", q.mode.keyword());
        if let Some(r) = &q.reference {
            let _ = writeln!(o, "    reference {};", r.to_plain_string());
        }
        o.push_str("}\n");
    }
    if let Some(s) = &doc.scenario {
        print_scenario(o, s);
    }
    out
}

fn print_scenario(o: &mut String, s: &ScenarioConfig) {
    let reals = [
        ("hall_width", s.hall_width),
        ("hall_depth", s.hall_depth),
        ("robot_size", s.robot_size),
        ("track_start_x", s.track_start_x),
        ("track_length", s.track_length),
        ("robot_max_speed", s.robot_max_speed),
        ("normal_accel", s.normal_accel),
        ("yellow_decel", s.yellow_decel),
        ("red_decel", s.red_decel),
        ("yellow_speed", s.yellow_speed),
        ("creep_speed", s.creep_speed),
        ("creep_zone", s.creep_zone),
        ("yellow_threshold", s.yellow_threshold),
        ("red_threshold", s.red_threshold),
        ("human_speed", s.human_speed),
        ("human_size", s.human_size),
        ("robot_start", s.robot_start),
        ("robot_start_speed", s.robot_start_speed),
    ];
    let times: [(&str, Micros); 5] = [
        ("physics_step", s.physics_step),
        ("poll_period", s.poll_period),
        ("poll_phase", s.poll_phase),
        ("reaction_delay", s.reaction_delay),
        ("time_cap", s.time_cap),
    ];
    o.push_str("\nscenario {\n");
    for (k, v) in reals {
        let _ = writeln!(o, "    {k} {v};");
    }
    for (k, v) in times {
        let _ = writeln!(o, "    {k} {v}us;");
    }
    match s.human_start {
        Some((x, y)) => {
            let _ = writeln!(o, "    human_start {x} {y};");
        }
        None => o.push_str("    human_start none;\n"),
    }
    o.push_str("}\n");
}
