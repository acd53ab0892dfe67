//! Text form of occupancy specs.
//!
//! ```text
//! time = 0.005 ->
//!   occupied box [49.0, 51.0] x [14.0, 16.0] with probability 1.0
//!   /\ occupied box [60.0, 60.5] x [14.75, 15.25] with probability 1.0
//! ```
//!
//! One block per distinct time, in time order. Times are decimal seconds;
//! numbers are written so they parse back to the same `f64`. Blank lines and
//! lines starting with `//` are ignored by the reader.

use thiserror::Error;

use super::{Aabb, OccupancyEntry, SpatialError, SpatioTemporalSpec};
use crate::sim::{format_seconds, parse_seconds};

pub fn export_bespaced(spec: &SpatioTemporalSpec) -> String {
    let mut out = String::new();
    let mut last = None;
    for e in spec.entries() {
        if last != Some(e.time) {
            out.push_str(&format!("time = {} ->\n  ", format_seconds(e.time)));
            last = Some(e.time);
        } else {
            out.push_str("  /\\ ");
        }
        let r = e.region;
        out.push_str(&format!(
            "occupied box [{:?}, {:?}] x [{:?}, {:?}] with probability {:?}\n",
            r.x_min, r.x_max, r.y_min, r.y_max, e.probability
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BespacedError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Spec(#[from] SpatialError),
}

pub fn read_bespaced(text: &str, entity: &str) -> Result<SpatioTemporalSpec, BespacedError> {
    let mut entries = Vec::new();
    let mut time = None;
    let mut expect_first = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: &str| BespacedError::Syntax { line: line_no, message: message.to_string() };
        let line = raw.trim();
        if line.is_empty() || line.starts_with("//") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("time") {
            let rest = rest.trim_start().strip_prefix('=').ok_or_else(|| err("expected `=` after `time`"))?;
            let rest = rest.trim().strip_suffix("->").ok_or_else(|| err("expected `->` after the time"))?;
            let t = parse_seconds(rest.trim()).ok_or_else(|| err("bad time value"))?;
            if expect_first {
                return Err(err("time block without an occupied area"));
            }
            time = Some(t);
            expect_first = true;
            continue;
        }
        let t = time.ok_or_else(|| err("occupied area before any time premise"))?;
        let body = match line.strip_prefix("/\\") {
            Some(b) if !expect_first => b.trim_start(),
            Some(_) => return Err(err("first area of a block must not start with `/\\`")),
            None if expect_first => line,
            None => return Err(err("further areas must start with `/\\`")),
        };
        expect_first = false;
        entries.push(
            parse_area(body, t).ok_or_else(|| err("expected `occupied box [x1, x2] x [y1, y2] with probability p`"))?,
        );
    }
    if expect_first {
        return Err(BespacedError::Syntax {
            line: text.lines().count(),
            message: "time block without an occupied area".into(),
        });
    }
    Ok(SpatioTemporalSpec::new(entity, entries)?)
}

fn parse_area(body: &str, time: u64) -> Option<OccupancyEntry> {
    let rest = body.strip_prefix("occupied box")?.trim_start();
    let (xs, rest) = interval(rest)?;
    let rest = rest.trim_start().strip_prefix('x')?.trim_start();
    let (ys, rest) = interval(rest)?;
    let p = rest.trim_start().strip_prefix("with probability")?.trim();
    let probability = p.parse::<f64>().ok()?;
    Some(OccupancyEntry { time, region: Aabb::new(xs.0, xs.1, ys.0, ys.1), probability })
}

fn interval(s: &str) -> Option<((f64, f64), &str)> {
    let s = s.strip_prefix('[')?;
    let close = s.find(']')?;
    let (a, b) = s[..close].split_once(',')?;
    Some(((a.trim().parse().ok()?, b.trim().parse().ok()?), &s[close + 1..]))
}
