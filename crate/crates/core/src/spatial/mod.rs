//! Probability-annotated occupancy over time, and collisions between them.

mod aabb;
mod bespaced;

pub use aabb::Aabb;
pub use bespaced::{export_bespaced, read_bespaced, BespacedError};

use thiserror::Error;

use crate::sim::{Micros, TraceRecord};

/// The entity occupies `region` at `time` with probability `probability`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyEntry {
    pub time: Micros,
    pub region: Aabb,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatioTemporalSpec {
    pub entity: String,
    entries: Vec<OccupancyEntry>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpatialError {
    #[error("entry at {time} us: box is empty or not finite")]
    DegenerateBox { time: Micros },
    #[error("entry at {time} us: probability {probability} is outside (0, 1]")]
    BadProbability { time: Micros, probability: f64 },
    #[error("specs use different cadences ({a} us vs {b} us)")]
    CadenceMismatch { a: Micros, b: Micros },
    #[error("speed-error levels must have non-decreasing errors and strictly increasing probabilities ending at 1")]
    BadErrorDistribution,
}

impl SpatioTemporalSpec {
    /// Sorts entries by time, keeping the given order among equal times.
    pub fn new(entity: impl Into<String>, mut entries: Vec<OccupancyEntry>) -> Result<Self, SpatialError> {
        for e in &entries {
            if !e.region.is_valid() {
                return Err(SpatialError::DegenerateBox { time: e.time });
            }
            if !(e.probability > 0.0 && e.probability <= 1.0) {
                return Err(SpatialError::BadProbability { time: e.time, probability: e.probability });
            }
        }
        entries.sort_by_key(|e| e.time);
        Ok(SpatioTemporalSpec { entity: entity.into(), entries })
    }

    pub fn entries(&self) -> &[OccupancyEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Greatest common divisor of the gaps between distinct times.
    pub fn cadence(&self) -> Option<Micros> {
        let mut g: Option<Micros> = None;
        for w in self.entries.windows(2) {
            let d = w[1].time - w[0].time;
            if d > 0 {
                g = Some(match g {
                    None => d,
                    Some(x) => gcd(x, d),
                });
            }
        }
        g
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entity {
    Robot,
    Human,
}

impl Entity {
    pub fn name(self) -> &'static str {
        match self {
            Entity::Robot => "robot",
            Entity::Human => "human",
        }
    }
}

/// One entry per record carrying the entity's box. Records without a human
/// box contribute nothing to a human spec.
pub fn trace_to_spec(
    trace: &[TraceRecord],
    entity: Entity,
    probability: f64,
) -> Result<SpatioTemporalSpec, SpatialError> {
    let entries = trace
        .iter()
        .filter_map(|r| {
            let region = match entity {
                Entity::Robot => Some(r.robot_box),
                Entity::Human => r.human_box,
            }?;
            Some(OccupancyEntry { time: r.timestamp, region, probability })
        })
        .collect();
    SpatioTemporalSpec::new(entity.name(), entries)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionEvent {
    pub time: Micros,
    pub box_a: Aabb,
    pub box_b: Aabb,
    pub overlap: Aabb,
    /// Product of the two occupancy probabilities; the entities are taken
    /// to be independent.
    pub joint_probability: f64,
}

/// Every equal-time pair of entries whose boxes overlap with positive area,
/// ordered by time, then by position in `a`, then in `b`.
pub fn check_collision(a: &SpatioTemporalSpec, b: &SpatioTemporalSpec) -> Result<Vec<CollisionEvent>, SpatialError> {
    if let (Some(ca), Some(cb)) = (a.cadence(), b.cadence()) {
        if ca != cb {
            return Err(SpatialError::CadenceMismatch { a: ca, b: cb });
        }
    }
    let (ea, eb) = (a.entries(), b.entries());
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < ea.len() && j < eb.len() {
        let (ta, tb) = (ea[i].time, eb[j].time);
        if ta < tb {
            i += 1;
        } else if tb < ta {
            j += 1;
        } else {
            let i_end = i + ea[i..].iter().take_while(|e| e.time == ta).count();
            let j_end = j + eb[j..].iter().take_while(|e| e.time == ta).count();
            for x in &ea[i..i_end] {
                for y in &eb[j..j_end] {
                    if let Some(overlap) = x.region.intersection(&y.region) {
                        out.push(CollisionEvent {
                            time: ta,
                            box_a: x.region,
                            box_b: y.region,
                            overlap,
                            joint_probability: x.probability * y.probability,
                        });
                    }
                }
            }
            i = i_end;
            j = j_end;
        }
    }
    Ok(out)
}

/// Keeps events with joint probability at least `epsilon`.
pub fn threshold_filter(events: &[CollisionEvent], epsilon: f64) -> Vec<CollisionEvent> {
    events.iter().filter(|e| e.joint_probability >= epsilon).copied().collect()
}

/// Discrete bound on the robot's speed error: with cumulative probability
/// `p` the error is at most `max_error` m/s.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedError {
    levels: Vec<(f64, f64)>,
}

impl SpeedError {
    /// `levels` are `(max_error, cumulative_probability)` pairs.
    pub fn new(levels: Vec<(f64, f64)>) -> Result<Self, SpatialError> {
        let ok = !levels.is_empty()
            && levels.iter().all(|&(e, p)| e >= 0.0 && e.is_finite() && p > 0.0 && p <= 1.0)
            && levels.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1)
            && levels.last().map(|l| l.1) == Some(1.0);
        if ok {
            Ok(SpeedError { levels })
        } else {
            Err(SpatialError::BadErrorDistribution)
        }
    }

    pub fn levels(&self) -> &[(f64, f64)] {
        &self.levels
    }
}

/// One spec per probability level, ascending. At time `t` (seconds) each
/// box grows by `max_error * t` on both ends along the track, is clipped to
/// `bounds`, and carries the level times its original probability. Entries
/// after `horizon` are left out.
pub fn widen_by_speed_error(
    spec: &SpatioTemporalSpec,
    error: &SpeedError,
    horizon: Micros,
    bounds: &Aabb,
) -> Vec<(f64, SpatioTemporalSpec)> {
    error
        .levels
        .iter()
        .map(|&(max_error, level)| {
            let entries = spec
                .entries
                .iter()
                .filter(|e| e.time <= horizon)
                .filter_map(|e| {
                    let grow = max_error * e.time as f64 * 1e-6;
                    let r = e.region;
                    let region = Aabb::new(r.x_min - grow, r.x_max + grow, r.y_min, r.y_max).clamp_to(bounds)?;
                    Some(OccupancyEntry { time: e.time, region, probability: e.probability * level })
                })
                .collect();
            (level, SpatioTemporalSpec { entity: spec.entity.clone(), entries })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(time: Micros, b: Aabb, p: f64) -> OccupancyEntry {
        OccupancyEntry { time, region: b, probability: p }
    }

    #[test]
    fn robot_box_from_trace() {
        let cfg = crate::sim::ScenarioConfig::default();
        let rec = TraceRecord {
            timestamp: 0,
            robot_box: cfg.robot_box(50.0),
            human_box: None,
            robot_speed: 0.0,
            mode: crate::sim::Mode::Normal,
        };
        let spec = trace_to_spec(&[rec.clone(), rec.clone(), rec], Entity::Robot, 1.0).unwrap();
        assert_eq!(spec.entries().len(), 3);
        assert_eq!(spec.entries()[0].region, Aabb::new(59.0, 61.0, 14.0, 16.0));
        assert!(trace_to_spec(&[], Entity::Human, 1.0).unwrap().is_empty());
    }

    #[test]
    fn unit_boxes_half_probability() {
        let b = Aabb::new(0.0, 1.0, 0.0, 1.0);
        let a = SpatioTemporalSpec::new("a", vec![entry(0, b, 0.5)]).unwrap();
        let c = SpatioTemporalSpec::new("b", vec![entry(0, b, 0.5)]).unwrap();
        let ev = check_collision(&a, &c).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].joint_probability, 0.25);
        assert_eq!(ev[0].overlap, b);
    }

    #[test]
    fn disjoint_and_touching() {
        let a = SpatioTemporalSpec::new("a", vec![entry(0, Aabb::new(0.0, 1.0, 0.0, 1.0), 1.0)]).unwrap();
        let b = SpatioTemporalSpec::new("b", vec![entry(0, Aabb::new(1.0, 2.0, 0.0, 1.0), 1.0)]).unwrap();
        assert!(check_collision(&a, &b).unwrap().is_empty());
    }

    #[test]
    fn cadence_mismatch() {
        let b = Aabb::new(0.0, 1.0, 0.0, 1.0);
        let a = SpatioTemporalSpec::new("a", vec![entry(0, b, 1.0), entry(5, b, 1.0)]).unwrap();
        let c = SpatioTemporalSpec::new("b", vec![entry(0, b, 1.0), entry(10, b, 1.0)]).unwrap();
        assert_eq!(check_collision(&a, &c).unwrap_err(), SpatialError::CadenceMismatch { a: 5, b: 10 });
    }

    #[test]
    fn filtering() {
        let b = Aabb::new(0.0, 1.0, 0.0, 1.0);
        let ev = |p| CollisionEvent { time: 0, box_a: b, box_b: b, overlap: b, joint_probability: p };
        let events = vec![ev(2.5e-15), ev(0.3)];
        assert_eq!(threshold_filter(&events, 1e-10), vec![ev(0.3)]);
        assert_eq!(threshold_filter(&events, 0.0), events);
    }

    #[test]
    fn widening() {
        let hall = Aabb::new(0.0, 120.0, 0.0, 30.0);
        let spec =
            SpatioTemporalSpec::new("r", vec![entry(2_000_000, Aabb::new(10.0, 12.0, 14.0, 16.0), 1.0)]).unwrap();
        let zero = SpeedError::new(vec![(0.0, 1.0)]).unwrap();
        assert_eq!(widen_by_speed_error(&spec, &zero, u64::MAX, &hall)[0].1, spec);
        let err = SpeedError::new(vec![(0.1, 1.0)]).unwrap();
        let w = widen_by_speed_error(&spec, &err, u64::MAX, &hall);
        let r = w[0].1.entries()[0].region;
        assert!((r.x_min - 9.8).abs() < 1e-12 && (r.x_max - 12.2).abs() < 1e-12);
        assert!(SpeedError::new(vec![(0.1, 0.5)]).is_err());
    }
}
