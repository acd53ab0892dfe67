//! Discrete delay distributions over integer ticks.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::prob::Prob;

/// Time in units of 100 µs.
pub type Tick = u64;

/// Seconds per tick.
pub const TICK_SECONDS: f64 = 1e-4;
pub const TICKS_PER_SECOND: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistributionError {
    #[error("distribution has no points")]
    Empty,
    #[error("ticks must be strictly increasing (tick {tick} follows {previous})")]
    TicksNotIncreasing { previous: Tick, tick: Tick },
    #[error("cumulative probability decreases at tick {tick}")]
    NotMonotone { tick: Tick },
    #[error("probability at tick {tick} is outside [0, 1]")]
    OutOfRange { tick: Tick },
    #[error("final cumulative probability is {0}, expected exactly 1")]
    FinalNotOne(Prob),
    #[error("mass at tick {tick} must be positive")]
    NonPositiveMass { tick: Tick },
    #[error("masses sum to {0}, expected exactly 1")]
    MassNotOne(Prob),
}

/// Accumulative distribution: `(tick, P(delay <= tick))` knots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayCdf {
    points: Vec<(Tick, Prob)>,
}

impl DelayCdf {
    pub fn new(points: Vec<(Tick, Prob)>) -> Result<Self, DistributionError> {
        if points.is_empty() {
            return Err(DistributionError::Empty);
        }
        let mut prev: Option<&(Tick, Prob)> = None;
        for pt in &points {
            if !pt.1.in_unit_interval() {
                return Err(DistributionError::OutOfRange { tick: pt.0 });
            }
            if let Some(q) = prev {
                if pt.0 <= q.0 {
                    return Err(DistributionError::TicksNotIncreasing { previous: q.0, tick: pt.0 });
                }
                if pt.1 < q.1 {
                    return Err(DistributionError::NotMonotone { tick: pt.0 });
                }
            }
            prev = Some(pt);
        }
        let last = &points[points.len() - 1].1;
        if !last.is_one() {
            return Err(DistributionError::FinalNotOne(last.clone()));
        }
        Ok(DelayCdf { points })
    }

    /// Convenience for literals; panics on invalid input.
    pub fn from_strs(points: &[(Tick, &str)]) -> Self {
        let pts = points.iter().map(|(t, p)| (*t, Prob::parse(p).expect("probability literal"))).collect();
        DelayCdf::new(pts).expect("valid cdf")
    }

    pub fn points(&self) -> &[(Tick, Prob)] {
        &self.points
    }

    pub fn min_tick(&self) -> Tick {
        self.points[0].0
    }

    pub fn max_tick(&self) -> Tick {
        self.points[self.points.len() - 1].0
    }

    /// Cumulative probability at `t` (step function through the knots).
    pub fn at(&self, t: Tick) -> Prob {
        match self.points.partition_point(|(k, _)| *k <= t) {
            0 => Prob::zero(),
            i => self.points[i - 1].1.clone(),
        }
    }
}

/// Point masses at strictly increasing ticks, each positive, summing to 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayPmf {
    masses: Vec<(Tick, Prob)>,
}

impl DelayPmf {
    pub fn new(masses: Vec<(Tick, Prob)>) -> Result<Self, DistributionError> {
        if masses.is_empty() {
            return Err(DistributionError::Empty);
        }
        for w in masses.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(DistributionError::TicksNotIncreasing { previous: w[0].0, tick: w[1].0 });
            }
        }
        for (t, p) in &masses {
            if p.is_zero() || p.is_negative() {
                return Err(DistributionError::NonPositiveMass { tick: *t });
            }
        }
        let total: Prob = masses.iter().map(|(_, p)| p.clone()).sum();
        if !total.is_one() {
            return Err(DistributionError::MassNotOne(total));
        }
        Ok(DelayPmf { masses })
    }

    pub fn point(t: Tick) -> Self {
        DelayPmf { masses: vec![(t, Prob::one())] }
    }

    pub fn from_strs(masses: &[(Tick, &str)]) -> Self {
        let ms = masses.iter().map(|(t, p)| (*t, Prob::parse(p).expect("probability literal"))).collect();
        DelayPmf::new(ms).expect("valid pmf")
    }

    pub fn masses(&self) -> &[(Tick, Prob)] {
        &self.masses
    }

    pub fn min_tick(&self) -> Tick {
        self.masses[0].0
    }

    pub fn max_tick(&self) -> Tick {
        self.masses[self.masses.len() - 1].0
    }

    pub fn mass_at(&self, t: Tick) -> Prob {
        match self.masses.binary_search_by_key(&t, |(k, _)| *k) {
            Ok(i) => self.masses[i].1.clone(),
            Err(_) => Prob::zero(),
        }
    }

    fn from_map(map: BTreeMap<Tick, Prob>) -> Self {
        DelayPmf { masses: map.into_iter().filter(|(_, p)| !p.is_zero()).collect() }
    }
}

impl fmt::Display for DelayPmf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.masses.iter().map(|(t, p)| format!("{t}:{p}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// Successive differences of the knots; zero-mass steps are dropped.
pub fn cdf_to_pmf(cdf: &DelayCdf) -> DelayPmf {
    let mut prev = Prob::zero();
    let mut masses = Vec::with_capacity(cdf.points.len());
    for (t, c) in &cdf.points {
        let m = c - &prev;
        if !m.is_zero() {
            masses.push((*t, m));
        }
        prev = c.clone();
    }
    DelayPmf { masses }
}

pub fn pmf_to_cdf(pmf: &DelayPmf) -> DelayCdf {
    let mut acc = Prob::zero();
    let points = pmf
        .masses
        .iter()
        .map(|(t, p)| {
            acc = &acc + p;
            (*t, acc.clone())
        })
        .collect();
    DelayCdf { points }
}

/// Distribution of the sum of two independent delays.
pub fn convolve(a: &DelayPmf, b: &DelayPmf) -> DelayPmf {
    let mut out: BTreeMap<Tick, Prob> = BTreeMap::new();
    for (u, pu) in &a.masses {
        for (v, pv) in &b.masses {
            let slot = out.entry(u + v).or_insert_with(Prob::zero);
            *slot = &*slot + &(pu * pv);
        }
    }
    DelayPmf::from_map(out)
}

/// Sum of any number of independent delays; the empty sum is a point mass at 0.
pub fn convolve_all<'a, I: IntoIterator<Item = &'a DelayPmf>>(pmfs: I) -> DelayPmf {
    pmfs.into_iter().fold(DelayPmf::point(0), |acc, p| convolve(&acc, p))
}

/// Distribution of the later of two independent delays (a parallel join).
pub fn maximum(a: &DelayPmf, b: &DelayPmf) -> DelayPmf {
    let mut out: BTreeMap<Tick, Prob> = BTreeMap::new();
    for (u, pu) in &a.masses {
        for (v, pv) in &b.masses {
            let slot = out.entry(*u.max(v)).or_insert_with(Prob::zero);
            *slot = &*slot + &(pu * pv);
        }
    }
    DelayPmf::from_map(out)
}

/// Each knot's mass moved to the previous knot (0 for the first). This is
/// the completion time when a branch that may fire anywhere in
/// `[tick_{i-1}, tick_i]` always fires as early as it can.
pub fn earliest_completion(cdf: &DelayCdf) -> DelayPmf {
    let mut out: BTreeMap<Tick, Prob> = BTreeMap::new();
    let mut lower = 0;
    let mut prev = Prob::zero();
    for (t, c) in &cdf.points {
        let m = c - &prev;
        if !m.is_zero() {
            let slot = out.entry(lower).or_insert_with(Prob::zero);
            *slot = &*slot + &m;
        }
        lower = *t;
        prev = c.clone();
    }
    DelayPmf::from_map(out)
}

pub fn prob_at_most(pmf: &DelayPmf, t: Tick) -> Prob {
    pmf.masses.iter().take_while(|(k, _)| *k <= t).map(|(_, p)| p.clone()).sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistogramBin {
    pub bin_start: Tick,
    pub bin_width: Tick,
    pub mass: Prob,
}

/// Bins `[k*w, (k+1)*w)` from the bin holding the first mass to the bin
/// holding the last. Empty bins in between are kept.
pub fn histogram(pmf: &DelayPmf, bin_width: Tick) -> Vec<HistogramBin> {
    assert!(bin_width > 0, "bin width must be positive");
    let first = pmf.min_tick() / bin_width;
    let last = pmf.max_tick() / bin_width;
    let mut bins: Vec<HistogramBin> =
        (first..=last).map(|k| HistogramBin { bin_start: k * bin_width, bin_width, mass: Prob::zero() }).collect();
    for (t, p) in &pmf.masses {
        let b = &mut bins[(t / bin_width - first) as usize];
        b.mass = &b.mass + p;
    }
    bins
}

/// The four execution-time distributions of the moving-robot case study.
pub mod table1 {
    use super::DelayCdf;

    pub fn sensor_fetch() -> DelayCdf {
        DelayCdf::from_strs(&[(150, "0.10"), (170, "0.40"), (180, "0.85"), (190, "0.99998"), (200, "1")])
    }

    pub fn recognition() -> DelayCdf {
        DelayCdf::from_strs(&[(2500, "0.1"), (2600, "0.3"), (2700, "0.6"), (2800, "0.9"), (2850, "0.99"), (2900, "1")])
    }

    pub fn communication() -> DelayCdf {
        DelayCdf::from_strs(&[(150, "0.8"), (160, "0.98"), (165, "0.995"), (169, "0.9999999995"), (200, "1")])
    }

    pub fn robot_processing() -> DelayCdf {
        DelayCdf::from_strs(&[(1500, "0.05"), (1590, "0.90"), (1600, "0.95"), (1650, "0.999995"), (1700, "1")])
    }

    pub fn all() -> [(&'static str, DelayCdf); 4] {
        [
            ("sensor_fetch", sensor_fetch()),
            ("recognition", recognition()),
            ("communication", communication()),
            ("robot_processing", robot_processing()),
        ]
    }
}
