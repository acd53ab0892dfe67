//! Difference-equation simulation of the robot, the human and the
//! three-mode safety controller.

use std::collections::VecDeque;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::spatial::Aabb;

/// Simulation time in microseconds.
pub type Micros = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Normal,
    Yellow,
    Red,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Normal => "normal",
            Mode::Yellow => "yellow",
            Mode::Red => "red",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(Mode::Normal),
            "yellow" => Ok(Mode::Yellow),
            "red" => Ok(Mode::Red),
            _ => Err(format!("unknown mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub hall_width: f64,
    pub hall_depth: f64,
    pub robot_size: f64,
    /// x coordinate of track position 0; the track runs along `y = hall_depth / 2`.
    pub track_start_x: f64,
    pub track_length: f64,
    pub robot_max_speed: f64,
    pub normal_accel: f64,
    pub yellow_decel: f64,
    pub red_decel: f64,
    pub yellow_speed: f64,
    pub creep_speed: f64,
    pub creep_zone: f64,
    pub yellow_threshold: f64,
    pub red_threshold: f64,
    pub physics_step: Micros,
    pub poll_period: Micros,
    /// Offset of the first poll.
    pub poll_phase: Micros,
    pub reaction_delay: Micros,
    pub human_speed: f64,
    pub human_size: f64,
    pub robot_start: f64,
    pub robot_start_speed: f64,
    /// Human center at t = 0; `None` for an empty hall.
    pub human_start: Option<(f64, f64)>,
    pub time_cap: Micros,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            hall_width: 120.0,
            hall_depth: 30.0,
            robot_size: 2.0,
            track_start_x: 10.0,
            track_length: 100.0,
            robot_max_speed: 10.0,
            normal_accel: 5.0,
            yellow_decel: 10.0,
            red_decel: 15.0,
            yellow_speed: 2.0,
            creep_speed: 1.0,
            creep_zone: 11.0,
            yellow_threshold: 25.0,
            red_threshold: 10.0,
            physics_step: 5_000,
            poll_period: 10_000,
            poll_phase: 5_000,
            reaction_delay: 500_000,
            human_speed: 10.0,
            human_size: 0.5,
            robot_start: 40.0,
            robot_start_speed: 10.0,
            human_start: Some((75.01, 15.0)),
            time_cap: 60_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("`{0}` must be positive")]
    NotPositive(&'static str),
    #[error("red threshold must be below the yellow threshold")]
    Thresholds,
    #[error("physics step must divide the poll period")]
    StepDoesNotDividePoll,
    #[error("poll phase must be a multiple of the physics step")]
    PhaseOffGrid,
    #[error("robot start must lie on the track")]
    StartOffTrack,
    #[error("robot start speed must lie in [0, max speed]")]
    StartSpeed,
    #[error("delays must be sorted ascending")]
    UnsortedDelays,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("hall_width", self.hall_width),
            ("hall_depth", self.hall_depth),
            ("robot_size", self.robot_size),
            ("track_length", self.track_length),
            ("robot_max_speed", self.robot_max_speed),
            ("normal_accel", self.normal_accel),
            ("yellow_decel", self.yellow_decel),
            ("red_decel", self.red_decel),
            ("yellow_speed", self.yellow_speed),
            ("creep_speed", self.creep_speed),
            ("creep_zone", self.creep_zone),
            ("yellow_threshold", self.yellow_threshold),
            ("red_threshold", self.red_threshold),
            ("human_speed", self.human_speed),
            ("human_size", self.human_size),
            ("physics_step", self.physics_step as f64),
            ("poll_period", self.poll_period as f64),
            ("time_cap", self.time_cap as f64),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::NotPositive(name));
            }
        }
        if self.red_threshold >= self.yellow_threshold {
            return Err(ConfigError::Thresholds);
        }
        if self.poll_period % self.physics_step != 0 {
            return Err(ConfigError::StepDoesNotDividePoll);
        }
        if self.poll_phase % self.physics_step != 0 {
            return Err(ConfigError::PhaseOffGrid);
        }
        if !(0.0..=self.track_length).contains(&self.robot_start) {
            return Err(ConfigError::StartOffTrack);
        }
        if !(0.0..=self.robot_max_speed).contains(&self.robot_start_speed) {
            return Err(ConfigError::StartSpeed);
        }
        Ok(())
    }

    pub fn track_y(&self) -> f64 {
        self.hall_depth / 2.0
    }

    pub fn hall(&self) -> Aabb {
        Aabb::new(0.0, self.hall_width, 0.0, self.hall_depth)
    }

    pub fn robot_box(&self, pos: f64) -> Aabb {
        Aabb::centered(self.track_start_x + pos, self.track_y(), self.robot_size, self.robot_size)
    }

    pub fn human_box(&self, at: (f64, f64)) -> Aabb {
        Aabb::centered(at.0, at.1, self.human_size, self.human_size)
    }
}

/// Mode chosen for a human at `distance` meters.
pub fn controller_decide(distance: f64, config: &ScenarioConfig) -> Mode {
    if distance >= config.yellow_threshold {
        Mode::Normal
    } else if distance > config.red_threshold {
        Mode::Yellow
    } else {
        Mode::Red
    }
}

pub fn target_speed(mode: Mode, robot_pos: f64, config: &ScenarioConfig) -> f64 {
    let creeping = robot_pos >= config.track_length - config.creep_zone;
    match mode {
        Mode::Normal if creeping => config.creep_speed,
        Mode::Normal => config.robot_max_speed,
        Mode::Yellow if creeping => config.creep_speed.min(config.yellow_speed),
        Mode::Yellow => config.yellow_speed,
        Mode::Red => 0.0,
    }
}

fn mode_rate(mode: Mode, config: &ScenarioConfig) -> f64 {
    match mode {
        Mode::Normal => config.normal_accel,
        Mode::Yellow => config.yellow_decel,
        Mode::Red => config.red_decel,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub time: Micros,
    pub robot_pos: f64,
    pub robot_speed: f64,
    pub human: Option<(f64, f64)>,
    pub mode: Mode,
    /// `(apply_at, mode)` in decision order.
    pub pending: VecDeque<(Micros, Mode)>,
}

impl SimState {
    pub fn initial(config: &ScenarioConfig) -> Self {
        SimState {
            time: 0,
            robot_pos: config.robot_start,
            robot_speed: config.robot_start_speed,
            human: config.human_start,
            mode: Mode::Normal,
            pending: VecDeque::new(),
        }
    }

    pub fn robot_center(&self, config: &ScenarioConfig) -> (f64, f64) {
        (config.track_start_x + self.robot_pos, config.track_y())
    }

    pub fn distance(&self, config: &ScenarioConfig) -> Option<f64> {
        let (rx, ry) = self.robot_center(config);
        self.human.map(|(hx, hy)| (hx - rx).hypot(hy - ry))
    }
}

/// One explicit step: the speed moves toward the mode's target without
/// overshooting it, then the position advances with the new speed. The
/// human runs straight at the robot's center.
pub fn physics_step(state: &SimState, config: &ScenarioConfig) -> SimState {
    let dt = config.physics_step as f64 * 1e-6;
    let target = target_speed(state.mode, state.robot_pos, config);
    let dv = mode_rate(state.mode, config) * dt;
    let speed = if state.robot_speed < target {
        (state.robot_speed + dv).min(target)
    } else {
        (state.robot_speed - dv).max(target)
    };
    let speed = speed.clamp(-config.robot_max_speed, config.robot_max_speed);
    let pos = (state.robot_pos + speed * dt).clamp(0.0, config.track_length);
    let mut next = SimState {
        time: state.time + config.physics_step,
        robot_pos: pos,
        robot_speed: speed,
        human: state.human,
        mode: state.mode,
        pending: state.pending.clone(),
    };
    if let Some((hx, hy)) = state.human {
        let (rx, ry) = next.robot_center(config);
        let (dx, dy) = (rx - hx, ry - hy);
        let d = dx.hypot(dy);
        let step = config.human_speed * dt;
        let h = if d <= step { (rx, ry) } else { (hx + dx / d * step, hy + dy / d * step) };
        let half = config.human_size / 2.0;
        next.human = Some((h.0.clamp(half, config.hall_width - half), h.1.clamp(half, config.hall_depth - half)));
    }
    next
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub timestamp: Micros,
    pub robot_box: Aabb,
    pub human_box: Option<Aabb>,
    pub robot_speed: f64,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactReport {
    pub reaction_delay: Micros,
    pub collided: bool,
    pub impact_time: Option<Micros>,
    pub robot_speed_at_impact: Option<f64>,
    /// Time and speed when the robot reached the end of the track.
    pub arrival: Option<(Micros, f64)>,
    /// Mode changes actually applied, with their times.
    pub mode_changes: Vec<(Micros, Mode)>,
}

impl ImpactReport {
    /// Impact speed, counting "no impact" as 0.
    pub fn severity(&self) -> f64 {
        self.robot_speed_at_impact.unwrap_or(0.0)
    }
}

fn record(state: &SimState, config: &ScenarioConfig) -> TraceRecord {
    TraceRecord {
        timestamp: state.time,
        robot_box: config.robot_box(state.robot_pos),
        human_box: state.human.map(|h| config.human_box(h)),
        robot_speed: state.robot_speed,
        mode: state.mode,
    }
}

/// Runs until impact, until the robot reaches the end of an empty hall, or
/// until the time cap.
pub fn run_scenario(config: &ScenarioConfig) -> Result<(Vec<TraceRecord>, ImpactReport), ConfigError> {
    config.validate()?;
    let mut state = SimState::initial(config);
    let mut trace = vec![record(&state, config)];
    let mut decided = state.mode;
    let mut report = ImpactReport {
        reaction_delay: config.reaction_delay,
        collided: false,
        impact_time: None,
        robot_speed_at_impact: None,
        arrival: None,
        mode_changes: Vec::new(),
    };
    while state.time < config.time_cap {
        let t = state.time;
        if t >= config.poll_phase && (t - config.poll_phase) % config.poll_period == 0 {
            if let Some(d) = state.distance(config) {
                let m = controller_decide(d, config);
                if m != decided {
                    decided = m;
                    state.pending.push_back((t + config.reaction_delay, m));
                }
            }
        }
        while let Some(&(at, m)) = state.pending.front() {
            if at > t {
                break;
            }
            state.pending.pop_front();
            if m != state.mode {
                state.mode = m;
                report.mode_changes.push((t, m));
            }
        }
        let arrived_before = state.robot_pos >= config.track_length;
        state = physics_step(&state, config);
        if !arrived_before && state.robot_pos >= config.track_length {
            report.arrival = Some((state.time, state.robot_speed));
            state.robot_speed = 0.0;
        }
        let rec = record(&state, config);
        let hit = rec.human_box.map_or(false, |h| h.intersection(&rec.robot_box).is_some());
        trace.push(rec);
        if hit {
            report.collided = true;
            report.impact_time = Some(state.time);
            report.robot_speed_at_impact = Some(state.robot_speed);
            break;
        }
        if report.arrival.is_some() && state.human.is_none() {
            break;
        }
    }
    Ok((trace, report))
}

/// One run per delay, in the given (ascending) order.
pub fn worst_case_sweep(config: &ScenarioConfig, delays: &[Micros]) -> Result<Vec<ImpactReport>, ConfigError> {
    if delays.windows(2).any(|w| w[1] < w[0]) {
        return Err(ConfigError::UnsortedDelays);
    }
    delays
        .iter()
        .map(|&d| {
            let cfg = ScenarioConfig { reaction_delay: d, ..config.clone() };
            run_scenario(&cfg).map(|(_, r)| r)
        })
        .collect()
}

/// True when impact speed never decreases along the sweep.
pub fn is_monotone(reports: &[ImpactReport]) -> bool {
    reports.windows(2).all(|w| w[0].severity() <= w[1].severity())
}

/// Exact decimal seconds for a microsecond count, e.g. `0.005`.
pub fn format_seconds(t: Micros) -> String {
    let whole = t / 1_000_000;
    let frac = t % 1_000_000;
    if frac == 0 {
        return format!("{whole}");
    }
    let s = format!("{whole}.{frac:06}");
    s.trim_end_matches('0').to_string()
}

/// Parses decimal seconds into microseconds without going through floats.
pub fn parse_seconds(text: &str) -> Option<Micros> {
    let t = text.trim();
    let (whole, frac) = match t.split_once('.') {
        Some((w, f)) => (w, f),
        None => (t, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return None;
    }
    if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) || frac.len() > 6 {
        return None;
    }
    let w: u64 = if whole.is_empty() { 0 } else { whole.parse().ok()? };
    let f: u64 = if frac.is_empty() { 0 } else { format!("{frac:0<6}").parse().ok()? };
    w.checked_mul(1_000_000)?.checked_add(f)
}

pub const TRACE_HEADER: [&str; 11] = [
    "timestamp_s",
    "robot_xmin",
    "robot_xmax",
    "robot_ymin",
    "robot_ymax",
    "human_xmin",
    "human_xmax",
    "human_ymin",
    "human_ymax",
    "speed_mps",
    "mode",
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("trace header does not match the expected columns")]
    Header,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_trace<W: Write>(out: W, trace: &[TraceRecord]) -> Result<(), TraceError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in trace {
        let num = |v: f64| format!("{v:?}");
        let mut row = vec![
            format_seconds(r.timestamp),
            num(r.robot_box.x_min),
            num(r.robot_box.x_max),
            num(r.robot_box.y_min),
            num(r.robot_box.y_max),
        ];
        match r.human_box {
            Some(h) => row.extend([num(h.x_min), num(h.x_max), num(h.y_min), num(h.y_max)]),
            None => row.extend(std::iter::repeat(String::new()).take(4)),
        }
        row.push(num(r.robot_speed));
        row.push(r.mode.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace; rows are numbered from 1 after the header.
pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).ne(TRACE_HEADER.iter().copied()) {
        return Err(TraceError::Header);
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let bad = |message: String| TraceError::Malformed { row: row_no, message };
        let row = row.map_err(|e| bad(e.to_string()))?;
        if row.len() != TRACE_HEADER.len() {
            return Err(bad(format!("expected {} fields, found {}", TRACE_HEADER.len(), row.len())));
        }
        let field = |k: usize| row[k].trim();
        let num = |k: usize| -> Result<f64, TraceError> {
            field(k)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("`{}` is not a number in column {}", field(k), TRACE_HEADER[k])))
        };
        let timestamp = parse_seconds(field(0)).ok_or_else(|| bad(format!("bad timestamp `{}`", field(0))))?;
        let robot_box = Aabb::new(num(1)?, num(2)?, num(3)?, num(4)?);
        let human_box = if (5..9).all(|k| field(k).is_empty()) {
            None
        } else {
            Some(Aabb::new(num(5)?, num(6)?, num(7)?, num(8)?))
        };
        for (b, what) in [(Some(robot_box), "robot"), (human_box, "human")] {
            if let Some(b) = b {
                if !b.is_valid() {
                    return Err(bad(format!("{what} box is empty")));
                }
            }
        }
        let robot_speed = num(9)?;
        let mode = field(10).parse::<Mode>().map_err(bad)?;
        if let Some(prev) = out.last().map(|r: &TraceRecord| r.timestamp) {
            if timestamp <= prev {
                return Err(bad("timestamps must increase".into()));
            }
        }
        out.push(TraceRecord { timestamp, robot_box, human_box, robot_speed, mode });
    }
    Ok(out)
}
