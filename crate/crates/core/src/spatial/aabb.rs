use std::fmt;

/// Axis-aligned rectangle `[x_min, x_max] x [y_min, y_max]` in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Aabb {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Aabb { x_min, x_max, y_min, y_max }
    }

    pub fn centered(cx: f64, cy: f64, width: f64, height: f64) -> Self {
        Aabb::new(cx - width / 2.0, cx + width / 2.0, cy - height / 2.0, cy + height / 2.0)
    }

    pub fn is_valid(&self) -> bool {
        self.x_min < self.x_max
            && self.y_min < self.y_max
            && [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite())
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min).max(0.0) * (self.y_max - self.y_min).max(0.0)
    }

    /// Overlap with positive area, if any.
    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        let b = Aabb::new(
            self.x_min.max(other.x_min),
            self.x_max.min(other.x_max),
            self.y_min.max(other.y_min),
            self.y_max.min(other.y_max),
        );
        (b.x_min < b.x_max && b.y_min < b.y_max).then_some(b)
    }

    pub fn contains(&self, other: &Aabb) -> bool {
        self.x_min <= other.x_min && other.x_max <= self.x_max && self.y_min <= other.y_min && other.y_max <= self.y_max
    }

    /// Intersection with `bounds`, or `None` when nothing is left.
    pub fn clamp_to(&self, bounds: &Aabb) -> Option<Aabb> {
        self.intersection(bounds)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }
}

impl fmt::Display for Aabb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}] x [{:?}, {:?}]", self.x_min, self.x_max, self.y_min, self.y_max)
    }
}
