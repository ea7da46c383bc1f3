use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = (f64, f64);

/// An infinite line stored as an anchor point and a unit direction.
///
/// The direction is kept in canonical orientation (`dy > 0`, or `dy == 0`
/// and `dx > 0`) so each geometric line has exactly one direction vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line2D {
    anchor: Point,
    direction: Point,
}

fn canonical(dx: f64, dy: f64) -> Point {
    let (dx, dy) = if dy < 0.0 || (dy == 0.0 && dx < 0.0) {
        (-dx, -dy)
    } else {
        (dx, dy)
    };
    // fold -0.0 into 0.0
    (dx + 0.0, dy + 0.0)
}

impl Line2D {
    /// Builds a line from any non-zero direction vector.
    pub fn new(anchor: Point, direction: Point) -> Option<Self> {
        let norm = direction.0.hypot(direction.1);
        if !(norm.is_finite() && norm > 0.0) || !anchor.0.is_finite() || !anchor.1.is_finite() {
            return None;
        }
        Some(Self {
            anchor,
            direction: canonical(direction.0 / norm, direction.1 / norm),
        })
    }

    /// Line through two distinct points, anchored at the first.
    pub fn through(p1: Point, p2: Point) -> Result<Self> {
        if p1 == p2 {
            return Err(Error::CoincidentEndpoints(p1.0, p1.1));
        }
        Self::new(p1, (p2.0 - p1.0, p2.1 - p1.1)).ok_or(Error::CoincidentEndpoints(p1.0, p1.1))
    }

    pub fn anchor(&self) -> Point {
        self.anchor
    }

    pub fn direction(&self) -> Point {
        self.direction
    }

    /// Direction angle in radians from +x towards +y, in `[0, pi)`.
    pub fn angle(&self) -> f64 {
        self.direction.1.atan2(self.direction.0)
    }

    /// Signed position of `p` along the line, relative to the anchor.
    pub fn project_scalar(&self, p: Point) -> f64 {
        (p.0 - self.anchor.0) * self.direction.0 + (p.1 - self.anchor.1) * self.direction.1
    }

    pub fn point_at(&self, t: f64) -> Point {
        (
            self.anchor.0 + t * self.direction.0,
            self.anchor.1 + t * self.direction.1,
        )
    }

    /// Orthogonal projection of `p` onto the line.
    pub fn project(&self, p: Point) -> Point {
        self.point_at(self.project_scalar(p))
    }

    /// Signed perpendicular offset (positive to the left of the direction).
    pub fn signed_distance(&self, p: Point) -> f64 {
        (p.1 - self.anchor.1) * self.direction.0 - (p.0 - self.anchor.0) * self.direction.1
    }
}

/// Perpendicular distance from `point` to `line`.
pub fn residual(line: &Line2D, point: Point) -> f64 {
    line.signed_distance(point).abs()
}
