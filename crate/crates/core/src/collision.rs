//! Collision certification for rectangular vehicles and obstacles.
//!
//! The corner condition (no corner of either rectangle inside the other) is
//! cheap but not sufficient for disjointness. Combined with disjointness at
//! the previous sample and a time step below `d_under / v_bar`, it is.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynamics::ControlBounds;
use crate::error::{Error, Result};
use crate::levelset::{rect_pair_level, Obstacle, Point, Rect};

pub use crate::levelset::rect_corners;

fn project(corners: &[Point; 4], axis: Point) -> (f64, f64) {
    corners.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p[0] * axis[0] + p[1] * axis[1];
        (lo.min(d), hi.max(d))
    })
}

/// Exact overlap test for closed rotated rectangles by separating axes.
/// Touching rectangles intersect.
pub fn exact_rect_intersect(a: &Rect, b: &Rect) -> bool {
    let ca = a.corners();
    let cb = b.corners();
    for yaw in [a.yaw, b.yaw] {
        let (s, c) = yaw.sin_cos();
        for axis in [[c, s], [-s, c]] {
            let (alo, ahi) = project(&ca, axis);
            let (blo, bhi) = project(&cb, axis);
            if ahi < blo || bhi < alo {
                return false;
            }
        }
    }
    true
}

/// True iff every obstacle corner lies outside the vehicle and every vehicle
/// corner outside every obstacle.
pub fn corner_condition(vehicle: &Rect, obstacles: &[Rect]) -> bool {
    obstacles.iter().all(|o| rect_pair_level(vehicle, o) < 0.0)
}

pub fn any_overlap(vehicle: &Rect, obstacles: &[Rect]) -> bool {
    obstacles.iter().any(|o| exact_rect_intersect(vehicle, o))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyBound {
    /// Smallest half-length among vehicle and obstacles.
    pub d_under: f64,
    /// Bound on the relative speed of any vehicle corner and obstacle corner.
    pub v_bar: f64,
    /// `d_under / v_bar`, infinite for a static scene.
    pub dt_max: f64,
}

impl SafetyBound {
    pub fn new(d_under: f64, v_bar: f64) -> Result<Self> {
        if !(d_under > 0.0) || !(v_bar >= 0.0) {
            return Err(Error::arg(format!("invalid safety bound d={d_under}, v={v_bar}")));
        }
        let dt_max = if v_bar == 0.0 { f64::INFINITY } else { d_under / v_bar };
        Ok(SafetyBound { d_under, v_bar, dt_max })
    }
}

/// Closed-form over-bound of the relative corner speed: the vehicle corner
/// speed `v_max + w_max |l|` plus the fastest obstacle point.
pub fn compute_safety_bound(
    vehicle_half: [f64; 2],
    bounds: &ControlBounds,
    obstacles: &[Obstacle],
    v_max: f64,
) -> Result<SafetyBound> {
    if !vehicle_half.iter().all(|h| *h > 0.0) {
        return Err(Error::arg("vehicle half-lengths must be positive"));
    }
    let d_under =
        obstacles.iter().map(|o| o.shape.min_half_length()).fold(vehicle_half[0].min(vehicle_half[1]), f64::min);
    if !(d_under > 0.0) {
        return Err(Error::arg("obstacle half-lengths must be positive"));
    }
    let vehicle_speed = v_max.abs() + bounds.w_max * vehicle_half[0].hypot(vehicle_half[1]);
    let obstacle_speed = obstacles.iter().map(|o| o.motion.max_point_speed(o.shape.extent())).fold(0.0, f64::max);
    SafetyBound::new(d_under, vehicle_speed + obstacle_speed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Certified;

/// Hypothesis of the step certificate that failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    NotDisjointAtStart,
    CornerCondition,
    TimeStepTooLarge,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Violation::NotDisjointAtStart => "vehicle not disjoint at step start",
            Violation::CornerCondition => "corner condition fails at step end",
            Violation::TimeStepTooLarge => "time-step too large",
        })
    }
}

/// Disjointness at `t_{n+1}` from disjointness at `t_n`, the corner
/// condition at `t_{n+1}` and `dt < dt_max`.
pub fn certify_step(
    disjoint_at_start: bool,
    corner_at_end: bool,
    dt: f64,
    bound: &SafetyBound,
) -> std::result::Result<Certified, Violation> {
    if !disjoint_at_start {
        Err(Violation::NotDisjointAtStart)
    } else if !corner_at_end {
        Err(Violation::CornerCondition)
    } else if !(dt < bound.dt_max) {
        Err(Violation::TimeStepTooLarge)
    } else {
        Ok(Certified)
    }
}

/// Lower bound on the distance over `[t_n, t_n + dt]` given the distances
/// at both ends.
pub fn interstep_distance_bound(d_tn: f64, d_tn1: f64, v_bar: f64, dt: f64) -> f64 {
    d_tn.min(d_tn1) - v_bar * dt / 2.0
}

/// Avoidance holds on the whole interval when both endpoint values clear the
/// margin `eps` and the step is short enough for the margin to absorb motion.
pub fn secure_margin_check(g_tn: f64, g_tn1: f64, eps: f64, v_bar: f64, dt: f64) -> bool {
    g_tn.max(g_tn1) <= -eps && v_bar * dt / 2.0 <= eps
}

/// Per-step label written to trajectory output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertLabel {
    /// Step certificate holds.
    Yes,
    /// Certificate fails but the margin check covers the interval.
    Margin,
    Violated,
}

impl CertLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CertLabel::Yes => "yes",
            CertLabel::Margin => "margin",
            CertLabel::Violated => "violated",
        }
    }
}

impl fmt::Display for CertLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
