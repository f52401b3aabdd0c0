//! Level-set functions for targets, roads and obstacles.
//!
//! Sign convention: `g(z, s) <= 0` means the constraint holds. Sets are
//! combined with `max` (intersection) and `min` (union), which keeps every
//! expression Lipschitz.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Position and heading of a rigid body in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub center: Point,
    pub yaw: f64,
}

/// Closed rectangle `center + R(yaw) ([-hx, hx] x [-hy, hy])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub center: Point,
    pub yaw: f64,
    pub half: [f64; 2],
}

impl Rect {
    pub fn new(center: Point, yaw: f64, half: [f64; 2]) -> Self {
        Rect { center, yaw, half }
    }

    pub fn at(pose: Pose, half: [f64; 2]) -> Self {
        Rect::new(pose.center, pose.yaw, half)
    }

    pub fn corners(&self) -> [Point; 4] {
        rect_corners(self.center, self.yaw, self.half)
    }

    /// `>= 0` inside the rectangle, `< 0` outside.
    pub fn inclusion(&self, p: Point) -> f64 {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        box_inclusion([c * dx + s * dy, -s * dx + c * dy], self.half)
    }

    pub fn contains(&self, p: Point) -> bool {
        self.inclusion(p) >= 0.0
    }
}

pub fn rotate(p: Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

/// Corners `X + R(yaw) T_j l` with `T_j = diag((-1)^(j-1), (-1)^floor((j-1)/2))`.
pub fn rect_corners(center: Point, yaw: f64, half: [f64; 2]) -> [Point; 4] {
    const SIGNS: [[f64; 2]; 4] = [[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]];
    SIGNS.map(|t| {
        let r = rotate([t[0] * half[0], t[1] * half[1]], yaw);
        [center[0] + r[0], center[1] + r[1]]
    })
}

/// `d_l(X) = min(lx - |x|, ly - |y|)`: non-negative exactly on the box.
pub fn box_inclusion(p: Point, half: [f64; 2]) -> f64 {
    (half[0] - p[0].abs()).min(half[1] - p[1].abs())
}

/// Rectangle-pair avoidance value: the largest corner inclusion in either
/// direction. Negative iff no corner of one rectangle lies in the other.
pub fn rect_pair_level(vehicle: &Rect, obstacle: &Rect) -> f64 {
    let a = obstacle.corners().iter().map(|&p| vehicle.inclusion(p)).fold(f64::NEG_INFINITY, f64::max);
    let b = vehicle.corners().iter().map(|&p| obstacle.inclusion(p)).fold(f64::NEG_INFINITY, f64::max);
    a.max(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Rectangle { half: [f64; 2] },
    Disk { radius: f64 },
}

impl Shape {
    /// Distance from the reference point to the farthest point of the shape.
    pub fn extent(&self) -> f64 {
        match *self {
            Shape::Rectangle { half } => half[0].hypot(half[1]),
            Shape::Disk { radius } => radius,
        }
    }

    pub fn min_half_length(&self) -> f64 {
        match *self {
            Shape::Rectangle { half } => half[0].min(half[1]),
            Shape::Disk { radius } => radius,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Rectangle { half } => half.iter().all(|h| h.is_finite() && *h > 0.0),
            Shape::Disk { radius } => radius.is_finite() && radius > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::arg(format!("shape dimensions must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Motion {
    Fixed {
        center: Point,
        #[serde(default)]
        yaw: f64,
    },
    /// Constant velocity; the body faces its direction of travel.
    Linear { start: Point, velocity: Point },
    /// Straight-line braking from `speed` at rate `decel` until standstill.
    Decelerating { start: Point, heading: f64, speed: f64, decel: f64 },
    /// Uniform rotation on a circle of radius `radius`, tangent-aligned.
    Circular { center: Point, radius: f64, theta0: f64, omega: f64 },
}

impl Motion {
    pub fn pose(&self, s: f64) -> Pose {
        match *self {
            Motion::Fixed { center, yaw } => Pose { center, yaw },
            Motion::Linear { start, velocity } => Pose {
                center: [start[0] + s * velocity[0], start[1] + s * velocity[1]],
                yaw: if velocity == [0.0, 0.0] { 0.0 } else { velocity[1].atan2(velocity[0]) },
            },
            Motion::Decelerating { start, heading, speed, decel } => {
                let t = s.clamp(0.0, self.stop_time());
                let dist = speed * t - 0.5 * decel * t * t;
                let (sh, ch) = heading.sin_cos();
                Pose { center: [start[0] + dist * ch, start[1] + dist * sh], yaw: heading }
            }
            Motion::Circular { center, radius, theta0, omega } => {
                let th = theta0 + omega * s;
                let (st, ct) = th.sin_cos();
                Pose { center: [center[0] + radius * ct, center[1] + radius * st], yaw: th - FRAC_PI_2 }
            }
        }
    }

    /// Time at which a decelerating body comes to rest; `inf` if it never does.
    pub fn stop_time(&self) -> f64 {
        match *self {
            Motion::Decelerating { speed, decel, .. } if decel > 0.0 => speed / decel,
            Motion::Decelerating { .. } => f64::INFINITY,
            _ => f64::INFINITY,
        }
    }

    pub fn is_static(&self) -> bool {
        match *self {
            Motion::Fixed { .. } => true,
            Motion::Linear { velocity, .. } => velocity == [0.0, 0.0],
            Motion::Decelerating { speed, .. } => speed == 0.0,
            Motion::Circular { omega, radius, .. } => omega == 0.0 || radius == 0.0,
        }
    }

    /// Upper bound on the speed of any point at distance `extent` from the
    /// reference point.
    pub fn max_point_speed(&self, extent: f64) -> f64 {
        match *self {
            Motion::Fixed { .. } => 0.0,
            Motion::Linear { velocity, .. } => velocity[0].hypot(velocity[1]),
            Motion::Decelerating { speed, .. } => speed.abs(),
            Motion::Circular { radius, omega, .. } => omega.abs() * (radius.abs() + extent),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Motion::Decelerating { speed, decel, .. } => speed >= 0.0 && decel >= 0.0,
            Motion::Circular { radius, .. } => radius >= 0.0,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::arg(format!("invalid motion {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub shape: Shape,
    pub motion: Motion,
}

impl Obstacle {
    pub fn new(shape: Shape, motion: Motion) -> Result<Self> {
        shape.validate()?;
        motion.validate()?;
        Ok(Obstacle { shape, motion })
    }

    pub fn pose(&self, s: f64) -> Pose {
        self.motion.pose(s)
    }

    /// Same obstacle pinned at its pose at time `s`.
    pub fn frozen_at(&self, s: f64) -> Obstacle {
        let Pose { center, yaw } = self.pose(s);
        Obstacle { shape: self.shape, motion: Motion::Fixed { center, yaw } }
    }

    pub fn rect_at(&self, s: f64) -> Option<Rect> {
        match self.shape {
            Shape::Rectangle { half } => Some(Rect::at(self.pose(s), half)),
            Shape::Disk { .. } => None,
        }
    }
}

pub fn motion_pose(obstacle: &Obstacle, s: f64) -> Pose {
    obstacle.pose(s)
}

/// Annular sector `r_down <= rho <= r_up`, `theta_min <= Theta <= theta_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvedRoad {
    pub center: Point,
    pub r_down: f64,
    pub r_up: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl CurvedRoad {
    /// Continuous angle on the sector. The branch cut sits in the middle of
    /// the excluded arc, where both angular terms are equal, so the level set
    /// stays continuous across it.
    pub fn theta(&self, p: Point) -> f64 {
        let gap = TAU - (self.theta_max - self.theta_min);
        let cut = self.theta_max + 0.5 * gap;
        let raw = (p[1] - self.center[1]).atan2(p[0] - self.center[0]);
        let k = ((cut - raw) / TAU).floor();
        let mut th = raw + k * TAU;
        if th >= cut {
            th -= TAU;
        }
        th
    }

    pub fn eval(&self, p: Point) -> f64 {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let rho = dx.hypot(dy);
        let radial = (rho - self.r_up).max(self.r_down - rho);
        if rho == 0.0 {
            return radial;
        }
        let th = self.theta(p);
        radial.max(th - self.theta_max).max(self.theta_min - th)
    }
}

/// Level-set expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum LevelSetExpr {
    Constant(f64),
    /// `sum_k c_k z[axis_k] + offset`
    Affine {
        terms: Vec<(usize, f64)>,
        offset: f64,
    },
    /// `|z[axis] - anchor| - tol`
    Band {
        axis: usize,
        anchor: f64,
        tol: f64,
    },
    Curved(CurvedRoad),
    /// Disk vehicle of radius `vehicle_radius` against disk obstacles.
    Disks {
        vehicle_radius: f64,
        obstacles: Vec<Obstacle>,
    },
    /// Rectangular vehicle (pose from `z`) against rectangular obstacles.
    Rects {
        vehicle_half: [f64; 2],
        obstacles: Vec<Obstacle>,
    },
    /// `inner + margin`: feasible set shrunk by the margin.
    Shift(Box<LevelSetExpr>, f64),
    Max(Vec<LevelSetExpr>),
    Min(Vec<LevelSetExpr>),
}

impl LevelSetExpr {
    pub fn eval(&self, z: &[f64], s: f64) -> f64 {
        match self {
            LevelSetExpr::Constant(c) => *c,
            LevelSetExpr::Affine { terms, offset } => terms.iter().fold(*offset, |acc, &(j, c)| acc + c * z[j]),
            LevelSetExpr::Band { axis, anchor, tol } => (z[*axis] - anchor).abs() - tol,
            LevelSetExpr::Curved(road) => road.eval([z[0], z[1]]),
            LevelSetExpr::Disks { vehicle_radius, obstacles } => obstacles
                .iter()
                .map(|o| {
                    let c = o.pose(s).center;
                    let r = o.shape.extent();
                    -((z[0] - c[0]).hypot(z[1] - c[1]) - vehicle_radius - r)
                })
                .fold(f64::NEG_INFINITY, f64::max),
            LevelSetExpr::Rects { vehicle_half, obstacles } => {
                let vehicle = Rect::new([z[0], z[1]], z[2], *vehicle_half);
                obstacles
                    .iter()
                    .filter_map(|o| o.rect_at(s))
                    .map(|r| rect_pair_level(&vehicle, &r))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            LevelSetExpr::Shift(inner, m) => inner.eval(z, s) + m,
            LevelSetExpr::Max(xs) => xs.iter().map(|e| e.eval(z, s)).fold(f64::NEG_INFINITY, f64::max),
            LevelSetExpr::Min(xs) => xs.iter().map(|e| e.eval(z, s)).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        match self {
            LevelSetExpr::Disks { obstacles, .. } | LevelSetExpr::Rects { obstacles, .. } => {
                obstacles.iter().any(|o| !o.motion.is_static())
            }
            LevelSetExpr::Shift(inner, _) => inner.is_time_dependent(),
            LevelSetExpr::Max(xs) | LevelSetExpr::Min(xs) => xs.iter().any(|e| e.is_time_dependent()),
            _ => false,
        }
    }

    /// Copy with every moving obstacle pinned at time `s`. Evaluating the
    /// result at any time equals `self.eval(z, s)` and skips the per-node
    /// pose computation.
    pub fn frozen_at(&self, s: f64) -> LevelSetExpr {
        let freeze = |obs: &[Obstacle]| obs.iter().map(|o| o.frozen_at(s)).collect();
        match self {
            LevelSetExpr::Disks { vehicle_radius, obstacles } => {
                LevelSetExpr::Disks { vehicle_radius: *vehicle_radius, obstacles: freeze(obstacles) }
            }
            LevelSetExpr::Rects { vehicle_half, obstacles } => {
                LevelSetExpr::Rects { vehicle_half: *vehicle_half, obstacles: freeze(obstacles) }
            }
            LevelSetExpr::Shift(inner, m) => LevelSetExpr::Shift(Box::new(inner.frozen_at(s)), *m),
            LevelSetExpr::Max(xs) => LevelSetExpr::Max(xs.iter().map(|e| e.frozen_at(s)).collect()),
            LevelSetExpr::Min(xs) => LevelSetExpr::Min(xs.iter().map(|e| e.frozen_at(s)).collect()),
            other => other.clone(),
        }
    }

    /// Obstacles referenced anywhere in the tree.
    pub fn obstacles(&self) -> Vec<Obstacle> {
        let mut out = Vec::new();
        self.collect_obstacles(&mut out);
        out
    }

    fn collect_obstacles(&self, out: &mut Vec<Obstacle>) {
        match self {
            LevelSetExpr::Disks { obstacles, .. } | LevelSetExpr::Rects { obstacles, .. } => {
                out.extend_from_slice(obstacles)
            }
            LevelSetExpr::Shift(inner, _) => inner.collect_obstacles(out),
            LevelSetExpr::Max(xs) | LevelSetExpr::Min(xs) => xs.iter().for_each(|e| e.collect_obstacles(out)),
            _ => {}
        }
    }
}

fn affine(terms: &[(usize, f64)], offset: f64) -> LevelSetExpr {
    LevelSetExpr::Affine { terms: terms.to_vec(), offset }
}

const X: usize = 0;
const Y: usize = 1;
const PSI: usize = 2;

fn flatten_into(e: LevelSetExpr, is_max: bool, out: &mut Vec<LevelSetExpr>) {
    match e {
        LevelSetExpr::Max(xs) if is_max => out.extend(xs),
        LevelSetExpr::Min(xs) if !is_max => out.extend(xs),
        other => out.push(other),
    }
}

/// Intersection of the feasible sets.
pub fn combine_max(a: LevelSetExpr, b: LevelSetExpr) -> LevelSetExpr {
    let mut xs = Vec::new();
    flatten_into(a, true, &mut xs);
    flatten_into(b, true, &mut xs);
    LevelSetExpr::Max(xs)
}

/// Union of the feasible sets.
pub fn combine_min(a: LevelSetExpr, b: LevelSetExpr) -> LevelSetExpr {
    let mut xs = Vec::new();
    flatten_into(a, false, &mut xs);
    flatten_into(b, false, &mut xs);
    LevelSetExpr::Min(xs)
}

/// `y_down <= y <= y_up`.
pub fn straight_road(y_down: f64, y_up: f64) -> Result<LevelSetExpr> {
    if !(y_down < y_up) {
        return Err(Error::arg("straight road needs y_down < y_up"));
    }
    Ok(LevelSetExpr::Max(vec![affine(&[(Y, -1.0)], y_down), affine(&[(Y, 1.0)], -y_up)]))
}

/// Road whose lower edge drops from `y_down1` to `y_down2` past `x_bar`.
pub fn varying_width_road(y_up: f64, y_down1: f64, y_down2: f64, x_bar: f64) -> Result<LevelSetExpr> {
    if !(y_down2 <= y_down1 && y_down1 < y_up) {
        return Err(Error::arg("varying-width road needs y_down2 <= y_down1 < y_up"));
    }
    Ok(LevelSetExpr::Max(vec![
        LevelSetExpr::Min(vec![affine(&[(Y, -1.0)], y_down1), affine(&[(X, -1.0)], x_bar)]),
        affine(&[(Y, -1.0)], y_down2),
        affine(&[(Y, 1.0)], -y_up),
    ]))
}

pub fn curved_road(road: CurvedRoad) -> Result<LevelSetExpr> {
    if !(0.0 < road.r_down && road.r_down < road.r_up) {
        return Err(Error::arg("curved road needs 0 < r_down < r_up"));
    }
    if !(road.theta_min < road.theta_max && road.theta_max <= road.theta_min + TAU) {
        return Err(Error::arg("curved road needs theta_min < theta_max <= theta_min + 2 pi"));
    }
    Ok(LevelSetExpr::Curved(road))
}

/// Four-way crossing with inner corners `(x_i, y_i)`, ordered upper right,
/// upper left, lower left, lower right.
pub fn crossing_road(corners: [Point; 4]) -> LevelSetExpr {
    let [c0, c1, c2, c3] = corners;
    LevelSetExpr::Max(vec![
        LevelSetExpr::Min(vec![affine(&[(X, 1.0)], -c0[0]), affine(&[(Y, 1.0)], -c0[1])]),
        LevelSetExpr::Min(vec![affine(&[(Y, 1.0)], -c1[1]), affine(&[(X, -1.0)], c1[0])]),
        LevelSetExpr::Min(vec![affine(&[(X, -1.0)], c2[0]), affine(&[(Y, -1.0)], c2[1])]),
        LevelSetExpr::Min(vec![affine(&[(Y, -1.0)], c3[1]), affine(&[(X, 1.0)], -c3[0])]),
    ])
}

/// Axis-aligned box in `(x, y)` with a yaw tolerance band. Missing bounds
/// are unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TargetBox {
    #[serde(default)]
    pub x_min: Option<f64>,
    #[serde(default)]
    pub x_max: Option<f64>,
    #[serde(default)]
    pub y_min: Option<f64>,
    #[serde(default)]
    pub y_max: Option<f64>,
    #[serde(default)]
    pub yaw: f64,
    pub yaw_tol: f64,
}

pub fn target_box(t: &TargetBox) -> Result<LevelSetExpr> {
    if !(t.yaw_tol >= 0.0) {
        return Err(Error::arg("target yaw tolerance must be non-negative"));
    }
    let mut xs = Vec::new();
    if let Some(v) = t.x_min {
        xs.push(affine(&[(X, -1.0)], v));
    }
    if let Some(v) = t.x_max {
        xs.push(affine(&[(X, 1.0)], -v));
    }
    if let Some(v) = t.y_min {
        xs.push(affine(&[(Y, -1.0)], v));
    }
    if let Some(v) = t.y_max {
        xs.push(affine(&[(Y, 1.0)], -v));
    }
    xs.push(LevelSetExpr::Band { axis: PSI, anchor: t.yaw, tol: t.yaw_tol });
    Ok(LevelSetExpr::Max(xs))
}

/// Union of target boxes.
pub fn target_union(boxes: &[TargetBox]) -> Result<LevelSetExpr> {
    match boxes {
        [] => Err(Error::arg("target needs at least one box")),
        [one] => target_box(one),
        many => Ok(LevelSetExpr::Min(many.iter().map(target_box).collect::<Result<_>>()?)),
    }
}

/// Disk vehicle against disk obstacles, aggregated with `max` so that a
/// collision with any single obstacle makes the value positive.
pub fn disk_avoidance(obstacles: Vec<Obstacle>, vehicle_radius: f64) -> Result<LevelSetExpr> {
    if !(vehicle_radius > 0.0) {
        return Err(Error::arg("vehicle radius must be positive"));
    }
    if obstacles.iter().any(|o| !matches!(o.shape, Shape::Disk { .. })) {
        return Err(Error::arg("disk avoidance needs disk obstacles"));
    }
    Ok(LevelSetExpr::Disks { vehicle_radius, obstacles })
}

pub fn rect_avoidance(vehicle_half: [f64; 2], obstacles: Vec<Obstacle>) -> Result<LevelSetExpr> {
    if !vehicle_half.iter().all(|h| *h > 0.0) {
        return Err(Error::arg("vehicle half-lengths must be positive"));
    }
    if obstacles.iter().any(|o| !matches!(o.shape, Shape::Rectangle { .. })) {
        return Err(Error::arg("rectangle avoidance needs rectangular obstacles"));
    }
    Ok(LevelSetExpr::Rects { vehicle_half, obstacles })
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    fn z(x: f64, y: f64, psi: f64) -> [f64; 4] {
        [x, y, psi, 30.0]
    }

    fn fixed_rect(center: Point, yaw: f64, half: [f64; 2]) -> Obstacle {
        Obstacle::new(Shape::Rectangle { half }, Motion::Fixed { center, yaw }).unwrap()
    }

    #[test]
    fn combine_examples() {
        let a = LevelSetExpr::Constant(-1.0);
        let b = LevelSetExpr::Constant(1.0);
        assert_eq!(combine_max(a.clone(), b.clone()).eval(&[0.0], 0.0), 1.0);
        assert_eq!(combine_min(a.clone(), b).eval(&[0.0], 0.0), -1.0);
        let r = straight_road(-3.5, 3.5).unwrap();
        for y in [-5.0, 0.0, 2.0] {
            let p = z(0.0, y, 0.0);
            let v = r.eval(&p, 0.0);
            assert_eq!(combine_max(r.clone(), r.clone()).eval(&p, 0.0), v);
            assert_eq!(combine_min(r.clone(), r.clone()).eval(&p, 0.0), v);
        }
        // nested max flattens
        match combine_max(combine_max(a.clone(), a.clone()), a) {
            LevelSetExpr::Max(xs) => assert_eq!(xs.len(), 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn straight_road_examples() {
        let r = straight_road(-3.5, 3.5).unwrap();
        assert_eq!(r.eval(&z(7.0, 0.0, 0.0), 0.0), -3.5);
        assert_eq!(r.eval(&z(7.0, 3.5, 0.0), 0.0), 0.0);
        assert_eq!(r.eval(&z(7.0, 5.0, 0.0), 0.0), 1.5);
        assert!(straight_road(1.0, 1.0).is_err());
    }

    #[test]
    fn varying_width_examples() {
        let r = varying_width_road(3.5, -3.5, -7.0, -15.0).unwrap();
        assert_eq!(r.eval(&z(-20.0, -5.0, 0.0), 0.0), 1.5);
        assert_eq!(r.eval(&z(0.0, -5.0, 0.0), 0.0), -2.0);
        assert_eq!(r.eval(&z(0.0, 0.0, 0.0), 0.0), -3.5);
    }

    #[test]
    fn curved_road_examples() {
        let road = CurvedRoad { center: [0.0, 0.0], r_down: 46.5, r_up: 53.5, theta_min: 0.0, theta_max: PI };
        let g = curved_road(road).unwrap();
        // mid-road the angular terms dominate: max(-3.5, -3.5, -pi/2, -pi/2)
        assert!((g.eval(&z(0.0, 50.0, 0.0), 0.0) + FRAC_PI_2).abs() < EPS);
        assert!((g.eval(&z(0.0, 47.0, 0.0), 0.0) + 0.5).abs() < EPS);
        assert!((g.eval(&z(0.0, 55.0, 0.0), 0.0) - 1.5).abs() < EPS);
        // slightly below theta_min on the right: Theta = -0.05
        let p = [50.0 * (-0.05f64).cos(), 50.0 * (-0.05f64).sin()];
        assert!((g.eval(&z(p[0], p[1], 0.0), 0.0) - 0.05).abs() < 1e-9);
        // just past theta_max on the left
        let p = [50.0 * (PI + 0.05).cos(), 50.0 * (PI + 0.05).sin()];
        assert!((g.eval(&z(p[0], p[1], 0.0), 0.0) - 0.05).abs() < 1e-9);
        // center: radial terms only
        assert_eq!(g.eval(&z(0.0, 0.0, 0.0), 0.0), 46.5);

        let bad = CurvedRoad { r_down: 53.5, r_up: 46.5, ..road };
        assert!(curved_road(bad).is_err());
    }

    #[test]
    fn curved_road_is_continuous_across_the_cut() {
        let road = CurvedRoad { center: [1.0, -2.0], r_down: 10.0, r_up: 20.0, theta_min: PI / 4.0, theta_max: PI };
        let cut = road.theta_max + 0.5 * (TAU - (road.theta_max - road.theta_min));
        let at = |a: f64| road.eval([1.0 + 15.0 * a.cos(), -2.0 + 15.0 * a.sin()]);
        assert!((at(cut - 1e-9) - at(cut + 1e-9)).abs() < 1e-6);
        for a in [0.5, 1.0, 2.0, 3.0] {
            assert!((road.theta([1.0 + 15.0 * f64::cos(a), -2.0 + 15.0 * f64::sin(a)]) - a).abs() < 1e-12);
        }
    }

    #[test]
    fn crossing_examples() {
        let g = crossing_road([[-15.0, 3.0], [-21.0, 2.5], [-20.5, -4.0], [-15.5, -4.0]]);
        assert!(g.eval(&z(-30.0, -0.5, 0.0), 0.0) < 0.0);
        assert!(g.eval(&z(-18.0, 10.0, 0.0), 0.0) < 0.0);
        assert_eq!(g.eval(&z(-15.0, 3.0, 0.0), 0.0), 0.0);
        assert!(g.eval(&z(-5.0, 10.0, 0.0), 0.0) > 0.0);
        assert!(g.eval(&z(-30.0, -10.0, 0.0), 0.0) > 0.0);
    }

    #[test]
    fn target_examples() {
        let t = target_box(&TargetBox {
            x_min: Some(0.0),
            y_min: Some(-3.5),
            y_max: Some(3.5),
            yaw_tol: 0.1,
            ..TargetBox::default()
        })
        .unwrap();
        assert!(t.eval(&z(1.0, 0.0, 0.0), 0.0) < 0.0);
        assert_eq!(t.eval(&z(-1.0, 0.0, 0.0), 0.0), 1.0);
        assert!((t.eval(&z(1.0, 0.0, 0.2), 0.0) - 0.1).abs() < EPS);
    }

    #[test]
    fn disk_examples() {
        let disk =
            |c: Point| Obstacle::new(Shape::Disk { radius: 1.0 }, Motion::Fixed { center: c, yaw: 0.0 }).unwrap();
        let g = disk_avoidance(vec![disk([3.0, 0.0])], 2.0).unwrap();
        assert!(g.eval(&z(0.0, 0.0, 0.0), 0.0).abs() < EPS);
        assert!(g.eval(&z(-20.0, 0.0, 0.0), 0.0) < 0.0);
        let g = disk_avoidance(vec![disk([50.0, 0.0]), disk([1.0, 0.0])], 1.0).unwrap();
        assert!(g.eval(&z(0.0, 0.0, 0.0), 0.0) > 0.0);
        assert!(disk_avoidance(vec![fixed_rect([0.0, 0.0], 0.0, [1.0, 1.0])], 1.0).is_err());
    }

    #[test]
    fn corner_and_box_examples() {
        let c = rect_corners([0.0, 0.0], 0.0, [1.0, 1.0]);
        assert_eq!(c, [[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]]);
        let c = rect_corners([0.0, 0.0], FRAC_PI_2, [2.0, 1.0]);
        assert!(c.iter().any(|p| (p[0] + 1.0).abs() < EPS && (p[1] - 2.0).abs() < EPS));
        let shifted = rect_corners([5.0, -3.0], 0.7, [2.0, 1.0]);
        let base = rect_corners([0.0, 0.0], 0.7, [2.0, 1.0]);
        for (a, b) in shifted.iter().zip(&base) {
            assert!((a[0] - b[0] - 5.0).abs() < EPS && (a[1] - b[1] + 3.0).abs() < EPS);
        }

        assert_eq!(box_inclusion([0.0, 0.0], [1.0, 1.0]), 1.0);
        assert_eq!(box_inclusion([0.5, 2.0], [1.0, 1.0]), -1.0);
        assert_eq!(box_inclusion([1.0, 0.0], [1.0, 1.0]), 0.0);
        // outside along an axis, where the max form would report inside
        assert!(box_inclusion([2.0, 0.0], [1.0, 1.0]) < 0.0);
    }

    #[test]
    fn rect_avoidance_examples() {
        let g = rect_avoidance([1.0, 1.0], vec![fixed_rect([10.0, 0.0], 0.0, [1.0, 1.0])]).unwrap();
        assert!(g.eval(&z(0.0, 0.0, 0.0), 0.0) < 0.0);
        // coincident: every corner sits on the other boundary
        assert_eq!(g.eval(&z(10.0, 0.0, 0.0), 0.0), 0.0);
        // same square turned about the shared center: all eight corners
        // fall outside the other square although the two overlap
        assert!(g.eval(&z(10.0, 0.0, 0.3), 0.0) < 0.0);
        assert!(g.eval(&z(10.2, 0.1, 0.0), 0.0) > 0.0);
        assert!(!g.is_time_dependent());
    }

    #[test]
    fn motion_examples() {
        let lin = Motion::Linear { start: [1.0, 2.0], velocity: [10.0, 0.0] };
        assert_eq!(lin.pose(2.0), Pose { center: [21.0, 2.0], yaw: 0.0 });

        let dec = Motion::Decelerating { start: [0.0, 0.0], heading: 0.0, speed: 5.0, decel: 5.0 };
        assert!((dec.pose(1.0).center[0] - 2.5).abs() < EPS);
        assert!((dec.pose(2.0).center[0] - 2.5).abs() < EPS);
        assert!((dec.pose(0.5).center[0] - 1.875).abs() < EPS);
        assert_eq!(dec.stop_time(), 1.0);

        let circ = Motion::Circular { center: [0.0, 0.0], radius: 48.25, theta0: 1.2, omega: 0.0 };
        assert_eq!(circ.pose(0.0), circ.pose(3.0));
        assert!(circ.is_static());
        let circ = Motion::Circular { center: [1.0, 1.0], radius: 2.0, theta0: 0.0, omega: FRAC_PI_2 };
        let p = circ.pose(1.0);
        assert!((p.center[0] - 1.0).abs() < EPS && (p.center[1] - 3.0).abs() < EPS);
        assert!(p.yaw.abs() < EPS);
    }

    #[test]
    fn frozen_copy_matches_live_evaluation() {
        let obs = vec![
            Obstacle::new(
                Shape::Rectangle { half: [0.5, 0.5] },
                Motion::Linear { start: [-10.0, -1.5], velocity: [10.0, 0.0] },
            )
            .unwrap(),
            Obstacle::new(
                Shape::Rectangle { half: [0.5, 1.0] },
                Motion::Decelerating { start: [-18.0, 4.0], heading: -FRAC_PI_2, speed: 5.0, decel: 5.0 },
            )
            .unwrap(),
        ];
        let g = combine_max(straight_road(-4.0, 4.0).unwrap(), rect_avoidance([0.5, 0.5], obs).unwrap());
        assert!(g.is_time_dependent());
        for s in [0.0, 0.3, 1.7] {
            let f = g.frozen_at(s);
            assert!(!f.is_time_dependent());
            for p in [z(-9.0, -1.0, 0.1), z(-18.0, 2.0, 1.0), z(0.0, 0.0, 0.0)] {
                assert_eq!(f.eval(&p, 99.0), g.eval(&p, s));
            }
        }
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_angle(TAU + 0.25) - 0.25).abs() < 1e-12);
    }
}
