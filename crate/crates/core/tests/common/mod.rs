//! Independent oracles shared by the integration tests. None of them call
//! the library code they are used to check.

#![allow(dead_code)]

use hjreach::levelset::{Point, Rect};
use hjreach::ControlBounds;

pub fn corners(r: &Rect) -> [Point; 4] {
    let (s, c) = r.yaw.sin_cos();
    let [hx, hy] = r.half;
    // Counter-clockwise order.
    [[hx, hy], [-hx, hy], [-hx, -hy], [hx, -hy]]
        .map(|[a, b]| [r.center[0] + c * a - s * b, r.center[1] + s * a + c * b])
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Closed point-in-convex-polygon test by edge orientation.
pub fn in_polygon(p: Point, poly: &[Point; 4]) -> bool {
    (0..4).all(|k| cross(poly[k], poly[(k + 1) % 4], p) >= -1e-12)
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    (d1 * d2 <= 0.0) && (d3 * d4 <= 0.0)
}

/// Closed rectangles overlap iff a vertex of one lies in the other or two
/// edges cross.
pub fn polygons_overlap(a: &Rect, b: &Rect) -> bool {
    let pa = corners(a);
    let pb = corners(b);
    if pa.iter().any(|&p| in_polygon(p, &pb)) || pb.iter().any(|&p| in_polygon(p, &pa)) {
        return true;
    }
    (0..4).any(|i| (0..4).any(|j| segments_intersect(pa[i], pa[(i + 1) % 4], pb[j], pb[(j + 1) % 4])))
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
    (p[0] - a[0] - t * ab[0]).hypot(p[1] - a[1] - t * ab[1])
}

/// Euclidean distance between closed rectangles (0 when they overlap).
pub fn rect_distance(a: &Rect, b: &Rect) -> f64 {
    if polygons_overlap(a, b) {
        return 0.0;
    }
    let pa = corners(a);
    let pb = corners(b);
    let mut d = f64::INFINITY;
    for k in 0..4 {
        for &p in &pa {
            d = d.min(point_segment_distance(p, pb[k], pb[(k + 1) % 4]));
        }
        for &p in &pb {
            d = d.min(point_segment_distance(p, pa[k], pa[(k + 1) % 4]));
        }
    }
    d
}

/// Whether any corner of `a` lies in `b` (closed), by the polygon test.
pub fn corner_inside(a: &Rect, b: &Rect) -> bool {
    let pb = corners(b);
    corners(a).iter().any(|&p| in_polygon(p, &pb))
}

/// `max_u -f(z, u) . p` over an `n x n` control grid.
pub fn brute_hamiltonian(z: [f64; 4], p: [f64; 4], b: &ControlBounds, n: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let (s, c) = z[2].sin_cos();
    for i in 0..n {
        let a = b.a_min + (b.a_max - b.a_min) * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let w = -b.w_max + 2.0 * b.w_max * j as f64 / (n - 1) as f64;
            let f = [z[3] * c, z[3] * s, w, a];
            best = best.max(-(0..4).map(|k| f[k] * p[k]).sum::<f64>());
        }
    }
    best
}

/// 4-connected components of a boolean image stored row-major, `x` slowest.
pub fn components(cells: &[bool], nx: usize, ny: usize) -> usize {
    let mut seen = vec![false; cells.len()];
    let mut count = 0;
    for start in 0..cells.len() {
        if !cells[start] || seen[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(k) = stack.pop() {
            let (i, j) = (k / ny, k % ny);
            let mut push = |ii: usize, jj: usize| {
                let n = ii * ny + jj;
                if cells[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            };
            if i > 0 {
                push(i - 1, j);
            }
            if i + 1 < nx {
                push(i + 1, j);
            }
            if j > 0 {
                push(i, j - 1);
            }
            if j + 1 < ny {
                push(i, j + 1);
            }
        }
    }
    count
}

/// Rigid vehicle at constant speed and yaw rate against moving rectangles.
#[derive(Debug, Clone)]
pub struct Scene {
    pub vehicle_half: [f64; 2],
    pub start: [f64; 3],
    pub speed: f64,
    pub yaw_rate: f64,
    pub obstacles: Vec<hjreach::Obstacle>,
}

impl Scene {
    pub fn vehicle_at(&self, t: f64) -> Rect {
        let [x0, y0, p0] = self.start;
        let (v, w) = (self.speed, self.yaw_rate);
        let p = p0 + w * t;
        let (x, y) = if w.abs() < 1e-9 {
            (x0 + v * t * p0.cos(), y0 + v * t * p0.sin())
        } else {
            (x0 + v / w * (p.sin() - p0.sin()), y0 - v / w * (p.cos() - p0.cos()))
        };
        Rect::new([x, y], p, self.vehicle_half)
    }

    pub fn obstacles_at(&self, t: f64) -> Vec<Rect> {
        self.obstacles.iter().filter_map(|o| o.rect_at(t)).collect()
    }

    /// Smallest oracle distance between the vehicle and any obstacle.
    pub fn distance_at(&self, t: f64) -> f64 {
        let v = self.vehicle_at(t);
        self.obstacles_at(t).iter().map(|o| rect_distance(&v, o)).fold(f64::INFINITY, f64::min)
    }

    pub fn overlap_at(&self, t: f64) -> bool {
        let v = self.vehicle_at(t);
        self.obstacles_at(t).iter().any(|o| polygons_overlap(&v, o))
    }

    pub fn bounds(&self) -> ControlBounds {
        ControlBounds { a_min: -10.0, a_max: 10.0, w_max: self.yaw_rate.abs() }
    }
}

/// A scene whose obstacles pass within a few meters of the vehicle around
/// time `encounter`. Returns `None` when the start poses overlap.
pub fn random_scene<R: rand::Rng>(rng: &mut R, encounter: f64) -> Option<Scene> {
    use hjreach::{Motion, Obstacle, Shape};
    use std::f64::consts::PI;
    let mut scene = Scene {
        vehicle_half: [rng.gen_range(0.3..2.0), rng.gen_range(0.3..1.5)],
        start: [0.0, 0.0, rng.gen_range(-PI..PI)],
        speed: rng.gen_range(0.0..30.0),
        yaw_rate: rng.gen_range(-1.0..1.0),
        obstacles: Vec::new(),
    };
    let meet = scene.vehicle_at(encounter).center;
    for _ in 0..rng.gen_range(1..=2) {
        let half = [rng.gen_range(0.25..2.0), rng.gen_range(0.25..2.0)];
        let r = rng.gen_range(0.0..4.0);
        let a = rng.gen_range(-PI..PI);
        let target = [meet[0] + r * a.cos(), meet[1] + r * a.sin()];
        let motion = match rng.gen_range(0..4) {
            0 => Motion::Fixed { center: target, yaw: rng.gen_range(-PI..PI) },
            1 => {
                let s = rng.gen_range(0.0..20.0);
                let h = rng.gen_range(-PI..PI);
                let vel = [s * h.cos(), s * h.sin()];
                Motion::Linear {
                    start: [target[0] - vel[0] * encounter, target[1] - vel[1] * encounter],
                    velocity: vel,
                }
            }
            2 => {
                let heading = rng.gen_range(-PI..PI);
                let speed = rng.gen_range(0.0..10.0);
                let decel = rng.gen_range(0.5..10.0);
                let t = encounter.min(speed / decel);
                let dist = speed * t - 0.5 * decel * t * t;
                Motion::Decelerating {
                    start: [target[0] - dist * heading.cos(), target[1] - dist * heading.sin()],
                    heading,
                    speed,
                    decel,
                }
            }
            _ => {
                let radius = rng.gen_range(2.0..50.0);
                let omega = rng.gen_range(-0.5..0.5);
                let theta0 = rng.gen_range(-PI..PI);
                let th = theta0 + omega * encounter;
                Motion::Circular {
                    center: [target[0] - radius * th.cos(), target[1] - radius * th.sin()],
                    radius,
                    theta0,
                    omega,
                }
            }
        };
        scene.obstacles.push(Obstacle::new(Shape::Rectangle { half }, motion).ok()?);
    }
    (!scene.overlap_at(0.0)).then_some(scene)
}
