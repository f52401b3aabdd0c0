//! Minimal-time function and optimal trajectory reconstruction.
//!
//! `T(z)` is the first time the value function becomes non-positive at `z`
//! (`+inf` when it never does). Trajectories follow `T` greedily: at each
//! step the control from a finite grid whose Heun step lands on the smallest
//! interpolated `T` wins.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::{any_overlap, certify_step, corner_condition, secure_margin_check, CertLabel, SafetyBound};
use crate::dynamics::{point_mass_rhs, Control, ControlBounds, State4};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, ScalarField};
use crate::hjb::ValueEvolution;
use crate::levelset::{rect_pair_level, LevelSetExpr, Obstacle, Rect};

/// Field of first-arrival times; unreachable nodes hold `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimalTimeField {
    field: ScalarField,
}

impl MinimalTimeField {
    pub fn new(field: ScalarField) -> Result<Self> {
        if field.values().iter().any(|&t| !(t >= 0.0)) {
            return Err(Error::arg("minimal times must be non-negative"));
        }
        Ok(MinimalTimeField { field })
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn grid(&self) -> &GridSpec {
        self.field.grid()
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn into_field(self) -> ScalarField {
        self.field
    }
}

/// Scans snapshots in time order; a node gets the first snapshot time at
/// which its value is non-positive.
pub fn accumulate_min_time(evolution: &ValueEvolution) -> Result<MinimalTimeField> {
    let first = evolution.snapshots.first().ok_or_else(|| Error::arg("evolution has no snapshots"))?;
    let mut t = vec![f64::INFINITY; first.values().len()];
    for snap in &evolution.snapshots {
        let time = snap.time();
        t.par_iter_mut().zip(snap.values()).for_each(|(m, &v)| {
            if v <= 0.0 && m.is_infinite() {
                *m = time;
            }
        });
    }
    MinimalTimeField::new(ScalarField::new(first.grid().clone(), t, evolution.horizon)?)
}

/// Multilinear interpolation; `+inf` outside the grid or next to any
/// unreachable node.
pub fn interp_t(field: &MinimalTimeField, z: &[f64]) -> f64 {
    field.grid().interpolate(field.values(), z).unwrap_or(f64::INFINITY)
}

/// Multilinear interpolation with unreachable corners counted as `penalty`;
/// `+inf` outside the grid or when every weighted corner is unreachable.
pub fn interp_t_penalized(field: &MinimalTimeField, z: &[f64], penalty: f64) -> f64 {
    let grid = field.grid();
    let Some((base, frac)) = grid.locate(z) else { return f64::INFINITY };
    let d = grid.ndim();
    let mut acc = 0.0;
    let mut reachable = false;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut flat = 0;
        for j in 0..d {
            let up = (corner >> j) & 1 == 1;
            w *= if up { frac[j] } else { 1.0 - frac[j] };
            flat += (base[j] + up as usize) * grid.strides()[j];
        }
        if w == 0.0 {
            continue;
        }
        let v = field.values()[flat];
        if v.is_finite() {
            reachable = true;
            acc += w * v;
        } else {
            acc += w * penalty;
        }
    }
    if reachable {
        acc
    } else {
        f64::INFINITY
    }
}

/// `z + h/2 (f(z, u) + f(z + h f(z, u), u))`
pub fn heun_step(z: State4, u: Control, h: f64) -> State4 {
    let k1 = point_mass_rhs(z, u);
    let k2 = point_mass_rhs(z.axpy(h, k1), u);
    State4::new(
        z.x + 0.5 * h * (k1.x + k2.x),
        z.y + 0.5 * h * (k1.y + k2.y),
        z.psi + 0.5 * h * (k1.psi + k2.psi),
        z.v + 0.5 * h * (k1.v + k2.v),
    )
}

/// `substeps` Heun steps of size `h / substeps` with a frozen control.
pub fn heun(z: State4, u: Control, h: f64, substeps: usize) -> State4 {
    let m = substeps.max(1);
    let dh = h / m as f64;
    (0..m).fold(z, |acc, _| heun_step(acc, u, dh))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructOptions {
    /// Reconstruction step.
    pub h: f64,
    /// Stop once `T` drops below this threshold.
    pub eta: f64,
    pub max_steps: usize,
    pub accel_samples: usize,
    pub yaw_rate_samples: usize,
    pub substeps: usize,
    /// When set, unreachable cell corners count as this time during the
    /// control search instead of making the whole cell unreachable.
    #[serde(default)]
    pub sentinel_penalty: Option<f64>,
}

impl ReconstructOptions {
    pub fn new(h: f64, eta: f64, max_steps: usize) -> Self {
        ReconstructOptions {
            h,
            eta,
            max_steps,
            accel_samples: 21,
            yaw_rate_samples: 21,
            substeps: 1,
            sentinel_penalty: None,
        }
    }
}

/// `1.5 * max(dx, dy) / v0` over the spatial axes.
pub fn default_eta(grid: &GridSpec, v0: f64) -> f64 {
    let dxy = grid.step(0).max(grid.step(1));
    1.5 * dxy / v0.abs().max(1e-9)
}

/// Slack for the admissibility check on reconstructed points: a Lipschitz
/// bound of the constraint times one grid cell.
pub fn lemma35_tolerance(grid: &GridSpec, vehicle_half: [f64; 2]) -> f64 {
    grid.step(0) + grid.step(1) + vehicle_half[0].hypot(vehicle_half[1]) * grid.step(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TargetReached,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub state: State4,
    /// Control applied from this point to the next one.
    pub control: Option<Control>,
    pub t_min: f64,
    pub g: f64,
    pub certified: CertLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub termination: Termination,
    pub h: f64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn last_state(&self) -> State4 {
        self.points.last().expect("trajectory has a start point").state
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,t,x,y,psi,v,a,w,Tmin,g,certified")?;
        for (n, p) in self.points.iter().enumerate() {
            let (a, w) = p.control.map_or((f64::NAN, f64::NAN), |u| (u.a, u.w));
            let fmt = |x: f64| if x.is_nan() { String::new() } else { x.to_string() };
            writeln!(
                out,
                "{n},{},{},{},{},{},{},{},{},{},{}",
                p.t,
                p.state.x,
                p.state.y,
                p.state.psi,
                p.state.v,
                fmt(a),
                fmt(w),
                p.t_min,
                p.g,
                p.certified
            )?;
        }
        Ok(())
    }
}

/// Time-to-go at `z` and time `t`. A field with an extra clock axis is
/// queried at `(z, t)`.
/// Time-to-go from `z` departing at `t`. `t` is ignored for a 4D field.
pub fn time_to_go(field: &MinimalTimeField, z: State4, t: f64) -> f64 {
    query(field, z, t, None)
}

fn query(field: &MinimalTimeField, z: State4, t: f64, penalty: Option<f64>) -> f64 {
    let a = z.to_array();
    let p5 = [a[0], a[1], a[2], a[3], t];
    let p = if field.grid().ndim() == 5 { &p5[..] } else { &a[..] };
    match penalty {
        Some(pen) => interp_t_penalized(field, p, pen),
        None => interp_t(field, p),
    }
}

/// Greedy descent of `T` from `z0`. With a constraint, controls leading to
/// `g > 0` are skipped and points carry `g` (otherwise NaN); certification labels start as `Yes` and are
/// refined by [`certify_trajectory`].
pub fn reconstruct(
    field: &MinimalTimeField,
    z0: State4,
    bounds: &ControlBounds,
    opts: &ReconstructOptions,
    constraint: Option<&LevelSetExpr>,
) -> Result<Trajectory> {
    let controls = bounds.control_grid(opts.accel_samples, opts.yaw_rate_samples);
    if controls.is_empty() {
        return Err(Error::arg("control grid is empty"));
    }
    if !(opts.h > 0.0) {
        return Err(Error::arg("reconstruction step must be positive"));
    }
    let g_at = |z: State4, t: f64| constraint.map_or(f64::NAN, |g| g.eval(&z.to_array(), t));
    let point = |t: f64, z: State4, t_min: f64| TrajectoryPoint {
        t,
        state: z,
        control: None,
        t_min,
        g: g_at(z, t),
        certified: CertLabel::Yes,
    };

    let t0 = query(field, z0, 0.0, opts.sentinel_penalty);
    let mut points = vec![point(0.0, z0, t0)];
    if t0.is_infinite() {
        return Ok(Trajectory { points, termination: Termination::Infeasible, h: opts.h });
    }
    if t0 < opts.eta {
        return Ok(Trajectory { points, termination: Termination::TargetReached, h: opts.h });
    }

    let mut z = z0;
    for n in 0..opts.max_steps {
        let t_next = (n + 1) as f64 * opts.h;
        let mut best: Option<(usize, State4, f64)> = None;
        for (k, &u) in controls.iter().enumerate() {
            let zn = heun(z, u, opts.h, opts.substeps);
            let g = g_at(zn, t_next);
            if g > 0.0 {
                continue;
            }
            let val = query(field, zn, t_next, opts.sentinel_penalty);
            let better = match best {
                Some((_, _, b)) => val < b,
                None => true,
            };
            if better {
                best = Some((k, zn, val));
            }
        }
        let Some((k, zn, val)) = best else {
            return Ok(Trajectory { points, termination: Termination::Infeasible, h: opts.h });
        };
        if val.is_infinite() {
            return Ok(Trajectory { points, termination: Termination::Infeasible, h: opts.h });
        }
        points.last_mut().expect("start point present").control = Some(controls[k]);
        points.push(point(t_next, zn, val));
        z = zn;
        if val < opts.eta {
            return Ok(Trajectory { points, termination: Termination::TargetReached, h: opts.h });
        }
    }
    Ok(Trajectory { points, termination: Termination::MaxIterations, h: opts.h })
}

/// Labels every point: `yes` when the step certificate holds, `margin` when
/// only the margin check covers the step, `violated` otherwise. The start
/// point is checked with the exact overlap test.
pub fn certify_trajectory(
    traj: &mut Trajectory,
    vehicle_half: [f64; 2],
    obstacles: &[Obstacle],
    bound: &SafetyBound,
    eps: f64,
) {
    let rects_at = |t: f64| obstacles.iter().filter_map(|o| o.rect_at(t)).collect::<Vec<Rect>>();
    let vehicle = |s: State4| Rect::new([s.x, s.y], s.psi, vehicle_half);
    let level =
        |veh: &Rect, obs: &[Rect]| obs.iter().map(|o| rect_pair_level(veh, o)).fold(f64::NEG_INFINITY, f64::max);

    let Some(first) = traj.points.first_mut() else { return };
    let obs0 = rects_at(first.t);
    let v0 = vehicle(first.state);
    first.certified = if any_overlap(&v0, &obs0) { CertLabel::Violated } else { CertLabel::Yes };
    let mut prev_ok = first.certified != CertLabel::Violated;
    let mut prev_level = level(&v0, &obs0);
    let mut prev_t = first.t;

    for p in traj.points.iter_mut().skip(1) {
        let obs = rects_at(p.t);
        let veh = vehicle(p.state);
        let lvl = level(&veh, &obs);
        let dt = p.t - prev_t;
        p.certified = match certify_step(prev_ok, corner_condition(&veh, &obs), dt, bound) {
            Ok(_) => CertLabel::Yes,
            Err(_) if prev_ok && secure_margin_check(prev_level, lvl, eps, bound.v_bar, dt) => CertLabel::Margin,
            Err(_) => CertLabel::Violated,
        };
        prev_ok = p.certified != CertLabel::Violated;
        prev_level = lvl;
        prev_t = p.t;
    }
}
