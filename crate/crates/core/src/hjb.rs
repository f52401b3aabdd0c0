//! Explicit solver for the obstacle HJB equation
//! `min(v_t + H(z, grad v), v - g) = 0`, `v(., 0) = max(phi, g)`.
//!
//! Space: ENO2 one-sided derivatives fed to a local Lax-Friedrichs flux.
//! Time: forward Euler at the CFL step, with the obstacle clamp applied
//! nodewise after every step.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::grid::{cfl_timestep, eno2_kernel, GridSpec, ScalarField, MAX_AXES};
use crate::levelset::LevelSetExpr;
use crate::mintime::MinimalTimeField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Reach the target exactly at the horizon.
    Reach,
    /// Reach the target at any time up to the horizon; the target is
    /// absorbing. With a static constraint the flux is also clamped at zero,
    /// which makes the sets nested in time.
    #[default]
    Capture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    #[default]
    Eno2,
    /// Plain one-sided differences; monotone, used for cross-checks.
    FirstOrder,
}

/// How the constraint clock relates to the marching variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    /// State axes only. A time-dependent constraint is sampled at physical
    /// time `T - t` after marching for `t`, so the snapshot at elapsed time
    /// `t` answers "reach the target by `T` starting at `T - t`", and the
    /// final snapshot is the set for a start at time 0.
    #[default]
    Slice,
    /// Last grid axis is a clock with unit rate; level sets read it as
    /// their time argument and the constraint is static on the grid.
    Augmented,
}

#[derive(Debug, Clone)]
pub struct HjbProblem<D> {
    pub grid: GridSpec,
    pub dynamics: D,
    /// `phi`: non-positive on the target.
    pub target: LevelSetExpr,
    /// `g`: non-positive where the state is admissible.
    pub constraint: LevelSetExpr,
    pub horizon: f64,
    pub mode: Mode,
    pub cfl: f64,
    pub stencil: Stencil,
    pub clock: Clock,
}

impl<D: Dynamics> HjbProblem<D> {
    pub fn new(grid: GridSpec, dynamics: D, target: LevelSetExpr, constraint: LevelSetExpr, horizon: f64) -> Self {
        HjbProblem {
            grid,
            dynamics,
            target,
            constraint,
            horizon,
            mode: Mode::Capture,
            cfl: 0.5,
            stencil: Stencil::Eno2,
            clock: Clock::Slice,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::arg(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.dynamics.dim() != self.grid.ndim() {
            return Err(Error::arg(format!(
                "dynamics has {} states but grid has {} axes",
                self.dynamics.dim(),
                self.grid.ndim()
            )));
        }
        if self.clock == Clock::Augmented && self.grid.ndim() < 2 {
            return Err(Error::arg("augmented clock needs a state axis and a clock axis"));
        }
        Ok(())
    }

    pub fn cfl_limit(&self) -> Result<f64> {
        cfl_timestep(&self.grid, &self.dynamics.sup_norms(&self.grid)?, self.cfl)
    }

    fn time_dependent(&self) -> bool {
        self.clock == Clock::Slice && self.constraint.is_time_dependent()
    }

    /// Physical time at which the constraint is sampled after marching `t`.
    fn g_time(&self, t: f64) -> f64 {
        (self.horizon - t).max(0.0)
    }

    fn eval_level(&self, expr: &LevelSetExpr, z: &[f64], s: f64) -> f64 {
        match self.clock {
            Clock::Slice => expr.eval(z, s),
            Clock::Augmented => {
                let d = z.len() - 1;
                expr.eval(&z[..d], z[d])
            }
        }
    }

    fn level_field(&self, expr: &LevelSetExpr, s: f64, out: &mut [f64]) {
        let frozen;
        let expr = if self.clock == Clock::Slice && expr.is_time_dependent() {
            frozen = expr.frozen_at(s);
            &frozen
        } else {
            expr
        };
        let d = self.grid.ndim();
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let mut z = [0.0; MAX_AXES];
            for (k, o) in chunk.iter_mut().enumerate() {
                self.grid.coords_of_flat(c * CHUNK + k, &mut z[..d]);
                *o = self.eval_level(expr, &z[..d], s);
            }
        });
    }
}

const CHUNK: usize = 4096;

/// `v0 = max(phi, g)` at every node.
pub fn initialize<D: Dynamics>(problem: &HjbProblem<D>) -> Result<ScalarField> {
    problem.validate()?;
    let n = problem.grid.len();
    let mut phi = vec![0.0; n];
    let mut g = vec![0.0; n];
    problem.level_field(&problem.target, 0.0, &mut phi);
    problem.level_field(&problem.constraint, problem.g_time(0.0), &mut g);
    let v = phi.iter().zip(&g).map(|(a, b)| a.max(*b)).collect();
    ScalarField::new(problem.grid.clone(), v, 0.0)
}

/// Local Lax-Friedrichs flux from one-sided gradients `pl` (left) and `pr`
/// (right). Capture mode clamps the flux at zero, which keeps it monotone
/// and consistent with `max(0, H)`.
pub fn numerical_hamiltonian<D: Dynamics>(dynamics: &D, local: &D::Local, pl: &[f64], pr: &[f64], mode: Mode) -> f64 {
    let d = pl.len();
    let mut pm = [0.0; MAX_AXES];
    let mut visc = 0.0;
    for j in 0..d {
        pm[j] = 0.5 * (pl[j] + pr[j]);
        visc += dynamics.dissipation(local, j) * 0.5 * (pr[j] - pl[j]);
    }
    let h = dynamics.hamiltonian(local, &pm[..d]) - visc;
    match mode {
        Mode::Reach => h,
        Mode::Capture => h.max(0.0),
    }
}

struct Sweep<'a, D: Dynamics> {
    dynamics: &'a D,
    counts: [usize; MAX_AXES],
    strides: [usize; MAX_AXES],
    inv_dx: [f64; MAX_AXES],
    ndim: usize,
    locals: Vec<D::Local>,
    stencil: Stencil,
    mode: Mode,
    flux_mode: Mode,
}

impl<'a, D: Dynamics> Sweep<'a, D> {
    fn new(problem: &'a HjbProblem<D>) -> Self {
        let grid = &problem.grid;
        let d = grid.ndim();
        let mut counts = [1; MAX_AXES];
        let mut strides = [0; MAX_AXES];
        let mut inv_dx = [0.0; MAX_AXES];
        for j in 0..d {
            counts[j] = grid.axis(j).n;
            strides[j] = grid.strides()[j];
            inv_dx[j] = 1.0 / grid.step(j);
        }
        let locals = (0..grid.len())
            .into_par_iter()
            .map_init(
                || [0.0; MAX_AXES],
                |z, i| {
                    grid.coords_of_flat(i, &mut z[..d]);
                    problem.dynamics.local(&z[..d])
                },
            )
            .collect();
        Sweep {
            dynamics: &problem.dynamics,
            counts,
            strides,
            inv_dx,
            ndim: d,
            locals,
            stencil: problem.stencil,
            mode: problem.mode,
            // Clamping the flux lets a state wait in place, which is only
            // sound while the constraint does not move on the grid.
            flux_mode: if problem.time_dependent() { Mode::Reach } else { problem.mode },
        }
    }

    /// One-sided derivatives along axis `j` for every node of a row, given
    /// the five stencil rows at offsets -2..=2.
    #[inline(always)]
    fn row_derivs(&self, rows: [&[f64]; 5], inv_dx: f64, pl: &mut [f64], pr: &mut [f64]) {
        let [a, b, c, d, e] = rows;
        let n = pl.len();
        let pr = &mut pr[..n];
        let (a, b, c, d, e) = (&a[..n], &b[..n], &c[..n], &d[..n], &e[..n]);
        match self.stencil {
            Stencil::Eno2 => {
                for k in 0..n {
                    let (l, r) = eno2_kernel(a[k], b[k], c[k], d[k], e[k], inv_dx);
                    pl[k] = l;
                    pr[k] = r;
                }
            }
            Stencil::FirstOrder => {
                for k in 0..n {
                    pl[k] = (c[k] - b[k]) * inv_dx;
                    pr[k] = (d[k] - c[k]) * inv_dx;
                }
            }
        }
    }

    /// One Euler step of `v` into `out` followed by the obstacle clamp.
    ///
    /// Works on slabs of fixed first index. Along each axis the stencil
    /// reads contiguous blocks; blocks past an edge are extrapolated
    /// linearly from the two nearest rows.
    fn apply(&self, v: &[f64], phi: &[f64], g: &[f64], dt: f64, out: &mut [f64]) {
        let d = self.ndim;
        let slab = if d == 1 { v.len() } else { self.strides[0] };
        out.par_chunks_mut(slab).enumerate().for_each_init(
            || (vec![0.0; d * slab], vec![0.0; d * slab], Vec::new()),
            |(pl, pr, ghost), (c, out_slab)| {
                let base = c * slab;
                for j in 0..d {
                    let (n, s) = (self.counts[j], self.strides[j]);
                    let (plj, prj) = (&mut pl[j * slab..(j + 1) * slab], &mut pr[j * slab..(j + 1) * slab]);
                    if j == 0 && d > 1 {
                        let rows = stencil_rows(v, base - c * s, c, n, s, slab, ghost);
                        self.row_derivs(rows, self.inv_dx[j], plj, prj);
                        continue;
                    }
                    if j == d - 1 {
                        let mut line = [0.0; LINE_MAX + 4];
                        if n <= LINE_MAX {
                            for (l, src) in v[base..base + slab].chunks(n).enumerate() {
                                let line = &mut line[..n + 4];
                                ghost_line(src, line);
                                let off = l * n;
                                self.row_derivs(
                                    [&line[0..], &line[1..], &line[2..], &line[3..], &line[4..]],
                                    self.inv_dx[j],
                                    &mut plj[off..off + n],
                                    &mut prj[off..off + n],
                                );
                            }
                            continue;
                        }
                    }
                    // Blocks of length `s` along axis `j` inside the slab.
                    let outer = slab / (n * s);
                    for o in 0..outer {
                        let first = o * n * s;
                        for i in 0..n {
                            let off = first + i * s;
                            let rows = stencil_rows(v, base + first, i, n, s, s, ghost);
                            self.row_derivs(rows, self.inv_dx[j], &mut plj[off..off + s], &mut prj[off..off + s]);
                        }
                    }
                }
                let mut ql = [0.0; MAX_AXES];
                let mut qr = [0.0; MAX_AXES];
                for (k, o) in out_slab.iter_mut().enumerate() {
                    let flat = base + k;
                    for j in 0..d {
                        ql[j] = pl[j * slab + k];
                        qr[j] = pr[j * slab + k];
                    }
                    let h =
                        numerical_hamiltonian(self.dynamics, &self.locals[flat], &ql[..d], &qr[..d], self.flux_mode);
                    let cand = v[flat] - dt * h;
                    *o = match self.mode {
                        Mode::Reach => cand.max(g[flat]),
                        Mode::Capture => cand.min(phi[flat]).max(g[flat]),
                    };
                }
            },
        );
    }
}

/// Longest last axis handled with a stack line buffer.
const LINE_MAX: usize = 64;

/// Copies `src` into `line[2..n + 2]` and extrapolates two nodes past
/// each end.
fn ghost_line(src: &[f64], line: &mut [f64]) {
    let n = src.len();
    line[2..n + 2].copy_from_slice(src);
    let (a, b) = (src[0], src[1]);
    line[1] = 2.0 * a - b;
    line[0] = 3.0 * a - 2.0 * b;
    let (a, b) = (src[n - 1], src[n - 2]);
    line[n + 2] = 2.0 * a - b;
    line[n + 3] = 3.0 * a - 2.0 * b;
}

/// The five rows `i-2..=i+2` along an axis with `n` nodes and stride `s`,
/// each `len` long, where row `m` starts at `first + m * s`. Rows past an
/// edge are extrapolated into `ghost`.
fn stencil_rows<'b>(
    v: &'b [f64],
    first: usize,
    i: usize,
    n: usize,
    s: usize,
    len: usize,
    ghost: &'b mut Vec<f64>,
) -> [&'b [f64]; 5] {
    let row = |m: usize| &v[first + m * s..first + m * s + len];
    if i >= 2 && i + 2 < n {
        return [row(i - 2), row(i - 1), row(i), row(i + 1), row(i + 2)];
    }
    ghost.resize(5 * len, 0.0);
    for (o, gr) in ghost.chunks_mut(len).enumerate() {
        let m = i as isize + o as isize - 2;
        if m >= 0 && (m as usize) < n {
            gr.copy_from_slice(row(m as usize));
        } else {
            let (edge, inner, steps) = if m < 0 { (0, 1, -m) } else { (n - 1, n - 2, m - (n as isize - 1)) };
            let (e, q) = (row(edge), row(inner));
            let t = steps as f64;
            for ((x, &a), &b) in gr.iter_mut().zip(e).zip(q) {
                *x = a + t * (a - b);
            }
        }
    }
    let ghost: &'b [f64] = ghost;
    let gr = |o: usize| &ghost[o * len..(o + 1) * len];
    [gr(0), gr(1), gr(2), gr(3), gr(4)]
}

/// One explicit step with the constraint sampled at `g_time` (for a slice
/// clock; ignored by an augmented clock). Refuses steps above the CFL limit.
pub fn step<D: Dynamics>(problem: &HjbProblem<D>, v: &ScalarField, dt: f64, g_time: f64) -> Result<ScalarField> {
    problem.validate()?;
    if !v.grid().same_box(&problem.grid) || v.grid().counts() != problem.grid.counts() {
        return Err(Error::arg("field grid does not match problem grid"));
    }
    check_dt(problem, dt)?;
    let n = problem.grid.len();
    let mut phi = vec![0.0; n];
    let mut g = vec![0.0; n];
    problem.level_field(&problem.target, 0.0, &mut phi);
    problem.level_field(&problem.constraint, g_time, &mut g);
    let mut out = vec![0.0; n];
    Sweep::new(problem).apply(v.values(), &phi, &g, dt, &mut out);
    ScalarField::new(problem.grid.clone(), out, v.time() + dt)
}

fn check_dt<D: Dynamics>(problem: &HjbProblem<D>, dt: f64) -> Result<f64> {
    let limit = problem.cfl_limit()?;
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, limit });
    }
    Ok(limit)
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Requested output times; 0 and the horizon are always included.
    pub snapshot_times: Vec<f64>,
    /// Record the first step time at which each node turns non-positive.
    pub track_min_time: bool,
    /// Override of the CFL time step; must not exceed the limit.
    pub dt: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ValueEvolution {
    /// Increasing in time, first at 0, last at the horizon.
    pub snapshots: Vec<ScalarField>,
    pub dt: Vec<f64>,
    pub step_seconds: Vec<f64>,
    pub min_time: Option<MinimalTimeField>,
    pub mode: Mode,
    pub clock: Clock,
    pub horizon: f64,
}

impl ValueEvolution {
    pub fn final_snapshot(&self) -> &ScalarField {
        self.snapshots.last().expect("evolution has at least one snapshot")
    }

    pub fn snapshot_near(&self, t: f64) -> &ScalarField {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.time() - t).abs().total_cmp(&(b.time() - t).abs()))
            .expect("evolution has at least one snapshot")
    }

    pub fn step_times(&self) -> Vec<f64> {
        let mut t = 0.0;
        let mut out = vec![0.0];
        for dt in &self.dt {
            t += dt;
            out.push(t);
        }
        out
    }
}

/// Uniform steps of `dt`, the last one shortened to land on `horizon`.
pub fn time_schedule(horizon: f64, dt: f64) -> Vec<f64> {
    let n = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
    let mut out = vec![dt; n];
    out[n - 1] = horizon - dt * (n - 1) as f64;
    out
}

/// Marches from 0 to the horizon at the CFL step.
pub fn solve<D: Dynamics>(problem: &HjbProblem<D>, opts: &SolveOptions) -> Result<ValueEvolution> {
    problem.validate()?;
    let limit = problem.cfl_limit()?;
    let dt = match opts.dt {
        Some(dt) => {
            check_dt(problem, dt)?;
            dt
        }
        None => limit,
    };
    let schedule = if dt.is_finite() { time_schedule(problem.horizon, dt) } else { vec![problem.horizon] };
    let mut times = Vec::with_capacity(schedule.len() + 1);
    let mut acc = 0.0;
    times.push(0.0);
    for (k, h) in schedule.iter().enumerate() {
        acc += h;
        times.push(if k + 1 == schedule.len() { problem.horizon } else { acc });
    }

    let mut wanted = vec![false; times.len()];
    wanted[0] = true;
    wanted[times.len() - 1] = true;
    for &t in &opts.snapshot_times {
        let k = nearest_index(&times, t);
        wanted[k] = true;
    }

    let n = problem.grid.len();
    let mut phi = vec![0.0; n];
    let mut g = vec![0.0; n];
    problem.level_field(&problem.target, 0.0, &mut phi);
    problem.level_field(&problem.constraint, problem.g_time(0.0), &mut g);
    let mut v: Vec<f64> = phi.par_iter().zip(&g).map(|(a, b)| a.max(*b)).collect();
    let mut next = vec![0.0; n];

    let mut tmin = opts
        .track_min_time
        .then(|| v.par_iter().map(|&x| if x <= 0.0 { 0.0 } else { f64::INFINITY }).collect::<Vec<f64>>());

    let sweep = Sweep::new(problem);
    let mut snapshots = vec![ScalarField::new(problem.grid.clone(), v.clone(), 0.0)?];
    let mut step_seconds = Vec::with_capacity(schedule.len());
    let moving = problem.time_dependent();

    for (k, &h) in schedule.iter().enumerate() {
        let clock = Instant::now();
        let t1 = times[k + 1];
        if moving {
            problem.level_field(&problem.constraint, problem.g_time(t1), &mut g);
        }
        sweep.apply(&v, &phi, &g, h, &mut next);
        std::mem::swap(&mut v, &mut next);
        if let Some(tm) = tmin.as_mut() {
            tm.par_iter_mut().zip(&v).for_each(|(m, &x)| {
                if x <= 0.0 && m.is_infinite() {
                    *m = t1;
                }
            });
        }
        step_seconds.push(clock.elapsed().as_secs_f64());
        if wanted[k + 1] {
            snapshots.push(ScalarField::from_parts(problem.grid.clone(), v.clone(), t1));
        }
    }

    let min_time = match tmin {
        Some(values) => Some(MinimalTimeField::new(ScalarField::new(problem.grid.clone(), values, problem.horizon)?)?),
        None => None,
    };
    Ok(ValueEvolution {
        snapshots,
        dt: schedule,
        step_seconds,
        min_time,
        mode: problem.mode,
        clock: problem.clock,
        horizon: problem.horizon,
    })
}

/// Same sweep as [`solve`]; moving obstacles are sampled once per step.
pub fn solve_time_dependent<D: Dynamics>(problem: &HjbProblem<D>, opts: &SolveOptions) -> Result<ValueEvolution> {
    solve(problem, opts)
}

fn nearest_index(times: &[f64], t: f64) -> usize {
    let mut best = 0;
    for (k, &tk) in times.iter().enumerate() {
        if (tk - t).abs() < (times[best] - t).abs() {
            best = k;
        }
    }
    best
}

/// `{z : v(z) <= 0}` over all nodes.
pub fn reachable_set(snapshot: &ScalarField) -> Vec<bool> {
    snapshot.values().iter().map(|&v| v <= 0.0).collect()
}

/// Boolean image over the first two axes at fixed indices of the others.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask2 {
    pub nx: usize,
    pub ny: usize,
    /// Row-major with `x` slowest: cell `(i, j)` at `i * ny + j`.
    pub cells: Vec<bool>,
}

impl Mask2 {
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.ny + j]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    /// Number of 4-connected components of set cells.
    pub fn components(&self) -> usize {
        let mut seen = vec![false; self.cells.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.cells.len() {
            if !self.cells[start] || seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(c) = stack.pop() {
                let (i, j) = (c / self.ny, c % self.ny);
                let mut visit = |ii: usize, jj: usize| {
                    let k = ii * self.ny + jj;
                    if self.cells[k] && !seen[k] {
                        seen[k] = true;
                        stack.push(k);
                    }
                };
                if i > 0 {
                    visit(i - 1, j);
                }
                if i + 1 < self.nx {
                    visit(i + 1, j);
                }
                if j > 0 {
                    visit(i, j - 1);
                }
                if j + 1 < self.ny {
                    visit(i, j + 1);
                }
            }
        }
        count
    }
}

/// `(x, y)` projection of the reachable set with the remaining axes held at
/// `rest` (one index per axis beyond the second).
pub fn reachable_slice(snapshot: &ScalarField, rest: &[usize]) -> Result<Mask2> {
    let grid = snapshot.grid();
    if grid.ndim() < 2 || rest.len() != grid.ndim() - 2 {
        return Err(Error::arg("slice needs one index per axis beyond (x, y)"));
    }
    let (nx, ny) = (grid.axis(0).n, grid.axis(1).n);
    let mut idx = vec![0; grid.ndim()];
    idx[2..].copy_from_slice(rest);
    let mut cells = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            idx[0] = i;
            idx[1] = j;
            cells.push(snapshot.get(&idx)? <= 0.0);
        }
    }
    Ok(Mask2 { nx, ny, cells })
}

/// Drops the last axis by fixing its index.
pub fn slice_last_axis(field: &ScalarField, index: usize) -> Result<ScalarField> {
    let grid = field.grid();
    let d = grid.ndim();
    if d < 2 {
        return Err(Error::arg("cannot slice a one-axis field"));
    }
    let n_last = grid.axis(d - 1).n;
    if index >= n_last {
        return Err(Error::Index { index: vec![index], counts: vec![n_last] });
    }
    let sub = GridSpec::new(grid.axes()[..d - 1].to_vec())?;
    let values = field.values().iter().skip(index).step_by(n_last).copied().collect();
    ScalarField::new(sub, values, field.time())
}
