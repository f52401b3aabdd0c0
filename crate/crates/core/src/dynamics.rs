//! The four-state point-mass vehicle and its Hamiltonians.
//!
//! State `(x, y, psi, v)`, control `(a, w)`:
//! `x' = v cos psi`, `y' = v sin psi`, `psi' = w`, `v' = a`.
//! The dynamics are affine in the control, so `max_u (-f(z,u) . p)` is
//! attained at a vertex of the control box and has a closed form.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State4 {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v: f64,
}

impl State4 {
    pub const fn new(x: f64, y: f64, psi: f64, v: f64) -> Self {
        State4 { x, y, psi, v }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.psi, self.v]
    }

    pub fn from_slice(z: &[f64]) -> Self {
        State4::new(z[0], z[1], z[2], z[3])
    }

    pub fn axpy(self, h: f64, d: State4) -> State4 {
        State4::new(self.x + h * d.x, self.y + h * d.y, self.psi + h * d.psi, self.v + h * d.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    pub a: f64,
    pub w: f64,
}

impl Control {
    pub const fn new(a: f64, w: f64) -> Self {
        Control { a, w }
    }
}

/// Box of admissible controls: `a in [a_min, a_max]`, `|w| <= w_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlBounds {
    pub a_min: f64,
    pub a_max: f64,
    pub w_max: f64,
}

impl Default for ControlBounds {
    fn default() -> Self {
        ControlBounds { a_min: -10.0, a_max: 10.0, w_max: 1.0 }
    }
}

impl ControlBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_min <= self.a_max) || !(self.w_max >= 0.0) {
            return Err(Error::arg(format!("invalid control bounds {self:?}")));
        }
        Ok(())
    }

    pub fn contains(&self, u: Control) -> bool {
        u.a >= self.a_min && u.a <= self.a_max && u.w.abs() <= self.w_max
    }

    /// `max |a|` over the admissible accelerations.
    pub fn accel_bound(&self) -> f64 {
        self.a_min.abs().max(self.a_max.abs())
    }

    /// `n_a x n_w` tensor grid of controls, endpoints included; acceleration
    /// varies slowest.
    pub fn control_grid(&self, n_a: usize, n_w: usize) -> Vec<Control> {
        let lin = |lo: f64, hi: f64, n: usize, k: usize| {
            if n == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * k as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(n_a * n_w);
        for i in 0..n_a {
            for k in 0..n_w {
                out.push(Control::new(lin(self.a_min, self.a_max, n_a, i), lin(-self.w_max, self.w_max, n_w, k)));
            }
        }
        out
    }
}

pub fn point_mass_rhs(z: State4, u: Control) -> State4 {
    let (s, c) = z.psi.sin_cos();
    State4::new(z.v * c, z.v * s, u.w, u.a)
}

/// Point mass extended by a clock component with unit rate.
pub fn augmented_rhs(z: State4, _tau: f64, u: Control) -> [f64; 5] {
    let d = point_mass_rhs(z, u);
    [d.x, d.y, d.psi, d.v, 1.0]
}

#[inline(always)]
fn hamiltonian_terms(vcos: f64, vsin: f64, p: &[f64], b: &ControlBounds) -> f64 {
    -vcos * p[0] - vsin * p[1] + b.w_max * p[2].abs() + (-b.a_min * p[3]).max(-b.a_max * p[3])
}

/// `H(z, p) = max_{u in U} -f(z, u) . p`, evaluated in closed form.
pub fn hamiltonian(z: State4, p: [f64; 4], bounds: &ControlBounds) -> f64 {
    let (s, c) = z.psi.sin_cos();
    hamiltonian_terms(z.v * c, z.v * s, &p, bounds)
}

/// Hamiltonian of the dynamics scaled by a virtual control `lambda in [0, 1]`.
pub fn capture_hamiltonian(z: State4, p: [f64; 4], bounds: &ControlBounds) -> f64 {
    hamiltonian(z, p, bounds).max(0.0)
}

fn max_abs_cos(lo: f64, hi: f64) -> f64 {
    // |cos| peaks at multiples of pi
    if (lo / PI).ceil() <= (hi / PI).floor() {
        1.0
    } else {
        lo.cos().abs().max(hi.cos().abs())
    }
}

fn max_abs_sin(lo: f64, hi: f64) -> f64 {
    if ((lo - FRAC_PI_2) / PI).ceil() <= ((hi - FRAC_PI_2) / PI).floor() {
        1.0
    } else {
        lo.sin().abs().max(hi.sin().abs())
    }
}

/// Per-axis sup norms of the point-mass velocity field over a grid whose
/// first four axes are `(x, y, psi, v)`.
pub fn sup_norms_on_domain(grid: &GridSpec, bounds: &ControlBounds) -> Result<[f64; 4]> {
    if grid.ndim() < 4 {
        return Err(Error::arg("point-mass grid needs axes (x, y, psi, v)"));
    }
    let psi = grid.axis(2);
    let v = grid.axis(3);
    let v_max = v.lo.abs().max(v.hi.abs());
    Ok([v_max * max_abs_cos(psi.lo, psi.hi), v_max * max_abs_sin(psi.lo, psi.hi), bounds.w_max, bounds.accel_bound()])
}

/// Velocity field seen by the grid solver.
///
/// `Local` is whatever per-node data the Hamiltonian needs that does not
/// change between steps; the solver computes it once per node.
pub trait Dynamics: Sync {
    type Local: Copy + Send + Sync;

    fn dim(&self) -> usize;

    fn local(&self, z: &[f64]) -> Self::Local;

    /// `max_u -f(z, u) . p` at a node with precomputed data `local`.
    fn hamiltonian(&self, local: &Self::Local, p: &[f64]) -> f64;

    /// Bound on `|dH/dp_axis|` at the node (Lax-Friedrichs coefficient).
    fn dissipation(&self, local: &Self::Local, axis: usize) -> f64;

    fn sup_norms(&self, grid: &GridSpec) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointMass {
    pub bounds: ControlBounds,
}

impl PointMass {
    pub fn new(bounds: ControlBounds) -> Self {
        PointMass { bounds }
    }
}

impl Dynamics for PointMass {
    /// `(v cos psi, v sin psi)`
    type Local = [f64; 2];

    fn dim(&self) -> usize {
        4
    }

    fn local(&self, z: &[f64]) -> [f64; 2] {
        let (s, c) = z[2].sin_cos();
        [z[3] * c, z[3] * s]
    }

    #[inline(always)]
    fn hamiltonian(&self, l: &[f64; 2], p: &[f64]) -> f64 {
        hamiltonian_terms(l[0], l[1], p, &self.bounds)
    }

    #[inline(always)]
    fn dissipation(&self, l: &[f64; 2], axis: usize) -> f64 {
        match axis {
            0 => l[0].abs(),
            1 => l[1].abs(),
            2 => self.bounds.w_max,
            _ => self.bounds.accel_bound(),
        }
    }

    fn sup_norms(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        if grid.ndim() != 4 {
            return Err(Error::arg("point mass needs a 4-axis grid"));
        }
        Ok(sup_norms_on_domain(grid, &self.bounds)?.to_vec())
    }
}

/// Point mass on `(x, y, psi, v, t)`: the fifth axis is a clock advancing at
/// unit rate, which turns time-dependent constraints into static ones.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClockAugmentedPointMass {
    pub bounds: ControlBounds,
}

impl Dynamics for ClockAugmentedPointMass {
    type Local = [f64; 2];

    fn dim(&self) -> usize {
        5
    }

    fn local(&self, z: &[f64]) -> [f64; 2] {
        PointMass::new(self.bounds).local(z)
    }

    #[inline(always)]
    fn hamiltonian(&self, l: &[f64; 2], p: &[f64]) -> f64 {
        hamiltonian_terms(l[0], l[1], p, &self.bounds) - p[4]
    }

    #[inline(always)]
    fn dissipation(&self, l: &[f64; 2], axis: usize) -> f64 {
        match axis {
            4 => 1.0,
            j => PointMass::new(self.bounds).dissipation(l, j),
        }
    }

    fn sup_norms(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        if grid.ndim() != 5 {
            return Err(Error::arg("clock-augmented point mass needs a 5-axis grid"));
        }
        let mut s = sup_norms_on_domain(grid, &self.bounds)?.to_vec();
        s.push(1.0);
        Ok(s)
    }
}

/// Uncontrolled transport `z' = c` in any dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantAdvection {
    pub velocity: Vec<f64>,
}

impl Dynamics for ConstantAdvection {
    type Local = ();

    fn dim(&self) -> usize {
        self.velocity.len()
    }

    fn local(&self, _z: &[f64]) {}

    fn hamiltonian(&self, _l: &(), p: &[f64]) -> f64 {
        -self.velocity.iter().zip(p).map(|(c, p)| c * p).sum::<f64>()
    }

    fn dissipation(&self, _l: &(), axis: usize) -> f64 {
        self.velocity[axis].abs()
    }

    fn sup_norms(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        if grid.ndim() != self.velocity.len() {
            return Err(Error::arg("advection velocity does not match grid dimension"));
        }
        Ok(self.velocity.iter().map(|c| c.abs()).collect())
    }
}
