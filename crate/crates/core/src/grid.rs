//! Uniform Cartesian meshes, node fields and the finite-difference toolkit
//! shared by the solver: ENO2 one-sided derivatives, the CFL step and the
//! discrete error norms used by the refinement study.
//!
//! Fields are stored flat in row-major order (last axis fastest). Outside
//! the box, nodes are extended linearly, which gives first-order one-sided
//! differences at the two outermost layers.

use std::io::{BufRead, BufReader, Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_AXES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64, n: usize) -> Self {
        Axis { name: name.into(), lo, hi, n }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        // exact endpoint instead of lo + (n-1)*step
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Axis>", into = "Vec<Axis>")]
pub struct GridSpec {
    axes: Vec<Axis>,
    strides: Vec<usize>,
}

impl TryFrom<Vec<Axis>> for GridSpec {
    type Error = Error;

    fn try_from(axes: Vec<Axis>) -> Result<Self> {
        GridSpec::new(axes)
    }
}

impl From<GridSpec> for Vec<Axis> {
    fn from(grid: GridSpec) -> Self {
        grid.axes
    }
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_AXES {
            return Err(Error::arg(format!("grid needs 1 to {MAX_AXES} axes, got {}", axes.len())));
        }
        for a in &axes {
            if !(a.lo.is_finite() && a.hi.is_finite() && a.lo < a.hi) {
                return Err(Error::arg(format!("axis '{}' needs finite lo < hi, got [{}, {}]", a.name, a.lo, a.hi)));
            }
            if a.n < 3 {
                return Err(Error::arg(format!("axis '{}' needs at least 3 nodes, got {}", a.name, a.n)));
            }
        }
        let mut strides = vec![1usize; axes.len()];
        for j in (0..axes.len() - 1).rev() {
            strides[j] = strides[j + 1] * axes[j + 1].n;
        }
        Ok(GridSpec { axes, strides })
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, j: usize) -> &Axis {
        &self.axes[j]
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn step(&self, j: usize) -> f64 {
        self.axes[j].step()
    }

    pub fn steps(&self) -> Vec<f64> {
        self.axes.iter().map(Axis::step).collect()
    }

    /// Volume of one mesh cell, `|dz| = prod dx_j`.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::step).product()
    }

    pub fn same_box(&self, other: &GridSpec) -> bool {
        self.ndim() == other.ndim() && self.axes.iter().zip(&other.axes).all(|(a, b)| a.lo == b.lo && a.hi == b.hi)
    }

    fn check_index(&self, index: &[usize]) -> Result<()> {
        if index.len() != self.ndim() || index.iter().zip(&self.axes).any(|(&i, a)| i >= a.n) {
            return Err(Error::Index { index: index.to_vec(), counts: self.counts() });
        }
        Ok(())
    }

    pub fn node_coords(&self, index: &[usize]) -> Result<Vec<f64>> {
        self.check_index(index)?;
        Ok(index.iter().zip(&self.axes).map(|(&i, a)| a.coord(i)).collect())
    }

    pub fn flat_index(&self, index: &[usize]) -> Result<usize> {
        self.check_index(index)?;
        Ok(index.iter().zip(&self.strides).map(|(i, s)| i * s).sum())
    }

    /// Writes the multi-index of `flat` into `out`.
    pub fn unflatten(&self, mut flat: usize, out: &mut [usize]) {
        for (j, s) in self.strides.iter().enumerate() {
            out[j] = flat / s;
            flat %= s;
        }
    }

    pub fn coords_of_flat(&self, flat: usize, out: &mut [f64]) {
        let mut idx = [0usize; MAX_AXES];
        self.unflatten(flat, &mut idx[..self.ndim()]);
        for j in 0..self.ndim() {
            out[j] = self.axes[j].coord(idx[j]);
        }
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.ndim() && point.iter().zip(&self.axes).all(|(&c, a)| c >= a.lo && c <= a.hi)
    }

    /// Enclosing cell of `point`: lower-corner index and fractional offset per axis.
    /// `None` outside the closed box.
    pub(crate) fn locate(&self, point: &[f64]) -> Option<([usize; MAX_AXES], [f64; MAX_AXES])> {
        if !self.contains(point) {
            return None;
        }
        let mut base = [0usize; MAX_AXES];
        let mut frac = [0.0; MAX_AXES];
        for (j, a) in self.axes.iter().enumerate() {
            let mut s = (point[j] - a.lo) / a.step();
            // Snap round-off so node coordinates read node values exactly.
            if (s - s.round()).abs() < 1e-9 {
                s = s.round();
            }
            let i = (s.floor().max(0.0) as usize).min(a.n - 2);
            base[j] = i;
            frac[j] = (s - i as f64).clamp(0.0, 1.0);
        }
        Some((base, frac))
    }

    /// Multilinear interpolation of node `values` at `point`. Corners with
    /// zero weight are never read. When any corner with positive weight is
    /// `+inf` the result is `+inf`.
    pub fn interpolate(&self, values: &[f64], point: &[f64]) -> Option<f64> {
        let (base, frac) = self.locate(point)?;
        let d = self.ndim();
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for j in 0..d {
                let up = (corner >> j) & 1 == 1;
                w *= if up { frac[j] } else { 1.0 - frac[j] };
                flat += (base[j] + up as usize) * self.strides[j];
            }
            if w == 0.0 {
                continue;
            }
            let v = values[flat];
            if v == f64::INFINITY {
                return Some(f64::INFINITY);
            }
            acc += w * v;
        }
        Some(acc)
    }
}

/// Real values on every node of a grid, stamped with a time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
    time: f64,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::arg(format!("field has {} values, grid has {} nodes", values.len(), grid.len())));
        }
        if let Some(bad) = values.iter().find(|v| v.is_nan() || **v == f64::NEG_INFINITY) {
            return Err(Error::arg(format!("field value {bad} is not allowed")));
        }
        Ok(ScalarField { grid, values, time })
    }

    /// Samples `f` at every node.
    pub fn from_fn<F>(grid: GridSpec, time: f64, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let d = grid.ndim();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let mut z = [0.0; MAX_AXES];
                grid.coords_of_flat(k, &mut z[..d]);
                f(&z[..d])
            })
            .collect();
        ScalarField { grid, values, time }
    }

    pub(crate) fn from_parts(grid: GridSpec, values: Vec<f64>, time: f64) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        ScalarField { grid, values, time }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.values[self.grid.flat_index(index)?])
    }

    pub fn interpolate(&self, point: &[f64]) -> Option<f64> {
        self.grid.interpolate(&self.values, point)
    }

    /// CSV snapshot: header `i1,..,ik,x1,..,xk,value`, one node per line.
    /// Infinite values are written as `inf`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.grid.ndim();
        let mut header: Vec<String> = (1..=d).map(|j| format!("i{j}")).collect();
        header.extend((1..=d).map(|j| format!("x{j}")));
        header.push("value".into());
        writeln!(out, "{}", header.join(","))?;
        let mut idx = [0usize; MAX_AXES];
        for (k, v) in self.values.iter().enumerate() {
            self.grid.unflatten(k, &mut idx[..d]);
            let mut line = String::with_capacity(16 * (2 * d + 1));
            for i in &idx[..d] {
                line.push_str(&i.to_string());
                line.push(',');
            }
            for (j, i) in idx[..d].iter().enumerate() {
                line.push_str(&self.grid.axis(j).coord(*i).to_string());
                line.push(',');
            }
            line.push_str(&v.to_string());
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Binary dump, little endian: magic `HJRF`, version, axes, time, values.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&(self.grid.ndim() as u32).to_le_bytes())?;
        for a in self.grid.axes() {
            out.write_all(&(a.name.len() as u32).to_le_bytes())?;
            out.write_all(a.name.as_bytes())?;
            out.write_all(&a.lo.to_le_bytes())?;
            out.write_all(&a.hi.to_le_bytes())?;
            out.write_all(&(a.n as u64).to_le_bytes())?;
        }
        out.write_all(&self.time.to_le_bytes())?;
        out.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(input: R) -> Result<Self> {
        let mut r = BufReader::new(input);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        if read_u32(&mut r)? != FORMAT_VERSION {
            return Err(Error::Format("unsupported version".into()));
        }
        let ndim = read_u32(&mut r)? as usize;
        if ndim == 0 || ndim > MAX_AXES {
            return Err(Error::Format(format!("bad axis count {ndim}")));
        }
        let mut axes = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            let len = read_u32(&mut r)? as usize;
            let mut name = vec![0u8; len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|e| Error::Format(e.to_string()))?;
            let lo = read_f64(&mut r)?;
            let hi = read_f64(&mut r)?;
            let n = read_u64(&mut r)? as usize;
            axes.push(Axis { name, lo, hi, n });
        }
        let grid = GridSpec::new(axes).map_err(|e| Error::Format(e.to_string()))?;
        let time = read_f64(&mut r)?;
        let len = read_u64(&mut r)? as usize;
        if len != grid.len() {
            return Err(Error::Format(format!("value count {len} does not match grid ({})", grid.len())));
        }
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            values.push(read_f64(&mut r)?);
        }
        if !r.fill_buf()?.is_empty() {
            return Err(Error::Format("trailing bytes".into()));
        }
        Ok(ScalarField { grid, values, time })
    }
}

const MAGIC: &[u8; 4] = b"HJRF";
const FORMAT_VERSION: u32 = 1;

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[inline(always)]
fn smaller_abs(a: f64, b: f64) -> f64 {
    // Bit select instead of a branch so that row loops vectorize.
    let mask = 0u64.wrapping_sub((a.abs() <= b.abs()) as u64);
    f64::from_bits((a.to_bits() & mask) | (b.to_bits() & !mask))
}

/// Second-order ENO left/right derivatives from the five-point stencil
/// `v[i-2..=i+2]`.
#[inline(always)]
pub(crate) fn eno2_kernel(vm2: f64, vm1: f64, v0: f64, vp1: f64, vp2: f64, inv_dx: f64) -> (f64, f64) {
    let d2_left = vm2 - 2.0 * vm1 + v0;
    let d2_mid = vm1 - 2.0 * v0 + vp1;
    let d2_right = v0 - 2.0 * vp1 + vp2;
    let left = (v0 - vm1 + 0.5 * smaller_abs(d2_left, d2_mid)) * inv_dx;
    let right = (vp1 - v0 - 0.5 * smaller_abs(d2_mid, d2_right)) * inv_dx;
    (left, right)
}

/// Value at offset `off` from node `i` along an axis of `n` nodes, linearly
/// extended past either end. `at(k)` reads in-range node `k`.
#[inline(always)]
pub(crate) fn extended(i: usize, off: isize, n: usize, at: impl Fn(usize) -> f64) -> f64 {
    let k = i as isize + off;
    if k < 0 {
        let v0 = at(0);
        v0 + k as f64 * (at(1) - v0)
    } else if k as usize >= n {
        let last = at(n - 1);
        last + (k - (n as isize - 1)) as f64 * (last - at(n - 2))
    } else {
        at(k as usize)
    }
}

/// Left and right ENO2 approximations of the derivative along `axis` at `index`.
pub fn eno2_one_sided(field: &ScalarField, axis: usize, index: &[usize]) -> Result<(f64, f64)> {
    let grid = field.grid();
    let base = grid.flat_index(index)?;
    if axis >= grid.ndim() {
        return Err(Error::arg(format!("axis {axis} out of range")));
    }
    let n = grid.axis(axis).n;
    let stride = grid.strides()[axis];
    let i = index[axis];
    let line_start = base - i * stride;
    let vals = field.values();
    let at = |k: usize| vals[line_start + k * stride];
    let s = |off| extended(i, off, n, at);
    Ok(eno2_kernel(s(-2), s(-1), s(0), s(1), s(2), 1.0 / grid.step(axis)))
}

/// Largest stable explicit step: `cfl / sum_j (|f_j|_inf / dx_j)`, or `+inf`
/// when every sup norm vanishes.
pub fn cfl_timestep(grid: &GridSpec, sup_norms: &[f64], cfl_number: f64) -> Result<f64> {
    if sup_norms.len() != grid.ndim() {
        return Err(Error::arg(format!("expected {} sup norms, got {}", grid.ndim(), sup_norms.len())));
    }
    if !(cfl_number > 0.0 && cfl_number <= 1.0) {
        return Err(Error::arg(format!("CFL number {cfl_number} not in (0, 1]")));
    }
    if let Some(bad) = sup_norms.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::arg(format!("negative sup norm {bad}")));
    }
    let rate: f64 = sup_norms.iter().zip(grid.steps()).map(|(f, dx)| f / dx).sum();
    if rate == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(cfl_number / rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub linf: f64,
    pub l1: f64,
    pub l2: f64,
}

/// Discrete `L_inf`, `L1` and `L2` errors of `field` against `reference`,
/// measured at the nodes of `field`. The reference is sampled by multilinear
/// interpolation, which is exact wherever the nodes coincide.
pub fn error_norms(field: &ScalarField, reference: &ScalarField) -> Result<ErrorNorms> {
    let grid = field.grid();
    if !grid.same_box(reference.grid()) {
        return Err(Error::arg("field and reference grids cover different boxes"));
    }
    let d = grid.ndim();
    let mut linf: f64 = 0.0;
    let mut sum_abs = 0.0;
    let mut sum_sq = 0.0;
    let mut z = [0.0; MAX_AXES];
    for (k, v) in field.values().iter().enumerate() {
        grid.coords_of_flat(k, &mut z[..d]);
        let r = reference.interpolate(&z[..d]).ok_or_else(|| Error::arg("reference does not cover field node"))?;
        let e = v - r;
        if !e.is_finite() {
            return Err(Error::arg("non-finite error at a node"));
        }
        linf = linf.max(e.abs());
        sum_abs += e.abs();
        sum_sq += e * e;
    }
    let vol = grid.cell_volume();
    Ok(ErrorNorms { linf, l1: vol * sum_abs, l2: vol.sqrt() * sum_sq.sqrt() })
}

/// Observed order between two successive refinements by a factor of two.
pub fn convergence_order(e_coarse: f64, e_fine: f64) -> Result<f64> {
    if !(e_coarse > 0.0 && e_fine > 0.0) {
        return Err(Error::arg(format!("errors must be positive, got {e_coarse} and {e_fine}")));
    }
    Ok((e_coarse / e_fine).ln() / 2f64.ln())
}
