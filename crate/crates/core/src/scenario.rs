//! Scenario configuration, the built-in catalog and the batch runners used
//! by the command-line tool.
//!
//! Configurations are TOML; see `docs/config.md` for the schema.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::collision::{compute_safety_bound, exact_rect_intersect, SafetyBound};
use crate::dynamics::{ClockAugmentedPointMass, ControlBounds, Dynamics, PointMass, State4};
use crate::error::{Error, Result};
use crate::grid::{convergence_order, error_norms, Axis, ErrorNorms, GridSpec, ScalarField};
use crate::hjb::{
    self, reachable_slice, slice_last_axis, Clock, HjbProblem, Mask2, Mode, SolveOptions, Stencil, ValueEvolution,
};
use crate::levelset::{self, combine_max, CurvedRoad, LevelSetExpr, Obstacle, Point, Rect, Shape, TargetBox};
use crate::mintime::{self, certify_trajectory, default_eta, MinimalTimeField, ReconstructOptions, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub x: AxisRange,
    pub y: AxisRange,
    pub psi: AxisRange,
    pub v: AxisRange,
}

impl GridConfig {
    pub fn to_grid(&self) -> Result<GridSpec> {
        let ax = |name: &str, r: &AxisRange| Axis::new(name, r.lo, r.hi, r.n);
        GridSpec::new(vec![ax("x", &self.x), ax("y", &self.y), ax("psi", &self.psi), ax("v", &self.v)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoadConfig {
    None,
    Straight {
        y_down: f64,
        y_up: f64,
    },
    VaryingWidth {
        y_up: f64,
        y_down1: f64,
        y_down2: f64,
        x_bar: f64,
    },
    Curved {
        center: Point,
        r_down: f64,
        r_up: f64,
        theta_min: f64,
        theta_max: f64,
    },
    /// Inner corners: upper right, upper left, lower left, lower right.
    Crossing {
        corners: [Point; 4],
    },
}

impl RoadConfig {
    pub fn to_expr(&self) -> Result<Option<LevelSetExpr>> {
        Ok(Some(match *self {
            RoadConfig::None => return Ok(None),
            RoadConfig::Straight { y_down, y_up } => levelset::straight_road(y_down, y_up)?,
            RoadConfig::VaryingWidth { y_up, y_down1, y_down2, x_bar } => {
                levelset::varying_width_road(y_up, y_down1, y_down2, x_bar)?
            }
            RoadConfig::Curved { center, r_down, r_up, theta_min, theta_max } => {
                levelset::curved_road(CurvedRoad { center, r_down, r_up, theta_min, theta_max })?
            }
            RoadConfig::Crossing { corners } => levelset::crossing_road(corners),
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleConfig {
    pub shape: Shape,
    /// `(x, y, psi, v)`
    pub start: [f64; 4],
}

impl VehicleConfig {
    pub fn start_state(&self) -> State4 {
        State4::from_slice(&self.start)
    }

    pub fn half(&self) -> [f64; 2] {
        match self.shape {
            Shape::Rectangle { half } => half,
            Shape::Disk { radius } => [radius, radius],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionConfig {
    pub h: f64,
    /// Defaults to `1.5 max(dx, dy) / v0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Defaults to `ceil(2 T / h)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default = "default_samples")]
    pub accel_samples: usize,
    #[serde(default = "default_samples")]
    pub yaw_rate_samples: usize,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    /// Time assigned to unreachable cell corners during the control search;
    /// absent means any unreachable corner makes the cell unreachable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentinel_penalty: Option<f64>,
    /// Margin for the interval check between reconstruction steps.
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_samples() -> usize {
    21
}

fn default_substeps() -> usize {
    1
}

fn default_margin() -> f64 {
    0.2
}

fn default_cfl() -> f64 {
    0.5
}

fn default_clock_nodes() -> usize {
    21
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            h: 0.02,
            eta: None,
            max_steps: None,
            accel_samples: default_samples(),
            yaw_rate_samples: default_samples(),
            substeps: default_substeps(),
            sentinel_penalty: None,
            margin: default_margin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Heading of the `(x, y)` slice; nearest node is used.
    #[serde(default)]
    pub slice_psi: f64,
    /// Speed of the `(x, y)` slice; defaults to the start speed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice_v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub horizon: f64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub stencil: Stencil,
    #[serde(default)]
    pub clock: Clock,
    /// Nodes on the clock axis when `clock = "augmented"`.
    #[serde(default = "default_clock_nodes")]
    pub clock_nodes: usize,
    pub grid: GridConfig,
    #[serde(default)]
    pub controls: ControlBounds,
    pub vehicle: VehicleConfig,
    pub road: RoadConfig,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub target: Vec<TargetBox>,
    #[serde(default)]
    pub reconstruction: ReconstructionConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Structural checks plus disjointness of the start pose from every
    /// obstacle at time 0.
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::config(e.to_string());
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config("horizon must be positive"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::config("cfl must lie in (0, 1]"));
        }
        self.controls.validate().map_err(cfg)?;
        let grid = self.grid.to_grid().map_err(cfg)?;
        if !grid.contains(&self.vehicle.start) {
            return Err(Error::config(format!("start state {:?} lies outside the grid", self.vehicle.start)));
        }
        for o in &self.obstacles {
            Obstacle::new(o.shape, o.motion).map_err(cfg)?;
        }
        self.road.to_expr().map_err(cfg)?;
        self.constraint().map_err(cfg)?;
        levelset::target_union(&self.target).map_err(cfg)?;
        if self.reconstruction.h <= 0.0 {
            return Err(Error::config("reconstruction step must be positive"));
        }
        if self.clock == Clock::Augmented && self.clock_nodes < 3 {
            return Err(Error::config("clock axis needs at least 3 nodes"));
        }
        if self.initially_overlapping() {
            return Err(Error::config("start pose overlaps an obstacle at time 0"));
        }
        Ok(())
    }

    fn initially_overlapping(&self) -> bool {
        let s = self.vehicle.start_state();
        self.obstacles.iter().any(|o| match (self.vehicle.shape, o.shape) {
            (Shape::Rectangle { half }, Shape::Rectangle { half: oh }) => {
                let v = Rect::new([s.x, s.y], s.psi, half);
                exact_rect_intersect(&v, &Rect::at(o.pose(0.0), oh))
            }
            (vs, os) => {
                let c = o.pose(0.0).center;
                (s.x - c[0]).hypot(s.y - c[1]) <= vs.extent() + os.extent()
            }
        })
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        self.grid.to_grid()
    }

    pub fn target_expr(&self) -> Result<LevelSetExpr> {
        levelset::target_union(&self.target)
    }

    /// Road and obstacle avoidance combined.
    pub fn constraint(&self) -> Result<LevelSetExpr> {
        let road = self.road.to_expr()?;
        let avoid = self.obstacle_expr()?;
        Ok(match (road, avoid) {
            (Some(r), Some(a)) => combine_max(r, a),
            (Some(r), None) => r,
            (None, Some(a)) => a,
            (None, None) => LevelSetExpr::Constant(-1.0),
        })
    }

    pub fn obstacle_expr(&self) -> Result<Option<LevelSetExpr>> {
        if self.obstacles.is_empty() {
            return Ok(None);
        }
        Ok(Some(match self.vehicle.shape {
            Shape::Rectangle { half } => levelset::rect_avoidance(half, self.obstacles.clone())?,
            Shape::Disk { radius } => levelset::disk_avoidance(self.obstacles.clone(), radius)?,
        }))
    }

    pub fn problem(&self) -> Result<HjbProblem<PointMass>> {
        let mut p = HjbProblem::new(
            self.grid_spec()?,
            PointMass::new(self.controls),
            self.target_expr()?,
            self.constraint()?,
            self.horizon,
        );
        p.mode = self.mode;
        p.cfl = self.cfl;
        p.stencil = self.stencil;
        Ok(p)
    }

    /// Problem on `(x, y, psi, v, t)` with the clock axis spanning the
    /// horizon.
    pub fn augmented_problem(&self) -> Result<HjbProblem<ClockAugmentedPointMass>> {
        let mut axes = self.grid_spec()?.axes().to_vec();
        axes.push(Axis::new("t", 0.0, self.horizon, self.clock_nodes));
        let mut p = HjbProblem::new(
            GridSpec::new(axes)?,
            ClockAugmentedPointMass { bounds: self.controls },
            self.target_expr()?,
            self.constraint()?,
            self.horizon,
        );
        p.mode = self.mode;
        p.cfl = self.cfl;
        p.stencil = self.stencil;
        p.clock = Clock::Augmented;
        Ok(p)
    }

    pub fn safety_bound(&self) -> Result<SafetyBound> {
        let v = &self.grid.v;
        compute_safety_bound(self.vehicle.half(), &self.controls, &self.obstacles, v.lo.abs().max(v.hi.abs()))
    }

    /// Node indices of the `(psi, v)` output slice.
    pub fn slice_indices(&self) -> Result<[usize; 2]> {
        let g = self.grid_spec()?;
        let v = self.output.slice_v.unwrap_or(self.vehicle.start[3]);
        Ok([nearest_node(g.axis(2), self.output.slice_psi), nearest_node(g.axis(3), v)])
    }

    pub fn reconstruct_options(&self) -> Result<ReconstructOptions> {
        let r = &self.reconstruction;
        let grid = self.grid_spec()?;
        Ok(ReconstructOptions {
            h: r.h,
            eta: r.eta.unwrap_or_else(|| default_eta(&grid, self.vehicle.start[3])),
            max_steps: r.max_steps.unwrap_or((2.0 * self.horizon / r.h).ceil() as usize),
            accel_samples: r.accel_samples,
            yaw_rate_samples: r.yaw_rate_samples,
            substeps: r.substeps,
            sentinel_penalty: r.sentinel_penalty,
        })
    }

    /// Same scenario with `(N_x, N_y) = (35 2^m, 4 2^m)`.
    pub fn refined(&self, m: u32) -> ScenarioConfig {
        let mut c = self.clone();
        c.grid.x.n = 35 << m;
        c.grid.y.n = 4 << m;
        c
    }
}

fn nearest_node(axis: &Axis, value: f64) -> usize {
    let k = ((value - axis.lo) / axis.step()).round();
    k.clamp(0.0, (axis.n - 1) as f64) as usize
}

const CATALOG: &[(&str, &str)] = &[
    ("scenario1", include_str!("../scenarios/scenario1.toml")),
    ("scenario2a", include_str!("../scenarios/scenario2a.toml")),
    ("scenario2b", include_str!("../scenarios/scenario2b.toml")),
    ("scenario3a", include_str!("../scenarios/scenario3a.toml")),
    ("scenario3b", include_str!("../scenarios/scenario3b.toml")),
    ("scenario4", include_str!("../scenarios/scenario4.toml")),
];

pub fn builtin_names() -> Vec<&'static str> {
    CATALOG.iter().map(|(n, _)| *n).collect()
}

/// Shipped configuration text of a built-in scenario.
pub fn builtin_source(name: &str) -> Result<&'static str> {
    CATALOG
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| Error::config(format!("unknown scenario '{name}'; available: {}", builtin_names().join(", "))))
}

pub fn builtin_scenario(name: &str) -> Result<ScenarioConfig> {
    ScenarioConfig::from_toml(builtin_source(name)?)
}

/// Accepts a built-in name or a path to a TOML file.
pub fn resolve(spec: &str) -> Result<ScenarioConfig> {
    if CATALOG.iter().any(|(n, _)| *n == spec) {
        builtin_scenario(spec)
    } else {
        ScenarioConfig::load(Path::new(spec))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub cfl: Option<f64>,
    pub snapshot_times: Option<Vec<f64>>,
    pub start: Option<[f64; 4]>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) -> Result<()> {
        if let Some(c) = self.cfl {
            cfg.cfl = c;
        }
        if let Some(t) = &self.snapshot_times {
            cfg.output.snapshot_times = t.clone();
        }
        if let Some(s) = self.start {
            cfg.vehicle.start = s;
        }
        cfg.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: String,
    pub mode: Mode,
    pub clock: Clock,
    pub stencil: Stencil,
    pub grid: GridSpec,
    pub horizon: f64,
    pub cfl: f64,
    pub steps: usize,
    pub dt: Vec<f64>,
    pub step_seconds: Vec<f64>,
    pub solve_seconds: f64,
    pub snapshot_times: Vec<f64>,
    pub workers: usize,
    pub files: Vec<String>,
}

pub struct SolveReport {
    pub manifest: RunManifest,
    pub evolution: ValueEvolution,
    /// Minimal-time field on the state axes (plus the clock axis for an
    /// augmented run).
    pub min_time: MinimalTimeField,
    /// Value on the state axes at the horizon; for an augmented run this is
    /// the clock-0 slice.
    pub value: ScalarField,
}

impl SolveReport {
    pub fn final_slice(&self, cfg: &ScenarioConfig) -> Result<Mask2> {
        reachable_slice(&self.value, &cfg.slice_indices()?)
    }
}

/// Solves without writing anything.
pub fn solve_scenario(cfg: &ScenarioConfig) -> Result<SolveReport> {
    let opts = SolveOptions { snapshot_times: cfg.output.snapshot_times.clone(), track_min_time: true, dt: None };
    let start = Instant::now();
    let (evolution, grid) = match cfg.clock {
        Clock::Slice => {
            let p = cfg.problem()?;
            (hjb::solve(&p, &opts)?, p.grid)
        }
        Clock::Augmented => {
            let p = cfg.augmented_problem()?;
            (hjb::solve(&p, &opts)?, p.grid)
        }
    };
    let solve_seconds = start.elapsed().as_secs_f64();
    let min_time = evolution.min_time.clone().expect("min time tracked");
    let last = evolution.final_snapshot();
    let value = match cfg.clock {
        Clock::Slice => last.clone(),
        Clock::Augmented => slice_last_axis(last, 0)?,
    };
    let manifest = RunManifest {
        scenario: cfg.name.clone(),
        mode: cfg.mode,
        clock: cfg.clock,
        stencil: cfg.stencil,
        grid,
        horizon: cfg.horizon,
        cfl: cfg.cfl,
        steps: evolution.dt.len(),
        dt: evolution.dt.clone(),
        step_seconds: evolution.step_seconds.clone(),
        solve_seconds,
        snapshot_times: evolution.snapshots.iter().map(|s| s.time()).collect(),
        workers: rayon::current_num_threads(),
        files: Vec::new(),
    };
    Ok(SolveReport { manifest, evolution, min_time, value })
}

fn create(dir: &Path, name: &str, files: &mut Vec<String>) -> Result<BufWriter<File>> {
    files.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Solves and writes value snapshots (binary), the minimal-time field
/// (binary and CSV), `(x, y)` reachability slices (CSV) and `manifest.json`.
pub fn run_solve(cfg: &ScenarioConfig, out_dir: &Path) -> Result<SolveReport> {
    fs::create_dir_all(out_dir)?;
    let mut report = solve_scenario(cfg)?;
    let mut files = Vec::new();
    let rest = cfg.slice_indices()?;
    for (k, snap) in report.evolution.snapshots.iter().enumerate() {
        snap.write_binary(create(out_dir, &format!("value_{k:03}.bin"), &mut files)?)?;
        let state_snap = match cfg.clock {
            Clock::Slice => snap.clone(),
            Clock::Augmented => slice_last_axis(snap, 0)?,
        };
        write_slice_csv(&state_snap, &rest, create(out_dir, &format!("slice_{k:03}.csv"), &mut files)?)?;
    }
    report.min_time.field().write_binary(create(out_dir, "min_time.bin", &mut files)?)?;
    report.min_time.field().write_csv(create(out_dir, "min_time.csv", &mut files)?)?;
    let mut w = create(out_dir, "manifest.json", &mut files)?;
    report.manifest.files = files;
    serde_json::to_writer_pretty(&mut w, &report.manifest).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(w)?;
    Ok(report)
}

/// CSV of the `(x, y)` slice: `x,y,value,reachable`.
pub fn write_slice_csv<W: Write>(field: &ScalarField, rest: &[usize], mut out: W) -> Result<()> {
    let grid = field.grid();
    writeln!(out, "x,y,value,reachable")?;
    let mut idx = vec![0; grid.ndim()];
    idx[2..].copy_from_slice(rest);
    for i in 0..grid.axis(0).n {
        for j in 0..grid.axis(1).n {
            idx[0] = i;
            idx[1] = j;
            let v = field.get(&idx)?;
            writeln!(out, "{},{},{},{}", grid.axis(0).coord(i), grid.axis(1).coord(j), v, u8::from(v <= 0.0))?;
        }
    }
    Ok(())
}

pub struct ReconstructReport {
    pub trajectory: Trajectory,
    pub bound: SafetyBound,
    pub warnings: Vec<String>,
}

/// Reconstructs from the configured start (or the override) and certifies
/// every step. Solves first when no field is given.
pub fn run_reconstruct(
    cfg: &ScenarioConfig,
    field: Option<&MinimalTimeField>,
    out_dir: Option<&Path>,
) -> Result<ReconstructReport> {
    let solved;
    let field = match field {
        Some(f) => f,
        None => {
            solved = solve_scenario(cfg)?;
            &solved.min_time
        }
    };
    let opts = cfg.reconstruct_options()?;
    let constraint = cfg.constraint()?;
    let mut trajectory =
        mintime::reconstruct(field, cfg.vehicle.start_state(), &cfg.controls, &opts, Some(&constraint))?;
    let bound = cfg.safety_bound()?;
    let mut warnings = Vec::new();
    if !cfg.obstacles.is_empty() && opts.h >= bound.dt_max {
        warnings.push(format!(
            "reconstruction step {} is not below the certified bound {:.5}; steps rely on the margin check",
            opts.h, bound.dt_max
        ));
    }
    if cfg.clock == Clock::Slice && constraint.is_time_dependent() {
        warnings
            .push("moving obstacles with a slice clock: the time-to-go field assumes a deadline at the horizon".into());
    }
    certify_trajectory(&mut trajectory, cfg.vehicle.half(), &cfg.obstacles, &bound, cfg.reconstruction.margin);
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        trajectory.write_csv(BufWriter::new(File::create(dir.join("trajectory.csv"))?))?;
    }
    Ok(ReconstructReport { trajectory, bound, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub m: u32,
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub errors: ErrorNorms,
    /// Orders against the previous row; absent on the first row.
    pub orders: Option<[f64; 3]>,
    pub cpu_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub reference_m: u32,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "Nx,Ny,dt,e_linf,order_linf,e_l1,order_l1,e_l2,order_l2,cpu_seconds")?;
        for r in &self.rows {
            let o = |k: usize| r.orders.map_or(String::new(), |o| format!("{:.2}", o[k]));
            writeln!(
                out,
                "{},{},{:.3e},{:.4},{},{:.4},{},{:.4},{},{:.2}",
                r.nx,
                r.ny,
                r.dt,
                r.errors.linf,
                o(0),
                r.errors.l1,
                o(1),
                r.errors.l2,
                o(2),
                r.cpu_seconds
            )?;
        }
        Ok(())
    }

    /// Fixed-width rendering with `--` for missing orders.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:>5} {:>4} {:>10} {:>8} {:>6} {:>8} {:>6} {:>8} {:>6} {:>9}\n",
            "Nx", "Ny", "dt", "e_Linf", "order", "e_L1", "order", "e_L2", "order", "cpu (s)"
        );
        for r in &self.rows {
            let o = |k: usize| r.orders.map_or("--".to_string(), |o| format!("{:.2}", o[k]));
            s.push_str(&format!(
                "{:>5} {:>4} {:>10.3e} {:>8.4} {:>6} {:>8.4} {:>6} {:>8.4} {:>6} {:>9.2}\n",
                r.nx,
                r.ny,
                r.dt,
                r.errors.linf,
                o(0),
                r.errors.l1,
                o(1),
                r.errors.l2,
                o(2),
                r.cpu_seconds
            ));
        }
        s
    }
}

fn final_value(cfg: &ScenarioConfig) -> Result<(ScalarField, f64, f64)> {
    let p = cfg.problem()?;
    let dt = p.cfl_limit()?;
    let ev = hjb::solve(&p, &SolveOptions::default())?;
    let cpu = ev.step_seconds.iter().sum();
    Ok((ev.snapshots.into_iter().last().expect("final snapshot"), dt, cpu))
}

/// Grid-refinement study at `(N_x, N_y) = (35 2^m, 4 2^m)` against the
/// level `reference`. The reference is sampled at coarse nodes by
/// multilinear interpolation.
pub fn run_convergence(cfg: &ScenarioConfig, levels: &[u32], reference: u32) -> Result<ConvergenceTable> {
    run_convergence_with(cfg, levels, reference, |_| {})
}

/// As [`run_convergence`], reporting each finished row.
pub fn run_convergence_with(
    cfg: &ScenarioConfig,
    levels: &[u32],
    reference: u32,
    mut progress: impl FnMut(&ConvergenceRow),
) -> Result<ConvergenceTable> {
    if levels.is_empty() {
        return Err(Error::config("no refinement levels given"));
    }
    if cfg.clock != Clock::Slice {
        return Err(Error::config("convergence study needs a slice clock"));
    }
    let (ref_field, _, _) = final_value(&cfg.refined(reference))?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &m in levels {
        let c = cfg.refined(m);
        let (field, dt, cpu) = final_value(&c)?;
        let errors = error_norms(&field, &ref_field)?;
        let orders = match rows.last() {
            Some(prev) => Some([
                convergence_order(prev.errors.linf, errors.linf)?,
                convergence_order(prev.errors.l1, errors.l1)?,
                convergence_order(prev.errors.l2, errors.l2)?,
            ]),
            None => None,
        };
        let row = ConvergenceRow { m, nx: c.grid.x.n, ny: c.grid.y.n, dt, errors, orders, cpu_seconds: cpu };
        progress(&row);
        rows.push(row);
    }
    Ok(ConvergenceTable { reference_m: reference, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterExpr {
    Road,
    Obstacle,
    Target,
}

impl std::str::FromStr for RasterExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "road" => Ok(RasterExpr::Road),
            "obstacle" | "obstacles" => Ok(RasterExpr::Obstacle),
            "target" => Ok(RasterExpr::Target),
            other => Err(Error::config(format!("unknown expression '{other}' (road, obstacle, target)"))),
        }
    }
}

/// Samples an expression on the `(x, y)` nodes of the grid at the output
/// slice heading and speed. CSV: `x,y,value`.
pub fn rasterize_levelset<W: Write>(cfg: &ScenarioConfig, which: RasterExpr, time: f64, mut out: W) -> Result<()> {
    let expr = match which {
        RasterExpr::Road => cfg.road.to_expr()?,
        RasterExpr::Obstacle => cfg.obstacle_expr()?,
        RasterExpr::Target => Some(cfg.target_expr()?),
    }
    .ok_or_else(|| Error::config("scenario has no such expression"))?;
    let grid = cfg.grid_spec()?;
    let [ip, iv] = cfg.slice_indices()?;
    let (psi, v) = (grid.axis(2).coord(ip), grid.axis(3).coord(iv));
    writeln!(out, "x,y,value")?;
    for i in 0..grid.axis(0).n {
        for j in 0..grid.axis(1).n {
            let (x, y) = (grid.axis(0).coord(i), grid.axis(1).coord(j));
            writeln!(out, "{x},{y},{}", expr.eval(&[x, y, psi, v], time))?;
        }
    }
    Ok(())
}

/// Value of the dynamics' CFL step for a configuration.
pub fn cfl_step(cfg: &ScenarioConfig) -> Result<f64> {
    let p = cfg.problem()?;
    crate::grid::cfl_timestep(&p.grid, &p.dynamics.sup_norms(&p.grid)?, p.cfl)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_loads() {
        for name in builtin_names() {
            let c = builtin_scenario(name).unwrap();
            assert_eq!(c.name, name);
        }
        let err = builtin_scenario("nope").unwrap_err().to_string();
        assert!(err.contains("scenario1") && err.contains("scenario4"));
    }

    #[test]
    fn catalog_values() {
        let s1 = builtin_scenario("scenario1").unwrap();
        assert_eq!(s1.vehicle.start, [-40.0, -1.5, 0.0, 35.0]);
        assert_eq!(s1.target[0].x_min, Some(0.0));
        assert_eq!((s1.target[0].y_min, s1.target[0].y_max), (Some(-3.5), Some(3.5)));
        assert_eq!((s1.grid.x.n, s1.grid.y.n, s1.grid.psi.n, s1.grid.v.n), (70, 8, 20, 6));

        let s2b = builtin_scenario("scenario2b").unwrap();
        match s2b.obstacles[1].motion {
            levelset::Motion::Linear { start, velocity } => {
                assert_eq!(start, [-10.0, 1.5]);
                assert_eq!(velocity, [20.0, 0.0]);
            }
            other => panic!("{other:?}"),
        }
        let s2a = builtin_scenario("scenario2a").unwrap();
        assert_eq!((s2a.grid.x.n, s2a.grid.y.n), (70, 12));
    }

    #[test]
    fn config_round_trip() {
        for name in builtin_names() {
            let c = builtin_scenario(name).unwrap();
            let again = ScenarioConfig::from_toml(&c.to_toml().unwrap()).unwrap();
            assert_eq!(c, again);
        }
    }

    #[test]
    fn overlapping_start_is_rejected() {
        let mut c = builtin_scenario("scenario1").unwrap();
        c.vehicle.start = [-10.5, -1.0, 0.2, 35.0];
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.vehicle.start = [100.0, 0.0, 0.0, 35.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn refinement_counts() {
        let c = builtin_scenario("scenario1").unwrap().refined(3);
        assert_eq!((c.grid.x.n, c.grid.y.n), (280, 32));
    }

    #[test]
    fn slice_indices_hit_nodes() {
        let c = builtin_scenario("scenario2a").unwrap();
        let [ip, iv] = c.slice_indices().unwrap();
        let g = c.grid_spec().unwrap();
        assert!(g.axis(2).coord(ip).abs() < 1e-12);
        assert!((g.axis(3).coord(iv) - 35.0).abs() < 1e-12);
    }
}
