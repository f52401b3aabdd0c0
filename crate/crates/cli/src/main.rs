use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hjreach::mintime::{MinimalTimeField, Termination};
use hjreach::scenario::{self, Overrides, RasterExpr, ScenarioConfig};
use hjreach::{Error, ScalarField};

#[derive(Parser)]
#[command(name = "hjreach", version, about = "Reachability-based trajectory planning on a grid")]
struct Cli {
    /// Worker threads for the solver sweeps (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the reachability problem and export fields.
    Solve {
        /// Built-in scenario name or path to a TOML file.
        config: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        cfl: Option<f64>,
        /// Comma-separated output times.
        #[arg(long, value_delimiter = ',')]
        snapshot_times: Option<Vec<f64>>,
    },
    /// Reconstruct and certify a trajectory.
    Reconstruct {
        config: String,
        /// Start state `x,y,psi,v`.
        #[arg(long, value_delimiter = ',', num_args = 4, allow_negative_numbers = true)]
        start: Option<Vec<f64>>,
        /// Minimal-time field from a previous `solve`; solved on the fly otherwise.
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        cfl: Option<f64>,
    },
    /// Grid-refinement study.
    Convergence {
        config: String,
        /// Levels as `a..b` (inclusive) or a comma list.
        #[arg(long, default_value = "1..3")]
        levels: String,
        #[arg(long, default_value_t = 4)]
        reference: u32,
        /// CSV output; the table is always printed.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        cfl: Option<f64>,
    },
    /// Sample a level set on the (x, y) nodes of the output slice.
    Raster {
        config: String,
        #[arg(long, default_value = "road")]
        expr: String,
        #[arg(long, default_value_t = 0.0)]
        time: f64,
        /// CSV output (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in scenarios.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    List,
    Show { name: String },
}

// Stdout writes propagate errors so a closed pipe ends the run quietly.
macro_rules! outln {
    ($($t:tt)*) => { writeln!(io::stdout().lock(), $($t)*)? };
}

macro_rules! out {
    ($($t:tt)*) => { write!(io::stdout().lock(), $($t)*)? };
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Cfl { .. } | Error::Index { .. } | Error::Format(_) => 2,
        Error::Infeasible(_) => 3,
        Error::Config(_) | Error::Argument(_) | Error::Io(_) => 1,
    }
}

fn load(spec: &str, overrides: Overrides) -> Result<ScenarioConfig, Error> {
    let mut cfg = scenario::resolve(spec)?;
    overrides.apply(&mut cfg)?;
    Ok(cfg)
}

fn parse_levels(s: &str) -> Result<Vec<u32>, Error> {
    let bad = || Error::Config(format!("cannot parse levels '{s}'"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| bad())?;
        let b: u32 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        Ok((a..=b).collect())
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Solve { config, out, cfl, snapshot_times } => {
            let cfg = load(&config, Overrides { cfl, snapshot_times, start: None })?;
            let report = scenario::run_solve(&cfg, &out)?;
            let m = &report.manifest;
            outln!(
                "{}: {} steps, dt = {:.4e}, {:.2} s on {} workers",
                m.scenario,
                m.steps,
                m.dt.first().copied().unwrap_or(0.0),
                m.solve_seconds,
                m.workers
            );
            let t0 = hjreach::mintime::time_to_go(&report.min_time, cfg.vehicle.start_state(), 0.0);
            outln!("minimal time at start: {t0}");
            outln!("wrote {} files to {}", m.files.len(), out.display());
        }
        Command::Reconstruct { config, start, field, out, cfl } => {
            let start = start.map(|s| [s[0], s[1], s[2], s[3]]);
            let cfg = load(&config, Overrides { cfl, snapshot_times: None, start })?;
            let field = match field {
                Some(p) => Some(MinimalTimeField::new(ScalarField::read_binary(BufReader::new(File::open(p)?))?)?),
                None => None,
            };
            let report = scenario::run_reconstruct(&cfg, field.as_ref(), Some(&out))?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let traj = &report.trajectory;
            let violated = traj.points.iter().filter(|p| p.certified.as_str() == "violated").count();
            outln!(
                "{:?} after {} steps ({:.3} s), {} uncertified points; dt_max = {:.5}",
                traj.termination,
                traj.steps(),
                traj.steps() as f64 * traj.h,
                violated,
                report.bound.dt_max
            );
            outln!("wrote {}", out.join("trajectory.csv").display());
            match traj.termination {
                Termination::TargetReached => {}
                Termination::Infeasible => return Err(Error::Infeasible("start state cannot reach the target".into())),
                Termination::MaxIterations => {
                    return Err(Error::Infeasible("step budget exhausted before reaching the target".into()))
                }
            }
        }
        Command::Convergence { config, levels, reference, out, cfl } => {
            let cfg = load(&config, Overrides { cfl, ..Overrides::default() })?;
            let levels = parse_levels(&levels)?;
            let table = scenario::run_convergence_with(&cfg, &levels, reference, |r| {
                eprintln!("level {} ({} x {}) done in {:.1} s", r.m, r.nx, r.ny, r.cpu_seconds);
            })?;
            out!("{}", table.to_text());
            if let Some(p) = out {
                table.write_csv(open_out(Some(&p))?)?;
            }
        }
        Command::Raster { config, expr, time, out } => {
            let cfg = load(&config, Overrides::default())?;
            let which: RasterExpr = expr.parse()?;
            let mut w = open_out(out.as_deref())?;
            scenario::rasterize_levelset(&cfg, which, time, &mut w)?;
            w.flush()?;
        }
        Command::Scenario { action } => match action {
            ScenarioAction::List => {
                for name in scenario::builtin_names() {
                    let cfg = scenario::builtin_scenario(name)?;
                    outln!("{name:<12} {}", cfg.description);
                }
            }
            ScenarioAction::Show { name } => out!("{}", scenario::builtin_source(&name)?),
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors share the config exit code; clap would use 2.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
