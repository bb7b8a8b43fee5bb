use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rismvqe::driver::{run_scf, susceptibility_for, DriverOptions};
use rismvqe::model::{load_config, ActiveSpaceSpec, ElectronicSolver, RunConfig};
use rismvqe::norm::{norm_report, report_csv, report_table};
use rismvqe::rism3d::Cube;
use rismvqe::scan::{run_scan, ScanSpec};
use rismvqe::solvent::{solve_1d_rism, RadialGrid, Rism1dOptions, SolventSusceptibility};
use rismvqe::Error;

/// Thread count follows RAYON_NUM_THREADS; log level follows RUST_LOG.
#[derive(Parser)]
#[command(name = "rismvqe", version, about = "3D-RISM solvation coupled to a VQE solute")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Self-consistent solvated run.
    Scf(ScfArgs),
    /// Macro-loop along an interatomic distance.
    Scan(ScanArgs),
    /// L1 norms of the qubit Hamiltonian in gas and solution.
    NormReport(NormArgs),
    /// Solve the neat solvent and write its susceptibility table.
    Chi(ChiArgs),
    /// Validate a configuration and print it normalised.
    Check {
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverKind {
    Rhf,
    Vqe,
    Exact,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    config: PathBuf,
    /// Electronic solver; defaults to the configuration.
    #[arg(long, value_enum)]
    solver: Option<SolverKind>,
    /// Active space as ELECTRONS,ORBITALS for vqe/exact.
    #[arg(long, value_parser = parse_pair)]
    active: Option<(usize, usize)>,
    /// Gas phase only: no RISM, dmu = 0.
    #[arg(long)]
    gas: bool,
    /// Precomputed susceptibility table.
    #[arg(long)]
    chi: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ScfArgs {
    #[command(flatten)]
    common: Common,
    /// Also write solvent distribution cubes (g_<site>.cube).
    #[arg(long)]
    cube: bool,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    common: Common,
    /// Atoms to separate, 1-based, as I,J.
    #[arg(long, value_parser = parse_pair)]
    pair: (usize, usize),
    /// First distance, angstrom.
    #[arg(long)]
    start: f64,
    /// Last distance (inclusive), angstrom.
    #[arg(long)]
    stop: f64,
    /// Step, angstrom.
    #[arg(long)]
    step: f64,
    /// Start every point from scratch, running points in parallel.
    #[arg(long)]
    cold: bool,
}

#[derive(Args)]
struct NormArgs {
    #[command(flatten)]
    common: Common,
    /// Active spaces as E,O entries.
    #[arg(long, value_parser = parse_pair, num_args = 1.., required = true)]
    spaces: Vec<(usize, usize)>,
}

#[derive(Args)]
struct ChiArgs {
    config: PathBuf,
    /// Table to write.
    #[arg(long)]
    out: PathBuf,
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected A,B, got '{s}'"))?;
    let p = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("'{x}': {e}"));
    Ok((p(a)?, p(b)?))
}

enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

fn write(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))
}

/// Configuration with command-line overrides applied.
fn prepare(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = load_config(&c.config)?;
    if let Some(p) = &c.chi {
        cfg.susceptibility = Some(p.clone());
    }
    let current = cfg.solver.active_space().cloned();
    let space = match c.active {
        Some((e, o)) => Some(ActiveSpaceSpec::new(e, o)),
        None => current,
    };
    let kind = c.solver.unwrap_or(match cfg.solver {
        ElectronicSolver::Rhf => SolverKind::Rhf,
        ElectronicSolver::Vqe(_) => SolverKind::Vqe,
        ElectronicSolver::Exact(_) => SolverKind::Exact,
    });
    let need = || Failure::Input("an active space is required: set [solver] electrons/orbitals or pass --active".into());
    cfg.solver = match kind {
        SolverKind::Rhf => ElectronicSolver::Rhf,
        SolverKind::Vqe => ElectronicSolver::Vqe(space.ok_or_else(need)?),
        SolverKind::Exact => ElectronicSolver::Exact(space.ok_or_else(need)?),
    };
    if let Some(s) = cfg.solver.active_space() {
        s.check(cfg.n_electrons(), cfg.n_basis)?;
    }
    for w in cfg.warnings() {
        log::warn!("{w}");
    }
    Ok(cfg)
}

fn solvent_table(cfg: &RunConfig, gas: bool) -> Result<Option<SolventSusceptibility>, Failure> {
    if gas {
        return Ok(None);
    }
    Ok(Some(susceptibility_for(cfg)?))
}

fn options(c: &Common) -> DriverOptions {
    DriverOptions {
        gas: c.gas,
        ..DriverOptions::default()
    }
}

fn cmd_scf(a: &ScfArgs) -> Outcome {
    let cfg = prepare(&a.common)?;
    let chi = solvent_table(&cfg, a.common.gas)?;
    let out = run_scf(&cfg, chi.as_ref(), &options(&a.common))?;
    let dir = &a.common.out;
    create_dir(dir)?;
    write(&dir.join("run.toml"), &cfg.to_toml_string())?;
    write(&dir.join("cycles.csv"), &out.csv())?;
    write(&dir.join("summary.txt"), &out.summary())?;
    if let Some(r) = &out.rism {
        write(&dir.join("rism.csv"), &r.log_csv())?;
        if a.cube {
            let grid = out.grid.as_ref().expect("solvated runs keep their grid");
            for f in &r.fields {
                let cube = Cube::from_grid(&format!("g_{} {}", f.label, cfg.title), &f.g, grid, &cfg.atoms)?;
                cube.write(&dir.join(format!("g_{}.cube", f.label)))?;
            }
        }
    }
    print!("{}", out.summary());
    Ok(())
}

fn cmd_scan(a: &ScanArgs) -> Outcome {
    let cfg = prepare(&a.common)?;
    let (i, j) = a.pair;
    if i == 0 || j == 0 {
        return Err(Failure::Input("--pair uses 1-based atom numbers".into()));
    }
    let spec = ScanSpec {
        pair: (i - 1, j - 1),
        start: a.start,
        stop: a.stop,
        step: a.step,
    };
    spec.validate(cfg.atoms.len())?;
    let chi = solvent_table(&cfg, a.common.gas)?;
    let res = run_scan(&cfg, &spec, chi.as_ref(), &options(&a.common), !a.cold)?;
    create_dir(&a.common.out)?;
    write(&a.common.out.join("scan.csv"), &res.csv())?;
    print!("{}", res.csv());
    match res.n_failed() {
        0 => Ok(()),
        n => Err(Failure::Numerical(format!("{n} of {} scan points failed", res.points.len()))),
    }
}

fn cmd_norm(a: &NormArgs) -> Outcome {
    let cfg = prepare(&a.common)?;
    for &(e, o) in &a.spaces {
        ActiveSpaceSpec::new(e, o).check(cfg.n_electrons(), cfg.n_basis)?;
    }
    let chi = solvent_table(&cfg, a.common.gas)?;
    let rows = norm_report(&cfg, &a.spaces, chi.as_ref(), &options(&a.common))?;
    create_dir(&a.common.out)?;
    write(&a.common.out.join("norms.csv"), &report_csv(&rows))?;
    print!("{}", report_table(&rows));
    Ok(())
}

fn cmd_chi(a: &ChiArgs) -> Outcome {
    let cfg = load_config(&a.config)?;
    let sol = solve_1d_rism(&cfg.solvent, &RadialGrid::default_water(), &Rism1dOptions::default())?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    sol.susceptibility.save(&a.out)?;
    println!(
        "{}: {} sites, {} radial points, final residual {:.2e}",
        a.out.display(),
        sol.susceptibility.n_sites(),
        sol.grid.n(),
        sol.residual_history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Scf(a) => cmd_scf(a),
        Command::Scan(a) => cmd_scan(a),
        Command::NormReport(a) => cmd_norm(a),
        Command::Chi(a) => cmd_chi(a),
        Command::Check { config } => load_config(config).map_err(Failure::from).map(|cfg| {
            for w in cfg.warnings() {
                eprintln!("warning: {w}");
            }
            print!("{}", cfg.to_toml_string());
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
