//! Batch command-line surface over the coupling solvers.
//!
//! Every subcommand reads a scenario file (except `generate`, which writes
//! one), prints a human summary to stdout, and optionally writes a CSV with
//! `--out`. Output files are only written after the computation succeeds, so
//! a failing run leaves no partial files. Exit codes: 0 on success, 2 when
//! the instance is unsatisfiable or a target is not implementable, 1 for
//! input or solver-stall errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use celload::error::Error;
use celload::feasibility::is_satisfiable;
use celload::load_solver::{solve_load, Termination, LOAD_MAX_ITER, LOAD_TOL};
use celload::model::{energy, load_map, LoadVector, PowerVector};
use celload::optimizer::{
    convergence_trace, minimize_energy, sample_load_region, sweep_demand, sweep_load,
    uniform_power_baseline, SweepScheme, BASELINE_BETA_LO, BASELINE_BETA_MAX, BASELINE_BETA_TOL,
};
use celload::power_solver::{iap, IapMode, IapOptions};
use celload::scenario_io::{
    generate_synthetic, load_scenario, save_scenario, Scenario, SyntheticSpec,
};

#[derive(Parser)]
#[command(
    name = "celload",
    version,
    about = "Load- and power-coupling solvers for cellular downlink energy minimization",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report whether the scenario demands are satisfiable (coupling spectral radius below 1).
    Check(CheckCmd),
    /// Solve the load fixed point at a given power vector.
    SolveLoad(SolveLoadCmd),
    /// Solve the power fixed point for a target load.
    SolvePower(SolvePowerCmd),
    /// Compute the minimum-sum-energy operating point (full load, demands exactly met).
    Optimize(OptimizeCmd),
    /// Find the smallest feasible uniform power level by bisection.
    Baseline(BaselineCmd),
    /// Sweep a uniform per-user demand scale and record energy per row.
    SweepDemand(SweepDemandCmd),
    /// Sweep uniform target loads and record energy per row.
    SweepLoad(SweepLoadCmd),
    /// Record the per-iteration distance of the realized load to the target.
    Trace(TraceCmd),
    /// Sample random two-cell powers and their solved loads.
    Region(RegionCmd),
    /// Generate a deterministic synthetic grid scenario.
    Generate(GenerateCmd),
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario file path.
    #[arg(long, value_name = "PATH")]
    scenario: PathBuf,
}

#[derive(Args)]
struct OutArg {
    /// Write machine-readable CSV here (stdout keeps the human summary).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SolverFlags {
    /// Outer tolerance on the load residual infinity norm.
    #[arg(long, value_name = "TOL")]
    tol_outer: Option<f64>,
    /// Inner tolerance on |eta - 1| in the per-cell bisection.
    #[arg(long, value_name = "TOL")]
    tol_inner: Option<f64>,
    /// Sweep discipline of the power iteration.
    #[arg(long, value_enum)]
    mode: Option<ModeFlag>,
    /// Per-cell power caps in watts: one value for all cells or one per cell.
    #[arg(long, value_name = "W", value_delimiter = ',', num_args = 1..)]
    p_cap: Option<Vec<f64>>,
    /// Cap on outer power-iteration sweeps.
    #[arg(long, value_name = "N")]
    max_outer: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy)]
enum ModeFlag {
    Sync,
    Async,
}

#[derive(Args)]
struct CheckCmd {
    #[command(flatten)]
    scenario: ScenarioArg,
}

#[derive(Args)]
struct SolveLoadCmd {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[command(flatten)]
    out: OutArg,
    /// Per-cell power in watts: one value for all cells or one per cell
    /// (default 1 W everywhere).
    #[arg(long, value_name = "W", value_delimiter = ',', num_args = 1..)]
    power: Option<Vec<f64>>,
    /// Residual tolerance of the load solve.
    #[arg(long, value_name = "TOL")]
    tol_outer: Option<f64>,
}

#[derive(Args)]
struct SolvePowerCmd {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[command(flatten)]
    out: OutArg,
    #[command(flatten)]
    solver: SolverFlags,
    /// Target load: one value for all cells or one per cell (default 1).
    #[arg(long, value_name = "LIST", value_delimiter = ',', num_args = 1..)]
    phi: Option<Vec<f64>>,
}

#[derive(Args)]
struct OptimizeCmd {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[command(flatten)]
    out: OutArg,
    #[command(flatten)]
    solver: SolverFlags,
    /// Back the target load off full load to (1 - EPS) per cell.
    #[arg(long, value_name = "EPS", default_value_t = 0.0)]
    epsilon_prime: f64,
}

#[derive(Args)]
struct BaselineCmd {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[command(flatten)]
    out: OutArg,
    /// Bracket width tolerance on the uniform power level, in watts.
    #[arg(long, value_name = "TOL", default_value_t = BASELINE_BETA_TOL)]
    beta_tol: f64,
}

#[derive(Args)]
struct SweepDemandCmd {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[command(flatten)]
    out: OutArg,
    #[command(flatten)]
    solver: SolverFlags,
    /// Ascending per-user demand scales in nats.
    #[arg(long, value_name = "LIST", value_delimiter = ',', num_args = 1.., required = true)]
    xi: Vec<f64>,
    /// Operating scheme for each row.
    #[arg(long, value_enum, default_value_t = SchemeFlag::FullLoad)]
    scheme: SchemeFlag,
    /// Uniform load level for --scheme uniform-load.
    #[arg(long, value_name = "PHI")]
    phi: Option<f64>,
    /// Unit of the --xi values; bits are converted to nats on input.
    #[arg(long, value_enum, default_value = "nats")]
    rate_unit: RateUnit,
}

#[derive(ValueEnum, Clone, Copy)]
enum SchemeFlag {
    FullLoad,
    UniformLoad,
    UniformPower,
}

#[derive(ValueEnum, Clone, Copy)]
enum RateUnit {
    /// Values are already in nats.
    Nats,
    /// Values are in bits and get converted by ln 2.
    Bits,
}

impl RateUnit {
    fn to_nats(self, value: f64) -> f64 {
        match self {
            RateUnit::Nats => value,
            RateUnit::Bits => value * std::f64::consts::LN_2,
        }
    }
}

#[derive(Args)]
struct SweepLoadCmd {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[command(flatten)]
    out: OutArg,
    #[command(flatten)]
    solver: SolverFlags,
    /// Ascending uniform load levels in (0, 1].
    #[arg(long, value_name = "LIST", value_delimiter = ',', num_args = 1.., required = true)]
    phi: Vec<f64>,
}

#[derive(Args)]
struct TraceCmd {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[command(flatten)]
    out: OutArg,
    #[command(flatten)]
    solver: SolverFlags,
    /// Target load: one value for all cells or one per cell (default 1).
    #[arg(long, value_name = "LIST", value_delimiter = ',', num_args = 1..)]
    phi: Option<Vec<f64>>,
}

#[derive(Args)]
struct RegionCmd {
    #[command(flatten)]
    scenario: ScenarioArg,
    #[command(flatten)]
    out: OutArg,
    /// Number of power samples to draw.
    #[arg(long, value_name = "N", default_value_t = 1000)]
    samples: usize,
    /// Upper end of the per-cell power draw (0, P].
    #[arg(long, value_name = "W", default_value_t = 2.0)]
    p_max: f64,
    /// Generator seed; runs with the same seed are byte-identical.
    #[arg(long, value_name = "SEED", required = true)]
    seed: u64,
}

#[derive(Args)]
struct GenerateCmd {
    /// Where to write the generated scenario.
    #[arg(long, value_name = "PATH", required = true)]
    out: PathBuf,
    /// Number of cells on the square grid.
    #[arg(long, value_name = "N", required = true)]
    cells: usize,
    /// Users placed uniformly inside each cell square.
    #[arg(long, value_name = "N", required = true)]
    users_per_cell: usize,
    /// Cell grid spacing in meters.
    #[arg(long, value_name = "M", default_value_t = 50.0)]
    spacing: f64,
    /// Path-loss exponent.
    #[arg(long, value_name = "ALPHA", default_value_t = 3.7)]
    exponent: f64,
    /// Channel gain at 1 m (linear).
    #[arg(long, value_name = "G", default_value_t = 1.0)]
    ref_gain: f64,
    /// Noise power in watts per resource unit.
    #[arg(long, value_name = "W", default_value_t = 1e-9)]
    noise: f64,
    /// Uniform per-user demand, in --rate-unit units.
    #[arg(long, value_name = "RATE", default_value_t = 0.05)]
    demand: f64,
    /// Unit of --demand; bits are converted to nats on input.
    #[arg(long, value_enum, default_value = "nats")]
    rate_unit: RateUnit,
    /// Generator seed; runs with the same seed are byte-identical.
    #[arg(long, value_name = "SEED", required = true)]
    seed: u64,
}

fn main() -> ExitCode {
    // Die quietly on a closed pipe (`celload ... | head`) instead of
    // panicking mid-print, like any other stream-producing tool.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// Infeasibility of the instance is exit 2; everything else is an input or
/// solver error, exit 1.
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Unsatisfiable { .. }
        | Error::FullLoadNotImplementable
        | Error::NoFeasibleBeta { .. }
        | Error::PowerDiverged { .. } => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Check(cmd) => check(cmd),
        Command::SolveLoad(cmd) => solve_load_cmd(cmd),
        Command::SolvePower(cmd) => solve_power_cmd(cmd),
        Command::Optimize(cmd) => optimize_cmd(cmd),
        Command::Baseline(cmd) => baseline_cmd(cmd),
        Command::SweepDemand(cmd) => sweep_demand_cmd(cmd),
        Command::SweepLoad(cmd) => sweep_load_cmd(cmd),
        Command::Trace(cmd) => trace_cmd(cmd),
        Command::Region(cmd) => region_cmd(cmd),
        Command::Generate(cmd) => generate_cmd(cmd),
    }
}

/// Solver options resolved in layers: crate defaults, then the scenario's
/// solver block, then explicit flags.
fn resolve_opts(
    scenario: &Scenario,
    flags: &SolverFlags,
    use_scenario_caps: bool,
) -> Result<IapOptions, Error> {
    let mut opts = IapOptions::default();
    let defaults = &scenario.solver;
    if let Some(v) = defaults.outer_tol {
        opts.outer_tol = v;
    }
    if let Some(v) = defaults.inner_tol {
        opts.inner_tol = v;
    }
    if let Some(v) = defaults.max_outer {
        opts.max_outer = v;
    }
    if let Some(v) = defaults.divergence_power {
        opts.divergence_power = v;
    }
    if let Some(v) = defaults.mode {
        opts.mode = v;
    }
    if use_scenario_caps {
        opts.p_cap = scenario.power_cap.clone();
    }
    if let Some(v) = flags.tol_outer {
        opts.outer_tol = v;
    }
    if let Some(v) = flags.tol_inner {
        opts.inner_tol = v;
    }
    if let Some(v) = flags.max_outer {
        opts.max_outer = v;
    }
    if let Some(mode) = flags.mode {
        opts.mode = match mode {
            ModeFlag::Sync => IapMode::Synchronous,
            ModeFlag::Async => IapMode::Asynchronous,
        };
    }
    if let Some(caps) = &flags.p_cap {
        opts.p_cap = Some(broadcast("p_cap", caps, scenario.network.cells())?);
    }
    Ok(opts)
}

/// Expands a one-element list to `n` entries; anything else must already
/// have length `n`.
fn broadcast(what: &'static str, values: &[f64], n: usize) -> Result<Vec<f64>, Error> {
    if values.len() == 1 {
        Ok(vec![values[0]; n])
    } else if values.len() == n {
        Ok(values.to_vec())
    } else {
        Err(Error::LengthMismatch {
            what,
            expected: n,
            found: values.len(),
        })
    }
}

fn write_out(path: &Path, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check(cmd: CheckCmd) -> Result<u8, Error> {
    let scenario = load_scenario(&cmd.scenario.scenario)?;
    let rep = is_satisfiable(&scenario.network, &scenario.demands)?;
    println!("rho = {}", rep.rho);
    println!("power iterations = {}", rep.iterations);
    if rep.satisfiable {
        println!("verdict: satisfiable (spectral radius below 1)");
        Ok(0)
    } else {
        println!("verdict: unsatisfiable (spectral radius not below 1; no positive load exists for any power)");
        Ok(2)
    }
}

fn solve_load_cmd(cmd: SolveLoadCmd) -> Result<u8, Error> {
    let scenario = load_scenario(&cmd.scenario.scenario)?;
    let n = scenario.network.cells();
    let power = match &cmd.power {
        Some(values) => PowerVector::new(broadcast("power", values, n)?)?,
        None => PowerVector::ones(n),
    };
    let tol = cmd
        .tol_outer
        .or(scenario.solver.load_tol)
        .unwrap_or(LOAD_TOL);
    let (x, rep) = solve_load(
        &scenario.network,
        &power,
        &scenario.demands,
        None,
        tol,
        LOAD_MAX_ITER,
    )?;
    if rep.termination == Termination::MaxIter {
        return Err(Error::SolverStalled {
            iterations: rep.iterations,
            residual: rep.final_residual(),
        });
    }
    let feasible = celload::check_feasible_load(&x);
    println!(
        "load solve: {} iterations, final residual {}",
        rep.iterations,
        rep.final_residual()
    );
    println!(
        "feasible (0 < x <= 1): {}",
        if feasible { "yes" } else { "no" }
    );
    for (i, v) in x.as_slice().iter().enumerate() {
        println!("cell {i}: load {v}");
    }
    if let Some(out) = &cmd.out.out {
        let mut csv = String::from("cell,load\n");
        for (i, v) in x.as_slice().iter().enumerate() {
            csv.push_str(&format!("{i},{v}\n"));
        }
        write_out(out, &csv)?;
    }
    Ok(0)
}

fn target_from_phi(phi: &Option<Vec<f64>>, n: usize) -> Result<LoadVector, Error> {
    match phi {
        Some(values) => LoadVector::new(broadcast("phi", values, n)?),
        None => Ok(LoadVector::ones(n)),
    }
}

fn solve_power_cmd(cmd: SolvePowerCmd) -> Result<u8, Error> {
    let scenario = load_scenario(&cmd.scenario.scenario)?;
    let n = scenario.network.cells();
    let opts = resolve_opts(&scenario, &cmd.solver, true)?;
    let target = target_from_phi(&cmd.phi, n)?;
    let (p, rep) = iap(&scenario.network, &target, &scenario.demands, &opts)?;
    match rep.termination {
        Termination::Converged => {}
        Termination::InfeasibleDetected => {
            eprintln!(
                "target load is not implementable: power diverged after {} sweeps",
                rep.iterations
            );
            return Ok(2);
        }
        Termination::MaxIter => {
            return Err(Error::SolverStalled {
                iterations: rep.iterations,
                residual: rep.final_residual(),
            });
        }
    }
    let realized = load_map(&scenario.network, &target, &p, &scenario.demands)?;
    let report = energy(&realized, &p, None)?;
    println!(
        "power solve: {} sweeps, final load residual {}",
        rep.iterations,
        rep.final_residual()
    );
    if !rep.pinned_cells.is_empty() {
        println!("cells pinned at their power cap: {:?}", rep.pinned_cells);
    }
    println!("total energy = {}", report.total);
    for i in 0..n {
        println!(
            "cell {i}: power {} W, realized load {}",
            p.get(i),
            realized.get(i)
        );
    }
    if let Some(out) = &cmd.out.out {
        let mut csv = String::from("cell,power,load\n");
        for i in 0..n {
            csv.push_str(&format!("{i},{},{}\n", p.get(i), realized.get(i)));
        }
        write_out(out, &csv)?;
    }
    Ok(0)
}

fn optimize_cmd(cmd: OptimizeCmd) -> Result<u8, Error> {
    let scenario = load_scenario(&cmd.scenario.scenario)?;
    let opts = resolve_opts(&scenario, &cmd.solver, false)?;
    let res = minimize_energy(
        &scenario.network,
        &scenario.demands,
        &opts,
        cmd.epsilon_prime,
    )?;
    println!(
        "optimum: total energy = {} over {} cells ({} sweeps)",
        res.energy.total,
        scenario.network.cells(),
        res.report.iterations
    );
    for (i, (p, x)) in res
        .p_star
        .as_slice()
        .iter()
        .zip(res.x_star.as_slice())
        .enumerate()
    {
        println!("cell {i}: power {p} W, load {x}");
    }
    if let Some(out) = &cmd.out.out {
        let mut csv = String::from("cell,power,load,energy\n");
        for i in 0..scenario.network.cells() {
            csv.push_str(&format!(
                "{i},{},{},{}\n",
                res.p_star.get(i),
                res.x_star.get(i),
                res.energy.per_cell[i]
            ));
        }
        write_out(out, &csv)?;
    }
    Ok(0)
}

fn baseline_cmd(cmd: BaselineCmd) -> Result<u8, Error> {
    let scenario = load_scenario(&cmd.scenario.scenario)?;
    // Documented automatic bracket, inlined so the summary can report it.
    let mut hi = 1.0;
    loop {
        let p = PowerVector::uniform(scenario.network.cells(), hi)?;
        let solved = solve_load(
            &scenario.network,
            &p,
            &scenario.demands,
            None,
            LOAD_TOL,
            LOAD_MAX_ITER,
        )?;
        if solved.1.converged() && celload::check_feasible_load(&solved.0) {
            break;
        }
        hi *= 2.0;
        if hi > BASELINE_BETA_MAX {
            return Err(Error::NoFeasibleBeta {
                beta_lo: BASELINE_BETA_LO,
                beta_hi: BASELINE_BETA_MAX,
            });
        }
    }
    let res = uniform_power_baseline(
        &scenario.network,
        &scenario.demands,
        BASELINE_BETA_LO,
        hi,
        cmd.beta_tol,
    )?;
    println!(
        "uniform-power baseline: beta = {} W ({} bisection steps)",
        res.beta, res.iterations
    );
    println!("total energy = {}", res.energy.total);
    for (i, x) in res.load.as_slice().iter().enumerate() {
        println!("cell {i}: load {x}");
    }
    if let Some(out) = &cmd.out.out {
        let mut csv = String::from("cell,power,load\n");
        for (i, x) in res.load.as_slice().iter().enumerate() {
            csv.push_str(&format!("{i},{},{x}\n", res.beta));
        }
        write_out(out, &csv)?;
    }
    Ok(0)
}

fn sweep_demand_cmd(cmd: SweepDemandCmd) -> Result<u8, Error> {
    let scenario = load_scenario(&cmd.scenario.scenario)?;
    let opts = resolve_opts(&scenario, &cmd.solver, false)?;
    let scheme = match cmd.scheme {
        SchemeFlag::FullLoad => SweepScheme::FullLoad,
        SchemeFlag::UniformLoad => {
            let phi = cmd.phi.ok_or(Error::InvalidParameter {
                what: "phi",
                value: f64::NAN,
                requirement: "--scheme uniform-load requires --phi",
            })?;
            SweepScheme::UniformLoad(phi)
        }
        SchemeFlag::UniformPower => SweepScheme::UniformPower,
    };
    let xi_nats: Vec<f64> = cmd.xi.iter().map(|&v| cmd.rate_unit.to_nats(v)).collect();
    let table = sweep_demand(&scenario.network, &xi_nats, scheme, &opts)?;
    emit_table(&table.to_csv(), cmd.out.out.as_deref())
}

fn sweep_load_cmd(cmd: SweepLoadCmd) -> Result<u8, Error> {
    let scenario = load_scenario(&cmd.scenario.scenario)?;
    let opts = resolve_opts(&scenario, &cmd.solver, false)?;
    let table = sweep_load(&scenario.network, &scenario.demands, &cmd.phi, &opts)?;
    emit_table(&table.to_csv(), cmd.out.out.as_deref())
}

fn emit_table(csv: &str, out: Option<&Path>) -> Result<u8, Error> {
    match out {
        Some(path) => write_out(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(0)
}

fn trace_cmd(cmd: TraceCmd) -> Result<u8, Error> {
    let scenario = load_scenario(&cmd.scenario.scenario)?;
    let n = scenario.network.cells();
    let opts = resolve_opts(&scenario, &cmd.solver, false)?;
    let target = target_from_phi(&cmd.phi, n)?;
    let (trace, rep) = convergence_trace(&scenario.network, &scenario.demands, &target, &opts)?;
    let mut csv = String::from("iteration,distance\n");
    for (iter, dist) in &trace {
        csv.push_str(&format!("{iter},{dist}\n"));
    }
    match rep.termination {
        Termination::Converged => {
            println!(
                "converged after {} sweeps, final residual {}",
                rep.iterations,
                rep.final_residual()
            );
        }
        Termination::InfeasibleDetected => {
            eprintln!(
                "target load is not implementable: power diverged after {} sweeps",
                rep.iterations
            );
            return Ok(2);
        }
        Termination::MaxIter => {
            return Err(Error::SolverStalled {
                iterations: rep.iterations,
                residual: rep.final_residual(),
            });
        }
    }
    if let Some(out) = &cmd.out.out {
        write_out(out, &csv)?;
    } else {
        print!("{csv}");
    }
    Ok(0)
}

fn region_cmd(cmd: RegionCmd) -> Result<u8, Error> {
    let scenario = load_scenario(&cmd.scenario.scenario)?;
    let samples = sample_load_region(
        &scenario.network,
        &scenario.demands,
        cmd.samples,
        cmd.p_max,
        cmd.seed,
    )?;
    let mut csv = String::from("p1,p2,x1,x2\n");
    for s in &samples {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            s.power[0], s.power[1], s.load[0], s.load[1]
        ));
    }
    match cmd.out.out.as_deref() {
        Some(path) => write_out(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(0)
}

fn generate_cmd(cmd: GenerateCmd) -> Result<u8, Error> {
    let spec = SyntheticSpec {
        cells: cmd.cells,
        users_per_cell: cmd.users_per_cell,
        spacing_m: cmd.spacing,
        pathloss_exponent: cmd.exponent,
        reference_gain: cmd.ref_gain,
        noise_power: cmd.noise,
        demand_nats: cmd.rate_unit.to_nats(cmd.demand),
        rng_seed: cmd.seed,
    };
    let file = generate_synthetic(&spec)?;
    save_scenario(&cmd.out, &file)?;
    println!(
        "wrote {} ({} cells, {} users)",
        cmd.out.display(),
        file.cells,
        file.demands.len()
    );
    Ok(0)
}
