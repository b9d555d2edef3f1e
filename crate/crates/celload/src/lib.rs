//! Solvers for energy-minimal operation of interference-coupled cellular
//! downlinks.
//!
//! Cells in a downlink network are coupled: the fraction of time-frequency
//! resources a cell must spend to serve its users (its *load*) depends on the
//! interference it receives, which in turn depends on every other cell's load
//! and transmit power. This crate works with that coupling directly, in two
//! dual forms:
//!
//! - **load form** — for fixed power and rates, the load is the unique fixed
//!   point of the coupling map ([`load_solver`]), which exists exactly when
//!   the rates are *satisfiable*: the spectral radius of a gain-weighted rate
//!   coupling matrix stays below 1 ([`feasibility`]);
//! - **power form** — for a fixed target load, the required power is the
//!   unique fixed point of an implicit per-cell map with no closed form,
//!   computed by nested bisection sweeps ([`power_solver`]).
//!
//! On top of the two solvers, [`optimizer`] produces the minimum-sum-energy
//! operating point — serve exactly the minimum demands at full load, a
//! configuration that is optimal whenever it is implementable at all — plus
//! the uniform-power baseline and the demand/load sweep tables used in
//! experiments. [`scenario_io`] handles versioned scenario files and
//! deterministic synthetic scenario generation.
//!
//! All domain types are immutable values and all operations are pure
//! functions; anything here can run from multiple threads without
//! synchronization.

pub mod error;
pub mod feasibility;
pub mod load_solver;
pub mod model;
pub mod optimizer;
pub mod power_solver;
pub mod rng;
pub mod scenario_io;

pub use error::{Error, Result};
pub use feasibility::{
    build_lambda, is_satisfiable, spectral_radius, CouplingMatrix, SatisfiabilityReport,
};
pub use load_solver::{check_feasible_load, solve_load, SolveReport, Termination};
pub use model::{
    energy, load_map, sinr, EnergyReport, LoadVector, Network, PowerVector, RateVector,
};
pub use optimizer::{
    convergence_trace, minimize_energy, sample_load_region, sweep_demand, sweep_load,
    uniform_power_baseline, uniform_power_baseline_auto, BaselineResult, OptimizationResult,
    RegionSample, SweepRow, SweepScheme, SweepTable,
};
pub use power_solver::{eta, iap, iap_capped, solve_cell_power, EtaContext, IapMode, IapOptions};
pub use scenario_io::{
    generate_synthetic, load_scenario, read_scenario_file, save_scenario, Scenario, ScenarioFile,
    SolverDefaults, SyntheticSpec,
};
