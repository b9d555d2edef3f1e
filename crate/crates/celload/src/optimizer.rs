//! Minimum-energy operating point, uniform-power baseline, and experiment
//! sweeps.
//!
//! Serving exactly the minimum demands at full load minimizes the sum
//! transmission energy whenever full load is implementable; when it is not,
//! no load in `(0, 1]` is, and the demands admit no feasible operating point
//! at all. [`minimize_energy`] therefore pins the rates to the demands, asks
//! the power solver for the full-load power, and reports the corresponding
//! energy. The uniform-power baseline is the conventional comparison scheme:
//! one shared power level, bisected down to the smallest value that keeps
//! every load at or below 1.

use crate::error::{Error, Result};
use crate::feasibility::is_satisfiable;
use crate::load_solver::{solve_load_unchecked, SolveReport, Termination, LOAD_MAX_ITER, LOAD_TOL};
use crate::model::{energy, EnergyReport, LoadVector, Network, PowerVector, RateVector};
use crate::power_solver::{iap_engine, IapOptions};
use crate::rng::SplitMix64;

/// Smallest uniform power considered by the auto-bracketing baseline.
pub const BASELINE_BETA_LO: f64 = 1e-6;
/// Largest uniform power tried while expanding the baseline bracket.
pub const BASELINE_BETA_MAX: f64 = 1e6;
/// Default bracket-width tolerance for the baseline bisection, in watts.
pub const BASELINE_BETA_TOL: f64 = 1e-9;

/// Minimum-sum-energy operating point.
#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub p_star: PowerVector,
    /// Target load at the optimum: all ones (scaled by `1 - epsilon_prime`).
    pub x_star: LoadVector,
    /// Optimal rates: exactly the minimum demands.
    pub r_star: RateVector,
    pub energy: EnergyReport,
    pub report: SolveReport,
}

/// Outcome of the uniform-power baseline search.
#[derive(Debug, Clone)]
pub struct BaselineResult {
    /// Smallest uniform power level (to bracket tolerance) with feasible load.
    pub beta: f64,
    pub power: PowerVector,
    pub load: LoadVector,
    pub energy: EnergyReport,
    /// Bisection steps spent narrowing the bracket.
    pub iterations: usize,
}

/// One sampled operating point of the two-cell region experiment.
#[derive(Debug, Clone)]
pub struct RegionSample {
    pub power: Vec<f64>,
    pub load: Vec<f64>,
}

/// Scheme selector for demand sweeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepScheme {
    /// Full load with power from the coupling solver.
    FullLoad,
    /// Uniform load `phi * 1` with power from the coupling solver.
    UniformLoad(f64),
    /// Uniform power from the baseline bisection.
    UniformPower,
}

/// One sweep row: parameter value, energy if feasible, solver iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: f64,
    pub total_energy: Option<f64>,
    pub feasible: bool,
    pub iterations: usize,
}

/// Ordered sweep results; serializes to the CSV schema
/// `param,total_energy,feasible,iterations`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    /// Name of the swept parameter ("xi" for demand scale, "phi" for load
    /// scale).
    pub parameter: &'static str,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// CSV rendering: header row, one newline-terminated row per entry,
    /// empty energy field on infeasible rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,total_energy,feasible,iterations\n");
        for row in &self.rows {
            let energy = row.total_energy.map(|e| format!("{e}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.param, energy, row.feasible, row.iterations
            ));
        }
        out
    }
}

/// Computes the minimum-sum-energy operating point: rates pinned to
/// `d_min`, load pinned to `(1 - epsilon_prime) * 1`, power from the
/// iterative power algorithm.
///
/// `epsilon_prime` (default 0) backs the target off full load for
/// deployments that must keep the load strictly below 1. Unsatisfiable
/// demands and unimplementable full load are both reported as errors — the
/// latter implies the problem has no feasible solution at any load.
pub fn minimize_energy(
    net: &Network,
    d_min: &RateVector,
    opts: &IapOptions,
    epsilon_prime: f64,
) -> Result<OptimizationResult> {
    if !(0.0..1.0).contains(&epsilon_prime) {
        return Err(Error::InvalidParameter {
            what: "epsilon_prime",
            value: epsilon_prime,
            requirement: "must lie in [0, 1)",
        });
    }
    if !d_min.is_strictly_positive() {
        return Err(Error::InvalidParameter {
            what: "d_min",
            value: 0.0,
            requirement: "every demand must be strictly positive",
        });
    }
    let sat = is_satisfiable(net, d_min)?;
    if !sat.satisfiable {
        return Err(Error::Unsatisfiable { rho: sat.rho });
    }
    let x_star = LoadVector::uniform(net.cells(), 1.0 - epsilon_prime)?;
    let run = iap_engine(net, &x_star, d_min, opts)?;
    match run.report.termination {
        Termination::Converged => {}
        Termination::InfeasibleDetected => return Err(Error::FullLoadNotImplementable),
        Termination::MaxIter => {
            return Err(Error::SolverStalled {
                iterations: run.report.iterations,
                residual: run.report.final_residual(),
            })
        }
    }
    let energy = energy(&x_star, &run.power, None)?;
    Ok(OptimizationResult {
        p_star: run.power,
        x_star,
        r_star: d_min.clone(),
        energy,
        report: run.report,
    })
}

/// Finds the smallest uniform power `beta` whose solved load is feasible
/// (`0 < x <= 1`), by bisection on `[beta_lo, beta_hi]`.
///
/// Requires a feasible upper end; the lower end is expected infeasible (or
/// effectively zero). The returned `beta` is the feasible end of the final
/// bracket, so its load is feasible as reported.
pub fn uniform_power_baseline(
    net: &Network,
    d_min: &RateVector,
    beta_lo: f64,
    beta_hi: f64,
    tol: f64,
) -> Result<BaselineResult> {
    if !beta_lo.is_finite() || beta_lo <= 0.0 || !beta_hi.is_finite() || beta_hi <= beta_lo {
        return Err(Error::InvalidParameter {
            what: "beta bracket",
            value: beta_lo,
            requirement: "must satisfy 0 < beta_lo < beta_hi",
        });
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidParameter {
            what: "beta tolerance",
            value: tol,
            requirement: "must be strictly positive",
        });
    }
    let sat = is_satisfiable(net, d_min)?;
    if !sat.satisfiable {
        return Err(Error::Unsatisfiable { rho: sat.rho });
    }

    let n = net.cells();
    let solve_at = |beta: f64| -> Result<(LoadVector, bool)> {
        let p = PowerVector::uniform(n, beta)?;
        let (x, rep) = solve_load_unchecked(net, &p, d_min, None, LOAD_TOL, LOAD_MAX_ITER)?;
        let ok = rep.converged() && crate::load_solver::check_feasible_load(&x);
        Ok((x, ok))
    };

    let (x_hi, hi_ok) = solve_at(beta_hi)?;
    if !hi_ok {
        return Err(Error::NoFeasibleBeta { beta_lo, beta_hi });
    }
    let (x_lo, lo_ok) = solve_at(beta_lo)?;
    if lo_ok {
        // Degenerate bracket: the low end is already feasible, so it is the
        // minimum within the given range.
        let power = PowerVector::uniform(n, beta_lo)?;
        let energy = energy(&x_lo, &power, None)?;
        return Ok(BaselineResult {
            beta: beta_lo,
            power,
            load: x_lo,
            energy,
            iterations: 0,
        });
    }

    let mut lo = beta_lo;
    let mut hi = beta_hi;
    let mut x_at_hi = x_hi;
    let mut steps = 0usize;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let (x_mid, mid_ok) = solve_at(mid)?;
        if mid_ok {
            hi = mid;
            x_at_hi = x_mid;
        } else {
            lo = mid;
        }
        steps += 1;
        if steps > 200 {
            break;
        }
    }
    let power = PowerVector::uniform(n, hi)?;
    let energy = energy(&x_at_hi, &power, None)?;
    Ok(BaselineResult {
        beta: hi,
        power,
        load: x_at_hi,
        energy,
        iterations: steps,
    })
}

/// [`uniform_power_baseline`] with the documented automatic bracket: low end
/// [`BASELINE_BETA_LO`], high end doubling from 1 W until feasible or
/// [`BASELINE_BETA_MAX`].
pub fn uniform_power_baseline_auto(
    net: &Network,
    d_min: &RateVector,
    tol: f64,
) -> Result<BaselineResult> {
    let sat = is_satisfiable(net, d_min)?;
    if !sat.satisfiable {
        return Err(Error::Unsatisfiable { rho: sat.rho });
    }
    let n = net.cells();
    let mut hi = 1.0;
    loop {
        let p = PowerVector::uniform(n, hi)?;
        let (x, rep) = solve_load_unchecked(net, &p, d_min, None, LOAD_TOL, LOAD_MAX_ITER)?;
        if rep.converged() && crate::load_solver::check_feasible_load(&x) {
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
    uniform_power_baseline(net, d_min, BASELINE_BETA_LO, hi, tol)
}

/// Sweeps a uniform per-user demand scale `xi` under the chosen scheme.
///
/// Each row is independent: unsatisfiable demands (coupling radius at or
/// above 1) and unimplementable targets mark the row infeasible without
/// aborting the table.
pub fn sweep_demand(
    net: &Network,
    xi_values: &[f64],
    scheme: SweepScheme,
    opts: &IapOptions,
) -> Result<SweepTable> {
    check_ascending_positive("xi", xi_values)?;
    if let SweepScheme::UniformLoad(phi) = scheme {
        if phi.is_nan() || phi <= 0.0 || phi > 1.0 {
            return Err(Error::InvalidParameter {
                what: "phi",
                value: phi,
                requirement: "must lie in (0, 1]",
            });
        }
    }
    let mut rows = Vec::with_capacity(xi_values.len());
    for &xi in xi_values {
        let r = RateVector::uniform(net.num_users(), xi)?;
        let sat = is_satisfiable(net, &r)?;
        if !sat.satisfiable {
            rows.push(SweepRow {
                param: xi,
                total_energy: None,
                feasible: false,
                iterations: 0,
            });
            continue;
        }
        let row = match scheme {
            SweepScheme::FullLoad => solver_row(net, xi, 1.0, &r, opts),
            SweepScheme::UniformLoad(phi) => solver_row(net, xi, phi, &r, opts),
            SweepScheme::UniformPower => baseline_row(net, xi, &r),
        };
        rows.push(row);
    }
    Ok(SweepTable {
        parameter: "xi",
        rows,
    })
}

/// Sweeps uniform target loads `phi * 1` for fixed demands.
///
/// Small `phi` rows come out infeasible — loads cannot be made arbitrarily
/// small by any power — while energy falls monotonically toward `phi = 1`.
pub fn sweep_load(
    net: &Network,
    d_min: &RateVector,
    phi_values: &[f64],
    opts: &IapOptions,
) -> Result<SweepTable> {
    check_ascending_positive("phi", phi_values)?;
    if let Some(&last) = phi_values.last() {
        if last > 1.0 {
            return Err(Error::InvalidParameter {
                what: "phi",
                value: last,
                requirement: "must lie in (0, 1]",
            });
        }
    }
    let sat = is_satisfiable(net, d_min)?;
    if !sat.satisfiable {
        return Err(Error::Unsatisfiable { rho: sat.rho });
    }
    let mut rows = Vec::with_capacity(phi_values.len());
    for &phi in phi_values {
        rows.push(solver_row(net, phi, phi, d_min, opts));
    }
    Ok(SweepTable {
        parameter: "phi",
        rows,
    })
}

/// Records the Euclidean distance between the realized load and the target
/// after every outer power iteration, ending when the infinity norm meets
/// the outer tolerance.
pub fn convergence_trace(
    net: &Network,
    d_min: &RateVector,
    x_target: &LoadVector,
    opts: &IapOptions,
) -> Result<(Vec<(usize, f64)>, SolveReport)> {
    let run = iap_engine(net, x_target, d_min, opts)?;
    let trace = run.l2_trace.into_iter().enumerate().collect();
    Ok((trace, run.report))
}

/// Draws power vectors uniformly from `(0, p_max]^2` with the seeded
/// generator and pairs each with its solved load — the two-cell region
/// experiment. Deterministic for a fixed seed.
pub fn sample_load_region(
    net: &Network,
    r: &RateVector,
    num_samples: usize,
    p_max: f64,
    seed: u64,
) -> Result<Vec<RegionSample>> {
    if net.cells() != 2 {
        return Err(Error::InvalidParameter {
            what: "cells",
            value: net.cells() as f64,
            requirement: "region sampling is defined for two-cell networks",
        });
    }
    if !p_max.is_finite() || p_max <= 0.0 {
        return Err(Error::InvalidParameter {
            what: "p_max",
            value: p_max,
            requirement: "must be finite and strictly positive",
        });
    }
    let sat = is_satisfiable(net, r)?;
    if !sat.satisfiable {
        return Err(Error::Unsatisfiable { rho: sat.rho });
    }
    let mut rng = SplitMix64::new(seed);
    let mut samples = Vec::with_capacity(num_samples);
    for _ in 0..num_samples {
        let p = PowerVector::new(vec![rng.open_closed() * p_max, rng.open_closed() * p_max])?;
        let (x, _) = solve_load_unchecked(net, &p, r, None, LOAD_TOL, LOAD_MAX_ITER)?;
        samples.push(RegionSample {
            power: p.into_vec(),
            load: x.into_vec(),
        });
    }
    Ok(samples)
}

fn solver_row(net: &Network, param: f64, phi: f64, r: &RateVector, opts: &IapOptions) -> SweepRow {
    let target = match LoadVector::uniform(net.cells(), phi) {
        Ok(t) => t,
        Err(_) => {
            return SweepRow {
                param,
                total_energy: None,
                feasible: false,
                iterations: 0,
            }
        }
    };
    match iap_engine(net, &target, r, opts) {
        Ok(run) if run.report.termination == Termination::Converged => {
            let total = energy(&target, &run.power, None)
                .map(|e| e.total)
                .unwrap_or(f64::NAN);
            SweepRow {
                param,
                total_energy: Some(total),
                feasible: true,
                iterations: run.report.iterations,
            }
        }
        Ok(run) => SweepRow {
            param,
            total_energy: None,
            feasible: false,
            iterations: run.report.iterations,
        },
        Err(_) => SweepRow {
            param,
            total_energy: None,
            feasible: false,
            iterations: 0,
        },
    }
}

fn baseline_row(net: &Network, param: f64, r: &RateVector) -> SweepRow {
    match uniform_power_baseline_auto(net, r, BASELINE_BETA_TOL) {
        Ok(result) => SweepRow {
            param,
            total_energy: Some(result.energy.total),
            feasible: true,
            iterations: result.iterations,
        },
        Err(_) => SweepRow {
            param,
            total_energy: None,
            feasible: false,
            iterations: 0,
        },
    }
}

fn check_ascending_positive(what: &'static str, values: &[f64]) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::InvalidEntry {
                what,
                index: i,
                value: v,
                requirement: "must be finite and strictly positive",
            });
        }
        if i > 0 && values[i - 1] >= v {
            return Err(Error::InvalidEntry {
                what,
                index: i,
                value: v,
                requirement: "must be strictly ascending",
            });
        }
    }
    Ok(())
}
