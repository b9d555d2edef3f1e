//! Fixed-point solver for the load coupling equation at given power and rates.
//!
//! For satisfiable rates the coupling equation `x = f(x; r, p)` has exactly
//! one positive solution for every positive power, and plain fixed-point
//! sweeps reach it from any positive start because `f` is a standard
//! interference function in the load. The solver reports the fixed point as
//! is — loads above 1 are left intact, since they are exactly what reveals an
//! unimplementable target. Feasibility of a load is a separate check.

use crate::error::{Error, Result};
use crate::feasibility::is_satisfiable;
use crate::model::{load_map, LoadVector, Network, PowerVector, RateVector};

/// Default residual tolerance for load solves (infinity norm of `x - f(x)`).
/// Load solves are cheap inner steps, so this sits well below the outer
/// power-iteration tolerance.
pub const LOAD_TOL: f64 = 1e-10;
/// Default iteration cap for load solves.
pub const LOAD_MAX_ITER: usize = 100_000;

/// Why a fixed-point solve stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Final residual at or below the tolerance.
    Converged,
    /// Iteration budget exhausted without convergence.
    MaxIter,
    /// Iterates grew past the divergence threshold: the target is taken to
    /// be unimplementable (power solves only).
    InfeasibleDetected,
}

/// Convergence record of a fixed-point solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    /// Infinity-norm residual after each iteration; never empty.
    pub residual_trace: Vec<f64>,
    pub termination: Termination,
    /// Cells held at their power cap (capped power solves only).
    pub pinned_cells: Vec<usize>,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_trace.last().expect("trace is never empty")
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Solves `x = f(x; r, p)` by fixed-point iteration.
///
/// Starts from `x0` (all-ones when `None`; any positive start converges) and
/// stops once the residual `||x - f(x)||_inf` drops to `tol` or `max_iter`
/// map evaluations have been spent. The returned load is the iterate whose
/// residual was measured, so on convergence it satisfies the tolerance
/// exactly as reported. Unsatisfiable rates are rejected up front.
pub fn solve_load(
    net: &Network,
    p: &PowerVector,
    r: &RateVector,
    x0: Option<&LoadVector>,
    tol: f64,
    max_iter: usize,
) -> Result<(LoadVector, SolveReport)> {
    let report = is_satisfiable(net, r)?;
    if !report.satisfiable {
        return Err(Error::Unsatisfiable { rho: report.rho });
    }
    solve_load_unchecked(net, p, r, x0, tol, max_iter)
}

/// [`solve_load`] without the satisfiability pre-check, for callers that
/// have already verified it (bisection loops, sweeps).
pub(crate) fn solve_load_unchecked(
    net: &Network,
    p: &PowerVector,
    r: &RateVector,
    x0: Option<&LoadVector>,
    tol: f64,
    max_iter: usize,
) -> Result<(LoadVector, SolveReport)> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidParameter {
            what: "load tolerance",
            value: tol,
            requirement: "must be strictly positive",
        });
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter {
            what: "max_iter",
            value: 0.0,
            requirement: "must be at least 1",
        });
    }
    if net.noise_power() <= 0.0 {
        return Err(Error::InvalidParameter {
            what: "noise power",
            value: net.noise_power(),
            requirement: "must be strictly positive for solvers",
        });
    }
    let mut x = match x0 {
        Some(start) => {
            if start.len() != net.cells() {
                return Err(Error::LengthMismatch {
                    what: "initial load",
                    expected: net.cells(),
                    found: start.len(),
                });
            }
            start.clone()
        }
        None => LoadVector::ones(net.cells()),
    };
    let mut trace = Vec::new();
    for iteration in 1..=max_iter {
        let fx = load_map(net, &x, p, r)?;
        let residual = fx.max_abs_diff(&x);
        trace.push(residual);
        if residual <= tol {
            return Ok((
                x,
                SolveReport {
                    iterations: iteration,
                    residual_trace: trace,
                    termination: Termination::Converged,
                    pinned_cells: Vec::new(),
                },
            ));
        }
        x = fx;
    }
    Ok((
        x,
        SolveReport {
            iterations: max_iter,
            residual_trace: trace,
            termination: Termination::MaxIter,
            pinned_cells: Vec::new(),
        },
    ))
}

/// True when every component satisfies `0 < x_i <= 1`.
pub fn check_feasible_load(x: &LoadVector) -> bool {
    x.as_slice().iter().all(|&v| v > 0.0 && v <= 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn toy() -> Network {
        Network::new(
            vec![vec![0], vec![1]],
            vec![vec![1.0, 1.0 / 3.0], vec![1.0 / 3.0, 1.0]],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn single_cell_closed_form() {
        // p*g/noise = e^2 - 1 with r = 1 gives x = 1 / ln(e^2) = 1/2.
        let net = Network::new(vec![vec![0]], vec![vec![1.0]], 1.0).unwrap();
        let p = PowerVector::new(vec![std::f64::consts::E.powi(2) - 1.0]).unwrap();
        let r = RateVector::uniform(1, 1.0).unwrap();
        let (x, rep) = solve_load(&net, &p, &r, None, LOAD_TOL, LOAD_MAX_ITER).unwrap();
        assert!(rep.converged());
        assert!((x.get(0) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn toy_symmetric_fixed_point_is_full_load() {
        let e = std::f64::consts::E;
        let q = 3.0 * (e - 1.0) / (4.0 - e);
        let net = toy();
        let p = PowerVector::uniform(2, q).unwrap();
        let r = RateVector::uniform(2, 1.0).unwrap();
        let start = LoadVector::uniform(2, 0.2).unwrap();
        let (x, rep) = solve_load(&net, &p, &r, Some(&start), LOAD_TOL, LOAD_MAX_ITER).unwrap();
        assert!(rep.converged());
        assert!((x.get(0) - 1.0).abs() < 1e-9);
        assert!((x.get(1) - 1.0).abs() < 1e-9);
        assert!(rep.final_residual() <= LOAD_TOL);
    }

    #[test]
    fn toy_rate_two_fixed_point_exceeds_one() {
        // Rates are satisfiable (rho = 2/3) yet the fixed point violates the
        // load bound, so full-rate service is not implementable at this power.
        let net = toy();
        let p = PowerVector::ones(2);
        let r = RateVector::uniform(2, 2.0).unwrap();
        let (x, rep) = solve_load(&net, &p, &r, None, LOAD_TOL, LOAD_MAX_ITER).unwrap();
        assert!(rep.converged());
        assert!(x.as_slice().iter().any(|&v| v > 1.0));
        // Independent brute-force iteration of the map from a different start.
        let mut z = LoadVector::uniform(2, 7.0).unwrap();
        for _ in 0..10_000 {
            z = load_map(&net, &z, &p, &r).unwrap();
        }
        assert!(x.max_abs_diff(&z) < 1e-8);
        assert!(!check_feasible_load(&x));
    }

    #[test]
    fn unsatisfiable_rates_are_rejected() {
        let net = toy();
        let p = PowerVector::ones(2);
        let r = RateVector::uniform(2, 3.1).unwrap();
        assert!(matches!(
            solve_load(&net, &p, &r, None, LOAD_TOL, LOAD_MAX_ITER),
            Err(Error::Unsatisfiable { .. })
        ));
    }

    #[test]
    fn max_iter_reports_best_iterate() {
        let net = toy();
        let p = PowerVector::ones(2);
        let r = RateVector::uniform(2, 1.0).unwrap();
        let (_, rep) = solve_load(&net, &p, &r, None, 1e-14, 3).unwrap();
        assert_eq!(rep.termination, Termination::MaxIter);
        assert_eq!(rep.iterations, 3);
        assert_eq!(rep.residual_trace.len(), 3);
    }

    #[test]
    fn fixed_point_unique_across_starts() {
        let mut rng = SplitMix64::new(31);
        let net = toy();
        for _ in 0..10 {
            let p = PowerVector::new(vec![rng.range(0.2, 4.0), rng.range(0.2, 4.0)]).unwrap();
            let r = RateVector::new(vec![rng.range(0.2, 1.2), rng.range(0.2, 1.2)]).unwrap();
            let a = LoadVector::new(vec![rng.range(0.01, 5.0), rng.range(0.01, 5.0)]).unwrap();
            let b = LoadVector::new(vec![rng.range(0.01, 5.0), rng.range(0.01, 5.0)]).unwrap();
            let (xa, ra) = solve_load(&net, &p, &r, Some(&a), LOAD_TOL, LOAD_MAX_ITER).unwrap();
            let (xb, rb) = solve_load(&net, &p, &r, Some(&b), LOAD_TOL, LOAD_MAX_ITER).unwrap();
            assert!(ra.converged() && rb.converged());
            assert!(xa.max_abs_diff(&xb) <= 10.0 * LOAD_TOL);
        }
    }

    #[test]
    fn load_grows_strictly_with_rates() {
        let mut rng = SplitMix64::new(5);
        let net = toy();
        for _ in 0..10 {
            let p = PowerVector::new(vec![rng.range(0.5, 3.0), rng.range(0.5, 3.0)]).unwrap();
            let r = RateVector::new(vec![rng.range(0.2, 1.0), rng.range(0.2, 1.0)]).unwrap();
            let r_hi = r.scaled(1.0 + rng.range(0.05, 0.5)).unwrap();
            let (x, _) = solve_load(&net, &p, &r, None, LOAD_TOL, LOAD_MAX_ITER).unwrap();
            let (x_hi, _) = solve_load(&net, &p, &r_hi, None, LOAD_TOL, LOAD_MAX_ITER).unwrap();
            for i in 0..2 {
                assert!(x_hi.get(i) > x.get(i));
            }
        }
    }

    #[test]
    fn load_shrinks_when_power_scales_up() {
        let mut rng = SplitMix64::new(6);
        let net = toy();
        for _ in 0..10 {
            let p = PowerVector::new(vec![rng.range(0.5, 3.0), rng.range(0.5, 3.0)]).unwrap();
            let beta = 1.0 + rng.range(0.1, 2.0);
            let r = RateVector::new(vec![rng.range(0.2, 1.0), rng.range(0.2, 1.0)]).unwrap();
            let (x, _) = solve_load(&net, &p, &r, None, LOAD_TOL, LOAD_MAX_ITER).unwrap();
            let (x_beta, _) = solve_load(
                &net,
                &p.scaled(beta).unwrap(),
                &r,
                None,
                LOAD_TOL,
                LOAD_MAX_ITER,
            )
            .unwrap();
            for i in 0..2 {
                assert!(x_beta.get(i) <= x.get(i) + LOAD_TOL);
            }
        }
    }

    #[test]
    fn residual_trace_decays() {
        // Monotone decay is the observed behaviour, not a guarantee; log any
        // violation but only fail when the trace fails to shrink overall.
        let net = toy();
        let p = PowerVector::uniform(2, 2.0).unwrap();
        let r = RateVector::uniform(2, 1.0).unwrap();
        let start = LoadVector::uniform(2, 4.0).unwrap();
        let (_, rep) = solve_load(&net, &p, &r, Some(&start), LOAD_TOL, LOAD_MAX_ITER).unwrap();
        let t = &rep.residual_trace;
        for w in t.windows(2) {
            if w[1] > w[0] {
                eprintln!("residual rose from {} to {}", w[0], w[1]);
            }
        }
        assert!(t.len() >= 2);
        assert!(t[t.len() - 1] < t[0]);
    }

    #[test]
    fn feasible_load_bounds() {
        assert!(check_feasible_load(
            &LoadVector::new(vec![0.5, 1.0]).unwrap()
        ));
        assert!(!check_feasible_load(
            &LoadVector::new(vec![1.0 + 1e-9, 0.5]).unwrap()
        ));
        assert!(!check_feasible_load(
            &LoadVector::new(vec![0.0, 0.5]).unwrap()
        ));
    }

    #[test]
    fn zero_noise_rejected_by_solver() {
        let net = Network::new(
            vec![vec![0], vec![1]],
            vec![vec![1.0, 0.2], vec![0.2, 1.0]],
            0.0,
        )
        .unwrap();
        let p = PowerVector::ones(2);
        let r = RateVector::uniform(2, 0.5).unwrap();
        assert!(matches!(
            solve_load(&net, &p, &r, None, LOAD_TOL, LOAD_MAX_ITER),
            Err(Error::InvalidParameter {
                what: "noise power",
                ..
            })
        ));
    }
}
