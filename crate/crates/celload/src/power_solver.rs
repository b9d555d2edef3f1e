//! Power solver for the coupling equation at a given target load.
//!
//! With load and rates fixed, the power each cell needs is pinned down by a
//! scalar equation: cell `i` meets its load target exactly when
//! `eta_i(p_i) = sum_j a_ij / ln(1 + p_i * b_ij) = 1`, where
//! `a_ij = r_j / x_i` and `b_ij` is the serving gain over the (power- and
//! load-weighted) interference plus noise seen by user `j`. Both coefficients
//! are independent of `p_i`, and `eta_i` is continuous, strictly decreasing,
//! and sweeps from infinity to zero — so the per-cell solution exists, is
//! unique, and a bisection finds it.
//!
//! Writing those per-cell solutions as a map `h` over the full power vector
//! gives the power-coupling form `p = h(p; x, r)`. The map has no closed
//! form, but it is a standard interference function (positive, monotone,
//! scalable), so synchronous or asynchronous sweeps of per-cell bisections
//! converge to its unique fixed point from any positive start whenever one
//! exists. When none exists the iterates grow without bound; the solver
//! reports that as detected infeasibility once a cell's bracket expansion
//! passes the divergence threshold.

use crate::error::{Error, Result};
use crate::feasibility::is_satisfiable;
use crate::load_solver::{SolveReport, Termination};
use crate::model::{interference, load_map, LoadVector, Network, PowerVector, RateVector};

/// Default outer tolerance: infinity norm of `f(x*; r, p) - x*`.
pub const IAP_OUTER_TOL: f64 = 1e-5;
/// Default inner tolerance on `|eta_i(p_i) - 1|` in the per-cell bisection.
pub const IAP_INNER_TOL: f64 = 1e-9;
/// Default cap on outer sweeps.
pub const IAP_MAX_OUTER: usize = 10_000;
/// Default divergence threshold in watts; a cell whose bracket expansion
/// exceeds it without crossing `eta < 1` signals an unimplementable target.
pub const DIVERGENCE_POWER: f64 = 1e6;

/// Bisection step cap; the interval is float-exhausted long before this.
const MAX_BISECT: usize = 200;

/// Sweep discipline for the iterative power algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum IapMode {
    /// Every cell's bisection reads the previous sweep's power vector.
    #[serde(rename = "sync", alias = "synchronous")]
    Synchronous,
    /// Cells update in ascending index order and later cells see earlier
    /// updates immediately.
    #[serde(rename = "async", alias = "asynchronous")]
    Asynchronous,
}

/// Options for [`iap`] and [`iap_capped`].
#[derive(Debug, Clone)]
pub struct IapOptions {
    pub mode: IapMode,
    /// Outer tolerance on the load residual infinity norm.
    pub outer_tol: f64,
    /// Inner tolerance on `|eta - 1|`.
    pub inner_tol: f64,
    pub max_outer: usize,
    /// Initial power vector; all-ones watts when `None`.
    pub p0: Option<PowerVector>,
    /// Per-cell maximum power; enables the constrained update
    /// `min(h_i, p_cap_i)`.
    pub p_cap: Option<Vec<f64>>,
    /// Infeasibility heuristic threshold in watts.
    pub divergence_power: f64,
    /// Asynchronous sweep order, for experimentation; a permutation of the
    /// cell indices. Ascending order when `None`. The fixed point is the
    /// same either way; only the path differs.
    pub sweep_order: Option<Vec<usize>>,
}

impl Default for IapOptions {
    fn default() -> Self {
        Self {
            mode: IapMode::Asynchronous,
            outer_tol: IAP_OUTER_TOL,
            inner_tol: IAP_INNER_TOL,
            max_outer: IAP_MAX_OUTER,
            p0: None,
            p_cap: None,
            divergence_power: DIVERGENCE_POWER,
            sweep_order: None,
        }
    }
}

/// Frozen per-cell coefficients of `eta_i` at one sweep position.
///
/// Both coefficient lists are strictly positive and independent of the cell's
/// own power, so `eta` is strictly decreasing in `p_i` with range
/// `(0, infinity)`.
#[derive(Debug, Clone)]
pub struct EtaContext {
    cell: usize,
    /// `(a_ij, b_ij)` per served user.
    terms: Vec<(f64, f64)>,
    /// Bracket seed: the cell's power when the context was built.
    p_start: f64,
}

impl EtaContext {
    /// Builds the coefficients for `cell` from the target load, rates, and
    /// the other cells' current powers.
    pub fn new(
        net: &Network,
        x_target: &LoadVector,
        r: &RateVector,
        p: &PowerVector,
        cell: usize,
    ) -> Result<Self> {
        Self::from_power_slice(net, x_target, r, p.as_slice(), cell)
    }

    pub(crate) fn from_power_slice(
        net: &Network,
        x_target: &LoadVector,
        r: &RateVector,
        p: &[f64],
        cell: usize,
    ) -> Result<Self> {
        if x_target.len() != net.cells() || p.len() != net.cells() {
            return Err(Error::LengthMismatch {
                what: "target load / power vector",
                expected: net.cells(),
                found: x_target.len().min(p.len()),
            });
        }
        if r.len() != net.num_users() {
            return Err(Error::LengthMismatch {
                what: "rate vector",
                expected: net.num_users(),
                found: r.len(),
            });
        }
        let x_i = x_target.get(cell);
        if x_i <= 0.0 {
            return Err(Error::InvalidEntry {
                what: "target load",
                index: cell,
                value: x_i,
                requirement: "must be strictly positive",
            });
        }
        let mut terms = Vec::with_capacity(net.served(cell).len());
        for &user in net.served(cell) {
            let rate = r.get(user);
            if rate <= 0.0 {
                return Err(Error::InvalidEntry {
                    what: "rate",
                    index: user,
                    value: rate,
                    requirement: "must be strictly positive for power solves",
                });
            }
            let denom = interference(net, x_target.as_slice(), p, cell, user) + net.noise_power();
            if denom <= 0.0 {
                return Err(Error::ZeroSinrDenominator { cell, user });
            }
            let a = rate / x_i;
            let b = net.gain(cell, user) / denom;
            terms.push((a, b));
        }
        Ok(Self {
            cell,
            terms,
            p_start: p[cell],
        })
    }

    pub fn cell(&self) -> usize {
        self.cell
    }

    /// `eta_i(p_i)`. Errors for non-positive or non-finite `p_i`.
    pub fn eta(&self, p_i: f64) -> Result<f64> {
        if !p_i.is_finite() || p_i <= 0.0 {
            return Err(Error::InvalidParameter {
                what: "power",
                value: p_i,
                requirement: "eta is defined for strictly positive power only",
            });
        }
        Ok(self.eta_at(p_i))
    }

    fn eta_at(&self, p_i: f64) -> f64 {
        self.terms.iter().map(|&(a, b)| a / (p_i * b).ln_1p()).sum()
    }
}

/// Evaluates `eta_i` at `p_i`; see [`EtaContext::eta`].
pub fn eta(ctx: &EtaContext, p_i: f64) -> Result<f64> {
    ctx.eta(p_i)
}

/// Solves `eta_i(p_i) = 1` for one cell: the implicit per-cell power map.
///
/// The bracket starts at the cell's current power and expands by halving
/// until `eta > 1` (guaranteed to terminate, `eta` blows up at zero) and
/// doubling until `eta < 1`, capped at `divergence_power`; a right bracket
/// that cannot be found below the cap is the infeasibility signal
/// ([`Error::PowerDiverged`]). Bisection then stops at `|eta - 1| <=
/// inner_tol`.
pub fn solve_cell_power(ctx: &EtaContext, inner_tol: f64, divergence_power: f64) -> Result<f64> {
    if !inner_tol.is_finite() || inner_tol <= 0.0 {
        return Err(Error::InvalidParameter {
            what: "inner tolerance",
            value: inner_tol,
            requirement: "must be strictly positive",
        });
    }
    if !divergence_power.is_finite() || divergence_power <= 0.0 {
        return Err(Error::InvalidParameter {
            what: "divergence power",
            value: divergence_power,
            requirement: "must be strictly positive",
        });
    }
    let start = ctx.p_start.min(divergence_power);

    // Left bracket: walk down until eta exceeds 1.
    let mut lo = start;
    loop {
        let e = ctx.eta_at(lo);
        if (e - 1.0).abs() <= inner_tol {
            return Ok(lo);
        }
        if e > 1.0 {
            break;
        }
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            // eta < 1 arbitrarily close to zero power cannot happen with
            // positive coefficients; inputs must have degenerated.
            return Err(Error::NonFiniteValue {
                what: "bisection bracket",
                index: ctx.cell,
            });
        }
    }

    // Right bracket: walk up until eta drops below 1, divergence-capped.
    let mut hi = start.max(lo);
    loop {
        let e = ctx.eta_at(hi);
        if (e - 1.0).abs() <= inner_tol {
            return Ok(hi);
        }
        if e < 1.0 {
            break;
        }
        if hi >= divergence_power {
            return Err(Error::PowerDiverged {
                cell: ctx.cell,
                limit: divergence_power,
            });
        }
        hi = (hi * 2.0).min(divergence_power);
    }

    bisect(ctx, lo, hi, inner_tol)
}

/// Constrained per-cell update `min(h_i, cap)`: returns the power and
/// whether the cap pinned it.
fn solve_cell_power_capped(ctx: &EtaContext, inner_tol: f64, cap: f64) -> Result<(f64, bool)> {
    let e_cap = ctx.eta_at(cap);
    if (e_cap - 1.0).abs() <= inner_tol {
        return Ok((cap, false));
    }
    if e_cap > 1.0 {
        // Required power exceeds the cap.
        return Ok((cap, true));
    }
    let mut lo = ctx.p_start.min(cap);
    loop {
        let e = ctx.eta_at(lo);
        if (e - 1.0).abs() <= inner_tol {
            return Ok((lo, false));
        }
        if e > 1.0 {
            break;
        }
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Err(Error::NonFiniteValue {
                what: "bisection bracket",
                index: ctx.cell,
            });
        }
    }
    Ok((bisect(ctx, lo, cap, inner_tol)?, false))
}

/// Bisection on the strictly decreasing `eta` over `[lo, hi]` with
/// `eta(lo) > 1 > eta(hi)`.
fn bisect(ctx: &EtaContext, mut lo: f64, mut hi: f64, inner_tol: f64) -> Result<f64> {
    for _ in 0..MAX_BISECT {
        let mid = 0.5 * (lo + hi);
        let e = ctx.eta_at(mid);
        if (e - 1.0).abs() <= inner_tol {
            return Ok(mid);
        }
        if e > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::SolverStalled {
        iterations: MAX_BISECT,
        residual: (ctx.eta_at(0.5 * (lo + hi)) - 1.0).abs(),
    })
}

pub(crate) struct IapRun {
    pub power: PowerVector,
    pub report: SolveReport,
    /// Euclidean distance of the realized load to the target, per outer
    /// iteration starting at the initial map application.
    pub l2_trace: Vec<f64>,
}

/// Iterative power algorithm: solves `p = h(p; x_target, r)`.
///
/// Each outer iteration runs one full sweep of per-cell bisections
/// (synchronous or asynchronous per `opts.mode`), then re-evaluates the load
/// map once at the target, exactly as the published procedure does; the
/// outer loop stops when `||f(x_target; r, p) - x_target||_inf <= outer_tol`.
/// A power cap in `opts` switches every update to the constrained map — see
/// [`iap_capped`]. Divergence of the per-cell bracket or monotone growth at
/// the sweep budget terminates with [`Termination::InfeasibleDetected`] and
/// the best iterate.
pub fn iap(
    net: &Network,
    x_target: &LoadVector,
    r: &RateVector,
    opts: &IapOptions,
) -> Result<(PowerVector, SolveReport)> {
    let run = iap_engine(net, x_target, r, opts)?;
    Ok((run.power, run.report))
}

/// [`iap`] with per-cell maximum powers: each update is `min(h_i, p_cap_i)`.
///
/// The constrained map keeps a unique fixed point and the sweeps converge to
/// it; cells pinned at their cap are listed in the report, and their realized
/// load necessarily misses the target (convergence is then judged on the
/// power step instead of the load residual).
pub fn iap_capped(
    net: &Network,
    x_target: &LoadVector,
    r: &RateVector,
    opts: &IapOptions,
) -> Result<(PowerVector, SolveReport)> {
    if opts.p_cap.is_none() {
        return Err(Error::InvalidParameter {
            what: "p_cap",
            value: f64::NAN,
            requirement: "capped power solve requires per-cell maximum powers",
        });
    }
    iap(net, x_target, r, opts)
}

pub(crate) fn iap_engine(
    net: &Network,
    x_target: &LoadVector,
    r: &RateVector,
    opts: &IapOptions,
) -> Result<IapRun> {
    let n = net.cells();
    if x_target.len() != n {
        return Err(Error::LengthMismatch {
            what: "target load",
            expected: n,
            found: x_target.len(),
        });
    }
    for (i, &v) in x_target.as_slice().iter().enumerate() {
        if v <= 0.0 {
            return Err(Error::InvalidEntry {
                what: "target load",
                index: i,
                value: v,
                requirement: "must be strictly positive",
            });
        }
    }
    if !opts.outer_tol.is_finite() || opts.outer_tol <= 0.0 {
        return Err(Error::InvalidParameter {
            what: "outer tolerance",
            value: opts.outer_tol,
            requirement: "must be strictly positive",
        });
    }
    if !opts.inner_tol.is_finite() || opts.inner_tol <= 0.0 {
        return Err(Error::InvalidParameter {
            what: "inner tolerance",
            value: opts.inner_tol,
            requirement: "must be strictly positive",
        });
    }
    if opts.max_outer == 0 {
        return Err(Error::InvalidParameter {
            what: "max_outer",
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
    if let Some(caps) = &opts.p_cap {
        if caps.len() != n {
            return Err(Error::LengthMismatch {
                what: "power caps",
                expected: n,
                found: caps.len(),
            });
        }
        for (i, &c) in caps.iter().enumerate() {
            if !c.is_finite() || c <= 0.0 {
                return Err(Error::InvalidEntry {
                    what: "power cap",
                    index: i,
                    value: c,
                    requirement: "must be finite and strictly positive",
                });
            }
        }
    }
    let order: Vec<usize> = match &opts.sweep_order {
        Some(order) => {
            if order.len() != n {
                return Err(Error::LengthMismatch {
                    what: "sweep order",
                    expected: n,
                    found: order.len(),
                });
            }
            let mut seen = vec![false; n];
            for &cell in order {
                if cell >= n || seen[cell] {
                    return Err(Error::InvalidEntry {
                        what: "sweep order",
                        index: cell.min(n),
                        value: cell as f64,
                        requirement: "must be a permutation of the cell indices",
                    });
                }
                seen[cell] = true;
            }
            order.clone()
        }
        None => (0..n).collect(),
    };
    let sat = is_satisfiable(net, r)?;
    if !sat.satisfiable {
        return Err(Error::Unsatisfiable { rho: sat.rho });
    }

    let mut p = match &opts.p0 {
        Some(p0) => {
            if p0.len() != n {
                return Err(Error::LengthMismatch {
                    what: "initial power",
                    expected: n,
                    found: p0.len(),
                });
            }
            p0.clone()
        }
        None => PowerVector::ones(n),
    };

    // Initial residual from a single map application at the start power.
    let mut realized = load_map(net, x_target, &p, r)?;
    let mut residual = realized.max_abs_diff(x_target);
    let mut trace = vec![residual];
    let mut l2_trace = vec![realized.l2_dist(x_target)];
    let mut pinned: Vec<usize> = Vec::new();
    let mut sweeps = 0usize;
    let mut grew_last = false;

    let termination = loop {
        if residual <= opts.outer_tol {
            break Termination::Converged;
        }
        if sweeps >= opts.max_outer {
            break if grew_last {
                Termination::InfeasibleDetected
            } else {
                Termination::MaxIter
            };
        }

        let p_prev = p.clone();
        pinned.clear();
        let mut diverged = false;
        match opts.mode {
            IapMode::Synchronous => {
                let mut next = Vec::with_capacity(n);
                for cell in 0..n {
                    let ctx = EtaContext::new(net, x_target, r, &p_prev, cell)?;
                    match cell_update(&ctx, opts, cell, &mut pinned) {
                        Ok(v) => next.push(v),
                        Err(Error::PowerDiverged { .. }) => {
                            diverged = true;
                            next.push(p_prev.get(cell));
                        }
                        Err(e) => return Err(e),
                    }
                }
                p = PowerVector::new(next)?;
            }
            IapMode::Asynchronous => {
                let mut current = p.into_vec();
                for &cell in &order {
                    let ctx = EtaContext::from_power_slice(net, x_target, r, &current, cell)?;
                    match cell_update(&ctx, opts, cell, &mut pinned) {
                        Ok(v) => current[cell] = v,
                        Err(Error::PowerDiverged { .. }) => {
                            diverged = true;
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                }
                p = PowerVector::new(current)?;
            }
        }
        sweeps += 1;

        if diverged || p.as_slice().iter().any(|&v| v > opts.divergence_power) {
            realized = load_map(net, x_target, &p, r)?;
            residual = realized.max_abs_diff(x_target);
            trace.push(residual);
            l2_trace.push(realized.l2_dist(x_target));
            break Termination::InfeasibleDetected;
        }

        realized = load_map(net, x_target, &p, r)?;
        residual = realized.max_abs_diff(x_target);
        trace.push(residual);
        l2_trace.push(realized.l2_dist(x_target));

        grew_last = p
            .as_slice()
            .iter()
            .zip(p_prev.as_slice())
            .all(|(new, old)| new >= old)
            && p.as_slice()
                .iter()
                .zip(p_prev.as_slice())
                .any(|(new, old)| new > old);

        // With active caps the load residual cannot vanish; judge
        // convergence on the power step instead.
        if opts.p_cap.is_some() && !pinned.is_empty() {
            let step = p.max_abs_diff(&p_prev);
            let scale = p.as_slice().iter().fold(1.0_f64, |a, &b| a.max(b));
            if step <= opts.outer_tol * scale {
                break Termination::Converged;
            }
        }
    };

    pinned.sort_unstable();
    Ok(IapRun {
        power: p,
        report: SolveReport {
            iterations: sweeps,
            residual_trace: trace,
            termination,
            pinned_cells: pinned,
        },
        l2_trace,
    })
}

fn cell_update(
    ctx: &EtaContext,
    opts: &IapOptions,
    cell: usize,
    pinned: &mut Vec<usize>,
) -> Result<f64> {
    match &opts.p_cap {
        Some(caps) => {
            let (v, is_pinned) = solve_cell_power_capped(ctx, opts.inner_tol, caps[cell])?;
            if is_pinned {
                pinned.push(cell);
            }
            Ok(v)
        }
        None => solve_cell_power(ctx, opts.inner_tol, opts.divergence_power),
    }
}
