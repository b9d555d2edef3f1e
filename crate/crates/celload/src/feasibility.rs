//! Rate satisfiability via the spectral radius of the coupling matrix.
//!
//! The coupling matrix collects, per ordered cell pair `(i, k)`, how strongly
//! cell `k`'s transmissions inflate cell `i`'s load requirement:
//! `lambda_ik = sum_{j in J_i} g_kj * r_j / g_ij` off the diagonal, zero on
//! it. The matrix depends on the rates but not on power, and a unique
//! positive load solving the coupling equation exists for every positive
//! power exactly when its spectral radius is below 1.

use crate::error::{Error, Result};
use crate::model::{Network, RateVector};

/// Power-iteration ratio tolerance used by [`is_satisfiable`].
pub const SPECTRAL_TOL: f64 = 1e-12;
/// Power-iteration cap used by [`is_satisfiable`].
pub const SPECTRAL_MAX_ITER: usize = 100_000;
/// Strictness margin for the satisfiability verdict: satisfiable means
/// `rho < 1 - SATISFIABILITY_MARGIN`, keeping boundary cases out (energy
/// grows without bound as `rho` approaches 1).
pub const SATISFIABILITY_MARGIN: f64 = 1e-12;

/// Non-negative square matrix in row-major storage.
///
/// [`build_lambda`] additionally guarantees a zero diagonal; the spectral
/// radius routine accepts any non-negative square matrix, which the tests
/// exploit for oracle comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CouplingMatrix {
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::LengthMismatch {
                what: "coupling matrix entries",
                expected: n * n,
                found: entries.len(),
            });
        }
        for (i, &v) in entries.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidEntry {
                    what: "coupling matrix entry",
                    index: i,
                    value: v,
                    requirement: "must be finite and non-negative",
                });
            }
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, k: usize) -> f64 {
        self.entries[i * self.n + k]
    }

    fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        for (i, slot) in out.iter_mut().enumerate() {
            let row = &self.entries[i * self.n..(i + 1) * self.n];
            *slot = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
}

/// Spectral radius estimate from power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRadius {
    pub rho: f64,
    pub iterations: usize,
    /// False when the iteration stalled and `rho` is the Gelfand-style
    /// estimate `||m^k||^(1/k)` at the deepest iterate instead.
    pub converged: bool,
}

/// Satisfiability verdict for a rate vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatisfiabilityReport {
    pub rho: f64,
    pub satisfiable: bool,
    pub iterations: usize,
    pub converged: bool,
}

/// Builds the coupling matrix for rates `r`.
///
/// Serving gains are strictly positive by the [`Network`] invariants, so the
/// division is always defined. Entries are linear in `r`.
pub fn build_lambda(net: &Network, r: &RateVector) -> Result<CouplingMatrix> {
    if r.len() != net.num_users() {
        return Err(Error::LengthMismatch {
            what: "rate vector",
            expected: net.num_users(),
            found: r.len(),
        });
    }
    let n = net.cells();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            if i == k {
                continue;
            }
            let mut acc = 0.0;
            for &j in net.served(i) {
                acc += net.gain(k, j) * r.get(j) / net.gain(i, j);
            }
            entries[i * n + k] = acc;
        }
    }
    CouplingMatrix::from_entries(n, entries)
}

/// Spectral radius of a non-negative matrix by power iteration from the
/// all-ones vector.
///
/// The iterate is renormalized by its infinity norm each step; the norm
/// ratio converges to the radius for the matrices arising here. A matrix
/// that annihilates the iterate is nilpotent and reports radius zero
/// exactly. If the ratio has not settled within `max_iter` (reducible
/// matrices with oscillating ratios), the accumulated Gelfand estimate
/// `||m^k||_inf^(1/k)` — checkpointed at k = 32 and 64 and carried to the
/// deepest iterate — is returned with `converged = false`.
pub fn spectral_radius(m: &CouplingMatrix, tol: f64, max_iter: usize) -> SpectralRadius {
    let n = m.n();
    if n == 0 {
        return SpectralRadius {
            rho: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut z = vec![1.0; n];
    let mut w = vec![0.0; n];
    let mut prev: Option<f64> = None;
    let mut log_sum = 0.0;
    for iter in 1..=max_iter.max(1) {
        m.mul_vec(&z, &mut w);
        let s = w.iter().fold(0.0, |a: f64, &b| a.max(b));
        if s == 0.0 {
            // m^iter applied to a positive vector vanished: nilpotent.
            return SpectralRadius {
                rho: 0.0,
                iterations: iter,
                converged: true,
            };
        }
        log_sum += s.ln();
        if let Some(p) = prev {
            if (s - p).abs() <= tol * s.max(1.0) {
                return SpectralRadius {
                    rho: s,
                    iterations: iter,
                    converged: true,
                };
            }
        }
        prev = Some(s);
        for (zi, wi) in z.iter_mut().zip(&w) {
            *zi = wi / s;
        }
    }
    SpectralRadius {
        rho: (log_sum / max_iter.max(1) as f64).exp(),
        iterations: max_iter,
        converged: false,
    }
}

/// Tests whether rates `r` are satisfiable: the coupling spectral radius
/// must sit strictly below 1 (with [`SATISFIABILITY_MARGIN`]).
pub fn is_satisfiable(net: &Network, r: &RateVector) -> Result<SatisfiabilityReport> {
    let lambda = build_lambda(net, r)?;
    let sr = spectral_radius(&lambda, SPECTRAL_TOL, SPECTRAL_MAX_ITER);
    Ok(SatisfiabilityReport {
        rho: sr.rho,
        satisfiable: sr.rho < 1.0 - SATISFIABILITY_MARGIN,
        iterations: sr.iterations,
        converged: sr.converged,
    })
}
