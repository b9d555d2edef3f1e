//! Network data model and pure evaluation kernels.
//!
//! A [`Network`] is the static scenario: `n` cells, each serving a disjoint
//! non-empty group of users, a dense channel-gain matrix (rows are cells,
//! columns are global user indices, linear scale), and the noise power per
//! resource unit. On top of it sit three kernels:
//!
//! - [`sinr`] — the load-weighted SINR of one user,
//! - [`load_map`] — the coupling map `f` taking a load vector to the load
//!   each cell needs in order to deliver the given per-user rates,
//! - [`energy`] — per-cell and total transmission energy `x_i * p_i`.
//!
//! Rates are in nats with the resource normalization (`M * B`) folded in, so
//! the load map divides rates by the natural log of `1 + SINR` directly.
//! Everything here is an immutable value and every function is pure; concurrent
//! evaluation needs no synchronization.

use crate::error::{Error, Result};

/// Static scenario: cells, served user groups, channel gains, noise power.
///
/// Invariants established at construction and relied on by the solvers:
/// every cell serves at least one user, every user is served by exactly one
/// cell, serving gains are strictly positive, all gains are finite and
/// non-negative, and the noise power is finite and non-negative. Solvers
/// additionally require strictly positive noise power; pure evaluation only
/// needs the total SINR denominator to stay positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    users: Vec<Vec<usize>>,
    gains: Vec<Vec<f64>>,
    noise_power: f64,
    serving: Vec<usize>,
}

impl Network {
    pub fn new(users: Vec<Vec<usize>>, gains: Vec<Vec<f64>>, noise_power: f64) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::LengthMismatch {
                what: "cell user lists",
                expected: 1,
                found: 0,
            });
        }
        if gains.len() != users.len() {
            return Err(Error::LengthMismatch {
                what: "gain matrix rows",
                expected: users.len(),
                found: gains.len(),
            });
        }
        if !noise_power.is_finite() || noise_power < 0.0 {
            return Err(Error::InvalidNoise { value: noise_power });
        }
        let total = gains[0].len();
        for (cell, row) in gains.iter().enumerate() {
            if row.len() != total {
                return Err(Error::LengthMismatch {
                    what: "gain matrix row",
                    expected: total,
                    found: row.len(),
                });
            }
            for (user, &g) in row.iter().enumerate() {
                if !g.is_finite() || g < 0.0 {
                    return Err(Error::InvalidGain {
                        cell,
                        user,
                        value: g,
                    });
                }
            }
        }
        let mut serving = vec![usize::MAX; total];
        for (cell, served) in users.iter().enumerate() {
            if served.is_empty() {
                return Err(Error::EmptyCell { cell });
            }
            for &user in served {
                if user >= total {
                    return Err(Error::UserOutOfRange { cell, user, total });
                }
                if serving[user] != usize::MAX {
                    return Err(Error::UserServedTwice {
                        user,
                        first: serving[user],
                        second: cell,
                    });
                }
                serving[user] = cell;
                if gains[cell][user] <= 0.0 {
                    return Err(Error::ZeroServingGain { cell, user });
                }
            }
        }
        if let Some(user) = serving.iter().position(|&c| c == usize::MAX) {
            return Err(Error::UserUnserved { user });
        }
        Ok(Self {
            users,
            gains,
            noise_power,
            serving,
        })
    }

    /// Number of cells `n`.
    pub fn cells(&self) -> usize {
        self.users.len()
    }

    /// Total number of users across all cells.
    pub fn num_users(&self) -> usize {
        self.serving.len()
    }

    /// Global user indices served by `cell`.
    pub fn served(&self, cell: usize) -> &[usize] {
        &self.users[cell]
    }

    /// Channel power gain from `cell` to `user` (linear scale).
    pub fn gain(&self, cell: usize, user: usize) -> f64 {
        self.gains[cell][user]
    }

    /// The unique cell serving `user`.
    pub fn serving_cell(&self, user: usize) -> usize {
        self.serving[user]
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }
}

/// Per-cell load: fraction of the cell's time-frequency resource units in use.
///
/// Entries are non-negative by construction; a solved system has strictly
/// positive load, and feasibility additionally requires every entry to be at
/// most 1 (checked separately, never clamped here).
#[derive(Debug, Clone, PartialEq)]
pub struct LoadVector(Vec<f64>);

impl LoadVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidEntry {
                    what: "load",
                    index: i,
                    value: v,
                    requirement: "must be finite and non-negative",
                });
            }
        }
        Ok(Self(values))
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Infinity-norm distance to `other`.
    pub fn max_abs_diff(&self, other: &LoadVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Euclidean distance to `other`.
    pub fn l2_dist(&self, other: &LoadVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Per-cell transmit power in watts per resource unit, strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerVector(Vec<f64>);

impl PowerVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidEntry {
                    what: "power",
                    index: i,
                    value: v,
                    requirement: "must be finite and strictly positive",
                });
            }
        }
        Ok(Self(values))
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn scaled(&self, factor: f64) -> Result<PowerVector> {
        PowerVector::new(self.0.iter().map(|p| p * factor).collect())
    }

    pub fn max_abs_diff(&self, other: &PowerVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Per-user rates in nats (resource normalization folded in).
///
/// The same shape carries both served rates `r` and minimum demands `d_min`;
/// demands must additionally be strictly positive, which
/// [`RateVector::is_strictly_positive`] checks. QoS holds when `r >= d_min`
/// elementwise.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector(Vec<f64>);

impl RateVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidEntry {
                    what: "rate",
                    index: i,
                    value: v,
                    requirement: "must be finite and non-negative",
                });
            }
        }
        Ok(Self(values))
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn scaled(&self, factor: f64) -> Result<RateVector> {
        RateVector::new(self.0.iter().map(|r| r * factor).collect())
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.0.iter().all(|&r| r > 0.0)
    }

    /// True when every rate meets its minimum demand.
    pub fn meets(&self, d_min: &RateVector) -> bool {
        self.0.len() == d_min.0.len() && self.0.iter().zip(&d_min.0).all(|(r, d)| r >= d)
    }
}

/// Per-cell and total transmission energy.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    /// `e_i = x_i * p_i`, unweighted.
    pub per_cell: Vec<f64>,
    /// `sum_i w_i * e_i` with unit weights unless given.
    pub total: f64,
    pub weights: Option<Vec<f64>>,
}

/// SINR of `user` served by `cell` under load `x` and power `p`.
///
/// `p_i g_ij / (sum_{k != i} p_k g_kj x_k + noise)`. The own-cell load
/// `x[cell]` never enters the sum, so the result is invariant to it bit for
/// bit. Errors when the denominator is zero, which requires zero noise power
/// and zero total interference.
pub fn sinr(
    net: &Network,
    x: &LoadVector,
    p: &PowerVector,
    cell: usize,
    user: usize,
) -> Result<f64> {
    check_cell_vectors(net, x, p)?;
    if net.serving_cell(user) != cell {
        return Err(Error::NotServedBy { cell, user });
    }
    let denom = interference(net, x.as_slice(), p.as_slice(), cell, user) + net.noise_power();
    if denom <= 0.0 {
        return Err(Error::ZeroSinrDenominator { cell, user });
    }
    Ok(p.get(cell) * net.gain(cell, user) / denom)
}

/// Load coupling map `f`: the load each cell needs to serve rates `r`
/// under interference generated by load `x` and power `p`.
///
/// `f_i = sum_{j in J_i} r_j / ln(1 + SINR_ij(x, p))`, natural log. A user
/// with zero rate contributes nothing. The map is evaluated at `x` without
/// touching `x_i` in cell `i`'s own terms, and the output is not clamped:
/// values above 1 are meaningful and report unimplementable targets.
pub fn load_map(
    net: &Network,
    x: &LoadVector,
    p: &PowerVector,
    r: &RateVector,
) -> Result<LoadVector> {
    check_cell_vectors(net, x, p)?;
    if r.len() != net.num_users() {
        return Err(Error::LengthMismatch {
            what: "rate vector",
            expected: net.num_users(),
            found: r.len(),
        });
    }
    let mut out = Vec::with_capacity(net.cells());
    for cell in 0..net.cells() {
        let mut f_i = 0.0;
        for &user in net.served(cell) {
            let rate = r.get(user);
            if rate == 0.0 {
                continue;
            }
            let denom =
                interference(net, x.as_slice(), p.as_slice(), cell, user) + net.noise_power();
            if denom <= 0.0 {
                return Err(Error::ZeroSinrDenominator { cell, user });
            }
            let s = p.get(cell) * net.gain(cell, user) / denom;
            f_i += rate / s.ln_1p();
        }
        if !f_i.is_finite() {
            return Err(Error::NonFiniteValue {
                what: "load map output",
                index: cell,
            });
        }
        out.push(f_i);
    }
    Ok(LoadVector(out))
}

/// Transmission energy per cell and in (optionally weighted) total.
pub fn energy(x: &LoadVector, p: &PowerVector, weights: Option<&[f64]>) -> Result<EnergyReport> {
    if x.len() != p.len() {
        return Err(Error::LengthMismatch {
            what: "load vector",
            expected: p.len(),
            found: x.len(),
        });
    }
    if let Some(w) = weights {
        if w.len() != x.len() {
            return Err(Error::LengthMismatch {
                what: "weights",
                expected: x.len(),
                found: w.len(),
            });
        }
        for (i, &v) in w.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidEntry {
                    what: "weight",
                    index: i,
                    value: v,
                    requirement: "must be finite and strictly positive",
                });
            }
        }
    }
    let per_cell: Vec<f64> = x
        .as_slice()
        .iter()
        .zip(p.as_slice())
        .map(|(xi, pi)| xi * pi)
        .collect();
    let total = match weights {
        Some(w) => per_cell.iter().zip(w).map(|(e, wi)| wi * e).sum(),
        None => per_cell.iter().sum(),
    };
    Ok(EnergyReport {
        per_cell,
        total,
        weights: weights.map(|w| w.to_vec()),
    })
}

/// Average interference at `user` from every cell other than `cell`.
pub(crate) fn interference(net: &Network, x: &[f64], p: &[f64], cell: usize, user: usize) -> f64 {
    let mut acc = 0.0;
    for k in 0..net.cells() {
        if k == cell {
            continue;
        }
        acc += p[k] * net.gain(k, user) * x[k];
    }
    acc
}

fn check_cell_vectors(net: &Network, x: &LoadVector, p: &PowerVector) -> Result<()> {
    if x.len() != net.cells() {
        return Err(Error::LengthMismatch {
            what: "load vector",
            expected: net.cells(),
            found: x.len(),
        });
    }
    if p.len() != net.cells() {
        return Err(Error::LengthMismatch {
            what: "power vector",
            expected: net.cells(),
            found: p.len(),
        });
    }
    Ok(())
}
