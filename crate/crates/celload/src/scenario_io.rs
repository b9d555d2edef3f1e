//! Scenario serialization and deterministic synthetic generation.
//!
//! The canonical on-disk format is versioned JSON with the numeric fields in
//! full-precision decimal text (shortest round-trip rendering), so fixtures
//! diff cleanly and a save/load cycle is bit-exact. Units on disk are watts,
//! nats, and linear gains; any dB or bit/s conversion belongs to the caller.
//!
//! # Schema (version 1)
//!
//! ```json
//! {
//!   "version": 1,
//!   "cells": 2,
//!   "users": [[0], [1]],
//!   "gains": [[1.0, 0.3333333333333333], [0.3333333333333333, 1.0]],
//!   "noise_power": 1.0,
//!   "demands": [2.0, 2.0],
//!   "power_cap": null,
//!   "resource_units": null,
//!   "resource_bandwidth_hz": null,
//!   "solver": null
//! }
//! ```
//!
//! `users[i]` lists the global user indices served by cell `i`; `gains` has
//! one row per cell and one column per global user; `demands` holds the
//! per-user minimum rates in nats (strictly positive). Optional fields:
//! per-cell `power_cap` in watts, display-only resource metadata (`M`
//! resource units of `B` Hz each — the rates are already normalized, the
//! solver never reads these), and solver parameter defaults.
//!
//! # Importing measured gain data
//!
//! External channel-gain datasets (for example the public Berlin
//! measurement grid) are not bundled. To import one, assemble the dense
//! cell-by-user gain matrix in linear scale, the per-cell user index lists,
//! a noise power in watts per resource unit, and per-user demands in nats,
//! then build the file with [`ScenarioFile::from_parts`] — it runs the full
//! validation and reports offending cell/user coordinates.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Network, RateVector};
use crate::power_solver::IapMode;
use crate::rng::SplitMix64;

/// Current on-disk schema version.
pub const SCENARIO_VERSION: u32 = 1;

/// Raw scenario file contents; validate into a [`Scenario`] before solving.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub version: u32,
    pub cells: usize,
    pub users: Vec<Vec<usize>>,
    pub gains: Vec<Vec<f64>>,
    pub noise_power: f64,
    pub demands: Vec<f64>,
    #[serde(default)]
    pub power_cap: Option<Vec<f64>>,
    /// Display metadata: number of resource units `M`. Never consumed by
    /// solvers; rates on disk are already normalized.
    #[serde(default)]
    pub resource_units: Option<f64>,
    /// Display metadata: bandwidth per resource unit `B` in Hz.
    #[serde(default)]
    pub resource_bandwidth_hz: Option<f64>,
    #[serde(default)]
    pub solver: Option<SolverDefaults>,
}

/// Optional solver parameter overrides carried by a scenario file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverDefaults {
    #[serde(default)]
    pub outer_tol: Option<f64>,
    #[serde(default)]
    pub inner_tol: Option<f64>,
    #[serde(default)]
    pub load_tol: Option<f64>,
    #[serde(default)]
    pub max_outer: Option<usize>,
    #[serde(default)]
    pub divergence_power: Option<f64>,
    #[serde(default)]
    pub mode: Option<IapMode>,
}

/// Validated in-memory scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub network: Network,
    pub demands: RateVector,
    pub power_cap: Option<Vec<f64>>,
    pub solver: SolverDefaults,
    pub resource_units: Option<f64>,
    pub resource_bandwidth_hz: Option<f64>,
}

impl ScenarioFile {
    /// Assembles and validates a scenario from raw matrices — the entry
    /// point for converting external gain datasets.
    pub fn from_parts(
        users: Vec<Vec<usize>>,
        gains: Vec<Vec<f64>>,
        noise_power: f64,
        demands: Vec<f64>,
        power_cap: Option<Vec<f64>>,
    ) -> Result<Self> {
        let file = ScenarioFile {
            version: SCENARIO_VERSION,
            cells: users.len(),
            users,
            gains,
            noise_power,
            demands,
            power_cap,
            resource_units: None,
            resource_bandwidth_hz: None,
            solver: None,
        };
        file.validate()?;
        Ok(file)
    }

    /// Checks every invariant and builds the in-memory scenario.
    pub fn validate(&self) -> Result<Scenario> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::UnsupportedVersion {
                found: self.version,
                expected: SCENARIO_VERSION,
            });
        }
        if self.cells != self.users.len() {
            return Err(Error::LengthMismatch {
                what: "cells field vs. user lists",
                expected: self.users.len(),
                found: self.cells,
            });
        }
        let network = Network::new(self.users.clone(), self.gains.clone(), self.noise_power)?;
        if self.demands.len() != network.num_users() {
            return Err(Error::LengthMismatch {
                what: "demands",
                expected: network.num_users(),
                found: self.demands.len(),
            });
        }
        for (user, &d) in self.demands.iter().enumerate() {
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::InvalidEntry {
                    what: "demand",
                    index: user,
                    value: d,
                    requirement: "must be finite and strictly positive",
                });
            }
        }
        let demands = RateVector::new(self.demands.clone())?;
        if let Some(caps) = &self.power_cap {
            if caps.len() != network.cells() {
                return Err(Error::LengthMismatch {
                    what: "power_cap",
                    expected: network.cells(),
                    found: caps.len(),
                });
            }
            for (cell, &c) in caps.iter().enumerate() {
                if !c.is_finite() || c <= 0.0 {
                    return Err(Error::InvalidEntry {
                        what: "power_cap",
                        index: cell,
                        value: c,
                        requirement: "must be finite and strictly positive",
                    });
                }
            }
        }
        for (name, value) in [
            ("resource_units", self.resource_units),
            ("resource_bandwidth_hz", self.resource_bandwidth_hz),
        ] {
            if let Some(v) = value {
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::InvalidParameter {
                        what: name,
                        value: v,
                        requirement: "must be finite and strictly positive",
                    });
                }
            }
        }
        Ok(Scenario {
            network,
            demands,
            power_cap: self.power_cap.clone(),
            solver: self.solver.clone().unwrap_or_default(),
            resource_units: self.resource_units,
            resource_bandwidth_hz: self.resource_bandwidth_hz,
        })
    }

    /// Canonical text rendering: pretty JSON with a trailing newline.
    pub fn to_canonical_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serialization");
        s.push('\n');
        s
    }
}

/// Reads a scenario file without validating it.
pub fn read_scenario_file(path: impl AsRef<Path>) -> Result<ScenarioFile> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.display().to_string(),
        source,
    })
}

/// Reads and validates a scenario.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    read_scenario_file(path)?.validate()
}

/// Writes a scenario in the canonical text encoding.
pub fn save_scenario(path: impl AsRef<Path>, file: &ScenarioFile) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, file.to_canonical_string()).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parameters for the synthetic grid generator.
///
/// Cells sit at the centers of squares on a `ceil(sqrt(cells))`-wide grid
/// with the given spacing; each cell's users land uniformly inside its
/// square. Gains follow `reference_gain * distance^-pathloss_exponent` with
/// distances clamped below 1 m. Every user carries the same demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub cells: usize,
    pub users_per_cell: usize,
    /// Cell grid spacing in meters.
    pub spacing_m: f64,
    pub pathloss_exponent: f64,
    /// Gain at 1 m (linear).
    pub reference_gain: f64,
    pub noise_power: f64,
    /// Uniform per-user demand in nats.
    pub demand_nats: f64,
    pub rng_seed: u64,
}

/// Generates a synthetic scenario; a pure function of the spec, seed
/// included.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<ScenarioFile> {
    if spec.cells == 0 {
        return Err(Error::InvalidParameter {
            what: "cells",
            value: 0.0,
            requirement: "must be at least 1",
        });
    }
    if spec.users_per_cell == 0 {
        return Err(Error::InvalidParameter {
            what: "users_per_cell",
            value: 0.0,
            requirement: "must be at least 1",
        });
    }
    for (name, value, req) in [
        ("spacing_m", spec.spacing_m, "must be strictly positive"),
        (
            "pathloss_exponent",
            spec.pathloss_exponent,
            "must be strictly positive",
        ),
        (
            "reference_gain",
            spec.reference_gain,
            "must be strictly positive",
        ),
        ("noise_power", spec.noise_power, "must be strictly positive"),
        ("demand_nats", spec.demand_nats, "must be strictly positive"),
    ] {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::InvalidParameter {
                what: name,
                value,
                requirement: req,
            });
        }
    }

    let n = spec.cells;
    let side = (n as f64).sqrt().ceil() as usize;
    let s = spec.spacing_m;
    let stations: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let col = (k % side) as f64;
            let row = (k / side) as f64;
            ((col + 0.5) * s, (row + 0.5) * s)
        })
        .collect();

    let mut rng = SplitMix64::new(spec.rng_seed);
    let mut positions = Vec::with_capacity(n * spec.users_per_cell);
    let mut users = Vec::with_capacity(n);
    for k in 0..n {
        let col = (k % side) as f64;
        let row = (k / side) as f64;
        let mut served = Vec::with_capacity(spec.users_per_cell);
        for _ in 0..spec.users_per_cell {
            let ux = (col + rng.next_f64()) * s;
            let uy = (row + rng.next_f64()) * s;
            served.push(positions.len());
            positions.push((ux, uy));
        }
        users.push(served);
    }

    let gains: Vec<Vec<f64>> = stations
        .iter()
        .map(|&(bx, by)| {
            positions
                .iter()
                .map(|&(ux, uy)| {
                    let d = ((bx - ux).powi(2) + (by - uy).powi(2)).sqrt().max(1.0);
                    spec.reference_gain * d.powf(-spec.pathloss_exponent)
                })
                .collect()
        })
        .collect();

    let demands = vec![spec.demand_nats; n * spec.users_per_cell];
    ScenarioFile::from_parts(users, gains, spec.noise_power, demands, None)
}
