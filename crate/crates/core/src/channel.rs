//! Line-of-sight air-to-ground channel.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::TrajectorySamples;
use crate::grid::Grid;
use crate::mobility::UserTrack;
use crate::point::Point;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("shape mismatch: {what} is {got:?}, expected {expected:?}")]
    Shape {
        what: &'static str,
        got: (usize, usize),
        expected: (usize, usize),
    },
}

/// Per user and slot: distance, channel power gain and the gain normalised
/// by the noise density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    pub distance: Grid,
    pub gain: Grid,
    /// `rho0 / (N0 d^2)` in Hz/W.
    pub normalized: Grid,
}

impl ChannelGains {
    /// Builds gains from UAV positions and user positions per slot.
    pub fn from_positions(uav: &[Point], track: &UserTrack, config: &ScenarioConfig) -> Self {
        let (k, n) = (track.users(), track.slots());
        let h2 = config.altitude * config.altitude;
        let d2 = Grid::from_fn(k, n, |k, n| {
            h2 + (uav[n] - track.position(k, n)).norm_squared()
        });
        Self {
            distance: d2.map(f64::sqrt),
            gain: d2.map(|d2| config.rho0 / d2),
            normalized: d2.map(|d2| config.rho0 / (config.noise_psd * d2)),
        }
    }

    pub fn users(&self) -> usize {
        self.normalized.rows()
    }

    pub fn slots(&self) -> usize {
        self.normalized.cols()
    }

    /// Largest normalised gain over all users and slots.
    pub fn max_normalized(&self) -> f64 {
        self.normalized.max_abs()
    }
}

/// Distances, gains and normalised gains along a sampled trajectory.
pub fn compute_gains(
    samples: &TrajectorySamples,
    track: &UserTrack,
    config: &ScenarioConfig,
) -> Result<ChannelGains, ChannelError> {
    if samples.positions.len() != track.slots() {
        return Err(ChannelError::Shape {
            what: "trajectory",
            got: (1, samples.positions.len()),
            expected: (1, track.slots()),
        });
    }
    Ok(ChannelGains::from_positions(
        &samples.positions,
        track,
        config,
    ))
}

/// Shannon rate `b log2(1 + p g / b)`, zero at `b = 0`.
pub fn rate(b: f64, p: f64, g: f64) -> f64 {
    if b <= 0.0 {
        return 0.0;
    }
    b * (p * g / b).ln_1p() / std::f64::consts::LN_2
}

/// Rates for every user and slot.
pub fn rate_grid(b: &Grid, p: &Grid, gains: &ChannelGains) -> Grid {
    let g = &gains.normalized;
    Grid::from_fn(g.rows(), g.cols(), |k, n| {
        rate(b.get(k, n), p.get(k, n), g.get(k, n))
    })
}

fn check_shape(
    what: &'static str,
    grid: &Grid,
    expected: (usize, usize),
) -> Result<(), ChannelError> {
    if grid.shape() != expected {
        return Err(ChannelError::Shape {
            what,
            got: grid.shape(),
            expected,
        });
    }
    Ok(())
}

/// Time-averaged throughput of each user.
pub fn average_throughput(
    alpha: &Grid,
    b: &Grid,
    p: &Grid,
    gains: &ChannelGains,
) -> Result<Vec<f64>, ChannelError> {
    let shape = gains.normalized.shape();
    check_shape("alpha", alpha, shape)?;
    check_shape("bandwidth", b, shape)?;
    check_shape("power", p, shape)?;
    let (users, slots) = shape;
    Ok((0..users)
        .map(|k| {
            let total: f64 = (0..slots)
                .map(|n| {
                    alpha.get(k, n) * rate(b.get(k, n), p.get(k, n), gains.normalized.get(k, n))
                })
                .sum();
            total / slots as f64
        })
        .collect())
}
