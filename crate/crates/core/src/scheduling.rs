//! Relaxed user scheduling for fixed bandwidth, power and trajectory.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{rate_grid, ChannelGains};
use crate::grid::Grid;
use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus, Relation};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Error, PartialEq)]
pub enum SchedulingError {
    #[error("scheduling program is {status:?}")]
    Infeasible { status: LpStatus },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("shape mismatch: got {got:?}, expected {expected:?}")]
    Shape {
        got: (usize, usize),
        expected: (usize, usize),
    },
}

/// Relaxed scheduling variables in `[0, 1]`, users by slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulingMatrix {
    pub alpha: Grid,
}

impl SchedulingMatrix {
    pub fn full(users: usize, slots: usize) -> Self {
        Self {
            alpha: Grid::filled(users, slots, 1.0),
        }
    }

    /// Threshold at 0.5, for display only.
    pub fn rounded(&self) -> Grid {
        self.alpha.map(|a| if a >= 0.5 { 1.0 } else { 0.0 })
    }

    /// Largest relative overshoot of the per-slot bandwidth and power
    /// budgets, and whether every entry lies in `[0, 1]`.
    pub fn budget_excess(&self, b: &Grid, p: &Grid, config: &ScenarioConfig) -> (f64, f64, bool) {
        let (users, slots) = self.alpha.shape();
        let mut worst_b = f64::NEG_INFINITY;
        let mut worst_p = f64::NEG_INFINITY;
        for n in 0..slots {
            let (mut sb, mut sp) = (0.0, 0.0);
            for k in 0..users {
                sb += self.alpha.get(k, n) * b.get(k, n);
                sp += self.alpha.get(k, n) * p.get(k, n);
            }
            worst_b = worst_b.max(sb / config.bandwidth_max - 1.0);
            worst_p = worst_p.max(sp / config.power_max - 1.0);
        }
        let in_box = self
            .alpha
            .as_slice()
            .iter()
            .all(|a| (0.0..=1.0).contains(a));
        (worst_b, worst_p, in_box)
    }
}

/// Upper bound on each scheduling variable from the per-slot rate floor.
pub fn qos_cap(rate: f64, threshold: f64) -> f64 {
    if threshold <= 0.0 {
        1.0
    } else {
        (rate / threshold).min(1.0)
    }
}

/// Maximises the minimum average throughput over the relaxed schedule.
pub fn optimize_scheduling(
    b: &Grid,
    p: &Grid,
    gains: &ChannelGains,
    config: &ScenarioConfig,
) -> Result<(SchedulingMatrix, f64), SchedulingError> {
    optimize_scheduling_masked(b, p, gains, config, None)
}

/// As [`optimize_scheduling`], with slots where `blocked[n]` is true held at
/// zero.
pub fn optimize_scheduling_masked(
    b: &Grid,
    p: &Grid,
    gains: &ChannelGains,
    config: &ScenarioConfig,
    blocked: Option<&[bool]>,
) -> Result<(SchedulingMatrix, f64), SchedulingError> {
    let shape = gains.normalized.shape();
    for g in [b, p] {
        if g.shape() != shape {
            return Err(SchedulingError::Shape {
                got: g.shape(),
                expected: shape,
            });
        }
    }
    let (users, slots) = shape;
    let rates = rate_grid(b, p, gains);
    let var = |k: usize, n: usize| 1 + k * slots + n;
    let width = 1 + users * slots;

    let mut objective = vec![0.0; width];
    objective[0] = 1.0;
    let mut lp = LinearProgram::new(objective);
    for k in 0..users {
        for n in 0..slots {
            let cap = if blocked.is_some_and(|m| m[n]) {
                0.0
            } else {
                qos_cap(rates.get(k, n), config.rate_threshold)
            };
            lp.set_bounds(var(k, n), 0.0, cap.max(0.0));
        }
    }
    let inv_n = 1.0 / slots as f64;
    for k in 0..users {
        let mut row = vec![0.0; width];
        row[0] = -1.0;
        for n in 0..slots {
            row[var(k, n)] = rates.get(k, n) * inv_n;
        }
        lp.add_constraint(row, Relation::Ge, 0.0);
    }
    for (budget, alloc) in [(config.bandwidth_max, b), (config.power_max, p)] {
        for n in 0..slots {
            let mut row = vec![0.0; width];
            for k in 0..users {
                row[var(k, n)] = alloc.get(k, n);
            }
            lp.add_constraint(row, Relation::Le, budget);
        }
    }

    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(SchedulingError::Infeasible { status: sol.status });
    }
    let alpha = Grid::from_fn(users, slots, |k, n| {
        let (lo, hi) = lp.bounds[var(k, n)];
        sol.x[var(k, n)].clamp(lo, hi)
    });
    let eta = (0..users)
        .map(|k| {
            (0..slots)
                .map(|n| alpha.get(k, n) * rates.get(k, n))
                .sum::<f64>()
                * inv_n
        })
        .fold(f64::INFINITY, f64::min);
    Ok((SchedulingMatrix { alpha }, eta))
}
