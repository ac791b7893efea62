//! Speed selection for the circling UAV.
//!
//! With the schedule and allocation fixed, the only trajectory freedom is
//! the speed, and the switch-point constraint limits it to a finite set.
//! The per-user throughput is written in polar form around the initial
//! circle, `d^2 = lambda + sigma cos(phi_n + psi)`, where `phi_n` is the
//! UAV's phase in slot `n` and `psi` the user's polar angle. Successive
//! convex approximation is run on the auxiliary variables
//! `X = cos(phi_n + psi)`, and the speed is then recovered by scoring every
//! feasible speed on the exact objective.

use std::f64::consts::LN_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    sample_trajectory, slot_phase, GeometryError, TrajectoryPlan, TrajectorySamples,
};
use crate::grid::Grid;
use crate::mobility::UserTrack;
use crate::scenario::ScenarioConfig;

/// Relative slack on the per-slot rate floor when checking a speed.
pub const QOS_SLACK: f64 = 1e-9;
const SCA_TOL: f64 = 1e-6;
const SCA_MAX_ITERATIONS: usize = 30;

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("the plan has no feasible speed")]
    EmptyFeasibleSet,
    #[error("rate floor unreachable for user {user} in slot {slot} at any position")]
    ScaInfeasible { user: usize, slot: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Per-entry constants of the polar throughput model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarChannelConstants {
    /// `alpha * b` (Hz).
    pub theta_w: Grid,
    /// `rho0 p / (N0 b)` (m^2).
    pub chi: Grid,
    /// `H^2 + r^2 + x^2 + y^2` (m^2).
    pub lam: Grid,
    /// `2 r sqrt(x^2 + y^2)` (m^2).
    pub sig: Grid,
    /// User polar angle `atan2(y, x)` in the plan frame (rad).
    pub phase: Grid,
    /// Bandwidth, for the per-slot rate floor (Hz).
    pub b: Grid,
    /// `alpha * gamma_th` (bit/s).
    pub floor: Grid,
    pub radius: f64,
    pub slot_length: f64,
}

impl PolarChannelConstants {
    pub fn users(&self) -> usize {
        self.lam.rows()
    }

    pub fn slots(&self) -> usize {
        self.lam.cols()
    }

    /// `X_k[n]` for a given speed.
    pub fn auxiliary(&self, speed: f64) -> Grid {
        let (users, slots) = self.lam.shape();
        Grid::from_fn(users, slots, |k, n| {
            (slot_phase(speed, self.slot_length, self.radius, n) + self.phase.get(k, n)).cos()
        })
    }

    /// `F(X) = log2(chi + lam + sig X) - log2(lam + sig X)`.
    pub fn f_exact(&self, k: usize, n: usize, x: f64) -> f64 {
        let d2 = self.lam.get(k, n) + self.sig.get(k, n) * x;
        (self.chi.get(k, n) / d2).ln_1p() / LN_2
    }
}

/// Polar constants for users positioned relative to the plan's initial
/// circle. Entries without bandwidth carry `chi = 0` and zero weight.
pub fn polar_constants(
    plan: &TrajectoryPlan,
    track: &UserTrack,
    alpha: &Grid,
    b: &Grid,
    p: &Grid,
    config: &ScenarioConfig,
) -> PolarChannelConstants {
    let (users, slots) = (track.users(), track.slots());
    let r = plan.radius();
    let h2 = config.altitude * config.altitude;
    let centre = plan.circle_initial.center;
    let local = |k: usize, n: usize| plan.frame.to_local(track.position(k, n)) - centre;
    PolarChannelConstants {
        theta_w: Grid::from_fn(users, slots, |k, n| alpha.get(k, n) * b.get(k, n)),
        chi: Grid::from_fn(users, slots, |k, n| {
            let bk = b.get(k, n);
            if bk > 0.0 {
                config.rho0 * p.get(k, n) / (config.noise_psd * bk)
            } else {
                0.0
            }
        }),
        lam: Grid::from_fn(users, slots, |k, n| h2 + r * r + local(k, n).norm_squared()),
        sig: Grid::from_fn(users, slots, |k, n| 2.0 * r * local(k, n).norm()),
        phase: Grid::from_fn(users, slots, |k, n| {
            let s = local(k, n);
            s.y.atan2(s.x)
        }),
        b: b.clone(),
        floor: alpha.map(|a| a * config.rate_threshold),
        radius: r,
        slot_length: config.slot_length,
    }
}

/// Average throughput of every user when flying at `speed`.
pub fn throughput_of_velocity(speed: f64, consts: &PolarChannelConstants) -> Vec<f64> {
    let x = consts.auxiliary(speed);
    per_user_average(consts, |k, n| consts.f_exact(k, n, x.get(k, n)))
}

fn per_user_average(consts: &PolarChannelConstants, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let (users, slots) = consts.lam.shape();
    (0..users)
        .map(|k| {
            (0..slots)
                .filter(|&n| consts.theta_w.get(k, n) > 0.0)
                .map(|n| consts.theta_w.get(k, n) * f(k, n))
                .sum::<f64>()
                / slots as f64
        })
        .collect()
}

/// Whether every entry meets its rate floor at `speed`.
pub fn meets_rate_floor(speed: f64, consts: &PolarChannelConstants) -> bool {
    let x = consts.auxiliary(speed);
    let (users, slots) = consts.lam.shape();
    (0..users).all(|k| {
        (0..slots).all(|n| {
            let floor = consts.floor.get(k, n);
            floor <= 0.0
                || consts.b.get(k, n) * consts.f_exact(k, n, x.get(k, n))
                    >= floor * (1.0 - QOS_SLACK)
        })
    })
}

/// First-order lower bound of `F` around `x_local`: the concave first log
/// kept exact, the second linearised.
pub fn sca_entry(consts: &PolarChannelConstants, k: usize, n: usize, x: f64, x_local: f64) -> f64 {
    let (chi, lam, sig) = (
        consts.chi.get(k, n),
        consts.lam.get(k, n),
        consts.sig.get(k, n),
    );
    let at_local = lam + sig * x_local;
    assert!(
        at_local > 0.0 && lam + sig * x > 0.0,
        "log argument must stay positive"
    );
    let f1 = (chi + lam + sig * x).ln() / LN_2;
    let f2 = at_local.ln() / LN_2 + sig / (at_local * LN_2) * (x - x_local);
    f1 - f2
}

pub fn sca_lower_bound(x: &Grid, x_local: &Grid, consts: &PolarChannelConstants) -> Grid {
    Grid::from_fn(x.rows(), x.cols(), |k, n| {
        sca_entry(consts, k, n, x.get(k, n), x_local.get(k, n))
    })
}

/// Maximiser of the lower bound in one entry, `clamp(X_l - chi / sigma)`.
///
/// Setting the derivative `sigma / (chi + lam + sigma X) - sigma / (lam +
/// sigma X_l)` to zero gives the stationary point; the bound is concave, so
/// clamping to the box is exact. With `sigma = 0` the bound is flat and the
/// local point is kept.
pub fn sca_entry_argmax(consts: &PolarChannelConstants, k: usize, n: usize, x_local: f64) -> f64 {
    let sig = consts.sig.get(k, n);
    if sig <= 0.0 {
        return x_local;
    }
    (x_local - consts.chi.get(k, n) / sig).clamp(-1.0, 1.0)
}

/// Solves the convexified subproblem. The max-min objective is separable
/// over users (each `X_k[n]` only enters user `k`'s average), so each entry
/// is maximised on its own; the rate floor only has to be checked at that
/// maximiser because it is a superlevel set of the same concave bound.
pub fn solve_sca_subproblem(
    x_local: &Grid,
    consts: &PolarChannelConstants,
) -> Result<(Grid, f64), TrajectoryError> {
    let (users, slots) = consts.lam.shape();
    let x = Grid::from_fn(users, slots, |k, n| {
        sca_entry_argmax(consts, k, n, x_local.get(k, n))
    });
    for k in 0..users {
        for n in 0..slots {
            let floor = consts.floor.get(k, n);
            if floor > 0.0 {
                let best =
                    consts.b.get(k, n) * sca_entry(consts, k, n, x.get(k, n), x_local.get(k, n));
                if best < floor * (1.0 - QOS_SLACK) {
                    return Err(TrajectoryError::ScaInfeasible { user: k, slot: n });
                }
            }
        }
    }
    let value = per_user_average(consts, |k, n| {
        sca_entry(consts, k, n, x.get(k, n), x_local.get(k, n))
    })
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    Ok((x, value))
}

/// Result of scoring the feasible speeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityChoice {
    pub speed: f64,
    pub laps: u32,
    /// Minimum average throughput at `speed` (bit/s).
    pub eta: f64,
    /// False when no speed met every rate floor and the best objective was
    /// taken instead.
    pub qos_feasible: bool,
}

/// Exhaustive search over the feasible speeds. The best speed meeting every
/// rate floor wins; ties go to the smaller speed.
pub fn enumerate_velocity_oracle(
    plan: &TrajectoryPlan,
    consts: &PolarChannelConstants,
) -> Result<VelocityChoice, TrajectoryError> {
    if plan.feasible_velocities.is_empty() {
        return Err(TrajectoryError::EmptyFeasibleSet);
    }
    let mut best_feasible: Option<VelocityChoice> = None;
    let mut best_any: Option<VelocityChoice> = None;
    for fv in &plan.feasible_velocities {
        let eta = throughput_of_velocity(fv.speed, consts)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let ok = meets_rate_floor(fv.speed, consts);
        let choice = VelocityChoice {
            speed: fv.speed,
            laps: fv.laps,
            eta,
            qos_feasible: ok,
        };
        if best_any.as_ref().is_none_or(|b| eta > b.eta) {
            best_any = Some(choice.clone());
        }
        if ok && best_feasible.as_ref().is_none_or(|b| eta > b.eta) {
            best_feasible = Some(choice);
        }
    }
    Ok(best_feasible.or(best_any).expect("non-empty set"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaTraceRow {
    pub iteration: usize,
    pub objective: f64,
}

/// Outcome of the trajectory block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutcome {
    pub choice: VelocityChoice,
    pub samples: TrajectorySamples,
    /// Speed whose auxiliary variables lie closest to the SCA solution;
    /// `None` when the SCA subproblem was infeasible.
    pub nearest_to_sca: Option<f64>,
    pub sca_trace: Vec<ScaTraceRow>,
}

impl TrajectoryOutcome {
    /// SCA trace as CSV `iteration,objective`.
    pub fn sca_csv(&self) -> String {
        let mut s = String::from("iteration,objective\n");
        for r in &self.sca_trace {
            let _ = writeln!(s, "{},{}", r.iteration, r.objective);
        }
        s
    }
}

/// Runs SCA from the incumbent speed (or the slowest feasible one) and
/// recovers the speed by exact enumeration.
pub fn optimize_trajectory(
    plan: &TrajectoryPlan,
    alpha: &Grid,
    b: &Grid,
    p: &Grid,
    track: &UserTrack,
    config: &ScenarioConfig,
    incumbent: Option<f64>,
) -> Result<TrajectoryOutcome, TrajectoryError> {
    if plan.feasible_velocities.is_empty() {
        return Err(TrajectoryError::EmptyFeasibleSet);
    }
    let consts = polar_constants(plan, track, alpha, b, p, config);
    let start = incumbent.unwrap_or_else(|| plan.smallest_speed());

    let mut trace = Vec::new();
    let mut x_local = consts.auxiliary(start);
    let mut sca_solution = None;
    let mut previous = f64::NAN;
    for iteration in 0..SCA_MAX_ITERATIONS {
        match solve_sca_subproblem(&x_local, &consts) {
            Ok((x, value)) => {
                trace.push(ScaTraceRow {
                    iteration,
                    objective: value,
                });
                let done = previous.is_finite()
                    && (value - previous).abs() <= SCA_TOL * previous.abs().max(1e-300);
                previous = value;
                x_local = x.clone();
                sca_solution = Some(x);
                if done {
                    break;
                }
            }
            Err(_) => {
                sca_solution = None;
                break;
            }
        }
    }
    let nearest_to_sca = sca_solution.map(|x_star| {
        let mut best = (f64::INFINITY, plan.smallest_speed());
        for fv in &plan.feasible_velocities {
            let x = consts.auxiliary(fv.speed);
            let dist: f64 = x
                .as_slice()
                .iter()
                .zip(x_star.as_slice())
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            if dist < best.0 {
                best = (dist, fv.speed);
            }
        }
        best.1
    });

    let choice = enumerate_velocity_oracle(plan, &consts)?;
    let samples = sample_trajectory(plan, choice.speed, config)?;
    Ok(TrajectoryOutcome {
        choice,
        samples,
        nearest_to_sca,
        sca_trace: trace,
    })
}
