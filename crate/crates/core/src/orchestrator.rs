//! The alternating outer loop, its baselines and the comparison schemes.
//!
//! Each outer iteration optimises the schedule, then bandwidth and power,
//! then the speed, each with the other two blocks held fixed, and
//! recomputes the channel gains along the new trajectory. Every block
//! starts from the incumbent, so the minimum throughput never decreases.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{average_throughput, ChannelGains};
use crate::geometry::{build_plan, sample_circle, u_turn_slots, TrajectoryPlan};
use crate::grid::Grid;
use crate::mobility::{generate_tracks, UserTrack};
use crate::point::Point;
use crate::resources::{optimize_resources_from, DualLoopSettings, DualTraceRow};
use crate::scenario::{ConfigError, ScenarioConfig};
use crate::scheduling::{optimize_scheduling_masked, qos_cap, SchedulingMatrix};
use crate::trajectory::{optimize_trajectory, ScaTraceRow};

/// Radius of the fixed circular baseline (m).
pub const BASELINE_CIRCLE_RADIUS: f64 = 600.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    Geometry,
    Scheduling,
    Resources,
    Trajectory,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Block::Geometry => "geometry",
            Block::Scheduling => "scheduling",
            Block::Resources => "resource allocation",
            Block::Trajectory => "trajectory",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("scenario infeasible in the {block} block (iteration {iteration}): {message}")]
    Infeasible {
        block: Block,
        iteration: usize,
        message: String,
    },
}

fn infeasible(block: Block, iteration: usize, e: impl fmt::Display) -> RunError {
    RunError::Infeasible {
        block,
        iteration,
        message: e.to_string(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Everything optimised.
    I,
    /// Random bandwidth and power; schedule and speed optimised.
    II,
    /// Random schedule, bandwidth and power; speed optimised.
    III,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    Optimized,
    /// Circle of radius 600 m about the mean group centre at `V_min`.
    Circular600,
    /// Back and forth between the first and last group centre at `V_max`.
    Straight,
}

/// One outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub eta_scheduling: f64,
    pub eta_resources: f64,
    pub eta_trajectory: f64,
    pub speed: f64,
    pub wallclock_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub label: String,
    /// Minimum average throughput (bit/s).
    pub eta_final: f64,
    /// Average throughput per user (bit/s).
    pub per_user_throughput: Vec<f64>,
    pub alpha: Grid,
    /// Bandwidth (Hz), users by slots.
    pub b: Grid,
    /// Power (W), users by slots.
    pub p: Grid,
    /// UAV speed (m/s).
    pub v_final: f64,
    /// Minimum throughput at the starting point (bit/s).
    pub eta_initial: f64,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
    pub iterations: usize,
    pub plan: Option<TrajectoryPlan>,
    /// UAV position per slot (m).
    pub uav: Vec<Point>,
    #[serde(skip)]
    pub track: Option<UserTrack>,
    #[serde(skip)]
    pub dual_trace: Vec<DualTraceRow>,
    #[serde(skip)]
    pub sca_trace: Vec<ScaTraceRow>,
}

impl RunResult {
    /// `l,eta_sched,eta_res,eta_traj,v` per outer iteration.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("l,eta_sched,eta_res,eta_traj,v\n");
        for r in &self.trace {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.iteration, r.eta_scheduling, r.eta_resources, r.eta_trajectory, r.speed
            ));
        }
        s
    }
}

enum TrajectoryMode<'a> {
    Optimized(&'a TrajectoryPlan),
    Fixed {
        uav: Vec<Point>,
        blocked: Vec<bool>,
        speed: f64,
    },
}

enum AllocationMode {
    Optimized,
    Fixed,
}

struct LoopSetup<'a> {
    label: String,
    trajectory: TrajectoryMode<'a>,
    schedule_fixed: Option<Grid>,
    allocation: AllocationMode,
    b0: Grid,
    p0: Grid,
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn run_loop(
    config: &ScenarioConfig,
    track: &UserTrack,
    setup: LoopSetup<'_>,
) -> Result<RunResult, RunError> {
    let (users, slots) = (track.users(), track.slots());
    let settings = DualLoopSettings::from_config(config);
    let (mut speed, mut uav, blocked, plan) = match &setup.trajectory {
        TrajectoryMode::Optimized(plan) => {
            let v = plan.smallest_speed();
            let s = crate::geometry::sample_trajectory(plan, v, config)
                .map_err(|e| infeasible(Block::Geometry, 0, e))?;
            (v, s.positions, vec![false; slots], Some((*plan).clone()))
        }
        TrajectoryMode::Fixed {
            uav,
            blocked,
            speed,
        } => (*speed, uav.clone(), blocked.clone(), None),
    };
    let mut gains = ChannelGains::from_positions(&uav, track, config);
    let mut alpha = match &setup.schedule_fixed {
        Some(a) => a.clone(),
        None => Grid::from_fn(users, slots, |_, n| if blocked[n] { 0.0 } else { 1.0 }),
    };
    let mut b = setup.b0.clone();
    let mut p = setup.p0.clone();
    let eta_initial = min_of(&average_throughput(&alpha, &b, &p, &gains).expect("shapes"));
    let mut eta_prev = eta_initial;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut dual_trace = Vec::new();
    let mut sca_trace = Vec::new();
    let started = Instant::now();

    for iteration in 1..=config.max_iterations.max(1) {
        // schedule
        let eta_s = match &setup.schedule_fixed {
            Some(_) => min_of(&average_throughput(&alpha, &b, &p, &gains).expect("shapes")),
            None => {
                let (s, eta) = optimize_scheduling_masked(&b, &p, &gains, config, Some(&blocked))
                    .map_err(|e| infeasible(Block::Scheduling, iteration, e))?;
                alpha = s.alpha;
                eta
            }
        };
        // bandwidth and power
        let eta_r = match setup.allocation {
            AllocationMode::Fixed => eta_s,
            AllocationMode::Optimized => {
                let schedule = SchedulingMatrix {
                    alpha: alpha.clone(),
                };
                let state =
                    optimize_resources_from(&schedule, &gains, config, &settings, Some((&b, &p)))
                        .map_err(|e| infeasible(Block::Resources, iteration, e))?;
                dual_trace = state.trace;
                if state.eta >= eta_s {
                    b = state.b;
                    p = state.p;
                    state.eta
                } else {
                    eta_s
                }
            }
        };
        // speed
        let eta_t = match &setup.trajectory {
            TrajectoryMode::Fixed { .. } => eta_r,
            TrajectoryMode::Optimized(plan) => {
                let out = optimize_trajectory(plan, &alpha, &b, &p, track, config, Some(speed))
                    .map_err(|e| infeasible(Block::Trajectory, iteration, e))?;
                sca_trace = out.sca_trace;
                speed = out.choice.speed;
                uav = out.samples.positions;
                gains = ChannelGains::from_positions(&uav, track, config);
                min_of(&average_throughput(&alpha, &b, &p, &gains).expect("shapes"))
            }
        };
        trace.push(IterationRecord {
            iteration,
            eta_scheduling: eta_s,
            eta_resources: eta_r,
            eta_trajectory: eta_t,
            speed,
            wallclock_s: started.elapsed().as_secs_f64(),
        });
        let delta = (eta_t - eta_prev).abs();
        eta_prev = eta_t;
        if delta <= config.epsilon {
            converged = true;
            break;
        }
    }

    let per_user = average_throughput(&alpha, &b, &p, &gains).expect("shapes");
    Ok(RunResult {
        label: setup.label,
        eta_final: min_of(&per_user),
        per_user_throughput: per_user,
        alpha,
        b,
        p,
        v_final: speed,
        eta_initial,
        iterations: trace.len(),
        trace,
        converged,
        plan,
        uav,
        track: Some(track.clone()),
        dual_trace,
        sca_trace,
    })
}

fn even_split(config: &ScenarioConfig, users: usize, slots: usize) -> (Grid, Grid) {
    let kf = users as f64;
    (
        Grid::filled(users, slots, config.bandwidth_max / kf),
        Grid::filled(users, slots, config.power_max / kf),
    )
}

fn scheme_rng(config: &ScenarioConfig, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1 << 32 | stream);
    rng
}

/// Uniform split of each slot's budgets over the users (flat Dirichlet,
/// drawn as normalised exponentials).
pub fn random_split(config: &ScenarioConfig, users: usize, slots: usize) -> (Grid, Grid) {
    let mut rng = scheme_rng(config, 1);
    let mut b = Grid::zeros(users, slots);
    let mut p = Grid::zeros(users, slots);
    for (grid, budget) in [(&mut b, config.bandwidth_max), (&mut p, config.power_max)] {
        for n in 0..slots {
            let w: Vec<f64> = (0..users).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let total: f64 = w.iter().sum();
            for (k, wk) in w.iter().enumerate() {
                grid.set(k, n, budget * wk / total);
            }
        }
    }
    (b, p)
}

/// Track, plan and the full alternating optimisation.
pub fn algorithm1(config: &ScenarioConfig) -> Result<RunResult, RunError> {
    run_scheme(config, Scheme::I)
}

fn prepare(config: &ScenarioConfig) -> Result<(UserTrack, TrajectoryPlan), RunError> {
    config.validate()?;
    let track = generate_tracks(config);
    let plan = build_plan(&track, config).map_err(|e| infeasible(Block::Geometry, 0, e))?;
    Ok((track, plan))
}

/// Runs one of the comparison schemes on the seeded scenario.
pub fn run_scheme(config: &ScenarioConfig, scheme: Scheme) -> Result<RunResult, RunError> {
    let (track, plan) = prepare(config)?;
    run_scheme_on(config, &track, &plan, scheme)
}

pub fn run_scheme_on(
    config: &ScenarioConfig,
    track: &UserTrack,
    plan: &TrajectoryPlan,
    scheme: Scheme,
) -> Result<RunResult, RunError> {
    let (users, slots) = (track.users(), track.slots());
    let setup = match scheme {
        Scheme::I => {
            let (b0, p0) = even_split(config, users, slots);
            LoopSetup {
                label: "scheme1".into(),
                trajectory: TrajectoryMode::Optimized(plan),
                schedule_fixed: None,
                allocation: AllocationMode::Optimized,
                b0,
                p0,
            }
        }
        Scheme::II => {
            let (b0, p0) = random_split(config, users, slots);
            LoopSetup {
                label: "scheme2".into(),
                trajectory: TrajectoryMode::Optimized(plan),
                schedule_fixed: None,
                allocation: AllocationMode::Fixed,
                b0,
                p0,
            }
        }
        Scheme::III => {
            let (b0, p0) = random_split(config, users, slots);
            let uav = crate::geometry::sample_trajectory(plan, plan.smallest_speed(), config)
                .map_err(|e| infeasible(Block::Geometry, 0, e))?;
            let gains = ChannelGains::from_positions(&uav.positions, track, config);
            let rates = crate::channel::rate_grid(&b0, &p0, &gains);
            let mut rng = scheme_rng(config, 2);
            let alpha = Grid::from_fn(users, slots, |k, n| {
                rng.gen::<f64>() * qos_cap(rates.get(k, n), config.rate_threshold)
            });
            LoopSetup {
                label: "scheme3".into(),
                trajectory: TrajectoryMode::Optimized(plan),
                schedule_fixed: Some(alpha),
                allocation: AllocationMode::Fixed,
                b0,
                p0,
            }
        }
    };
    run_loop(config, track, setup)
}

/// Position along the straight back-and-forth path at time `t`, and whether
/// the UAV is turning (no service) at that moment.
pub fn straight_position(a: Point, b: Point, speed: f64, turn_time: f64, t: f64) -> (Point, bool) {
    let length = a.distance(b);
    if length <= 1e-6 {
        return (a, false);
    }
    let leg = length / speed;
    let cycle = 2.0 * (leg + turn_time);
    let tau = t.rem_euclid(cycle);
    if tau < leg {
        (a + (b - a) * (tau / leg), false)
    } else if tau < leg + turn_time {
        (b, true)
    } else if tau < 2.0 * leg + turn_time {
        let s = (tau - leg - turn_time) / leg;
        (b + (a - b) * s, false)
    } else {
        (a, true)
    }
}

/// Runs scheduling and allocation along one of the reference trajectories.
pub fn run_baseline_trajectory(
    config: &ScenarioConfig,
    kind: BaselineKind,
) -> Result<RunResult, RunError> {
    let (track, plan) = prepare(config)?;
    run_baseline_on(config, &track, &plan, kind)
}

pub fn run_baseline_on(
    config: &ScenarioConfig,
    track: &UserTrack,
    plan: &TrajectoryPlan,
    kind: BaselineKind,
) -> Result<RunResult, RunError> {
    let (users, slots) = (track.users(), track.slots());
    let (b0, p0) = even_split(config, users, slots);
    let (label, trajectory) = match kind {
        BaselineKind::Optimized => ("optimized", TrajectoryMode::Optimized(plan)),
        BaselineKind::Circular600 => {
            let centre = Point::mean(track.centroids.iter().copied());
            let uav = sample_circle(
                centre,
                BASELINE_CIRCLE_RADIUS,
                config.speed_min,
                slots,
                config.slot_length,
            );
            (
                "circular600",
                TrajectoryMode::Fixed {
                    uav,
                    blocked: vec![false; slots],
                    speed: config.speed_min,
                },
            )
        }
        BaselineKind::Straight => {
            let (a, b) = (track.centroids[0], track.centroids[slots - 1]);
            let turn = u_turn_slots(config) as f64 * config.slot_length;
            let (uav, blocked) = (0..slots)
                .map(|n| {
                    straight_position(a, b, config.speed_max, turn, n as f64 * config.slot_length)
                })
                .unzip();
            (
                "straight",
                TrajectoryMode::Fixed {
                    uav,
                    blocked,
                    speed: config.speed_max,
                },
            )
        }
    };
    run_loop(
        config,
        track,
        LoopSetup {
            label: label.into(),
            trajectory,
            schedule_fixed: None,
            allocation: AllocationMode::Optimized,
            b0,
            p0,
        },
    )
}

/// Upper bound on any achievable minimum throughput: one user with the
/// whole bandwidth and power at the best gain.
pub fn throughput_ceiling(config: &ScenarioConfig, gains: &ChannelGains) -> f64 {
    crate::channel::rate(
        config.bandwidth_max,
        config.power_max,
        gains.max_normalized(),
    )
}
