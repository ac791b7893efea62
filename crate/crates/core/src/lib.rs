//! Joint user scheduling, bandwidth/power allocation and trajectory control
//! for a fixed-wing UAV base station serving a group of mobile ground users.
//!
//! The crate is organised bottom-up:
//!
//! - [`scenario`]: physical and algorithmic constants, key=value config files.
//! - [`mobility`]: seeded reference-point group mobility tracks.
//! - [`geometry`]: right-straight-right Dubins switching geometry, feasible
//!   lap-quantised speeds and slot-wise UAV positions.
//! - [`channel`]: line-of-sight gains, Shannon rates and average throughput.
//! - [`lp`]: a dense bounded-variable simplex solver.
//! - [`scheduling`]: the relaxed user-scheduling linear program.
//! - [`resources`]: bandwidth/power allocation by dual decomposition.
//! - [`trajectory`]: polar throughput model, successive convex approximation
//!   and exact velocity enumeration.
//! - [`orchestrator`]: the alternating outer loop, baselines and schemes.

pub mod channel;
pub mod geometry;
pub mod grid;
pub mod lp;
pub mod mobility;
pub mod orchestrator;
pub mod point;
pub mod resources;
pub mod scenario;
pub mod scheduling;
pub mod trajectory;

pub use channel::{average_throughput, compute_gains, rate, ChannelGains};
pub use geometry::{
    arc_length, build_plan, rsr_tangent, sample_trajectory, validate_trajectory, Circle,
    TangentSolution, TrajectoryPlan, TrajectorySamples,
};
pub use grid::Grid;
pub use lp::{solve_lp, LinearProgram, LpSolution, LpStatus, Relation};
pub use mobility::{generate_tracks, UserTrack};
pub use orchestrator::{
    algorithm1, run_baseline_trajectory, run_scheme, BaselineKind, RunError, RunResult, Scheme,
};
pub use point::Point;
pub use resources::{optimize_resources, AllocationState, DualLoopSettings, DualMultipliers};
pub use scenario::{default_config, load_config, ScenarioConfig};
pub use scheduling::{optimize_scheduling, SchedulingMatrix};
pub use trajectory::{enumerate_velocity_oracle, optimize_trajectory, PolarChannelConstants};
