//! Right-straight-right switching geometry for a fixed-wing UAV.
//!
//! The UAV circles clockwise around the initial group centre and may only
//! leave the circle at the tangent point of the external tangent towards the
//! final circle. Because the switch point is fixed, the speed is quantised:
//! the UAV must complete a whole number of extra laps during the period.
//!
//! Plans live in a local frame whose origin is the initial group centre and
//! whose +x axis points along the group displacement. In that frame the
//! tangent line always has both circle centres strictly below it. World
//! coordinates are recovered through [`Frame`].

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mobility::UserTrack;
use crate::point::Point;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("point ({x}, {y}) is {offset} m off the circle of radius {radius}")]
    PointOffCircle {
        x: f64,
        y: f64,
        offset: f64,
        radius: f64,
    },
    #[error("chord {chord} exceeds the diameter {diameter}")]
    ChordTooLong { chord: f64, diameter: f64 },
    #[error("no right-straight-right tangent: {0}")]
    NoValidTangent(String),
    #[error("radius {radius} is below the safe turning radius {safe}")]
    RadiusBelowSafe { radius: f64, safe: f64 },
    #[error("no lap count gives a speed within [{vmin}, {vmax}] m/s for period {period} s")]
    InfeasiblePlan { vmin: f64, vmax: f64, period: f64 },
    #[error("speed {0} m/s is not in the plan's feasible set")]
    SpeedNotFeasible(f64),
}

/// A turning circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: Point, radius: f64) -> Self {
        Self { center, radius }
    }

    /// Checks the radius against the minimum turning radius.
    pub fn checked(center: Point, radius: f64, safe_radius: f64) -> Result<Self, GeometryError> {
        if radius < safe_radius {
            return Err(GeometryError::RadiusBelowSafe {
                radius,
                safe: safe_radius,
            });
        }
        Ok(Self { center, radius })
    }
}

/// The tangent line `y = slope * x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentLine {
    pub slope: f64,
    pub intercept: f64,
}

impl TangentLine {
    /// Signed offset `y - slope*x - intercept`; negative below the line.
    pub fn side(&self, p: Point) -> f64 {
        p.y - self.slope * p.x - self.intercept
    }

    pub fn distance(&self, p: Point) -> f64 {
        self.side(p).abs() / (1.0 + self.slope * self.slope).sqrt()
    }
}

/// Where the UAV leaves the initial circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentSolution {
    /// `None` when the circles coincide and the UAV just keeps circling.
    pub line: Option<TangentLine>,
    /// Tangent point on the initial circle.
    pub point: Point,
    /// Clockwise angle from the start point `(x_c - r, y_c)` to the tangent
    /// point, in `[0, pi)`.
    pub theta: f64,
}

/// Minor-arc length between two points on a circle, from the chord by the
/// law of cosines.
pub fn arc_length(center: Point, a: Point, b: Point, radius: f64) -> Result<f64, GeometryError> {
    for p in [a, b] {
        let offset = (p.distance(center) - radius).abs();
        if offset > 1e-6 * radius {
            return Err(GeometryError::PointOffCircle {
                x: p.x,
                y: p.y,
                offset,
                radius,
            });
        }
    }
    let chord = a.distance(b);
    let diameter = 2.0 * radius;
    if chord > diameter * (1.0 + 1e-9) {
        return Err(GeometryError::ChordTooLong { chord, diameter });
    }
    let r2 = radius * radius;
    let cosine = ((2.0 * r2 - chord * chord) / (2.0 * r2)).clamp(-1.0, 1.0);
    Ok(radius * cosine.acos())
}

const DEGENERATE_OFFSET: f64 = 1e-6;

/// External right-straight-right tangent from `initial` to `fin`.
///
/// Solves the two tangency conditions for the line `y = A x + B` through the
/// external homothety centre, keeping the root with both centres below the
/// line and the direction of travel pointing from the initial towards the
/// final circle. The slope is then polished with Newton steps on the
/// difference of the two signed distance equations.
pub fn rsr_tangent(initial: Circle, fin: Circle) -> Result<TangentSolution, GeometryError> {
    let (ci, ri) = (initial.center, initial.radius);
    let (cf, rf) = (fin.center, fin.radius);
    let delta = cf - ci;
    let separation = delta.norm();

    if separation <= DEGENERATE_OFFSET {
        return Ok(TangentSolution {
            line: None,
            point: Point::new(ci.x - ri, ci.y),
            theta: 0.0,
        });
    }
    if separation < (ri - rf).abs() {
        return Err(GeometryError::NoValidTangent(format!(
            "one circle lies inside the other (centre distance {separation}, radii {ri}, {rf})"
        )));
    }

    let equal_radii = (ri - rf).abs() < 1e-9 * ri.max(rf);
    let candidates: Vec<f64> = if equal_radii {
        if delta.x.abs() <= 1e-12 * separation {
            vec![]
        } else {
            vec![delta.y / delta.x]
        }
    } else {
        // external homothety centre E; C = x_I - E_x, D = E_y - y_I
        let ex = (ci.x * rf - cf.x * ri) / (rf - ri);
        let ey = (ci.y * rf - cf.y * ri) / (rf - ri);
        let c = ci.x - ex;
        let d = ey - ci.y;
        let qa = c * c - ri * ri;
        let qb = 2.0 * c * d;
        let qc = d * d - ri * ri;
        if qa.abs() <= 1e-12 * (c * c + ri * ri) {
            // one tangent is vertical; the other solves the linear equation
            if qb == 0.0 {
                vec![]
            } else {
                vec![-qc / qb]
            }
        } else {
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
            let root = disc.sqrt();
            if root == 0.0 {
                vec![-qb / (2.0 * qa)]
            } else {
                vec![(-qb + root) / (2.0 * qa), (-qb - root) / (2.0 * qa)]
            }
        }
    };

    let intercept_for = |slope: f64| ci.y - slope * ci.x + ri * (1.0 + slope * slope).sqrt();
    // signed-distance mismatch of the final circle for a line tangent (from
    // above) to the initial circle
    let residual = |slope: f64| {
        let norm = (1.0 + slope * slope).sqrt();
        (slope * (cf.x - ci.x) - (cf.y - ci.y)) / norm - (rf - ri)
    };

    for slope in candidates {
        if !slope.is_finite() {
            continue;
        }
        let mut slope = slope;
        for _ in 0..4 {
            let f = residual(slope);
            let h = 1e-7 * (1.0 + slope.abs());
            let df = (residual(slope + h) - residual(slope - h)) / (2.0 * h);
            if df == 0.0 || !df.is_finite() {
                break;
            }
            let next = slope - f / df;
            if residual(next).abs() < f.abs() {
                slope = next;
            } else {
                break;
            }
        }
        let line = TangentLine {
            slope,
            intercept: intercept_for(slope),
        };
        // centres below the line, final circle tangent from above
        let tangent_f = (line.distance(cf) - rf).abs() <= 1e-7 * rf.max(1.0);
        let below = line.side(ci) < 0.0 && line.side(cf) < 0.0;
        // travel direction along the line (centres on the right) heads to CR_F
        let heading_ok = delta.x + slope * delta.y > 0.0;
        if !(tangent_f && below && heading_ok) {
            continue;
        }
        let xq = (ci.x - (line.intercept - ci.y) * slope) / (slope * slope + 1.0);
        let yq = slope * xq + line.intercept;
        let theta = ((ci.x - xq) / ri).clamp(-1.0, 1.0).acos();
        return Ok(TangentSolution {
            line: Some(line),
            point: Point::new(xq, yq),
            theta,
        });
    }
    Err(GeometryError::NoValidTangent(
        "the group moves against the tangent direction (reverse motion)".into(),
    ))
}

/// Local frame: origin at the initial group centre, +x along the group
/// displacement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub origin: Point,
    /// Rotation (rad) from the local to the world frame.
    pub heading: f64,
}

impl Frame {
    pub fn to_world(&self, local: Point) -> Point {
        self.origin + local.rotated(self.heading)
    }

    pub fn to_local(&self, world: Point) -> Point {
        (world - self.origin).rotated(-self.heading)
    }
}

/// A speed compatible with the switch point, with its lap count.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibleVelocity {
    pub speed: f64,
    pub laps: u32,
}

/// Everything needed to fly one adjustment period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPlan {
    pub frame: Frame,
    /// Initial circle, local frame (centre at the origin).
    pub circle_initial: Circle,
    /// Final circle, local frame.
    pub circle_final: Circle,
    pub tangent: TangentSolution,
    /// Ascending by speed.
    pub feasible_velocities: Vec<FeasibleVelocity>,
    /// Start point, local frame.
    pub start: Point,
    /// Switch point, local frame.
    pub switch_point: Point,
    pub period: f64,
}

impl TrajectoryPlan {
    pub fn radius(&self) -> f64 {
        self.circle_initial.radius
    }

    /// Speed increment per extra lap, `2 pi r_I / T`.
    pub fn speed_spacing(&self) -> f64 {
        TAU * self.radius() / self.period
    }

    pub fn smallest_speed(&self) -> f64 {
        self.feasible_velocities[0].speed
    }

    pub fn lookup(&self, speed: f64) -> Option<FeasibleVelocity> {
        self.feasible_velocities
            .iter()
            .copied()
            .find(|fv| (fv.speed - speed).abs() <= 1e-9 * speed.abs().max(1.0))
    }

    pub fn start_world(&self) -> Point {
        self.frame.to_world(self.start)
    }

    pub fn switch_point_world(&self) -> Point {
        self.frame.to_world(self.switch_point)
    }

    /// JSON summary: radii, entry angle, switch point and feasible speeds.
    pub fn summary_json(&self) -> String {
        let mut s = String::from("{\n");
        let _ = writeln!(s, "  \"r_initial_m\": {:?},", self.circle_initial.radius);
        let _ = writeln!(s, "  \"r_final_m\": {:?},", self.circle_final.radius);
        let _ = writeln!(s, "  \"theta_rad\": {:?},", self.tangent.theta);
        let sp = self.switch_point_world();
        let _ = writeln!(s, "  \"switch_point_m\": [{:?}, {:?}],", sp.x, sp.y);
        let _ = writeln!(s, "  \"speed_spacing_mps\": {:?},", self.speed_spacing());
        s.push_str("  \"feasible_velocities\": [");
        for (i, fv) in self.feasible_velocities.iter().enumerate() {
            if i > 0 {
                s.push_str(", ");
            }
            let _ = write!(
                s,
                "{{\"speed_mps\": {:?}, \"laps\": {}}}",
                fv.speed, fv.laps
            );
        }
        s.push_str("]\n}\n");
        s
    }
}

/// Lap-quantised speeds `v = (theta + 2 pi Cir) r / T` within the bounds.
pub fn feasible_velocities(
    theta: f64,
    radius: f64,
    config: &ScenarioConfig,
) -> Vec<FeasibleVelocity> {
    let period = config.period;
    let mut out = Vec::new();
    for laps in 0u32.. {
        let speed = (theta + TAU * laps as f64) * radius / period;
        if speed > config.speed_max {
            break;
        }
        if speed >= config.speed_min {
            out.push(FeasibleVelocity { speed, laps });
        }
    }
    out
}

/// Builds the switching plan for a group track.
pub fn build_plan(
    track: &UserTrack,
    config: &ScenarioConfig,
) -> Result<TrajectoryPlan, GeometryError> {
    let last = track.slots() - 1;
    let ri = (track.radii[0] / 2.0).max(config.safe_radius);
    let rf = (track.radii[last] / 2.0).max(config.safe_radius);
    let displacement = track.centroids[last] - track.centroids[0];
    let heading = if displacement.norm() > DEGENERATE_OFFSET {
        displacement.y.atan2(displacement.x)
    } else {
        0.0
    };
    let frame = Frame {
        origin: track.centroids[0],
        heading,
    };
    let circle_initial = Circle::checked(Point::ORIGIN, ri, config.safe_radius)?;
    let circle_final = Circle::checked(
        frame.to_local(track.centroids[last]),
        rf,
        config.safe_radius,
    )?;
    let tangent = rsr_tangent(circle_initial, circle_final)?;
    let feasible = feasible_velocities(tangent.theta, ri, config);
    if feasible.is_empty() {
        return Err(GeometryError::InfeasiblePlan {
            vmin: config.speed_min,
            vmax: config.speed_max,
            period: config.period,
        });
    }
    Ok(TrajectoryPlan {
        frame,
        circle_initial,
        circle_final,
        tangent,
        feasible_velocities: feasible,
        start: Point::new(-ri, 0.0),
        switch_point: tangent.point,
        period: config.period,
    })
}

/// Sampled UAV positions, world frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySamples {
    pub positions: Vec<Point>,
    pub speed: f64,
}

impl TrajectorySamples {
    /// CSV with header `n,x,y`, 0-based slots.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,x,y\n");
        for (n, p) in self.positions.iter().enumerate() {
            let _ = writeln!(s, "{n},{},{}", p.x, p.y);
        }
        s
    }
}

/// Phase swept by slot `n` (0-based) at `speed` on a circle of `radius`.
pub fn slot_phase(speed: f64, slot_length: f64, radius: f64, n: usize) -> f64 {
    speed * slot_length * n as f64 / radius
}

/// Clockwise circling from `(cx - r, cy)` at constant speed.
pub fn sample_circle(
    center: Point,
    radius: f64,
    speed: f64,
    slots: usize,
    slot_length: f64,
) -> Vec<Point> {
    (0..slots)
        .map(|n| {
            let phi = slot_phase(speed, slot_length, radius, n);
            center + Point::new(-radius * phi.cos(), radius * phi.sin())
        })
        .collect()
}

/// Samples the UAV position in every slot at a feasible speed.
pub fn sample_trajectory(
    plan: &TrajectoryPlan,
    speed: f64,
    config: &ScenarioConfig,
) -> Result<TrajectorySamples, GeometryError> {
    let fv = plan
        .lookup(speed)
        .ok_or(GeometryError::SpeedNotFeasible(speed))?;
    let local = sample_circle(
        plan.circle_initial.center,
        plan.radius(),
        fv.speed,
        config.slots,
        config.slot_length,
    );
    Ok(TrajectorySamples {
        positions: local.into_iter().map(|p| plan.frame.to_world(p)).collect(),
        speed: fv.speed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TrajectoryViolation {
    /// Arc between slot `slot` and `slot + 1` outside `[S_min, S_max]`.
    ArcOutOfBounds {
        slot: usize,
        arc: f64,
    },
    /// Sample `slot` is not on the initial circle.
    OffCircle {
        slot: usize,
    },
    StartMismatch {
        distance: f64,
    },
    /// Last sample more than one slot of flight away from the switch point.
    EndpointMismatch {
        distance: f64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<TrajectoryViolation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks per-slot arc bounds, the start point and the switch point.
pub fn validate_trajectory(
    samples: &TrajectorySamples,
    plan: &TrajectoryPlan,
    config: &ScenarioConfig,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let center = plan.frame.to_world(plan.circle_initial.center);
    let radius = plan.radius();
    let tol = 1e-9 * config.max_step().max(1.0);
    for (n, pair) in samples.positions.windows(2).enumerate() {
        match arc_length(center, pair[0], pair[1], radius) {
            Ok(arc) => {
                if arc < config.min_step() - tol || arc > config.max_step() + tol {
                    report
                        .violations
                        .push(TrajectoryViolation::ArcOutOfBounds { slot: n, arc });
                }
            }
            Err(_) => {
                let slot = if (pair[0].distance(center) - radius).abs() > 1e-6 * radius {
                    n
                } else {
                    n + 1
                };
                let v = TrajectoryViolation::OffCircle { slot };
                if !report.violations.contains(&v) {
                    report.violations.push(v);
                }
            }
        }
    }
    if let Some(first) = samples.positions.first() {
        let distance = first.distance(plan.start_world());
        if distance > 1e-9 * radius {
            report
                .violations
                .push(TrajectoryViolation::StartMismatch { distance });
        }
    }
    if let Some(last) = samples.positions.last() {
        let distance = last.distance(plan.switch_point_world());
        if distance > samples.speed * config.slot_length * (1.0 + 1e-9) {
            report
                .violations
                .push(TrajectoryViolation::EndpointMismatch { distance });
        }
    }
    report
}

/// Half-turn duration at the minimum radius and top speed, in whole slots.
pub fn u_turn_slots(config: &ScenarioConfig) -> usize {
    (PI * config.safe_radius / (config.speed_max * config.slot_length)).ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_config;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn arc_of_identical_points_is_zero() {
        let p = Point::new(-200.0, 0.0);
        assert_eq!(arc_length(Point::ORIGIN, p, p, 200.0).unwrap(), 0.0);
    }

    #[test]
    fn quarter_circle_arc() {
        let r = 200.0;
        let arc = arc_length(Point::ORIGIN, Point::new(-r, 0.0), Point::new(0.0, r), r).unwrap();
        assert!((arc - PI * r / 2.0).abs() <= 1e-12 * r);
    }

    #[test]
    fn small_chord_matches_series() {
        let r = 300.0;
        let angle: f64 = 1e-3;
        let a = Point::new(r, 0.0);
        let b = Point::new(r * angle.cos(), r * angle.sin());
        let chord = a.distance(b);
        let series = chord * (1.0 + chord * chord / (24.0 * r * r));
        let arc = arc_length(Point::ORIGIN, a, b, r).unwrap();
        assert!((arc - series).abs() / series < 1e-7);
    }

    #[test]
    fn off_circle_point_rejected() {
        let err = arc_length(
            Point::ORIGIN,
            Point::new(-210.0, 0.0),
            Point::new(0.0, 200.0),
            200.0,
        );
        assert!(matches!(err, Err(GeometryError::PointOffCircle { .. })));
    }

    #[test]
    fn equal_radius_tangent_is_parallel() {
        let t = rsr_tangent(
            Circle::new(Point::ORIGIN, 200.0),
            Circle::new(Point::new(1000.0, 0.0), 200.0),
        )
        .unwrap();
        let line = t.line.unwrap();
        assert!(line.slope.abs() < 1e-12);
        assert!((line.intercept - 200.0).abs() < 1e-9);
        assert!(t.point.distance(Point::new(0.0, 200.0)) < 1e-9);
        assert!((t.theta - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn coincident_circles_degenerate_to_circling() {
        let c = Circle::new(Point::new(5.0, 5.0), 200.0);
        let t = rsr_tangent(c, c).unwrap();
        assert!(t.line.is_none());
        assert_eq!(t.theta, 0.0);
        assert_eq!(t.point, Point::new(-195.0, 5.0));
    }

    #[test]
    fn nested_circles_have_no_tangent() {
        let err = rsr_tangent(
            Circle::new(Point::ORIGIN, 500.0),
            Circle::new(Point::new(10.0, 0.0), 200.0),
        );
        assert!(matches!(err, Err(GeometryError::NoValidTangent(_))));
    }

    #[test]
    fn reverse_motion_rejected() {
        let err = rsr_tangent(
            Circle::new(Point::ORIGIN, 200.0),
            Circle::new(Point::new(-1000.0, 0.0), 200.0),
        );
        assert!(matches!(err, Err(GeometryError::NoValidTangent(_))));
    }

    #[test]
    fn unequal_radii_satisfy_tangency() {
        let ci = Circle::new(Point::new(10.0, -20.0), 200.0);
        let cf = Circle::new(Point::new(700.0, 150.0), 320.0);
        let t = rsr_tangent(ci, cf).unwrap();
        let line = t.line.unwrap();
        assert!((line.distance(ci.center) - 200.0).abs() < 1e-9 * 200.0);
        assert!((line.distance(cf.center) - 320.0).abs() < 1e-9 * 320.0);
        assert!(line.side(ci.center) < 0.0 && line.side(cf.center) < 0.0);
        assert!((t.point.distance(ci.center) - 200.0).abs() < 1e-9 * 200.0);
        assert!((0.0..PI).contains(&t.theta));
    }

    fn plan_for(theta: f64, radius: f64, period: f64) -> (TrajectoryPlan, ScenarioConfig) {
        let mut cfg = default_config();
        cfg.period = period;
        cfg.slots = period as usize;
        let tangent_point = Point::new(-radius * theta.cos(), radius * theta.sin());
        let plan = TrajectoryPlan {
            frame: Frame {
                origin: Point::ORIGIN,
                heading: 0.0,
            },
            circle_initial: Circle::new(Point::ORIGIN, radius),
            circle_final: Circle::new(Point::new(1000.0, 0.0), radius),
            tangent: TangentSolution {
                line: None,
                point: tangent_point,
                theta,
            },
            feasible_velocities: feasible_velocities(theta, radius, &cfg),
            start: Point::new(-radius, 0.0),
            switch_point: tangent_point,
            period,
        };
        (plan, cfg)
    }

    #[test]
    fn sixty_second_plan_has_four_speeds() {
        let (plan, _) = plan_for(FRAC_PI_2, 200.0, 60.0);
        let speeds: Vec<f64> = plan.feasible_velocities.iter().map(|f| f.speed).collect();
        let laps: Vec<u32> = plan.feasible_velocities.iter().map(|f| f.laps).collect();
        assert_eq!(laps, vec![1, 2, 3, 4]);
        // (pi/2 + 2 pi Cir) * 200 / 60
        let expected = [
            26.179938779914945,
            47.123_889_803_846_9,
            68.06784082777885,
            89.0117918517108,
        ];
        for (s, e) in speeds.iter().zip(expected) {
            assert!((s - e).abs() < 1e-9, "{s} vs {e}");
        }
        for w in speeds.windows(2) {
            assert!((w[1] - w[0] - TAU * 200.0 / 60.0).abs() < 1e-9);
        }
    }

    #[test]
    fn samples_start_at_initial_point_and_keep_chord() {
        let (plan, cfg) = plan_for(FRAC_PI_2, 200.0, 60.0);
        for fv in &plan.feasible_velocities {
            let s = sample_trajectory(&plan, fv.speed, &cfg).unwrap();
            assert_eq!(s.positions[0], Point::new(-200.0, 0.0));
            let chord = 2.0 * 200.0 * (fv.speed * cfg.slot_length / 400.0).sin();
            for n in [3, 17, 42] {
                let d = s.positions[n + 1].distance(s.positions[n]);
                assert!((d - chord).abs() < 1e-9 * chord);
            }
            let swept = slot_phase(fv.speed, cfg.slot_length, 200.0, cfg.slots - 1);
            let target = plan.tangent.theta + TAU * fv.laps as f64;
            assert!((swept - target).abs() <= fv.speed * cfg.slot_length / 200.0 + 1e-12);
            assert!(validate_trajectory(&s, &plan, &cfg).is_ok());
        }
        assert!(sample_trajectory(&plan, 33.0, &cfg).is_err());
    }

    #[test]
    fn minimum_speed_sits_on_lower_bound() {
        let mut cfg = default_config();
        cfg.period = 60.0;
        cfg.slots = 60;
        // choose theta so that Cir = 0 lands exactly on Vmin
        let radius = 200.0;
        let theta = cfg.speed_min * cfg.period / radius - TAU;
        let (mut plan, _) = plan_for(theta, radius, 60.0);
        plan.feasible_velocities = feasible_velocities(theta, radius, &cfg);
        let v = plan.smallest_speed();
        assert!((v - cfg.speed_min).abs() < 1e-9);
        let s = sample_trajectory(&plan, v, &cfg).unwrap();
        assert!(validate_trajectory(&s, &plan, &cfg).is_ok());
    }

    #[test]
    fn doubled_step_is_reported() {
        let (plan, cfg) = plan_for(FRAC_PI_2, 200.0, 60.0);
        let v = plan.feasible_velocities[2].speed;
        let mut s = sample_trajectory(&plan, v, &cfg).unwrap();
        let phi = slot_phase(v, cfg.slot_length, 200.0, 11);
        s.positions[10] = Point::new(-200.0 * phi.cos(), 200.0 * phi.sin());
        let report = validate_trajectory(&s, &plan, &cfg);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, TrajectoryViolation::ArcOutOfBounds { slot: 9, .. })));
    }

    #[test]
    fn u_turn_penalty() {
        assert_eq!(u_turn_slots(&default_config()), 7);
    }
}
