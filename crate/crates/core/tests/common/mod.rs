//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use fixwing_core::channel::{rate, ChannelGains};
use std::f64::consts::{PI, TAU};

use fixwing_core::{Circle, Grid, Point, ScenarioConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gains built directly from a normalised-gain matrix.
pub fn gains_from(normalized: Grid) -> ChannelGains {
    ChannelGains {
        distance: normalized.map(|_| 1.0),
        gain: normalized.clone(),
        normalized,
    }
}

/// Random 2-user, 2-slot instance with line-of-sight-like gains.
pub fn small_instance(seed: u64, config: &ScenarioConfig) -> (Grid, ChannelGains) {
    let mut r = rng(seed);
    let g = Grid::from_fn(2, 2, |_, _| {
        let d2 = config.altitude.powi(2) + r.gen_range(0.0f64..800.0).powi(2);
        config.rho0 / (config.noise_psd * d2)
    });
    let alpha = Grid::from_fn(2, 2, |_, _| r.gen_range(0.2..1.0));
    (alpha, gains_from(g))
}

/// Minimum average throughput for per-slot budget shares of user 0
/// (`u` for bandwidth, `w` for power); user 1 gets the rest. `None` when a
/// rate floor is violated.
fn split_value(
    u: &[f64; 2],
    w: &[f64; 2],
    alpha: &Grid,
    g: &Grid,
    c: &ScenarioConfig,
) -> Option<f64> {
    let mut avg = [0.0; 2];
    for n in 0..2 {
        for k in 0..2 {
            let a = alpha.get(k, n);
            if a <= 0.0 {
                continue;
            }
            let (fb, fp) = if k == 0 {
                (u[n], w[n])
            } else {
                (1.0 - u[n], 1.0 - w[n])
            };
            let b = (fb * c.bandwidth_max / a).min(c.bandwidth_max);
            let p = (fp * c.power_max / a).min(c.power_max);
            let r = rate(b, p, g.get(k, n));
            if r < a * c.rate_threshold * (1.0 - 1e-9) {
                return None;
            }
            avg[k] += a * r / 2.0;
        }
    }
    Some(avg[0].min(avg[1]))
}

/// Lattice search over the four budget shares followed by a shrinking
/// pattern search around the best point.
pub fn resource_grid_oracle(alpha: &Grid, gains: &ChannelGains, config: &ScenarioConfig) -> f64 {
    let g = &gains.normalized;
    let steps = 40;
    let mut best = (f64::NEG_INFINITY, [0.5; 4]);
    for i0 in 0..=steps {
        for i1 in 0..=steps {
            for i2 in 0..=steps {
                for i3 in 0..=steps {
                    let x = [i0, i1, i2, i3].map(|i| i as f64 / steps as f64);
                    if let Some(v) = split_value(&[x[0], x[1]], &[x[2], x[3]], alpha, g, config) {
                        if v > best.0 {
                            best = (v, x);
                        }
                    }
                }
            }
        }
    }
    let mut h = 1.0 / steps as f64;
    while h > 1e-7 {
        let mut improved = false;
        // every move in {-1, 0, 1}^4, so the search can follow the kink
        // where the two users' throughputs meet
        for code in 0..81 {
            let dir = [code % 3, code / 3 % 3, code / 9 % 3, code / 27].map(|t| t as f64 - 1.0);
            if dir == [0.0; 4] {
                continue;
            }
            {
                let mut x = best.1;
                for d in 0..4 {
                    x[d] = (x[d] + dir[d] * h).clamp(0.0, 1.0);
                }
                if let Some(v) = split_value(&[x[0], x[1]], &[x[2], x[3]], alpha, g, config) {
                    if v > best.0 {
                        best = (v, x);
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            h /= 2.0;
        }
    }
    best.0
}

/// External right-turn tangent by bisection on the normal angle `w` of the
/// line: `n . (cF - cI) = rI - rF` with the travel direction `(n_y, -n_x)`
/// pointing towards the final circle. Returns the tangent point and the
/// clockwise angle from `(cI.x - rI, cI.y)`.
pub fn tangent_oracle(ci: Point, ri: f64, cf: Point, rf: f64) -> (Point, f64, f64) {
    let d = cf - ci;
    let a = d.y.atan2(d.x);
    let g = |w: f64| d.x * w.cos() + d.y * w.sin() - (ri - rf);
    let (mut lo, mut hi) = (a, a + PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = 0.5 * (lo + hi);
    let point = ci + Point::new(w.cos(), w.sin()) * ri;
    let theta = (PI - w).rem_euclid(TAU);
    (point, theta, w)
}

/// Random circle pairs with the group moving roughly along +x.
pub fn random_pair(rng: &mut impl Rng) -> (Circle, Circle) {
    loop {
        let ri: f64 = rng.gen_range(200.0..600.0);
        let rf = rng.gen_range(200.0..600.0);
        let dist = rng.gen_range((ri - rf).abs() + 50.0..5000.0);
        let ang: f64 = rng.gen_range(-0.3..0.3);
        let ci = Point::new(rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3));
        let cf = ci + Point::new(ang.cos(), ang.sin()) * dist;
        let (_, _, w) = tangent_oracle(ci, ri, cf, rf);
        // keep lines away from vertical so the slope form stays well conditioned
        if w > 0.05 && w < PI - 0.05 {
            return (Circle::new(ci, ri), Circle::new(cf, rf));
        }
    }
}

/// Golden-section maximiser of a unimodal function on `[lo, hi]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..300 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    // endpoints may beat the interior when the function is monotone
    [lo, mid, hi]
        .into_iter()
        .max_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap()
}

/// Best speed by sampling and the channel model, rate floors included;
/// ties go to the smaller speed.
pub fn speed_oracle(
    plan: &fixwing_core::geometry::TrajectoryPlan,
    track: &fixwing_core::UserTrack,
    alpha: &Grid,
    b: &Grid,
    p: &Grid,
    c: &ScenarioConfig,
) -> f64 {
    let mut best: Option<(f64, f64)> = None;
    for fv in &plan.feasible_velocities {
        let samples = fixwing_core::sample_trajectory(plan, fv.speed, c).unwrap();
        let gains = fixwing_core::compute_gains(&samples, track, c).unwrap();
        let rates = fixwing_core::channel::rate_grid(b, p, &gains);
        let ok = (0..track.users()).all(|k| {
            (0..c.slots)
                .all(|n| rates.get(k, n) >= alpha.get(k, n) * c.rate_threshold * (1.0 - 1e-9))
        });
        if !ok {
            continue;
        }
        let eta = fixwing_core::average_throughput(alpha, b, p, &gains)
            .unwrap()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if best.map_or(true, |(e, _)| eta > e) {
            best = Some((eta, fv.speed));
        }
    }
    best.expect("some speed meets the floors").1
}
