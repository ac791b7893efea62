use std::thread;

use fixwing_core::channel::rate;
use fixwing_core::geometry::build_plan;
use fixwing_core::orchestrator::{
    random_split, straight_position, throughput_ceiling, Block, RunError,
};
use fixwing_core::scheduling::qos_cap;
use fixwing_core::{
    algorithm1, default_config, generate_tracks, run_baseline_trajectory, run_scheme, BaselineKind,
    ChannelGains, Point, RunResult, ScenarioConfig, Scheme,
};

fn small(users: usize, period: f64) -> ScenarioConfig {
    let mut c = default_config();
    c.users = users;
    c.period = period;
    c.slots = period as usize;
    c
}

/// Everything except wall-clock timings.
fn same_outcome(a: &RunResult, b: &RunResult) -> bool {
    let strip = |r: &RunResult| {
        let mut r = r.clone();
        r.trace.iter_mut().for_each(|t| t.wallclock_s = 0.0);
        r
    };
    strip(a) == strip(b)
}

fn check_result(r: &RunResult, c: &ScenarioConfig) {
    let least = r
        .per_user_throughput
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    assert!((r.eta_final - least).abs() <= 1e-6 * least.max(1.0));
    let (users, slots) = r.alpha.shape();
    for n in 0..slots {
        let (mut sb, mut sp) = (0.0, 0.0);
        for k in 0..users {
            let a = r.alpha.get(k, n);
            assert!((0.0..=1.0 + 1e-9).contains(&a));
            assert!(r.b.get(k, n) >= 0.0 && r.b.get(k, n) <= c.bandwidth_max * (1.0 + 1e-9));
            assert!(r.p.get(k, n) >= 0.0 && r.p.get(k, n) <= c.power_max * (1.0 + 1e-9));
            sb += a * r.b.get(k, n);
            sp += a * r.p.get(k, n);
        }
        assert!(sb <= c.bandwidth_max * (1.0 + 1e-7) && sp <= c.power_max * (1.0 + 1e-7));
    }
    let gains = ChannelGains::from_positions(&r.uav, r.track.as_ref().unwrap(), c);
    let ceiling = throughput_ceiling(c, &gains);
    let mut prev = r.eta_initial;
    for t in &r.trace {
        let tol = 1e-6 * t.eta_trajectory.abs().max(1.0);
        assert!(t.eta_resources >= t.eta_scheduling - tol, "{t:?}");
        assert!(t.eta_trajectory >= t.eta_resources - tol, "{t:?}");
        assert!(t.eta_scheduling >= prev - tol, "{t:?} after {prev}");
        assert!(t.eta_trajectory <= ceiling * (1.0 + 1e-9));
        prev = t.eta_trajectory;
    }
    assert_eq!(r.iterations, r.trace.len());
    let csv = r.trace_csv();
    assert_eq!(csv.lines().count(), r.iterations + 1);
}

#[test]
fn static_single_user_reaches_the_closed_form() {
    let mut c = small(1, 60.0);
    c.rate_threshold = 0.0;
    c.group_speed = 0.0;
    c.perturbation_radius = 0.0;
    let r = algorithm1(&c).unwrap();
    assert!(r.iterations <= 2 && r.converged);
    // every feasible speed keeps the user at horizontal distance r
    let track = generate_tracks(&c);
    let plan = build_plan(&track, &c).unwrap();
    let best = plan
        .feasible_velocities
        .iter()
        .map(|_| {
            let d2 = c.altitude.powi(2) + plan.radius().powi(2);
            rate(c.bandwidth_max, c.power_max, c.rho0 / (c.noise_psd * d2))
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(
        (r.eta_final - best).abs() <= 1e-6 * best,
        "{} vs {best}",
        r.eta_final
    );
    check_result(&r, &c);
}

#[test]
fn infinite_tolerance_stops_after_one_iteration() {
    let mut c = small(3, 40.0);
    c.epsilon = f64::INFINITY;
    let r = algorithm1(&c).unwrap();
    assert_eq!(r.iterations, 1);
    assert!(r.converged);
}

#[test]
fn runs_are_deterministic_and_monotone() {
    let c = small(4, 60.0);
    let (a, b) = thread::scope(|s| {
        let h = s.spawn(|| algorithm1(&c).unwrap());
        (algorithm1(&c).unwrap(), h.join().unwrap())
    });
    assert!(same_outcome(&a, &b));
    check_result(&a, &c);
    assert!(a.eta_final >= a.eta_initial);
    let json = serde_json::to_string(&a).unwrap();
    let back: RunResult = serde_json::from_str(&json).unwrap();
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs().max(1e-300);
    assert!(close(back.eta_final, a.eta_final));
    for (x, y) in back.b.as_slice().iter().zip(a.b.as_slice()) {
        assert!(close(*x, *y));
    }
}

#[test]
fn scheme_two_with_one_user_gets_the_whole_budget() {
    let c = small(1, 60.0);
    let (b, p) = random_split(&c, 1, c.slots);
    assert!(b
        .as_slice()
        .iter()
        .all(|&x| (x - c.bandwidth_max).abs() <= 1e-9 * c.bandwidth_max));
    assert!(p
        .as_slice()
        .iter()
        .all(|&x| (x - c.power_max).abs() <= 1e-12));
    let (one, two) = thread::scope(|s| {
        let h = s.spawn(|| run_scheme(&c, Scheme::II).unwrap());
        (run_scheme(&c, Scheme::I).unwrap(), h.join().unwrap())
    });
    assert_eq!(one.v_final, two.v_final);
    assert!(two.alpha.as_slice().iter().all(|&a| (a - 1.0).abs() < 1e-9));
    check_result(&two, &c);
}

#[test]
fn random_splits_fill_each_slot() {
    let c = small(5, 40.0);
    let (b, p) = random_split(&c, 5, c.slots);
    for n in 0..c.slots {
        assert!((b.column_sum(n) - c.bandwidth_max).abs() <= 1e-6);
        assert!((p.column_sum(n) - c.power_max).abs() <= 1e-12);
    }
}

#[test]
fn scheme_three_is_deterministic_and_within_its_caps() {
    let c = small(3, 40.0);
    let (a, b) = thread::scope(|s| {
        let h = s.spawn(|| run_scheme(&c, Scheme::III).unwrap());
        (run_scheme(&c, Scheme::III).unwrap(), h.join().unwrap())
    });
    assert!(same_outcome(&a, &b));
    check_result(&a, &c);
    let gains = ChannelGains::from_positions(&a.uav, a.track.as_ref().unwrap(), &c);
    for k in 0..3 {
        for n in 0..c.slots {
            let r = rate(a.b.get(k, n), a.p.get(k, n), gains.normalized.get(k, n));
            assert!(a.alpha.get(k, n) <= qos_cap(r, c.rate_threshold) + 1e-9);
        }
    }
}

#[test]
fn straight_path_is_back_and_forth() {
    let (a, b) = (Point::ORIGIN, Point::new(100.0, 0.0));
    assert_eq!(
        straight_position(a, b, 50.0, 3.0, 1.0),
        (Point::new(50.0, 0.0), false)
    );
    assert_eq!(straight_position(a, b, 50.0, 3.0, 3.0), (b, true));
    let (back, turning) = straight_position(a, b, 50.0, 3.0, 6.0);
    assert!(!turning && back.distance(Point::new(50.0, 0.0)) < 1e-12);
    assert_eq!(straight_position(a, b, 50.0, 3.0, 8.0), (a, true));
    assert_eq!(straight_position(a, a, 50.0, 3.0, 8.0), (a, false));
}

#[test]
fn straight_baseline_without_displacement_is_finite() {
    let mut c = small(3, 40.0);
    c.group_speed = 0.0;
    c.perturbation_radius = 0.0;
    let r = run_baseline_trajectory(&c, BaselineKind::Straight).unwrap();
    assert!(r.eta_final.is_finite() && r.eta_final > 0.0);
    assert!(r.uav.iter().all(|p| p.norm() < 1e-6));
    check_result(&r, &c);
}

#[test]
fn baselines_keep_their_paths() {
    let c = small(3, 60.0);
    let circ = run_baseline_trajectory(&c, BaselineKind::Circular600).unwrap();
    let centre = Point::mean(circ.track.as_ref().unwrap().centroids.iter().copied());
    assert!(circ
        .uav
        .iter()
        .all(|p| (p.distance(centre) - 600.0).abs() < 1e-6));
    assert_eq!(circ.v_final, c.speed_min);
    check_result(&circ, &c);
    let straight = run_baseline_trajectory(&c, BaselineKind::Straight).unwrap();
    assert_eq!(straight.v_final, c.speed_max);
    check_result(&straight, &c);
}

#[test]
fn infeasible_configs_name_the_problem() {
    let mut c = small(2, 40.0);
    c.speed_max = c.speed_min - 1.0;
    assert!(matches!(algorithm1(&c), Err(RunError::Config(_))));

    // no lap count lands in a 1 cm/s speed window
    let mut c = small(2, 40.0);
    c.speed_min = 99.0;
    c.speed_max = 99.01;
    match algorithm1(&c) {
        Err(RunError::Infeasible { block, .. }) => assert_eq!(block, Block::Geometry),
        other => panic!("{:?}", other.map(|r| r.eta_final)),
    }
}

#[test]
fn more_users_never_help_any_trajectory() {
    let kinds = [
        BaselineKind::Optimized,
        BaselineKind::Circular600,
        BaselineKind::Straight,
    ];
    let etas: Vec<Vec<f64>> = thread::scope(|s| {
        let handles: Vec<_> = kinds
            .iter()
            .map(|&kind| {
                s.spawn(move || {
                    [4, 6, 8]
                        .iter()
                        .map(|&k| {
                            let mut c = default_config();
                            c.users = k;
                            run_baseline_trajectory(&c, kind).unwrap().eta_final
                        })
                        .collect::<Vec<f64>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (kind, row) in kinds.iter().zip(&etas) {
        for w in row.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-6), "{kind:?}: {row:?}");
        }
    }
}
