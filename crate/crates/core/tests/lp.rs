mod common;

use fixwing_core::lp::{LpError, Violation};
use fixwing_core::{solve_lp, LinearProgram, LpStatus, Relation};
use proptest::prelude::*;
use rand::Rng;

fn optimal(lp: &LinearProgram) -> (Vec<f64>, f64) {
    let s = solve_lp(lp).unwrap();
    assert_eq!(s.status, LpStatus::Optimal, "{}", lp.to_tableau_text());
    (s.x, s.value)
}

#[test]
fn box_example() {
    let mut lp = LinearProgram::new(vec![1.0, 1.0]);
    lp.add_constraint(vec![1.0, 0.0], Relation::Le, 1.0);
    lp.add_constraint(vec![0.0, 1.0], Relation::Le, 2.0);
    let (x, v) = optimal(&lp);
    assert!((v - 3.0).abs() < 1e-12);
    assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
}

#[test]
fn max_min_example() {
    // variables (eta, x); eta free
    let mut lp = LinearProgram::new(vec![1.0, 0.0]);
    lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
    lp.set_bounds(1, 0.0, 1.0);
    lp.add_constraint(vec![1.0, -1.0], Relation::Le, 0.0);
    lp.add_constraint(vec![1.0, 1.0], Relation::Le, 1.0);
    let (x, v) = optimal(&lp);
    assert!((v - 0.5).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
}

#[test]
fn infeasible_and_unbounded_are_statuses() {
    let mut lp = LinearProgram::new(vec![1.0]);
    lp.add_constraint(vec![1.0], Relation::Ge, 2.0);
    lp.add_constraint(vec![1.0], Relation::Le, 1.0);
    assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);

    let mut lp = LinearProgram::new(vec![1.0, 1.0]);
    lp.add_constraint(vec![1.0, -1.0], Relation::Le, 1.0);
    assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);

    let mut lp = LinearProgram::new(vec![0.0]);
    lp.set_bounds(0, 3.0, 1.0);
    assert!(matches!(
        solve_lp(&lp),
        Err(LpError::InvertedBounds { var: 0, .. })
    ));
    let mut lp = LinearProgram::new(vec![1.0, 1.0]);
    lp.add_constraint(vec![1.0], Relation::Le, 1.0);
    assert!(matches!(
        solve_lp(&lp),
        Err(LpError::RowLength { row: 0, .. })
    ));
    let lp = LinearProgram::new(vec![f64::NAN]);
    assert!(matches!(solve_lp(&lp), Err(LpError::NonFinite(_))));
}

#[test]
fn equality_and_negative_bounds() {
    // max -x0 + 2 x1, x0 + x1 = 1, x0 in [-2, 3], x1 in [-1, 0.25]
    let mut lp = LinearProgram::new(vec![-1.0, 2.0]);
    lp.set_bounds(0, -2.0, 3.0);
    lp.set_bounds(1, -1.0, 0.25);
    lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0);
    let (x, v) = optimal(&lp);
    assert!((x[0] - 0.75).abs() < 1e-12 && (x[1] - 0.25).abs() < 1e-12);
    assert!((v - (-0.75 + 0.5)).abs() < 1e-12);
}

#[test]
fn degenerate_program_terminates() {
    // many redundant constraints through the same vertex
    let n = 6;
    let mut lp = LinearProgram::new(vec![1.0; n]);
    for i in 0..n {
        for j in 0..n {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            row[j] += 1.0;
            lp.add_constraint(row, Relation::Le, 2.0);
        }
    }
    let (_, v) = optimal(&lp);
    assert!((v - n as f64).abs() < 1e-9);
}

/// Random bounded LP around a feasible interior point.
fn random_lp(rng: &mut impl Rng, n: usize, m: usize) -> LinearProgram {
    let objective: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut lp = LinearProgram::new(objective);
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for (j, &x) in x0.iter().enumerate() {
        let lo = x - rng.gen_range(0.1..2.0);
        let hi = x + rng.gen_range(0.1..2.0);
        lp.set_bounds(j, lo, hi);
    }
    for _ in 0..m {
        let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let at: f64 = row.iter().zip(&x0).map(|(a, x)| a * x).sum();
        match rng.gen_range(0..5) {
            0 => lp.add_constraint(row, Relation::Eq, at),
            1 | 2 => lp.add_constraint(row, Relation::Ge, at - rng.gen_range(0.0..1.0)),
            _ => lp.add_constraint(row, Relation::Le, at + rng.gen_range(0.0..1.0)),
        }
    }
    lp
}

/// Solves a small dense system by Gaussian elimination with partial
/// pivoting; `None` when singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-10 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Best objective over all basic feasible points.
fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_variables();
    // candidate active sets: rows and bounds written as (a, rhs)
    let mut hyper: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    for c in &lp.constraints {
        hyper.push((c.coefficients.clone(), c.rhs, c.relation == Relation::Eq));
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        hyper.push((e.clone(), lo, false));
        hyper.push((e, hi, false));
    }
    let eq: Vec<usize> = (0..hyper.len()).filter(|&i| hyper[i].2).collect();
    let free: Vec<usize> = (0..hyper.len()).filter(|&i| !hyper[i].2).collect();
    if eq.len() > n {
        return None;
    }
    let need = n - eq.len();
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; need];
    fn next(pick: &mut [usize], max: usize) -> bool {
        let k = pick.len();
        for i in (0..k).rev() {
            if pick[i] < max - (k - i) {
                pick[i] += 1;
                for j in i + 1..k {
                    pick[j] = pick[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, p) in pick.iter_mut().enumerate() {
        *p = i;
    }
    if need > free.len() {
        return None;
    }
    loop {
        let rows: Vec<usize> = eq
            .iter()
            .copied()
            .chain(pick.iter().map(|&i| free[i]))
            .collect();
        let a: Vec<Vec<f64>> = rows.iter().map(|&r| hyper[r].0.clone()).collect();
        let b: Vec<f64> = rows.iter().map(|&r| hyper[r].1).collect();
        if let Some(x) = solve_square(a, b) {
            if lp.violations(&x, 1e-9).is_empty() {
                let v = lp.evaluate(&x);
                if best.map_or(true, |b| v > b) {
                    best = Some(v);
                }
            }
        }
        if need == 0 || !next(&mut pick, free.len()) {
            break;
        }
    }
    best
}

#[test]
fn random_programs_match_vertex_enumeration() {
    let mut rng = common::rng(2024);
    for case in 0..20 {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=6);
        let lp = random_lp(&mut rng, n, m);
        let oracle = vertex_oracle(&lp).expect("feasible by construction");
        let (x, v) = optimal(&lp);
        assert!(
            (v - oracle).abs() <= 1e-7 * oracle.abs().max(1.0),
            "case {case}: {v} vs {oracle}"
        );
        assert!(lp.violations(&x, 1e-7).is_empty());
        assert!((lp.evaluate(&x) - v).abs() <= 1e-9 * v.abs().max(1.0));
    }
}

/// The dual of `max c.x` over rows and finite bounds, all written as
/// `a.x <= b`: `min b.y` subject to `A^T y = c`, `y >= 0`.
fn dual_value(lp: &LinearProgram) -> f64 {
    let n = lp.num_variables();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in &lp.constraints {
        let neg: Vec<f64> = c.coefficients.iter().map(|a| -a).collect();
        match c.relation {
            Relation::Le => rows.push((c.coefficients.clone(), c.rhs)),
            Relation::Ge => rows.push((neg, -c.rhs)),
            Relation::Eq => {
                rows.push((c.coefficients.clone(), c.rhs));
                rows.push((neg, -c.rhs));
            }
        }
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let mut e = vec![0.0; n];
        if hi.is_finite() {
            e[j] = 1.0;
            rows.push((e.clone(), hi));
        }
        if lo.is_finite() {
            e[j] = -1.0;
            rows.push((e, -lo));
        }
    }
    let mut dual = LinearProgram::new(rows.iter().map(|(_, b)| -b).collect());
    for j in 0..n {
        let col: Vec<f64> = rows.iter().map(|(a, _)| a[j]).collect();
        dual.add_constraint(col, Relation::Eq, lp.objective[j]);
    }
    -optimal(&dual).1
}

#[test]
fn duality_gap_vanishes() {
    let mut rng = common::rng(99);
    for _ in 0..20 {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=6);
        let lp = random_lp(&mut rng, n, m);
        let (_, primal) = optimal(&lp);
        let dual = dual_value(&lp);
        assert!(
            (primal - dual).abs() <= 1e-6 * primal.abs().max(1.0),
            "{primal} vs {dual}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn row_scaling_leaves_the_solution(seed in any::<u64>(), scale in 1e-3f64..1e3, which in 0usize..6) {
        let mut rng = common::rng(seed);
        let n = rng.gen_range(2..=5);
        let m = rng.gen_range(1..=6);
        let lp = random_lp(&mut rng, n, m);
        let (x, _) = optimal(&lp);
        let mut scaled = lp.clone();
        let row = which % m;
        let c = &mut scaled.constraints[row];
        c.coefficients.iter_mut().for_each(|a| *a *= scale);
        c.rhs *= scale;
        let (y, _) = optimal(&scaled);
        for (a, b) in x.iter().zip(&y) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{:?} vs {:?}", x, y);
        }
    }

    #[test]
    fn solutions_pass_the_independent_check(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.gen_range(2..=8);
        let m = rng.gen_range(1..=8);
        let lp = random_lp(&mut rng, n, m);
        let (x, _) = optimal(&lp);
        for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
            prop_assert!(x[j] >= lo - 1e-7 && x[j] <= hi + 1e-7);
        }
        for c in &lp.constraints {
            let lhs: f64 = c.coefficients.iter().zip(&x).map(|(a, v)| a * v).sum();
            let ok = match c.relation {
                Relation::Le => lhs <= c.rhs + 1e-7,
                Relation::Ge => lhs >= c.rhs - 1e-7,
                Relation::Eq => (lhs - c.rhs).abs() <= 1e-7,
            };
            prop_assert!(ok);
        }
    }

    #[test]
    fn solving_is_deterministic(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let lp = random_lp(&mut rng, 5, 5);
        prop_assert_eq!(solve_lp(&lp).unwrap(), solve_lp(&lp).unwrap());
    }
}

#[test]
fn violations_name_the_row() {
    let mut lp = LinearProgram::new(vec![1.0, 1.0]);
    lp.add_constraint(vec![1.0, 1.0], Relation::Le, 1.0);
    lp.set_bounds(1, 0.0, 0.5);
    let v = lp.violations(&[1.0, 0.75], 1e-9);
    assert!(v.contains(&Violation::Row {
        row: 0,
        excess: 0.75
    }));
    assert!(v
        .iter()
        .any(|x| matches!(x, Violation::Bound { var: 1, .. })));
    let text = lp.to_tableau_text();
    assert!(text.contains("<="));
}
