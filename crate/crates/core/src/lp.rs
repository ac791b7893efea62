//! Dense bounded-variable two-phase simplex.
//!
//! Variables are mapped to `y >= 0` with an optional finite upper bound
//! (shifted, flipped or split), rows and columns are equilibrated, and the
//! simplex runs on a full tableau. Pricing picks the largest reduced cost and
//! switches to Bland's smallest-index rule after a streak of degenerate
//! pivots, which rules out cycling. Basic values are recomputed from the
//! original columns at the end of each phase to limit drift.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const PIVOT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-7;
const COST_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize objective . x` subject to the constraints and bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// Per-variable `(lo, hi)`; infinities allowed.
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("constraint {row} has {got} coefficients, expected {expected}")]
    RowLength {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("bounds has {got} entries, expected {expected}")]
    BoundsLength { got: usize, expected: usize },
    #[error("variable {var} has lo {lo} > hi {hi}")]
    InvertedBounds { var: usize, lo: f64, hi: f64 },
    #[error("non-finite data in {0}")]
    NonFinite(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Safety cap on pivots reached; not expected in practice.
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
}

/// A violated row or bound found by [`LinearProgram::violations`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    Row { row: usize, excess: f64 },
    Bound { var: usize, excess: f64 },
}

impl LinearProgram {
    /// Non-negative variables, no constraints yet.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_variables(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coefficients: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            coefficients,
            relation,
            rhs,
        });
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.bounds[var] = (lo, hi);
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_variables();
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite("objective".into()));
        }
        if self.bounds.len() != n {
            return Err(LpError::BoundsLength {
                got: self.bounds.len(),
                expected: n,
            });
        }
        for (var, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(LpError::NonFinite(format!("bounds of variable {var}")));
            }
            if lo > hi {
                return Err(LpError::InvertedBounds { var, lo, hi });
            }
        }
        for (row, c) in self.constraints.iter().enumerate() {
            if c.coefficients.len() != n {
                return Err(LpError::RowLength {
                    row,
                    got: c.coefficients.len(),
                    expected: n,
                });
            }
            if !c.rhs.is_finite() || c.coefficients.iter().any(|a| !a.is_finite()) {
                return Err(LpError::NonFinite(format!("constraint {row}")));
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Rows and bounds violated by more than `tol` times the row scale
    /// (largest of `|rhs|` and `|a_j x_j|`, at least 1).
    pub fn violations(&self, x: &[f64], tol: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        for (var, (&(lo, hi), &v)) in self.bounds.iter().zip(x).enumerate() {
            let scale = v.abs().max(1.0);
            let excess = (lo - v).max(v - hi);
            if excess > tol * scale {
                out.push(Violation::Bound { var, excess });
            }
        }
        for (row, c) in self.constraints.iter().enumerate() {
            let mut lhs = 0.0;
            let mut scale = c.rhs.abs().max(1.0);
            for (a, v) in c.coefficients.iter().zip(x) {
                lhs += a * v;
                scale = scale.max((a * v).abs());
            }
            let excess = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            if excess > tol * scale {
                out.push(Violation::Row { row, excess });
            }
        }
        out
    }

    /// Plain-text tableau: one line per row, columns aligned.
    pub fn to_tableau_text(&self) -> String {
        let n = self.num_variables();
        let mut s = String::new();
        let _ = write!(s, "{:>6}", "");
        for j in 0..n {
            let _ = write!(s, " {:>12}", format!("x{j}"));
        }
        s.push_str("    rel          rhs\n");
        let _ = write!(s, "{:>6}", "max");
        for c in &self.objective {
            let _ = write!(s, " {c:>12.5e}");
        }
        s.push('\n');
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = write!(s, "{:>6}", format!("r{i}"));
            for a in &c.coefficients {
                let _ = write!(s, " {a:>12.5e}");
            }
            let _ = writeln!(s, " {:>6} {:>12.5e}", c.relation.symbol(), c.rhs);
        }
        for (label, pick) in [("lo", 0usize), ("hi", 1)] {
            let _ = write!(s, "{label:>6}");
            for b in &self.bounds {
                let v = if pick == 0 { b.0 } else { b.1 };
                let _ = write!(s, " {v:>12.5e}");
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Copy, Debug)]
enum VarMap {
    /// `x = lo + y`
    Shift { col: usize, lo: f64 },
    /// `x = hi - y`
    Flip { col: usize, hi: f64 },
    /// `x = y_pos - y_neg`
    Split { pos: usize, neg: usize },
}

struct Tableau {
    m: usize,
    width: usize,
    /// `B^-1 A`, row-major `m x width`.
    t: Vec<f64>,
    /// Scaled original columns, for recomputing basic values.
    a0: Vec<f64>,
    rhs: Vec<f64>,
    upper: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    at_upper: Vec<bool>,
    beta: Vec<f64>,
    pivots: usize,
}

enum Phase {
    Optimal,
    Unbounded,
    Limit,
}

impl Tableau {
    fn value_of(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            self.upper[j]
        } else {
            0.0
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * self.width..(i + 1) * self.width];
                for (dj, a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, q: usize, d: &mut [f64]) {
        let w = self.width;
        let piv = self.t[r * w + q];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= piv;
        }
        let (before, rest) = self.t.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[q];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                row[q] = 0.0;
            }
        }
        let f = d[q];
        if f != 0.0 {
            for (v, p) in d.iter_mut().zip(prow.iter()) {
                *v -= f * p;
            }
            d[q] = 0.0;
        }
        let leaving = self.basis[r];
        self.is_basic[leaving] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
        self.pivots += 1;
    }

    /// Primal simplex on the current basis, maximising `cost`.
    fn run(&mut self, cost: &[f64], allowed: &[bool], limit: usize) -> Phase {
        let mut d = self.reduced_costs(cost);
        let cost_scale = cost.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1e-300);
        let tol = COST_TOL * cost_scale;
        let mut degenerate = 0usize;
        let mut steps = 0usize;
        loop {
            if steps >= limit {
                return Phase::Limit;
            }
            steps += 1;
            let bland = degenerate >= DEGENERATE_STREAK;
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.width {
                if self.is_basic[j] || !allowed[j] {
                    continue;
                }
                let gain = if self.at_upper[j] { -d[j] } else { d[j] };
                if gain <= tol || (self.upper[j] == 0.0) {
                    continue;
                }
                if bland {
                    entering = Some((j, gain));
                    break;
                }
                if entering.is_none_or(|(_, g)| gain > g) {
                    entering = Some((j, gain));
                }
            }
            let Some((q, _)) = entering else {
                return Phase::Optimal;
            };
            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };
            let mut step = self.upper[q];
            let mut leave: Option<usize> = None;
            for i in 0..self.m {
                let a = dir * self.t[i * self.width + q];
                let bi = self.basis[i];
                let lim = if a > PIVOT_TOL {
                    self.beta[i].max(0.0) / a
                } else if a < -PIVOT_TOL && self.upper[bi].is_finite() {
                    (self.upper[bi] - self.beta[i]).max(0.0) / -a
                } else {
                    continue;
                };
                let better = if step.is_infinite() {
                    true
                } else {
                    let eps = 1e-12 * step.max(1.0);
                    if lim < step - eps {
                        true
                    } else if lim <= step + eps {
                        match leave {
                            Some(l) if bland => bi < self.basis[l],
                            Some(l) => a.abs() > (dir * self.t[l * self.width + q]).abs(),
                            None => false,
                        }
                    } else {
                        false
                    }
                };
                if better {
                    step = lim;
                    leave = Some(i);
                }
            }
            if step.is_infinite() {
                return Phase::Unbounded;
            }
            if step <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for i in 0..self.m {
                self.beta[i] -= dir * step * self.t[i * self.width + q];
            }
            let entering_value = self.value_of(q) + dir * step;
            match leave {
                None => {
                    self.at_upper[q] = !self.at_upper[q];
                }
                Some(r) => {
                    let out = self.basis[r];
                    let a = dir * self.t[r * self.width + q];
                    self.at_upper[out] = a < 0.0;
                    self.pivot(r, q, &mut d);
                    self.beta[r] = entering_value;
                    self.at_upper[q] = false;
                }
            }
        }
    }

    /// Recomputes basic values by solving `B x_B = rhs - N x_N`.
    fn refresh_basic_values(&mut self) {
        let m = self.m;
        let w = self.width;
        let mut target = self.rhs.clone();
        for j in 0..w {
            if !self.is_basic[j] && self.at_upper[j] {
                let u = self.upper[j];
                for (i, t) in target.iter_mut().enumerate() {
                    *t -= self.a0[i * w + j] * u;
                }
            }
        }
        let mut b = vec![0.0; m * m];
        for i in 0..m {
            for (c, &j) in self.basis.iter().enumerate() {
                b[i * m + c] = self.a0[i * w + j];
            }
        }
        if let Some(x) = solve_dense(&mut b, &mut target, m) {
            self.beta = x;
        }
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(a: &mut [f64], b: &mut [f64], m: usize) -> Option<Vec<f64>> {
    for col in 0..m {
        let (piv, best) = (col..m)
            .map(|r| (r, a[r * m + col].abs()))
            .fold((col, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if best <= 1e-14 {
            return None;
        }
        if piv != col {
            for c in 0..m {
                a.swap(piv * m + c, col * m + c);
            }
            b.swap(piv, col);
        }
        let p = a[col * m + col];
        for r in col + 1..m {
            let f = a[r * m + col] / p;
            if f != 0.0 {
                for c in col..m {
                    a[r * m + c] -= f * a[col * m + c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let mut s = b[r];
        for c in r + 1..m {
            s -= a[r * m + c] * x[c];
        }
        x[r] = s / a[r * m + r];
    }
    Some(x)
}

/// Solves the linear program. Infeasible and unbounded problems are
/// reported through [`LpSolution::status`].
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.num_variables();

    // variable substitution
    let mut maps = Vec::with_capacity(n);
    let mut upper = Vec::new();
    for &(lo, hi) in &lp.bounds {
        let col = upper.len();
        if lo.is_finite() {
            maps.push(VarMap::Shift { col, lo });
            upper.push(hi - lo);
        } else if hi.is_finite() {
            maps.push(VarMap::Flip { col, hi });
            upper.push(f64::INFINITY);
        } else {
            maps.push(VarMap::Split {
                pos: col,
                neg: col + 1,
            });
            upper.push(f64::INFINITY);
            upper.push(f64::INFINITY);
        }
    }
    let ns = upper.len();
    let mut cost = vec![0.0; ns];
    for (j, map) in maps.iter().enumerate() {
        let c = lp.objective[j];
        match *map {
            VarMap::Shift { col, .. } => cost[col] += c,
            VarMap::Flip { col, .. } => cost[col] -= c,
            VarMap::Split { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
        }
    }

    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in &lp.constraints {
        let mut row = vec![0.0; ns];
        let mut rhs = c.rhs;
        for (j, map) in maps.iter().enumerate() {
            let a = c.coefficients[j];
            if a == 0.0 {
                continue;
            }
            match *map {
                VarMap::Shift { col, lo } => {
                    row[col] += a;
                    rhs -= a * lo;
                }
                VarMap::Flip { col, hi } => {
                    row[col] -= a;
                    rhs -= a * hi;
                }
                VarMap::Split { pos, neg } => {
                    row[pos] += a;
                    row[neg] -= a;
                }
            }
        }
        let scale = row.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        if scale == 0.0 {
            let tol = FEAS_TOL * c.rhs.abs().max(1.0);
            let ok = match c.relation {
                Relation::Le => rhs >= -tol,
                Relation::Ge => rhs <= tol,
                Relation::Eq => rhs.abs() <= tol,
            };
            if !ok {
                return Ok(infeasible(n));
            }
            continue;
        }
        for a in &mut row {
            *a /= scale;
        }
        rhs /= scale;
        let mut rel = c.relation;
        if rhs < 0.0 {
            for a in &mut row {
                *a = -*a;
            }
            rhs = -rhs;
            rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        if rel == Relation::Ge && rhs == 0.0 {
            for a in &mut row {
                *a = -*a;
            }
            rel = Relation::Le;
        }
        rows.push((row, rel, rhs));
    }

    // column equilibration
    let mut col_scale = vec![1.0; ns];
    for (j, s) in col_scale.iter_mut().enumerate() {
        let mx = rows.iter().fold(0.0f64, |m, r| m.max(r.0[j].abs()));
        if mx > 0.0 {
            *s = 1.0 / mx;
        }
    }
    for (row, _, _) in &mut rows {
        for (a, s) in row.iter_mut().zip(&col_scale) {
            *a *= s;
        }
    }
    for j in 0..ns {
        cost[j] *= col_scale[j];
        upper[j] /= col_scale[j];
    }

    let m = rows.len();
    let slacks = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let artificials = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let width = ns + slacks + artificials;
    let mut a0 = vec![0.0; m * width];
    let mut basis = vec![0; m];
    let mut rhs = vec![0.0; m];
    upper.resize(width, f64::INFINITY);
    let mut next_slack = ns;
    let mut next_art = ns + slacks;
    for (i, (row, rel, b)) in rows.iter().enumerate() {
        a0[i * width..i * width + ns].copy_from_slice(row);
        rhs[i] = *b;
        match rel {
            Relation::Le => {
                a0[i * width + next_slack] = 1.0;
                basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                a0[i * width + next_slack] = -1.0;
                next_slack += 1;
                a0[i * width + next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                a0[i * width + next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
        }
    }
    let mut is_basic = vec![false; width];
    for &b in &basis {
        is_basic[b] = true;
    }
    let mut tab = Tableau {
        m,
        width,
        t: a0.clone(),
        a0,
        rhs: rhs.clone(),
        upper,
        basis,
        is_basic,
        at_upper: vec![false; width],
        beta: rhs,
        pivots: 0,
    };
    let limit = 50 * (m + width) + 1000;
    let art_start = ns + slacks;

    if artificials > 0 {
        let mut phase1 = vec![0.0; width];
        for c in &mut phase1[art_start..] {
            *c = -1.0;
        }
        let allowed = vec![true; width];
        if let Phase::Limit = tab.run(&phase1, &allowed, limit) {
            return Ok(limited(n, tab.pivots));
        }
        tab.refresh_basic_values();
        let residual: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= art_start)
            .map(|i| tab.beta[i].abs())
            .sum();
        let rhs_scale = tab.rhs.iter().fold(1.0f64, |m, b| m.max(b.abs()));
        if residual > FEAS_TOL * rhs_scale {
            let mut sol = infeasible(n);
            sol.pivots = tab.pivots;
            return Ok(sol);
        }
        for j in art_start..width {
            tab.upper[j] = 0.0;
        }
    }

    let mut phase2 = vec![0.0; width];
    phase2[..ns].copy_from_slice(&cost);
    let allowed: Vec<bool> = (0..width).map(|j| j < art_start).collect();
    let outcome = tab.run(&phase2, &allowed, limit);
    match outcome {
        Phase::Unbounded => {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                x: vec![f64::NAN; n],
                value: f64::INFINITY,
                pivots: tab.pivots,
            })
        }
        Phase::Limit => return Ok(limited(n, tab.pivots)),
        Phase::Optimal => {}
    }
    tab.refresh_basic_values();

    let mut y = vec![0.0; width];
    for j in 0..width {
        y[j] = tab.value_of(j);
    }
    for (i, &b) in tab.basis.iter().enumerate() {
        y[b] = tab.beta[i].clamp(0.0, tab.upper[b]);
    }
    let x: Vec<f64> = maps
        .iter()
        .zip(&lp.bounds)
        .map(|(map, &(lo, hi))| {
            let v = match *map {
                VarMap::Shift { col, lo } => lo + y[col] * col_scale[col],
                VarMap::Flip { col, hi } => hi - y[col] * col_scale[col],
                VarMap::Split { pos, neg } => y[pos] * col_scale[pos] - y[neg] * col_scale[neg],
            };
            v.clamp(lo, hi)
        })
        .collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value: lp.evaluate(&x),
        x,
        pivots: tab.pivots,
    })
}

fn infeasible(n: usize) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        x: vec![f64::NAN; n],
        value: f64::NEG_INFINITY,
        pivots: 0,
    }
}

fn limited(n: usize, pivots: usize) -> LpSolution {
    LpSolution {
        status: LpStatus::IterationLimit,
        x: vec![f64::NAN; n],
        value: f64::NAN,
        pivots,
    }
}
