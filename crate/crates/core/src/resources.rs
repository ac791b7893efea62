//! Joint bandwidth and power allocation by Lagrangian dual decomposition.
//!
//! For fixed multipliers the power spectral density follows a multi-level
//! water-filling rule and the bandwidth is bang-bang. The multipliers are
//! driven by projected subgradient steps: the rate-balance multipliers `mu`
//! and the rate-floor multipliers `beta` in the outer loop, the per-slot
//! bandwidth and power prices `xi`, `varpi` in the inner loop. The final
//! allocation comes from a linear program over the bandwidth with the
//! spectral density held fixed.

use std::f64::consts::LN_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{average_throughput, ChannelGains};
use crate::grid::Grid;
use crate::lp::{solve_lp, LinearProgram, LpError, LpStatus, Relation};
use crate::scenario::ScenarioConfig;
use crate::scheduling::SchedulingMatrix;

/// Floor on the power price, keeps the water level finite.
pub const PRICE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ResourceError {
    #[error("rate floor unreachable at {} scheduled (user, slot) pairs with zero rate density, first {:?}", .pairs.len(), .pairs.first())]
    QosInfeasible { pairs: Vec<(usize, usize)> },
    #[error("bandwidth program is {0:?}")]
    Refinement(LpStatus),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("Hessian pole: x must be positive, got {0}")]
    Pole(f64),
}

/// Multipliers for the rate balance (`mu`, per user), the per-slot rate
/// floor (`beta`), and the per-slot bandwidth (`xi`) and power (`varpi`)
/// budgets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualMultipliers {
    pub mu: Vec<f64>,
    pub beta: Grid,
    pub xi: Vec<f64>,
    pub varpi: Vec<f64>,
}

impl DualMultipliers {
    fn axpy(&mut self, w: f64, other: &DualMultipliers) {
        let add = |a: &mut [f64], b: &[f64]| a.iter_mut().zip(b).for_each(|(a, b)| *a += w * b);
        add(&mut self.mu, &other.mu);
        add(self.beta.as_mut_slice(), other.beta.as_slice());
        add(&mut self.xi, &other.xi);
        add(&mut self.varpi, &other.varpi);
    }

    fn scaled(&self, w: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|x| x * w).collect::<Vec<_>>();
        Self {
            mu: s(&self.mu),
            beta: self.beta.map(|x| x * w),
            xi: s(&self.xi),
            varpi: s(&self.varpi),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualLoopSettings {
    /// Base step per family (`mu`, `beta`, `xi`, `varpi`); `None` scales
    /// them from the problem data.
    pub step0: Option<[f64; 4]>,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    /// Relative multiplier change below which a loop stops.
    pub tolerance: f64,
    /// Fraction of the reference multiplier moved by the first step when
    /// steps are scaled automatically.
    pub step_fraction: f64,
}

impl DualLoopSettings {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self {
            step0: None,
            inner_iterations: config.dual_inner_iterations,
            outer_iterations: config.dual_outer_iterations,
            tolerance: config.dual_tolerance,
            step_fraction: 0.4,
        }
    }
}

/// One row of the dual trace: multiplier change norms per family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualTraceRow {
    pub outer: usize,
    pub inner: usize,
    pub mu: f64,
    pub beta: f64,
    pub xi: f64,
    pub varpi: f64,
}

/// Where the spectral density of the returned allocation came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensitySource {
    FinalDuals,
    AveragedDuals,
    AveragedPrimal,
    Incumbent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationState {
    pub b: Grid,
    pub p: Grid,
    pub p_tilde: Grid,
    pub eta: f64,
    pub per_user: Vec<f64>,
    /// Both multiplier loops stopped on the tolerance.
    pub converged: bool,
    pub source: DensitySource,
    pub duals: Option<DualMultipliers>,
    pub trace: Vec<DualTraceRow>,
}

impl AllocationState {
    /// Dual trace as CSV `outer,inner,mu,beta,xi,varpi`.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("outer,inner,mu,beta,xi,varpi\n");
        for r in &self.trace {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.outer, r.inner, r.mu, r.beta, r.xi, r.varpi
            );
        }
        s
    }
}

/// `p~ = [(mu + N beta) / (varpi N ln 2) - 1/g]^+` per user and slot.
pub fn waterfill_power(duals: &DualMultipliers, gains: &ChannelGains, slots: usize) -> Grid {
    let g = &gains.normalized;
    let nf = slots as f64;
    Grid::from_fn(g.rows(), g.cols(), |k, n| {
        let weight = duals.mu[k] + nf * duals.beta.get(k, n);
        let gk = g.get(k, n);
        if weight <= 0.0 || gk <= 0.0 {
            return 0.0;
        }
        let level = weight / (duals.varpi[n].max(PRICE_FLOOR) * nf * LN_2);
        (level - 1.0 / gk).max(0.0)
    })
}

/// Per-entry bandwidth score `f`: the Lagrangian gain per unit bandwidth.
pub fn bandwidth_scores(
    duals: &DualMultipliers,
    p_tilde: &Grid,
    alpha: &SchedulingMatrix,
    gains: &ChannelGains,
) -> Grid {
    let g = &gains.normalized;
    let nf = g.cols() as f64;
    Grid::from_fn(g.rows(), g.cols(), |k, n| {
        let a = alpha.alpha.get(k, n);
        let pt = p_tilde.get(k, n);
        let weight = (duals.mu[k] + nf * duals.beta.get(k, n)) / nf;
        weight * a * (g.get(k, n) * pt).ln_1p() / LN_2 - duals.varpi[n] * a * pt - duals.xi[n] * a
    })
}

/// `B_max` where the score is strictly positive, zero otherwise.
pub fn bandwidth_bang_bang(
    duals: &DualMultipliers,
    p_tilde: &Grid,
    alpha: &SchedulingMatrix,
    gains: &ChannelGains,
    config: &ScenarioConfig,
) -> Grid {
    bandwidth_scores(duals, p_tilde, alpha, gains).map(|f| {
        if f > 0.0 {
            config.bandwidth_max
        } else {
            0.0
        }
    })
}

/// Subgradients of the four constraint families at a layer-one solution:
/// average throughput per user, per-entry rate minus floor, unused
/// bandwidth and unused power per slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Residuals {
    pub mu: Vec<f64>,
    pub beta: Grid,
    pub xi: Vec<f64>,
    pub varpi: Vec<f64>,
}

pub fn residuals(
    b: &Grid,
    p_tilde: &Grid,
    alpha: &SchedulingMatrix,
    gains: &ChannelGains,
    config: &ScenarioConfig,
) -> Residuals {
    let g = &gains.normalized;
    let (users, slots) = g.shape();
    let nf = slots as f64;
    let rate = Grid::from_fn(users, slots, |k, n| {
        b.get(k, n) * (g.get(k, n) * p_tilde.get(k, n)).ln_1p() / LN_2
    });
    let mu = (0..users)
        .map(|k| {
            (0..slots)
                .map(|n| alpha.alpha.get(k, n) * rate.get(k, n))
                .sum::<f64>()
                / nf
        })
        .collect();
    let beta = Grid::from_fn(users, slots, |k, n| {
        rate.get(k, n) - alpha.alpha.get(k, n) * config.rate_threshold
    });
    let xi = (0..slots)
        .map(|n| {
            config.bandwidth_max
                - (0..users)
                    .map(|k| alpha.alpha.get(k, n) * b.get(k, n))
                    .sum::<f64>()
        })
        .collect();
    let varpi = (0..slots)
        .map(|n| {
            config.power_max
                - (0..users)
                    .map(|k| alpha.alpha.get(k, n) * p_tilde.get(k, n) * b.get(k, n))
                    .sum::<f64>()
        })
        .collect();
    Residuals {
        mu,
        beta,
        xi,
        varpi,
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            shift = t;
        }
    }
    v.iter().map(|x| (x - shift).max(0.0)).collect()
}

/// One projected subgradient step on the families selected by `which`
/// (`mu`, `beta`, `xi`, `varpi`), each with step `steps[u] / sqrt(m + 1)`.
///
/// The `mu` step subtracts the throughputs and projects onto the simplex;
/// the common shift of that projection plays the role of the epigraph
/// variable.
pub fn update_families(
    duals: &DualMultipliers,
    res: &Residuals,
    steps: [f64; 4],
    m: usize,
    which: [bool; 4],
) -> DualMultipliers {
    let decay = 1.0 / ((m + 1) as f64).sqrt();
    let mut next = duals.clone();
    if which[0] {
        let z = steps[0] * decay;
        let raw: Vec<f64> = duals
            .mu
            .iter()
            .zip(&res.mu)
            .map(|(u, r)| u - z * r)
            .collect();
        next.mu = project_simplex(&raw);
    }
    if which[1] {
        let z = steps[1] * decay;
        for (b, r) in next.beta.as_mut_slice().iter_mut().zip(res.beta.as_slice()) {
            *b = (*b - z * r).max(0.0);
        }
    }
    if which[2] {
        let z = steps[2] * decay;
        for (x, r) in next.xi.iter_mut().zip(&res.xi) {
            *x = (*x - z * r).max(0.0);
        }
    }
    if which[3] {
        let z = steps[3] * decay;
        for (w, r) in next.varpi.iter_mut().zip(&res.varpi) {
            *w = (*w - z * r).max(0.0);
        }
    }
    next
}

/// All four families at once, at the layer-one solution for `duals`.
pub fn subgradient_step(
    duals: &DualMultipliers,
    alpha: &SchedulingMatrix,
    gains: &ChannelGains,
    config: &ScenarioConfig,
    steps: [f64; 4],
    m: usize,
) -> DualMultipliers {
    let (p_tilde, b) = layer_one(duals, alpha, gains, config);
    let res = residuals(&b, &p_tilde, alpha, gains, config);
    update_families(duals, &res, steps, m, [true; 4])
}

/// Layer-one density and bandwidth with the per-entry caps `b <= B_max`,
/// `p~ b <= P_max` kept in the inner problem.
///
/// The per-entry Lagrangian is positively homogeneous in `(b, p)`, so its
/// maximum sits on the cap boundary `b = min(B_max, P_max / p~)`. Below
/// the corner density `P_max / B_max` the water-filling level is optimal;
/// above it the power cap binds and the best density maximises the score
/// per unit power.
pub fn capped_layer_one(
    duals: &DualMultipliers,
    alpha: &SchedulingMatrix,
    gains: &ChannelGains,
    config: &ScenarioConfig,
) -> (Grid, Grid) {
    let g = &gains.normalized;
    let (users, slots) = g.shape();
    let nf = slots as f64;
    let corner = config.power_max / config.bandwidth_max;
    let water = waterfill_power(duals, gains, slots);
    let mut p_tilde = Grid::zeros(users, slots);
    let mut b = Grid::zeros(users, slots);
    for k in 0..users {
        for n in 0..slots {
            let a = alpha.alpha.get(k, n);
            let gk = g.get(k, n);
            let w = (duals.mu[k] + nf * duals.beta.get(k, n)) / nf;
            let pw = water.get(k, n);
            let score = |pt: f64| {
                w * a * (gk * pt).ln_1p() / LN_2 - duals.varpi[n] * a * pt - duals.xi[n] * a
            };
            let (pt, cap) = if pw <= corner {
                (pw, config.bandwidth_max)
            } else {
                let pt = power_limited_density(w, gk, duals.xi[n], corner, pw);
                (pt, config.power_max / pt)
            };
            p_tilde.set(k, n, pt);
            if a > 0.0 && score(pt) > 0.0 {
                b.set(k, n, cap);
            }
        }
    }
    (p_tilde, b)
}

/// Maximiser of `score(p) / p` on `[lo, hi]`: the root of
/// `w [log2(1 + g p) - g p / ((1 + g p) ln 2)] = xi`, clamped.
fn power_limited_density(w: f64, g: f64, xi: f64, lo: f64, hi: f64) -> f64 {
    let h = |p: f64| {
        let gp = g * p;
        w * (gp.ln_1p() - gp / (1.0 + gp)) / LN_2 - xi
    };
    if h(lo) >= 0.0 {
        return lo;
    }
    if h(hi) <= 0.0 {
        return hi;
    }
    let (mut a, mut c) = (lo, hi);
    let mut p = 0.5 * (lo + hi);
    for _ in 0..100 {
        let v = h(p);
        if v < 0.0 {
            a = p;
        } else {
            c = p;
        }
        let gp = g * p;
        let slope = w * g * gp / ((1.0 + gp) * (1.0 + gp) * LN_2);
        let newton = p - v / slope;
        let next = if newton > a && newton < c {
            newton
        } else {
            0.5 * (a + c)
        };
        if (next - p).abs() <= 1e-14 * p || c - a <= 1e-14 * c {
            return next;
        }
        p = next;
    }
    p
}

fn layer_one(
    duals: &DualMultipliers,
    alpha: &SchedulingMatrix,
    gains: &ChannelGains,
    config: &ScenarioConfig,
) -> (Grid, Grid) {
    capped_layer_one(duals, alpha, gains, config)
}

/// Dual function value: the Lagrangian maximised over the relaxed primal
/// (per-entry caps kept, per-slot budgets and rate constraints priced) for
/// these multipliers, with `mu` on the simplex so the epigraph variable
/// drops out.
pub fn dual_value(
    duals: &DualMultipliers,
    alpha: &SchedulingMatrix,
    gains: &ChannelGains,
    config: &ScenarioConfig,
) -> f64 {
    let (p_tilde, b) = capped_layer_one(duals, alpha, gains, config);
    let f = bandwidth_scores(duals, &p_tilde, alpha, gains);
    let (users, slots) = f.shape();
    let mut value: f64 = f
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(v, b)| b * v)
        .sum();
    for n in 0..slots {
        value += duals.xi[n] * config.bandwidth_max + duals.varpi[n] * config.power_max;
        for k in 0..users {
            value -= duals.beta.get(k, n) * alpha.alpha.get(k, n) * config.rate_threshold;
        }
    }
    value
}

/// Multipliers satisfying stationarity at the even split
/// `b = B_max / K`, `p = P_max / K`.
pub fn initial_duals(
    alpha: &SchedulingMatrix,
    gains: &ChannelGains,
    config: &ScenarioConfig,
) -> DualMultipliers {
    let g = &gains.normalized;
    let (users, slots) = g.shape();
    let nf = slots as f64;
    let mu = vec![1.0 / users as f64; users];
    let density = config.power_max / config.bandwidth_max;
    let mut xi = vec![0.0; slots];
    let mut varpi = vec![0.0; slots];
    for n in 0..slots {
        let mut count = 0.0;
        let mut w_sum = 0.0;
        let mut x_sum = 0.0;
        for k in 0..users {
            let gk = g.get(k, n);
            if alpha.alpha.get(k, n) <= 0.0 || gk <= 0.0 {
                continue;
            }
            let w = mu[k] / (nf * LN_2 * (density + 1.0 / gk));
            w_sum += w;
            x_sum += mu[k] / nf * (gk * density).ln_1p() / LN_2 - w * density;
            count += 1.0;
        }
        if count > 0.0 {
            varpi[n] = w_sum / count;
            xi[n] = (x_sum / count).max(0.0);
        }
    }
    DualMultipliers {
        mu,
        beta: Grid::zeros(users, slots),
        xi,
        varpi,
    }
}

/// Base steps from nominal magnitudes: each family's first step moves it
/// by `fraction` of its reference value for a residual of typical size.
fn auto_steps(
    duals: &DualMultipliers,
    alpha: &SchedulingMatrix,
    gains: &ChannelGains,
    config: &ScenarioConfig,
    fraction: f64,
) -> [f64; 4] {
    let g = &gains.normalized;
    let (users, slots) = g.shape();
    let kf = users as f64;
    let b0 = config.bandwidth_max / kf;
    let p0 = config.power_max / kf;
    let mut rate_sum = 0.0;
    let mut count = 0.0;
    for k in 0..users {
        for n in 0..slots {
            if alpha.alpha.get(k, n) > 0.0 {
                rate_sum += crate::channel::rate(b0, p0, g.get(k, n));
                count += 1.0;
            }
        }
    }
    let entry_rate = if count > 0.0 { rate_sum / count } else { 1.0 }.max(1e-300);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let xi_ref = mean(&duals.xi).max(1e-300);
    let varpi_ref = mean(&duals.varpi).max(1e-300);
    [
        fraction * (1.0 / kf) / entry_rate,
        fraction * (1.0 / (kf * slots as f64)) / entry_rate,
        fraction * xi_ref / config.bandwidth_max,
        fraction * varpi_ref / config.power_max,
    ]
}

fn change_norm(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let s = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (d, s)
}

fn relative_change(a: &[f64], b: &[f64]) -> f64 {
    let (d, s) = change_norm(a, b);
    if s > 0.0 {
        d / s
    } else if d > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Bandwidth program for a fixed spectral density: maximise the minimum
/// average throughput over `b`, with the rate floor expressed as a lower
/// bound on each scheduled entry. Unscheduled entries get no bandwidth.
pub fn refine_bandwidth(
    p_tilde: &Grid,
    alpha: &SchedulingMatrix,
    gains: &ChannelGains,
    config: &ScenarioConfig,
) -> Result<AllocationState, ResourceError> {
    let g = &gains.normalized;
    let (users, slots) = g.shape();
    let c = Grid::from_fn(users, slots, |k, n| {
        (g.get(k, n) * p_tilde.get(k, n)).ln_1p() / LN_2
    });
    let var = |k: usize, n: usize| 1 + k * slots + n;
    let width = 1 + users * slots;
    let mut objective = vec![0.0; width];
    objective[0] = 1.0;
    let mut lp = LinearProgram::new(objective);
    let mut unreachable = Vec::new();
    for k in 0..users {
        for n in 0..slots {
            let a = alpha.alpha.get(k, n);
            let (ck, pt) = (c.get(k, n), p_tilde.get(k, n));
            if a <= 0.0 {
                lp.set_bounds(var(k, n), 0.0, 0.0);
                continue;
            }
            let floor = a * config.rate_threshold;
            let lo = if floor > 0.0 {
                if ck <= 0.0 {
                    unreachable.push((k, n));
                    continue;
                }
                floor / ck
            } else {
                0.0
            };
            let hi = if pt > 0.0 {
                config.bandwidth_max.min(config.power_max / pt)
            } else {
                config.bandwidth_max
            };
            if lo > hi * (1.0 + 1e-12) {
                unreachable.push((k, n));
                continue;
            }
            lp.set_bounds(var(k, n), lo.min(hi), hi);
        }
    }
    if !unreachable.is_empty() {
        return Err(ResourceError::QosInfeasible { pairs: unreachable });
    }
    let inv_n = 1.0 / slots as f64;
    for k in 0..users {
        let mut row = vec![0.0; width];
        row[0] = -1.0;
        for n in 0..slots {
            row[var(k, n)] = alpha.alpha.get(k, n) * c.get(k, n) * inv_n;
        }
        lp.add_constraint(row, Relation::Ge, 0.0);
    }
    for n in 0..slots {
        let mut bw = vec![0.0; width];
        let mut pw = vec![0.0; width];
        for k in 0..users {
            let a = alpha.alpha.get(k, n);
            bw[var(k, n)] = a;
            pw[var(k, n)] = a * p_tilde.get(k, n);
        }
        lp.add_constraint(bw, Relation::Le, config.bandwidth_max);
        lp.add_constraint(pw, Relation::Le, config.power_max);
    }
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(ResourceError::Refinement(sol.status));
    }
    let b = Grid::from_fn(users, slots, |k, n| {
        let (lo, hi) = lp.bounds[var(k, n)];
        sol.x[var(k, n)].clamp(lo, hi)
    });
    let p = Grid::from_fn(users, slots, |k, n| p_tilde.get(k, n) * b.get(k, n));
    let per_user = average_throughput(&alpha.alpha, &b, &p, gains).expect("shapes checked");
    let eta = per_user.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(AllocationState {
        b,
        p,
        p_tilde: p_tilde.clone(),
        eta,
        per_user,
        converged: true,
        source: DensitySource::FinalDuals,
        duals: None,
        trace: Vec::new(),
    })
}

/// Runs the dual loops and the bandwidth refinement.
pub fn optimize_resources(
    alpha: &SchedulingMatrix,
    gains: &ChannelGains,
    config: &ScenarioConfig,
    settings: &DualLoopSettings,
) -> Result<AllocationState, ResourceError> {
    optimize_resources_from(alpha, gains, config, settings, None)
}

/// As [`optimize_resources`]; when an incumbent `(b, p)` is given, its
/// spectral density competes with the dual ones in the refinement and the
/// best result is kept.
pub fn optimize_resources_from(
    alpha: &SchedulingMatrix,
    gains: &ChannelGains,
    config: &ScenarioConfig,
    settings: &DualLoopSettings,
    incumbent: Option<(&Grid, &Grid)>,
) -> Result<AllocationState, ResourceError> {
    let mut duals = initial_duals(alpha, gains, config);
    let steps = settings
        .step0
        .unwrap_or_else(|| auto_steps(&duals, alpha, gains, config, settings.step_fraction));
    let mut trace = Vec::new();
    let mut average: Option<DualMultipliers> = None;
    let mut averaged = 0usize;
    let average_from = settings.outer_iterations / 2;
    let mut outer_converged = false;
    let mut inner_converged = true;
    let (users, slots) = gains.normalized.shape();
    let mut b_sum = Grid::zeros(users, slots);
    let mut p_sum = Grid::zeros(users, slots);
    let mut accumulate = |b: &Grid, p_tilde: &Grid| {
        for (i, (bs, ps)) in b_sum
            .as_mut_slice()
            .iter_mut()
            .zip(p_sum.as_mut_slice())
            .enumerate()
        {
            let bv = b.as_slice()[i];
            *bs += bv;
            *ps += bv * p_tilde.as_slice()[i];
        }
    };

    for outer in 0..settings.outer_iterations {
        let mut inner_done = false;
        for inner in 0..settings.inner_iterations {
            let (p_tilde, b) = layer_one(&duals, alpha, gains, config);
            if outer >= average_from {
                accumulate(&b, &p_tilde);
            }
            let res = residuals(&b, &p_tilde, alpha, gains, config);
            let next = update_families(
                &duals,
                &res,
                steps,
                outer * settings.inner_iterations + inner,
                [false, false, true, true],
            );
            let dx = change_norm(&next.xi, &duals.xi).0;
            let dw = change_norm(&next.varpi, &duals.varpi).0;
            let rel = relative_change(&next.xi, &duals.xi)
                .max(relative_change(&next.varpi, &duals.varpi));
            trace.push(DualTraceRow {
                outer,
                inner,
                mu: 0.0,
                beta: 0.0,
                xi: dx,
                varpi: dw,
            });
            duals = next;
            if rel < settings.tolerance {
                inner_done = true;
                break;
            }
        }
        inner_converged &= inner_done;
        let (p_tilde, b) = layer_one(&duals, alpha, gains, config);
        let res = residuals(&b, &p_tilde, alpha, gains, config);
        let next = update_families(&duals, &res, steps, outer, [true, true, false, false]);
        let rel = relative_change(&next.mu, &duals.mu)
            .max(relative_change(next.beta.as_slice(), duals.beta.as_slice()));
        trace.push(DualTraceRow {
            outer,
            inner: settings.inner_iterations,
            mu: change_norm(&next.mu, &duals.mu).0,
            beta: change_norm(next.beta.as_slice(), duals.beta.as_slice()).0,
            xi: 0.0,
            varpi: 0.0,
        });
        duals = next;
        if outer >= average_from {
            match average.as_mut() {
                Some(avg) => avg.axpy(1.0, &duals),
                None => average = Some(duals.clone()),
            }
            averaged += 1;
        }
        if rel < settings.tolerance {
            outer_converged = true;
            break;
        }
    }

    let final_density = capped_layer_one(&duals, alpha, gains, config).0;
    let mut candidates: Vec<(DensitySource, Grid)> = Vec::new();
    if let Some(avg) = &average {
        let avg = avg.scaled(1.0 / averaged as f64);
        candidates.push((
            DensitySource::AveragedDuals,
            capped_layer_one(&avg, alpha, gains, config).0,
        ));
        let primal = Grid::from_fn(users, slots, |k, n| {
            let b = b_sum.get(k, n);
            if b > 0.0 {
                p_sum.get(k, n) / b
            } else {
                final_density.get(k, n)
            }
        });
        candidates.push((DensitySource::AveragedPrimal, primal));
    }
    candidates.insert(0, (DensitySource::FinalDuals, final_density));
    if let Some((b0, p0)) = incumbent {
        let fallback = &candidates[0].1;
        let density = Grid::from_fn(b0.rows(), b0.cols(), |k, n| {
            let b = b0.get(k, n);
            if b > 0.0 {
                p0.get(k, n) / b
            } else {
                fallback.get(k, n)
            }
        });
        candidates.push((DensitySource::Incumbent, density));
    }

    let mut best: Option<AllocationState> = None;
    let mut first_error = None;
    for (source, density) in candidates {
        match refine_bandwidth(&density, alpha, gains, config) {
            Ok(mut state) => {
                state.source = source;
                if best.as_ref().is_none_or(|b| state.eta > b.eta) {
                    best = Some(state);
                }
            }
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    match best {
        Some(mut state) => {
            state.converged = outer_converged && inner_converged;
            state.duals = Some(duals);
            state.trace = trace;
            Ok(state)
        }
        None => Err(first_error.expect("at least one candidate")),
    }
}

/// Hessian of `psi(x, y) = x log2(1 + a y / x)`, rows `[xx, xy]`, `[yx, yy]`.
pub fn psi_hessian(x: f64, y: f64, a: f64) -> Result<[[f64; 2]; 2], ResourceError> {
    if x <= 0.0 {
        return Err(ResourceError::Pole(x));
    }
    let u = x + a * y;
    let d = u * u * LN_2;
    let xx = -a * a * y * y / (x * d);
    let xy = a * a * y / d;
    let yy = -a * a * x / d;
    Ok([[xx, xy], [xy, yy]])
}
