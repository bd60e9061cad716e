//! The max-min problem `K_s = sup_{λ,θ} min_m Σ_l λ_l q_θ(m|l,m)` and the
//! minimum information loss `I_s = log₂(1/K_s)`.
//!
//! The inner problem over `λ` is a linear program solved exactly. The outer
//! problem over the free cosines is a multistart search: a coarse grid of
//! starts, then golden-section sweeps along each coordinate, a shrinking
//! pattern search and a trust-region polish driven by the analytic gradient
//! of the diagonal table. The result carries a first-order stationarity
//! measure so a stalled search is reported instead of hidden.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{game_value, maximize, Constraint, Relation};
use crate::qcoeff::{AngleGrid, LambdaWeights, QBuilder, QTable};
use crate::spin::SpinValue;
use crate::tol;

/// Optimal weights of the inner problem for a fixed grid.
#[derive(Clone, Debug, Serialize)]
pub struct InnerSolution {
    pub lambdas: LambdaWeights,
    pub value: f64,
    /// optimal mixture over outcomes `m` of the dual problem
    pub dual: Vec<f64>,
    /// largest violation of complementary slackness between `lambdas` and `dual`
    pub slackness_residual: f64,
}

const LEX_SLACK: f64 = 1e-12;
const SUPPORT: f64 = 1e-9;

/// Solves `max_λ min_m Σ_l λ_l Q[m][l]` with `Q[m][l] = q(m|l,m)`.
///
/// Among optimal `λ` the lexicographically largest in the order
/// `l = s, s-1, ..., -s` is returned.
pub fn inner_from_diagonal(s: SpinValue, q: &[Vec<f64>]) -> Result<InnerSolution> {
    let n = s.dim();
    let game = game_value(q)?;
    let t_star = game.value;
    // variables: λ_0..λ_{n-1}, t
    let mut constraints: Vec<Constraint> = (0..n)
        .map(|m| {
            let mut c = q[m].clone();
            c.push(-1.0);
            Constraint::new(c, Relation::Ge, 0.0)
        })
        .collect();
    let mut simplex = vec![1.0; n];
    simplex.push(0.0);
    constraints.push(Constraint::new(simplex, Relation::Eq, 1.0));
    let mut floor = vec![0.0; n + 1];
    floor[n] = 1.0;
    constraints.push(Constraint::new(floor, Relation::Ge, t_star - LEX_SLACK));
    let mut lambda = vec![0.0; n];
    for k in 0..n {
        let mut objective = vec![0.0; n + 1];
        objective[k] = 1.0;
        let sol = maximize(&objective, &constraints)?;
        lambda = sol.x[..n].to_vec();
        if sol.x[k] > LEX_SLACK {
            let mut fix = vec![0.0; n + 1];
            fix[k] = 1.0;
            constraints.push(Constraint::new(fix, Relation::Ge, sol.x[k] - LEX_SLACK));
        }
    }
    // weights at the level of the tie-break slack are artefacts of it
    for v in lambda.iter_mut() {
        if *v < 100.0 * LEX_SLACK {
            *v = 0.0;
        }
    }
    let total: f64 = lambda.iter().sum();
    let lambdas = LambdaWeights::new(s, lambda.iter().map(|x| x / total).collect())?;
    let w = lambdas.weights();
    let payoff: Vec<f64> = (0..n).map(|m| (0..n).map(|l| q[m][l] * w[l]).sum()).collect();
    let value = payoff.iter().copied().fold(f64::INFINITY, f64::min);
    if value < t_star - 1e-10 {
        return Err(Error::Lp(format!("tie-break lost optimality: {value} < {t_star}")));
    }
    let mut slackness_residual: f64 = 0.0;
    for l in (0..n).filter(|&l| w[l] > SUPPORT) {
        let reduced: f64 = (0..n).map(|m| game.rows[m] * q[m][l]).sum();
        slackness_residual = slackness_residual.max(t_star - reduced);
    }
    for m in (0..n).filter(|&m| game.rows[m] > SUPPORT) {
        slackness_residual = slackness_residual.max(payoff[m] - value);
    }
    Ok(InnerSolution { lambdas, value, dual: game.rows, slackness_residual })
}

pub fn inner_max_min(table: &QTable) -> Result<InnerSolution> {
    let s = table.spin();
    let n = s.dim();
    let q: Vec<Vec<f64>> = (0..n).map(|m| (0..n).map(|l| table.at(m, l, m)).collect()).collect();
    inner_from_diagonal(s, &q)
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    /// target width of the final `K_s` bracket
    pub tol: f64,
    pub seed: u64,
    pub max_starts: usize,
    /// number of best starts that are refined
    pub refine_top: usize,
    pub max_rounds: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { tol: 1e-8, seed: 20_190_517, max_starts: 2401, refine_top: 8, max_rounds: 50 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceStep {
    pub round: usize,
    pub phase: &'static str,
    pub k_lower: f64,
    pub step: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverTrace {
    pub starts: usize,
    pub refined: usize,
    pub evaluations: usize,
    pub best_start: Vec<f64>,
    /// refinement history of the winning start
    pub steps: Vec<TraceStep>,
    /// spread of `K` over the final pattern stencil
    pub bracket_width: f64,
    /// gain in `K` still predicted by the linearized problem near the result
    pub stationarity: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verification {
    /// the report is itself the closed-form solution
    ClosedForm,
    Analytic { info_loss: f64, a0: Option<f64>, delta_info_loss: f64, delta_a0: Option<f64>, agrees: bool },
    Unverified,
}

/// Optimum of the max-min problem.
#[derive(Clone, Debug, Serialize)]
pub struct LossReport {
    pub s: SpinValue,
    pub lambdas_opt: LambdaWeights,
    pub grid_opt: AngleGrid,
    pub k_value: f64,
    pub info_loss: f64,
    pub visibility: f64,
    pub slackness_residual: f64,
    pub solver_trace: Option<SolverTrace>,
    pub verification: Verification,
}

impl LossReport {
    fn new(s: SpinValue, inner: InnerSolution, grid: AngleGrid) -> Self {
        LossReport {
            s,
            k_value: inner.value,
            info_loss: -inner.value.log2(),
            visibility: inner.value,
            slackness_residual: inner.slackness_residual,
            lambdas_opt: inner.lambdas,
            grid_opt: grid,
            solver_trace: None,
            verification: Verification::ClosedForm,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl fmt::Display for LossReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:.12}")).collect::<Vec<_>>().join(", ");
        writeln!(f, "spin                 {}", self.s)?;
        writeln!(f, "K_s (visibility)     {:.15}", self.k_value)?;
        writeln!(f, "I_s [bits]           {:.15}", self.info_loss)?;
        writeln!(f, "free cosines         [{}]", join(self.grid_opt.free()))?;
        writeln!(f, "lambda (l = s..-s)   [{}]", join(self.lambdas_opt.weights()))?;
        writeln!(f, "slackness residual   {:.3e}", self.slackness_residual)?;
        if let Some(t) = &self.solver_trace {
            writeln!(
                f,
                "search               {} starts, {} refined, {} evaluations, bracket {:.3e}, stationarity {:.3e}, {}",
                t.starts,
                t.refined,
                t.evaluations,
                t.bracket_width,
                t.stationarity,
                if t.converged { "converged" } else { "NOT converged" }
            )?;
        }
        match &self.verification {
            Verification::ClosedForm => writeln!(f, "verification         closed form"),
            Verification::Analytic { info_loss, a0, delta_info_loss, delta_a0, agrees } => {
                writeln!(f, "analytic I_s         {info_loss:.15}  (delta {delta_info_loss:.3e})")?;
                if let (Some(a), Some(d)) = (a0, delta_a0) {
                    writeln!(f, "analytic a0          {a:.15}  (delta {d:.3e})")?;
                }
                writeln!(f, "verification         {}", if *agrees { "agrees with closed form" } else { "DISAGREES with closed form" })
            }
            Verification::Unverified => writeln!(f, "verification         unverified against closed form"),
        }
    }
}

struct Objective {
    s: SpinValue,
    builder: QBuilder,
}

impl Objective {
    fn feasible(&self, free: &[f64]) -> bool {
        let gap = tol::MIN_COSINE_GAP;
        let Some(&last) = free.last() else { return true };
        free[0] <= 1.0 - gap && last >= gap && free.windows(2).all(|w| w[0] - w[1] >= gap)
    }

    fn eval(&self, free: &[f64]) -> f64 {
        if !self.feasible(free) {
            return f64::NEG_INFINITY;
        }
        let Ok(grid) = AngleGrid::from_free(self.s, free) else { return f64::NEG_INFINITY };
        game_value(&self.builder.diagonal(&grid)).map_or(f64::NEG_INFINITY, |g| g.value)
    }

    /// Linearization of the max-min problem at `free`, maximized over the
    /// weights and a step `δ` with `|δ_k| ≤ radius` that keeps the grid ordered.
    /// Returns the current value, the model optimum and the step.
    fn model(&self, free: &[f64], radius: f64) -> Option<(f64, f64, Vec<f64>)> {
        let grid = AngleGrid::from_free(self.s, free).ok()?;
        let q = self.builder.diagonal(&grid);
        let inner = inner_from_diagonal(self.s, &q).ok()?;
        let jac = self.builder.diagonal_jacobian(&grid);
        let (n, f) = (self.s.dim(), free.len());
        let w = inner.lambdas.weights();
        // variables: λ (n), t, δ⁺ (f), δ⁻ (f)
        let nv = n + 1 + 2 * f;
        let step_row = |coef: &dyn Fn(usize) -> f64| {
            let mut c = vec![0.0; nv];
            for k in 0..f {
                c[n + 1 + k] = coef(k);
                c[n + 1 + f + k] = -coef(k);
            }
            c
        };
        let mut cons = Vec::with_capacity(n + 3 * f + 2);
        for m in 0..n {
            let mut c = step_row(&|k| (0..n).map(|l| w[l] * jac[k][m][l]).sum());
            c[..n].copy_from_slice(&q[m]);
            c[n] = -1.0;
            cons.push(Constraint::new(c, Relation::Ge, 0.0));
        }
        let mut simplex = vec![0.0; nv];
        simplex[..n].fill(1.0);
        cons.push(Constraint::new(simplex, Relation::Eq, 1.0));
        for k in 0..f {
            for j in [n + 1 + k, n + 1 + f + k] {
                let mut c = vec![0.0; nv];
                c[j] = 1.0;
                cons.push(Constraint::new(c, Relation::Le, radius));
            }
        }
        let gap = tol::MIN_COSINE_GAP;
        cons.push(Constraint::new(step_row(&|k| if k == 0 { 1.0 } else { 0.0 }), Relation::Le, 1.0 - gap - free[0]));
        for k in 0..f - 1 {
            let row = step_row(&|j| if j == k { 1.0 } else if j == k + 1 { -1.0 } else { 0.0 });
            cons.push(Constraint::new(row, Relation::Ge, gap - (free[k] - free[k + 1])));
        }
        cons.push(Constraint::new(step_row(&|k| if k == f - 1 { 1.0 } else { 0.0 }), Relation::Ge, gap - free[f - 1]));
        let mut objective = vec![0.0; nv];
        objective[n] = 1.0;
        let sol = maximize(&objective, &cons).ok()?;
        let step = (0..f).map(|k| sol.x[n + 1 + k] - sol.x[n + 1 + f + k]).collect();
        Some((inner.value, sol.objective.max(inner.value), step))
    }

    fn interval(&self, free: &[f64], i: usize) -> (f64, f64) {
        let gap = tol::MIN_COSINE_GAP;
        let hi = if i == 0 { 1.0 - gap } else { free[i - 1] - gap };
        let lo = if i + 1 == free.len() { gap } else { free[i + 1] + gap };
        (lo, hi)
    }
}

fn start_points(s: SpinValue, opts: &SearchOptions) -> Vec<Vec<f64>> {
    let f = s.free_angles();
    let mut starts = vec![AngleGrid::unbiased(s).free().to_vec()];
    if f == 0 {
        return starts;
    }
    let per_axis = 7usize;
    if per_axis.pow(f as u32) <= opts.max_starts {
        // c_k = u_1 u_2 ... u_k keeps every start strictly ordered
        for code in 0..per_axis.pow(f as u32) {
            let mut c = code;
            let mut prod = 1.0;
            let mut free = Vec::with_capacity(f);
            for _ in 0..f {
                prod *= (c % per_axis + 1) as f64 / (per_axis + 1) as f64;
                c /= per_axis;
                free.push(prod);
            }
            starts.push(free);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let gap = tol::MIN_COSINE_GAP;
        while starts.len() < opts.max_starts {
            let mut free: Vec<f64> = (0..f).map(|_| rng.random_range(gap..1.0 - gap)).collect();
            free.sort_by(|a, b| b.total_cmp(a));
            if free.windows(2).all(|w| w[0] - w[1] >= gap) {
                starts.push(free);
            }
        }
    }
    starts
}

struct Refined {
    free: Vec<f64>,
    value: f64,
    steps: Vec<TraceStep>,
    evaluations: usize,
    bracket_width: f64,
    stationarity: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;
const X_TOL: f64 = 1e-12;
const STEP_INIT: f64 = 1e-2;
const STEP_MIN: f64 = 1e-13;

fn golden_sweep(obj: &Objective, free: &mut [f64], value: &mut f64, evals: &mut usize) {
    for i in 0..free.len() {
        let (mut a, mut b) = obj.interval(free, i);
        if b <= a {
            continue;
        }
        let mut probe = free.to_vec();
        let mut g = |x: f64| {
            probe[i] = x;
            *evals += 1;
            obj.eval(&probe)
        };
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let (mut fc, mut fd) = (g(c), g(d));
        while b - a > X_TOL {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = g(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = g(d);
            }
        }
        let (x, fx) = if fc >= fd { (c, fc) } else { (d, fd) };
        if fx > *value {
            free[i] = x;
            *value = fx;
        }
    }
}

fn stencil(dim: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..dim {
        for sign in [1.0, -1.0] {
            let mut v = vec![0.0; dim];
            v[i] = sign;
            dirs.push(v);
        }
    }
    for i in 0..dim {
        for j in i + 1..dim {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut v = vec![0.0; dim];
                v[i] = si;
                v[j] = sj;
                dirs.push(v);
            }
        }
    }
    dirs
}

const RADIUS_INIT: f64 = 1e-2;
const RADIUS_MIN: f64 = 1e-14;
const MAX_POLISH: usize = 500;
/// box radius of the first-order stationarity certificate
const CERT_RADIUS: f64 = 1e-3;

/// Trust-region sequential linear programming on the active constraints;
/// follows the ridges along which the pattern stencil cannot climb.
fn polish(obj: &Objective, free: &mut Vec<f64>, value: &mut f64, evals: &mut usize) {
    let mut radius = RADIUS_INIT;
    for _ in 0..MAX_POLISH {
        if radius < RADIUS_MIN {
            break;
        }
        let Some((base, predicted, step)) = obj.model(free, radius) else { break };
        let gain = predicted - base;
        if gain <= 1e-15 {
            break;
        }
        let x: Vec<f64> = free.iter().zip(&step).map(|(a, b)| a + b).collect();
        let v = obj.eval(&x);
        *evals += 1;
        let ratio = (v - *value) / gain;
        if v > *value && ratio >= 0.1 {
            *free = x;
            *value = v;
            if ratio > 0.75 {
                radius = (2.0 * radius).min(RADIUS_INIT);
            }
        } else {
            radius *= 0.25;
        }
    }
}

/// First-order gain the linearized problem still predicts within a small box.
fn stationarity(obj: &Objective, free: &[f64]) -> f64 {
    if free.is_empty() {
        return 0.0;
    }
    obj.model(free, CERT_RADIUS).map_or(f64::INFINITY, |(base, predicted, _)| predicted - base)
}

fn refine(obj: &Objective, start: &[f64], start_value: f64, opts: &SearchOptions) -> Refined {
    let mut free = start.to_vec();
    let mut value = start_value;
    let mut evaluations = 0;
    let mut steps = Vec::new();
    let dirs = stencil(free.len());
    let shift = |x: &[f64], d: &[f64], h: f64| x.iter().zip(d).map(|(a, b)| a + h * b).collect::<Vec<f64>>();
    let mut bracket_width = f64::INFINITY;
    for round in 0..opts.max_rounds {
        let before = value;
        golden_sweep(obj, &mut free, &mut value, &mut evaluations);
        steps.push(TraceStep { round, phase: "golden", k_lower: value, step: X_TOL });
        let mut h = STEP_INIT;
        let mut last_h = h;
        while h >= STEP_MIN {
            last_h = h;
            let trial: Vec<(Vec<f64>, f64)> = dirs
                .iter()
                .map(|d| {
                    let x = shift(&free, d, h);
                    let v = obj.eval(&x);
                    (x, v)
                })
                .collect();
            evaluations += trial.len();
            let best = trial.iter().enumerate().fold(None::<usize>, |acc, (k, t)| match acc {
                Some(b) if trial[b].1 >= t.1 => Some(b),
                _ => Some(k),
            });
            match best {
                Some(k) if trial[k].1 > value => {
                    // pattern move along the successful direction
                    let mut base = trial[k].0.clone();
                    let mut base_value = trial[k].1;
                    loop {
                        let ahead = shift(&base, &dirs[k], h);
                        let v = obj.eval(&ahead);
                        evaluations += 1;
                        if v > base_value {
                            base = ahead;
                            base_value = v;
                        } else {
                            break;
                        }
                    }
                    free = base;
                    value = base_value;
                }
                _ => h *= 0.5,
            }
        }
        steps.push(TraceStep { round, phase: "pattern", k_lower: value, step: last_h });
        polish(obj, &mut free, &mut value, &mut evaluations);
        steps.push(TraceStep { round, phase: "slp", k_lower: value, step: RADIUS_MIN });
        bracket_width = dirs
            .iter()
            .map(|d| obj.eval(&shift(&free, d, last_h)))
            .filter(|v| v.is_finite())
            .map(|v| (value - v).abs())
            .fold(0.0, f64::max);
        evaluations += dirs.len();
        if value <= before && round > 0 {
            break;
        }
    }
    let stationarity = stationarity(obj, &free);
    Refined { free, value, steps, evaluations, bracket_width, stationarity }
}

/// Global search of `K_s` over the free cosines.
pub fn outer_search(s: SpinValue, opts: &SearchOptions) -> Result<LossReport> {
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let obj = Objective { s, builder: QBuilder::new(s) };
    let starts = start_points(s, opts);
    let values: Vec<f64> = starts.par_iter().map(|x| obj.eval(x)).collect();
    let mut order: Vec<usize> = (0..starts.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let (refined, trace) = if s.free_angles() == 0 {
        let r = Refined { free: vec![], value: values[0], steps: vec![], evaluations: 1, bracket_width: 0.0, stationarity: 0.0 };
        (r, 1)
    } else {
        let top: Vec<usize> = order.iter().copied().take(opts.refine_top.max(1)).collect();
        let results: Vec<Refined> = top.par_iter().map(|&i| refine(&obj, &starts[i], values[i], opts)).collect();
        let total: usize = results.iter().map(|r| r.evaluations).sum::<usize>() + starts.len();
        let best = results
            .into_iter()
            .reduce(|a, b| if b.value > a.value { b } else { a })
            .expect("at least one refined start");
        (best, total)
    };
    let best_start = starts[order[0]].clone();
    let grid = AngleGrid::from_free(s, &refined.free)?;
    let inner = inner_from_diagonal(s, &obj.builder.diagonal(&grid))?;
    let converged = refined.bracket_width <= opts.tol && refined.stationarity <= opts.tol;
    let mut report = LossReport::new(s, inner, grid);
    report.solver_trace = Some(SolverTrace {
        starts: starts.len(),
        refined: if s.free_angles() == 0 { 0 } else { opts.refine_top.max(1).min(starts.len()) },
        evaluations: trace,
        best_start,
        steps: refined.steps,
        bracket_width: refined.bracket_width,
        stationarity: refined.stationarity,
        converged,
    });
    report.verification = match analytic_solution(s) {
        Ok(exact) => {
            let delta_info_loss = (report.info_loss - exact.info_loss).abs();
            let a0 = exact.grid_opt.free().first().copied();
            let delta_a0 = a0.map(|a| (a - report.grid_opt.free()[0]).abs());
            let agrees = delta_info_loss <= 1e-6 && delta_a0.is_none_or(|d| d <= 1e-4);
            Verification::Analytic { info_loss: exact.info_loss, a0, delta_info_loss, delta_a0, agrees }
        }
        Err(_) => Verification::Unverified,
    };
    Ok(report)
}

/// Root of `f` in `[lo, hi]` by Newton steps kept inside a shrinking
/// sign-change bracket, with bisection as the fallback.
pub fn safeguarded_newton(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Domain(format!("no sign change on [{lo}, {hi}]")));
    }
    let rising = fb > 0.0;
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == rising {
            b = x;
        } else {
            a = x;
        }
        let d = df(x);
        let newton = x - fx / d;
        let next = if d != 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) || b - a <= 4.0 * f64::EPSILON {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Spin-1 optimal `a₀ = (1 + 8 cos α)/3` with `cos(3α - π) = 1/8`.
///
/// Two angles in `(0, π/2)` satisfy the condition; the one kept gives the
/// root in `(0, 1)`.
pub fn spin1_root_trig() -> f64 {
    let alpha = (std::f64::consts::PI + (1.0f64 / 8.0).acos()) / 3.0;
    (1.0 + 8.0 * alpha.cos()) / 3.0
}

/// Spin-1 optimal `a₀` as the root of `a³ - a² - 5a + 7/3` in `(0, 1)`.
pub fn spin1_root_newton() -> f64 {
    safeguarded_newton(|a| a * a * a - a * a - 5.0 * a + 7.0 / 3.0, |a| 3.0 * a * a - 2.0 * a - 5.0, 0.0, 1.0)
        .expect("sign change on (0, 1)")
}

/// Spin-3/2 optimal `a₀` as the root of `a⁴ - 6a² - 8a + 15/2` in `(0, 1)`.
pub fn spin32_root_newton() -> f64 {
    safeguarded_newton(
        |a| a.powi(4) - 6.0 * a * a - 8.0 * a + 7.5,
        |a| 4.0 * a.powi(3) - 12.0 * a - 8.0,
        0.0,
        1.0,
    )
    .expect("sign change on (0, 1)")
}

/// Closed-form optimum for `s ≤ 3/2`.
pub fn analytic_solution(s: SpinValue) -> Result<LossReport> {
    let top = LambdaWeights::delta(s, s.at(0));
    let (grid, k) = match s.twice() {
        1 => (AngleGrid::unbiased(s), 0.75),
        2 => {
            let a = spin1_root_trig();
            (AngleGrid::from_a(s, a)?, a * (3.0 - a * a) / 2.0)
        }
        3 => {
            let a = spin32_root_newton();
            (AngleGrid::from_a(s, a)?, (45.0 - 24.0 * a - 24.0 * a * a - 8.0 * a.powi(3)) / 32.0)
        }
        _ => return Err(Error::Unsupported(format!("no closed-form optimum for spin {s}"))),
    };
    let inner = InnerSolution { lambdas: top, value: k, dual: vec![], slackness_residual: 0.0 };
    Ok(LossReport::new(s, inner, grid))
}

/// Outcome of [`bound_check`].
#[derive(Clone, Debug, Serialize)]
pub struct BoundCheck {
    pub info_loss: f64,
    pub upper_bound: f64,
    pub within_bounds: bool,
    /// `|q(m₁|s,m₁) - q(m₂|s,m₂)|` for the two constraints active at the optimum
    pub crossing_residual: Option<f64>,
    pub passed: bool,
}

/// Checks `0 < I_s ≤ log₂(2s+1)` and, for `s = 1, 3/2`, that the two active
/// constraints cross at the reported grid.
pub fn bound_check(report: &LossReport) -> Result<BoundCheck> {
    let s = report.s;
    let upper_bound = (s.dim() as f64).log2();
    let within_bounds = report.info_loss > 0.0 && report.info_loss <= upper_bound;
    let crossing_residual = match s.twice() {
        2 | 3 => {
            let t = crate::qcoeff::q_table(s, &report.grid_opt)?;
            let top = s.at(0);
            let inner = s.at(1);
            Some((t.get(top, top, top) - t.get(inner, top, inner)).abs())
        }
        _ => None,
    };
    let passed = within_bounds && crossing_residual.is_none_or(|r| r <= 1e-9);
    Ok(BoundCheck { info_loss: report.info_loss, upper_bound, within_bounds, crossing_residual, passed })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::qcoeff::q_table;
    use approx::assert_abs_diff_eq;

    const I_HALF: f64 = 0.415037499278843818;
    const A0_ONE: f64 = 0.444703448928752590;
    const I_ONE: f64 = 0.682504575363092766;
    const A0_THREE_HALVES: f64 = 0.646153783165475382;
    const I_THREE_HALVES: f64 = 0.886155634749705463;

    fn sp(ts: u32) -> SpinValue {
        SpinValue::from_twice(ts).unwrap()
    }

    #[test]
    fn roots() {
        assert_abs_diff_eq!(spin1_root_trig(), A0_ONE, epsilon = 1e-15);
        assert_abs_diff_eq!(spin1_root_newton(), A0_ONE, epsilon = 1e-15);
        assert_abs_diff_eq!(spin32_root_newton(), A0_THREE_HALVES, epsilon = 1e-15);
        let alpha = (std::f64::consts::PI + (1.0f64 / 8.0).acos()) / 3.0;
        assert_abs_diff_eq!((3.0 * alpha).cos(), -0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(alpha.cos().powi(3), (3.0 * alpha.cos() - 0.125) / 4.0, epsilon = 1e-15);
        assert!(safeguarded_newton(|x| x * x + 1.0, |x| 2.0 * x, 0.0, 1.0).is_err());
    }

    #[test]
    fn analytic_values() {
        let r = analytic_solution(SpinValue::HALF).unwrap();
        assert_abs_diff_eq!(r.info_loss, I_HALF, epsilon = 1e-15);
        let r = analytic_solution(SpinValue::ONE).unwrap();
        assert_abs_diff_eq!(r.info_loss, I_ONE, epsilon = 1e-14);
        assert_abs_diff_eq!(r.visibility, 0.623082638993350245, epsilon = 1e-14);
        let r = analytic_solution(SpinValue::THREE_HALVES).unwrap();
        assert_abs_diff_eq!(r.info_loss, I_THREE_HALVES, epsilon = 1e-14);
        assert_abs_diff_eq!(r.visibility, 0.541053951411012042, epsilon = 1e-14);
        assert!(analytic_solution(sp(4)).is_err());
    }

    #[test]
    fn closed_form_matches_table_minimum() {
        for ts in 1..=3 {
            let r = analytic_solution(sp(ts)).unwrap();
            let inner = inner_max_min(&q_table(r.s, &r.grid_opt).unwrap()).unwrap();
            assert_abs_diff_eq!(inner.value, r.k_value, epsilon = 1e-13);
            assert_abs_diff_eq!(inner.lambdas.weights()[0], 1.0, epsilon = 1e-9);
            assert!(inner.slackness_residual <= 1e-9);
            assert!(bound_check(&r).unwrap().passed);
        }
    }

    #[test]
    fn inner_spin_half() {
        let s = SpinValue::HALF;
        let inner = inner_max_min(&q_table(s, &AngleGrid::unbiased(s)).unwrap()).unwrap();
        assert_eq!(inner.lambdas.weights(), &[1.0, 0.0]);
        assert_abs_diff_eq!(inner.value, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn inner_beats_uniform_and_respects_slackness() {
        for ts in 1..=8 {
            let s = sp(ts);
            let t = q_table(s, &AngleGrid::unbiased(s)).unwrap();
            let inner = inner_max_min(&t).unwrap();
            let uniform = crate::infoloss::visibility(&t, &LambdaWeights::uniform(s)).unwrap();
            assert!(inner.value >= uniform - 1e-14);
            assert!(inner.slackness_residual <= 1e-9, "s={s}: {}", inner.slackness_residual);
        }
    }

    #[test]
    fn lexicographic_tie_break() {
        // every λ is optimal: the payoff does not depend on l
        let q = vec![vec![0.5, 0.5, 0.5], vec![0.5, 0.5, 0.5], vec![0.5, 0.5, 0.5]];
        let inner = inner_from_diagonal(SpinValue::ONE, &q).unwrap();
        assert_eq!(inner.lambdas.weights(), &[1.0, 0.0, 0.0]);
        // the last two columns tie; mass goes to the earlier one
        let q = vec![vec![0.2, 0.6, 0.6], vec![0.3, 0.4, 0.4], vec![0.1, 0.5, 0.5]];
        let inner = inner_from_diagonal(SpinValue::ONE, &q).unwrap();
        assert_abs_diff_eq!(inner.lambdas.weights()[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn search_reproduces_closed_forms() {
        let opts = SearchOptions::default();
        let r = outer_search(SpinValue::HALF, &opts).unwrap();
        assert_abs_diff_eq!(r.info_loss, I_HALF, epsilon = 1e-12);
        let r = outer_search(SpinValue::ONE, &opts).unwrap();
        assert_abs_diff_eq!(r.info_loss, I_ONE, epsilon = 1e-8);
        assert_abs_diff_eq!(r.grid_opt.free()[0], A0_ONE, epsilon = 1e-7);
        assert!(matches!(r.verification, Verification::Analytic { agrees: true, .. }));
        let r = outer_search(SpinValue::THREE_HALVES, &opts).unwrap();
        assert_abs_diff_eq!(r.info_loss, I_THREE_HALVES, epsilon = 1e-8);
        assert_abs_diff_eq!(r.grid_opt.free()[0], A0_THREE_HALVES, epsilon = 1e-7);
        let trace = r.solver_trace.as_ref().unwrap();
        assert!(trace.converged);
        assert!(trace.steps.windows(2).all(|w| w[1].k_lower >= w[0].k_lower));
        assert!(bound_check(&r).unwrap().passed);
    }

    #[test]
    fn search_beyond_closed_forms_is_unverified_and_monotone() {
        let r = outer_search(sp(4), &SearchOptions::default()).unwrap();
        assert!(matches!(r.verification, Verification::Unverified));
        assert!(r.info_loss > I_THREE_HALVES);
        assert!(r.info_loss < (5.0f64).log2());
        let trace = r.solver_trace.unwrap();
        assert!(trace.steps.windows(2).all(|w| w[1].k_lower >= w[0].k_lower));
        let unbiased = inner_max_min(&q_table(r.s, &AngleGrid::unbiased(r.s)).unwrap()).unwrap();
        assert!(r.k_value >= unbiased.value);
    }

    #[test]
    fn search_is_deterministic_across_thread_counts() {
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| outer_search(sp(5), &SearchOptions::default()).unwrap().to_json().unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn rejects_bad_tolerance() {
        let opts = SearchOptions { tol: 0.0, ..SearchOptions::default() };
        assert!(outer_search(SpinValue::ONE, &opts).is_err());
    }
}
