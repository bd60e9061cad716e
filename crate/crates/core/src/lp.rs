//! Small dense linear programs: a two-phase tableau simplex.
//!
//! Sizes here are a few dozen variables at most, so the tableau is kept
//! dense and rebuilt from the original data after every pivot.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-10;
const COST_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 50_000;
const BLAND_AFTER: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Constraint { coeffs, relation, rhs }
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

struct Tableau {
    /// original constraint matrix and right-hand side, one row per constraint
    a0: DMatrix<f64>,
    b0: DVector<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c];
            if f == 0.0 {
                continue;
            }
            for (v, pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.rows[i][c] = 0.0;
            self.rhs[i] -= f * pivot_rhs;
        }
        self.basis[r] = c;
        self.pivots += 1;
        self.reinvert();
    }

    /// Rebuilds the tableau as `B⁻¹ [A | b]` from the original data so that
    /// rounding does not accumulate across pivots.
    fn reinvert(&mut self) {
        let b = self.a0.select_columns(&self.basis);
        let lu = b.lu();
        let (Some(t), Some(x)) = (lu.solve(&self.a0), lu.solve(&self.b0)) else { return };
        for (i, row) in self.rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = t[(i, j)];
            }
        }
        for (i, &col) in self.basis.iter().enumerate() {
            for (k, row) in self.rows.iter_mut().enumerate() {
                row[col] = if k == i { 1.0 } else { 0.0 };
            }
        }
        self.rhs = x.iter().map(|v| v.max(0.0)).collect();
    }

    fn remove_row(&mut self, r: usize) {
        self.rows.remove(r);
        self.rhs.remove(r);
        self.basis.remove(r);
        self.a0 = self.a0.clone().remove_row(r);
        self.b0 = self.b0.clone().remove_row(r);
    }

    /// Maximizes `cost · x` over the columns flagged in `allowed`.
    ///
    /// Dantzig pricing, switching to Bland's rule after a run of degenerate
    /// pivots.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> Result<()> {
        let ncols = cost.len();
        let mut degenerate_run = 0;
        loop {
            if self.pivots > MAX_PIVOTS {
                return Err(Error::Lp("pivot limit reached".into()));
            }
            let mut reduced = cost.to_vec();
            for (row, &b) in self.rows.iter().zip(&self.basis) {
                let cb = cost[b];
                if cb != 0.0 {
                    for (r, a) in reduced.iter_mut().zip(row) {
                        *r -= cb * a;
                    }
                }
            }
            let bland = degenerate_run > BLAND_AFTER;
            let candidates = (0..ncols).filter(|&j| allowed[j] && reduced[j] > COST_EPS);
            let enter = if bland {
                candidates.min()
            } else {
                candidates.max_by(|&a, &b| reduced[a].total_cmp(&reduced[b]).then(b.cmp(&a)))
            };
            let Some(enter) = enter else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[enter];
                if a <= PIVOT_EPS {
                    continue;
                }
                let ratio = self.rhs[i] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((k, best)) => {
                        let tie = (ratio - best).abs() <= 1e-13 * best.abs().max(1.0);
                        let better_tie = if bland {
                            self.basis[i] < self.basis[k]
                        } else {
                            a > self.rows[k][enter]
                        };
                        if (!tie && ratio < best) || (tie && better_tie) {
                            Some((i, ratio))
                        } else {
                            Some((k, best))
                        }
                    }
                };
            }
            let Some((r, ratio)) = leave else {
                return Err(Error::Lp("objective is unbounded".into()));
            };
            degenerate_run = if ratio <= 1e-13 { degenerate_run + 1 } else { 0 };
            self.pivot(r, enter);
        }
    }
}

/// Maximizes `objective · x` subject to `constraints` and `x ≥ 0`.
pub fn maximize(objective: &[f64], constraints: &[Constraint]) -> Result<LpSolution> {
    let n = objective.len();
    if let Some(c) = constraints.iter().find(|c| c.coeffs.len() != n) {
        return Err(Error::Lp(format!("constraint has {} coefficients, expected {n}", c.coeffs.len())));
    }
    let m = constraints.len();
    let slack_count = constraints.iter().filter(|c| c.relation != Relation::Eq).count();
    let mut normalized: Vec<(Vec<f64>, Relation, f64)> = constraints
        .iter()
        .map(|c| {
            if c.rhs < 0.0 {
                let rel = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (c.coeffs.iter().map(|v| -v).collect(), rel, -c.rhs)
            } else {
                (c.coeffs.clone(), c.relation, c.rhs)
            }
        })
        .collect();
    let art_count = normalized.iter().filter(|c| c.1 != Relation::Le).count();
    let ncols = n + slack_count + art_count;
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let (mut next_slack, mut next_art) = (n, n + slack_count);
    for (coeffs, rel, b) in normalized.drain(..) {
        let mut row = coeffs;
        row.resize(ncols, 0.0);
        match rel {
            Relation::Le => {
                row[next_slack] = 1.0;
                basis.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                row[next_slack] = -1.0;
                next_slack += 1;
                row[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
            Relation::Eq => {
                row[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
        }
        rows.push(row);
        rhs.push(b);
    }
    let a0 = DMatrix::from_fn(m, ncols, |i, j| rows[i][j]);
    let b0 = DVector::from_vec(rhs.clone());
    let mut tab = Tableau { a0, b0, rows, rhs, basis, pivots: 0 };
    let is_art = |j: usize| j >= n + slack_count;

    if art_count > 0 {
        let cost: Vec<f64> = (0..ncols).map(|j| if is_art(j) { -1.0 } else { 0.0 }).collect();
        tab.optimize(&cost, &vec![true; ncols])?;
        let infeasibility: f64 = tab.basis.iter().zip(&tab.rhs).filter(|(b, _)| is_art(**b)).map(|(_, v)| *v).sum();
        if infeasibility > 1e-9 {
            return Err(Error::Lp(format!("infeasible (phase one residual {infeasibility:e})")));
        }
        // drive remaining zero-level artificials out of the basis
        let mut r = 0;
        while r < tab.rows.len() {
            if is_art(tab.basis[r]) {
                if let Some(c) = (0..n + slack_count).find(|&c| tab.rows[r][c].abs() > PIVOT_EPS) {
                    tab.pivot(r, c);
                } else {
                    tab.remove_row(r);
                    continue;
                }
            }
            r += 1;
        }
    }

    let mut cost = vec![0.0; ncols];
    cost[..n].copy_from_slice(objective);
    let allowed: Vec<bool> = (0..ncols).map(|j| !is_art(j)).collect();
    tab.optimize(&cost, &allowed)?;
    let mut x = vec![0.0; n];
    for (&b, &v) in tab.basis.iter().zip(&tab.rhs) {
        if b < n {
            x[b] = v.max(0.0);
        }
    }
    let objective = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { x, objective, pivots: tab.pivots })
}

/// Value and optimal strategies of the zero-sum game with payoff
/// `q[i][j]`, where the column player maximizes `min_i Σ_j q[i][j] x_j`.
#[derive(Clone, Debug)]
pub struct GameSolution {
    pub value: f64,
    /// optimal mixed strategy of the minimizing row player
    pub rows: Vec<f64>,
}

/// Solves the game through `max Σy` subject to `qᵀy ≤ 1`, `y ≥ 0`, whose
/// optimum is the reciprocal of the game value. Payoffs that are not all
/// positive are shifted first; the value shifts with them.
pub fn game_value(q: &[Vec<f64>]) -> Result<GameSolution> {
    let rows = q.len();
    let cols = q.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || q.iter().any(|r| r.len() != cols) {
        return Err(Error::Lp("payoff matrix must be nonempty and rectangular".into()));
    }
    if q.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Lp("payoff entries must be finite".into()));
    }
    let min = q.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let shift = if min > 0.0 { 0.0 } else { 1.0 - min };
    let constraints: Vec<Constraint> =
        (0..cols).map(|j| Constraint::new((0..rows).map(|i| q[i][j] + shift).collect(), Relation::Le, 1.0)).collect();
    let sol = maximize(&vec![1.0; rows], &constraints)?;
    let total = sol.objective;
    Ok(GameSolution { value: 1.0 / total - shift, rows: sol.x.iter().map(|y| y / total).collect() })
}
