//! Discretization grids, the transition tables `q(m|l,h)` and the
//! approximating spin-component POVMs they induce.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infoloss::ProbVector;
use crate::output::format_float;
use crate::spin::{eigen_projections, outcome_probability, CMatrix, Direction, MagneticIndex, SpinValue};
use crate::tol;
use crate::wigner::{DSquaredTable, Poly};

/// Symmetric partition `1 = c_0 > c_1 > ... > c_{2s+1} = -1` of `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AngleGrid {
    s: SpinValue,
    cosines: Vec<f64>,
}

impl AngleGrid {
    /// Validates a full cosine list of length `2s + 2`.
    pub fn new(s: SpinValue, cosines: Vec<f64>) -> Result<Self> {
        let len = s.dim() + 1;
        if cosines.len() != len {
            return Err(Error::InvalidGrid(format!("expected {len} cosines, got {}", cosines.len())));
        }
        if cosines.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidGrid("non-finite cosine".into()));
        }
        if (cosines[0] - 1.0).abs() > tol::GRID_SYMMETRY || (cosines[len - 1] + 1.0).abs() > tol::GRID_SYMMETRY {
            return Err(Error::InvalidGrid("end points must be 1 and -1".into()));
        }
        for k in 0..len {
            let mirror = cosines[len - 1 - k];
            if (cosines[k] + mirror).abs() > tol::GRID_SYMMETRY {
                return Err(Error::InvalidGrid(format!("c[{k}] = {} is not the negative of its mirror {mirror}", cosines[k])));
            }
        }
        if let Some(k) = (0..len - 1).find(|&k| cosines[k] <= cosines[k + 1]) {
            return Err(Error::InvalidGrid(format!("not strictly decreasing at position {k}")));
        }
        let mut cosines = cosines;
        cosines[0] = 1.0;
        cosines[len - 1] = -1.0;
        Ok(AngleGrid { s, cosines })
    }

    /// Builds the grid from its `⌊s⌋` free cosines `c_1 > ... > c_F > 0`.
    pub fn from_free(s: SpinValue, free: &[f64]) -> Result<Self> {
        let f = s.free_angles();
        if free.len() != f {
            return Err(Error::InvalidGrid(format!("spin {s} has {f} free cosines, got {}", free.len())));
        }
        if free.iter().any(|&c| !(c > 0.0 && c < 1.0)) {
            return Err(Error::InvalidGrid("free cosines must lie in (0, 1)".into()));
        }
        let mut cosines = Vec::with_capacity(s.dim() + 1);
        cosines.push(1.0);
        cosines.extend_from_slice(free);
        if !s.is_integer() {
            cosines.push(0.0);
        }
        cosines.extend(free.iter().rev().map(|c| -c));
        cosines.push(-1.0);
        AngleGrid::new(s, cosines)
    }

    /// The grid with `cos θ_k = (2s+1-2k)/(2s+1)`.
    pub fn unbiased(s: SpinValue) -> Self {
        let d = s.dim() as f64;
        let n = s.dim() as i64;
        let cosines = (0..=n).map(|k| (n - 2 * k) as f64 / d).collect();
        AngleGrid { s, cosines }
    }

    /// Single-parameter grids of spin 1 and 3/2, with `a = cos θ_1`.
    pub fn from_a(s: SpinValue, a: f64) -> Result<Self> {
        if s.free_angles() != 1 {
            return Err(Error::Unsupported(format!("a single parameter a describes only spin 1 and 3/2, not {s}")));
        }
        AngleGrid::from_free(s, &[a])
    }

    pub fn spin(&self) -> SpinValue {
        self.s
    }

    pub fn cosines(&self) -> &[f64] {
        &self.cosines
    }

    pub fn free(&self) -> &[f64] {
        &self.cosines[1..=self.s.free_angles()]
    }

    pub fn angles(&self) -> Vec<f64> {
        self.cosines.iter().map(|c| c.acos()).collect()
    }

    /// Length `c_{s-m} - c_{s-m+1}` of the cell of outcome `m`.
    pub fn cell_width(&self, m: MagneticIndex) -> f64 {
        let p = m.position(self.s);
        self.cosines[p] - self.cosines[p + 1]
    }
}

impl TryFrom<Vec<f64>> for AngleGrid {
    type Error = Error;

    fn try_from(cosines: Vec<f64>) -> Result<Self> {
        if cosines.len() < 3 {
            return Err(Error::InvalidGrid("at least three cosines are needed".into()));
        }
        let s = SpinValue::from_twice(cosines.len() as u32 - 2)?;
        AngleGrid::new(s, cosines)
    }
}

impl From<AngleGrid> for Vec<f64> {
    fn from(g: AngleGrid) -> Self {
        g.cosines
    }
}

/// Mixture weights `λ_l` on the simplex, in array order `l = s, ..., -s`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaWeights {
    s: SpinValue,
    weights: Vec<f64>,
}

impl LambdaWeights {
    /// Weights are checked against the simplex; a total off by no more than
    /// [`tol::PROBABILITY`] is renormalized.
    pub fn new(s: SpinValue, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != s.dim() {
            return Err(Error::InvalidWeights(format!("expected {} weights, got {}", s.dim(), weights.len())));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < -tol::PROBABILITY) {
            return Err(Error::InvalidWeights(format!("weight {w} is not nonnegative")));
        }
        let weights: Vec<f64> = weights.into_iter().map(|w| w.max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > tol::PROBABILITY {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(LambdaWeights { s, weights: weights.into_iter().map(|w| w / total).collect() })
    }

    /// All mass on one `l`.
    pub fn delta(s: SpinValue, l: MagneticIndex) -> Self {
        let mut weights = vec![0.0; s.dim()];
        weights[l.position(s)] = 1.0;
        LambdaWeights { s, weights }
    }

    pub fn uniform(s: SpinValue) -> Self {
        LambdaWeights { s, weights: vec![1.0 / s.dim() as f64; s.dim()] }
    }

    pub fn spin(&self) -> SpinValue {
        self.s
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, l: MagneticIndex) -> f64 {
        self.weights[l.position(self.s)]
    }
}

/// Antiderivatives of all `|d_{l,h}|²`; turns a grid into a q-table cheaply.
#[derive(Clone, Debug)]
pub struct QBuilder {
    s: SpinValue,
    dens: Vec<Poly>,
    anti: Vec<Poly>,
}

impl QBuilder {
    pub fn new(s: SpinValue) -> Self {
        let n = s.dim();
        let table = DSquaredTable::new(s);
        let dens: Vec<Poly> = (0..n * n).map(|i| table.poly_at(i / n, i % n).clone()).collect();
        let anti = dens.iter().map(Poly::antiderivative).collect();
        QBuilder { s, dens, anti }
    }

    pub fn spin(&self) -> SpinValue {
        self.s
    }

    fn q_at(&self, grid: &AngleGrid, m_pos: usize, l_pos: usize, h_pos: usize) -> f64 {
        let p = &self.anti[l_pos * self.s.dim() + h_pos];
        let c = grid.cosines();
        (self.s.value() + 0.5) * (p.eval(c[m_pos]) - p.eval(c[m_pos + 1]))
    }

    pub fn table(&self, grid: &AngleGrid) -> Result<QTable> {
        check_spin(self.s, grid.spin())?;
        let n = self.s.dim();
        let q = (0..n * n * n)
            .into_par_iter()
            .map(|i| self.q_at(grid, i / (n * n), (i / n) % n, i % n))
            .collect();
        Ok(QTable { s: self.s, grid: grid.clone(), q })
    }

    /// `Q[m][l] = q(m|l,m)`, the coefficients of the inner max-min problem.
    pub fn diagonal(&self, grid: &AngleGrid) -> Vec<Vec<f64>> {
        let n = self.s.dim();
        (0..n).map(|m| (0..n).map(|l| self.q_at(grid, m, l, m)).collect()).collect()
    }

    /// `∂Q[m][l]/∂c_k` for the free cosines, indexed `[k][m][l]`.
    pub fn diagonal_jacobian(&self, grid: &AngleGrid) -> Vec<Vec<Vec<f64>>> {
        let n = self.s.dim();
        let c = grid.cosines();
        let half = self.s.value() + 0.5;
        // c_k sits at index k and -c_k at index n - k
        let d_dc = |m: usize, l: usize, j: usize| {
            let p = &self.dens[l * n + m];
            let mut v = 0.0;
            if j == m {
                v += p.eval(c[j]);
            }
            if j == m + 1 {
                v -= p.eval(c[j]);
            }
            half * v
        };
        (1..=self.s.free_angles())
            .map(|k| (0..n).map(|m| (0..n).map(|l| d_dc(m, l, k) - d_dc(m, l, n - k)).collect()).collect())
            .collect()
    }
}

fn check_spin(expected: SpinValue, got: SpinValue) -> Result<()> {
    if expected != got {
        return Err(Error::InvalidGrid(format!("spin {got} does not match spin {expected}")));
    }
    Ok(())
}

/// `q(m|l,h)` for all outcomes `m`, sphere labels `l` and input states `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    s: SpinValue,
    grid: AngleGrid,
    q: Vec<f64>,
}

pub fn q_table(s: SpinValue, grid: &AngleGrid) -> Result<QTable> {
    QBuilder::new(s).table(grid)
}

/// Maximal violations of the structural properties of a q-table.
#[derive(Clone, Debug, Default, Serialize)]
pub struct QResiduals {
    /// smallest entry; must be strictly positive
    pub min_entry: f64,
    /// `|Σ_m q(m|l,h) - 1|`
    pub normalization: f64,
    /// `q(m|l,h) = q(m|h,l)`
    pub swap: f64,
    /// `q(m|l,h) = q(m|-l,-h)`
    pub reflect_labels: f64,
    /// `q(m|l,h) = q(-m|l,-h)`
    pub reflect_outcome: f64,
    /// both sum rules against `(s+1/2)(c_{s-m} - c_{s-m+1})`
    pub sum_rule: f64,
}

impl QResiduals {
    pub fn max_violation(&self) -> f64 {
        [self.normalization, self.swap, self.reflect_labels, self.reflect_outcome, self.sum_rule]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.min_entry > 0.0 && self.max_violation() <= tolerance
    }
}

#[derive(Serialize, Deserialize)]
struct QJson {
    s: SpinValue,
    grid: AngleGrid,
    /// one block per outcome `m`; rows `l`, columns `h`, both from `s` down
    q: Vec<QJsonBlock>,
}

#[derive(Serialize, Deserialize)]
struct QJsonBlock {
    m: String,
    rows: Vec<Vec<f64>>,
}

impl QTable {
    pub fn spin(&self) -> SpinValue {
        self.s
    }

    pub fn grid(&self) -> &AngleGrid {
        &self.grid
    }

    pub fn at(&self, m_pos: usize, l_pos: usize, h_pos: usize) -> f64 {
        let n = self.s.dim();
        self.q[(m_pos * n + l_pos) * n + h_pos]
    }

    pub fn get(&self, m: MagneticIndex, l: MagneticIndex, h: MagneticIndex) -> f64 {
        self.at(m.position(self.s), l.position(self.s), h.position(self.s))
    }

    /// `Σ_l λ_l q(m|l,h)` as `w[m][h]`.
    pub fn mixed(&self, lambdas: &LambdaWeights) -> Result<Vec<Vec<f64>>> {
        check_lambdas(self.s, lambdas)?;
        let n = self.s.dim();
        let w = lambdas.weights();
        Ok((0..n)
            .map(|m| (0..n).map(|h| (0..n).map(|l| w[l] * self.at(m, l, h)).sum()).collect())
            .collect())
    }

    pub fn residuals(&self) -> QResiduals {
        let n = self.s.dim();
        let half = self.s.value() + 0.5;
        let c = self.grid.cosines();
        let mut r = QResiduals { min_entry: f64::INFINITY, ..Default::default() };
        let bump = |slot: &mut f64, v: f64| *slot = slot.max(v.abs());
        let flip = |p: usize| n - 1 - p;
        for m in 0..n {
            let target = half * (c[m] - c[m + 1]);
            for l in 0..n {
                let row: f64 = (0..n).map(|h| self.at(m, l, h)).sum();
                let col: f64 = (0..n).map(|h| self.at(m, h, l)).sum();
                bump(&mut r.sum_rule, row - target);
                bump(&mut r.sum_rule, col - target);
                for h in 0..n {
                    let q = self.at(m, l, h);
                    r.min_entry = r.min_entry.min(q);
                    bump(&mut r.swap, q - self.at(m, h, l));
                    bump(&mut r.reflect_labels, q - self.at(m, flip(l), flip(h)));
                    bump(&mut r.reflect_outcome, q - self.at(flip(m), l, flip(h)));
                }
            }
        }
        for l in 0..n {
            for h in 0..n {
                let total: f64 = (0..n).map(|m| self.at(m, l, h)).sum();
                bump(&mut r.normalization, total - 1.0);
            }
        }
        r
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["m", "l", "h", "q"])?;
        let idx: Vec<MagneticIndex> = self.s.indices().collect();
        for (mp, m) in idx.iter().enumerate() {
            for (lp, l) in idx.iter().enumerate() {
                for (hp, h) in idx.iter().enumerate() {
                    w.write_record([m.to_string(), l.to_string(), h.to_string(), format_float(self.at(mp, lp, hp))])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let n = self.s.dim();
        let q = self
            .s
            .indices()
            .enumerate()
            .map(|(mp, m)| QJsonBlock {
                m: m.to_string(),
                rows: (0..n).map(|l| (0..n).map(|h| self.at(mp, l, h)).collect()).collect(),
            })
            .collect();
        Ok(serde_json::to_string_pretty(&QJson { s: self.s, grid: self.grid.clone(), q })?)
    }

    /// Inverse of [`QTable::to_json`]; shape and labels are checked.
    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: QJson = serde_json::from_str(text)?;
        let s = parsed.s;
        check_spin(s, parsed.grid.spin())?;
        let n = s.dim();
        if parsed.q.len() != n {
            return Err(Error::Domain(format!("expected {n} outcome blocks, got {}", parsed.q.len())));
        }
        let mut q = Vec::with_capacity(n * n * n);
        for (block, m) in parsed.q.iter().zip(s.indices()) {
            if block.m != m.to_string() {
                return Err(Error::Domain(format!("outcome block {} out of order, expected {m}", block.m)));
            }
            if block.rows.len() != n || block.rows.iter().any(|r| r.len() != n) {
                return Err(Error::Domain(format!("block {m} is not {n}x{n}")));
            }
            q.extend(block.rows.iter().flatten().copied());
        }
        Ok(QTable { s, grid: parsed.grid, q })
    }
}

fn check_lambdas(s: SpinValue, lambdas: &LambdaWeights) -> Result<()> {
    if lambdas.spin() != s {
        return Err(Error::InvalidWeights(format!("weights for spin {} used with spin {s}", lambdas.spin())));
    }
    Ok(())
}

type ClosedForm = fn(f64) -> f64;

fn literal_entries(s: SpinValue) -> Vec<(i32, i32, i32, ClosedForm)> {
    let mut e: Vec<(i32, i32, i32, ClosedForm)> = Vec::new();
    match s.twice() {
        2 => {
            let f1: ClosedForm = |a| 1.0 - (1.0 + a).powi(3) / 8.0;
            let f2: ClosedForm = |a| (1.0 - a).powi(3) / 8.0;
            let f3: ClosedForm = |a| (2.0 + a) / 4.0 * (1.0 - a).powi(2);
            for p in [2, -2] {
                e.push((p, 2, p, f1));
                e.push((p, -2, -p, f1));
                e.push((-p, 2, p, f2));
                e.push((-p, -2, -p, f2));
                e.push((2, 0, p, f3));
                e.push((2, p, 0, f3));
                e.push((-2, 0, p, f3));
                e.push((-2, p, 0, f3));
                e.push((p, 0, 0, |a| (1.0 - a.powi(3)) / 2.0));
                e.push((0, 0, p, |a| a / 2.0 * (3.0 - a * a)));
                e.push((0, p, 0, |a| a / 2.0 * (3.0 - a * a)));
                e.push((0, 2, p, |a| a / 4.0 * (3.0 + a * a)));
                e.push((0, -2, -p, |a| a / 4.0 * (3.0 + a * a)));
            }
            e.push((0, 0, 0, |a| a.powi(3)));
        }
        3 => {
            for p in [1, -1] {
                e.push((3 * p, 3 * p, 3, |a| (15.0 - 4.0 * a - 6.0 * a.powi(2) - 4.0 * a.powi(3) - a.powi(4)) / 16.0));
                e.push((3 * p, 3 * p, -3, |a| (1.0 - 4.0 * a + 6.0 * a.powi(2) - 4.0 * a.powi(3) + a.powi(4)) / 16.0));
                e.push((3 * p, 3 * p, 1, |a| (11.0 - 12.0 * a - 6.0 * a.powi(2) + 4.0 * a.powi(3) + 3.0 * a.powi(4)) / 16.0));
                e.push((3 * p, 3 * p, -1, |a| (5.0 - 12.0 * a + 6.0 * a.powi(2) + 4.0 * a.powi(3) - 3.0 * a.powi(4)) / 16.0));
                e.push((3 * p, p, 1, |a| (7.0 - 4.0 * a + 10.0 * a.powi(2) - 4.0 * a.powi(3) - 9.0 * a.powi(4)) / 16.0));
                e.push((3 * p, p, -1, |a| (9.0 - 4.0 * a - 10.0 * a.powi(2) - 4.0 * a.powi(3) + 9.0 * a.powi(4)) / 16.0));
                e.push((p, 3 * p, 3, |a| a / 16.0 * (4.0 + 6.0 * a + 4.0 * a.powi(2) + a.powi(3))));
                e.push((p, 3 * p, -3, |a| a / 16.0 * (4.0 - 6.0 * a + 4.0 * a.powi(2) - a.powi(3))));
                e.push((p, 3 * p, 1, |a| a / 16.0 * (12.0 + 6.0 * a - 4.0 * a.powi(2) - 3.0 * a.powi(3))));
                e.push((p, 3 * p, -1, |a| a / 16.0 * (12.0 - 6.0 * a - 4.0 * a.powi(2) + 3.0 * a.powi(3))));
                e.push((p, p, 1, |a| a / 16.0 * (4.0 - 10.0 * a + 4.0 * a.powi(2) + 9.0 * a.powi(3))));
                e.push((p, p, -1, |a| a / 16.0 * (4.0 + 10.0 * a + 4.0 * a.powi(2) - 9.0 * a.powi(3))));
            }
        }
        _ => {}
    }
    e
}

/// Closed-form `q_a(m|l,h)` for `s ≤ 3/2`, read from the published tables
/// and completed by the symmetries of the q-coefficients.
///
/// For `s = 1/2` the parameter `a` is ignored.
pub fn q_closed_form(s: SpinValue, a: f64, m: MagneticIndex, l: MagneticIndex, h: MagneticIndex) -> Result<f64> {
    if s.twice() > 3 {
        return Err(Error::Unsupported(format!("no closed form q-table for spin {s}")));
    }
    if s.twice() == 1 {
        return Ok(0.5 + 2.0 * l.value() * h.value() * m.value());
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain(format!("a = {a} outside (0, 1)")));
    }
    let entries = literal_entries(s);
    let mut orbit = vec![(m.twice(), l.twice(), h.twice())];
    let mut i = 0;
    while i < orbit.len() {
        let (tm, tl, th) = orbit[i];
        if let Some(&(_, _, _, f)) = entries.iter().find(|e| (e.0, e.1, e.2) == (tm, tl, th)) {
            return Ok(f(a));
        }
        for next in [(tm, th, tl), (tm, -tl, -th), (-tm, tl, -th)] {
            if !orbit.contains(&next) {
                orbit.push(next);
            }
        }
        i += 1;
    }
    Err(Error::Unsupported(format!("no closed form entry reachable for q({m}|{l},{h})")))
}

/// `M_{λ,[n]}(m) = Σ_h (Σ_l λ_l q(m|l,h)) A_n(h)`, in array order of `m`.
pub fn marginal_povm(table: &QTable, lambdas: &LambdaWeights, n: &Direction) -> Result<Vec<CMatrix>> {
    let w = table.mixed(lambdas)?;
    let proj = eigen_projections(table.spin(), n);
    let dim = table.spin().dim();
    Ok(w
        .iter()
        .map(|row| {
            row.iter()
                .zip(&proj)
                .fold(CMatrix::zeros(dim, dim), |acc, (c, p)| acc + &p.matrix * Complex64::from(*c))
        })
        .collect())
}

/// Distribution of `A_n` in the state `rho`.
pub fn target_distribution(s: SpinValue, n: &Direction, rho: &CMatrix) -> Result<ProbVector> {
    let p = eigen_projections(s, n)
        .iter()
        .map(|a| outcome_probability(rho, &a.matrix))
        .collect::<Result<Vec<_>>>()?;
    ProbVector::new(p)
}

/// `M^ρ_{λ,[n]}(m) = Σ_{l,h} q(m|l,h) λ_l A_n^ρ(h)`.
pub fn marginal_distribution(table: &QTable, lambdas: &LambdaWeights, n: &Direction, rho: &CMatrix) -> Result<ProbVector> {
    let target = target_distribution(table.spin(), n, rho)?;
    let w = table.mixed(lambdas)?;
    let p = w.iter().map(|row| row.iter().zip(target.as_slice()).map(|(a, b)| a * b).sum()).collect();
    ProbVector::new(p)
}
