//! Two and three orthogonal spin components: cloning-based joint
//! measurements, the spin-1/2 covariant families and the ordering of the
//! resulting information losses.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::infoloss::{relative_entropy, ProbVector};
use crate::minimize::{analytic_solution, outer_search, SearchOptions};
use crate::output::format_float;
use crate::spin::{eigen_projection, eigen_projections, spin_matrices, trace_product, CMatrix, Direction, MagneticIndex, SpinValue};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Axis::X => Direction::X,
            Axis::Y => Direction::Y,
            Axis::Z => Direction::Z,
        }
    }
}

fn check_components(r: u32) -> Result<()> {
    if r == 2 || r == 3 {
        Ok(())
    } else {
        Err(Error::Domain(format!("number of orthogonal components must be 2 or 3, got {r}")))
    }
}

fn check_axis(r: u32, axis: Axis) -> Result<()> {
    if axis.index() >= r as usize {
        return Err(Error::Domain(format!("axis {axis:?} is not among the {r} measured components")));
    }
    Ok(())
}

/// Optimal `r`-cloning of a spin `s` followed by one component per clone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CloningSpec {
    pub s: SpinValue,
    pub r: u32,
}

impl CloningSpec {
    pub fn new(s: SpinValue, r: u32) -> Result<Self> {
        check_components(r)?;
        Ok(CloningSpec { s, r })
    }

    /// `λ_{d,r} = (d + r) / (r (d + 1))` with `d = 2s + 1`.
    pub fn weight(&self) -> f64 {
        let d = self.s.dim() as f64;
        let r = self.r as f64;
        (d + r) / (r * (d + 1.0))
    }

    /// Visibility `(s + r)/(r (s + 1))` as the reduced integer fraction
    /// `(2s + 2r) / (r (2s + 2))`.
    pub fn visibility_fraction(&self) -> (u64, u64) {
        let ts = self.s.twice() as u64;
        let r = self.r as u64;
        let (num, den) = (ts + 2 * r, r * (ts + 2));
        let g = gcd(num, den);
        (num / g, den / g)
    }

    pub fn visibility(&self) -> f64 {
        let (num, den) = self.visibility_fraction();
        num as f64 / den as f64
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn marginal_along(spec: &CloningSpec, n: &Direction, m: MagneticIndex) -> CMatrix {
    let d = spec.s.dim();
    let lambda = spec.weight();
    eigen_projection(spec.s, n, m).matrix * Complex64::from(lambda)
        + CMatrix::identity(d, d) * Complex64::from((1.0 - lambda) / d as f64)
}

/// `λ_{d,r} X_i(m) + (1 - λ_{d,r}) 𝟙/d`.
pub fn cloning_marginal(spec: &CloningSpec, axis: Axis, m: MagneticIndex) -> Result<CMatrix> {
    check_axis(spec.r, axis)?;
    Ok(marginal_along(spec, &axis.direction(), m))
}

/// Device information loss `log₂(r(s+1)/(s+r))` of the cloning measurement.
pub fn cloning_device_loss(spec: &CloningSpec) -> f64 {
    let (num, den) = spec.visibility_fraction();
    (den as f64 / num as f64).log2()
}

/// The same loss as the largest relative entropy over all eigenstates of the
/// measured components, computed from the POVM matrices.
pub fn cloning_loss_by_eigenstates(spec: &CloningSpec) -> Result<f64> {
    let s = spec.s;
    let mut worst: f64 = 0.0;
    for &axis in &Axis::ALL[..spec.r as usize] {
        let n = axis.direction();
        let marginal: Vec<CMatrix> = s.indices().map(|m| cloning_marginal(spec, axis, m)).collect::<Result<_>>()?;
        for (k, rho) in eigen_projections(s, &n).iter().enumerate() {
            let target = ProbVector::point(s.dim(), k);
            let approx = ProbVector::new(marginal.iter().map(|e| trace_product(&rho.matrix, e)).collect())?;
            worst = worst.max(relative_entropy(&target, &approx)?);
        }
    }
    Ok(worst)
}

/// Member `c` of the covariant spin-1/2 family for `r` components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpinHalfFamilyParam {
    pub c: f64,
    pub r: u32,
}

impl SpinHalfFamilyParam {
    pub fn new(c: f64, r: u32) -> Result<Self> {
        check_components(r)?;
        let bound = 1.0 / (r as f64).sqrt();
        if !(c.abs() <= bound + 1e-15) {
            return Err(Error::Domain(format!("|c| = {} exceeds 1/√{r} = {bound}", c.abs())));
        }
        Ok(SpinHalfFamilyParam { c, r })
    }

    /// `log₂(2/(1+c))`, valid for `c ≥ 0`.
    pub fn device_loss(&self) -> f64 {
        (2.0 / (1.0 + self.c.abs())).log2()
    }
}

/// `𝟙/2 + 2 c m S_i`.
pub fn spinhalf_family_marginal(param: &SpinHalfFamilyParam, axis: Axis, m: MagneticIndex) -> Result<CMatrix> {
    check_axis(param.r, axis)?;
    let s = SpinValue::HALF;
    let sm = spin_matrices(s);
    Ok(CMatrix::identity(2, 2) * Complex64::from(0.5) + sm.axis(axis.index()) * Complex64::from(2.0 * param.c * m.value()))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpinHalfOptimum {
    pub r: u32,
    pub info_loss: f64,
    pub visibility: f64,
}

/// Minimum information loss `log₂(2/(1 + 1/√r))` of `r` orthogonal spin-1/2
/// components, with the optimal visibility `(1 + 1/√r)/2`.
pub fn spinhalf_min_loss(r: u32) -> Result<SpinHalfOptimum> {
    check_components(r)?;
    let c = 1.0 / (r as f64).sqrt();
    let info_loss = (2.0 / (1.0 + c)).log2();
    let visibility = (1.0 + c) / 2.0;
    let consistency = (info_loss + visibility.log2()).abs();
    if consistency > 1e-15 {
        return Err(Error::Domain(format!("loss and visibility inconsistent by {consistency:e}")));
    }
    Ok(SpinHalfOptimum { r, info_loss, visibility })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueKind {
    Exact,
    UpperBound,
    Numeric,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueKind::Exact => "exact",
            ValueKind::UpperBound => "upper-bound",
            ValueKind::Numeric => "numeric",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderingRow {
    pub s: SpinValue,
    pub quantity: String,
    pub value: f64,
    pub kind: ValueKind,
}

#[derive(Clone, Debug, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    /// human-readable statement with the spin it was evaluated at
    pub statement: String,
    pub lhs: f64,
    pub relation: String,
    pub rhs: f64,
    pub margin: f64,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct OrderingOptions {
    /// largest accepted `max_s`
    pub max_spin_cap: SpinValue,
    /// numerical `I_s[A_∞]` is computed for `3/2 < s ≤ numeric_cap`
    pub numeric_cap: SpinValue,
    pub search: SearchOptions,
}

impl Default for OrderingOptions {
    fn default() -> Self {
        OrderingOptions {
            max_spin_cap: SpinValue::from_twice(200).expect("valid"),
            numeric_cap: SpinValue::from_twice(4).expect("valid"),
            search: SearchOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderingReport {
    pub max_s: SpinValue,
    pub rows: Vec<OrderingRow>,
    pub checks: Vec<InequalityCheck>,
}

pub const CLONING_R2: &str = "cloning_bound_r2";
pub const CLONING_R3: &str = "cloning_bound_r3";
pub const LOSS_A2: &str = "I_A2";
pub const LOSS_A3: &str = "I_A3";
pub const LOSS_AINF: &str = "I_Ainf";

impl OrderingReport {
    pub fn value(&self, s: SpinValue, quantity: &str) -> Option<&OrderingRow> {
        self.rows.iter().find(|r| r.s == s && r.quantity == quantity)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn quantities(&self) -> Vec<String> {
        let mut q: Vec<String> = Vec::new();
        for r in &self.rows {
            if !q.contains(&r.quantity) {
                q.push(r.quantity.clone());
            }
        }
        q
    }

    pub fn rows_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["s", "quantity", "value", "kind"])?;
        for r in &self.rows {
            w.write_record([r.s.to_string(), r.quantity.clone(), format_float(r.value), r.kind.to_string()])?;
        }
        into_string(w)
    }

    pub fn checks_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "statement", "lhs", "relation", "rhs", "margin", "passed"])?;
        for c in &self.checks {
            w.write_record([
                c.name.clone(),
                c.statement.clone(),
                format_float(c.lhs),
                c.relation.clone(),
                format_float(c.rhs),
                format_float(c.margin),
                c.passed.to_string(),
            ])?;
        }
        into_string(w)
    }

    /// `s,value` pairs of one quantity, for external plotting.
    pub fn plot_csv(&self, quantity: &str) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["s", "value"])?;
        for r in self.rows.iter().filter(|r| r.quantity == quantity) {
            w.write_record([format_float(r.s.value()), format_float(r.value)])?;
        }
        into_string(w)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

impl fmt::Display for OrderingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>6}  {:<18} {:>20}  kind", "s", "quantity", "value [bits]")?;
        for r in &self.rows {
            writeln!(f, "{:>6}  {:<18} {:>20.15}  {}", r.s.to_string(), r.quantity, r.value, r.kind)?;
        }
        writeln!(f)?;
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {:<12} {}   ({:.12} {} {:.12})",
                if c.passed { "pass" } else { "FAIL" },
                c.name,
                c.statement,
                c.lhs,
                c.relation,
                c.rhs
            )?;
        }
        Ok(())
    }
}

struct Checker {
    checks: Vec<InequalityCheck>,
}

impl Checker {
    fn add(&mut self, name: &str, statement: String, lhs: f64, relation: &str, rhs: f64, margin: f64) {
        let passed = match relation {
            "<" => lhs + margin < rhs,
            "<=" => lhs + margin <= rhs,
            "==" => lhs == rhs,
            _ => false,
        };
        self.checks.push(InequalityCheck { name: name.into(), statement, lhs, relation: relation.into(), rhs, margin, passed });
    }
}

/// Tabulates the known information losses up to `max_s` and evaluates the
/// orderings and bounds between them.
pub fn ordering_report(max_s: SpinValue, opts: &OrderingOptions) -> Result<OrderingReport> {
    if max_s > opts.max_spin_cap {
        return Err(Error::Domain(format!("max spin {max_s} exceeds the cap {}", opts.max_spin_cap)));
    }
    let spins: Vec<SpinValue> = (1..=max_s.twice()).map(|t| SpinValue::from_twice(t).expect("positive")).collect();
    let numeric: Vec<(SpinValue, f64)> = spins
        .par_iter()
        .filter(|s| s.twice() > 3 && **s <= opts.numeric_cap)
        .map(|&s| outer_search(s, &opts.search).map(|r| (s, r.info_loss)))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for &s in &spins {
        for (r, name) in [(2, CLONING_R2), (3, CLONING_R3)] {
            let spec = CloningSpec::new(s, r)?;
            rows.push(OrderingRow { s, quantity: name.into(), value: cloning_device_loss(&spec), kind: ValueKind::UpperBound });
        }
        if s == SpinValue::HALF {
            rows.push(OrderingRow { s, quantity: LOSS_A2.into(), value: spinhalf_min_loss(2)?.info_loss, kind: ValueKind::Exact });
            rows.push(OrderingRow { s, quantity: LOSS_A3.into(), value: spinhalf_min_loss(3)?.info_loss, kind: ValueKind::Exact });
        }
        if let Ok(exact) = analytic_solution(s) {
            rows.push(OrderingRow { s, quantity: LOSS_AINF.into(), value: exact.info_loss, kind: ValueKind::Exact });
        } else if let Some(&(_, v)) = numeric.iter().find(|(t, _)| *t == s) {
            rows.push(OrderingRow { s, quantity: LOSS_AINF.into(), value: v, kind: ValueKind::Numeric });
        }
    }

    let numeric_margin = 10.0 * opts.search.tol;
    let find = |s: SpinValue, q: &str| rows.iter().find(|r| r.s == s && r.quantity == q);
    let margin_of = |row: &OrderingRow| if row.kind == ValueKind::Numeric { numeric_margin } else { 0.0 };
    // best certified upper bound on I_s[A_r]
    let bound = |s: SpinValue, r: u32| {
        let exact = if r == 2 { LOSS_A2 } else { LOSS_A3 };
        let cl = if r == 2 { CLONING_R2 } else { CLONING_R3 };
        find(s, exact).or_else(|| find(s, cl)).expect("row present").value
    };
    let mut ck = Checker { checks: Vec::new() };
    let i_inf = |s: SpinValue| find(s, LOSS_AINF);
    let (half, one, three_halves) = (SpinValue::HALF, SpinValue::ONE, SpinValue::THREE_HALVES);

    if let (Some(inf), true) = (i_inf(half), max_s >= half) {
        let (a2, a3) = (bound(half, 2), bound(half, 3));
        ck.add("chain", "0 < I_1/2[A2]".into(), 0.0, "<", a2, 0.0);
        ck.add("chain", "I_1/2[A2] <= I_1/2[A3]".into(), a2, "<=", a3, 0.0);
        ck.add("chain", "I_1/2[A3] <= I_1/2[Ainf]".into(), a3, "<=", inf.value, 0.0);
        ck.add("chain", "I_1/2[Ainf] < inf".into(), inf.value, "<", f64::INFINITY, 0.0);
    }
    let small: Vec<&OrderingRow> = [half, one, three_halves].iter().filter_map(|&s| i_inf(s)).collect();
    if let Some(first) = small.first() {
        ck.add("growth", format!("0 < I_{}[Ainf]", first.s), 0.0, "<", first.value, 0.0);
    }
    for w in small.windows(2) {
        let margin = margin_of(w[0]).max(margin_of(w[1]));
        ck.add("growth", format!("I_{}[Ainf] < I_{}[Ainf]", w[0].s, w[1].s), w[0].value, "<", w[1].value, margin);
    }

    for &s in &spins {
        ck.add("bounds", format!("I_{s}[A2] <= 1"), bound(s, 2), "<=", 1.0, 0.0);
        ck.add("bounds", format!("I_{s}[A3] <= log2 3"), bound(s, 3), "<=", 3f64.log2(), 0.0);
        if s.twice() <= 6 {
            ck.add("bounds", format!("I_{s}[A3] <= 1"), bound(s, 3), "<=", 1.0, 0.0);
        }
    }
    if let Some(i1) = i_inf(one) {
        ck.add("order-1", "I_1[Ainf] < 1".into(), i1.value, "<", 1.0, 0.0);
        for &s in spins.iter().filter(|s| s.twice() <= 6) {
            ck.add("order-1", format!("I_{s}[A2] <= I_1[Ainf]"), bound(s, 2), "<=", i1.value, 0.0);
        }
        for &s in spins.iter().filter(|s| s.twice() <= 2) {
            ck.add("order-2", format!("I_{s}[A3] < I_1[Ainf]"), bound(s, 3), "<", i1.value, 0.0);
        }
    }
    if let Some(i32) = i_inf(three_halves) {
        for &s in spins.iter().filter(|s| s.twice() <= 22) {
            ck.add("order-3", format!("I_{s}[A2] < I_3/2[Ainf]"), bound(s, 2), "<", i32.value, 0.0);
        }
        for &s in spins.iter().filter(|s| s.twice() <= 4) {
            ck.add("order-4", format!("I_{s}[A3] < I_3/2[Ainf]"), bound(s, 3), "<", i32.value, 0.0);
        }
    }

    let cl = |ts: u32, r: u32| cloning_device_loss(&CloningSpec { s: SpinValue::from_twice(ts).expect("positive"), r });
    if max_s.twice() >= 2 {
        ck.add("cloning", "D_1[A2,cl] > D_1/2[A3,cl]".into(), cl(1, 3), "<", cl(2, 2), 0.0);
    }
    if max_s.twice() >= 4 {
        ck.add("cloning", "D_2[A2,cl] = D_1[A3,cl]".into(), cl(4, 2), "==", cl(2, 3), 0.0);
    }
    if max_s.twice() >= 6 {
        let (proxy, extrapolated) = cloning_r2_limit(1_000_000);
        ck.add("cloning", "lim D_s[A2,cl] = D_3[A3,cl] (s = 1e6 proxy)".into(), (proxy - cl(6, 3)).abs(), "<=", 1e-5, 0.0);
        ck.add("cloning", "lim D_s[A2,cl] = D_3[A3,cl] (extrapolated)".into(), (extrapolated - cl(6, 3)).abs(), "<=", 1e-10, 0.0);
    }

    Ok(OrderingReport { max_s, rows, checks: ck.checks })
}

/// `Δ_s[A2, cl]` at the integer spin `s` and its first-order Richardson
/// extrapolation `2Δ(2s) - Δ(s)` towards `s → ∞`.
pub fn cloning_r2_limit(s: u32) -> (f64, f64) {
    let at = |ts: u32| cloning_device_loss(&CloningSpec { s: SpinValue::from_twice(ts).expect("positive"), r: 2 });
    let d1 = at(2 * s);
    let d2 = at(4 * s);
    (d1, 2.0 * d2 - d1)
}
