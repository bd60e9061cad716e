//! Wigner small-d matrix and the polynomials `|d_{l,h}(θ)|²` in `x = cos θ`.
//!
//! Two independent routes are kept on purpose. [`d_small`] evaluates the
//! classical finite sum over factorials; [`DSquaredTable`] is built from the
//! matrix exponential `exp(-iθ S_y)` at Chebyshev nodes and interpolated
//! exactly, since `|d|²` is a polynomial of degree at most `2s` in `cos θ`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spin::{MagneticIndex, SpinValue, YRotation};

/// A real polynomial in monomial form, coefficients in ascending powers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Poly { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Index of the highest nonzero coefficient (0 for the zero polynomial).
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn antiderivative(&self) -> Poly {
        let mut out = Vec::with_capacity(self.coeffs.len() + 1);
        out.push(0.0);
        out.extend(self.coeffs.iter().enumerate().map(|(k, &c)| c / (k as f64 + 1.0)));
        Poly { coeffs: out }
    }

    /// `∫_lo^hi p(x) dx`, exact up to rounding.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        let anti = self.antiderivative();
        anti.eval(hi) - anti.eval(lo)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly { coeffs: out }
    }
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for k in 1..=n {
        f[k] = f[k - 1] * k as f64;
    }
    f
}

/// `d^{(s)}_{l,h}(θ) = <l| exp(-iθ S_y) |h>` by the explicit factorial sum.
pub fn d_small(s: SpinValue, l: MagneticIndex, h: MagneticIndex, theta: f64) -> f64 {
    let ts = s.twice() as i64;
    let (tl, th) = (l.twice() as i64, h.twice() as i64);
    // integer quantities j±m', j±m
    let jpl = ((ts + tl) / 2) as usize;
    let jml = ((ts - tl) / 2) as usize;
    let jph = ((ts + th) / 2) as usize;
    let jmh = ((ts - th) / 2) as usize;
    let diff = (th - tl) / 2; // m - m'
    let fact = factorials(ts as usize);
    let prefactor = (fact[jpl] * fact[jml] * fact[jph] * fact[jmh]).sqrt();
    let (sn, cs) = (theta / 2.0).sin_cos();
    let k_min = diff.max(0);
    let k_max = (jph as i64).min(jml as i64);
    let mut total = 0.0;
    for k in k_min..=k_max {
        let sign = if (k - diff).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let denom = fact[(jph as i64 - k) as usize]
            * fact[k as usize]
            * fact[(jml as i64 - k) as usize]
            * fact[(k - diff) as usize];
        let cos_pow = (ts - 2 * k + diff) as i32;
        let sin_pow = (2 * k - diff) as i32;
        total += sign * prefactor / denom * cs.powi(cos_pow) * sn.powi(sin_pow);
    }
    total
}

/// `|d^{(s)}_{s,m}(θ)|²` in closed form, as a function of `x = cos θ`.
pub fn d_squared_top_row(s: SpinValue, m: MagneticIndex, x: f64) -> f64 {
    let ts = s.twice() as usize;
    let up = (s.twice() as i32 + m.twice()) as usize / 2;
    let fact = factorials(ts);
    let binom = fact[ts] / (fact[up] * fact[ts - up]);
    binom * ((1.0 + x) / 2.0).powi(up as i32) * ((1.0 - x) / 2.0).powi((ts - up) as i32)
}

/// `|d^{(s)}_{l,h}(θ)|²` as a polynomial in `x = cos θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DSquaredPoly {
    pub s: SpinValue,
    pub l: i32,
    pub h: i32,
    pub poly: Poly,
}

impl DSquaredPoly {
    pub fn eval(&self, x: f64) -> f64 {
        self.poly.eval(x)
    }

    /// `(s + 1/2) ∫_{-1}^{1} |d|² dx`, equal to one.
    pub fn normalization(&self) -> f64 {
        (self.s.value() + 0.5) * self.poly.integral(-1.0, 1.0)
    }
}

/// All `(2s+1)²` polynomials of one spin, row `l`, column `h`.
#[derive(Clone, Debug)]
pub struct DSquaredTable {
    s: SpinValue,
    polys: Vec<Poly>,
}

impl DSquaredTable {
    pub fn new(s: SpinValue) -> Self {
        let n = s.dim();
        let ry = YRotation::new(s);
        // |d|² has degree ≤ 2s in x, so n = 2s+1 Chebyshev nodes determine it.
        let nodes: Vec<f64> = (0..n).map(|j| (PI * (j as f64 + 0.5) / n as f64).cos()).collect();
        let samples: Vec<_> = nodes.par_iter().map(|&x| ry.real_matrix(x.acos())).collect();
        let basis = chebyshev_monomials(n);
        let polys = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (l, h) = (idx / n, idx % n);
                let values: Vec<f64> = samples.iter().map(|d| d[(l, h)] * d[(l, h)]).collect();
                interpolate(&values, &basis)
            })
            .collect();
        DSquaredTable { s, polys }
    }

    pub fn spin(&self) -> SpinValue {
        self.s
    }

    /// Polynomial by array positions `(s - l, s - h)`.
    pub fn poly_at(&self, l_pos: usize, h_pos: usize) -> &Poly {
        &self.polys[l_pos * self.s.dim() + h_pos]
    }

    pub fn get(&self, l: MagneticIndex, h: MagneticIndex) -> DSquaredPoly {
        DSquaredPoly {
            s: self.s,
            l: l.twice(),
            h: h.twice(),
            poly: self.poly_at(l.position(self.s), h.position(self.s)).clone(),
        }
    }
}

/// Monomial coefficients of `T_0, ..., T_{n-1}`.
fn chebyshev_monomials(n: usize) -> Vec<Vec<f64>> {
    let mut t: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let next = match k {
            0 => vec![1.0],
            1 => vec![0.0, 1.0],
            _ => {
                let mut c = vec![0.0; k + 1];
                for (i, v) in t[k - 1].iter().enumerate() {
                    c[i + 1] += 2.0 * v;
                }
                for (i, v) in t[k - 2].iter().enumerate() {
                    c[i] -= v;
                }
                c
            }
        };
        t.push(next);
    }
    t
}

/// Interpolant through values at the first-kind Chebyshev nodes.
fn interpolate(values: &[f64], basis: &[Vec<f64>]) -> Poly {
    let n = values.len();
    let mut coeffs = vec![0.0; n];
    for (k, tk) in basis.iter().enumerate() {
        let mut a = values
            .iter()
            .enumerate()
            .map(|(j, v)| v * (PI * k as f64 * (j as f64 + 0.5) / n as f64).cos())
            .sum::<f64>()
            * 2.0
            / n as f64;
        if k == 0 {
            a /= 2.0;
        }
        for (i, c) in tk.iter().enumerate() {
            coeffs[i] += a * c;
        }
    }
    Poly::new(coeffs)
}

/// Exact polynomial `|d^{(s)}_{l,h}(θ)|²` in `x = cos θ`.
pub fn d_squared_poly(s: SpinValue, l: MagneticIndex, h: MagneticIndex) -> DSquaredPoly {
    DSquaredTable::new(s).get(l, h)
}

/// Residuals of the standard small-d identities on a θ grid.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DIdentityReport {
    /// `d_{m',m} = (-1)^{m-m'} d_{m,m'} = d_{-m,-m'}`
    pub symmetry: f64,
    /// rows and columns orthonormal
    pub orthonormality: f64,
    /// `|d_{l,m}(θ)|² = |d_{-m,l}(π-θ)|²`
    pub reflection: f64,
    /// top row against its binomial closed form, pointwise and polynomial
    pub top_row: f64,
    /// interpolated polynomial against the pointwise square
    pub polynomial: f64,
}

impl DIdentityReport {
    pub fn max_violation(&self) -> f64 {
        [self.symmetry, self.orthonormality, self.reflection, self.top_row, self.polynomial]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Checks the identities on `points` equally spaced angles in `[0, π]`.
pub fn check_d_identities(s: SpinValue, points: usize) -> DIdentityReport {
    let table = DSquaredTable::new(s);
    let n = s.dim();
    let idx: Vec<MagneticIndex> = s.indices().collect();
    let mut rep = DIdentityReport::default();
    let bump = |slot: &mut f64, v: f64| *slot = slot.max(v.abs());
    for p in 0..points.max(2) {
        let theta = PI * p as f64 / (points.max(2) - 1) as f64;
        let x = theta.cos();
        let d: Vec<Vec<f64>> = idx.iter().map(|&a| idx.iter().map(|&b| d_small(s, a, b, theta)).collect()).collect();
        let d_refl: Vec<Vec<f64>> =
            idx.iter().map(|&a| idx.iter().map(|&b| d_small(s, a, b, PI - theta)).collect()).collect();
        for (i, &mp) in idx.iter().enumerate() {
            for (j, &m) in idx.iter().enumerate() {
                let sign = if ((m.twice() - mp.twice()) / 2).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                bump(&mut rep.symmetry, d[i][j] - sign * d[j][i]);
                bump(&mut rep.symmetry, d[i][j] - d[(-m).position(s)][(-mp).position(s)]);
                let row = (0..n).map(|k| d[i][k] * d[j][k]).sum::<f64>();
                let col = (0..n).map(|k| d[k][i] * d[k][j]).sum::<f64>();
                let delta = if i == j { 1.0 } else { 0.0 };
                bump(&mut rep.orthonormality, row - delta);
                bump(&mut rep.orthonormality, col - delta);
                // |d_{l,m}(θ)|² vs |d_{-m,l}(π-θ)|² with l = mp
                let r = d_refl[(-m).position(s)][i];
                bump(&mut rep.reflection, d[i][j] * d[i][j] - r * r);
                bump(&mut rep.polynomial, table.poly_at(i, j).eval(x) - d[i][j] * d[i][j]);
            }
            let closed = d_squared_top_row(s, mp, x);
            bump(&mut rep.top_row, d[0][i] * d[0][i] - closed);
            bump(&mut rep.top_row, table.poly_at(0, i).eval(x) - closed);
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::spin_matrices;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sp(ts: u32) -> SpinValue {
        SpinValue::from_twice(ts).unwrap()
    }

    #[test]
    fn identity_at_zero_angle() {
        for ts in 1..=8 {
            let s = sp(ts);
            for l in s.indices() {
                for h in s.indices() {
                    let expect = if l == h { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(d_small(s, l, h, 0.0), expect, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn spin_half_value_at_pi_over_three() {
        let s = SpinValue::HALF;
        let up = s.index(1).unwrap();
        let d = d_small(s, up, up, PI / 3.0);
        assert_abs_diff_eq!(d * d, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn explicit_sum_matches_matrix_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let s = sp(rng.random_range(1..=12));
            let theta = rng.random_range(0.0..PI);
            let l = s.at(rng.random_range(0..s.dim()));
            let h = s.at(rng.random_range(0..s.dim()));
            let sm = spin_matrices(s);
            let u = crate::spin::hermitian_exp(&sm.sy, theta);
            let oracle = u[(l.position(s), h.position(s))];
            assert!(oracle.im.abs() < 1e-12);
            assert_abs_diff_eq!(d_small(s, l, h, theta), oracle.re, epsilon = 1e-11);
        }
    }

    #[test]
    fn known_polynomials() {
        let s = SpinValue::HALF;
        let up = s.index(1).unwrap();
        let p = d_squared_poly(s, up, up);
        assert_abs_diff_eq!(p.poly.coeffs()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.poly.coeffs()[1], 0.5, epsilon = 1e-15);

        let s = SpinValue::ONE;
        let zero = s.index(0).unwrap();
        let p = d_squared_poly(s, zero, zero);
        for (got, want) in p.poly.coeffs().iter().zip([0.0, 0.0, 1.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }

        // (3/8)(1+x)(1-x²) = 3/8 + 3/8 x - 3/8 x² - 3/8 x³
        let s = SpinValue::THREE_HALVES;
        let p = d_squared_poly(s, s.index(3).unwrap(), s.index(1).unwrap());
        for (got, want) in p.poly.coeffs().iter().zip([0.375, 0.375, -0.375, -0.375]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn polynomial_matches_pointwise_and_is_normalized() {
        for ts in 1..=8 {
            let s = sp(ts);
            let table = DSquaredTable::new(s);
            for l in s.indices() {
                for h in s.indices() {
                    let p = table.get(l, h);
                    assert!(p.poly.degree() <= ts as usize);
                    assert_eq!(p.poly.coeffs().len(), ts as usize + 1);
                    assert_abs_diff_eq!(p.normalization(), 1.0, epsilon = 1e-12);
                    for k in 0..200 {
                        let theta = PI * k as f64 / 199.0;
                        let d = d_small(s, l, h, theta);
                        assert!((p.eval(theta.cos()) - d * d).abs() <= 1e-11);
                    }
                    for k in 0..500 {
                        let x = -1.0 + 2.0 * k as f64 / 499.0;
                        assert!(p.eval(x) >= -1e-13, "negative at x={x}");
                    }
                }
            }
        }
    }

    #[test]
    fn identity_suite() {
        assert!(check_d_identities(SpinValue::HALF, 50).max_violation() <= 1e-12);
        assert!(check_d_identities(sp(4), 50).max_violation() <= 1e-10);
    }

    #[test]
    fn orthonormality_at_right_angle_spin_one() {
        let s = SpinValue::ONE;
        for l in s.indices() {
            let row: f64 = s.indices().map(|h| d_small(s, l, h, PI / 2.0).powi(2)).sum();
            assert_abs_diff_eq!(row, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn poly_arithmetic() {
        let p = Poly::new(vec![1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(p.eval(2.0), 17.0);
        assert_abs_diff_eq!(p.integral(0.0, 1.0), 3.0);
        assert_eq!(p.mul(&Poly::new(vec![0.0, 1.0])).coeffs(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(Poly::new(vec![1.0, 0.0, 0.0]).degree(), 0);
    }
}
