//! Half-integer bookkeeping and dense spin-`s` matrices.
//!
//! Basis convention: row/column `i` of every matrix is the `S_z` eigenvector
//! with eigenvalue `m = s - i`, so index 0 is `m = s` and the last index is
//! `m = -s`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tol;

pub type CMatrix = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A spin quantum number `s ∈ {1/2, 1, 3/2, ...}`, stored as `2s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinValue {
    twice_s: u32,
}

impl SpinValue {
    pub const HALF: SpinValue = SpinValue { twice_s: 1 };
    pub const ONE: SpinValue = SpinValue { twice_s: 2 };
    pub const THREE_HALVES: SpinValue = SpinValue { twice_s: 3 };

    pub fn from_twice(twice_s: u32) -> Result<Self> {
        if twice_s == 0 {
            return Err(Error::InvalidSpin("s must be at least 1/2".into()));
        }
        Ok(SpinValue { twice_s })
    }

    pub fn twice(self) -> u32 {
        self.twice_s
    }

    pub fn value(self) -> f64 {
        f64::from(self.twice_s) / 2.0
    }

    /// Hilbert space dimension `2s + 1`.
    pub fn dim(self) -> usize {
        self.twice_s as usize + 1
    }

    /// `⌊s⌋`, the number of free interior cosines of a symmetric grid.
    pub fn free_angles(self) -> usize {
        (self.twice_s / 2) as usize
    }

    pub fn is_integer(self) -> bool {
        self.twice_s.is_multiple_of(2)
    }

    /// `m = s, s-1, ..., -s` in array order.
    pub fn indices(self) -> impl DoubleEndedIterator<Item = MagneticIndex> + Clone {
        let ts = self.twice_s as i32;
        (0..=self.twice_s).map(move |i| MagneticIndex { twice_m: ts - 2 * i as i32 })
    }

    pub fn index(self, twice_m: i32) -> Result<MagneticIndex> {
        MagneticIndex::new(self, twice_m)
    }

    /// The index sitting at array position `pos`.
    pub fn at(self, pos: usize) -> MagneticIndex {
        assert!(pos < self.dim(), "position {pos} out of range for s = {self}");
        MagneticIndex { twice_m: self.twice_s as i32 - 2 * pos as i32 }
    }
}

impl fmt::Display for SpinValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice_s.is_multiple_of(2) {
            write!(f, "{}", self.twice_s / 2)
        } else {
            write!(f, "{}/2", self.twice_s)
        }
    }
}

impl FromStr for SpinValue {
    type Err = Error;

    /// Accepts fractions (`"3/2"`) and decimals (`"1.5"`, `"2"`).
    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let bad = || Error::InvalidSpin(format!("'{text}' is not a positive half-integer"));
        let twice = if let Some((num, den)) = text.split_once('/') {
            let num: u32 = num.trim().parse().map_err(|_| bad())?;
            match den.trim().parse::<u32>().map_err(|_| bad())? {
                1 => num.checked_mul(2).ok_or_else(bad)?,
                2 => num,
                _ => return Err(bad()),
            }
        } else {
            let value: f64 = text.parse().map_err(|_| bad())?;
            let doubled = 2.0 * value;
            if !doubled.is_finite() || doubled.fract() != 0.0 || doubled < 1.0 || doubled > f64::from(u32::MAX) {
                return Err(bad());
            }
            doubled as u32
        };
        SpinValue::from_twice(twice)
    }
}

impl Serialize for SpinValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SpinValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// A magnetic quantum number `m ∈ {-s, ..., s}`, stored as `2m`.
///
/// Validity is checked against a spin value at construction; afterwards the
/// index carries no reference to `s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MagneticIndex {
    twice_m: i32,
}

impl MagneticIndex {
    pub fn new(s: SpinValue, twice_m: i32) -> Result<Self> {
        let ts = s.twice() as i32;
        if twice_m.abs() > ts || (ts - twice_m) % 2 != 0 {
            return Err(Error::InvalidIndex { twice_s: s.twice(), twice_m });
        }
        Ok(MagneticIndex { twice_m })
    }

    pub fn twice(self) -> i32 {
        self.twice_m
    }

    pub fn value(self) -> f64 {
        f64::from(self.twice_m) / 2.0
    }

    /// Array position `s - m`.
    pub fn position(self, s: SpinValue) -> usize {
        ((s.twice() as i32 - self.twice_m) / 2) as usize
    }
}

impl std::ops::Neg for MagneticIndex {
    type Output = Self;

    fn neg(self) -> Self {
        MagneticIndex { twice_m: -self.twice_m }
    }
}

impl fmt::Display for MagneticIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice_m % 2 == 0 {
            write!(f, "{}", self.twice_m / 2)
        } else {
            write!(f, "{}/2", self.twice_m)
        }
    }
}

/// A unit vector in R³.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction([f64; 3]);

impl Direction {
    pub const X: Direction = Direction([1.0, 0.0, 0.0]);
    pub const Y: Direction = Direction([0.0, 1.0, 0.0]);
    pub const Z: Direction = Direction([0.0, 0.0, 1.0]);

    /// Rejects vectors whose norm differs from 1 by more than [`tol::UNIT_NORM`];
    /// accepted vectors are renormalized.
    pub fn new(n: [f64; 3]) -> Result<Self> {
        let norm = n.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > tol::UNIT_NORM {
            return Err(Error::NonUnitDirection(norm));
        }
        Ok(Direction([n[0] / norm, n[1] / norm, n[2] / norm]))
    }

    /// `n(θ, φ) = (sin θ cos φ, sin θ sin φ, cos θ)`.
    pub fn polar(theta: f64, phi: f64) -> Self {
        Direction([theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()])
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }

    /// Polar angles `(θ, φ)` with `θ ∈ [0, π]`, `φ ∈ [0, 2π)`.
    pub fn angles(&self) -> (f64, f64) {
        let [x, y, z] = self.0;
        let theta = z.clamp(-1.0, 1.0).acos();
        let phi = y.atan2(x).rem_euclid(2.0 * std::f64::consts::PI);
        (theta, phi)
    }

    pub fn neg(&self) -> Self {
        Direction([-self.0[0], -self.0[1], -self.0[2]])
    }

    pub fn dot(&self, v: &[f64; 3]) -> f64 {
        self.0.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Image under a rotation matrix.
    pub fn rotated(&self, r: &[[f64; 3]; 3]) -> Self {
        let v = self.0;
        let mut out = [0.0; 3];
        for (i, row) in r.iter().enumerate() {
            out[i] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
        }
        Direction(out)
    }
}

/// `S_x`, `S_y`, `S_z` in the `S_z` eigenbasis (ħ = 1).
#[derive(Clone, Debug)]
pub struct SpinMatrices {
    pub s: SpinValue,
    pub sx: CMatrix,
    pub sy: CMatrix,
    pub sz: CMatrix,
}

impl SpinMatrices {
    /// `n·S`.
    pub fn component(&self, n: &Direction) -> CMatrix {
        let [x, y, z] = n.components();
        &self.sx * Complex64::from(x) + &self.sy * Complex64::from(y) + &self.sz * Complex64::from(z)
    }

    /// `S_x`, `S_y` or `S_z` by axis number 0, 1, 2.
    pub fn axis(&self, i: usize) -> &CMatrix {
        match i {
            0 => &self.sx,
            1 => &self.sy,
            2 => &self.sz,
            _ => panic!("axis index {i} out of range"),
        }
    }
}

/// Ladder-operator construction of the spin matrices.
pub fn spin_matrices(s: SpinValue) -> SpinMatrices {
    let n = s.dim();
    let sv = s.value();
    let mut raise = CMatrix::zeros(n, n);
    let mut sz = CMatrix::zeros(n, n);
    for (i, m) in s.indices().enumerate() {
        let m = m.value();
        sz[(i, i)] = Complex64::from(m);
        // S+ |m> = sqrt(s(s+1) - m(m+1)) |m+1>, and |m+1> sits at position i-1.
        if i > 0 {
            raise[(i - 1, i)] = Complex64::from((sv * (sv + 1.0) - m * (m + 1.0)).sqrt());
        }
    }
    let lower = raise.adjoint();
    let sx = (&raise + &lower) * Complex64::from(0.5);
    let sy = (&raise - &lower) * (-0.5 * I);
    SpinMatrices { s, sx, sy, sz }
}

/// `exp(-i t H)` for Hermitian `H`, through its eigendecomposition.
pub fn hermitian_exp(h: &CMatrix, t: f64) -> CMatrix {
    let eig = SymmetricEigen::new(h.clone());
    exp_from_eigen(&eig.eigenvectors, &eig.eigenvalues, t)
}

fn exp_from_eigen(vecs: &CMatrix, vals: &DVector<f64>, t: f64) -> CMatrix {
    let phases = vals.map(|w| (-I * (t * w)).exp());
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= phases[j];
    }
    scaled * vecs.adjoint()
}

/// Cached eigendecomposition of `S_y`, giving `exp(-iθ S_y)` for any `θ`
/// without refactoring.
#[derive(Clone, Debug)]
pub struct YRotation {
    vecs: CMatrix,
    vals: DVector<f64>,
}

impl YRotation {
    pub fn new(s: SpinValue) -> Self {
        let eig = SymmetricEigen::new(spin_matrices(s).sy);
        YRotation { vecs: eig.eigenvectors, vals: eig.eigenvalues }
    }

    /// `exp(-iθ S_y)`.
    pub fn matrix(&self, theta: f64) -> CMatrix {
        exp_from_eigen(&self.vecs, &self.vals, theta)
    }

    /// Real part of `exp(-iθ S_y)`; the imaginary part vanishes in this basis.
    pub fn real_matrix(&self, theta: f64) -> DMatrix<f64> {
        self.matrix(theta).map(|z| z.re)
    }
}

fn z_phase(s: SpinValue, phi: f64) -> CMatrix {
    // exp(-iφ S_z)
    let diag = DVector::from_iterator(s.dim(), s.indices().map(|m| (-I * (phi * m.value())).exp()));
    CMatrix::from_diagonal(&diag)
}

/// `V(θ, φ) = exp(-iφS_z) exp(-iθS_y) exp(iφS_z)`: brings `k` to `n(θ, φ)`.
pub fn rotation_v(s: SpinValue, theta: f64, phi: f64) -> CMatrix {
    rotation_v_with(&YRotation::new(s), s, theta, phi)
}

pub fn rotation_v_with(ry: &YRotation, s: SpinValue, theta: f64, phi: f64) -> CMatrix {
    let d = z_phase(s, phi);
    &d * ry.matrix(theta) * d.adjoint()
}

/// `U(R_u(α)) = exp(-iα u·S)`.
pub fn rotation_unitary(s: SpinValue, axis: &Direction, angle: f64) -> CMatrix {
    hermitian_exp(&spin_matrices(s).component(axis), angle)
}

/// The SO(3) matrix of a counterclockwise rotation by `angle` about `axis`.
pub fn rotation_matrix(axis: &Direction, angle: f64) -> [[f64; 3]; 3] {
    let [x, y, z] = axis.components();
    let (sn, cs) = angle.sin_cos();
    let t = 1.0 - cs;
    [
        [cs + x * x * t, x * y * t - z * sn, x * z * t + y * sn],
        [y * x * t + z * sn, cs + y * y * t, y * z * t - x * sn],
        [z * x * t - y * sn, z * y * t + x * sn, cs + z * z * t],
    ]
}

/// An orthogonal projection; here always rank one.
#[derive(Clone, Debug)]
pub struct Projection {
    pub matrix: CMatrix,
}

impl Projection {
    fn from_vector(v: &DVector<Complex64>) -> Self {
        Projection { matrix: v * v.adjoint() }
    }

    /// `‖P² - P‖` (max entry).
    pub fn idempotency_residual(&self) -> f64 {
        max_abs(&(&self.matrix * &self.matrix - &self.matrix))
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }
}

/// `Z(m)`, the eigen-projection of `S_z`.
pub fn z_projection(s: SpinValue, m: MagneticIndex) -> Projection {
    let mut v = DVector::zeros(s.dim());
    v[m.position(s)] = Complex64::from(1.0);
    Projection::from_vector(&v)
}

/// `A_n(m)`, the eigen-projection of `n·S` with eigenvalue `m`.
pub fn eigen_projection(s: SpinValue, n: &Direction, m: MagneticIndex) -> Projection {
    eigen_projections(s, n).swap_remove(m.position(s))
}

/// All eigen-projections of `n·S`, in array order `m = s, ..., -s`.
///
/// For `n = ±k` the `S_z` projections are returned without any rotation.
pub fn eigen_projections(s: SpinValue, n: &Direction) -> Vec<Projection> {
    let comps = n.components();
    if comps[0] == 0.0 && comps[1] == 0.0 {
        let flip = comps[2] < 0.0;
        return s
            .indices()
            .map(|m| z_projection(s, if flip { -m } else { m }))
            .collect();
    }
    let (theta, phi) = n.angles();
    let v = rotation_v(s, theta, phi);
    (0..s.dim()).map(|i| Projection::from_vector(&v.column(i).into_owned())).collect()
}

pub fn maximally_mixed(s: SpinValue) -> CMatrix {
    CMatrix::identity(s.dim(), s.dim()) * Complex64::from(1.0 / s.dim() as f64)
}

/// Max absolute entry.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn hermiticity_residual(a: &CMatrix) -> f64 {
    max_abs(&(a - a.adjoint()))
}

fn eigen_range(a: &CMatrix) -> (f64, f64) {
    let vals = SymmetricEigen::new(a.clone()).eigenvalues;
    (vals.min(), vals.max())
}

/// Checks that `rho` is Hermitian, positive and of unit trace.
pub fn validate_state(rho: &CMatrix) -> Result<()> {
    if !rho.is_square() {
        return Err(Error::InvalidState("not square".into()));
    }
    let herm = hermiticity_residual(rho);
    if herm > tol::STRUCTURAL {
        return Err(Error::InvalidState(format!("not Hermitian (residual {herm:e})")));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > tol::STRUCTURAL || tr.im.abs() > tol::STRUCTURAL {
        return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
    }
    let (lo, _) = eigen_range(rho);
    if lo < -tol::STRUCTURAL {
        return Err(Error::InvalidState(format!("negative eigenvalue {lo:e}")));
    }
    Ok(())
}

/// Checks `0 ≤ E ≤ 1`.
pub fn validate_effect(effect: &CMatrix) -> Result<()> {
    if !effect.is_square() {
        return Err(Error::InvalidEffect("not square".into()));
    }
    let herm = hermiticity_residual(effect);
    if herm > tol::STRUCTURAL {
        return Err(Error::InvalidEffect(format!("not Hermitian (residual {herm:e})")));
    }
    let (lo, hi) = eigen_range(effect);
    if lo < -tol::STRUCTURAL || hi > 1.0 + tol::STRUCTURAL {
        return Err(Error::InvalidEffect(format!("spectrum [{lo:e}, {hi}] outside [0, 1]")));
    }
    Ok(())
}

/// `Tr{ρ E}`.
///
/// Both operands are validated; a result outside `[0, 1]` by no more than
/// [`tol::STRUCTURAL`] is clipped, anything larger is an error.
pub fn outcome_probability(rho: &CMatrix, effect: &CMatrix) -> Result<f64> {
    if rho.shape() != effect.shape() {
        return Err(Error::InvalidEffect(format!(
            "shape {:?} does not match state shape {:?}",
            effect.shape(),
            rho.shape()
        )));
    }
    validate_state(rho)?;
    validate_effect(effect)?;
    Ok(trace_product(rho, effect).clamp(0.0, 1.0))
}

/// `Re Tr{A B}` without validation.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// A spin-1/2 state `ρ = (1 + 2 r·S)/2`, `|r| ≤ 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochState {
    r: [f64; 3],
}

impl BlochState {
    pub fn new(r: [f64; 3]) -> Result<Self> {
        let norm = r.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > 1.0 + tol::UNIT_NORM {
            return Err(Error::InvalidState(format!("Bloch vector of length {norm} > 1")));
        }
        Ok(BlochState { r })
    }

    pub fn vector(&self) -> [f64; 3] {
        self.r
    }

    pub fn density_matrix(&self) -> CMatrix {
        let sm = spin_matrices(SpinValue::HALF);
        let rs = sm.component(&Direction(self.r));
        (CMatrix::identity(2, 2) + rs * Complex64::from(2.0)) * Complex64::from(0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    fn random_direction(rng: &mut impl Rng) -> Direction {
        let z: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        Direction::polar(z.acos(), phi)
    }

    fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a * b - b * a
    }

    #[test]
    fn parse_and_display_spins() {
        assert_eq!("3/2".parse::<SpinValue>().unwrap().twice(), 3);
        assert_eq!("1.5".parse::<SpinValue>().unwrap().twice(), 3);
        assert_eq!("2".parse::<SpinValue>().unwrap().twice(), 4);
        assert_eq!("4/1".parse::<SpinValue>().unwrap().twice(), 8);
        for bad in ["0", "-1/2", "1/3", "1.3", "abc", "", "3/4"] {
            assert!(bad.parse::<SpinValue>().is_err(), "{bad} accepted");
        }
        assert_eq!(SpinValue::THREE_HALVES.to_string(), "3/2");
        assert_eq!(SpinValue::ONE.to_string(), "1");
    }

    #[test]
    fn magnetic_index_validity() {
        let s = SpinValue::THREE_HALVES;
        assert!(MagneticIndex::new(s, 1).is_ok());
        assert!(MagneticIndex::new(s, 2).is_err());
        assert!(MagneticIndex::new(s, 5).is_err());
        let m = s.index(-1).unwrap();
        assert_eq!(m.position(s), 2);
        assert_eq!(s.at(2), m);
        assert_eq!(s.indices().count(), 4);
    }

    #[test]
    fn spin_half_is_half_pauli() {
        let sm = spin_matrices(SpinValue::HALF);
        let c = Complex64::from;
        let sx = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let sy = CMatrix::from_row_slice(2, 2, &[c(0.0), -I, I, c(0.0)]);
        let sz = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
        assert!(max_abs(&(&sm.sx * c(2.0) - sx)) < 1e-15);
        assert!(max_abs(&(&sm.sy * c(2.0) - sy)) < 1e-15);
        assert!(max_abs(&(&sm.sz * c(2.0) - sz)) < 1e-15);
    }

    #[test]
    fn spin_one_sz_diagonal() {
        let sm = spin_matrices(SpinValue::ONE);
        let diag: Vec<f64> = (0..3).map(|i| sm.sz[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, 0.0, -1.0]);
    }

    #[test]
    fn commutation_and_casimir_up_to_spin_ten() {
        for ts in 1..=20 {
            let s = SpinValue::from_twice(ts).unwrap();
            let sm = spin_matrices(s);
            let ic = |m: &CMatrix| m * I;
            assert!(max_abs(&(commutator(&sm.sx, &sm.sy) - ic(&sm.sz))) < 1e-12);
            assert!(max_abs(&(commutator(&sm.sy, &sm.sz) - ic(&sm.sx))) < 1e-12);
            assert!(max_abs(&(commutator(&sm.sz, &sm.sx) - ic(&sm.sy))) < 1e-12);
            let cas = &sm.sx * &sm.sx + &sm.sy * &sm.sy + &sm.sz * &sm.sz;
            let expect = CMatrix::identity(s.dim(), s.dim()) * Complex64::from(s.value() * (s.value() + 1.0));
            assert!(max_abs(&(cas - expect)) < 1e-12, "casimir s={s}");
            for a in [&sm.sx, &sm.sy, &sm.sz] {
                assert!(hermiticity_residual(a) == 0.0);
            }
        }
    }

    #[test]
    fn rotation_v_is_unitary_and_trivial_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for ts in 1..=12 {
            let s = SpinValue::from_twice(ts).unwrap();
            let id = CMatrix::identity(s.dim(), s.dim());
            assert!(max_abs(&(rotation_v(s, 0.0, 1.3) - &id)) < 1e-13);
            let v = rotation_v(s, rng.random_range(0.0..PI), rng.random_range(0.0..TAU));
            assert!(max_abs(&(&v * v.adjoint() - &id)) <= tol::UNITARY);
        }
    }

    #[test]
    fn rotation_v_brings_k_to_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for ts in 1..=6 {
            let s = SpinValue::from_twice(ts).unwrap();
            let sm = spin_matrices(s);
            for _ in 0..5 {
                let (theta, phi) = (rng.random_range(0.0..PI), rng.random_range(0.0..TAU));
                let v = rotation_v(s, theta, phi);
                let lhs = &v * &sm.sz * v.adjoint();
                let rhs = sm.component(&Direction::polar(theta, phi));
                assert!(max_abs(&(lhs - rhs)) < 1e-12);
                for m in s.indices() {
                    let lhs = &v * z_projection(s, m).matrix * v.adjoint();
                    let rhs = eigen_projection(s, &Direction::polar(theta, phi), m).matrix;
                    assert!(max_abs(&(lhs - rhs)) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn projections_along_k_and_completeness() {
        let s = SpinValue::HALF;
        let p = eigen_projection(s, &Direction::Z, s.index(1).unwrap());
        assert_eq!(p.matrix[(0, 0)], Complex64::from(1.0));
        assert_eq!(p.matrix[(1, 1)], Complex64::from(0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for ts in 1..=6 {
            let s = SpinValue::from_twice(ts).unwrap();
            let sm = spin_matrices(s);
            for _ in 0..100 {
                let n = random_direction(&mut rng);
                let projs = eigen_projections(s, &n);
                let total = projs.iter().fold(CMatrix::zeros(s.dim(), s.dim()), |acc, p| acc + &p.matrix);
                assert!(max_abs(&(total - CMatrix::identity(s.dim(), s.dim()))) <= tol::STRUCTURAL);
                let spectral = projs
                    .iter()
                    .zip(s.indices())
                    .fold(CMatrix::zeros(s.dim(), s.dim()), |acc, (p, m)| acc + &p.matrix * Complex64::from(m.value()));
                assert!(max_abs(&(spectral - sm.component(&n))) < 1e-10);
                for p in &projs {
                    assert!(p.idempotency_residual() < 1e-10);
                    assert_abs_diff_eq!(p.trace(), 1.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn opposite_direction_flips_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for ts in 1..=5 {
            let s = SpinValue::from_twice(ts).unwrap();
            for _ in 0..10 {
                let n = random_direction(&mut rng);
                for m in s.indices() {
                    let a = eigen_projection(s, &n.neg(), m).matrix;
                    let b = eigen_projection(s, &n, -m).matrix;
                    assert!(max_abs(&(a - b)) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn projection_covariance_under_composed_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for ts in 1..=5 {
            let s = SpinValue::from_twice(ts).unwrap();
            for _ in 0..5 {
                let (u1, a1) = (random_direction(&mut rng), rng.random_range(0.0..TAU));
                let (u2, a2) = (random_direction(&mut rng), rng.random_range(0.0..TAU));
                let u = rotation_unitary(s, &u2, a2) * rotation_unitary(s, &u1, a1);
                let r1 = rotation_matrix(&u1, a1);
                let r2 = rotation_matrix(&u2, a2);
                let n = random_direction(&mut rng);
                let rn = n.rotated(&r1).rotated(&r2);
                for m in s.indices() {
                    let lhs = &u * eigen_projection(s, &n, m).matrix * u.adjoint();
                    let rhs = eigen_projection(s, &rn, m).matrix;
                    assert!(max_abs(&(lhs - rhs)) <= tol::STRUCTURAL);
                }
            }
        }
    }

    #[test]
    fn non_unit_direction_rejected() {
        assert!(matches!(Direction::new([1.0, 1.0, 0.0]), Err(Error::NonUnitDirection(_))));
        assert!(Direction::new([0.6, 0.8, 0.0]).is_ok());
    }

    #[test]
    fn probabilities_of_simple_states() {
        let s = SpinValue::ONE;
        for h in s.indices() {
            let z = z_projection(s, h).matrix;
            assert_abs_diff_eq!(outcome_probability(&z, &z).unwrap(), 1.0, epsilon = 1e-15);
        }
        let n = Direction::polar(0.7, 2.1);
        for m in s.indices() {
            let p = outcome_probability(&maximally_mixed(s), &eigen_projection(s, &n, m).matrix).unwrap();
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bloch_probabilities() {
        let s = SpinValue::HALF;
        let state = BlochState::new([0.3, -0.4, 0.5]).unwrap();
        let rho = state.density_matrix();
        let n = Direction::polar(1.1, 0.4);
        for m in s.indices() {
            let p = outcome_probability(&rho, &eigen_projection(s, &n, m).matrix).unwrap();
            assert_abs_diff_eq!(p, 0.5 + m.value() * n.dot(&state.vector()), epsilon = 1e-12);
        }
        assert!(BlochState::new([1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn gross_violations_are_flagged() {
        let s = SpinValue::HALF;
        let z = z_projection(s, s.index(1).unwrap()).matrix;
        let not_normalized = &z * Complex64::from(2.0);
        assert!(matches!(outcome_probability(&not_normalized, &z), Err(Error::InvalidState(_))));
        let negative = CMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::from(1.5), Complex64::from(-0.5)]));
        assert!(matches!(outcome_probability(&negative, &z), Err(Error::InvalidState(_))));
        let too_big = &z * Complex64::from(1.5);
        assert!(matches!(outcome_probability(&maximally_mixed(s), &too_big), Err(Error::InvalidEffect(_))));
    }
}
