//! Relative entropy, device information loss, visibility and noise.
//!
//! Entropies are in bits.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qcoeff::{marginal_distribution, marginal_povm, target_distribution, LambdaWeights, QTable};
use crate::spin::{eigen_projections, max_abs, maximally_mixed, validate_effect, CMatrix, Direction, SpinValue};
use crate::tol;

/// A probability vector over the outcomes `m = s, ..., -s`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbVector {
    p: Vec<f64>,
}

impl ProbVector {
    /// Entries may be negative or the total off by at most
    /// [`tol::PROBABILITY`]; such drifts are removed, larger ones rejected.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < -tol::PROBABILITY) {
            return Err(Error::InvalidDistribution(format!("entry {x} is negative")));
        }
        let p: Vec<f64> = p.into_iter().map(|x| x.max(0.0)).collect();
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > tol::PROBABILITY {
            return Err(Error::InvalidDistribution(format!("total mass {total}")));
        }
        Ok(ProbVector { p: p.into_iter().map(|x| x / total).collect() })
    }

    pub fn uniform(n: usize) -> Self {
        ProbVector { p: vec![1.0 / n as f64; n] }
    }

    pub fn point(n: usize, i: usize) -> Self {
        let mut p = vec![0.0; n];
        p[i] = 1.0;
        ProbVector { p }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

/// `S(p‖q) = Σ p log₂(p/q)`, with `0 log 0 = 0`.
///
/// Returns `f64::INFINITY` when `p` charges an outcome that `q` does not.
pub fn relative_entropy(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidDistribution(format!("lengths {} and {} differ", p.len(), q.len())));
    }
    let mut total = 0.0;
    for (&a, &b) in p.p.iter().zip(&q.p) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += a * (a / b).log2();
    }
    Ok(total.max(0.0))
}

/// `η = min_m Σ_l λ_l q(m|l,m)`.
pub fn visibility(table: &QTable, lambdas: &LambdaWeights) -> Result<f64> {
    let w = table.mixed(lambdas)?;
    Ok((0..w.len()).map(|m| w[m][m]).fold(f64::INFINITY, f64::min))
}

/// Device information loss `log₂(1/η)` from the q-coefficients.
pub fn device_loss_closed(table: &QTable, lambdas: &LambdaWeights) -> Result<f64> {
    Ok(-visibility(table, lambdas)?.log2())
}

/// Device information loss as the largest relative entropy over the
/// eigenstates `A_n(m)`.
pub fn device_loss_by_states(table: &QTable, lambdas: &LambdaWeights, n: &Direction) -> Result<f64> {
    let s = table.spin();
    eigen_projections(s, n)
        .iter()
        .map(|rho| {
            let target = target_distribution(s, n, &rho.matrix)?;
            let approx = marginal_distribution(table, lambdas, n, &rho.matrix)?;
            relative_entropy(&target, &approx)
        })
        .try_fold(0.0, |acc: f64, v| v.map(|v| acc.max(v)))
}

/// `M_{λ,[n]}(m) = η A_n(m) + (1 - η) N(m)` with the largest visibility `η`.
#[derive(Clone, Debug)]
pub struct NoisyDecomposition {
    pub visibility: f64,
    pub noise: Vec<CMatrix>,
    /// `max_m ‖η A_n(m) + (1-η) N(m) - M(m)‖`
    pub reconstruction_residual: f64,
}

pub fn noisy_decomposition(table: &QTable, lambdas: &LambdaWeights, n: &Direction) -> Result<NoisyDecomposition> {
    let s = table.spin();
    let dim = s.dim();
    let w = table.mixed(lambdas)?;
    let eta = (0..dim).map(|m| w[m][m]).fold(f64::INFINITY, f64::min);
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Domain(format!("visibility {eta} outside (0, 1)")));
    }
    let proj = eigen_projections(s, n);
    let noise: Vec<CMatrix> = (0..dim)
        .map(|m| {
            let mut acc = &proj[m].matrix * Complex64::from(w[m][m] - eta);
            for h in (0..dim).filter(|&h| h != m) {
                acc += &proj[h].matrix * Complex64::from(w[m][h]);
            }
            acc / Complex64::from(1.0 - eta)
        })
        .collect();
    for e in &noise {
        validate_effect(e)?;
    }
    let total = noise.iter().fold(CMatrix::zeros(dim, dim), |a, b| a + b);
    let completeness = max_abs(&(total - CMatrix::identity(dim, dim)));
    if completeness > tol::STRUCTURAL {
        return Err(Error::InvalidEffect(format!("noise elements sum to identity only up to {completeness:e}")));
    }
    let marginal = marginal_povm(table, lambdas, n)?;
    let reconstruction_residual = (0..dim)
        .map(|m| {
            let rebuilt = &proj[m].matrix * Complex64::from(eta) + &noise[m] * Complex64::from(1.0 - eta);
            max_abs(&(rebuilt - &marginal[m]))
        })
        .fold(0.0, f64::max);
    Ok(NoisyDecomposition { visibility: eta, noise, reconstruction_residual })
}

/// The binary relative entropy `s(c, x)` between `(1±x)/2` and `(1±cx)/2`, in bits.
pub fn s_cx(c: f64, x: f64) -> Result<f64> {
    if !(c.abs() < 1.0) || !(x.abs() <= 1.0) {
        return Err(Error::Domain(format!("s(c, x) needs |c| < 1 and |x| ≤ 1, got c = {c}, x = {x}")));
    }
    let term = |e: f64| {
        let p = (1.0 + e * x) / 2.0;
        if p == 0.0 {
            0.0
        } else {
            p * ((1.0 + e * x) / (1.0 + e * c * x)).log2()
        }
    };
    Ok((term(1.0) + term(-1.0)).max(0.0))
}

/// Relative entropy between the uniform distribution and the approximating
/// marginal on the maximally mixed state.
pub fn mixed_state_bias(table: &QTable, lambdas: &LambdaWeights) -> Result<f64> {
    let s: SpinValue = table.spin();
    let p = marginal_distribution(table, lambdas, &Direction::Z, &maximally_mixed(s))?;
    relative_entropy(&ProbVector::uniform(s.dim()), &p)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use crate::qcoeff::{q_table, AngleGrid, QBuilder};
    use crate::spin::{eigen_projection, BlochState};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sp(ts: u32) -> SpinValue {
        SpinValue::from_twice(ts).unwrap()
    }

    fn random_prob(n: usize, rng: &mut impl Rng) -> ProbVector {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let t: f64 = raw.iter().sum();
        ProbVector::new(raw.into_iter().map(|x| x / t).collect()).unwrap()
    }

    fn random_direction(rng: &mut impl Rng) -> Direction {
        Direction::polar(rng.random_range(0.0..std::f64::consts::PI), rng.random_range(0.0..std::f64::consts::TAU))
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.5, 0.5 + 1e-11]).is_ok());
        assert!(ProbVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(vec![1.1, -0.1]).is_err());
        assert!(ProbVector::new(vec![]).is_err());
        let p = ProbVector::new(vec![1.0 + 1e-11, -1e-12]).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn relative_entropy_examples() {
        let p = ProbVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(relative_entropy(&p, &p).unwrap(), 0.0);
        let point = ProbVector::point(2, 0);
        let q = ProbVector::new(vec![0.75, 0.25]).unwrap();
        assert_abs_diff_eq!(relative_entropy(&point, &q).unwrap(), (4.0f64 / 3.0).log2(), epsilon = 1e-15);
        assert_eq!(relative_entropy(&point, &ProbVector::point(2, 1)).unwrap(), f64::INFINITY);
        assert!(relative_entropy(&point, &p).is_err());
    }

    #[test]
    fn relative_entropy_is_positive_off_the_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let n = rng.random_range(2..8);
            let (p, q) = (random_prob(n, &mut rng), random_prob(n, &mut rng));
            let d = relative_entropy(&p, &q).unwrap();
            assert!(d > 0.0);
            assert_eq!(relative_entropy(&p, &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn spin_half_device_loss() {
        let s = SpinValue::HALF;
        let t = q_table(s, &AngleGrid::unbiased(s)).unwrap();
        for lam in [0.0, 0.3, 1.0] {
            let w = LambdaWeights::new(s, vec![lam, 1.0 - lam]).unwrap();
            assert_abs_diff_eq!(device_loss_closed(&t, &w).unwrap(), (4.0 / (1.0 + 2.0 * lam)).log2(), epsilon = 1e-14);
        }
        let w = LambdaWeights::delta(s, s.at(0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let d = device_loss_by_states(&t, &w, &random_direction(&mut rng)).unwrap();
            assert_abs_diff_eq!(d, (4.0f64 / 3.0).log2(), epsilon = 1e-12);
        }
    }

    #[test]
    fn spin_one_unbiased_device_loss() {
        let s = SpinValue::ONE;
        let t = q_table(s, &AngleGrid::unbiased(s)).unwrap();
        let d = device_loss_closed(&t, &LambdaWeights::delta(s, s.at(0))).unwrap();
        assert_abs_diff_eq!(d, (27.0f64 / 13.0).log2(), epsilon = 1e-14);
    }

    #[test]
    fn closed_and_state_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for ts in 1..=6 {
            let s = sp(ts);
            let builder = QBuilder::new(s);
            for _ in 0..8 {
                let mut free: Vec<f64> = (0..s.free_angles()).map(|_| rng.random_range(0.05..0.95)).collect();
                free.sort_by(|a, b| b.partial_cmp(a).unwrap());
                free.dedup();
                let Ok(grid) = AngleGrid::from_free(s, &free) else { continue };
                let t = builder.table(&grid).unwrap();
                let raw: Vec<f64> = (0..s.dim()).map(|_| rng.random_range(0.0..1.0)).collect();
                let sum: f64 = raw.iter().sum();
                let w = LambdaWeights::new(s, raw.iter().map(|x| x / sum).collect()).unwrap();
                let closed = device_loss_closed(&t, &w).unwrap();
                for _ in 0..3 {
                    let by_states = device_loss_by_states(&t, &w, &random_direction(&mut rng)).unwrap();
                    assert!((closed - by_states).abs() <= 1e-10, "s={s}: {closed} vs {by_states}");
                }
            }
        }
    }

    #[test]
    fn decomposition() {
        let s = SpinValue::HALF;
        let t = q_table(s, &AngleGrid::unbiased(s)).unwrap();
        let n = Direction::new([0.0, 0.6, -0.8]).unwrap();
        let d = noisy_decomposition(&t, &LambdaWeights::delta(s, s.at(0)), &n).unwrap();
        assert_abs_diff_eq!(d.visibility, 0.75, epsilon = 1e-15);
        for (k, m) in s.indices().enumerate() {
            let flipped = eigen_projection(s, &n, -m).matrix;
            assert!(max_abs(&(&d.noise[k] - flipped)) < 1e-12);
        }
        assert!(d.reconstruction_residual < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for ts in 2..=5 {
            let s = sp(ts);
            let t = q_table(s, &AngleGrid::unbiased(s)).unwrap();
            let w = LambdaWeights::uniform(s);
            let d = noisy_decomposition(&t, &w, &random_direction(&mut rng)).unwrap();
            assert!(d.reconstruction_residual <= 1e-10);
            assert!(d.visibility > 0.0 && d.visibility < 1.0);
            assert_abs_diff_eq!(-d.visibility.log2(), device_loss_closed(&t, &w).unwrap(), epsilon = 1e-15);
        }
    }

    #[test]
    fn binary_entropy_function() {
        assert_eq!(s_cx(0.3, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(s_cx(0.5, 1.0).unwrap(), (4.0f64 / 3.0).log2(), epsilon = 1e-15);
        assert!(s_cx(1.0, 0.5).is_err());
        assert!(s_cx(0.5, 1.5).is_err());
        let s = SpinValue::HALF;
        let t = q_table(s, &AngleGrid::unbiased(s)).unwrap();
        let r = [0.2, -0.5, 0.4];
        let n = Direction::new([0.0, 0.0, 1.0]).unwrap();
        let rho = BlochState::new(r).unwrap().density_matrix();
        for lam in [0.6, 0.9, 1.0] {
            let w = LambdaWeights::new(s, vec![lam, 1.0 - lam]).unwrap();
            let p = target_distribution(s, &n, &rho).unwrap();
            let q = marginal_distribution(&t, &w, &n, &rho).unwrap();
            assert_abs_diff_eq!(relative_entropy(&p, &q).unwrap(), s_cx(lam - 0.5, n.dot(&r)).unwrap(), epsilon = 1e-14);
        }
    }

    #[test]
    fn binary_entropy_decreases_in_c() {
        for i in 0..100 {
            let x = -1.0 + 2.0 * i as f64 / 99.0;
            let mut prev = f64::INFINITY;
            for j in 0..100 {
                let c = -0.99 + 1.98 * j as f64 / 99.0;
                let v = s_cx(c, x).unwrap();
                assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
    }

    #[test]
    fn bias_values() {
        for ts in 1..=6 {
            let s = sp(ts);
            let t = q_table(s, &AngleGrid::unbiased(s)).unwrap();
            assert!(mixed_state_bias(&t, &LambdaWeights::uniform(s)).unwrap() < 1e-14);
        }
        // On ρ₀ the sum rule leaves M(±1) = (1-a)/2, M(0) = a, whatever λ.
        let s = SpinValue::ONE;
        let a: f64 = 0.444703448928752590;
        let t = q_table(s, &AngleGrid::from_a(s, a).unwrap()).unwrap();
        let bias = mixed_state_bias(&t, &LambdaWeights::delta(s, s.at(0))).unwrap();
        let want = (4.0 / (27.0 * a * (1.0 - a).powi(2))).log2() / 3.0;
        assert_abs_diff_eq!(bias, want, epsilon = 1e-14);
        assert_abs_diff_eq!(bias, 0.037178772664007211, epsilon = 1e-12);

        let s = SpinValue::THREE_HALVES;
        let a: f64 = 0.646153783165475382;
        let t = q_table(s, &AngleGrid::from_a(s, a).unwrap()).unwrap();
        let bias = mixed_state_bias(&t, &LambdaWeights::delta(s, s.at(0))).unwrap();
        assert_abs_diff_eq!(bias, 0.5 * (1.0 / (4.0 * a * (1.0 - a))).log2(), epsilon = 1e-14);
        assert_abs_diff_eq!(bias, 0.0644280655214691549, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn relative_entropy_nonnegative(a in proptest::collection::vec(0.01f64..1.0, 2..6), b in proptest::collection::vec(0.01f64..1.0, 6)) {
            let n = a.len();
            let ta: f64 = a.iter().sum();
            let tb: f64 = b[..n].iter().sum();
            let p = ProbVector::new(a.iter().map(|x| x / ta).collect()).unwrap();
            let q = ProbVector::new(b[..n].iter().map(|x| x / tb).collect()).unwrap();
            prop_assert!(relative_entropy(&p, &q).unwrap() >= 0.0);
        }
    }
}
