//! The Dirichlet law on the simplex `T_2d`: parameters, sampling through
//! normalized Gamma variables, and closed-form moments.

use alloc::format;
use alloc::vec::Vec;

use libm::{exp, lgamma, log, sqrt};
use rand_core::RngCore;

use crate::rng::open01;
use crate::{Error, Result};

/// Simplex points must sum to one within this absolute tolerance.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Dirichlet parameters `alpha_1..alpha_2d` for a walk in dimension `d`.
///
/// Entry `i < d` weighs the step `+e_{i+1}`, entry `d + i` the step `-e_{i+1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    dim: usize,
    alphas: Vec<f64>,
}

impl WeightVector {
    pub fn new(dim: usize, alphas: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidWeights("dimension must be positive".into()));
        }
        if alphas.len() != 2 * dim {
            return Err(Error::InvalidWeights(format!(
                "expected {} weights for d = {dim}, got {}",
                2 * dim,
                alphas.len()
            )));
        }
        if let Some((i, a)) = alphas.iter().enumerate().find(|(_, a)| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidWeights(format!("alpha[{i}] = {a} is not a positive finite number")));
        }
        Ok(WeightVector { dim, alphas })
    }

    /// `alpha = gamma * m`.
    pub fn from_mean(dim: usize, gamma: f64, mean: &[f64]) -> Result<Self> {
        Self::new(dim, mean.iter().map(|m| gamma * m).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn directions(&self) -> usize {
        self.alphas.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha(&self, dir: usize) -> f64 {
        self.alphas[dir]
    }

    /// `alpha_{e_axis}`.
    pub fn alpha_pos(&self, axis: usize) -> f64 {
        self.alphas[axis]
    }

    /// `alpha_{-e_axis}`.
    pub fn alpha_neg(&self, axis: usize) -> f64 {
        self.alphas[axis + self.dim]
    }

    /// `gamma = sum of the alphas`.
    pub fn gamma(&self) -> f64 {
        self.alphas.iter().sum()
    }

    /// `m_i = alpha_i / gamma`.
    pub fn mean(&self, dir: usize) -> f64 {
        self.alphas[dir] / self.gamma()
    }

    pub fn means(&self) -> Vec<f64> {
        let g = self.gamma();
        self.alphas.iter().map(|a| a / g).collect()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.dim, self.alphas.iter().map(|a| a * factor).collect())
    }
}

/// One exit distribution `omega(x, x + e_i)`, a point of `T_2d`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidSimplexPoint("empty vector".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::InvalidSimplexPoint(format!("entry {p} outside (0, 1]")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidSimplexPoint(format!("entries sum to {total}")));
        }
        Ok(SimplexPoint(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, dir: usize) -> f64 {
        self.0[dir]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Exponents `n_1..n_2d` of a monomial moment `E[prod x_i^{n_i}]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zeros(len: usize) -> Self {
        MultiIndex(alloc::vec![0; len])
    }

    /// The unit index with a single one at `dir`.
    pub fn unit(len: usize, dir: usize) -> Self {
        let mut e = alloc::vec![0; len];
        e[dir] = 1;
        MultiIndex(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }
}

/// Standard normal draw (Marsaglia polar method; the second variate is dropped).
pub fn sample_standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = 2.0 * open01(rng) - 1.0;
        let v = 2.0 * open01(rng) - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * sqrt(-2.0 * log(s) / s);
        }
    }
}

/// `ln Z` for `Z ~ Gamma(shape, 1)`.
///
/// Marsaglia-Tsang squeeze for `shape >= 1`; smaller shapes use
/// `Gamma(a) = Gamma(a + 1) * U^(1/a)`, kept in log space so that tiny
/// shapes do not underflow.
pub fn sample_log_gamma<R: RngCore + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    debug_assert!(shape > 0.0);
    if shape < 1.0 {
        let boosted = sample_log_gamma(shape + 1.0, rng);
        return boosted + log(open01(rng)) / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / sqrt(9.0 * d);
    loop {
        let x = sample_standard_normal(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = open01(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || log(u) < 0.5 * x2 + d * (1.0 - v + log(v)) {
            return log(d) + log(v);
        }
    }
}

/// One draw from `Dirichlet(alpha)` written into `out`.
///
/// Entries below `f64::MIN_POSITIVE` are raised to it so the result stays in
/// the open simplex; the induced change of the sum is far below
/// [`SIMPLEX_TOLERANCE`].
pub fn sample_dirichlet_into<R: RngCore + ?Sized>(weights: &WeightVector, rng: &mut R, out: &mut [f64]) {
    debug_assert_eq!(out.len(), weights.directions());
    let mut top = f64::NEG_INFINITY;
    for (o, &a) in out.iter_mut().zip(weights.alphas()) {
        *o = sample_log_gamma(a, rng);
        top = top.max(*o);
    }
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = exp(*o - top);
        total += *o;
    }
    for o in out.iter_mut() {
        *o = (*o / total).max(f64::MIN_POSITIVE);
    }
}

pub fn sample_dirichlet<R: RngCore + ?Sized>(weights: &WeightVector, rng: &mut R) -> SimplexPoint {
    let mut out = alloc::vec![0.0; weights.directions()];
    sample_dirichlet_into(weights, rng, &mut out);
    SimplexPoint(out)
}

/// `ln E[prod x_i^{n_i}] = sum_i [lnG(a_i + n_i) - lnG(a_i)] + lnG(gamma) - lnG(gamma + n)`.
pub fn log_moment_counts(alphas: &[f64], counts: &[u32]) -> f64 {
    debug_assert_eq!(alphas.len(), counts.len());
    let mut acc = 0.0;
    let mut gamma = 0.0;
    let mut total = 0u64;
    for (&a, &n) in alphas.iter().zip(counts) {
        gamma += a;
        total += n as u64;
        if n > 0 {
            acc += lgamma(a + n as f64) - lgamma(a);
        }
    }
    if total > 0 {
        acc += lgamma(gamma) - lgamma(gamma + total as f64);
    }
    acc
}

/// Closed-form Dirichlet moment `E[prod x_i^{n_i}]`.
pub fn dirichlet_moment(weights: &WeightVector, idx: &MultiIndex) -> Result<f64> {
    if idx.exponents().len() != weights.directions() {
        return Err(Error::InvalidWeights(format!(
            "multi-index has {} entries, weights have {}",
            idx.exponents().len(),
            weights.directions()
        )));
    }
    Ok(exp(log_moment_counts(weights.alphas(), idx.exponents())))
}

/// `E[1 / x_dir] = (gamma - 1) / (alpha_dir - 1)`, finite only when `alpha_dir > 1`.
pub fn inverse_first_moment(weights: &WeightVector, dir: usize) -> Result<f64> {
    let a = weights.alpha(dir);
    if a <= 1.0 {
        return Err(Error::Divergent { direction: dir, alpha: a });
    }
    Ok((weights.gamma() - 1.0) / (a - 1.0))
}

/// `Cov(x_i, x_j)`: `-m_i m_j / (gamma + 1)` off the diagonal and
/// `m_i (1 - m_i) / (gamma + 1)` on it.
pub fn dirichlet_covariance(weights: &WeightVector, i: usize, j: usize) -> f64 {
    let g = weights.gamma();
    let mi = weights.alpha(i) / g;
    if i == j {
        mi * (1.0 - mi) / (g + 1.0)
    } else {
        -mi * (weights.alpha(j) / g) / (g + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{CounterRng, StreamTag};

    fn w(dim: usize, a: &[f64]) -> WeightVector {
        WeightVector::new(dim, a.to_vec()).unwrap()
    }

    #[test]
    fn weights_are_validated() {
        assert!(WeightVector::new(1, alloc::vec![1.0]).is_err());
        assert!(WeightVector::new(1, alloc::vec![1.0, 0.0]).is_err());
        assert!(WeightVector::new(1, alloc::vec![1.0, f64::NAN]).is_err());
        assert!(WeightVector::new(0, alloc::vec![]).is_err());
        let wv = w(2, &[2.0, 3.0, 1.0, 2.0]);
        assert_eq!(wv.gamma(), 8.0);
        assert_eq!(wv.alpha_neg(0), 1.0);
        assert!((wv.means().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn simplex_points_are_validated() {
        assert!(SimplexPoint::new(alloc::vec![0.5, 0.5]).is_ok());
        assert!(SimplexPoint::new(alloc::vec![1.0, 0.0]).is_err());
        assert!(SimplexPoint::new(alloc::vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn moments_match_examples() {
        let wv = w(1, &[3.0, 1.0]);
        assert_eq!(dirichlet_moment(&wv, &MultiIndex::zeros(2)).unwrap(), 1.0);
        assert!((dirichlet_moment(&wv, &MultiIndex::new(alloc::vec![1, 0])).unwrap() - 0.75).abs() < 1e-14);
        assert!((dirichlet_moment(&wv, &MultiIndex::new(alloc::vec![2, 0])).unwrap() - 0.6).abs() < 1e-14);
        assert!(dirichlet_moment(&wv, &MultiIndex::new(alloc::vec![1])).is_err());
    }

    #[test]
    fn inverse_first_moment_examples() {
        assert!((inverse_first_moment(&w(1, &[3.0, 1.0]), 0).unwrap() - 1.5).abs() < 1e-15);
        assert!((inverse_first_moment(&w(2, &[2.0, 2.0, 2.0, 2.0]), 0).unwrap() - 7.0).abs() < 1e-15);
        assert!(matches!(inverse_first_moment(&w(1, &[1.0, 1.0]), 0), Err(Error::Divergent { .. })));
    }

    #[test]
    fn covariance_examples() {
        assert!((dirichlet_covariance(&w(1, &[3.0, 1.0]), 0, 0) - 0.0375).abs() < 1e-15);
        let c = dirichlet_covariance(&w(2, &[2.0, 2.0, 2.0, 2.0]), 0, 1);
        assert!((c + 0.0625 / 9.0).abs() < 1e-15);
        let wv = w(2, &[2.0, 3.0, 1.0, 2.0]);
        for i in 0..4 {
            let row: f64 = (0..4).map(|j| dirichlet_covariance(&wv, i, j)).sum();
            assert!(row.abs() < 1e-15);
        }
    }

    #[test]
    fn samples_stay_on_the_simplex_for_tiny_shapes() {
        let wv = w(2, &[1e-3, 0.2, 5.0, 1e-9]);
        let mut rng = CounterRng::indexed(3, StreamTag::MonteCarlo, 0);
        for _ in 0..1000 {
            let p = sample_dirichlet(&wv, &mut rng);
            assert!(SimplexPoint::new(p.into_vec()).is_ok());
        }
    }
}
