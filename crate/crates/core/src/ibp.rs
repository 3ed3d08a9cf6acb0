//! The integration-by-parts identity for the Dirichlet law.
//!
//! For every differentiable `f` and direction `i`,
//!
//! ```text
//! E[f] = (gamma / alpha_i) E[x_i f] + (1 / alpha_i) E[x_i (sum_k x_k d_k f - d_i f)]
//! ```
//!
//! [`ibp_residual`] evaluates both sides with a tensor Gauss rule on the
//! simplex or by Monte Carlo and reports their difference.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{pow, sqrt};

use crate::dirichlet::{sample_dirichlet_into, WeightVector};
use crate::quadrature::SimplexRule;
use crate::rng::{CounterRng, StreamTag};
use crate::{Error, Result};

/// A function on the simplex together with its gradient.
pub trait SimplexFunction {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
}

#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

/// A polynomial in `x_1..x_K`.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    vars: usize,
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(vars: usize, terms: Vec<Monomial>) -> Self {
        assert!(terms.iter().all(|t| t.exponents.len() == vars));
        Polynomial { vars, terms }
    }

    pub fn constant(vars: usize, c: f64) -> Self {
        Self::new(vars, vec![Monomial { coefficient: c, exponents: vec![0; vars] }])
    }

    /// `c * prod x_{vars[j]}` (repeated indices multiply).
    pub fn monomial(vars: usize, c: f64, indices: &[usize]) -> Self {
        let mut exponents = vec![0; vars];
        for &i in indices {
            exponents[i % vars] += 1;
        }
        Self::new(vars, vec![Monomial { coefficient: c, exponents }])
    }

    pub fn plus(mut self, other: Polynomial) -> Self {
        assert_eq!(self.vars, other.vars);
        self.terms.extend(other.terms);
        self
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.exponents.iter().sum()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }
}

fn powu(x: f64, e: u32) -> f64 {
    match e {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => pow(x, e as f64),
    }
}

impl SimplexFunction for Polynomial {
    fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient * t.exponents.iter().zip(x).map(|(&e, &xi)| powu(xi, e)).product::<f64>())
            .sum()
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for t in &self.terms {
            for k in 0..self.vars {
                let ek = t.exponents[k];
                if ek == 0 {
                    continue;
                }
                let mut prod = t.coefficient * ek as f64;
                for (j, (&e, &xj)) in t.exponents.iter().zip(x).enumerate() {
                    prod *= if j == k { powu(xj, e - 1) } else { powu(xj, e) };
                }
                grad[k] += prod;
            }
        }
    }
}

/// Names of the polynomial test functions; see [`catalog_function`].
pub const CATALOG: &[&str] = &["one", "x1", "x1_squared", "x1x2", "linear", "cubic", "mixed"];

/// Catalog polynomial `name` in `vars` variables (indices wrap modulo `vars`).
///
/// * `one` = 1, `x1` = x_1, `x1_squared` = x_1^2, `x1x2` = x_1 x_2
/// * `linear` = sum_k k x_k
/// * `cubic` = x_1^3 - 2 x_1 x_2 x_K
/// * `mixed` = 3 x_1^2 x_2 - x_2^3 + 0.5 x_K^2 - x_1 + 2
pub fn catalog_function(name: &str, vars: usize) -> Option<Polynomial> {
    let last = vars - 1;
    Some(match name {
        "one" => Polynomial::constant(vars, 1.0),
        "x1" => Polynomial::monomial(vars, 1.0, &[0]),
        "x1_squared" => Polynomial::monomial(vars, 1.0, &[0, 0]),
        "x1x2" => Polynomial::monomial(vars, 1.0, &[0, 1]),
        "linear" => (1..vars).fold(Polynomial::monomial(vars, 1.0, &[0]), |p, k| {
            p.plus(Polynomial::monomial(vars, (k + 1) as f64, &[k]))
        }),
        "cubic" => Polynomial::monomial(vars, 1.0, &[0, 0, 0]).plus(Polynomial::monomial(vars, -2.0, &[0, 1, last])),
        "mixed" => Polynomial::monomial(vars, 3.0, &[0, 0, 1])
            .plus(Polynomial::monomial(vars, -1.0, &[1, 1, 1]))
            .plus(Polynomial::monomial(vars, 0.5, &[last, last]))
            .plus(Polynomial::monomial(vars, -1.0, &[0]))
            .plus(Polynomial::constant(vars, 2.0)),
        _ => return None,
    })
}

/// How both sides of the identity are integrated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IbpEstimator {
    /// Tensor Gauss-Jacobi rule with `nodes` points per stick; `2d <= 4` only.
    Quadrature { nodes: usize },
    /// Plain Monte Carlo over `draws` Dirichlet samples.
    MonteCarlo { draws: usize, seed: u64 },
}

/// Largest number of simplex coordinates the quadrature mode accepts.
pub const QUADRATURE_MAX_COMPONENTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IbpReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`.
    pub residual: f64,
    /// Standard error of the residual (Monte Carlo only; computed from the
    /// per-draw differences).
    pub std_error: Option<f64>,
}

/// Left and right integrands of the identity at one point.
fn sides(f: &dyn SimplexFunction, x: &[f64], grad: &mut [f64], alpha_i: f64, gamma: f64, dir: usize) -> (f64, f64) {
    let v = f.value(x);
    f.gradient(x, grad);
    let euler: f64 = x.iter().zip(grad.iter()).map(|(a, b)| a * b).sum();
    let xi = x[dir];
    (v, gamma / alpha_i * xi * v + xi * (euler - grad[dir]) / alpha_i)
}

/// Runs the identity for several functions on the same nodes or draws.
pub fn ibp_residuals(
    weights: &WeightVector,
    functions: &[&dyn SimplexFunction],
    dir: usize,
    estimator: IbpEstimator,
) -> Result<Vec<IbpReport>> {
    let k = weights.directions();
    if dir >= k {
        return Err(Error::InvalidParameter(format!("direction {dir} out of range")));
    }
    let alpha_i = weights.alpha(dir);
    let gamma = weights.gamma();
    let mut grad = vec![0.0; k];
    match estimator {
        IbpEstimator::Quadrature { nodes } => {
            if k > QUADRATURE_MAX_COMPONENTS {
                return Err(Error::InvalidParameter(format!(
                    "quadrature mode supports at most {QUADRATURE_MAX_COMPONENTS} components, got {k}"
                )));
            }
            let rule = SimplexRule::new(weights.alphas(), nodes.max(1));
            Ok(functions
                .iter()
                .map(|f| {
                    let lhs = rule.expectation(|x| f.value(x));
                    let rhs = rule.expectation(|x| sides(*f, x, &mut grad, alpha_i, gamma, dir).1);
                    IbpReport { lhs, rhs, residual: lhs - rhs, std_error: None }
                })
                .collect())
        }
        IbpEstimator::MonteCarlo { draws, seed } => {
            if draws < 2 {
                return Err(Error::InvalidParameter("Monte Carlo mode needs at least two draws".into()));
            }
            let mut rng = CounterRng::indexed(seed, StreamTag::MonteCarlo, 0);
            let mut x = vec![0.0; k];
            // per function: sum lhs, sum rhs, Welford mean/m2 of the difference
            let mut acc: Box<[(f64, f64, f64, f64)]> = vec![(0.0, 0.0, 0.0, 0.0); functions.len()].into();
            for n in 1..=draws {
                sample_dirichlet_into(weights, &mut rng, &mut x);
                for (f, a) in functions.iter().zip(acc.iter_mut()) {
                    let (l, r) = sides(*f, &x, &mut grad, alpha_i, gamma, dir);
                    a.0 += l;
                    a.1 += r;
                    let diff = l - r;
                    let delta = diff - a.2;
                    a.2 += delta / n as f64;
                    a.3 += delta * (diff - a.2);
                }
            }
            let n = draws as f64;
            Ok(acc
                .iter()
                .map(|&(sl, sr, mean, m2)| IbpReport {
                    lhs: sl / n,
                    rhs: sr / n,
                    residual: mean,
                    std_error: Some(sqrt(m2 / (n - 1.0) / n)),
                })
                .collect())
        }
    }
}

pub fn ibp_residual(
    weights: &WeightVector,
    f: &dyn SimplexFunction,
    dir: usize,
    estimator: IbpEstimator,
) -> Result<IbpReport> {
    Ok(ibp_residuals(weights, &[f], dir, estimator)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_gradient_matches_hand_values() {
        let p = catalog_function("mixed", 3).unwrap();
        let x = [0.2, 0.3, 0.5];
        // 3 x1^2 x2 - x2^3 + 0.5 x3^2 - x1 + 2
        let v = 3.0 * 0.04 * 0.3 - 0.027 + 0.5 * 0.25 - 0.2 + 2.0;
        assert!((p.value(&x) - v).abs() < 1e-15);
        let mut g = [0.0; 3];
        p.gradient(&x, &mut g);
        assert!((g[0] - (6.0 * 0.2 * 0.3 - 1.0)).abs() < 1e-15);
        assert!((g[1] - (3.0 * 0.04 - 3.0 * 0.09)).abs() < 1e-15);
        assert!((g[2] - 0.5).abs() < 1e-15);
        assert!(catalog_function("nope", 2).is_none());
        for name in CATALOG {
            assert!(catalog_function(name, 2).unwrap().degree() <= 3);
        }
    }

    #[test]
    fn constant_function_has_zero_residual() {
        let w = WeightVector::new(2, vec![0.7, 2.0, 1.3, 4.0]).unwrap();
        let one = catalog_function("one", 4).unwrap();
        for dir in 0..4 {
            let r = ibp_residual(&w, &one, dir, IbpEstimator::Quadrature { nodes: 4 }).unwrap();
            assert!(r.residual.abs() < 1e-10);
        }
    }

    #[test]
    fn x1_example_both_sides_are_three_quarters() {
        let w = WeightVector::new(1, vec![3.0, 1.0]).unwrap();
        let f = catalog_function("x1", 2).unwrap();
        let r = ibp_residual(&w, &f, 0, IbpEstimator::Quadrature { nodes: 6 }).unwrap();
        assert!((r.lhs - 0.75).abs() < 1e-12 && (r.rhs - 0.75).abs() < 1e-12);
        assert!(r.residual.abs() < 1e-10);
    }

    #[test]
    fn quadrature_is_refused_in_high_dimension() {
        let w = WeightVector::new(3, vec![1.0; 6]).unwrap();
        let f = catalog_function("x1", 6).unwrap();
        assert!(ibp_residual(&w, &f, 0, IbpEstimator::Quadrature { nodes: 4 }).is_err());
        assert!(ibp_residual(&w, &f, 0, IbpEstimator::MonteCarlo { draws: 1000, seed: 1 }).is_ok());
    }
}
