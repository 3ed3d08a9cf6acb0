//! Green functions: killed Green operators on finite domains, their
//! derivative in a single transition entry, and the Green function of the
//! homogeneous (mean-environment) walk.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{cos, exp, lgamma, log, pow, sqrt};

use crate::dirichlet::{inverse_first_moment, WeightVector};
use crate::environment::{EnvironmentView, TransitionRows};
use crate::lattice::{FiniteDomain, Link, Site};
use crate::linalg::{Lu, Matrix};
use crate::rng::{derive_seed, StreamTag};
use crate::stats::MeanEstimate;
use crate::{Error, Result};

/// Step used for the central finite difference in [`green_derivative_check`].
pub const FD_STEP: f64 = 1e-6;
/// Killing rates are capped here whenever a derivative is requested.
pub const MAX_DERIVATIVE_DELTA: f64 = 1.0 - 1e-9;

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("killing rate {delta} outside (0, 1]")))
    }
}

/// `I - delta * Q` with `Q` the interior-to-interior block of `Omega_U`.
fn killed_system(domain: &FiniteDomain, rows: &TransitionRows, delta: f64) -> Matrix {
    let n = domain.len();
    let mut a = Matrix::identity(n);
    for i in 0..n {
        for dir in 0..rows.directions() {
            if let Link::Interior(j) = domain.link(i, dir) {
                a[(i, j)] -= delta * rows.get(i, dir);
            }
        }
    }
    a
}

fn check_rows(domain: &FiniteDomain, rows: &TransitionRows) -> Result<()> {
    if rows.sites() != domain.len() || rows.directions() != 2 * domain.dim() {
        return Err(Error::InvalidGeometry(format!(
            "transition table is {}x{}, domain needs {}x{}",
            rows.sites(),
            rows.directions(),
            domain.len(),
            2 * domain.dim()
        )));
    }
    Ok(())
}

/// `G_{U,delta}(z, .)` for one interior source.
#[derive(Clone, Debug, PartialEq)]
pub struct GreenRow {
    /// Indexed like `domain.interior()`.
    pub interior: Vec<f64>,
    /// Indexed like `domain.boundary()`.
    pub boundary: Vec<f64>,
}

/// `G_{U,delta}(z, z') = E_z[sum_{k <= T_U} delta^k 1{X_k = z'}]`.
///
/// Solves `(I - delta Q)^T g = e_source`; boundary targets follow from
/// `G(z, b) = delta * sum_x G(z, x) Omega(x, b)`.
pub fn green_killed(rows: &TransitionRows, domain: &FiniteDomain, delta: f64, source: &Site) -> Result<GreenRow> {
    check_delta(delta)?;
    check_rows(domain, rows)?;
    let s = domain
        .interior_index(source)
        .ok_or_else(|| Error::InvalidGeometry(format!("source {:?} is not interior", source.coords())))?;
    let lu = Lu::factor(killed_system(domain, rows, delta))?;
    let mut e = vec![0.0; domain.len()];
    e[s] = 1.0;
    let interior = lu.solve_transpose(&e);
    let boundary = boundary_row(domain, rows, delta, &interior);
    Ok(GreenRow { interior, boundary })
}

fn boundary_row(domain: &FiniteDomain, rows: &TransitionRows, delta: f64, interior: &[f64]) -> Vec<f64> {
    let mut boundary = vec![0.0; domain.boundary().len()];
    for (x, &g) in interior.iter().enumerate() {
        for dir in 0..rows.directions() {
            if let Link::Boundary(b) = domain.link(x, dir) {
                boundary[b] += delta * g * rows.get(x, dir);
            }
        }
    }
    boundary
}

/// The full killed Green matrix over `interior x (interior + boundary)`.
///
/// Sources on the boundary are not stored: `G(b, .) = 0` there.
#[derive(Clone, Debug)]
pub struct KilledGreenOperator {
    domain: FiniteDomain,
    delta: f64,
    values: Matrix,
}

impl KilledGreenOperator {
    pub fn solve(domain: &FiniteDomain, rows: &TransitionRows, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        check_rows(domain, rows)?;
        let n = domain.len();
        let nb = domain.boundary().len();
        let inv = Lu::factor(killed_system(domain, rows, delta))?.inverse();
        let mut values = Matrix::zeros(n, n + nb);
        for z in 0..n {
            let row = values.row_mut(z);
            row[..n].copy_from_slice(inv.row(z));
            let b = boundary_row(domain, rows, delta, inv.row(z));
            row[n..].copy_from_slice(&b);
        }
        Ok(KilledGreenOperator { domain: domain.clone(), delta, values })
    }

    pub fn domain(&self) -> &FiniteDomain {
        &self.domain
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Raw matrix; columns are the interior sites followed by the boundary sites.
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    /// `G(i, j)` for interior indices.
    #[inline]
    pub fn interior(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// `G(source, target)`; zero when the source is not interior or the
    /// target is outside `U` and its boundary.
    pub fn entry(&self, source: &Site, target: &Site) -> f64 {
        let Some(i) = self.domain.interior_index(source) else {
            return 0.0;
        };
        if let Some(j) = self.domain.interior_index(target) {
            self.values[(i, j)]
        } else if let Some(b) = self.domain.boundary_index(target) {
            self.values[(i, self.domain.len() + b)]
        } else {
            0.0
        }
    }

    /// Largest violation of
    /// `delta * sum_k omega(z, z + e_k) G(z + e_k, z) = G(z, z) - 1`.
    pub fn return_identity_residual(&self, rows: &TransitionRows) -> f64 {
        let mut worst: f64 = 0.0;
        for z in 0..self.domain.len() {
            let mut lhs = 0.0;
            for dir in 0..rows.directions() {
                if let Link::Interior(j) = self.domain.link(z, dir) {
                    lhs += rows.get(z, dir) * self.values[(j, z)];
                }
            }
            lhs *= self.delta;
            worst = worst.max((lhs - (self.values[(z, z)] - 1.0)).abs());
        }
        worst
    }

    /// Smallest entry and smallest diagonal entry.
    pub fn min_entry_and_diagonal(&self) -> (f64, f64) {
        let n = self.domain.len();
        let mut min_entry = f64::INFINITY;
        let mut min_diag = f64::INFINITY;
        for i in 0..n {
            for &v in self.values.row(i) {
                min_entry = min_entry.min(v);
            }
            min_diag = min_diag.min(self.values[(i, i)]);
        }
        (min_entry, min_diag)
    }
}

/// Analytic and finite-difference values of `d G(x1, x4) / d omega(x2, x3)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeCheck {
    pub analytic: f64,
    pub numeric: f64,
}

impl DerivativeCheck {
    pub fn relative_error(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.analytic - self.numeric).abs() / scale
        }
    }
}

/// Compares `delta * G(x1, x2) * G(x3, x4)` with a central difference of
/// `G(x1, x4)` in the single entry `omega(x2, x3)`, moved alone (rows are
/// not renormalized).
pub fn green_derivative_check(
    rows: &TransitionRows,
    domain: &FiniteDomain,
    delta: f64,
    x1: &Site,
    x2: &Site,
    x3: &Site,
    x4: &Site,
) -> Result<DerivativeCheck> {
    check_delta(delta)?;
    let delta = delta.min(MAX_DERIVATIVE_DELTA);
    let interior = |s: &Site, name: &str| {
        domain
            .interior_index(s)
            .ok_or_else(|| Error::BadStencil(format!("{name} = {:?} is not interior", s.coords())))
    };
    let i1 = interior(x1, "x1")?;
    let i2 = interior(x2, "x2")?;
    let i4 = interior(x4, "x4")?;
    let dir = x2
        .direction_to(x3)
        .ok_or_else(|| Error::BadStencil(format!("x3 = {:?} is not a neighbour of x2", x3.coords())))?;

    let green = KilledGreenOperator::solve(domain, rows, delta)?;
    let g12 = green.interior(i1, i2);
    let g34 = match domain.interior_index(x3) {
        Some(i3) => green.interior(i3, i4),
        None => 0.0,
    };
    let analytic = delta * g12 * g34;

    let base = rows.get(i2, dir);
    let (up, down) = (base + FD_STEP, base - FD_STEP);
    let mut bumped = rows.clone();
    let mut e = vec![0.0; domain.len()];
    e[i1] = 1.0;
    // The derivative can be many orders below G itself, so both solves are
    // carried in double-double precision before differencing.
    let mut solve_at = |value: f64| -> Result<(f64, f64)> {
        bumped.set(i2, dir, value);
        let a = killed_system(domain, &bumped, delta);
        let lu = Lu::factor(a.clone())?;
        Ok(lu.solve_transpose_extended(&a, &e, 3)[i4])
    };
    let plus = solve_at(up)?;
    let minus = solve_at(down)?;
    let numeric = ((plus.0 - minus.0) + (plus.1 - minus.1)) / (up - down);
    Ok(DerivativeCheck { analytic, numeric })
}

/// Quantities of the homogeneous walk with transitions `m_i = alpha_i / gamma`.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneousKernel {
    dim: usize,
    /// Mean transitions `m_i`.
    pub m: Vec<f64>,
    /// Mean drift `d_m = sum_i m_i e_i`.
    pub drift: Vec<f64>,
    /// `k_m = 2 sum_i sqrt(m_{e_i} m_{-e_i})`.
    pub k_m: f64,
    /// `1 - k_m`, evaluated as `sum_i (sqrt(m_{e_i}) - sqrt(m_{-e_i}))^2`.
    pub one_minus_k: f64,
    /// `max_i sqrt(m_{e_i} / m_{-e_i}) / (1 - k_m)` over all `2d` directions.
    pub eta_m: f64,
    /// Symmetric transitions `s_{+-e_i} = sqrt(m_{e_i} m_{-e_i}) / k_m`.
    pub s: Vec<f64>,
    /// `sqrt(m_{e_i} / m_{-e_i})` per axis; `phi(z) = prod_i base_i^{z_i}`.
    pub phi_base: Vec<f64>,
}

impl HomogeneousKernel {
    pub fn from_mean(dim: usize, m: &[f64]) -> Result<Self> {
        if dim == 0 || m.len() != 2 * dim || m.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::InvalidWeights(format!("invalid mean transition vector of length {}", m.len())));
        }
        let total: f64 = m.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSimplexPoint(format!("mean transitions sum to {total}")));
        }
        let drift: Vec<f64> = (0..dim).map(|i| m[i] - m[i + dim]).collect();
        let geo: Vec<f64> = (0..dim).map(|i| sqrt(m[i] * m[i + dim])).collect();
        let k_m = 2.0 * geo.iter().sum::<f64>();
        let one_minus_k: f64 = (0..dim)
            .map(|i| {
                let d = sqrt(m[i]) - sqrt(m[i + dim]);
                d * d
            })
            .sum();
        let phi_base: Vec<f64> = (0..dim).map(|i| sqrt(m[i] / m[i + dim])).collect();
        let max_ratio = phi_base.iter().fold(0.0f64, |acc, &b| acc.max(b).max(1.0 / b));
        let eta_m = if one_minus_k > 0.0 { max_ratio / one_minus_k } else { f64::INFINITY };
        let mut s = vec![0.0; 2 * dim];
        for i in 0..dim {
            s[i] = geo[i] / k_m;
            s[i + dim] = geo[i] / k_m;
        }
        Ok(HomogeneousKernel { dim, m: m.to_vec(), drift, k_m, one_minus_k, eta_m, s, phi_base })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `phi(z) = prod_i sqrt(m_{e_i} / m_{-e_i})^{z_i}`.
    pub fn phi(&self, site: &Site) -> f64 {
        self.phi_base.iter().zip(site.coords()).map(|(&b, &z)| pow(b, z as f64)).product()
    }

    /// Coefficients `2 sqrt(m_{e_i} m_{-e_i})` of the Fourier symbol.
    fn cos_coefficients(&self) -> Vec<f64> {
        (0..self.dim).map(|i| 2.0 * sqrt(self.m[i] * self.m[i + self.dim])).collect()
    }
}

pub fn homogeneous_stats(weights: &WeightVector) -> HomogeneousKernel {
    HomogeneousKernel::from_mean(weights.dim(), &weights.means()).expect("weights give a valid mean vector")
}

/// Trapezoid nodes per axis for the first Fourier level.
pub const FOURIER_START_NODES: usize = 64;
/// Successive Fourier levels must agree to this tolerance.
pub const FOURIER_TOLERANCE: f64 = 1e-12;
const FOURIER_MAX_POINTS: f64 = 3.0e8;

/// `G^m(0, 0) = (2 pi)^{-d} int 1 / (1 - sum_i 2 sqrt(m_{e_i} m_{-e_i}) cos t_i) dt`
/// by the periodic trapezoid rule, doubling the nodes per axis from 64
/// until successive values agree within `1e-12`.
pub fn green_fourier_origin(kernel: &HomogeneousKernel) -> Result<f64> {
    if !(kernel.one_minus_k > 0.0) {
        return Err(Error::NonConvergent(format!("k_m = {} >= 1", kernel.k_m)));
    }
    let coeffs = kernel.cos_coefficients();
    let mut n = FOURIER_START_NODES;
    let mut previous = torus_trapezoid(&coeffs, n);
    loop {
        n *= 2;
        if pow(n as f64, kernel.dim as f64) > FOURIER_MAX_POINTS {
            return Err(Error::NonConvergent(format!(
                "trapezoid rule not converged with {} nodes per axis in d = {}",
                n / 2,
                kernel.dim
            )));
        }
        let current = torus_trapezoid(&coeffs, n);
        if (current - previous).abs() < FOURIER_TOLERANCE {
            return Ok(current);
        }
        previous = current;
    }
}

/// Mean of `1 / (1 - sum_i c_i cos t_i)` over the `n^d` trapezoid grid.
fn torus_trapezoid(coeffs: &[f64], n: usize) -> f64 {
    let cosines: Vec<f64> =
        (0..n).map(|j| cos(2.0 * core::f64::consts::PI * j as f64 / n as f64)).collect();
    fn sum_axis(coeffs: &[f64], cosines: &[f64], partial: f64) -> f64 {
        match coeffs.split_first() {
            None => 1.0 / (1.0 - partial),
            Some((&c, rest)) => cosines.iter().map(|&ct| sum_axis(rest, cosines, partial + c * ct)).sum(),
        }
    }
    sum_axis(coeffs, &cosines, 0.0) / pow(n as f64, coeffs.len() as f64)
}

/// Truncated return series with a rigorous bound on what was dropped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    /// `k_m^horizon / (1 - k_m)`, an upper bound on the omitted tail.
    pub tail_bound: f64,
    pub horizon: usize,
}

/// Tail target for the default series horizon.
pub const SERIES_TAIL_TARGET: f64 = 1e-10;

/// Smallest `n` with `k_m^n / (1 - k_m) < 1e-10`.
pub fn default_series_horizon(kernel: &HomogeneousKernel) -> usize {
    let k = kernel.k_m;
    if k <= 0.0 {
        return 1;
    }
    let target = SERIES_TAIL_TARGET * kernel.one_minus_k;
    let mut n = libm::floor(log(target) / log(k)).max(0.0) as usize;
    while pow(k, n as f64) / kernel.one_minus_k >= SERIES_TAIL_TARGET {
        n += 1;
    }
    while n > 0 && pow(k, (n - 1) as f64) / kernel.one_minus_k < SERIES_TAIL_TARGET {
        n -= 1;
    }
    n
}

/// `sum_{n <= horizon} P^m(X_n = 0)`.
///
/// Only even times return; splitting `2J` steps into `j_i` round trips per
/// axis gives `P(X_{2J} = 0) = (2J)! sum_{j_1+..+j_d = J} prod_i p_i^{j_i} / (j_i!)^2`
/// with `p_i = m_{e_i} m_{-e_i}`, evaluated as a log-space convolution
/// over axes.
pub fn green_series_origin(kernel: &HomogeneousKernel, horizon: Option<usize>) -> Result<SeriesValue> {
    if !(kernel.one_minus_k > 0.0) {
        return Err(Error::NonConvergent(format!("k_m = {} >= 1", kernel.k_m)));
    }
    let horizon = horizon.unwrap_or_else(|| default_series_horizon(kernel));
    let half = horizon / 2;
    let d = kernel.dim;
    let axis_terms = |i: usize| -> Vec<f64> {
        let lp = log(kernel.m[i] * kernel.m[i + d]);
        (0..=half).map(|j| j as f64 * lp - 2.0 * lgamma(j as f64 + 1.0)).collect()
    };
    let mut conv = axis_terms(0);
    for i in 1..d {
        let next = axis_terms(i);
        conv = (0..=half)
            .map(|total| log_sum_exp((0..=total).map(|j| conv[j] + next[total - j])))
            .collect();
    }
    let value: f64 = conv
        .iter()
        .enumerate()
        .map(|(j, &c)| exp(lgamma(2.0 * j as f64 + 1.0) + c))
        .sum();
    let tail_bound = pow(kernel.k_m, horizon as f64) / kernel.one_minus_k;
    Ok(SeriesValue { value, tail_bound, horizon })
}

fn log_sum_exp<I: Iterator<Item = f64> + Clone>(terms: I) -> f64 {
    let top = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + log(terms.map(|t| exp(t - top)).sum::<f64>())
}

/// Largest entrywise gap between `G^m_delta` and
/// `phi(x)^{-1} G^s_{delta k_m}(x, y) phi(y)` on `domain`, both killed at
/// its boundary.
pub fn symmetrize_check(kernel: &HomogeneousKernel, delta: f64, domain: &FiniteDomain) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("killing rate {delta} outside (0, 1)")));
    }
    let drifted = KilledGreenOperator::solve(domain, &TransitionRows::homogeneous(domain, &kernel.m), delta)?;
    let symmetric =
        KilledGreenOperator::solve(domain, &TransitionRows::homogeneous(domain, &kernel.s), delta * kernel.k_m)?;
    let targets: Vec<&Site> = domain.interior().iter().chain(domain.boundary()).collect();
    let mut worst: f64 = 0.0;
    for (i, x) in domain.interior().iter().enumerate() {
        let phi_x = kernel.phi(x);
        for (j, y) in targets.iter().enumerate() {
            let conj = symmetric.values()[(i, j)] * kernel.phi(y) / phi_x;
            worst = worst.max((drifted.values()[(i, j)] - conj).abs());
        }
    }
    Ok(worst)
}

/// The integrability bound `E[1/x_i]^N` for `E_mu[G_U(z0, z0)]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReturnBound {
    pub value: f64,
    /// Direction `i` with `alpha_i > 1` used for the bound.
    pub direction: usize,
    /// Least `N` with `z0 + N e_i` on the boundary.
    pub steps_to_boundary: u32,
}

/// Monte Carlo estimate of `E_mu[G_U(z0, z0)]` next to its analytic bound.
#[derive(Clone, Debug, PartialEq)]
pub struct GreenReturnEstimate {
    pub estimate: MeanEstimate,
    bound: Option<ReturnBound>,
}

impl GreenReturnEstimate {
    /// The bound, or `HypothesisFailed` when every `alpha_i <= 1`.
    pub fn bound(&self) -> Result<ReturnBound> {
        self.bound
            .ok_or_else(|| Error::HypothesisFailed("no alpha_i exceeds 1; E[1/x_i] is infinite".into()))
    }
}

/// Tightest bound over the directions with `alpha_i > 1`.
pub fn green_return_bound(weights: &WeightVector, domain: &FiniteDomain, z0: &Site) -> Option<ReturnBound> {
    let mut best: Option<ReturnBound> = None;
    for dir in 0..weights.directions() {
        let Ok(inv) = inverse_first_moment(weights, dir) else {
            continue;
        };
        let mut cur = z0.clone();
        let mut steps = 0u32;
        while domain.contains(&cur) {
            cur.step_in_place(dir);
            steps += 1;
        }
        let value = pow(inv, steps as f64);
        if best.is_none_or(|b| value < b.value) {
            best = Some(ReturnBound { value, direction: dir, steps_to_boundary: steps });
        }
    }
    best
}

/// `G_U(z0, z0)` (no killing) in environment sample number `sample`.
pub fn green_return_sample(
    weights: &WeightVector,
    domain: &FiniteDomain,
    z0: &Site,
    seed: u64,
    sample: u64,
) -> Result<f64> {
    let view = EnvironmentView::new(derive_seed(seed, StreamTag::Sample, sample), weights.clone());
    let rows = TransitionRows::from_view(&view, domain);
    let z = domain
        .interior_index(z0)
        .ok_or_else(|| Error::InvalidGeometry(format!("z0 = {:?} is not interior", z0.coords())))?;
    let lu = Lu::factor(killed_system(domain, &rows, 1.0))?;
    let mut e = vec![0.0; domain.len()];
    e[z] = 1.0;
    Ok(lu.solve(&e)[z])
}

pub fn mean_green_return(
    weights: &WeightVector,
    domain: &FiniteDomain,
    z0: &Site,
    samples: usize,
    seed: u64,
) -> Result<GreenReturnEstimate> {
    if samples == 0 {
        return Err(Error::InvalidParameter("at least one sample is needed".into()));
    }
    let values = (0..samples as u64)
        .map(|s| green_return_sample(weights, domain, z0, seed, s))
        .collect::<Result<Vec<f64>>>()?;
    Ok(GreenReturnEstimate::new(MeanEstimate::from_samples(&values), green_return_bound(weights, domain, z0)))
}

impl GreenReturnEstimate {
    pub fn new(estimate: MeanEstimate, bound: Option<ReturnBound>) -> Self {
        GreenReturnEstimate { estimate, bound }
    }
}
