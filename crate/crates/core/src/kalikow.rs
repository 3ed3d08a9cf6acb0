//! Kalikow's auxiliary kernel, its a-priori bounds, and the low-disorder
//! velocity expansion.
//!
//! For a finite domain `U`, killing rate `delta` and anchor `z0`,
//!
//! ```text
//! w(z, z + e_i) = E_mu[G_{U,delta}(z0, z) omega(z, z + e_i)] / E_mu[G_{U,delta}(z0, z)]
//! ```
//!
//! Numerator and denominator are estimated from the same environment
//! samples (one exact Green solve each) and combined by a ratio estimator.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dirichlet::WeightVector;
use crate::environment::{EnvironmentView, TransitionRows};
use crate::green::{green_fourier_origin, homogeneous_stats};
use crate::lattice::{FiniteDomain, Site};
use crate::linalg::{Lu, Matrix};
use crate::rng::{derive_seed, StreamTag};
use crate::stats::RatioAccumulator;
use crate::walk::{exact_velocity_1d, theorem1_condition, Interval};
use crate::{Error, Result};

/// Estimated auxiliary transition probability with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelEstimate {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuxiliaryKernel {
    domain: FiniteDomain,
    delta: f64,
    z0: Site,
    samples: usize,
    /// `[site][dir]`, sites in domain order.
    transitions: Vec<Vec<KernelEstimate>>,
    /// `[site][axis]`, ratio estimates of `w(+e) - w(-e)`.
    drifts: Vec<Vec<KernelEstimate>>,
}

impl AuxiliaryKernel {
    pub fn domain(&self) -> &FiniteDomain {
        &self.domain
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn anchor(&self) -> &Site {
        &self.z0
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn estimate(&self, site: &Site, dir: usize) -> Option<KernelEstimate> {
        self.domain.interior_index(site).map(|i| self.transitions[i][dir])
    }

    /// Estimates at the `i`-th interior site.
    pub fn row(&self, i: usize) -> &[KernelEstimate] {
        &self.transitions[i]
    }

    /// `(sum_i w(z, z + e_i), sqrt(sum_i se_i^2))` at the `i`-th interior site.
    pub fn row_sum(&self, i: usize) -> (f64, f64) {
        let row = &self.transitions[i];
        let sum = row.iter().map(|e| e.value).sum();
        let pooled = libm::sqrt(row.iter().map(|e| e.std_error * e.std_error).sum());
        (sum, pooled)
    }
}

/// One environment sample: `G(z0, .)` over the interior and the sampled rows.
#[derive(Clone, Debug)]
pub struct KalikowSample {
    pub green: Vec<f64>,
    pub rows: TransitionRows,
}

/// Environment sample number `sample` and its Green row from `z0`.
pub fn kalikow_sample(
    weights: &WeightVector,
    domain: &FiniteDomain,
    delta: f64,
    z0: &Site,
    seed: u64,
    sample: u64,
) -> Result<KalikowSample> {
    let z = anchor_index(domain, z0)?;
    let view = EnvironmentView::new(derive_seed(seed, StreamTag::Sample, sample), weights.clone());
    let rows = TransitionRows::from_view(&view, domain);
    let n = domain.len();
    let mut a = Matrix::identity(n);
    for i in 0..n {
        for dir in 0..rows.directions() {
            if let crate::lattice::Link::Interior(j) = domain.link(i, dir) {
                a[(i, j)] -= delta * rows.get(i, dir);
            }
        }
    }
    let mut e = vec![0.0; n];
    e[z] = 1.0;
    let green = Lu::factor(a)?.solve_transpose(&e);
    Ok(KalikowSample { green, rows })
}

fn anchor_index(domain: &FiniteDomain, z0: &Site) -> Result<usize> {
    domain
        .interior_index(z0)
        .ok_or_else(|| Error::InvalidGeometry(format!("anchor {:?} is not interior", z0.coords())))
}

/// Folds environment samples, in the order pushed, into an [`AuxiliaryKernel`].
#[derive(Clone, Debug)]
pub struct KalikowAccumulator {
    domain: FiniteDomain,
    delta: f64,
    z0: Site,
    transitions: Vec<RatioAccumulator>,
    drifts: Vec<RatioAccumulator>,
    samples: usize,
}

impl KalikowAccumulator {
    pub fn new(domain: &FiniteDomain, delta: f64, z0: &Site) -> Result<Self> {
        check_kalikow_delta(delta)?;
        anchor_index(domain, z0)?;
        let dim = domain.dim();
        Ok(KalikowAccumulator {
            domain: domain.clone(),
            delta,
            z0: z0.clone(),
            transitions: vec![RatioAccumulator::default(); domain.len() * 2 * dim],
            drifts: vec![RatioAccumulator::default(); domain.len() * dim],
            samples: 0,
        })
    }

    pub fn push(&mut self, sample: &KalikowSample) {
        let dim = self.domain.dim();
        for (z, &g) in sample.green.iter().enumerate() {
            let row = sample.rows.row(z);
            for (dir, &w) in row.iter().enumerate() {
                self.transitions[z * 2 * dim + dir].push(g * w, g);
            }
            for axis in 0..dim {
                self.drifts[z * dim + axis].push(g * (row[axis] - row[axis + dim]), g);
            }
        }
        self.samples += 1;
    }

    pub fn finish(self) -> AuxiliaryKernel {
        let dim = self.domain.dim();
        let to_estimate =
            |acc: &RatioAccumulator| KernelEstimate { value: acc.ratio(), std_error: acc.std_error() };
        let transitions = self.transitions.chunks(2 * dim).map(|c| c.iter().map(to_estimate).collect()).collect();
        let drifts = self.drifts.chunks(dim).map(|c| c.iter().map(to_estimate).collect()).collect();
        AuxiliaryKernel {
            domain: self.domain,
            delta: self.delta,
            z0: self.z0,
            samples: self.samples,
            transitions,
            drifts,
        }
    }
}

fn check_kalikow_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("Kalikow kernels need delta in (0, 1), got {delta}")))
    }
}

/// Single-threaded estimate; sample `s` always uses the same environment.
pub fn estimate_kalikow(
    weights: &WeightVector,
    domain: &FiniteDomain,
    delta: f64,
    z0: &Site,
    samples: usize,
    seed: u64,
) -> Result<AuxiliaryKernel> {
    if samples < 2 {
        return Err(Error::InvalidParameter("at least two environment samples are needed".into()));
    }
    let mut acc = KalikowAccumulator::new(domain, delta, z0)?;
    for s in 0..samples as u64 {
        acc.push(&kalikow_sample(weights, domain, delta, z0, seed, s)?);
    }
    Ok(acc.finish())
}

/// A bound on one auxiliary transition probability, clipped to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionBound {
    pub interval: Interval,
    /// The unclipped bound says nothing (it already covers `[0, 1]`).
    pub vacuous: bool,
}

/// Per-direction bounds on `w(z, z + e_i)`: `[(a_i - 1), a_i] / (gamma - 1)`
/// when `gamma > 1`, `[0, (a_i - 1) / (gamma - 1)]` when `gamma < 1`.
pub fn prop2_bounds(weights: &WeightVector) -> Result<Vec<TransitionBound>> {
    let total = weights.gamma();
    if total == 1.0 {
        return Err(Error::DegenerateNormalizer { total });
    }
    let norm = total - 1.0;
    Ok(weights
        .alphas()
        .iter()
        .map(|&a| {
            let (lo, hi) = if total > 1.0 { ((a - 1.0) / norm, a / norm) } else { (0.0, (a - 1.0) / norm) };
            TransitionBound {
                interval: Interval::new(lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0)),
                vacuous: lo <= 0.0 && hi >= 1.0,
            }
        })
        .collect())
}

/// Local drift `sum_k w(z, z + e_k) e_k` with per-axis standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftEstimate {
    pub drift: Vec<f64>,
    pub std_error: Vec<f64>,
}

pub fn kalikow_drift(kernel: &AuxiliaryKernel, site: &Site) -> Result<DriftEstimate> {
    let i = kernel
        .domain
        .interior_index(site)
        .ok_or_else(|| Error::InvalidGeometry(format!("{:?} was not estimated", site.coords())))?;
    let row = &kernel.drifts[i];
    Ok(DriftEstimate {
        drift: row.iter().map(|e| e.value).collect(),
        std_error: row.iter().map(|e| e.std_error).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftBox {
    pub intervals: Vec<Interval>,
    pub excludes_zero: bool,
}

/// The box `prod_i [a+ - a- - 1, a+ - a- + 1] / (gamma - 1)` containing
/// every Kalikow drift, and whether it avoids the origin.
pub fn theorem1_drift_box(weights: &WeightVector) -> Result<DriftBox> {
    let intervals = crate::walk::theorem1_bounds(weights)?;
    let excludes_zero = intervals.iter().any(Interval::excludes_zero);
    Ok(DriftBox { intervals, excludes_zero })
}

/// Second-order velocity expansion with its explicit error bound.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionReport {
    pub gamma: f64,
    pub d_m: Vec<f64>,
    pub k_m: f64,
    pub eta_m: f64,
    /// `G^m(0, 0)`.
    pub green_origin: f64,
    /// `d_m (1 - (G^m(0,0) - 1) / (gamma - 1))`.
    pub expansion: Vec<f64>,
    /// `16 (d / gamma)^2 eta_m^2 / (1 - 2 d eta_m / gamma)`.
    pub error_bound: f64,
    /// `2 d eta_m / gamma`.
    pub smallness: f64,
    /// The transience condition holds and `2 d eta_m / gamma <= 1`.
    pub precondition_ok: bool,
}

pub fn expansion_velocity(weights: &WeightVector) -> Result<ExpansionReport> {
    let kernel = homogeneous_stats(weights);
    let green_origin = green_fourier_origin(&kernel)?;
    let gamma = weights.gamma();
    let d = weights.dim() as f64;
    let factor = 1.0 - (green_origin - 1.0) / (gamma - 1.0);
    let expansion = kernel.drift.iter().map(|c| c * factor).collect();
    let smallness = 2.0 * d * kernel.eta_m / gamma;
    let precondition_ok = theorem1_condition(weights) && smallness <= 1.0;
    let error_bound = if precondition_ok {
        16.0 * (d / gamma) * (d / gamma) * kernel.eta_m * kernel.eta_m / (1.0 - smallness)
    } else {
        f64::INFINITY
    };
    Ok(ExpansionReport {
        gamma,
        d_m: kernel.drift.clone(),
        k_m: kernel.k_m,
        eta_m: kernel.eta_m,
        green_origin,
        expansion,
        error_bound,
        smallness,
        precondition_ok,
    })
}

/// `|center - exact velocity|` in one dimension, with `G^m(0,0) = 1 / |m+ - m-|`.
pub fn expansion_consistency_1d(weights: &WeightVector) -> Result<f64> {
    if weights.dim() != 1 {
        return Err(Error::WrongDimension { expected: 1, found: weights.dim() });
    }
    if !theorem1_condition(weights) {
        return Err(Error::WrongRegime(format!(
            "|alpha_+ - alpha_-| = {} <= 1: the velocity vanishes",
            (weights.alpha(0) - weights.alpha(1)).abs()
        )));
    }
    let gamma = weights.gamma();
    let drift = weights.mean(0) - weights.mean(1);
    let green_origin = 1.0 / drift.abs();
    let center = drift * (1.0 - (green_origin - 1.0) / (gamma - 1.0));
    Ok((center - exact_velocity_1d(weights)?).abs())
}
