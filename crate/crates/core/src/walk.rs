//! Walk samplers, exact annealed path probabilities and velocity bounds.
//!
//! The annealed law of the walk in an iid Dirichlet environment is the law
//! of a directed-edge reinforced walk: from `x`, the step `e_i` is taken
//! with probability `(alpha_i + N_i(x)) / (gamma + N(x))` where `N_i(x)`
//! counts earlier departures from `x` along `e_i`. Annealed sampling below
//! uses that representation, so no environment is ever materialized.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use libm::{log, sqrt};
use rand_core::RngCore;

use crate::dirichlet::{log_moment_counts, WeightVector};
use crate::environment::EnvironmentView;
use crate::lattice::{axis_sign, Site};
use crate::rng::{open01, CounterRng, StreamTag};
use crate::{Error, Result};

/// A closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// `x` lies in `[lo - slack, hi + slack]`.
    pub fn contains_within(&self, x: f64, slack: f64) -> bool {
        self.lo - slack <= x && x <= self.hi + slack
    }

    pub fn excludes_zero(&self) -> bool {
        self.lo > 0.0 || self.hi < 0.0
    }
}

/// A nearest-neighbour trajectory started at the origin, stored as its
/// sequence of direction indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path {
    dim: usize,
    directions: Vec<u8>,
}

impl Path {
    pub fn empty(dim: usize) -> Self {
        Path { dim, directions: Vec::new() }
    }

    pub fn from_directions(dim: usize, directions: Vec<u8>) -> Result<Self> {
        if dim == 0 || 2 * dim > u8::MAX as usize {
            return Err(Error::InvalidGeometry(format!("unsupported dimension {dim}")));
        }
        if let Some(d) = directions.iter().find(|&&d| d as usize >= 2 * dim) {
            return Err(Error::InvalidGeometry(format!("direction {d} out of range for d = {dim}")));
        }
        Ok(Path { dim, directions })
    }

    /// Path through the given sites; the first must be the origin and
    /// consecutive sites must be lattice neighbours.
    pub fn from_sites(sites: &[Site]) -> Result<Self> {
        let first = sites.first().ok_or_else(|| Error::InvalidGeometry("a path needs a start".into()))?;
        let dim = first.dim();
        if first != &Site::origin(dim) {
            return Err(Error::InvalidGeometry("paths start at the origin".into()));
        }
        let mut directions = Vec::with_capacity(sites.len() - 1);
        for w in sites.windows(2) {
            let dir = w[0].direction_to(&w[1]).ok_or_else(|| {
                Error::InvalidGeometry(format!("{:?} -> {:?} is not a unit step", w[0].coords(), w[1].coords()))
            })?;
            directions.push(dir as u8);
        }
        Self::from_directions(dim, directions)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of steps.
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[u8] {
        &self.directions
    }

    pub fn sites(&self) -> Vec<Site> {
        let mut cur = Site::origin(self.dim);
        let mut out = Vec::with_capacity(self.len() + 1);
        out.push(cur.clone());
        for &d in &self.directions {
            cur.step_in_place(d as usize);
            out.push(cur.clone());
        }
        out
    }

    pub fn end(&self) -> Site {
        let mut cur = Site::origin(self.dim);
        for &d in &self.directions {
            cur.step_in_place(d as usize);
        }
        cur
    }
}

/// Directed-edge traversal counts `N_i(n, x)`; only visited sites are stored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CrossingCounts {
    counts: BTreeMap<Site, Vec<u32>>,
}

impl CrossingCounts {
    pub fn count(&self, site: &Site, dir: usize) -> u32 {
        self.counts.get(site).map_or(0, |c| c[dir])
    }

    /// Departures from `site`.
    pub fn departures(&self, site: &Site) -> u32 {
        self.counts.get(site).map_or(0, |c| c.iter().sum())
    }

    pub fn total(&self) -> u64 {
        self.counts.values().flatten().map(|&c| c as u64).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Site, &[u32])> {
        self.counts.iter().map(|(s, c)| (s, c.as_slice()))
    }
}

pub fn crossing_counts(path: &Path) -> CrossingCounts {
    let mut counts: BTreeMap<Site, Vec<u32>> = BTreeMap::new();
    let mut cur = Site::origin(path.dim());
    for &d in path.directions() {
        counts.entry(cur.clone()).or_insert_with(|| vec![0; 2 * path.dim()])[d as usize] += 1;
        cur.step_in_place(d as usize);
    }
    CrossingCounts { counts }
}

/// Exact `ln P^mu(path)`: the product over visited sites of Dirichlet
/// moments `E[prod_i omega(x, x + e_i)^{N_i(x)}]`.
pub fn annealed_path_logprob(weights: &WeightVector, path: &Path) -> f64 {
    check_dim(weights, path.dim());
    crossing_counts(path).iter().map(|(_, c)| log_moment_counts(weights.alphas(), c)).sum()
}

/// `ln P^mu(path)` as the product of the reinforced walk's transition
/// probabilities along the path.
pub fn reinforced_path_logprob(weights: &WeightVector, path: &Path) -> f64 {
    check_dim(weights, path.dim());
    let gamma = weights.gamma();
    let mut counts: BTreeMap<Site, Vec<u32>> = BTreeMap::new();
    let mut cur = Site::origin(path.dim());
    let mut acc = 0.0;
    for &d in path.directions() {
        let c = counts.entry(cur.clone()).or_insert_with(|| vec![0; 2 * path.dim()]);
        let seen: u32 = c.iter().sum();
        let d = d as usize;
        acc += log((weights.alpha(d) + c[d] as f64) / (gamma + seen as f64));
        c[d] += 1;
        cur.step_in_place(d);
    }
    acc
}

fn check_dim(weights: &WeightVector, dim: usize) {
    assert_eq!(weights.dim(), dim, "path and weights disagree on the dimension");
}

/// Stepper for the directed-edge reinforced walk.
struct ReinforcedWalker<'a> {
    weights: &'a WeightVector,
    gamma: f64,
    position: Vec<i64>,
    counts: HashMap<Box<[i64]>, Box<[u32]>>,
    scratch: Vec<f64>,
}

impl<'a> ReinforcedWalker<'a> {
    fn new(weights: &'a WeightVector) -> Self {
        ReinforcedWalker {
            weights,
            gamma: weights.gamma(),
            position: vec![0; weights.dim()],
            counts: HashMap::new(),
            scratch: vec![0.0; weights.directions()],
        }
    }

    fn step<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> usize {
        let alphas = self.weights.alphas();
        let k = alphas.len();
        let total = match self.counts.get(self.position.as_slice()) {
            Some(c) => {
                let mut total = self.gamma;
                for i in 0..k {
                    self.scratch[i] = alphas[i] + c[i] as f64;
                    total += c[i] as f64;
                }
                total
            }
            None => {
                self.scratch.copy_from_slice(alphas);
                self.gamma
            }
        };
        let dir = pick(&self.scratch, total, open01(rng));
        match self.counts.get_mut(self.position.as_slice()) {
            Some(c) => c[dir] += 1,
            None => {
                let mut c = vec![0u32; k].into_boxed_slice();
                c[dir] = 1;
                self.counts.insert(self.position.clone().into_boxed_slice(), c);
            }
        }
        let (axis, sign) = axis_sign(dir, self.weights.dim());
        self.position[axis] += sign;
        dir
    }
}

/// Index chosen with probability `weights[i] / total` by inversion of `u`.
#[inline]
fn pick(weights: &[f64], total: f64, u: f64) -> usize {
    let mut target = u * total;
    let last = weights.len() - 1;
    for (i, &w) in weights[..last].iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    last
}

/// A path of `steps` steps from the annealed law (reinforced representation).
pub fn run_reinforced<R: RngCore + ?Sized>(weights: &WeightVector, steps: usize, rng: &mut R) -> Path {
    let mut walker = ReinforcedWalker::new(weights);
    let directions = (0..steps).map(|_| walker.step(rng) as u8).collect();
    Path { dim: weights.dim(), directions }
}

/// End point `X_steps` of one reinforced walk; nothing but the visited-edge
/// counts is kept in memory.
pub fn reinforced_displacement<R: RngCore + ?Sized>(weights: &WeightVector, steps: usize, rng: &mut R) -> Vec<i64> {
    let mut walker = ReinforcedWalker::new(weights);
    for _ in 0..steps {
        walker.step(rng);
    }
    walker.position
}

/// A path of `steps` steps of the Markov chain in the fixed environment `view`.
pub fn run_quenched<R: RngCore + ?Sized>(view: &EnvironmentView, steps: usize, rng: &mut R) -> Path {
    let dim = view.dim();
    let mut cur = Site::origin(dim);
    let mut omega = vec![0.0; 2 * dim];
    let mut directions = Vec::with_capacity(steps);
    for _ in 0..steps {
        view.fill(&cur, &mut omega);
        let dir = pick(&omega, omega.iter().sum(), open01(rng));
        directions.push(dir as u8);
        cur.step_in_place(dir);
    }
    Path { dim, directions }
}

/// All `(2d)^n` nearest-neighbour paths of length `n`, in lexicographic
/// order of their direction sequences.
pub fn enumerate_paths(dim: usize, n: usize) -> Vec<Path> {
    let k = 2 * dim;
    let count = k.pow(n as u32);
    let mut out = Vec::with_capacity(count);
    let mut digits = vec![0u8; n];
    for _ in 0..count {
        out.push(Path { dim, directions: digits.clone() });
        for pos in (0..n).rev() {
            digits[pos] += 1;
            if (digits[pos] as usize) < k {
                break;
            }
            digits[pos] = 0;
        }
    }
    out
}

/// Empirical `X_n / n` over independent runs.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityEstimate {
    pub mean_velocity: Vec<f64>,
    pub std_error: Vec<f64>,
    pub runs: usize,
    pub steps: usize,
}

impl VelocityEstimate {
    /// Aggregates end points in the order given.
    pub fn from_displacements(steps: usize, displacements: &[Vec<i64>]) -> Self {
        assert!(steps >= 1 && !displacements.is_empty());
        let dim = displacements[0].len();
        let runs = displacements.len();
        let n = steps as f64;
        let mut mean = vec![0.0; dim];
        for x in displacements {
            for (m, &c) in mean.iter_mut().zip(x) {
                *m += c as f64 / n;
            }
        }
        for m in &mut mean {
            *m /= runs as f64;
        }
        let mut std_error = vec![0.0; dim];
        if runs > 1 {
            for x in displacements {
                for (s, (&c, m)) in std_error.iter_mut().zip(x.iter().zip(&mean)) {
                    let dv = c as f64 / n - m;
                    *s += dv * dv;
                }
            }
            for s in &mut std_error {
                *s = sqrt(*s / (runs as f64 - 1.0) / runs as f64);
            }
        }
        VelocityEstimate { mean_velocity: mean, std_error, runs, steps }
    }
}

/// `X_steps` of reinforced run number `run` under master seed `seed`.
pub fn run_displacement(weights: &WeightVector, steps: usize, seed: u64, run: u64) -> Vec<i64> {
    let mut rng = CounterRng::indexed(seed, StreamTag::Walk, run);
    reinforced_displacement(weights, steps, &mut rng)
}

/// Single-threaded velocity estimate; run `r` always uses the same stream,
/// so parallel drivers that aggregate in run order reproduce it exactly.
pub fn estimate_velocity(weights: &WeightVector, steps: usize, runs: usize, seed: u64) -> Result<VelocityEstimate> {
    if steps == 0 || runs == 0 {
        return Err(Error::InvalidParameter("steps and runs must be positive".into()));
    }
    let ends: Vec<Vec<i64>> = (0..runs as u64).map(|r| run_displacement(weights, steps, seed, r)).collect();
    Ok(VelocityEstimate::from_displacements(steps, &ends))
}

/// `alpha_{e_i} > 1 + alpha_{-e_i}` for some direction `i` (either sign).
pub fn theorem1_condition(weights: &WeightVector) -> bool {
    (0..weights.dim()).any(|axis| {
        let (p, n) = (weights.alpha_pos(axis), weights.alpha_neg(axis));
        p > 1.0 + n || n > 1.0 + p
    })
}

/// Per-axis interval `[(a+ - a- - 1), (a+ - a- + 1)] / (gamma - 1)` for `v . e_i`.
pub fn theorem1_bounds(weights: &WeightVector) -> Result<Vec<Interval>> {
    let total = weights.gamma();
    if total <= 1.0 {
        return Err(Error::DegenerateNormalizer { total });
    }
    let norm = total - 1.0;
    Ok((0..weights.dim())
        .map(|axis| {
            let diff = weights.alpha_pos(axis) - weights.alpha_neg(axis);
            Interval::new((diff - 1.0) / norm, (diff + 1.0) / norm)
        })
        .collect())
}

/// Exact asymptotic velocity of the one-dimensional walk; zero unless
/// `|alpha_+ - alpha_-| > 1`.
pub fn exact_velocity_1d(weights: &WeightVector) -> Result<f64> {
    if weights.dim() != 1 {
        return Err(Error::WrongDimension { expected: 1, found: weights.dim() });
    }
    let (p, n) = (weights.alpha(0), weights.alpha(1));
    let norm = p + n - 1.0;
    Ok(if p > 1.0 + n {
        (p - n - 1.0) / norm
    } else if n > 1.0 + p {
        (p - n + 1.0) / norm
    } else {
        0.0
    })
}
