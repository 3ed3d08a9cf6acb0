//! iid Dirichlet environments generated lazily from a seed.
//!
//! `omega(x)` is drawn from the environment stream of site `x`, so an
//! environment is a pure function of `(seed, alpha)` and can be queried
//! anywhere, in any order, from any thread.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::dirichlet::{sample_dirichlet_into, SimplexPoint, WeightVector};
use crate::lattice::{FiniteDomain, Site};
use crate::rng::CounterRng;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentView {
    seed: u64,
    weights: WeightVector,
}

impl EnvironmentView {
    pub fn new(seed: u64, weights: WeightVector) -> Self {
        EnvironmentView { seed, weights }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.dim()
    }

    /// Writes `omega(site, site + e_i)` for every direction into `out`.
    pub fn fill(&self, site: &Site, out: &mut [f64]) {
        assert_eq!(site.dim(), self.dim(), "site dimension does not match the environment");
        let mut rng = CounterRng::for_site(self.seed, site);
        sample_dirichlet_into(&self.weights, &mut rng, out);
    }
}

/// The exit distribution at `site`.
pub fn env_at(view: &EnvironmentView, site: &Site) -> SimplexPoint {
    let mut out = alloc::vec![0.0; view.weights().directions()];
    view.fill(site, &mut out);
    SimplexPoint::new(out).expect("Dirichlet draws lie on the simplex")
}

/// Environment values over the interior of a finite domain.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnvTable {
    entries: BTreeMap<Site, SimplexPoint>,
}

impl EnvTable {
    pub fn get(&self, site: &Site) -> Option<&SimplexPoint> {
        self.entries.get(site)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Site, &SimplexPoint)> {
        self.entries.iter()
    }

    pub fn insert(&mut self, site: Site, point: SimplexPoint) {
        self.entries.insert(site, point);
    }
}

pub fn materialize(view: &EnvironmentView, domain: &FiniteDomain) -> EnvTable {
    let entries = domain.interior().iter().map(|s| (s.clone(), env_at(view, s))).collect();
    EnvTable { entries }
}

/// Row-per-interior-site transition weights `Omega_U(x, x + e_i)`, in the
/// domain's site order.
///
/// Rows are not required to be stochastic, so single entries can be moved
/// independently when differentiating Green functions.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionRows {
    directions: usize,
    data: Vec<f64>,
}

impl TransitionRows {
    pub fn from_table(table: &EnvTable, domain: &FiniteDomain) -> Result<Self> {
        let directions = 2 * domain.dim();
        let mut data = Vec::with_capacity(domain.len() * directions);
        for s in domain.interior() {
            let p = table
                .get(s)
                .ok_or_else(|| Error::InvalidGeometry(format!("no environment at {:?}", s.coords())))?;
            if p.len() != directions {
                return Err(Error::InvalidGeometry(format!(
                    "environment at {:?} has {} entries, expected {directions}",
                    s.coords(),
                    p.len()
                )));
            }
            data.extend_from_slice(p.probs());
        }
        Ok(TransitionRows { directions, data })
    }

    /// Draws the environment directly, without an intermediate table.
    pub fn from_view(view: &EnvironmentView, domain: &FiniteDomain) -> Self {
        let directions = 2 * domain.dim();
        let mut data = alloc::vec![0.0; domain.len() * directions];
        for (s, row) in domain.interior().iter().zip(data.chunks_mut(directions)) {
            view.fill(s, row);
        }
        TransitionRows { directions, data }
    }

    /// The same transition vector at every site.
    pub fn homogeneous(domain: &FiniteDomain, probs: &[f64]) -> Self {
        let directions = 2 * domain.dim();
        assert_eq!(probs.len(), directions);
        let mut data = Vec::with_capacity(domain.len() * directions);
        for _ in 0..domain.len() {
            data.extend_from_slice(probs);
        }
        TransitionRows { directions, data }
    }

    pub fn directions(&self) -> usize {
        self.directions
    }

    pub fn sites(&self) -> usize {
        if self.directions == 0 {
            0
        } else {
            self.data.len() / self.directions
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.directions..(i + 1) * self.directions]
    }

    #[inline]
    pub fn get(&self, i: usize, dir: usize) -> f64 {
        self.data[i * self.directions + dir]
    }

    #[inline]
    pub fn set(&mut self, i: usize, dir: usize, value: f64) {
        self.data[i * self.directions + dir] = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_box;

    fn view(seed: u64) -> EnvironmentView {
        EnvironmentView::new(seed, WeightVector::new(2, alloc::vec![2.0, 3.0, 1.0, 2.0]).unwrap())
    }

    #[test]
    fn env_at_is_deterministic() {
        let s = Site::new(alloc::vec![5, -7]);
        let a = env_at(&view(11), &s);
        let b = env_at(&view(11), &s);
        assert_eq!(a, b);
        assert_ne!(a, env_at(&view(12), &s));
        assert_ne!(a, env_at(&view(11), &Site::new(alloc::vec![-7, 5])));
    }

    #[test]
    fn materialize_matches_env_at() {
        let v = view(3);
        let empty = FiniteDomain::from_sites(2, alloc::vec![]).unwrap();
        assert!(materialize(&v, &empty).is_empty());
        let single = make_box(&Site::origin(2), 0);
        let t = materialize(&v, &single);
        assert_eq!(t.len(), 1);
        assert_eq!(t.get(&Site::origin(2)), Some(&env_at(&v, &Site::origin(2))));
        let dom = make_box(&Site::origin(2), 2);
        let t = materialize(&v, &dom);
        assert_eq!(t.len(), 25);
        for s in dom.interior() {
            assert_eq!(t.get(s).unwrap().probs(), env_at(&v, s).probs());
        }
        let rows = TransitionRows::from_table(&t, &dom).unwrap();
        assert_eq!(rows, TransitionRows::from_view(&v, &dom));
    }
}
