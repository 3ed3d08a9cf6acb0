//! Lattice sites, unit directions and finite domains with their boundary.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// A point of `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Site(Vec<i64>);

impl Site {
    pub fn new(coords: Vec<i64>) -> Self {
        Site(coords)
    }

    pub fn origin(dim: usize) -> Self {
        Site(vec![0; dim])
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// The neighbour `self + e_dir`.
    pub fn step(&self, dir: usize) -> Site {
        let mut next = self.clone();
        next.step_in_place(dir);
        next
    }

    pub fn step_in_place(&mut self, dir: usize) {
        let (axis, sign) = axis_sign(dir, self.dim());
        self.0[axis] += sign;
    }

    /// `Some(dir)` when `other = self + e_dir`.
    pub fn direction_to(&self, other: &Site) -> Option<usize> {
        if self.dim() != other.dim() {
            return None;
        }
        let d = self.dim();
        let mut found = None;
        for axis in 0..d {
            match other.0[axis] - self.0[axis] {
                0 => {}
                1 if found.is_none() => found = Some(axis),
                -1 if found.is_none() => found = Some(axis + d),
                _ => return None,
            }
        }
        found
    }

    /// L1 distance.
    pub fn distance(&self, other: &Site) -> i64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }
}

impl From<Vec<i64>> for Site {
    fn from(coords: Vec<i64>) -> Self {
        Site(coords)
    }
}

/// Axis and sign of direction index `dir` in dimension `dim`.
#[inline]
pub fn axis_sign(dir: usize, dim: usize) -> (usize, i64) {
    debug_assert!(dir < 2 * dim);
    if dir < dim {
        (dir, 1)
    } else {
        (dir - dim, -1)
    }
}

/// Index of `-e_dir`.
#[inline]
pub fn opposite(dir: usize, dim: usize) -> usize {
    if dir < dim {
        dir + dim
    } else {
        dir - dim
    }
}

/// Where a step from an interior site lands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Link {
    Interior(usize),
    Boundary(usize),
}

/// A finite connected set `U` together with its outer boundary
/// `{z not in U : |z - x| = 1 for some x in U}`.
///
/// Interior and boundary sites are kept in lexicographic order; that order
/// is the row/column order of every matrix built over the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDomain {
    dim: usize,
    interior: Vec<Site>,
    boundary: Vec<Site>,
    interior_index: BTreeMap<Site, usize>,
    boundary_index: BTreeMap<Site, usize>,
    links: Vec<Link>,
}

impl FiniteDomain {
    /// Domain from an explicit list of interior sites.
    pub fn from_sites(dim: usize, sites: Vec<Site>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGeometry("dimension must be positive".into()));
        }
        let mut set = BTreeSet::new();
        for s in sites {
            if s.dim() != dim {
                return Err(Error::InvalidGeometry(format!(
                    "site {:?} has dimension {}, expected {dim}",
                    s.coords(),
                    s.dim()
                )));
            }
            if !set.insert(s.clone()) {
                return Err(Error::InvalidGeometry(format!("duplicate site {:?}", s.coords())));
            }
        }
        let interior: Vec<Site> = set.into_iter().collect();
        if !is_connected(dim, &interior) {
            return Err(Error::InvalidGeometry("interior is not connected".into()));
        }
        Ok(Self::build(dim, interior))
    }

    fn build(dim: usize, interior: Vec<Site>) -> Self {
        let interior_index: BTreeMap<Site, usize> =
            interior.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let mut boundary_set = BTreeSet::new();
        for s in &interior {
            for dir in 0..2 * dim {
                let n = s.step(dir);
                if !interior_index.contains_key(&n) {
                    boundary_set.insert(n);
                }
            }
        }
        let boundary: Vec<Site> = boundary_set.into_iter().collect();
        let boundary_index: BTreeMap<Site, usize> =
            boundary.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let mut links = Vec::with_capacity(interior.len() * 2 * dim);
        for s in &interior {
            for dir in 0..2 * dim {
                let n = s.step(dir);
                links.push(match interior_index.get(&n) {
                    Some(&j) => Link::Interior(j),
                    None => Link::Boundary(boundary_index[&n]),
                });
            }
        }
        FiniteDomain { dim, interior, boundary, interior_index, boundary_index, links }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn interior(&self) -> &[Site] {
        &self.interior
    }

    pub fn boundary(&self) -> &[Site] {
        &self.boundary
    }

    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    pub fn interior_index(&self, site: &Site) -> Option<usize> {
        self.interior_index.get(site).copied()
    }

    pub fn boundary_index(&self, site: &Site) -> Option<usize> {
        self.boundary_index.get(site).copied()
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.interior_index.contains_key(site)
    }

    /// Target of the step `interior[i] + e_dir`.
    #[inline]
    pub fn link(&self, i: usize, dir: usize) -> Link {
        self.links[i * 2 * self.dim + dir]
    }
}

/// The L-infinity box of `radius` around `center`, with its exact boundary.
pub fn make_box(center: &Site, radius: u32) -> FiniteDomain {
    let dim = center.dim();
    let r = radius as i64;
    let side = 2 * r + 1;
    let count = (side as usize).pow(dim as u32);
    let mut interior = Vec::with_capacity(count);
    let mut offset = vec![-r; dim];
    for _ in 0..count {
        let coords = center.coords().iter().zip(&offset).map(|(c, o)| c + o).collect();
        interior.push(Site::new(coords));
        // odometer, last axis fastest: lexicographic order
        for axis in (0..dim).rev() {
            offset[axis] += 1;
            if offset[axis] <= r {
                break;
            }
            offset[axis] = -r;
        }
    }
    FiniteDomain::build(dim, interior)
}

fn is_connected(dim: usize, sites: &[Site]) -> bool {
    let Some(first) = sites.first() else {
        return true;
    };
    let members: BTreeSet<&Site> = sites.iter().collect();
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(first.clone());
    queue.push_back(first.clone());
    while let Some(s) = queue.pop_front() {
        for dir in 0..2 * dim {
            let n = s.step(dir);
            if members.contains(&n) && seen.insert(n.clone()) {
                queue.push_back(n);
            }
        }
    }
    seen.len() == sites.len()
}
