//! Random walks in iid Dirichlet random environments on `Z^d`.
//!
//! The crate is `no_std` (it needs `alloc`). It covers
//!
//! * Dirichlet sampling, closed-form moments and the integration-by-parts
//!   identity on the simplex ([`dirichlet`], [`ibp`]),
//! * lazily generated, reproducible environments ([`environment`]),
//! * quenched and edge-reinforced walk samplers with exact annealed path
//!   probabilities and velocity bounds ([`walk`]),
//! * killed and homogeneous Green functions ([`green`]),
//! * Kalikow's auxiliary kernel and the low-disorder velocity expansion
//!   ([`kalikow`]).
//!
//! Direction indices follow one convention throughout: for a walk in
//! dimension `d`, index `i < d` is the unit vector `+e_{i+1}` and index
//! `d + i` is `-e_{i+1}`.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dirichlet;
pub mod environment;
mod error;
pub mod green;
pub mod ibp;
pub mod kalikow;
pub mod lattice;
pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod walk;

pub use error::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;
