//! Decide what a networked dynamical system's interaction matrix can and
//! cannot be learned from measured trajectories — and reconstruct the
//! learnable part with certificates.
//!
//! Networked systems of the form `ẋ_i = Σ_j a_ij f_ij(x_i, x_j) + u_i`
//! hide their interaction matrix `A` behind two veils: the data may not
//! excite every direction of a node's regressor (a rank condition on a
//! Gram matrix), and the coupling functions `f_ij` may only be known up to
//! a declared deformation family (a group orbit). This crate measures both
//! veils and answers, per node and per property — the exact row, its sign
//! pattern, connectivity, adjacency, or degree — one of three things:
//!
//! * **unique**: every explanation of the data carries the same label, and
//!   the label is returned;
//! * **ambiguous**: two concrete witness rows explain the data equally well
//!   while disagreeing on the label;
//! * **inconsistent**: nothing in the declared prior explains the data.
//!
//! The pipeline is split along the way the mathematics splits:
//!
//! * [`model`] — simulate or ingest trajectories of pairwise-coupled
//!   systems (generalized Lotka-Volterra and linear presets, custom
//!   pairwise couplings, known input signals).
//! * [`gram`] — per-node Gram matrix and moment vector; persistent
//!   excitation is exactly "this matrix has full rank", and its kernel is
//!   the data's blind spot.
//! * [`group`] — the linear coupling-deformation group, its orbits, and
//!   the orbit invariant (off-diagonal support) that survives coupling
//!   uncertainty.
//! * [`geometry`] — solution fibers, sign-box priors, and a self-contained
//!   simplex solver deciding whether a fiber separates two candidate sets.
//! * [`reconstruct`] — the verdict machinery combining all of the above.
//! * [`perturb`] — deformation probes showing which conclusions are
//!   structurally stable and constructing indistinguishable network pairs.
//! * [`cli`] — batch commands (`simulate`, `analyze`, `reconstruct`,
//!   `probe`, `demo`) with machine-readable reports.

pub mod cli;
pub mod error;
pub mod model;
pub mod perturb;
pub mod gram;
pub mod group;
pub mod geometry;
pub mod reconstruct;

pub use error::{Error, Result};
