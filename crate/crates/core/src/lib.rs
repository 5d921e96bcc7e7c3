//! Simulation of continuous-variable multipartite entanglement swapping.
//!
//! `N` users each hold a copy of a two-mode Gaussian state `ρ_AB`. The `A`
//! modes are sent to a relay that mixes them in a cascade of beam splitters
//! and homodynes every output; the `B` modes collapse into a symmetric
//! Gaussian cluster state. The crate provides:
//!
//! - [`gaussian`]: covariance-matrix formalism (vacuum variance 1, interleaved
//!   `X₁,P₁,X₂,P₂,…` ordering), symplectic spectra and log-negativity.
//! - [`relay`]: the `N`-port relay, homodyne conditioning, the full swap
//!   pipeline and the closed-form cluster covariance matrix.
//! - [`sources`]: two-mode squeezed vacuum, the thermal-loss channel and a
//!   random normal-form sampler.
//! - [`analysis`]: closed-form pairwise, localizable and block log-negativity
//!   of the network cluster, each with a numerical counterpart.
//! - [`optomech`]: linearized optomechanical steady states and the
//!   mechanical cluster states they produce through the relay.

pub mod analysis;
pub mod error;
pub mod gaussian;
mod linalg;
pub mod optomech;
pub mod relay;
pub mod sources;

pub use error::{Error, Result};
pub use gaussian::{GaussianState, TwoModeNormalForm};
pub use relay::{BellOutcome, ClusterBlocks, Quadrature, RelayPlan};
