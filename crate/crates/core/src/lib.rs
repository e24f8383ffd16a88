//! Effective neighborhoods and convergence analysis for decentralized SGD.
//!
//! The crate is organised bottom-up:
//!
//! - [`topology`]: communication graphs, gossip matrices and time-varying schedules.
//! - [`spectral`]: eigenstructure of gossip matrices, spectral dimension fits,
//!   the neighborhood matrix `M(γ)` and the relative constant `β(γ)`.
//! - [`effnn`]: the effective number of neighbors `n_W(γ)`, its bounds, a
//!   Monte-Carlo estimator for arbitrary schedules and decay fitting.
//! - [`quadrates`]: exact rates on the isotropic random-quadratic toy model.
//! - [`dsgdsim`]: D-SGD on heterogeneous quadratics, fixed points and descent checks.
//! - [`lrplan`]: learning-rate planning from the descent conditions.
//!
//! All numerical code is generic over a [`Real`] scalar; `f64` aliases are
//! exported at the crate root for the common case.

// `!(x > 0)` guards are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsgdsim;
pub mod effnn;
mod error;
pub mod io;
pub mod lrplan;
pub mod quadrates;
mod rng;
mod scalar;
pub mod spectral;
pub mod topology;

pub use error::{Error, Result};
pub use rng::substream;
pub use scalar::Real;

pub use topology::{
    GossipMatrix as GenericGossipMatrix, GossipSchedule as GenericGossipSchedule, Topology,
    TopologyKind, WeightScheme,
};

/// Gossip matrix over `f64`.
pub type GossipMatrix = topology::GossipMatrix<f64>;
/// Gossip schedule over `f64`.
pub type GossipSchedule = topology::GossipSchedule<f64>;
/// Spectrum over `f64`.
pub type SpectrumInfo = spectral::SpectrumInfo<f64>;
/// Neighborhood matrix over `f64`.
pub type NeighborhoodMatrix = spectral::NeighborhoodMatrix<f64>;
/// Spectral-dimension profile over `f64`.
pub type SpectralProfile = spectral::SpectralProfile<f64>;
/// Effective-neighbors estimate over `f64`.
pub type EffnnEstimate = effnn::EffnnEstimate<f64>;
/// Toy-model rate over `f64`.
pub type RateSolution = quadrates::RateSolution<f64>;
/// Heterogeneous quadratic problem over `f64`.
pub type HetQuadProblem = dsgdsim::HetQuadProblem<f64>;
/// Learning-rate plan over `f64`.
pub type LrPlan = lrplan::LrPlan<f64>;
