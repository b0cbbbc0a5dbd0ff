//! Latent geometry inference for networks.
//!
//! Given a single observed graph, the crate estimates a clique-to-clique
//! distance matrix under the latent space model
//! `P(G_ij = 1) = exp(nu_i + nu_j - d(z_i, z_j))` and uses it to decide
//! whether the latent manifold is Euclidean, spherical or hyperbolic,
//! to estimate its curvature, and to estimate its minimal dimension.
//!
//! The modules follow the pipeline order:
//!
//! * [`graph`]: graph storage and edge-list I/O.
//! * [`linalg`] and [`geometry`]: symmetric eigensolver, `W_kappa`
//!   construction, signatures and embedding checks.
//! * [`netgen`]: simulation of latent positions and graphs.
//! * [`cliques`]: clique enumeration, selection and almost-cliques.
//! * [`distance`]: between-clique probabilities and distances.
//! * [`curvature`]: curvature bracket and minimizer.
//! * [`dimension`]: ladle rank estimator.
//! * [`testing`]: subsampling bootstrap tests and classification.
//! * [`pipeline`]: end-to-end runs, batches and Monte Carlo experiments.

pub mod cliques;
pub mod curvature;
pub mod dimension;
pub mod distance;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod linalg;
pub mod netgen;
pub mod pipeline;
pub mod seeds;
pub mod testing;

pub use error::{Error, Result};
pub use geometry::{GeometryKind, ManifoldSpec};
pub use graph::Graph;
pub use linalg::SymMatrix;
