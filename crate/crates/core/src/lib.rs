//! Structure estimation for Markov random fields over mixed-domain variables.
//!
//! The crate covers the whole pipeline:
//!
//! - [`graph`]: undirected graphs, random generation, chordality, cliques,
//!   centrality and recovery metrics.
//! - [`model`]: pairwise mixed exponential-family MRFs and their
//!   node-conditional distributions.
//! - [`sampler`]: Gibbs sampling and the categorical/count data repair rules.
//! - [`gencov`]: generalized (clique-augmented) covariance matrices with an
//!   exact enumeration oracle.
//! - [`glm`]: an l1-penalized GLM solver (gaussian, binomial, multinomial,
//!   poisson, exponential) with CV and EBIC selection.
//! - [`estimator`]: the nodewise regression estimator with tau-thresholding
//!   and AND/OR combination.
//! - [`bench`]: the simulation grid used to measure sensitivity/precision.

pub mod bench;
pub mod error;
pub mod estimator;
pub mod gencov;
pub mod glm;
pub mod graph;
pub mod io;
pub mod model;
pub mod par;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use graph::Graph;
pub use model::{Family, MixedModel, NodeSpec};
pub use sampler::Dataset;
