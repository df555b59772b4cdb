//! Posterior probabilities and the variance of those probabilities in
//! singly connected belief networks whose conditional probability tables
//! are Dirichlet distributed.
//!
//! Three routes to the posterior second moment `E[P(x | W)^2]` are provided:
//!
//! - [`apm`]: closed-form propagation of second moments along the polytree,
//!   fast but approximate;
//! - [`mcim`]: Monte Carlo integration over sampled parameter sets, weighted
//!   by the likelihood of the evidence;
//! - [`oracle`]: deterministic tensor-product quadrature of the same integral
//!   for small binary networks, used as ground truth.
//!
//! [`meanprop`] carries the first-moment messages (and the normalizer the
//! APM needs) and [`enumeration`] is the brute-force reference for both.

pub mod apm;
pub mod dirichlet;
mod engine;
pub mod enumeration;
pub mod error;
pub mod experiments;
pub mod mcim;
pub mod meanprop;
pub mod model;
pub mod oracle;
pub mod random;

pub use error::{Error, Result};
pub use model::{parse_network, point_view, validate_network, Evidence, Network, Node};
