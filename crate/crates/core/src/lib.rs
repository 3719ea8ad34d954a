//! Co-occurrence networks of task parameters built from timestamped text
//! logs, with node, edge, community and whole-network change measures.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the usual double-precision choice.

// Negated comparisons double as NaN rejection.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod change;
pub mod community;
pub mod corpus;
pub mod error;
pub mod linalg;
pub mod lsi;
pub mod metrics;
pub mod netbuild;
pub mod relevance;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use change::{ChangeSeries, Distribution};
pub use community::{Dendrogram, Partition};
pub use corpus::{CleanEntry, RawEntry};
pub use lsi::{SvdFactors, TopicVector};
pub use netbuild::Network;

pub type Network64 = Network<f64>;
pub type Network32 = Network<f32>;
pub type SvdFactors64 = SvdFactors<f64>;
pub type TopicVector64 = TopicVector<f64>;
pub type Distribution64 = Distribution<f64>;
pub type Dendrogram64 = Dendrogram<f64>;
pub type ChangeSeries64 = ChangeSeries<f64>;
