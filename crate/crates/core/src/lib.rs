//! Bernoulli site percolation on truncations of infinite locally finite
//! graphs: the local functional φ, subcritical certificates for the critical
//! probability, packing certificates on iteratively punctured graphs, and the
//! supercritical disconnection bounds they feed.

pub mod error;
pub mod graph;

pub use error::{Error, Result};
pub use graph::{Ball, GraphSpec, GraphView, SetGenerator, VertexId, VertexSet};
pub mod engine;
pub mod exact;
pub mod packing;
pub mod pc;
pub mod phi;
pub mod rng;
pub mod stats;
pub mod bounds;

pub use engine::{Engine, EventKind, EventSpec, PercolationParams};
pub use stats::Estimate;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/phi.md")]
    mod phi {}
    #[doc = include_str!("../../../book/src/critical.md")]
    mod critical {}
    #[doc = include_str!("../../../book/src/packing.md")]
    mod packing {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
}
