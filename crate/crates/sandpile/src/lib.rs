//! Abelian sandpiles on Vicsek graphs.
//!
//! * [`graph`]: the graphs `𝒱_n`, diagonal structure, branches, distances.
//! * [`engine`]: configurations, toppling, stabilization, nested-volume flow.
//! * [`recurrence`]: burning test and bijection, Wilson sampler, IVL sampler.
//! * [`chain`]: the chain `(X_i)` in exact rationals, radius law, Monte Carlo.
//! * [`group`]: reduced Laplacian, Smith normal form, element orders.
//! * [`identity`]: the merge `μ_k` and the recursive identity.
//! * [`io`]: JSON/CSV formats and PGM/SVG rendering.

pub mod chain;
pub mod engine;
pub mod error;
pub mod graph;
pub mod group;
pub mod identity;
pub mod io;
pub mod parallel;
pub mod recurrence;
pub mod registry;

pub use engine::{stabilize, AvalancheReport, SandpileConfig};
pub use error::{Error, Result};
pub use graph::{Coord, DiagonalClass, DiagonalGraph, Lattice, Topology, VicsekGraph};
