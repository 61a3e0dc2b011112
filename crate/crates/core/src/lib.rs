//! Determinantal random conductance model.
//!
//! Edges of a finite graph carry conductances in `{1, q}`; a configuration `κ`
//! has probability proportional to `p^h(κ) (1-p)^s(κ) / sqrt(det Δ_κ)`, where
//! `h` and `s` count hard and soft edges and `Δ_κ` is the weighted graph
//! Laplacian acting on zero-mean functions. The crate provides exact
//! enumeration, heat-bath sampling, exhaustive correlation-inequality audits,
//! planar duality, contour statistics, the Gaussian gradient layer and
//! Dobrushin interdependence estimates.

pub mod audit;
pub mod dobrushin;
pub mod duality;
pub mod error;
pub mod gaussian;
pub mod graph;
pub mod laplacian;
pub mod mcmc;
pub mod model;
pub mod spanning_tree;
pub mod stats;

pub use error::{Error, Result};
pub use graph::{EdgeId, FiniteGraph, VertexId};
pub use laplacian::{Conductances, LaplacianState};
pub use model::{Configuration, MeasureSpec};
