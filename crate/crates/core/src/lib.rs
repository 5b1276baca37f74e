//! Exact hypergraph matching.
//!
//! A branch-and-bound solver for one-to-one matching of a labeled reference
//! hypergraph onto an unlabeled point set under an additive objective with
//! hyperedges of arbitrary degree, plus geometric posture features and
//! Mahalanobis template costs for seam cell identification.

pub mod error;
pub mod fitting;
pub mod objective;
pub mod oracle;
pub mod posture;
pub mod random;
pub mod solver;
pub mod synthetic;
pub mod tensor;
pub mod types;

pub use error::{Error, Result};
pub use objective::{
    approx_eq_rel, decomposition_check, h1_cost, hm_cost, im_cost, objective_eval, Stratification,
    COST_RTOL,
};
pub use oracle::{exhaustive_solve, top_k_exhaustive};
pub use solver::{solve, SearchConfig, SolverResult, SolverStats};
pub use tensor::{DissimilarityTensor, HyperedgeCost, HypergraphModel, LazyCache};
pub use types::{FullAssignment, PartialAssignment, PointSet, SeedSet, Vec3, VertexSet};
