//! Exact solution of the joint problem under a frozen channel trace.
//!
//! The bilinear products `nu * lambda` are replaced by binary product
//! variables with McCormick rows. Because both factors are binary the
//! envelope is already exact at integer points, so no breakpoint refinement
//! is needed. The resulting ILP is solved by branch and bound over a dense
//! dual simplex. A separate exhaustive search serves as ground truth on
//! tiny instances.

mod bnb;
mod brute;
mod ilp;
pub mod simplex;

pub use bnb::{branch_and_bound, lp_relax, BnbReport, BnbStatus, Budget};
pub use brute::{brute_force, BruteForceResult, ClusterOptimum, ClusterSearch, DEFAULT_LEAF_CAP};
pub use ilp::{
    linearize, variable_count, IlpInstance, McCormickReport, VarKind, DEFAULT_VARIABLE_BUDGET,
};
