//! Sparse, asymmetric k-medoids (uncapacitated facility location) with a
//! dynamically chosen number of medoids.
//!
//! Demand points and candidate facilities are distinct sets linked by a
//! sparse cost matrix; a missing entry means the pair can never be assigned.
//! Uncovered demands pay a penalty that dominates every distance, carried as
//! a separate component of [`LossPair`]. Solutions are built greedily by
//! [`init::dyn_build`] (or seeded randomly) and refined by [`swap::dyn_swap`],
//! which can also drop redundant medoids and add ones that repair coverage.
//!
//! ```
//! use sparse_medoids::{dyn_build, dyn_swap, Coverage, SparseCostMatrix, SwapConfig};
//!
//! let m = SparseCostMatrix::new(
//!     3,
//!     2,
//!     vec![(0, 0, 1.0), (1, 0, 2.0), (1, 1, 1.0), (2, 1, 1.0)],
//!     None,
//! )
//! .unwrap();
//! let init = dyn_build(&m, 1, Coverage::Strict).unwrap();
//! let config = SwapConfig { allow_decrease: true, ..SwapConfig::default() };
//! let result = dyn_swap(&m, &init.medoids, &config).unwrap();
//! assert!(result.loss.is_feasible());
//! ```

pub mod assignment;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod init;
pub mod loss;
pub mod matrix;
pub mod reference;
mod rng;
pub mod swap;

pub use assignment::Assignment;
pub use error::{Error, Result};
pub use experiment::{
    run_experiment, run_once, sweep_max_cost, ExperimentPlan, ExperimentResult, InitMethod, RunOptions, RunReport,
    SweepOptions, SweepRow,
};
pub use graph::{select_candidates, synth_grid, truncated_costs, InstanceGraph};
pub use init::{dyn_build, random_init, sparse_pp, Coverage, RandomSize};
pub use loss::{loss_compare, LossPair};
pub use matrix::SparseCostMatrix;
pub use reference::{brute_force, central_points, dense_fasterpam, dense_fasterpam_from};
pub use rng::candidate_order;
pub use swap::{dyn_swap, refresh_caches, removal_losses, DynMode, SwapConfig, SwapResult, SwapState};
