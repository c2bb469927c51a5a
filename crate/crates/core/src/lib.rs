//! Core-halo graph partitioning and partitioned evaluation of thresholded
//! matrix polynomials.
//!
//! The usual pipeline: build the [`SparsityGraph`] of a matrix, widen it with
//! [`SparsityGraph::structural_polynomial_graph`], pick cores with
//! [`partition::bfs_block_partition`] (or import them), refine them with
//! [`anneal::sa_refine`], record a [`PolySchedule`] with [`sp2::sm_sp2`] and
//! replay it part by part with [`gsp2::gsp2_run`].

pub mod anneal;
pub mod generate;
pub mod gsp2;
pub mod partition;
pub mod sgraph;
pub mod sp2;
pub mod spmat;

pub use anneal::{sa_delta, sa_refine, Move, SaConfig, SaOutcome, Temperature};
pub use gsp2::{gsp2_run, Gsp2Error, Gsp2Options, PartWorkItem, RunMetrics};
pub use partition::{CoreViolation, PartitionError};
pub use sgraph::{
    build_ch_partition, objective_sum_cubes, partition_metrics, total_communication_volume,
    ChPartition, PartitionMetrics, SparsityGraph,
};
pub use sp2::{sm_sp2, thresholded_poly_apply, PolyKind, PolySchedule, Sp2Config, Sp2Error};
pub use spmat::{DenseMatrix, MatrixError, SymSparseMatrix};
