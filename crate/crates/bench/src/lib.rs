//! Fixtures shared by the benchmarks.

use corehalo::generate::{gen_system, GenParams, SystemKind};
use corehalo::partition::bfs_block_partition;
use corehalo::{
    build_ch_partition, sm_sp2, ChPartition, PolySchedule, Sp2Config, SparsityGraph,
    SymSparseMatrix,
};

/// A chain system with its SP2 starting matrix, schedule and a partition
/// whose halos come from the sparsity of the thresholded density matrix.
pub struct Gsp2Fixture {
    pub initial: SymSparseMatrix,
    pub schedule: PolySchedule,
    pub partition: ChPartition,
}

pub fn chain_fixture(n: usize, bandwidth: usize, q: usize) -> Gsp2Fixture {
    let sys = gen_system(
        SystemKind::Chain,
        n,
        &GenParams {
            bandwidth,
            ..GenParams::default()
        },
    )
    .unwrap();
    let out = sm_sp2(
        &sys.matrix,
        &Sp2Config::new(sys.occupied as f64).with_tau(1e-5),
    )
    .unwrap();
    let halo_graph = SparsityGraph::from_matrix(&out.density);
    let cores = bfs_block_partition(&SparsityGraph::from_matrix(&sys.matrix), q, 0).unwrap();
    let partition = build_ch_partition(&halo_graph, cores).unwrap();
    Gsp2Fixture {
        initial: out.initial,
        schedule: out.schedule,
        partition,
    }
}

pub fn geometric_graph(n: usize, radius: f64, seed: u64) -> SparsityGraph {
    let p = GenParams {
        radius,
        seed,
        ..GenParams::default()
    };
    SparsityGraph::from_matrix(
        &gen_system(SystemKind::RandomGeometric, n, &p)
            .unwrap()
            .matrix,
    )
}
