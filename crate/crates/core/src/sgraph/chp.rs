use std::time::Duration;

use super::{GraphId, SparsityGraph};
use crate::partition::{core_owners, CoreViolation};

/// Core-halo partition: disjoint cores covering every vertex, each with the
/// halo `N(core, H) \ core` for a recorded graph `H`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChPartition {
    cores: Vec<Vec<usize>>,
    halos: Vec<Vec<usize>>,
    owner: Vec<usize>,
    halo_graph_id: GraphId,
}

/// Validates `cores` against `halo_graph` and derives the halos.
pub fn build_ch_partition(
    halo_graph: &SparsityGraph,
    cores: Vec<Vec<usize>>,
) -> Result<ChPartition, CoreViolation> {
    let owner = core_owners(halo_graph.n(), &cores)?;
    Ok(ChPartition::from_owner_unchecked(
        halo_graph,
        owner,
        cores.len(),
    ))
}

impl ChPartition {
    /// Builds a partition from a per-vertex part assignment that is already
    /// known to use every part id in `0..q`.
    pub(crate) fn from_owner_unchecked(
        halo_graph: &SparsityGraph,
        owner: Vec<usize>,
        q: usize,
    ) -> Self {
        let mut cores = vec![Vec::new(); q];
        for (v, &p) in owner.iter().enumerate() {
            cores[p].push(v);
        }
        let halos = compute_halos(halo_graph, &cores, &owner);
        ChPartition {
            cores,
            halos,
            owner,
            halo_graph_id: halo_graph.id(),
        }
    }

    /// Same cores, halos recomputed against another graph.
    pub fn with_halo_graph(&self, halo_graph: &SparsityGraph) -> ChPartition {
        assert_eq!(
            halo_graph.n(),
            self.n(),
            "halo graph has a different vertex count"
        );
        ChPartition::from_owner_unchecked(halo_graph, self.owner.clone(), self.q())
    }

    pub fn q(&self) -> usize {
        self.cores.len()
    }

    pub fn n(&self) -> usize {
        self.owner.len()
    }

    /// Core vertices of every part, each ascending.
    pub fn cores(&self) -> &[Vec<usize>] {
        &self.cores
    }

    /// Halo vertices of every part, each ascending.
    pub fn halos(&self) -> &[Vec<usize>] {
        &self.halos
    }

    pub fn core(&self, part: usize) -> &[usize] {
        &self.cores[part]
    }

    pub fn halo(&self, part: usize) -> &[usize] {
        &self.halos[part]
    }

    /// Part whose core contains `v`.
    pub fn owner(&self, v: usize) -> usize {
        self.owner[v]
    }

    pub fn owners(&self) -> &[usize] {
        &self.owner
    }

    pub fn halo_graph_id(&self) -> GraphId {
        self.halo_graph_id
    }

    /// `c_i + h_i`.
    pub fn part_size(&self, part: usize) -> usize {
        self.cores[part].len() + self.halos[part].len()
    }

    pub fn part_sizes(&self) -> Vec<usize> {
        (0..self.q()).map(|p| self.part_size(p)).collect()
    }

    /// Total number of halo vertices, counted with multiplicity over parts.
    pub fn halo_sum(&self) -> usize {
        self.halos.iter().map(Vec::len).sum()
    }
}

fn compute_halos(g: &SparsityGraph, cores: &[Vec<usize>], owner: &[usize]) -> Vec<Vec<usize>> {
    let mut stamp = vec![usize::MAX; g.n()];
    cores
        .iter()
        .enumerate()
        .map(|(p, core)| {
            let mut halo = Vec::new();
            for &v in core {
                for &w in g.neighbors(v) {
                    if owner[w] != p && stamp[w] != p {
                        stamp[w] = p;
                        halo.push(w);
                    }
                }
            }
            halo.sort_unstable();
            halo
        })
        .collect()
}

/// `sum_i (c_i + h_i)^3`, exact.
pub fn objective_sum_cubes(p: &ChPartition) -> u128 {
    sum_of_cubes(p.part_sizes())
}

pub(crate) fn sum_of_cubes(sizes: impl IntoIterator<Item = usize>) -> u128 {
    sizes.into_iter().map(|s| (s as u128).pow(3)).sum()
}

/// For every vertex, the number of distinct foreign parts owning one of its
/// neighbors, summed over all vertices.
pub fn total_communication_volume(g: &SparsityGraph, owner: &[usize]) -> usize {
    let mut parts: Vec<usize> = Vec::new();
    (0..g.n())
        .map(|v| {
            parts.clear();
            parts.extend(
                g.neighbors(v)
                    .iter()
                    .map(|&w| owner[w])
                    .filter(|&p| p != owner[v]),
            );
            parts.sort_unstable();
            parts.dedup();
            parts.len()
        })
        .sum()
}

/// Quality and cost measures of a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionMetrics {
    pub sum_cubes: u128,
    /// Smallest `c_i + h_i`.
    pub min_part: usize,
    /// Largest `c_i + h_i`.
    pub max_part: usize,
    /// Normalized number of operations, `sum_cubes / n^3`.
    pub nno: f64,
    /// Load imbalance, `(max_part - min_part) / n`.
    pub mmpn: f64,
    pub wall_time_s: f64,
}

pub fn partition_metrics(p: &ChPartition, elapsed: Duration) -> PartitionMetrics {
    let sizes = p.part_sizes();
    let sum_cubes = sum_of_cubes(sizes.iter().copied());
    let min_part = sizes.iter().copied().min().unwrap_or(0);
    let max_part = sizes.iter().copied().max().unwrap_or(0);
    let n = p.n() as f64;
    PartitionMetrics {
        sum_cubes,
        min_part,
        max_part,
        nno: sum_cubes as f64 / (n * n * n),
        mmpn: (max_part - min_part) as f64 / n,
        wall_time_s: elapsed.as_secs_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> SparsityGraph {
        SparsityGraph::from_edges(n, (1..n).map(|i| (i - 1, i))).unwrap()
    }

    #[test]
    fn path_split_in_two() {
        let g = path(6);
        let p = build_ch_partition(&g, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        assert_eq!(p.halo(0), &[3]);
        assert_eq!(p.halo(1), &[2]);
        assert_eq!(objective_sum_cubes(&p), 128);
        assert_eq!(p.halo_graph_id(), g.id());
    }

    #[test]
    fn single_core_has_empty_halo() {
        let g = path(10);
        let p = build_ch_partition(&g, vec![(0..10).collect()]).unwrap();
        assert!(p.halo(0).is_empty());
        assert_eq!(objective_sum_cubes(&p), 1000);
        let m = partition_metrics(&p, Duration::ZERO);
        assert_eq!(m.nno, 1.0);
        assert_eq!(m.mmpn, 0.0);
    }

    #[test]
    fn validation_errors_are_distinct() {
        let g = path(4);
        assert_eq!(
            build_ch_partition(&g, vec![vec![0, 1], vec![1, 2, 3]]).unwrap_err(),
            CoreViolation::Overlap {
                vertex: 1,
                first: 0,
                second: 1
            }
        );
        assert_eq!(
            build_ch_partition(&g, vec![vec![0, 1], vec![2]]).unwrap_err(),
            CoreViolation::Uncovered { vertex: 3 }
        );
        assert_eq!(
            build_ch_partition(&g, vec![vec![0, 1, 2, 3], vec![]]).unwrap_err(),
            CoreViolation::EmptyCore { part: 1 }
        );
    }

    #[test]
    fn sixteen_parts_of_1536() {
        assert_eq!(sum_of_cubes(std::iter::repeat_n(1536, 16)), 57_982_058_496);
    }
}
