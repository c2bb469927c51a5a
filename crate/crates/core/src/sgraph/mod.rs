//! Sparsity graphs of symmetric matrices.
//!
//! Every vertex carries an implicit self-loop (the stored diagonal), so the
//! neighborhood of a vertex set always contains the set itself. Self-loops are
//! never materialized in the adjacency lists.

mod chp;
mod metis;

pub use chp::{
    build_ch_partition, objective_sum_cubes, partition_metrics, total_communication_volume,
    ChPartition, PartitionMetrics,
};
pub use metis::{
    load_metis_graph, read_metis_graph, save_metis_graph, write_metis_graph, MetisGraphError,
};

use std::collections::VecDeque;
use std::hash::{DefaultHasher, Hash, Hasher};

use rayon::prelude::*;
use thiserror::Error;

use crate::spmat::SymSparseMatrix;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("vertex {vertex} out of range for a graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
}

/// Identifies the exact graph a set of halos was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GraphId(pub u64);

/// Undirected graph in CSR form with sorted, duplicate-free neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityGraph {
    xadj: Vec<usize>,
    adjncy: Vec<usize>,
}

impl SparsityGraph {
    /// The sparsity graph of `m`: an edge for every stored off-diagonal
    /// entry with a nonzero value.
    pub fn from_matrix(m: &SymSparseMatrix) -> Self {
        let n = m.n();
        let mut xadj = Vec::with_capacity(n + 1);
        xadj.push(0);
        let mut adjncy = Vec::new();
        for i in 0..n {
            adjncy.extend(
                m.row_iter(i)
                    .filter(|&(j, v)| j != i && v != 0.0)
                    .map(|(j, _)| j),
            );
            xadj.push(adjncy.len());
        }
        Self { xadj, adjncy }
    }

    /// Builds a graph from undirected edges. Self-loops and repeated edges are
    /// ignored.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(GraphError::VertexOutOfRange { vertex: x, n });
                }
            }
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        Ok(Self::from_lists(adj))
    }

    /// Adjacency lists that are already symmetric; lists are sorted and
    /// deduplicated here.
    pub(crate) fn from_lists(mut adj: Vec<Vec<usize>>) -> Self {
        let mut xadj = Vec::with_capacity(adj.len() + 1);
        xadj.push(0);
        let mut adjncy = Vec::new();
        for (i, list) in adj.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            adjncy.extend(list.iter().copied().filter(|&j| j != i));
            xadj.push(adjncy.len());
        }
        Self { xadj, adjncy }
    }

    pub fn n(&self) -> usize {
        self.xadj.len() - 1
    }

    /// Number of undirected edges, self-loops excluded.
    pub fn edge_count(&self) -> usize {
        self.adjncy.len() / 2
    }

    /// Open neighborhood of `v` (self excluded), ascending.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjncy[self.xadj[v]..self.xadj[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.xadj[v + 1] - self.xadj[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u == v || self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| v > u)
                .map(move |&v| (u, v))
        })
    }

    pub fn id(&self) -> GraphId {
        let mut h = DefaultHasher::new();
        self.xadj.hash(&mut h);
        self.adjncy.hash(&mut h);
        GraphId(h.finish())
    }

    /// True when every edge of `self` is also an edge of `other`.
    pub fn is_subgraph_of(&self, other: &SparsityGraph) -> bool {
        self.n() == other.n() && self.edges().all(|(u, v)| other.has_edge(u, v))
    }

    /// Closed neighborhood of a vertex set: the union of `N(v)` over `v` in
    /// `set`, where each `N(v)` contains `v` itself. Sorted ascending.
    pub fn neighborhood(&self, set: &[usize]) -> Result<Vec<usize>, GraphError> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for &v in set {
            if v >= n {
                return Err(GraphError::VertexOutOfRange { vertex: v, n });
            }
            for &w in std::iter::once(&v).chain(self.neighbors(v)) {
                if !seen[w] {
                    seen[w] = true;
                    out.push(w);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Worst-case sparsity graph of a thresholded polynomial of degree `2^s`
    /// with nothing thresholded: `(v, w)` is an edge iff `dist(v, w) <= 2^s`.
    ///
    /// `s = 0` returns a copy of `self`.
    pub fn structural_polynomial_graph(&self, s: u32) -> SparsityGraph {
        let n = self.n();
        let depth = if s >= usize::BITS - 1 {
            n
        } else {
            (1usize << s).min(n)
        };
        if depth <= 1 {
            return self.clone();
        }
        let lists: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map_init(
                || (vec![usize::MAX; n], VecDeque::new()),
                |(dist, queue), root| {
                    let mut reached = Vec::new();
                    dist[root] = 0;
                    queue.push_back(root);
                    while let Some(u) = queue.pop_front() {
                        reached.push(u);
                        if dist[u] == depth {
                            continue;
                        }
                        for &w in self.neighbors(u) {
                            if dist[w] == usize::MAX {
                                dist[w] = dist[u] + 1;
                                queue.push_back(w);
                            }
                        }
                    }
                    for &u in &reached {
                        dist[u] = usize::MAX;
                    }
                    reached.retain(|&u| u != root);
                    reached.sort_unstable();
                    reached
                },
            )
            .collect();
        let mut xadj = Vec::with_capacity(n + 1);
        xadj.push(0);
        let mut adjncy = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        for l in lists {
            adjncy.extend(l);
            xadj.push(adjncy.len());
        }
        SparsityGraph { xadj, adjncy }
    }
}

/// Sparsity graph of a matrix; see [`SparsityGraph::from_matrix`].
pub fn sparsity_graph(m: &SymSparseMatrix) -> SparsityGraph {
    SparsityGraph::from_matrix(m)
}
