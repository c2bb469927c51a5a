//! Initial core assignments: a balanced BFS-growth baseline, plus reading and
//! writing METIS `.part` files so partitions from external tools can be used.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::sgraph::SparsityGraph;

/// First problem found in a list of cores.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoreViolation {
    #[error("vertex {vertex} in part {part} is out of range (n = {n})")]
    OutOfRange {
        vertex: usize,
        part: usize,
        n: usize,
    },
    #[error("part {part} has an empty core")]
    EmptyCore { part: usize },
    #[error("vertex {vertex} is in the cores of parts {first} and {second}")]
    Overlap {
        vertex: usize,
        first: usize,
        second: usize,
    },
    #[error("vertex {vertex} is not in any core")]
    Uncovered { vertex: usize },
}

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("part count must satisfy 2 <= q <= n, got q = {q} for n = {n}")]
    InvalidPartCount { q: usize, n: usize },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("partition file has {found} lines, graph has {expected} vertices")]
    LineCount { expected: usize, found: usize },
    #[error("line {line}: '{text}' is not a part id")]
    NotAnInteger { line: usize, text: String },
    #[error("part ids must be 0..{q} with none missing; id {missing} is unused")]
    GapInPartIds { missing: usize, q: usize },
}

/// Checks that `cores` are non-empty, disjoint and cover `0..n`; returns the
/// owning part of every vertex.
pub(crate) fn core_owners(n: usize, cores: &[Vec<usize>]) -> Result<Vec<usize>, CoreViolation> {
    let mut owner = vec![usize::MAX; n];
    for (part, core) in cores.iter().enumerate() {
        if core.is_empty() {
            return Err(CoreViolation::EmptyCore { part });
        }
        for &v in core {
            if v >= n {
                return Err(CoreViolation::OutOfRange { vertex: v, part, n });
            }
            if owner[v] != usize::MAX {
                return Err(CoreViolation::Overlap {
                    vertex: v,
                    first: owner[v],
                    second: part,
                });
            }
            owner[v] = part;
        }
    }
    if let Some(vertex) = owner.iter().position(|&p| p == usize::MAX) {
        return Err(CoreViolation::Uncovered { vertex });
    }
    Ok(owner)
}

pub fn validate_cores(g: &SparsityGraph, cores: &[Vec<usize>]) -> Result<(), CoreViolation> {
    core_owners(g.n(), cores).map(|_| ())
}

/// Groups a per-vertex part assignment into sorted cores.
pub fn cores_from_owners(owners: &[usize], q: usize) -> Vec<Vec<usize>> {
    let mut cores = vec![Vec::new(); q];
    for (v, &p) in owners.iter().enumerate() {
        cores[p].push(v);
    }
    cores
}

/// Balanced graph growing.
///
/// Parts are grown one after another. Each starts at a pseudo-peripheral
/// vertex of the unassigned subgraph (the last vertex reached by a BFS from a
/// random unassigned vertex) and repeatedly takes the unassigned frontier
/// vertex with the most neighbors already in the part, ties going to the
/// vertex discovered first, until it holds `ceil(n/q)` or `floor(n/q)`
/// vertices; the larger size goes to the first `n mod q` parts. Vertices left
/// over when a part runs out of frontier are then attached one at a time to
/// the smallest adjacent core, ties going to the lower part index.
pub fn bfs_block_partition(
    g: &SparsityGraph,
    q: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, PartitionError> {
    let n = g.n();
    if q < 2 || q > n {
        return Err(PartitionError::InvalidPartCount { q, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut owner = vec![usize::MAX; n];
    let mut sizes = vec![0usize; q];
    let mut unassigned: Vec<usize> = (0..n).collect();
    let mut queue = VecDeque::new();
    let mut visited = vec![usize::MAX; n];
    let mut frontier = Frontier {
        part: vec![usize::MAX; n],
        gain: vec![0; n],
        order: vec![0; n],
    };

    for (part, size) in sizes.iter_mut().enumerate() {
        let cap = n / q + usize::from(part < n % q);
        unassigned.retain(|&v| owner[v] == usize::MAX);
        let start = unassigned[rng.random_range(0..unassigned.len())];
        let root = last_reached(g, &owner, start, &mut visited, &mut queue, part);

        *size = grow(g, &mut owner, root, part, cap, &mut frontier);
    }

    assign_leftovers(g, &mut owner, &mut sizes);
    Ok(cores_from_owners(&owner, q))
}

/// Grows `part` from `root` up to `cap` vertices, always taking the frontier
/// vertex with the most neighbors inside the part.
fn grow(
    g: &SparsityGraph,
    owner: &mut [usize],
    root: usize,
    part: usize,
    cap: usize,
    frontier: &mut Frontier,
) -> usize {
    // Heap entries are (gain, earlier discovery first, vertex). A vertex is
    // pushed again whenever its gain grows; outdated entries are skipped.
    let mut heap: BinaryHeap<(usize, Reverse<usize>, usize)> = BinaryHeap::new();
    let mut seq = 0;
    let mut size = 0;
    let mut next = Some(root);
    while let Some(u) = next {
        owner[u] = part;
        size += 1;
        if size == cap {
            break;
        }
        for &w in g.neighbors(u) {
            if owner[w] != usize::MAX {
                continue;
            }
            if frontier.part[w] != part {
                frontier.part[w] = part;
                frontier.gain[w] = 0;
                frontier.order[w] = seq;
                seq += 1;
            }
            frontier.gain[w] += 1;
            heap.push((frontier.gain[w], Reverse(frontier.order[w]), w));
        }
        next = None;
        while let Some((gain, _, w)) = heap.pop() {
            if owner[w] == usize::MAX && gain == frontier.gain[w] {
                next = Some(w);
                break;
            }
        }
    }
    size
}

/// Per-vertex scratch for [`grow`], tagged with the part it belongs to.
struct Frontier {
    part: Vec<usize>,
    gain: Vec<usize>,
    order: Vec<usize>,
}

/// Last vertex of a BFS from `start` restricted to unassigned vertices.
fn last_reached(
    g: &SparsityGraph,
    owner: &[usize],
    start: usize,
    visited: &mut [usize],
    queue: &mut VecDeque<usize>,
    stamp: usize,
) -> usize {
    queue.clear();
    queue.push_back(start);
    visited[start] = stamp;
    let mut last = start;
    while let Some(u) = queue.pop_front() {
        last = u;
        for &w in g.neighbors(u) {
            if owner[w] == usize::MAX && visited[w] != stamp {
                visited[w] = stamp;
                queue.push_back(w);
            }
        }
    }
    last
}

fn assign_leftovers(g: &SparsityGraph, owner: &mut [usize], sizes: &mut [usize]) {
    loop {
        let mut progressed = false;
        let mut remaining = false;
        for v in 0..g.n() {
            if owner[v] != usize::MAX {
                continue;
            }
            let best = g
                .neighbors(v)
                .iter()
                .map(|&w| owner[w])
                .filter(|&p| p != usize::MAX)
                .min_by_key(|&p| (sizes[p], p));
            match best {
                Some(p) => {
                    owner[v] = p;
                    sizes[p] += 1;
                    progressed = true;
                }
                None => remaining = true,
            }
        }
        if !remaining {
            return;
        }
        if !progressed {
            // A component with no assigned vertex: seed it into the smallest part.
            let v = owner.iter().position(|&p| p == usize::MAX).unwrap();
            let p = (0..sizes.len()).min_by_key(|&p| (sizes[p], p)).unwrap();
            owner[v] = p;
            sizes[p] += 1;
        }
    }
}

/// Reads a METIS `.part` file: line `i` holds the 0-based part of vertex `i`.
pub fn import_partition(
    path: impl AsRef<Path>,
    g: &SparsityGraph,
) -> Result<Vec<Vec<usize>>, PartitionError> {
    read_partition(BufReader::new(File::open(path)?), g.n())
}

pub fn read_partition<R: BufRead>(reader: R, n: usize) -> Result<Vec<Vec<usize>>, PartitionError> {
    let mut owners = Vec::with_capacity(n);
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        let p: usize = t.parse().map_err(|_| PartitionError::NotAnInteger {
            line: idx + 1,
            text: t.to_string(),
        })?;
        owners.push(p);
    }
    if owners.len() != n {
        return Err(PartitionError::LineCount {
            expected: n,
            found: owners.len(),
        });
    }
    let q = owners.iter().max().map_or(0, |&m| m + 1);
    let mut used = vec![false; q];
    for &p in &owners {
        used[p] = true;
    }
    if let Some(missing) = used.iter().position(|&u| !u) {
        return Err(PartitionError::GapInPartIds { missing, q });
    }
    Ok(cores_from_owners(&owners, q))
}

/// Writes cores as a METIS `.part` file.
pub fn export_partition(path: impl AsRef<Path>, n: usize, cores: &[Vec<usize>]) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_partition(&mut w, n, cores)?;
    w.flush()
}

pub fn write_partition<W: Write>(w: &mut W, n: usize, cores: &[Vec<usize>]) -> io::Result<()> {
    let mut owner = vec![usize::MAX; n];
    for (p, core) in cores.iter().enumerate() {
        for &v in core {
            owner[v] = p;
        }
    }
    for p in owner {
        writeln!(w, "{p}")?;
    }
    Ok(())
}
