//! Simulated-annealing refinement of a core-halo partition against the
//! sum-of-cubes objective.
//!
//! A move takes a halo vertex `w` of some part and makes it a core vertex of
//! that part. `w` leaves the core of the part that owned it, and every halo
//! touched by the ownership change is updated. Moves that would leave a core
//! empty are never proposed.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::sgraph::{ChPartition, SparsityGraph};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnnealError {
    #[error("part {part} does not exist (q = {q})")]
    NoSuchPart { part: usize, q: usize },
    #[error("vertex {vertex} does not exist (n = {n})")]
    NoSuchVertex { vertex: usize, n: usize },
    #[error("vertex {vertex} is already a core vertex of part {part}")]
    AlreadyInCore { vertex: usize, part: usize },
    #[error("vertex {vertex} is not in the halo of part {part}")]
    NotInHalo { vertex: usize, part: usize },
    #[error("moving vertex {vertex} would empty the core of part {part}")]
    EmptiesCore { vertex: usize, part: usize },
    #[error("partition halos were not derived from the given graph")]
    GraphMismatch,
    #[error("iteration count must be at least 1")]
    NoIterations,
}

/// Temperature as a function of the 1-based iteration number.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Temperature {
    /// `t(i) = 1 / i`
    #[default]
    Reciprocal,
}

impl Temperature {
    pub fn at(self, iteration: usize) -> f64 {
        match self {
            Temperature::Reciprocal => 1.0 / iteration as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaConfig {
    pub iterations: usize,
    pub seed: u64,
    pub temperature: Temperature,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            seed: 0,
            temperature: Temperature::Reciprocal,
        }
    }
}

/// Proposed move: vertex `vertex` becomes a core vertex of `part`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub part: usize,
    pub vertex: usize,
}

/// Acceptance rule: always for `delta < 0`, otherwise with probability
/// `exp(-delta / temperature)`.
pub fn accept_move<R: Rng + ?Sized>(delta: i128, temperature: f64, rng: &mut R) -> bool {
    if delta < 0 {
        return true;
    }
    let p = (-(delta as f64) / temperature).exp();
    rng.random::<f64>() < p
}

/// Mutable view of a partition: owners plus per-part core and halo sizes.
struct State {
    owner: Vec<usize>,
    core_len: Vec<usize>,
    halo_len: Vec<usize>,
    members: Vec<Vec<usize>>,
    slot: Vec<usize>,
}

impl State {
    fn new(p: &ChPartition) -> Self {
        let owner = p.owners().to_vec();
        let members: Vec<Vec<usize>> = p.cores().to_vec();
        let mut slot = vec![0; owner.len()];
        for core in &members {
            for (k, &v) in core.iter().enumerate() {
                slot[v] = k;
            }
        }
        State {
            owner,
            core_len: p.cores().iter().map(Vec::len).collect(),
            halo_len: p.halos().iter().map(Vec::len).collect(),
            members,
            slot,
        }
    }

    fn size(&self, part: usize) -> u128 {
        (self.core_len[part] + self.halo_len[part]) as u128
    }

    fn objective(&self) -> u128 {
        (0..self.core_len.len()).map(|p| self.size(p).pow(3)).sum()
    }

    fn relocate(&mut self, v: usize, to: usize) {
        let from = self.owner[v];
        let k = self.slot[v];
        self.members[from].swap_remove(k);
        if let Some(&moved) = self.members[from].get(k) {
            self.slot[moved] = k;
        }
        self.slot[v] = self.members[to].len();
        self.members[to].push(v);
        self.owner[v] = to;
    }
}

/// Foreign parts owning a neighbor of `x`, with `w` treated as owned by
/// `w_owner`. Sorted and deduplicated into `out`.
fn halo_parts(
    g: &SparsityGraph,
    owner: &[usize],
    x: usize,
    w: usize,
    w_owner: usize,
    out: &mut Vec<usize>,
) {
    let own = |u: usize| if u == w { w_owner } else { owner[u] };
    let mine = own(x);
    out.clear();
    out.extend(
        g.neighbors(x)
            .iter()
            .map(|&u| own(u))
            .filter(|&p| p != mine),
    );
    out.sort_unstable();
    out.dedup();
}

/// Per-part size changes caused by moving `w` into the core of `to`.
fn size_changes(g: &SparsityGraph, owner: &[usize], w: usize, to: usize) -> BTreeMap<usize, i64> {
    let from = owner[w];
    let mut changes = BTreeMap::new();
    *changes.entry(from).or_insert(0) -= 1;
    *changes.entry(to).or_insert(0) += 1;
    let (mut before, mut after) = (Vec::new(), Vec::new());
    for &x in std::iter::once(&w).chain(g.neighbors(w)) {
        halo_parts(g, owner, x, w, from, &mut before);
        halo_parts(g, owner, x, w, to, &mut after);
        for p in before.iter().filter(|p| after.binary_search(p).is_err()) {
            *changes.entry(*p).or_insert(0) -= 1;
        }
        for p in after.iter().filter(|p| before.binary_search(p).is_err()) {
            *changes.entry(*p).or_insert(0) += 1;
        }
    }
    changes
}

fn delta_from_changes(changes: &BTreeMap<usize, i64>, size: impl Fn(usize) -> u128) -> i128 {
    changes
        .iter()
        .map(|(&p, &d)| {
            let old = size(p) as i128;
            let new = old + d as i128;
            new.pow(3) - old.pow(3)
        })
        .sum()
}

/// Change in the sum-of-cubes objective caused by `mv`, computed from the
/// parts whose core or halo actually changes.
pub fn sa_delta(p: &ChPartition, mv: Move, g: &SparsityGraph) -> Result<i128, AnnealError> {
    check_move(p, mv, g)?;
    let changes = size_changes(g, p.owners(), mv.vertex, mv.part);
    Ok(delta_from_changes(&changes, |q| p.part_size(q) as u128))
}

fn check_move(p: &ChPartition, mv: Move, g: &SparsityGraph) -> Result<(), AnnealError> {
    if p.halo_graph_id() != g.id() {
        return Err(AnnealError::GraphMismatch);
    }
    if mv.part >= p.q() {
        return Err(AnnealError::NoSuchPart {
            part: mv.part,
            q: p.q(),
        });
    }
    if mv.vertex >= p.n() {
        return Err(AnnealError::NoSuchVertex {
            vertex: mv.vertex,
            n: p.n(),
        });
    }
    let from = p.owner(mv.vertex);
    if from == mv.part {
        return Err(AnnealError::AlreadyInCore {
            vertex: mv.vertex,
            part: mv.part,
        });
    }
    if p.halo(mv.part).binary_search(&mv.vertex).is_err() {
        return Err(AnnealError::NotInHalo {
            vertex: mv.vertex,
            part: mv.part,
        });
    }
    if p.core(from).len() == 1 {
        return Err(AnnealError::EmptiesCore {
            vertex: mv.vertex,
            part: from,
        });
    }
    Ok(())
}

/// Applies a legal move, returning the new partition.
pub fn apply_move(
    p: &ChPartition,
    mv: Move,
    g: &SparsityGraph,
) -> Result<ChPartition, AnnealError> {
    check_move(p, mv, g)?;
    let mut owner = p.owners().to_vec();
    owner[mv.vertex] = mv.part;
    Ok(ChPartition::from_owner_unchecked(g, owner, p.q()))
}

/// One iteration of the refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct SaTraceRow {
    pub iteration: usize,
    /// `None` when no legal move could be drawn.
    pub proposal: Option<(Move, i128)>,
    pub temperature: f64,
    pub accepted: bool,
    pub current: u128,
    pub best: u128,
}

#[derive(Debug, Clone)]
pub struct SaOutcome {
    /// Lowest-objective partition seen, the input included.
    pub best: ChPartition,
    /// Partition after the last iteration.
    pub last: ChPartition,
    pub trace: Vec<SaTraceRow>,
}

const MAX_DRAWS: usize = 64;

/// Simulated annealing over `cfg.iterations` iterations.
///
/// Each iteration draws a part uniformly among those with a non-empty halo,
/// then a core-halo edge `(v, w)` of that part uniformly, and proposes making
/// `w` a core vertex of the part. Draws whose move would empty a core are
/// discarded and redrawn; after 64 discarded draws the iteration is skipped.
pub fn sa_refine(
    g: &SparsityGraph,
    p: &ChPartition,
    cfg: &SaConfig,
) -> Result<SaOutcome, AnnealError> {
    if p.halo_graph_id() != g.id() {
        return Err(AnnealError::GraphMismatch);
    }
    if cfg.iterations == 0 {
        return Err(AnnealError::NoIterations);
    }
    if p.halo_sum() == 0 {
        return Ok(SaOutcome {
            best: p.clone(),
            last: p.clone(),
            trace: Vec::new(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = State::new(p);
    let mut current = state.objective();
    let mut best = current;
    let mut best_owner = state.owner.clone();
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut edges: Vec<(usize, usize)> = Vec::new();

    for i in 1..=cfg.iterations {
        let temperature = cfg.temperature.at(i);
        let mut proposal = None;
        for _ in 0..MAX_DRAWS {
            let candidates: Vec<usize> = (0..state.halo_len.len())
                .filter(|&q| state.halo_len[q] > 0)
                .collect();
            if candidates.is_empty() {
                break;
            }
            let part = candidates[rng.random_range(0..candidates.len())];
            edges.clear();
            let mut sorted_core = state.members[part].clone();
            sorted_core.sort_unstable();
            for &v in &sorted_core {
                edges.extend(
                    g.neighbors(v)
                        .iter()
                        .filter(|&&w| state.owner[w] != part)
                        .map(|&w| (v, w)),
                );
            }
            let (_, w) = edges[rng.random_range(0..edges.len())];
            if state.core_len[state.owner[w]] > 1 {
                proposal = Some(Move { part, vertex: w });
                break;
            }
        }

        let Some(mv) = proposal else {
            trace.push(SaTraceRow {
                iteration: i,
                proposal: None,
                temperature,
                accepted: false,
                current,
                best,
            });
            continue;
        };
        let changes = size_changes(g, &state.owner, mv.vertex, mv.part);
        let delta = delta_from_changes(&changes, |q| state.size(q));
        let accepted = accept_move(delta, temperature, &mut rng);
        if accepted {
            let from = state.owner[mv.vertex];
            state.core_len[from] -= 1;
            state.core_len[mv.part] += 1;
            state.relocate(mv.vertex, mv.part);
            for (&q, &d) in &changes {
                let halo_d = d - if q == from {
                    -1
                } else if q == mv.part {
                    1
                } else {
                    0
                };
                state.halo_len[q] = (state.halo_len[q] as i64 + halo_d) as usize;
            }
            current = (current as i128 + delta) as u128;
            debug_assert_eq!(current, state.objective());
            #[cfg(debug_assertions)]
            {
                let check =
                    ChPartition::from_owner_unchecked(g, state.owner.clone(), state.core_len.len());
                debug_assert_eq!(
                    check.cores().iter().map(Vec::len).collect::<Vec<_>>(),
                    state.core_len
                );
                debug_assert_eq!(
                    check.halos().iter().map(Vec::len).collect::<Vec<_>>(),
                    state.halo_len
                );
            }
            if current < best {
                best = current;
                best_owner.clone_from(&state.owner);
            }
        }
        trace.push(SaTraceRow {
            iteration: i,
            proposal: Some((mv, delta)),
            temperature,
            accepted,
            current,
            best,
        });
    }

    let q = p.q();
    Ok(SaOutcome {
        best: ChPartition::from_owner_unchecked(g, best_owner, q),
        last: ChPartition::from_owner_unchecked(g, state.owner, q),
        trace,
    })
}

/// Trace log as CSV with a header row.
pub fn trace_csv(trace: &[SaTraceRow]) -> String {
    let mut out = String::from("iteration,part,vertex,delta,temperature,accepted,current,best\n");
    for r in trace {
        let (part, vertex, delta) = match r.proposal {
            Some((mv, d)) => (mv.part.to_string(), mv.vertex.to_string(), d.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{:e},{},{},{}",
            r.iteration, part, vertex, delta, r.temperature, r.accepted, r.current, r.best
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sgraph::{build_ch_partition, objective_sum_cubes};

    fn path(n: usize) -> SparsityGraph {
        SparsityGraph::from_edges(n, (1..n).map(|i| (i - 1, i))).unwrap()
    }

    #[test]
    fn negative_delta_always_accepted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| accept_move(-1, 1e-9, &mut rng)));
        assert!((0..1000).all(|_| accept_move(0, 0.5, &mut rng)));
    }

    #[test]
    fn delta_on_path_matches_recompute() {
        let g = path(6);
        let p = build_ch_partition(&g, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        let mv = Move { part: 0, vertex: 3 };
        let d = sa_delta(&p, mv, &g).unwrap();
        let moved = apply_move(&p, mv, &g).unwrap();
        assert_eq!(moved.core(0), &[0, 1, 2, 3]);
        assert_eq!(moved.halo(0), &[4]);
        assert_eq!(moved.halo(1), &[3]);
        assert_eq!(
            d,
            objective_sum_cubes(&moved) as i128 - objective_sum_cubes(&p) as i128
        );
        assert_eq!(d, 125 + 27 - 128);
    }

    #[test]
    fn illegal_moves() {
        let g = path(6);
        let p = build_ch_partition(&g, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        assert_eq!(
            sa_delta(&p, Move { part: 0, vertex: 1 }, &g),
            Err(AnnealError::AlreadyInCore { vertex: 1, part: 0 })
        );
        assert_eq!(
            sa_delta(&p, Move { part: 0, vertex: 5 }, &g),
            Err(AnnealError::NotInHalo { vertex: 5, part: 0 })
        );
        assert_eq!(
            sa_delta(&p, Move { part: 2, vertex: 5 }, &g),
            Err(AnnealError::NoSuchPart { part: 2, q: 2 })
        );
        let tiny = build_ch_partition(&g, vec![vec![0, 1, 2, 3, 4], vec![5]]).unwrap();
        assert_eq!(
            sa_delta(&tiny, Move { part: 0, vertex: 5 }, &g),
            Err(AnnealError::EmptiesCore { vertex: 5, part: 1 })
        );
        let other = path(6).structural_polynomial_graph(1);
        assert_eq!(
            sa_delta(&p, Move { part: 0, vertex: 3 }, &other),
            Err(AnnealError::GraphMismatch)
        );
    }

    #[test]
    fn no_core_halo_edges_returns_input() {
        let g = SparsityGraph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let p = build_ch_partition(&g, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let out = sa_refine(&g, &p, &SaConfig::default()).unwrap();
        assert_eq!(out.best, p);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn optimal_path_split_is_kept() {
        // Exhaustive check over contiguous two-part splits of a 6-path: 3|3 is optimal.
        let g = path(6);
        let best_split = (1..6)
            .map(|k| {
                let p = build_ch_partition(&g, vec![(0..k).collect(), (k..6).collect()]).unwrap();
                (objective_sum_cubes(&p), k)
            })
            .min()
            .unwrap();
        assert_eq!(best_split, (128, 3));
        let p = build_ch_partition(&g, vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        for seed in 0..10 {
            let out = sa_refine(
                &g,
                &p,
                &SaConfig {
                    seed,
                    ..SaConfig::default()
                },
            )
            .unwrap();
            assert_eq!(objective_sum_cubes(&out.best), 128);
        }
    }

    #[test]
    fn trace_csv_has_one_row_per_iteration() {
        let g = path(20);
        let p = build_ch_partition(&g, vec![(0..5).collect(), (5..20).collect()]).unwrap();
        let out = sa_refine(
            &g,
            &p,
            &SaConfig {
                iterations: 7,
                ..SaConfig::default()
            },
        )
        .unwrap();
        let csv = trace_csv(&out.trace);
        assert_eq!(csv.lines().count(), 8);
        assert!(
            csv.starts_with("iteration,part,vertex,delta,temperature,accepted,current,best\n1,")
        );
    }
}
