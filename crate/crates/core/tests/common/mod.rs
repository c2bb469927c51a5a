#![allow(dead_code)]

use corehalo::{SparsityGraph, SymSparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random undirected graph where each pair is an edge with probability `p`.
pub fn random_graph(n: usize, p: f64, rng: &mut ChaCha8Rng) -> SparsityGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    SparsityGraph::from_edges(n, edges).unwrap()
}

/// Random symmetric matrix with a nonzero diagonal and off-diagonal density
/// `p`, values in `[-1, 1]`.
pub fn random_symmetric(n: usize, p: f64, rng: &mut ChaCha8Rng) -> SymSparseMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((
            i,
            i,
            rng.random_range(0.5..1.5) * if rng.random::<bool>() { 1.0 } else { -1.0 },
        ));
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                t.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
    }
    SymSparseMatrix::from_triplets(n, t).unwrap()
}

/// Random assignment of `n` vertices to `q` non-empty cores.
pub fn random_cores(n: usize, q: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let mut cores = vec![Vec::new(); q];
    for (k, &v) in perm.iter().enumerate() {
        let part = if k < q { k } else { rng.random_range(0..q) };
        cores[part].push(v);
    }
    for c in &mut cores {
        c.sort_unstable();
    }
    cores
}

/// Row-major dense copy as nested vectors.
pub fn dense(a: &SymSparseMatrix) -> Vec<Vec<f64>> {
    let n = a.n();
    let mut d = vec![vec![0.0; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        for (j, v) in a.row_iter(i) {
            row[j] = v;
        }
    }
    d
}

/// Textbook triple-loop product.
pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[i][k] * b[k][j];
            }
            c[i][j] = s;
        }
    }
    c
}

pub fn max_diff(a: &SymSparseMatrix, b: &[Vec<f64>]) -> f64 {
    let da = dense(a);
    let mut m = 0.0f64;
    for i in 0..b.len() {
        for j in 0..b.len() {
            m = m.max((da[i][j] - b[i][j]).abs());
        }
    }
    m
}
