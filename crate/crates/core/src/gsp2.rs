//! Partitioned evaluation of a thresholded matrix polynomial.
//!
//! Every part of a core-halo partition gets the dense submatrix on its core
//! and halo vertices. The schedule is applied to each submatrix on its own,
//! and row `g` of the result is read from the part whose core holds `g`.
//! When the halos come from the distance-`2^s` closure of the sparsity graph
//! and no thresholding happens, the assembled matrix equals the polynomial of
//! the full matrix.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::sgraph::{objective_sum_cubes, ChPartition};
use crate::sp2::{choose_branch, PolyKind, PolySchedule, Sp2Config, Sp2Error};
use crate::spmat::{DenseMatrix, SymSparseMatrix};

/// Largest `|D[i][j] - D[j][i]|` accepted during assembly by default.
pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum Gsp2Error {
    #[error("part {part} does not exist (q = {q})")]
    PartOutOfRange { part: usize, q: usize },
    #[error("matrix has dimension {matrix} but the partition covers {partition} vertices")]
    DimensionMismatch { matrix: usize, partition: usize },
    #[error("no result for part {part}")]
    MissingPart { part: usize },
    #[error("row {row} is written by parts {first} and {second}")]
    RowWrittenTwice {
        row: usize,
        first: usize,
        second: usize,
    },
    #[error("assembled entries ({row}, {col}) and ({col}, {row}) differ by {diff:e}")]
    Asymmetric { row: usize, col: usize, diff: f64 },
    #[error("worker count must be at least 1")]
    InvalidWorkers,
    #[error("could not start worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Sp2(#[from] Sp2Error),
}

/// Dense core+halo submatrix of one part.
#[derive(Debug, Clone, PartialEq)]
pub struct PartWorkItem {
    pub part: usize,
    /// Number of leading entries of `local_to_global` that are core vertices.
    pub core_len: usize,
    /// Core vertices ascending, then halo vertices ascending.
    pub local_to_global: Vec<usize>,
    pub matrix: DenseMatrix,
}

impl PartWorkItem {
    pub fn dim(&self) -> usize {
        self.local_to_global.len()
    }
}

fn check_dims(a: &SymSparseMatrix, p: &ChPartition) -> Result<(), Gsp2Error> {
    if a.n() != p.n() {
        return Err(Gsp2Error::DimensionMismatch {
            matrix: a.n(),
            partition: p.n(),
        });
    }
    Ok(())
}

/// Dense submatrix of `a` on the core and halo of part `part`.
pub fn extract_submatrix(
    a: &SymSparseMatrix,
    p: &ChPartition,
    part: usize,
) -> Result<PartWorkItem, Gsp2Error> {
    check_dims(a, p)?;
    if part >= p.q() {
        return Err(Gsp2Error::PartOutOfRange { part, q: p.q() });
    }
    let (core, halo) = (p.core(part), p.halo(part));
    let local_of = |g: usize| -> Option<usize> {
        core.binary_search(&g)
            .ok()
            .or_else(|| halo.binary_search(&g).ok().map(|k| core.len() + k))
    };
    let local_to_global: Vec<usize> = core.iter().chain(halo).copied().collect();
    let m = local_to_global.len();
    let mut matrix = DenseMatrix::zeros(m);
    for (u, &g) in local_to_global.iter().enumerate() {
        for (c, v) in a.row_iter(g) {
            if let Some(l) = local_of(c) {
                matrix.set(u, l, v);
            }
        }
    }
    Ok(PartWorkItem {
        part,
        core_len: core.len(),
        local_to_global,
        matrix,
    })
}

fn apply_dense(x: &DenseMatrix, poly: PolyKind) -> DenseMatrix {
    let sq = x.square_symmetric();
    match poly {
        PolyKind::Square => sq,
        PolyKind::DoubleMinusSquare => x.double_minus(&sq),
    }
}

/// Dense result of one part.
#[derive(Debug, Clone, PartialEq)]
pub struct PartResult {
    pub matrix: DenseMatrix,
    /// `s * (c_i + h_i)^3` for a schedule of `s` steps.
    pub flops: u128,
    pub elapsed: Duration,
}

/// Applies every step of `sched` to the submatrix with dense algebra.
pub fn evaluate_part(item: &PartWorkItem, sched: &PolySchedule) -> PartResult {
    let start = Instant::now();
    let mut x = item.matrix.clone();
    for step in sched.steps() {
        x = apply_dense(&x, step.poly);
        x.threshold_in_place(step.tau);
    }
    let m = item.dim() as u128;
    PartResult {
        matrix: x,
        flops: sched.len() as u128 * m * m * m,
        elapsed: start.elapsed(),
    }
}

/// Reads every global row from the local row of its owning part.
///
/// Off-diagonal entries that are exactly zero or below `final_tau` in
/// magnitude are left out. Entry `(i, j)` is taken from row `min(i, j)` and
/// compared with row `max(i, j)`; a difference above `symmetry_tol` is an
/// error.
pub fn assemble(
    results: &[(PartWorkItem, DenseMatrix)],
    p: &ChPartition,
    n: usize,
    final_tau: f64,
    symmetry_tol: f64,
) -> Result<SymSparseMatrix, Gsp2Error> {
    if p.n() != n {
        return Err(Gsp2Error::DimensionMismatch {
            matrix: n,
            partition: p.n(),
        });
    }
    let mut by_part: Vec<Option<&(PartWorkItem, DenseMatrix)>> = vec![None; p.q()];
    for r in results {
        if r.0.part >= p.q() {
            return Err(Gsp2Error::PartOutOfRange {
                part: r.0.part,
                q: p.q(),
            });
        }
        by_part[r.0.part] = Some(r);
    }
    let mut source = vec![usize::MAX; n];
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (part, slot) in by_part.iter().enumerate() {
        let (item, dense) = slot.ok_or(Gsp2Error::MissingPart { part })?;
        for u in 0..item.core_len {
            let g = item.local_to_global[u];
            if source[g] != usize::MAX {
                return Err(Gsp2Error::RowWrittenTwice {
                    row: g,
                    first: source[g],
                    second: part,
                });
            }
            source[g] = part;
            let row = &mut rows[g];
            for (l, &v) in dense.row(u).iter().enumerate() {
                let c = item.local_to_global[l];
                if c == g || (v != 0.0 && v.abs() >= final_tau) {
                    row.push((c, v));
                }
            }
            row.sort_unstable_by_key(|&(c, _)| c);
        }
    }
    if let Some(row) = source.iter().position(|&s| s == usize::MAX) {
        return Err(Gsp2Error::MissingPart { part: p.owner(row) });
    }

    let lookup =
        |r: &[(usize, f64)], c: usize| r.binary_search_by_key(&c, |&(k, _)| k).ok().map(|k| r[k].1);
    let mut upper: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..n {
        for &(j, v) in &rows[i] {
            if j < i {
                if lookup(&rows[j], i).is_none() {
                    check_pair(j, i, 0.0, v, symmetry_tol)?;
                    upper.push((j, i, v));
                }
                continue;
            }
            if j > i {
                check_pair(i, j, v, lookup(&rows[j], i).unwrap_or(0.0), symmetry_tol)?;
            }
            upper.push((i, j, v));
        }
    }
    upper.sort_unstable_by_key(|&(i, j, _)| (i, j));
    Ok(SymSparseMatrix::from_sorted_upper_unchecked(n, upper))
}

fn check_pair(row: usize, col: usize, a: f64, b: f64, tol: f64) -> Result<(), Gsp2Error> {
    let diff = (a - b).abs();
    if diff > tol {
        return Err(Gsp2Error::Asymmetric { row, col, diff });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gsp2Options {
    pub workers: usize,
    pub symmetry_tol: f64,
}

impl Default for Gsp2Options {
    fn default() -> Self {
        Self {
            workers: 1,
            symmetry_tol: DEFAULT_SYMMETRY_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartRunMetrics {
    pub part: usize,
    pub core: usize,
    pub halo: usize,
    pub flops: u128,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub parts: Vec<PartRunMetrics>,
    pub sum_cubes: u128,
    pub workers: usize,
    pub wall_time_s: f64,
}

impl RunMetrics {
    pub fn total_flops(&self) -> u128 {
        self.parts.iter().map(|p| p.flops).sum()
    }

    /// One row per part: `part,core,halo,flops,ms`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("part,core,halo,flops,ms\n");
        for p in &self.parts {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.3}",
                p.part, p.core, p.halo, p.flops, p.ms
            );
        }
        out
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, Gsp2Error> {
    if workers == 0 {
        return Err(Gsp2Error::InvalidWorkers);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Gsp2Error::Pool(e.to_string()))
}

/// Extracts, evaluates and assembles every part, running at most
/// `opts.workers` parts at once. The output does not depend on the worker
/// count.
pub fn gsp2_run(
    a: &SymSparseMatrix,
    p: &ChPartition,
    sched: &PolySchedule,
    opts: &Gsp2Options,
) -> Result<(SymSparseMatrix, RunMetrics), Gsp2Error> {
    check_dims(a, p)?;
    let pool = pool(opts.workers)?;
    let start = Instant::now();
    let evaluated: Vec<(PartWorkItem, PartResult)> = pool.install(|| {
        (0..p.q())
            .into_par_iter()
            .map(|part| {
                let item = extract_submatrix(a, p, part)?;
                let res = evaluate_part(&item, sched);
                Ok((item, res))
            })
            .collect::<Result<_, Gsp2Error>>()
    })?;
    let parts = evaluated
        .iter()
        .map(|(item, res)| PartRunMetrics {
            part: item.part,
            core: item.core_len,
            halo: item.dim() - item.core_len,
            flops: res.flops,
            ms: res.elapsed.as_secs_f64() * 1e3,
        })
        .collect();
    let results: Vec<(PartWorkItem, DenseMatrix)> =
        evaluated.into_iter().map(|(i, r)| (i, r.matrix)).collect();
    let d = assemble(&results, p, a.n(), sched.final_tau(), opts.symmetry_tol)?;
    let metrics = RunMetrics {
        parts,
        sum_cubes: objective_sum_cubes(p),
        workers: opts.workers,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((d, metrics))
}

/// Outcome of partitioned SP2 with a global trace reduction per step.
#[derive(Debug, Clone)]
pub struct SyncSp2Outcome {
    pub density: SymSparseMatrix,
    pub schedule: PolySchedule,
    pub converged: bool,
    pub trace_error: f64,
    pub idempotency_residual: f64,
    pub metrics: RunMetrics,
}

struct CoreSums {
    trace: f64,
    trace_sq: f64,
    residual_sq: f64,
    norm_sq: f64,
}

fn core_sums(x: &DenseMatrix, sq: &DenseMatrix, core_len: usize) -> CoreSums {
    let mut s = CoreSums {
        trace: 0.0,
        trace_sq: 0.0,
        residual_sq: 0.0,
        norm_sq: 0.0,
    };
    for u in 0..core_len {
        s.trace += x.get(u, u);
        s.trace_sq += sq.get(u, u);
        for (a, b) in x.row(u).iter().zip(sq.row(u)) {
            s.residual_sq += (b - a) * (b - a);
            s.norm_sq += a * a;
        }
    }
    s
}

/// SP2 run directly on the parts of `p`, starting from the normalized
/// matrix `x0`.
///
/// The branch of every step is chosen from the global traces of `X` and
/// `X^2`, summed over the core rows of all parts. Stopping follows
/// [`crate::sp2::sm_sp2`]. The result matches full SP2 only while the
/// halos are wide enough for the number of steps taken.
pub fn gsp2_sync_sp2(
    x0: &SymSparseMatrix,
    p: &ChPartition,
    cfg: &Sp2Config,
    opts: &Gsp2Options,
) -> Result<SyncSp2Outcome, Gsp2Error> {
    check_dims(x0, p)?;
    cfg.validate(x0.n())?;
    let pool = pool(opts.workers)?;
    let start = Instant::now();
    let mut items: Vec<PartWorkItem> = pool.install(|| {
        (0..p.q())
            .into_par_iter()
            .map(|part| extract_submatrix(x0, p, part))
            .collect::<Result<_, _>>()
    })?;
    let mut elapsed = vec![Duration::ZERO; items.len()];
    let mut schedule = PolySchedule::default();
    let mut residuals: Vec<f64> = Vec::new();
    let mut converged = false;
    let (mut trace_error, mut residual);
    loop {
        let stepped: Vec<(DenseMatrix, CoreSums, Duration)> = pool.install(|| {
            items
                .par_iter()
                .map(|item| {
                    let t = Instant::now();
                    let sq = item.matrix.square_symmetric();
                    let sums = core_sums(&item.matrix, &sq, item.core_len);
                    (sq, sums, t.elapsed())
                })
                .collect()
        });
        let (mut tr, mut tr2, mut r2, mut x2) = (0.0, 0.0, 0.0, 0.0);
        for (k, (_, s, dt)) in stepped.iter().enumerate() {
            tr += s.trace;
            tr2 += s.trace_sq;
            r2 += s.residual_sq;
            x2 += s.norm_sq;
            elapsed[k] += *dt;
        }
        trace_error = (tr - cfg.nocc).abs();
        residual = if x2 > 0.0 {
            (r2 / x2).sqrt()
        } else {
            r2.sqrt()
        };
        residuals.push(residual);
        if trace_error < cfg.conv_tol && residual < cfg.conv_tol {
            converged = true;
            break;
        }
        if cfg.tau > 0.0
            && residual < 1e-2
            && residuals.len() >= 3
            && residual >= residuals[residuals.len() - 3]
        {
            converged = true;
            break;
        }
        if schedule.len() == cfg.max_iter {
            break;
        }
        let poly = choose_branch(tr, tr2, cfg.nocc);
        schedule.push(poly, cfg.tau)?;
        let tau = cfg.tau;
        let updated: Vec<Duration> = pool.install(|| {
            items
                .par_iter_mut()
                .zip(stepped.into_par_iter())
                .map(|(item, (sq, _, _))| {
                    let t = Instant::now();
                    let mut next = match poly {
                        PolyKind::Square => sq,
                        PolyKind::DoubleMinusSquare => item.matrix.double_minus(&sq),
                    };
                    next.threshold_in_place(tau);
                    item.matrix = next;
                    t.elapsed()
                })
                .collect()
        });
        for (e, dt) in elapsed.iter_mut().zip(updated) {
            *e += dt;
        }
    }
    let s = schedule.len() as u128;
    let parts = items
        .iter()
        .zip(&elapsed)
        .map(|(item, dt)| {
            let m = item.dim() as u128;
            PartRunMetrics {
                part: item.part,
                core: item.core_len,
                halo: item.dim() - item.core_len,
                flops: s * m * m * m,
                ms: dt.as_secs_f64() * 1e3,
            }
        })
        .collect();
    let results: Vec<(PartWorkItem, DenseMatrix)> = items
        .into_iter()
        .map(|item| {
            let m = item.matrix.clone();
            (item, m)
        })
        .collect();
    let density = assemble(&results, p, x0.n(), schedule.final_tau(), opts.symmetry_tol)?;
    let metrics = RunMetrics {
        parts,
        sum_cubes: objective_sum_cubes(p),
        workers: opts.workers,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(SyncSp2Outcome {
        density,
        schedule,
        converged,
        trace_error,
        idempotency_residual: residual,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sgraph::{build_ch_partition, SparsityGraph};
    use crate::sp2::thresholded_poly_apply;

    fn tridiagonal(n: usize) -> SymSparseMatrix {
        let mut t: Vec<(usize, usize, f64)> =
            (0..n).map(|i| (i, i, 0.1 * (i + 1) as f64)).collect();
        t.extend((1..n).map(|i| (i - 1, i, 0.05 * i as f64)));
        SymSparseMatrix::from_triplets(n, t).unwrap()
    }

    fn sched(steps: &str) -> PolySchedule {
        steps.parse().unwrap()
    }

    #[test]
    fn single_part_is_dense_form() {
        let a = tridiagonal(5);
        let g = SparsityGraph::from_matrix(&a);
        let p = build_ch_partition(&g, vec![(0..5).collect()]).unwrap();
        let item = extract_submatrix(&a, &p, 0).unwrap();
        assert_eq!(item.matrix, a.to_dense());
        assert_eq!(item.core_len, 5);
        assert!(matches!(
            extract_submatrix(&a, &p, 1),
            Err(Gsp2Error::PartOutOfRange { part: 1, q: 1 })
        ));
    }

    #[test]
    fn singleton_core_has_closed_neighborhood_dimension() {
        let a = tridiagonal(6);
        let g = SparsityGraph::from_matrix(&a);
        let mut cores = vec![vec![3]];
        cores.push(vec![0, 1, 2, 4, 5]);
        let p = build_ch_partition(&g, cores).unwrap();
        let item = extract_submatrix(&a, &p, 0).unwrap();
        assert_eq!(item.local_to_global, vec![3, 2, 4]);
        assert_eq!(item.matrix.get(0, 1), a.value(3, 2));
        assert_eq!(item.matrix.get(1, 2), 0.0);
    }

    #[test]
    fn empty_schedule_leaves_submatrix() {
        let a = tridiagonal(4);
        let g = SparsityGraph::from_matrix(&a);
        let p = build_ch_partition(&g, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let item = extract_submatrix(&a, &p, 1).unwrap();
        let r = evaluate_part(&item, &PolySchedule::default());
        assert_eq!(r.matrix, item.matrix);
        assert_eq!(r.flops, 0);
    }

    #[test]
    fn flops_follow_cost_model() {
        let a = tridiagonal(8);
        let g = SparsityGraph::from_matrix(&a);
        let p = build_ch_partition(&g, vec![vec![0, 1, 2], (3..8).collect()]).unwrap();
        let s = sched("step 1: SQUARE tau=0e0\nstep 2: DMS tau=0e0\nstep 3: SQUARE tau=0e0\n");
        for part in 0..2 {
            let item = extract_submatrix(&a, &p, part).unwrap();
            let m = item.dim() as u128;
            assert_eq!(evaluate_part(&item, &s).flops, 3 * m * m * m);
        }
    }

    #[test]
    fn two_part_path_matches_full_evaluation() {
        let a = tridiagonal(10);
        let s = sched("step 1: SQUARE tau=0e0\nstep 2: DMS tau=0e0\n");
        let h = SparsityGraph::from_matrix(&a).structural_polynomial_graph(2);
        let p = build_ch_partition(&h, vec![(0..5).collect(), (5..10).collect()]).unwrap();
        let (d, m) = gsp2_run(&a, &p, &s, &Gsp2Options::default()).unwrap();
        let full = thresholded_poly_apply(&a, &s).result;
        assert!(d.max_abs_diff(&full).unwrap() <= 1e-12);
        assert_eq!(m.parts.len(), 2);
        assert_eq!(m.sum_cubes, objective_sum_cubes(&p));
    }

    #[test]
    fn narrow_halos_are_reported_as_asymmetry() {
        let a = tridiagonal(10);
        let s = sched("step 1: SQUARE tau=0e0\nstep 2: SQUARE tau=0e0\n");
        let g = SparsityGraph::from_matrix(&a);
        let p = build_ch_partition(&g, vec![(0..5).collect(), (5..10).collect()]).unwrap();
        assert!(matches!(
            gsp2_run(&a, &p, &s, &Gsp2Options::default()),
            Err(Gsp2Error::Asymmetric { .. })
        ));
    }

    #[test]
    fn missing_part_result() {
        let a = tridiagonal(4);
        let g = SparsityGraph::from_matrix(&a);
        let p = build_ch_partition(&g, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let item = extract_submatrix(&a, &p, 0).unwrap();
        let m = item.matrix.clone();
        assert!(matches!(
            assemble(&[(item, m)], &p, 4, 0.0, 1e-12),
            Err(Gsp2Error::MissingPart { part: 1 })
        ));
    }

    #[test]
    fn zero_workers_rejected() {
        let a = tridiagonal(4);
        let g = SparsityGraph::from_matrix(&a);
        let p = build_ch_partition(&g, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let opts = Gsp2Options {
            workers: 0,
            ..Gsp2Options::default()
        };
        assert!(matches!(
            gsp2_run(&a, &p, &PolySchedule::default(), &opts),
            Err(Gsp2Error::InvalidWorkers)
        ));
    }

    #[test]
    fn metrics_csv_layout() {
        let m = RunMetrics {
            parts: vec![PartRunMetrics {
                part: 0,
                core: 3,
                halo: 1,
                flops: 128,
                ms: 0.5,
            }],
            sum_cubes: 64,
            workers: 2,
            wall_time_s: 0.1,
        };
        assert_eq!(m.to_csv(), "part,core,halo,flops,ms\n0,3,1,128,0.500\n");
    }
}
