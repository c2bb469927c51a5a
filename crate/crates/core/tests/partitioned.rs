mod common;

use common::{dense, matmul, max_diff, random_cores, random_symmetric, rng};
use corehalo::generate::{gen_system, GenParams, SystemKind};
use corehalo::gsp2::{extract_submatrix, gsp2_sync_sp2, Gsp2Options};
use corehalo::sp2::{sp2_initial, PolyStep};
use corehalo::{
    build_ch_partition, gsp2_run, sm_sp2, thresholded_poly_apply, PolyKind, PolySchedule,
    Sp2Config, SparsityGraph, SymSparseMatrix,
};
use proptest::prelude::*;
use rand::Rng;

fn unit_scaled(a: &SymSparseMatrix) -> SymSparseMatrix {
    let norm = a.frobenius_norm();
    a.linear_combination(1.0 / norm, &SymSparseMatrix::identity(a.n()), 0.0)
        .unwrap()
}

fn schedule(polys: &[bool]) -> PolySchedule {
    PolySchedule::new(
        polys
            .iter()
            .map(|&sq| PolyStep {
                poly: if sq {
                    PolyKind::Square
                } else {
                    PolyKind::DoubleMinusSquare
                },
                tau: 0.0,
            })
            .collect(),
    )
    .unwrap()
}

fn naive_poly(a: &SymSparseMatrix, sched: &PolySchedule) -> Vec<Vec<f64>> {
    let mut x = dense(a);
    for step in sched.steps() {
        let sq = matmul(&x, &x);
        x = match step.poly {
            PolyKind::Square => sq,
            PolyKind::DoubleMinusSquare => x
                .iter()
                .zip(&sq)
                .map(|(xr, sr)| xr.iter().zip(sr).map(|(a, b)| 2.0 * a - b).collect())
                .collect(),
        };
    }
    x
}

#[test]
fn submatrix_entries_match_lookup() {
    let mut r = rng(31);
    for _ in 0..40 {
        let n = r.random_range(5..80);
        let q = r.random_range(1..=6.min(n));
        let a = random_symmetric(n, 0.1, &mut r);
        let g = SparsityGraph::from_matrix(&a);
        let p = build_ch_partition(&g, random_cores(n, q, &mut r)).unwrap();
        for part in 0..q {
            let item = extract_submatrix(&a, &p, part).unwrap();
            assert_eq!(item.dim(), p.part_size(part));
            assert_eq!(&item.local_to_global[..item.core_len], p.core(part));
            assert_eq!(&item.local_to_global[item.core_len..], p.halo(part));
            for (u, &gu) in item.local_to_global.iter().enumerate() {
                for (v, &gv) in item.local_to_global.iter().enumerate() {
                    assert_eq!(item.matrix.get(u, v), a.value(gu, gv));
                }
            }
        }
    }
}

#[test]
fn exactness_over_many_random_systems() {
    let mut r = rng(77);
    let mut worst = 0.0f64;
    for trial in 0..120 {
        let n = r.random_range(20..=200);
        let density = r.random_range(0.02..0.10);
        let a = unit_scaled(&random_symmetric(n, density, &mut r));
        let s = 1 + trial % 3;
        let polys: Vec<bool> = (0..s).map(|_| r.random::<bool>()).collect();
        let sched = schedule(&polys);
        let q = [2, 4, 8, 16][trial % 4];
        let h = SparsityGraph::from_matrix(&a).structural_polynomial_graph(s as u32);
        let p = build_ch_partition(&h, random_cores(n, q, &mut r)).unwrap();
        let (d, _) = gsp2_run(&a, &p, &sched, &Gsp2Options::default()).unwrap();
        worst = worst.max(max_diff(&d, &naive_poly(&a, &sched)));
    }
    assert!(worst <= 1e-12, "{worst:e}");
}

#[test]
fn singleton_cores_are_exact() {
    let mut r = rng(5);
    let a = unit_scaled(&random_symmetric(40, 0.06, &mut r));
    let sched = schedule(&[true, false]);
    let h = SparsityGraph::from_matrix(&a).structural_polynomial_graph(2);
    let p = build_ch_partition(&h, (0..40).map(|v| vec![v]).collect()).unwrap();
    let (d, m) = gsp2_run(&a, &p, &sched, &Gsp2Options::default()).unwrap();
    assert!(max_diff(&d, &naive_poly(&a, &sched)) <= 1e-12);
    assert_eq!(m.parts.len(), 40);
}

#[test]
fn result_rows_have_closure_neighborhoods() {
    // Positive entries and squaring only, so nothing cancels.
    let mut r = rng(9);
    for _ in 0..20 {
        let n = r.random_range(8..=64);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, r.random_range(0.1..1.0)));
            for j in i + 1..n {
                if r.random::<f64>() < 0.05 {
                    t.push((i, j, r.random_range(0.1..1.0)));
                }
            }
        }
        let a = unit_scaled(&SymSparseMatrix::from_triplets(n, t).unwrap());
        let s = r.random_range(1..=3u32);
        let sched = schedule(&vec![true; s as usize]);
        let closure = SparsityGraph::from_matrix(&a).structural_polynomial_graph(s);
        let q = r.random_range(2..=4.min(n));
        let p = build_ch_partition(&closure, random_cores(n, q, &mut r)).unwrap();
        let (d, _) = gsp2_run(&a, &p, &sched, &Gsp2Options::default()).unwrap();
        for v in 0..n {
            let cols: Vec<usize> = d
                .row_iter(v)
                .filter(|&(_, x)| x != 0.0)
                .map(|(c, _)| c)
                .collect();
            let expected: Vec<usize> = (0..n).filter(|&w| closure.has_edge(v, w)).collect();
            assert_eq!(cols, expected, "row {v}");
        }
    }
}

#[test]
fn worker_count_does_not_change_output() {
    let sys = gen_system(
        SystemKind::Chain,
        600,
        &GenParams {
            bandwidth: 6,
            ..GenParams::default()
        },
    )
    .unwrap();
    let x0 = sp2_initial(&sys.matrix, None).unwrap();
    let out = sm_sp2(
        &sys.matrix,
        &Sp2Config::new(sys.occupied as f64).with_tau(1e-5),
    )
    .unwrap();
    let g = SparsityGraph::from_matrix(&out.density);
    let cores: Vec<Vec<usize>> = (0..8).map(|k| (k * 75..(k + 1) * 75).collect()).collect();
    let p = build_ch_partition(&g, cores).unwrap();
    // Halos from the sparsity of D only approximate the result, so rows from
    // different parts agree to roughly the threshold.
    let opts = |workers| Gsp2Options {
        workers,
        symmetry_tol: 1e-4,
    };
    let (base, _) = gsp2_run(&x0, &p, &out.schedule, &opts(1)).unwrap();
    assert!((base.trace() - sys.occupied as f64).abs() < 1e-2);
    for workers in [2, 4, 8] {
        let (d, m) = gsp2_run(&x0, &p, &out.schedule, &opts(workers)).unwrap();
        assert_eq!(d, base);
        assert_eq!(m.workers, workers);
    }
}

#[test]
fn single_part_equals_full_evaluation() {
    let mut r = rng(12);
    let a = unit_scaled(&random_symmetric(50, 0.08, &mut r));
    let sched = schedule(&[false, true, true]);
    let g = SparsityGraph::from_matrix(&a);
    let p = build_ch_partition(&g, vec![(0..50).collect()]).unwrap();
    let (d, m) = gsp2_run(&a, &p, &sched, &Gsp2Options::default()).unwrap();
    assert!(
        d.max_abs_diff(&thresholded_poly_apply(&a, &sched).result)
            .unwrap()
            <= 1e-12
    );
    assert_eq!(m.total_flops(), 3 * 50u128.pow(3));
}

#[test]
fn synchronized_mode_tracks_full_sp2() {
    let sys = gen_system(
        SystemKind::Chain,
        240,
        &GenParams {
            bandwidth: 2,
            ..GenParams::default()
        },
    )
    .unwrap();
    let full = sm_sp2(&sys.matrix, &Sp2Config::new(sys.occupied as f64)).unwrap();
    let s = full.schedule.len() as u32;
    let h = SparsityGraph::from_matrix(&sys.matrix).structural_polynomial_graph(s);
    let cores: Vec<Vec<usize>> = (0..4).map(|k| (k * 60..(k + 1) * 60).collect()).collect();
    let p = build_ch_partition(&h, cores).unwrap();
    let sync = gsp2_sync_sp2(
        &full.initial,
        &p,
        &Sp2Config::new(sys.occupied as f64),
        &Gsp2Options::default(),
    )
    .unwrap();
    assert!(sync.converged);
    assert_eq!(sync.schedule, full.schedule);
    assert!(sync.density.max_abs_diff(&full.density).unwrap() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exactness_property(
        n in 20usize..120,
        seed in any::<u64>(),
        polys in prop::collection::vec(any::<bool>(), 1..=3),
        q_exp in 1u32..=4,
    ) {
        let mut r = rng(seed);
        let a = unit_scaled(&random_symmetric(n, 0.05, &mut r));
        let sched = schedule(&polys);
        let h = SparsityGraph::from_matrix(&a).structural_polynomial_graph(polys.len() as u32);
        let p = build_ch_partition(&h, random_cores(n, 2usize.pow(q_exp), &mut r)).unwrap();
        let (d, _) = gsp2_run(&a, &p, &sched, &Gsp2Options { workers: 2, ..Gsp2Options::default() }).unwrap();
        prop_assert!(max_diff(&d, &naive_poly(&a, &sched)) <= 1e-12);
    }
}
