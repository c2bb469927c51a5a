mod common;

use common::{random_cores, random_graph, rng};
use corehalo::anneal::{
    accept_move, apply_move, sa_delta, sa_refine, trace_csv, Move, SaConfig, Temperature,
};
use corehalo::{build_ch_partition, objective_sum_cubes, ChPartition};
use proptest::prelude::*;
use rand::Rng;

fn legal_moves(p: &ChPartition) -> Vec<Move> {
    let mut out = Vec::new();
    for part in 0..p.q() {
        for &w in p.halo(part) {
            if p.core(p.owner(w)).len() > 1 {
                out.push(Move { part, vertex: w });
            }
        }
    }
    out
}

/// Objective after the move, recomputed from scratch with fresh cores.
fn recomputed(p: &ChPartition, mv: Move, g: &corehalo::SparsityGraph) -> i128 {
    let mut cores = p.cores().to_vec();
    let from = p.owner(mv.vertex);
    cores[from].retain(|&v| v != mv.vertex);
    cores[mv.part].push(mv.vertex);
    cores[mv.part].sort_unstable();
    objective_sum_cubes(&build_ch_partition(g, cores).unwrap()) as i128
}

#[test]
fn delta_matches_recomputation_on_ten_thousand_moves() {
    let mut r = rng(101);
    let mut checked = 0;
    let mut mismatches = 0;
    while checked < 10_000 {
        let n = r.random_range(6..80);
        let q = r.random_range(2..=8.min(n));
        let g = random_graph(n, r.random_range(0.03..0.2), &mut r);
        let p = build_ch_partition(&g, random_cores(n, q, &mut r)).unwrap();
        let moves = legal_moves(&p);
        if moves.is_empty() {
            continue;
        }
        for _ in 0..20 {
            let mv = moves[r.random_range(0..moves.len())];
            let d = sa_delta(&p, mv, &g).unwrap();
            if d != recomputed(&p, mv, &g) - objective_sum_cubes(&p) as i128 {
                mismatches += 1;
            }
            checked += 1;
        }
    }
    assert_eq!(mismatches, 0);
}

#[test]
fn acceptance_frequency_follows_boltzmann_factor() {
    let mut r = rng(5);
    for (delta, iteration) in [(1i128, 1usize), (1, 2), (3, 1), (2, 3)] {
        let t = Temperature::Reciprocal.at(iteration);
        let expected = (-(delta as f64) / t).exp();
        let samples = 10_000;
        let hits = (0..samples)
            .filter(|_| accept_move(delta, t, &mut r))
            .count();
        let freq = hits as f64 / samples as f64;
        let se = (expected * (1.0 - expected) / samples as f64).sqrt();
        assert!(
            (freq - expected).abs() <= 3.0 * se,
            "delta {delta}, t {t}: {freq} vs {expected}"
        );
    }
}

#[test]
fn defaults() {
    let cfg = SaConfig::default();
    assert_eq!(cfg.iterations, 100);
    assert_eq!(cfg.temperature, Temperature::Reciprocal);
    assert_eq!(Temperature::Reciprocal.at(4), 0.25);
}

#[test]
fn refinement_is_seed_deterministic() {
    let mut r = rng(3);
    let g = random_graph(120, 0.04, &mut r);
    let p = build_ch_partition(&g, random_cores(120, 6, &mut r)).unwrap();
    let cfg = SaConfig {
        iterations: 300,
        seed: 9,
        ..SaConfig::default()
    };
    let a = sa_refine(&g, &p, &cfg).unwrap();
    let b = sa_refine(&g, &p, &cfg).unwrap();
    assert_eq!(a.best, b.best);
    assert_eq!(trace_csv(&a.trace), trace_csv(&b.trace));
}

#[test]
fn trace_is_consistent_with_moves() {
    let mut r = rng(4);
    let g = random_graph(80, 0.06, &mut r);
    let mut p = build_ch_partition(&g, random_cores(80, 5, &mut r)).unwrap();
    let out = sa_refine(
        &g,
        &p,
        &SaConfig {
            iterations: 200,
            seed: 1,
            ..SaConfig::default()
        },
    )
    .unwrap();
    for row in &out.trace {
        if let (Some((mv, d)), true) = (row.proposal, row.accepted) {
            assert_eq!(sa_delta(&p, mv, &g).unwrap(), d);
            p = apply_move(&p, mv, &g).unwrap();
        }
        assert_eq!(objective_sum_cubes(&p), row.current);
    }
    assert_eq!(p, out.last);
    assert_eq!(
        objective_sum_cubes(&out.best),
        out.trace.iter().map(|r| r.best).min().unwrap()
    );
}

proptest! {
    #[test]
    fn refined_objective_never_exceeds_initial(n in 4usize..60, q in 2usize..6, seed in any::<u64>(), iters in 1usize..200) {
        let mut r = rng(seed);
        let g = random_graph(n, 0.1, &mut r);
        let p = build_ch_partition(&g, random_cores(n, q.min(n), &mut r)).unwrap();
        let out = sa_refine(&g, &p, &SaConfig { iterations: iters, seed, ..SaConfig::default() }).unwrap();
        prop_assert!(objective_sum_cubes(&out.best) <= objective_sum_cubes(&p));
        prop_assert!(out.best.cores().iter().all(|c| !c.is_empty()));
        prop_assert_eq!(out.best.q(), p.q());
        corehalo::partition::validate_cores(&g, out.best.cores()).unwrap();
    }
}
