//! Synthetic symmetric test systems.
//!
//! Every generator puts `-2` or `+2` on the diagonal and keeps each row's
//! off-diagonal absolute sum at most `1.5`. By Gershgorin's theorem the
//! spectrum then splits into `[-3.5, -0.5]` and `[0.5, 3.5]`, and the number
//! of negative diagonal entries is the number of eigenvalues below zero.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::spmat::SymSparseMatrix;

const ROW_SUM: f64 = 1.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("n must be at least 1")]
    Empty,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("unknown system kind '{0}'")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Chain,
    Grid2d,
    RandomGeometric,
    Banded,
}

impl SystemKind {
    pub const ALL: [SystemKind; 4] = [
        SystemKind::Chain,
        SystemKind::Grid2d,
        SystemKind::RandomGeometric,
        SystemKind::Banded,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Chain => "chain",
            SystemKind::Grid2d => "grid2d",
            SystemKind::RandomGeometric => "random-geometric",
            SystemKind::Banded => "banded",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemKind {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SystemKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| GenError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenParams {
    /// Coupling range in index distance (`chain`, `banded`).
    pub bandwidth: usize,
    /// Grid row length (`grid2d`); `n` must be a multiple of it. `None` means
    /// a square grid.
    pub width: Option<usize>,
    /// Connection radius in the unit square (`random-geometric`).
    pub radius: f64,
    /// Probability that an in-band pair is coupled (`banded`).
    pub density: f64,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            bandwidth: 4,
            width: None,
            radius: 0.1,
            density: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSystem {
    pub matrix: SymSparseMatrix,
    /// Number of eigenvalues below zero.
    pub occupied: usize,
}

pub fn gen_system(
    kind: SystemKind,
    n: usize,
    params: &GenParams,
) -> Result<GeneratedSystem, GenError> {
    if n == 0 {
        return Err(GenError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (diag, off) = match kind {
        SystemKind::Chain => (alternating(n), chain(n, params.bandwidth)?),
        SystemKind::Grid2d => {
            let width = grid_width(n, params.width)?;
            let diag = (0..n)
                .map(|v| {
                    if (v / width + v % width) % 2 == 0 {
                        -2.0
                    } else {
                        2.0
                    }
                })
                .collect();
            (diag, grid(n, width))
        }
        SystemKind::RandomGeometric => (
            random_signs(n, &mut rng),
            random_geometric(n, params.radius, &mut rng)?,
        ),
        SystemKind::Banded => (
            random_signs(n, &mut rng),
            banded(n, params.bandwidth, params.density, &mut rng)?,
        ),
    };
    let occupied = diag.iter().filter(|&&d| d < 0.0).count();
    let triplets = diag
        .into_iter()
        .enumerate()
        .map(|(i, d)| (i, i, d))
        .chain(off);
    let matrix = SymSparseMatrix::from_triplets(n, triplets)
        .expect("generated entries are distinct and in range");
    Ok(GeneratedSystem { matrix, occupied })
}

fn alternating(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i % 2 == 0 { -2.0 } else { 2.0 })
        .collect()
}

fn random_signs(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.random::<bool>() { -2.0 } else { 2.0 })
        .collect()
}

/// Hopping `-c * exp(-alpha (d - 1))` between sites at distance `d <= b`,
/// decaying by a factor of 1000 over the band.
fn chain(n: usize, b: usize) -> Result<Vec<(usize, usize, f64)>, GenError> {
    if b == 0 {
        return Err(GenError::InvalidParam(
            "chain bandwidth must be at least 1".into(),
        ));
    }
    let alpha = 1000f64.ln() / b as f64;
    let w: Vec<f64> = (1..=b).map(|d| (-alpha * (d - 1) as f64).exp()).collect();
    let c = ROW_SUM / (2.0 * w.iter().sum::<f64>());
    let mut out = Vec::new();
    for i in 0..n {
        for d in 1..=b.min(n - 1 - i) {
            out.push((i, i + d, -c * w[d - 1]));
        }
    }
    Ok(out)
}

fn grid_width(n: usize, width: Option<usize>) -> Result<usize, GenError> {
    let width = match width {
        Some(w) => w,
        None => {
            let r = (n as f64).sqrt().round() as usize;
            if r * r != n {
                return Err(GenError::InvalidParam(format!(
                    "n = {n} is not a square; give a grid width"
                )));
            }
            r
        }
    };
    if width == 0 || !n.is_multiple_of(width) {
        return Err(GenError::InvalidParam(format!(
            "grid width {width} does not divide n = {n}"
        )));
    }
    Ok(width)
}

fn grid(n: usize, width: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for v in 0..n {
        if (v + 1) % width != 0 {
            out.push((v, v + 1, -0.35));
        }
        if v + width < n {
            out.push((v, v + width, -0.35));
        }
    }
    out
}

fn random_geometric(
    n: usize,
    radius: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, usize, f64)>, GenError> {
    if !(radius > 0.0 && radius <= std::f64::consts::SQRT_2) {
        return Err(GenError::InvalidParam(format!(
            "radius must be in (0, sqrt 2], got {radius}"
        )));
    }
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    // Bucket points into cells of side `radius` so only nearby cells are compared.
    let cells = ((1.0 / radius).floor() as usize).clamp(1, 1024);
    let cell_of = |x: f64| ((x * cells as f64) as usize).min(cells - 1);
    let mut grid = vec![Vec::new(); cells * cells];
    for (i, &(x, y)) in pts.iter().enumerate() {
        grid[cell_of(x) * cells + cell_of(y)].push(i);
    }
    let mut raw = Vec::new();
    for (i, &(x, y)) in pts.iter().enumerate() {
        let (cx, cy) = (cell_of(x), cell_of(y));
        for gx in cx.saturating_sub(1)..=(cx + 1).min(cells - 1) {
            for gy in cy.saturating_sub(1)..=(cy + 1).min(cells - 1) {
                for &j in &grid[gx * cells + gy] {
                    if j <= i {
                        continue;
                    }
                    let d = ((x - pts[j].0).powi(2) + (y - pts[j].1).powi(2)).sqrt();
                    if d < radius {
                        raw.push((i, j, -(-d / radius).exp()));
                    }
                }
            }
        }
    }
    raw.sort_unstable_by_key(|&(i, j, _)| (i, j));
    Ok(scale_rows(n, raw))
}

fn banded(
    n: usize,
    b: usize,
    density: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, usize, f64)>, GenError> {
    if b == 0 {
        return Err(GenError::InvalidParam(
            "banded bandwidth must be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(GenError::InvalidParam(format!(
            "density must be in [0, 1], got {density}"
        )));
    }
    let mut raw = Vec::new();
    for i in 0..n {
        for j in i + 1..=(i + b).min(n - 1) {
            if rng.random::<f64>() < density {
                let v = rng.random_range(-1.0..1.0);
                if v != 0.0 {
                    raw.push((i, j, v));
                }
            }
        }
    }
    Ok(scale_rows(n, raw))
}

/// Scales all entries by one factor so the largest row sum is `ROW_SUM`.
fn scale_rows(n: usize, raw: Vec<(usize, usize, f64)>) -> Vec<(usize, usize, f64)> {
    let mut sums = vec![0.0f64; n];
    for &(i, j, v) in &raw {
        sums[i] += v.abs();
        sums[j] += v.abs();
    }
    let max = sums.into_iter().fold(0.0, f64::max);
    if max == 0.0 {
        return raw;
    }
    let f = ROW_SUM / max;
    raw.into_iter().map(|(i, j, v)| (i, j, v * f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sgraph::SparsityGraph;
    use crate::sp2::gershgorin_bounds;

    fn params(bandwidth: usize) -> GenParams {
        GenParams {
            bandwidth,
            ..GenParams::default()
        }
    }

    #[test]
    fn chain_bandwidth_one_is_a_path() {
        let s = gen_system(SystemKind::Chain, 6, &params(1)).unwrap();
        let g = SparsityGraph::from_matrix(&s.matrix);
        assert_eq!(
            g,
            SparsityGraph::from_edges(6, (1..6).map(|i| (i - 1, i))).unwrap()
        );
        assert_eq!(s.occupied, 3);
    }

    #[test]
    fn grid_three_by_three_has_twelve_edges() {
        let s = gen_system(SystemKind::Grid2d, 9, &GenParams::default()).unwrap();
        assert_eq!(SparsityGraph::from_matrix(&s.matrix).edge_count(), 12);
        assert!(gen_system(SystemKind::Grid2d, 10, &GenParams::default()).is_err());
        let rect = GenParams {
            width: Some(5),
            ..GenParams::default()
        };
        assert_eq!(
            SparsityGraph::from_matrix(&gen_system(SystemKind::Grid2d, 10, &rect).unwrap().matrix)
                .edge_count(),
            13
        );
    }

    #[test]
    fn seeded_generators_are_reproducible() {
        for kind in [SystemKind::RandomGeometric, SystemKind::Banded] {
            let p = GenParams {
                seed: 42,
                radius: 0.2,
                ..GenParams::default()
            };
            assert_eq!(
                gen_system(kind, 150, &p).unwrap(),
                gen_system(kind, 150, &p).unwrap()
            );
            let q = GenParams {
                seed: 43,
                ..p.clone()
            };
            assert_ne!(
                gen_system(kind, 150, &p).unwrap(),
                gen_system(kind, 150, &q).unwrap()
            );
        }
    }

    #[test]
    fn spectra_are_gapped() {
        for kind in SystemKind::ALL {
            let p = GenParams {
                width: Some(10),
                ..GenParams::default()
            };
            let s = gen_system(kind, 100, &p).unwrap();
            let b = gershgorin_bounds(&s.matrix);
            assert!(b.min >= -3.5 - 1e-12 && b.max <= 3.5 + 1e-12, "{kind}");
            for i in 0..100 {
                let off: f64 = s
                    .matrix
                    .row_iter(i)
                    .filter(|&(j, _)| j != i)
                    .map(|(_, v)| v.abs())
                    .sum();
                assert!(off <= ROW_SUM + 1e-12, "{kind} row {i}");
            }
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in SystemKind::ALL {
            assert_eq!(kind.name().parse::<SystemKind>().unwrap(), kind);
        }
        assert!("ring".parse::<SystemKind>().is_err());
    }
}
