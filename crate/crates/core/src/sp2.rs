//! Second-order spectral projection (SP2) on sparse matrices and the generic
//! thresholded-polynomial evaluator it records its work for.
//!
//! Each SP2 step applies either `X^2` or `2X - X^2`, whichever moves the
//! trace closer to the target occupation, then drops small off-diagonal
//! entries. The realized branch sequence and thresholds form a
//! [`PolySchedule`] that can be replayed on any matrix, in particular on the
//! core-halo submatrices of the partitioned evaluator.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::spmat::{MatrixError, SymSparseMatrix};

#[derive(Debug, Error)]
pub enum Sp2Error {
    #[error("spectral bounds must satisfy min < max, got [{min}, {max}]")]
    InvalidBounds { min: f64, max: f64 },
    #[error("target occupation {nocc} must lie strictly between 0 and n = {n}")]
    InvalidOccupation { nocc: f64, n: usize },
    #[error("max_iter must be at least 1")]
    InvalidMaxIter,
    #[error("threshold must be a non-negative number, got {0}")]
    InvalidThreshold(f64),
    #[error("schedule line {line}: {reason}")]
    ScheduleSyntax { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// One of the two SP2 branch polynomials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolyKind {
    /// `X^2`
    Square,
    /// `2X - X^2`
    DoubleMinusSquare,
}

impl PolyKind {
    pub fn tag(self) -> &'static str {
        match self {
            PolyKind::Square => "SQUARE",
            PolyKind::DoubleMinusSquare => "DMS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyStep {
    pub poly: PolyKind,
    /// Threshold applied after the polynomial.
    pub tau: f64,
}

/// Ordered `(polynomial, threshold)` steps; the first step is applied first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolySchedule {
    steps: Vec<PolyStep>,
}

impl PolySchedule {
    pub fn new(steps: Vec<PolyStep>) -> Result<Self, Sp2Error> {
        if let Some(s) = steps.iter().find(|s| s.tau.is_nan() || s.tau < 0.0) {
            return Err(Sp2Error::InvalidThreshold(s.tau));
        }
        Ok(Self { steps })
    }

    pub fn push(&mut self, poly: PolyKind, tau: f64) -> Result<(), Sp2Error> {
        if tau.is_nan() || tau < 0.0 {
            return Err(Sp2Error::InvalidThreshold(tau));
        }
        self.steps.push(PolyStep { poly, tau });
        Ok(())
    }

    pub fn steps(&self) -> &[PolyStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Threshold of the last step, zero for an empty schedule.
    pub fn final_tau(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.tau)
    }

    pub fn branches(&self) -> impl Iterator<Item = PolyKind> + '_ {
        self.steps.iter().map(|s| s.poly)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, Sp2Error> {
        fs::read_to_string(path)?.parse()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        fs::write(path, self.to_string())
    }
}

/// One line per step: `step k: SQUARE|DMS tau=<value>`, `k` counting from 1.
impl fmt::Display for PolySchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, s) in self.steps.iter().enumerate() {
            writeln!(f, "step {}: {} tau={:e}", k + 1, s.poly.tag(), s.tau)?;
        }
        Ok(())
    }
}

impl FromStr for PolySchedule {
    type Err = Sp2Error;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut steps = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let err = |reason: &str| Sp2Error::ScheduleSyntax {
                line,
                reason: reason.to_string(),
            };
            let rest = t
                .strip_prefix("step")
                .ok_or_else(|| err("expected 'step'"))?;
            let (num, body) = rest.split_once(':').ok_or_else(|| err("expected ':'"))?;
            let k: usize = num
                .trim()
                .parse()
                .map_err(|_| err("step number is not an integer"))?;
            if k != steps.len() + 1 {
                return Err(err(&format!(
                    "expected step {}, found {k}",
                    steps.len() + 1
                )));
            }
            let mut fields = body.split_whitespace();
            let poly = match fields.next() {
                Some("SQUARE") => PolyKind::Square,
                Some("DMS") => PolyKind::DoubleMinusSquare,
                _ => return Err(err("polynomial must be SQUARE or DMS")),
            };
            let tau: f64 = fields
                .next()
                .and_then(|f| f.strip_prefix("tau="))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err("expected tau=<value>"))?;
            if fields.next().is_some() {
                return Err(err("trailing fields"));
            }
            if tau.is_nan() || tau < 0.0 || tau.is_infinite() {
                return Err(err("tau must be a finite non-negative number"));
            }
            steps.push(PolyStep { poly, tau });
        }
        Ok(Self { steps })
    }
}

/// Interval assumed to contain the spectrum of the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBounds {
    pub min: f64,
    pub max: f64,
}

/// Gershgorin interval of a symmetric matrix.
pub fn gershgorin_bounds(h: &SymSparseMatrix) -> SpectralBounds {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..h.n() {
        let radius: f64 = h
            .row_iter(i)
            .filter(|&(j, _)| j != i)
            .map(|(_, v)| v.abs())
            .sum();
        let d = h.value(i, i);
        lo = lo.min(d - radius);
        hi = hi.max(d + radius);
    }
    SpectralBounds { min: lo, max: hi }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sp2Config {
    /// Target trace of the density matrix.
    pub nocc: f64,
    /// Threshold applied after every step.
    pub tau: f64,
    pub max_iter: usize,
    /// Tolerance on both the trace error and the relative idempotency residual.
    pub conv_tol: f64,
    /// Spectral interval of `H`; Gershgorin bounds when `None`.
    pub bounds: Option<SpectralBounds>,
}

impl Sp2Config {
    pub fn new(nocc: f64) -> Self {
        Self {
            nocc,
            tau: 0.0,
            max_iter: 30,
            conv_tol: 1e-10,
            bounds: None,
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self, n: usize) -> Result<(), Sp2Error> {
        if !(self.nocc > 0.0 && self.nocc < n as f64) {
            return Err(Sp2Error::InvalidOccupation { nocc: self.nocc, n });
        }
        if self.max_iter == 0 {
            return Err(Sp2Error::InvalidMaxIter);
        }
        if self.tau.is_nan() || self.tau < 0.0 {
            return Err(Sp2Error::InvalidThreshold(self.tau));
        }
        Ok(())
    }
}

/// `X_0 = (max I - H) / (max - min)`: maps the spectrum of `H` into `[0, 1]`
/// with its order reversed. Uses Gershgorin bounds when `bounds` is `None`.
pub fn sp2_initial(
    h: &SymSparseMatrix,
    bounds: Option<SpectralBounds>,
) -> Result<SymSparseMatrix, Sp2Error> {
    let b = bounds.unwrap_or_else(|| gershgorin_bounds(h));
    if !b.min.is_finite() || !b.max.is_finite() || b.min >= b.max {
        return Err(Sp2Error::InvalidBounds {
            min: b.min,
            max: b.max,
        });
    }
    let width = b.max - b.min;
    let upper: Vec<(usize, usize, f64)> = h
        .upper_entries()
        .map(|(i, j, v)| {
            if i == j {
                (i, j, (b.max - v) / width)
            } else {
                (i, j, -v / width)
            }
        })
        .collect();
    Ok(SymSparseMatrix::from_sorted_upper_unchecked(h.n(), upper))
}

/// Branch whose result has trace closer to `nocc`; ties go to `Square`.
pub fn choose_branch(trace_x: f64, trace_x2: f64, nocc: f64) -> PolyKind {
    let square = (trace_x2 - nocc).abs();
    let dms = (2.0 * trace_x - trace_x2 - nocc).abs();
    if square <= dms {
        PolyKind::Square
    } else {
        PolyKind::DoubleMinusSquare
    }
}

fn apply_poly(x: &SymSparseMatrix, sq: SymSparseMatrix, poly: PolyKind) -> SymSparseMatrix {
    match poly {
        PolyKind::Square => sq,
        PolyKind::DoubleMinusSquare => x
            .linear_combination(2.0, &sq, -1.0)
            .expect("operands share a dimension"),
    }
}

/// One unthresholded SP2 step.
pub fn sp2_step(x: &SymSparseMatrix, nocc: f64) -> (SymSparseMatrix, PolyKind) {
    let sq = x.square();
    let poly = choose_branch(x.trace(), sq.trace(), nocc);
    (apply_poly(x, sq, poly), poly)
}

/// `||X^2 - X||_F / ||X||_F`, or the absolute residual when `X` is zero.
fn idempotency_residual(x: &SymSparseMatrix, sq: &SymSparseMatrix) -> f64 {
    let r = sq
        .linear_combination(1.0, x, -1.0)
        .expect("operands share a dimension")
        .frobenius_norm();
    let norm = x.frobenius_norm();
    if norm > 0.0 {
        r / norm
    } else {
        r
    }
}

#[derive(Debug, Clone)]
pub struct Sp2Outcome {
    pub density: SymSparseMatrix,
    pub schedule: PolySchedule,
    /// The normalized starting matrix the schedule applies to.
    pub initial: SymSparseMatrix,
    pub bounds: SpectralBounds,
    pub converged: bool,
    pub trace_error: f64,
    pub idempotency_residual: f64,
}

/// Runs SP2 from `H` until converged or `cfg.max_iter` steps have been taken.
///
/// Converged means `|tr X - nocc| < conv_tol` and a relative idempotency
/// residual below `conv_tol`. With a positive threshold the residual has a
/// floor set by the dropped entries, so the run also stops once the residual
/// is below `1e-2` and no smaller than it was two steps earlier. A run that
/// exhausts `max_iter` returns its last iterate with `converged = false`.
pub fn sm_sp2(h: &SymSparseMatrix, cfg: &Sp2Config) -> Result<Sp2Outcome, Sp2Error> {
    cfg.validate(h.n())?;
    let bounds = cfg.bounds.unwrap_or_else(|| gershgorin_bounds(h));
    let initial = sp2_initial(h, Some(bounds))?;
    let mut x = initial.clone();
    let mut schedule = PolySchedule::default();
    let mut residuals: Vec<f64> = Vec::new();
    let mut converged = false;
    let (mut trace_error, mut residual);
    loop {
        let sq = x.square();
        let tr = x.trace();
        trace_error = (tr - cfg.nocc).abs();
        residual = idempotency_residual(&x, &sq);
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
        let poly = choose_branch(tr, sq.trace(), cfg.nocc);
        x = apply_poly(&x, sq, poly).threshold(cfg.tau)?;
        schedule.push(poly, cfg.tau)?;
    }
    Ok(Sp2Outcome {
        density: x,
        schedule,
        initial,
        bounds,
        converged,
        trace_error,
        idempotency_residual: residual,
    })
}

/// Result of replaying a schedule, with the entries each step dropped.
#[derive(Debug, Clone)]
pub struct PolyEvaluation {
    pub result: SymSparseMatrix,
    /// Index pairs `(i, j)`, `i < j`, removed by the threshold of each step.
    pub dropped: Vec<Vec<(usize, usize)>>,
}

/// Applies every `(polynomial, threshold)` step of `sched` to `a` in order.
pub fn thresholded_poly_apply(a: &SymSparseMatrix, sched: &PolySchedule) -> PolyEvaluation {
    let mut x = a.clone();
    let mut dropped = Vec::with_capacity(sched.len());
    for step in sched.steps() {
        let sq = x.square();
        let (next, gone) = apply_poly(&x, sq, step.poly)
            .threshold_with_dropped(step.tau)
            .expect("schedule thresholds are validated on construction");
        x = next;
        dropped.push(gone);
    }
    PolyEvaluation { result: x, dropped }
}
