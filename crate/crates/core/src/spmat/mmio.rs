//! Matrix Market coordinate format, real symmetric only.
//!
//! Indices are 1-based on disk. The writer emits the lower triangle (the
//! Matrix Market convention for symmetric files) with 17 significant digits,
//! which round-trips every finite `f64` exactly.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::{MatrixError, SymSparseMatrix};

#[derive(Debug, Error)]
pub enum MatrixMarketError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("matrix is declared '{0}', only 'symmetric' is supported")]
    NotSymmetric(String),
    #[error("line {line}: malformed size line")]
    MalformedSize { line: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("line {line}: malformed entry")]
    MalformedEntry { line: usize },
    #[error("line {line}: index ({row}, {col}) out of range for n = {n}")]
    IndexOutOfRange {
        line: usize,
        row: usize,
        col: usize,
        n: usize,
    },
    #[error("duplicate entry ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },
    #[error("expected {expected} entries, found {found}")]
    EntryCount { expected: usize, found: usize },
}

pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<SymSparseMatrix, MatrixMarketError> {
    read_matrix_market(BufReader::new(File::open(path)?))
}

pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<SymSparseMatrix, MatrixMarketError> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l?,
        None => return Err(MatrixMarketError::MalformedHeader("empty file".into())),
    };
    parse_header(&header)?;

    let mut size: Option<(usize, usize)> = None;
    let mut triplets = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let mut fields = t.split_whitespace();
        match size {
            None => {
                let mut next = || fields.next().and_then(|s| s.parse::<usize>().ok());
                let (rows, cols, nnz) = match (next(), next(), next()) {
                    (Some(r), Some(c), Some(z)) => (r, c, z),
                    _ => return Err(MatrixMarketError::MalformedSize { line: lineno }),
                };
                if rows != cols {
                    return Err(MatrixMarketError::NotSquare { rows, cols });
                }
                size = Some((rows, nnz));
                triplets.reserve(nnz);
            }
            Some((n, _)) => {
                let row = fields.next().and_then(|s| s.parse::<usize>().ok());
                let col = fields.next().and_then(|s| s.parse::<usize>().ok());
                let val = fields.next().and_then(|s| s.parse::<f64>().ok());
                let (row, col, val) = match (row, col, val, fields.next()) {
                    (Some(r), Some(c), Some(v), None) if v.is_finite() => (r, c, v),
                    _ => return Err(MatrixMarketError::MalformedEntry { line: lineno }),
                };
                if row == 0 || col == 0 || row > n || col > n {
                    return Err(MatrixMarketError::IndexOutOfRange {
                        line: lineno,
                        row,
                        col,
                        n,
                    });
                }
                triplets.push((row - 1, col - 1, val));
            }
        }
    }
    let (n, nnz) = size.ok_or(MatrixMarketError::MalformedSize { line: 0 })?;
    if triplets.len() != nnz {
        return Err(MatrixMarketError::EntryCount {
            expected: nnz,
            found: triplets.len(),
        });
    }
    SymSparseMatrix::from_triplets(n, triplets).map_err(|e| match e {
        MatrixError::DuplicateEntry { row, col } => MatrixMarketError::DuplicateEntry {
            row: row + 1,
            col: col + 1,
        },
        other => unreachable!("entries were validated before assembly: {other}"),
    })
}

fn parse_header(line: &str) -> Result<(), MatrixMarketError> {
    let fields: Vec<String> = line
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" {
        return Err(MatrixMarketError::MalformedHeader(line.to_string()));
    }
    if fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(MatrixMarketError::MalformedHeader(format!(
            "unsupported object/format in '{line}'"
        )));
    }
    if fields[3] != "real" {
        return Err(MatrixMarketError::MalformedHeader(format!(
            "unsupported field '{}'",
            fields[3]
        )));
    }
    if fields[4] != "symmetric" {
        return Err(MatrixMarketError::NotSymmetric(fields[4].clone()));
    }
    Ok(())
}

pub fn save_matrix_market(
    path: impl AsRef<Path>,
    m: &SymSparseMatrix,
) -> Result<(), MatrixMarketError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix_market(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn write_matrix_market<W: Write>(w: &mut W, m: &SymSparseMatrix) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", m.n(), m.n(), m.nnz())?;
    for i in 0..m.n() {
        for (j, v) in m.row_iter(i).take_while(|&(j, _)| j <= i) {
            writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}
