//! METIS graph files: a header `n m [fmt]` followed by one line of 1-based
//! neighbors per vertex. Only unweighted graphs (`fmt` absent or `0`) are
//! accepted.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use super::SparsityGraph;

#[derive(Debug, Error)]
pub enum MetisGraphError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed header line")]
    MalformedHeader,
    #[error("weighted graphs (fmt {0}) are not supported")]
    Weighted(String),
    #[error("line {line}: malformed neighbor '{token}'")]
    MalformedNeighbor { line: usize, token: String },
    #[error("line {line}: neighbor {neighbor} out of range 1..={n}")]
    NeighborOutOfRange {
        line: usize,
        neighbor: usize,
        n: usize,
    },
    #[error("expected {expected} vertex lines, found {found}")]
    VertexCount { expected: usize, found: usize },
    #[error("header declares {declared} edges but adjacency lists hold {found}")]
    EdgeCount { declared: usize, found: usize },
    #[error("edge ({u}, {v}) is not listed in both directions")]
    Asymmetric { u: usize, v: usize },
}

pub fn load_metis_graph(path: impl AsRef<Path>) -> Result<SparsityGraph, MetisGraphError> {
    read_metis_graph(BufReader::new(File::open(path)?))
}

pub fn read_metis_graph<R: BufRead>(reader: R) -> Result<SparsityGraph, MetisGraphError> {
    let mut header: Option<(usize, usize)> = None;
    let mut adj: Vec<Vec<usize>> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim_start().starts_with('%') {
            continue;
        }
        match header {
            None => {
                if line.trim().is_empty() {
                    continue;
                }
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() < 2 || f.len() > 4 {
                    return Err(MetisGraphError::MalformedHeader);
                }
                let n = f[0].parse().map_err(|_| MetisGraphError::MalformedHeader)?;
                let m = f[1].parse().map_err(|_| MetisGraphError::MalformedHeader)?;
                if let Some(fmt) = f.get(2) {
                    if !fmt.trim_start_matches('0').is_empty() {
                        return Err(MetisGraphError::Weighted(fmt.to_string()));
                    }
                }
                header = Some((n, m));
                adj.reserve(n);
            }
            Some((n, _)) => {
                if adj.len() == n {
                    if line.trim().is_empty() {
                        continue;
                    }
                    return Err(MetisGraphError::VertexCount {
                        expected: n,
                        found: n + 1,
                    });
                }
                let mut list = Vec::new();
                for tok in line.split_whitespace() {
                    let v: usize = tok
                        .parse()
                        .map_err(|_| MetisGraphError::MalformedNeighbor {
                            line: lineno,
                            token: tok.to_string(),
                        })?;
                    if v == 0 || v > n {
                        return Err(MetisGraphError::NeighborOutOfRange {
                            line: lineno,
                            neighbor: v,
                            n,
                        });
                    }
                    list.push(v - 1);
                }
                adj.push(list);
            }
        }
    }
    let (n, m) = header.ok_or(MetisGraphError::MalformedHeader)?;
    if adj.len() != n {
        return Err(MetisGraphError::VertexCount {
            expected: n,
            found: adj.len(),
        });
    }
    let g = SparsityGraph::from_lists(adj);
    for u in 0..n {
        if let Some(&v) = g
            .neighbors(u)
            .iter()
            .find(|&&v| g.neighbors(v).binary_search(&u).is_err())
        {
            return Err(MetisGraphError::Asymmetric { u: u + 1, v: v + 1 });
        }
    }
    if g.edge_count() != m {
        return Err(MetisGraphError::EdgeCount {
            declared: m,
            found: g.edge_count(),
        });
    }
    Ok(g)
}

pub fn save_metis_graph(path: impl AsRef<Path>, g: &SparsityGraph) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_metis_graph(&mut w, g)?;
    w.flush()
}

pub fn write_metis_graph<W: Write>(w: &mut W, g: &SparsityGraph) -> io::Result<()> {
    writeln!(w, "{} {}", g.n(), g.edge_count())?;
    for v in 0..g.n() {
        let line: Vec<String> = g.neighbors(v).iter().map(|u| (u + 1).to_string()).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}
