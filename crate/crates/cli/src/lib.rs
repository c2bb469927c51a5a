//! Command-line front end: partitioning, SP2, partitioned SP2, sweeps over
//! part counts, and synthetic system generation.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use corehalo::anneal::{sa_refine, trace_csv, AnnealError, SaConfig};
use corehalo::generate::{gen_system, GenError, GenParams, SystemKind};
use corehalo::gsp2::{gsp2_run, Gsp2Error, Gsp2Options, DEFAULT_SYMMETRY_TOL};
use corehalo::partition::{
    bfs_block_partition, export_partition, import_partition, PartitionError,
};
use corehalo::sgraph::{load_metis_graph, partition_metrics, MetisGraphError, PartitionMetrics};
use corehalo::sp2::{sm_sp2, sp2_initial, PolySchedule, Sp2Config, Sp2Error, SpectralBounds};
use corehalo::spmat::{load_matrix_market, save_matrix_market, MatrixMarketError};
use corehalo::{build_ch_partition, ChPartition, CoreViolation, SparsityGraph};

/// Header of the partition metrics CSV.
pub const PARTITION_CSV_HEADER: &str = "name,method,sum,min,max,time_s,nno,mmpn";
/// Header of the sweep CSV.
pub const SWEEP_CSV_HEADER: &str = "q,sum_cubes,partition_time_s";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Validation(String),
    #[error(
        "SP2 did not converge: trace error {trace_error:e}, idempotency residual {residual:e}"
    )]
    NotConverged { trace_error: f64, residual: f64 },
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse(_) => 3,
            CliError::Validation(_) => 4,
            CliError::NotConverged { .. } => 5,
        }
    }
}

impl From<MatrixMarketError> for CliError {
    fn from(e: MatrixMarketError) -> Self {
        match e {
            MatrixMarketError::Io(e) => CliError::Io(e),
            e => CliError::Parse(e.to_string()),
        }
    }
}

impl From<MetisGraphError> for CliError {
    fn from(e: MetisGraphError) -> Self {
        match e {
            MetisGraphError::Io(e) => CliError::Io(e),
            e => CliError::Parse(e.to_string()),
        }
    }
}

impl From<PartitionError> for CliError {
    fn from(e: PartitionError) -> Self {
        match e {
            PartitionError::Io(e) => CliError::Io(e),
            e @ PartitionError::InvalidPartCount { .. } => CliError::Validation(e.to_string()),
            e => CliError::Parse(e.to_string()),
        }
    }
}

impl From<Sp2Error> for CliError {
    fn from(e: Sp2Error) -> Self {
        match e {
            Sp2Error::Io(e) => CliError::Io(e),
            e @ Sp2Error::ScheduleSyntax { .. } => CliError::Parse(e.to_string()),
            e => CliError::Validation(e.to_string()),
        }
    }
}

impl From<Gsp2Error> for CliError {
    fn from(e: Gsp2Error) -> Self {
        match e {
            Gsp2Error::Sp2(e) => e.into(),
            e => CliError::Validation(e.to_string()),
        }
    }
}

macro_rules! validation_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Validation(e.to_string())
            }
        }
    )*};
}

validation_error!(CoreViolation, AnnealError, GenError);

#[derive(Debug, Parser)]
#[command(
    name = "corehalo",
    version,
    about = "Core-halo partitioning and partitioned SP2"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partition a graph into cores and print one metrics CSV row.
    Partition(PartitionArgs),
    /// Run SP2 on a Hamiltonian and write the density matrix and schedule.
    Sp2(Sp2Args),
    /// Replay a schedule part by part on a core-halo partition.
    Gsp2(Gsp2Args),
    /// Sum of cubes and partitioning time for a list of part counts.
    Sweep(SweepArgs),
    /// Write a synthetic symmetric system in Matrix Market format.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Bfs,
    Import,
}

#[derive(Debug, Args)]
pub struct SaArgs {
    /// Simulated-annealing iterations after the initial partition (0 = off).
    #[arg(long, default_value_t = 0)]
    pub sa_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Halos are taken in the distance-2^s closure of the input graph.
    #[arg(long, default_value_t = 0)]
    pub halo_steps: u32,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    /// METIS graph file, or a Matrix Market matrix whose sparsity graph is used.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, value_enum, default_value = "bfs")]
    pub method: Method,
    /// Partition file to read with `--method import`.
    #[arg(long)]
    pub part_file: Option<PathBuf>,
    #[command(flatten)]
    pub sa: SaArgs,
    /// Output partition file.
    #[arg(long)]
    pub out: PathBuf,
    /// Append the metrics row to this CSV file instead of printing it.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Value of the `name` column; defaults to the graph file stem.
    #[arg(long)]
    pub name: Option<String>,
    /// Write the annealing log as CSV.
    #[arg(long)]
    pub sa_trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Sp2Args {
    #[arg(long)]
    pub matrix: PathBuf,
    /// Target occupation (trace of the density matrix).
    #[arg(long)]
    pub nocc: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub tau: f64,
    #[arg(long, default_value_t = 30)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub conv_tol: f64,
    #[command(flatten)]
    pub bounds: BoundsArgs,
    /// Output density matrix (Matrix Market).
    #[arg(long)]
    pub out: PathBuf,
    /// Output schedule file.
    #[arg(long)]
    pub schedule: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Lower spectral bound; Gershgorin bounds are used unless both are given.
    #[arg(long, requires = "eps_max", allow_negative_numbers = true)]
    pub eps_min: Option<f64>,
    #[arg(long, requires = "eps_min", allow_negative_numbers = true)]
    pub eps_max: Option<f64>,
}

impl BoundsArgs {
    fn bounds(&self) -> Option<SpectralBounds> {
        Some(SpectralBounds {
            min: self.eps_min?,
            max: self.eps_max?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HaloSource {
    /// Distance-2^s closure of the sparsity graph of H, s = schedule length.
    Structural,
    /// Sparsity graph of H itself.
    Matrix,
    /// Sparsity graph of the matrix given with `--density`.
    Density,
}

#[derive(Debug, Args)]
pub struct Gsp2Args {
    /// Hamiltonian (Matrix Market).
    #[arg(long)]
    pub matrix: PathBuf,
    /// Partition file holding the cores.
    #[arg(long)]
    pub partition: PathBuf,
    #[arg(long)]
    pub schedule: PathBuf,
    #[arg(long, env = "COREHALO_WORKERS", default_value_t = 1)]
    pub workers: usize,
    #[arg(long, value_enum, default_value = "structural")]
    pub halo: HaloSource,
    /// Density matrix whose sparsity defines the halos with `--halo density`.
    #[arg(long)]
    pub density: Option<PathBuf>,
    /// Largest row/column mismatch accepted when assembling.
    #[arg(long, default_value_t = DEFAULT_SYMMETRY_TOL)]
    pub sym_tol: f64,
    #[command(flatten)]
    pub bounds: BoundsArgs,
    /// Output density matrix (Matrix Market).
    #[arg(long)]
    pub out: PathBuf,
    /// Per-part metrics CSV.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// METIS graph file or Matrix Market matrix.
    #[arg(long)]
    pub graph: PathBuf,
    /// Comma-separated part counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64")]
    pub q_list: Vec<usize>,
    #[command(flatten)]
    pub sa: SaArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub kind: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub bandwidth: usize,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub radius: f64,
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs a parsed command; human-readable output goes to `out`.
pub fn run<W: Write>(cli: Cli, out: &mut W) -> Result<(), CliError> {
    match cli.command {
        Command::Partition(a) => cmd_partition(&a, out),
        Command::Sp2(a) => cmd_sp2(&a, out),
        Command::Gsp2(a) => cmd_gsp2(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::Gen(a) => cmd_gen(&a, out),
    }
}

/// Loads a METIS graph, or the sparsity graph of a Matrix Market file.
pub fn load_graph(path: &Path) -> Result<SparsityGraph, CliError> {
    let mut first = String::new();
    BufReader::new(File::open(path)?).read_line(&mut first)?;
    if first.starts_with("%%MatrixMarket") {
        Ok(SparsityGraph::from_matrix(&load_matrix_market(path)?))
    } else {
        Ok(load_metis_graph(path)?)
    }
}

/// Cores for `q` parts plus metrics; `q = 1` is the trivial partition.
fn partition_graph(
    g: &SparsityGraph,
    q: usize,
    sa: &SaArgs,
) -> Result<(ChPartition, PartitionMetrics), CliError> {
    let start = Instant::now();
    let cores = if q == 1 {
        vec![(0..g.n()).collect()]
    } else {
        bfs_block_partition(g, q, sa.seed)?
    };
    let (p, _) = refine(g, cores, sa)?;
    let metrics = partition_metrics(&p, start.elapsed());
    Ok((p, metrics))
}

fn refine(
    g: &SparsityGraph,
    cores: Vec<Vec<usize>>,
    sa: &SaArgs,
) -> Result<(ChPartition, Option<String>), CliError> {
    let halo_graph = if sa.halo_steps > 0 {
        g.structural_polynomial_graph(sa.halo_steps)
    } else {
        g.clone()
    };
    let p = build_ch_partition(&halo_graph, cores)?;
    if sa.sa_iters == 0 {
        return Ok((p, None));
    }
    let cfg = SaConfig {
        iterations: sa.sa_iters,
        seed: sa.seed,
        ..SaConfig::default()
    };
    let outcome = sa_refine(&halo_graph, &p, &cfg)?;
    Ok((outcome.best, Some(trace_csv(&outcome.trace))))
}

/// One partition metrics row without a trailing newline.
pub fn partition_csv_row(name: &str, method: &str, m: &PartitionMetrics) -> String {
    format!(
        "{name},{method},{},{},{},{:.6},{:.6e},{:.6e}",
        m.sum_cubes, m.min_part, m.max_part, m.wall_time_s, m.nno, m.mmpn
    )
}

fn cmd_partition<W: Write>(a: &PartitionArgs, out: &mut W) -> Result<(), CliError> {
    let g = load_graph(&a.graph)?;
    let start = Instant::now();
    let cores = match a.method {
        Method::Bfs => {
            let q = a
                .q
                .ok_or_else(|| CliError::Validation("--q is required with --method bfs".into()))?;
            bfs_block_partition(&g, q, a.sa.seed)?
        }
        Method::Import => {
            let file = a
                .part_file
                .as_ref()
                .ok_or_else(|| CliError::Validation("--method import needs --part-file".into()))?;
            let cores = import_partition(file, &g)?;
            if let Some(q) = a.q {
                if q != cores.len() {
                    return Err(CliError::Validation(format!(
                        "partition file has {} parts, --q is {q}",
                        cores.len()
                    )));
                }
            }
            cores
        }
    };
    let (p, trace) = refine(&g, cores, &a.sa)?;
    let metrics = partition_metrics(&p, start.elapsed());
    export_partition(&a.out, g.n(), p.cores())?;
    if let (Some(path), Some(trace)) = (&a.sa_trace, trace) {
        fs::write(path, trace)?;
    }

    let name = a.name.clone().unwrap_or_else(|| {
        a.graph
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let method = match (a.method, a.sa.sa_iters) {
        (Method::Bfs, 0) => "bfs",
        (Method::Bfs, _) => "bfs+sa",
        (Method::Import, 0) => "import",
        (Method::Import, _) => "import+sa",
    };
    let row = partition_csv_row(&name, method, &metrics);
    match &a.csv {
        Some(path) => {
            let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
            let mut f = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)?;
            if fresh {
                writeln!(f, "{PARTITION_CSV_HEADER}")?;
            }
            writeln!(f, "{row}")?;
        }
        None => {
            writeln!(out, "{PARTITION_CSV_HEADER}")?;
            writeln!(out, "{row}")?;
        }
    }
    Ok(())
}

fn cmd_sp2<W: Write>(a: &Sp2Args, out: &mut W) -> Result<(), CliError> {
    let h = load_matrix_market(&a.matrix)?;
    let cfg = Sp2Config {
        nocc: a.nocc,
        tau: a.tau,
        max_iter: a.max_iter,
        conv_tol: a.conv_tol,
        bounds: a.bounds.bounds(),
    };
    let start = Instant::now();
    let res = sm_sp2(&h, &cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    save_matrix_market(&a.out, &res.density)?;
    res.schedule.save(&a.schedule)?;
    writeln!(
        out,
        "steps={} converged={} trace={:.12} trace_error={:e} idempotency={:e} nnz={} time_s={elapsed:.6}",
        res.schedule.len(),
        res.converged,
        res.density.trace(),
        res.trace_error,
        res.idempotency_residual,
        res.density.nnz(),
    )?;
    if !res.converged {
        return Err(CliError::NotConverged {
            trace_error: res.trace_error,
            residual: res.idempotency_residual,
        });
    }
    Ok(())
}

fn cmd_gsp2<W: Write>(a: &Gsp2Args, out: &mut W) -> Result<(), CliError> {
    let h = load_matrix_market(&a.matrix)?;
    let sched = PolySchedule::load(&a.schedule)?;
    let x0 = sp2_initial(&h, a.bounds.bounds())?;
    let base = SparsityGraph::from_matrix(&h);
    let halo_graph = match a.halo {
        HaloSource::Structural => base.structural_polynomial_graph(sched.len() as u32),
        HaloSource::Matrix => base,
        HaloSource::Density => {
            let path = a
                .density
                .as_ref()
                .ok_or_else(|| CliError::Validation("--halo density needs --density".into()))?;
            let d = load_matrix_market(path)?;
            if d.n() != h.n() {
                return Err(CliError::Validation(format!(
                    "density has dimension {}, matrix has {}",
                    d.n(),
                    h.n()
                )));
            }
            SparsityGraph::from_matrix(&d)
        }
    };
    let cores = import_partition(&a.partition, &halo_graph)?;
    let p = build_ch_partition(&halo_graph, cores)?;
    let opts = Gsp2Options {
        workers: a.workers,
        symmetry_tol: a.sym_tol,
    };
    let (d, metrics) = gsp2_run(&x0, &p, &sched, &opts)?;
    save_matrix_market(&a.out, &d)?;
    if let Some(path) = &a.metrics {
        fs::write(path, metrics.to_csv())?;
    }
    writeln!(
        out,
        "parts={} workers={} sum_cubes={} flops={} trace={:.12} nnz={} time_s={:.6}",
        p.q(),
        metrics.workers,
        metrics.sum_cubes,
        metrics.total_flops(),
        d.trace(),
        d.nnz(),
        metrics.wall_time_s,
    )?;
    Ok(())
}

/// One sweep row per part count.
pub fn sweep(
    g: &SparsityGraph,
    q_list: &[usize],
    sa: &SaArgs,
) -> Result<Vec<(usize, u128, f64)>, CliError> {
    q_list
        .iter()
        .map(|&q| {
            let (_, m) = partition_graph(g, q, sa)?;
            Ok((q, m.sum_cubes, m.wall_time_s))
        })
        .collect()
}

fn cmd_sweep<W: Write>(a: &SweepArgs, out: &mut W) -> Result<(), CliError> {
    let g = load_graph(&a.graph)?;
    let rows = sweep(&g, &a.q_list, &a.sa)?;
    let mut text = format!("{SWEEP_CSV_HEADER}\n");
    for (q, sum, t) in rows {
        text.push_str(&format!("{q},{sum},{t:.6}\n"));
    }
    match &a.out {
        Some(path) => fs::write(path, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_gen<W: Write>(a: &GenArgs, out: &mut W) -> Result<(), CliError> {
    let kind: SystemKind = a.kind.parse()?;
    let params = GenParams {
        bandwidth: a.bandwidth,
        width: a.width,
        radius: a.radius,
        density: a.density,
        seed: a.seed,
    };
    let sys = gen_system(kind, a.n, &params)?;
    save_matrix_market(&a.out, &sys.matrix)?;
    writeln!(
        out,
        "kind={kind} n={} nnz={} occupied={}",
        sys.matrix.n(),
        sys.matrix.nnz(),
        sys.occupied
    )?;
    Ok(())
}
