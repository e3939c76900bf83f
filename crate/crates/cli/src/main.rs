//! `graphprox` command-line tool.
//!
//! Exit codes: 0 success, 1 failed self-check or I/O failure on output,
//! 2 unreadable or malformed input, 3 input that parses but violates a
//! problem invariant, 4 regression fit stopped at the iteration limit.

mod check;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use graphprox::grid::{denoise, GridSpec};
use graphprox::io::{
    fmt_g12, read_csv_matrix, read_edges, read_float_map, read_nodes, read_penalties, read_pgm,
    write_float_map, write_indexed, write_pgm, Image, IndexBase,
};
use graphprox::regression::{fista_fit, DenseMatrix, FitOptions, RegressionProblem};
use graphprox::{
    breakpoints, find_weighted_reductions, level_sets, prox, reductions, NodeSet,
    PiecewiseLinearPenalty, ProxProblem, QuadraticBinaryProblem, WeightVector,
};

#[derive(Parser)]
#[command(name = "graphprox", version, about = "Exact parametric cuts and graph-fused proximal operators")]
struct Cli {
    /// Node indices in input and output files start at 1.
    #[arg(long, global = true)]
    one_based: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Proximal operator of a weighted graph penalty; prints `i u_i`.
    Prox {
        /// Centres, lines `i a_i`.
        #[arg(long)]
        nodes: PathBuf,
        /// Edge weights, lines `i j w_ij`.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Piecewise-linear penalties, lines `i b_1 theta_1 ... theta_m`.
        #[arg(long)]
        penalties: Option<PathBuf>,
        #[arg(long)]
        lambda: f64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Anisotropic total-variation denoising of a grayscale image.
    Denoise {
        /// PGM (P2 or P5) or float map.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lambda: f64,
        /// Weight of every grid edge.
        #[arg(long, default_value_t = 1.0)]
        weight: f64,
        #[arg(long, short)]
        output: PathBuf,
        /// Defaults to `pgm` for a `.pgm` output path and `float` otherwise.
        #[arg(long, value_enum)]
        format: Option<ImageFormat>,
    },
    /// Breakpoints and per-node flip values of the parametric cut family.
    Path {
        /// Lines `i q_ii [w_i]`.
        #[arg(long)]
        nodes: PathBuf,
        /// Couplings, lines `i j q_ij` with `q_ij <= 0`.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Also print the smallest and largest optimal sets at these values.
        #[arg(long, allow_negative_numbers = true)]
        beta: Vec<f64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Penalized least squares by accelerated proximal gradient.
    Fit {
        /// Design matrix, one row per observation.
        #[arg(long)]
        design: PathBuf,
        /// Response, one value per observation.
        #[arg(long)]
        response: PathBuf,
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(long)]
        penalties: Option<PathBuf>,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        /// Coefficients as `i u_i`.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Objective of the best iterate after every iteration.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Cross-checks the solvers against brute-force and reference oracles.
    Check {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Re-run a recorded instance instead of generating new ones.
        #[arg(long, conflicts_with_all = ["n", "trials", "seed"])]
        replay: Option<PathBuf>,
        /// Where to write the first failing instance (default: stderr).
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ImageFormat {
    Pgm,
    Float,
}

#[derive(Debug)]
pub(crate) enum CliError {
    Input(String),
    Invariant(String),
    Output(String),
    NotConverged(usize),
    CheckFailed(usize),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Output(_) | CliError::CheckFailed(_) => 1,
            CliError::Input(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::NotConverged(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Invariant(m) | CliError::Output(m) => f.write_str(m),
            CliError::NotConverged(k) => write!(f, "no convergence after {k} iterations; wrote the best iterate"),
            CliError::CheckFailed(k) => write!(f, "{k} check(s) failed"),
        }
    }
}

impl From<graphprox::Error> for CliError {
    fn from(e: graphprox::Error) -> Self {
        match e {
            graphprox::Error::Parse { .. } => CliError::Input(e.to_string()),
            _ => CliError::Invariant(e.to_string()),
        }
    }
}

pub(crate) type CliResult<T> = Result<T, CliError>;

fn with_path<T>(path: &Path, r: graphprox::Result<T>) -> CliResult<T> {
    r.map_err(|e| match CliError::from(e) {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        CliError::Invariant(m) => CliError::Invariant(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_all(path: &Path) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    open(path)?
        .read_to_end(&mut buf)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(buf)
}

fn output_err(e: io::Error) -> CliError {
    CliError::Output(format!("write failed: {e}"))
}

/// Runs `body` against the output file, or stdout when none is given.
fn write_to(
    path: Option<&Path>,
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> CliResult<()> {
    match path {
        Some(p) => {
            let file = File::create(p)
                .map_err(|e| CliError::Output(format!("{}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            body(&mut w).and_then(|_| w.flush()).map_err(output_err)
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            body(&mut w).and_then(|_| w.flush()).map_err(output_err)
        }
    }
}

fn edges_from(path: Option<&Path>, base: IndexBase) -> CliResult<Vec<(usize, usize, f64)>> {
    match path {
        Some(p) => with_path(p, read_edges(open(p)?, base)),
        None => Ok(Vec::new()),
    }
}

fn penalties_from(
    path: Option<&Path>,
    base: IndexBase,
    n: usize,
) -> CliResult<Vec<Option<PiecewiseLinearPenalty>>> {
    match path {
        Some(p) => with_path(p, read_penalties(open(p)?, base, n)),
        None => Ok(Vec::new()),
    }
}

fn check_lambda(lambda: f64) -> CliResult<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(CliError::Invariant(format!("lambda must be finite and >= 0, got {lambda}")))
    }
}

fn cmd_prox(
    nodes: &Path,
    edges: Option<&Path>,
    penalties: Option<&Path>,
    lambda: f64,
    output: Option<&Path>,
    base: IndexBase,
) -> CliResult<()> {
    check_lambda(lambda)?;
    let table = with_path(nodes, read_nodes(open(nodes)?, base))?;
    let n = table.values.len();
    let problem = ProxProblem::new(
        table.values,
        edges_from(edges, base)?,
        lambda,
        penalties_from(penalties, base, n)?,
    )?;
    let u = prox(&problem);
    write_to(output, |w| write_indexed(w, &u, base))
}

fn cmd_denoise(
    input: &Path,
    lambda: f64,
    weight: f64,
    output: &Path,
    format: Option<ImageFormat>,
) -> CliResult<()> {
    check_lambda(lambda)?;
    let data = read_all(input)?;
    let image = if data.first() == Some(&b'P') {
        with_path(input, read_pgm(&data))?
    } else {
        with_path(input, read_float_map(&data[..]))?
    };
    let grid = GridSpec::new(image.height, image.width, weight)?;
    let pixels = denoise(&grid, &image.pixels, lambda)?;
    let result = Image { pixels, ..image };
    let format = format.unwrap_or_else(|| {
        match output.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("pgm") => ImageFormat::Pgm,
            _ => ImageFormat::Float,
        }
    });
    write_to(Some(output), |w| match format {
        ImageFormat::Pgm => write_pgm(w, &result, 255),
        ImageFormat::Float => write_float_map(w, &result),
    })
}

fn format_set(set: &NodeSet, base: IndexBase) -> String {
    let offset = usize::from(base == IndexBase::One);
    let items: Vec<String> = set.iter().map(|i| (i + offset).to_string()).collect();
    format!("{{{}}}", items.join(","))
}

fn cmd_path(
    nodes: &Path,
    edges: Option<&Path>,
    betas: &[f64],
    output: Option<&Path>,
    base: IndexBase,
) -> CliResult<()> {
    let table = with_path(nodes, read_nodes(open(nodes)?, base))?;
    let problem = QuadraticBinaryProblem::new(table.values, edges_from(edges, base)?)?;
    let weights = WeightVector::new(table.weights)?;
    let alpha = find_weighted_reductions(&problem, &weights)?;
    let r = reductions(&problem, &alpha)?;
    let bp = breakpoints(&r, &weights);
    let offset = usize::from(base == IndexBase::One);
    write_to(output, |w| {
        writeln!(w, "# breakpoints")?;
        for b in &bp {
            writeln!(w, "{}", fmt_g12(*b))?;
        }
        writeln!(w, "# node r w flip")?;
        for (i, (&ri, &wi)) in r.iter().zip(weights.iter()).enumerate() {
            let flip = if wi > 0.0 {
                fmt_g12(ri / wi)
            } else if ri < 0.0 {
                "-inf".into()
            } else if ri > 0.0 {
                "inf".into()
            } else {
                "any".into()
            };
            writeln!(w, "{} {} {} {}", i + offset, fmt_g12(ri), fmt_g12(wi), flip)?;
        }
        for &beta in betas {
            let (u1, u2) = level_sets(&r, &weights, beta);
            writeln!(
                w,
                "beta {} U1 {} U2 {}",
                fmt_g12(beta),
                format_set(&u1, base),
                format_set(&u2, base)
            )?;
        }
        Ok(())
    })
}

fn read_matrix(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    with_path(path, read_csv_matrix(open(path)?))
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    design: &Path,
    response: &Path,
    edges: Option<&Path>,
    penalties: Option<&Path>,
    lambda: f64,
    tol: f64,
    max_iter: usize,
    output: Option<&Path>,
    trace: Option<&Path>,
    base: IndexBase,
) -> CliResult<()> {
    check_lambda(lambda)?;
    let a = DenseMatrix::from_rows(&read_matrix(design)?)?;
    let y_rows = read_matrix(response)?;
    let y: Vec<f64> = match y_rows.as_slice() {
        [row] if row.len() != 1 || a.rows() == 1 => row.clone(),
        rows if rows.iter().all(|r| r.len() == 1) => rows.iter().map(|r| r[0]).collect(),
        _ => {
            return Err(CliError::Input(format!(
                "{}: expected a single column or a single row",
                response.display()
            )))
        }
    };
    let problem = RegressionProblem::new(
        a.clone(),
        y,
        edges_from(edges, base)?,
        lambda,
        penalties_from(penalties, base, a.cols())?,
    )?;
    let options = FitOptions {
        max_iter,
        tol,
        lipschitz: None,
    };
    let fit = fista_fit(&problem, &options)?;
    write_to(output, |w| write_indexed(w, &fit.coefficients, base))?;
    if let Some(p) = trace {
        write_to(Some(p), |w| {
            for v in &fit.trace {
                writeln!(w, "{}", fmt_g12(*v))?;
            }
            Ok(())
        })?;
    }
    if fit.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(fit.iterations))
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("GRAPHPROX_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let base = if cli.one_based {
        IndexBase::One
    } else {
        IndexBase::Zero
    };
    match cli.command {
        Command::Prox {
            nodes,
            edges,
            penalties,
            lambda,
            output,
        } => cmd_prox(
            &nodes,
            edges.as_deref(),
            penalties.as_deref(),
            lambda,
            output.as_deref(),
            base,
        ),
        Command::Denoise {
            input,
            lambda,
            weight,
            output,
            format,
        } => cmd_denoise(&input, lambda, weight, &output, format),
        Command::Path {
            nodes,
            edges,
            beta,
            output,
        } => cmd_path(&nodes, edges.as_deref(), &beta, output.as_deref(), base),
        Command::Fit {
            design,
            response,
            edges,
            penalties,
            lambda,
            tol,
            max_iter,
            output,
            trace,
        } => cmd_fit(
            &design,
            &response,
            edges.as_deref(),
            penalties.as_deref(),
            lambda,
            tol,
            max_iter,
            output.as_deref(),
            trace.as_deref(),
            base,
        ),
        Command::Check {
            n,
            trials,
            seed,
            replay,
            dump,
        } => match replay {
            Some(path) => check::replay(&path),
            None => check::run(n, trials, seed, dump.as_deref()),
        },
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("graphprox: {e}");
            ExitCode::from(e.code())
        }
    }
}
