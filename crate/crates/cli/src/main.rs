//! `rsvddpd` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage or malformed input,
//! 3 solver degeneracy (all weights of a row or column collapsed).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rsvddpd::io::{read_matrix_csv, to_json};
use rsvddpd::simbench::{
    run_simulation, run_timing_bench, write_sim_csv, write_timing_csv, SimConfig, Setup, DEFAULT_REPLICATES,
};
use rsvddpd::{fit_svd, Alpha, Init, RobustSvd, RsvdError, SolverOptions};

const FULL_REPLICATES: usize = 1000;

#[derive(Parser, Debug)]
#[command(name = "rsvddpd", version, about = "Robust SVD by minimum density power divergence")]
struct Cli {
    /// Worker threads for parallel replicates (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Robust rank-r decomposition of a CSV matrix.
    Decompose(DecomposeArgs),
    /// Monte Carlo accuracy study on the 10x4 rank-3 signal.
    Simulate(SimulateArgs),
    /// Wall-time grid of rank-one fits on U(0,1) matrices.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Relative convergence tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Iteration cap per layer.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    max_iter: u64,
    /// Starting point of the iteration.
    #[arg(long, value_enum, default_value_t = InitArg::Robust)]
    init: InitArg,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum InitArg {
    /// Least squares on the winsorized data.
    Robust,
    /// Least squares on the raw data.
    Classical,
    /// Random directions drawn from the seed.
    Random,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    /// Numeric CSV file.
    #[arg(long)]
    input: PathBuf,
    /// Skip the first line of the input.
    #[arg(long)]
    header: bool,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    rank: u64,
    #[arg(long, default_value = "0.5")]
    alpha: Alpha,
    /// Output file (standard output if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, env = "RSVD_SEED", default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// One of s1, s2a, s2b, s2c, s3, s4, s5.
    #[arg(long)]
    setup: Setup,
    #[arg(long, default_value_t = DEFAULT_REPLICATES as u64, value_parser = clap::value_parser!(u64).range(1..))]
    replicates: u64,
    /// Use the full 1000 replicates.
    #[arg(long, conflicts_with = "replicates")]
    full: bool,
    /// Comma-separated robustness parameters.
    #[arg(long, value_parser = parse_alphas, default_value = "0.1,0.25,0.5,0.75,1")]
    alphas: AlphaList,
    #[arg(long, env = "RSVD_SEED", default_value_t = 42)]
    seed: u64,
    /// CSV report file (standard output if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated row counts.
    #[arg(long, value_parser = parse_sizes, default_value = "5,10,25,50,100,250,500,1000")]
    rows: SizeList,
    #[arg(long, default_value_t = 25, value_parser = clap::value_parser!(u64).range(2..))]
    cols: u64,
    #[arg(long, value_parser = parse_alphas, default_value = "0.1,0.25,0.5,0.75,1")]
    alphas: AlphaList,
    /// Fits averaged per grid cell.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    reps: u64,
    #[arg(long, env = "RSVD_SEED", default_value_t = 42)]
    seed: u64,
    /// CSV output file (standard output if omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct AlphaList(Vec<Alpha>);

#[derive(Clone, Debug)]
struct SizeList(Vec<usize>);

fn parse_alphas(s: &str) -> Result<AlphaList, String> {
    s.split(',')
        .map(|t| t.trim().parse::<Alpha>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()
        .map(AlphaList)
}

fn parse_sizes(s: &str) -> Result<SizeList, String> {
    let sizes = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("'{t}' is not a row count")))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(bad) = sizes.iter().find(|&&n| n < 2) {
        return Err(format!("row count {bad} is below 2"));
    }
    Ok(SizeList(sizes))
}

/// Failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<RsvdError> for Failure {
    fn from(e: RsvdError) -> Self {
        let code = if e.is_degenerate() { 3 } else { 2 };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: Option<&Path>, e: io::Error) -> Failure {
    let message = match path {
        Some(p) => format!("{}: {e}", p.display()),
        None => e.to_string(),
    };
    Failure { code: 1, message }
}

fn solver_options(args: &SolverArgs, alpha: Alpha, seed: u64) -> SolverOptions {
    SolverOptions {
        alpha,
        tol: args.tol,
        max_iter: args.max_iter as usize,
        init: match args.init {
            InitArg::Robust => Init::RobustClassical,
            InitArg::Classical => Init::Classical,
            InitArg::Random => Init::Random(seed),
        },
        ..SolverOptions::default()
    }
}

/// Write `bytes` to `path`, or to standard output.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(|e| io_failure(Some(p), e))?);
            w.write_all(bytes).and_then(|_| w.flush()).map_err(|e| io_failure(Some(p), e))
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| io_failure(None, e))
        }
    }
}

fn decomposition_csv(svd: &RobustSvd) -> String {
    let mut s = String::from("component,row,layer,value\n");
    for k in 0..svd.rank {
        s.push_str(&format!("lambda,,{k},{}\n", svd.lambdas[k]));
    }
    for k in 0..svd.rank {
        s.push_str(&format!("sigma2,,{k},{}\n", svd.sigma2s[k]));
    }
    for (name, m) in [("u", &svd.u), ("v", &svd.v)] {
        for ((i, k), val) in m.indexed_iter() {
            s.push_str(&format!("{name},{i},{k},{val}\n"));
        }
    }
    for (k, d) in svd.diagnostics.iter().enumerate() {
        s.push_str(&format!("iterations,,{k},{}\n", d.iterations));
        s.push_str(&format!("converged,,{k},{}\n", d.converged as u8));
    }
    s
}

fn cmd_decompose(args: &DecomposeArgs) -> Result<(), Failure> {
    let file = File::open(&args.input).map_err(|e| Failure {
        code: 2,
        message: format!("{}: {e}", args.input.display()),
    })?;
    let x = read_matrix_csv(io::BufReader::new(file), args.header)?;
    let opts = solver_options(&args.solver, args.alpha, args.seed);
    let svd = fit_svd(&x, args.rank as usize, &opts)?;
    for (k, d) in svd.diagnostics.iter().enumerate() {
        if !d.converged {
            eprintln!("warning: layer {} stopped after {} iterations without converging", k + 1, d.iterations);
        }
    }
    let body = match args.format {
        Format::Json => {
            let mut s = to_json(&svd);
            s.push('\n');
            s
        }
        Format::Csv => decomposition_csv(&svd),
    };
    emit(args.output.as_deref(), body.as_bytes())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let replicates = if args.full { FULL_REPLICATES } else { args.replicates as usize };
    let mut cfg = SimConfig::new(args.setup, replicates, args.alphas.0.clone(), args.seed);
    cfg.solver = SolverOptions {
        alpha: Alpha::CLASSICAL,
        ..solver_options(&args.solver, Alpha::CLASSICAL, args.seed)
    };
    let report = run_simulation(&cfg)?;
    let mut csv = Vec::new();
    write_sim_csv(&report, &mut csv)?;
    print!("{}", report.to_table());
    emit(args.output.as_deref(), &csv)
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Failure> {
    let table = run_timing_bench(&args.rows.0, args.cols as usize, &args.alphas.0, args.reps as usize, args.seed)?;
    let mut csv = Vec::new();
    write_timing_csv(&table, &mut csv)?;
    emit(args.output.as_deref(), &csv)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Decompose(a) => cmd_decompose(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
