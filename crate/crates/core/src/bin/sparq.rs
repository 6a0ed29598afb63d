use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sparq::bench::{
    bench_csv, builtin_circuits, log_grid, parse_grid, read_circuits, scaling_experiment, table_benchmark,
    write_circuits,
};
use sparq::exec::{measure_speedup, profiler, SpeedupOp};
use sparq::qasm::{dump_state, lower_and_run, parse_qasm, QasmError, RunOptions};
use sparq::qlss::{experiment_sweep, RotationQuery, SweepConfig, Variant};
use sparq::qram::load_memory_file;
use sparq::{Error, ExecConfig};

/// Sparse register-level quantum simulator.
#[derive(Parser)]
#[command(name = "sparq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an OpenQASM 2.0 circuit.
    Run(RunArgs),
    /// Error-vs-T sweep of the adiabatic linear-system solver.
    Qlss(QlssArgs),
    /// Scaling, speedup and circuit-table benchmarks.
    Bench {
        #[command(subcommand)]
        which: BenchCommand,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct RunArgs {
    file: PathBuf,
    /// Worker threads (overridden by SPARQ_THREADS).
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 0)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Timed repetitions.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// JSON memory table for `qram` statements.
    #[arg(long)]
    qram_memory: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    report: ReportFormat,
    /// Print the final branches as JSON after the report.
    #[arg(long)]
    dump_state: bool,
    /// Write per-operation timings as CSV.
    #[arg(long)]
    profile: Option<PathBuf>,
}

#[derive(Args)]
struct QlssArgs {
    /// log2 of the matrix dimension; comma-separated list allowed.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    n: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    kappa: Vec<f64>,
    /// pd or nh; comma-separated list allowed.
    #[arg(long, value_delimiter = ',', default_value = "pd")]
    variant: Vec<String>,
    #[arg(long = "T-grid", value_delimiter = ',', default_value = "100,1000,10000")]
    t_grid: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Smallest T entering the slope fit.
    #[arg(long, default_value_t = 1000.0)]
    fit_min_t: f64,
    /// Query angles through QRAM registers instead of the fused lookup.
    #[arg(long)]
    qram_rotations: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Time vs branch count on synthetic uniform states.
    Scaling {
        /// Comma-separated: x, rot_diag, rot_adiag, rot, h.
        #[arg(long, value_delimiter = ',', default_value = "x,rot_diag,rot_adiag,rot,h")]
        ops: Vec<String>,
        #[arg(long, default_value = "1e3:1e7")]
        grid: String,
        #[arg(long, default_value_t = 2)]
        per_decade: usize,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Speedup T(1)/T(p) of one op.
    Speedup {
        #[arg(long, default_value = "x")]
        op: String,
        #[arg(long, default_value_t = 10_000_000.0)]
        branches: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        threads: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
    /// Run every circuit in a directory at each thread count.
    Table {
        /// Directory of .qasm files; the built-in set is written there first
        /// when it holds none.
        #[arg(long)]
        circuits: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        threads: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Parse(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            // The source parsed; what is missing is a runtime input.
            Error::Qasm(q @ QasmError::MissingMemory { .. }) => Failure::Runtime(q.to_string()),
            Error::Qasm(q) => Failure::Parse(q.to_string()),
            Error::ParseError { .. } => Failure::Parse(e.to_string()),
            e => Failure::Runtime(e.to_string()),
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let src = std::fs::read_to_string(&args.file).map_err(|e| Failure::Runtime(format!("{}: {e}", args.file.display())))?;
    let ir = parse_qasm(&src).map_err(|e| Failure::Parse(e.to_string()))?;
    let memory = args.qram_memory.as_ref().map(load_memory_file).transpose()?;
    let opts = RunOptions {
        exec: ExecConfig::with_threads(args.threads).env_override(),
        shots: args.shots,
        seed: args.seed,
        trials: args.trials.max(1),
        memory,
    };
    profiler::set_enabled(args.profile.is_some());
    let (report, state) = lower_and_run(&ir, &opts)?;
    match args.report {
        ReportFormat::Json => println!("{}", report.to_json()),
        ReportFormat::Csv => print!("{}", report.to_csv()),
    }
    if args.dump_state {
        println!("{}", dump_state(&state));
    }
    if let Some(p) = &args.profile {
        emit(Some(p), &profiler::to_csv())?;
    }
    Ok(())
}

fn qlss(args: QlssArgs) -> Result<(), Failure> {
    let variants = args
        .variant
        .iter()
        .map(|v| Variant::parse(v).ok_or_else(|| Failure::Runtime(format!("unknown variant `{v}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = SweepConfig {
        sizes: args.n,
        kappas: args.kappa,
        variants,
        t_grid: args.t_grid.iter().map(|&t| t.round().max(1.0) as usize).collect(),
        reps: args.reps,
        seed: args.seed,
        fit_min_t: args.fit_min_t.round() as usize,
        query: if args.qram_rotations { RotationQuery::Qram } else { RotationQuery::Fused },
    };
    let report = experiment_sweep(&cfg)?;
    emit(args.out.as_deref(), &report.to_csv())?;
    for c in &report.curves {
        eprintln!(
            "{} N={} kappa={}: slope {:.3}, theta {:.3}, mean error {:?}",
            c.variant.as_str(),
            c.dim,
            c.kappa,
            c.slope,
            c.theta,
            c.mean_error
        );
    }
    eprintln!("schedule: {}", report.schedule);
    Ok(())
}

fn parse_op(s: &str) -> Result<SpeedupOp, Failure> {
    SpeedupOp::parse(s).ok_or_else(|| Failure::Runtime(format!("unknown op `{s}`")))
}

fn bench(which: BenchCommand) -> Result<(), Failure> {
    match which {
        BenchCommand::Scaling {
            ops,
            grid,
            per_decade,
            trials,
            threads,
            out,
        } => {
            let ops = ops.iter().map(|o| parse_op(o)).collect::<Result<Vec<_>, _>>()?;
            let (lo, hi) = parse_grid(&grid)?;
            let report = scaling_experiment(&ops, &log_grid(lo, hi, per_decade), trials, ExecConfig::with_threads(threads))?;
            emit(out.as_deref(), &report.to_csv())?;
            for f in &report.fits {
                eprintln!("{}: slope {:.3}", f.op, f.slope);
            }
        }
        BenchCommand::Speedup {
            op,
            branches,
            threads,
            trials,
        } => {
            let r = measure_speedup(parse_op(&op)?, branches.round() as usize, &threads, trials)?;
            println!("{}", serde_json::to_string_pretty(&r).expect("serializable"));
        }
        BenchCommand::Table {
            circuits,
            threads,
            trials,
            out,
        } => {
            let mut set = if circuits.is_dir() { read_circuits(&circuits)? } else { Vec::new() };
            if set.is_empty() {
                write_circuits(&circuits, &builtin_circuits())?;
                set = read_circuits(&circuits)?;
            }
            let rows = table_benchmark(&set, &threads, trials)?;
            emit(out.as_deref(), &bench_csv(&rows))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Qlss(a) => qlss(a),
        Command::Bench { which } => bench(which),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Parse(msg)) => {
            eprintln!("parse error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
