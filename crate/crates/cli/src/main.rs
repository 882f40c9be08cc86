use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use phasec_core::bench::{generate, run_suite, suite_csv, suite_table, sweep_throughput};
use phasec_core::costmodel::{cost_curve, curve_csv, ClockConfig, Scheme, SkipLimit};
use phasec_core::ilp::{build_model, export_lp, solve, IlpError, SolveOptions, SolveStatus};
use phasec_core::legalize::{apply_schedule, hops_json, parse_scheduled, serialize_scheduled};
use phasec_core::mapping::{imbalance_histogram, insert_splitter_trees, FanoutLimits, MappedDag};
use phasec_core::netlist::{parse_netlist, validate};
use phasec_core::verify::{check_legality, report_metrics};

const EXIT_USAGE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_ILLEGAL: u8 = 4;

#[derive(Parser)]
#[command(name = "phasec", version, about = "Buffer and splitter scheduling for multi-phase AQFP circuits")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Schedule one netlist and print its metrics.
    Schedule(ScheduleArgs),
    /// Run every `*.net` file in a directory under all four schemes.
    Bench(BenchArgs),
    /// Print the edge cost as a function of level gap, as CSV.
    CostCurve(CurveArgs),
    /// Check a scheduled circuit written by `schedule --out`.
    Verify { file: PathBuf },
    /// Fanin imbalance histogram of a mapped netlist.
    Histogram { file: PathBuf },
    /// Print a generated benchmark netlist.
    Gen {
        #[arg(value_enum)]
        kind: GenKind,
        #[arg(default_value_t = 4)]
        size: usize,
    },
    /// Objective and throughput across repetition bounds.
    Sweep {
        file: PathBuf,
        #[command(flatten)]
        clock: ClockArgs,
        /// Largest bound tried; 0..=rmax.
        #[arg(long, default_value_t = 4)]
        up_to: u32,
    },
}

#[derive(Args, Clone)]
struct ClockArgs {
    #[arg(long = "clock", default_value_t = 8)]
    n: u32,
    #[arg(long = "pskip", default_value_t = 2)]
    p: u32,
    /// Cycle skips per hop; an integer or `inf`.
    #[arg(long = "smax", default_value = "1")]
    s_max: SkipLimit,
    #[arg(long = "rmax")]
    r_max: Option<u32>,
    #[arg(long, value_enum, default_value_t = SchemeArg::Combined)]
    scheme: SchemeArg,
    #[arg(long)]
    max_level: Option<u32>,
}

impl ClockArgs {
    fn config(&self) -> ClockConfig {
        ClockConfig {
            n: self.n,
            p: self.p,
            s_max: self.s_max,
            r_max: self.r_max,
            scheme: self.scheme.into(),
            max_level: self.max_level,
            ..ClockConfig::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Balanced,
    PhaseSkip,
    PhaseAlign,
    Combined,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Balanced => Scheme::Balanced,
            SchemeArg::PhaseSkip => Scheme::PhaseSkip,
            SchemeArg::PhaseAlign => Scheme::PhaseAlign,
            SchemeArg::Combined => Scheme::Combined,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Chain,
    Reconvergent,
    TwoStage,
    Ladder,
    Adder,
    Counter,
}

#[derive(Args)]
struct ScheduleArgs {
    file: PathBuf,
    #[command(flatten)]
    clock: ClockArgs,
    /// Seconds before returning the best schedule found.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Also write the integer program in LP format.
    #[arg(long)]
    emit_lp: Option<PathBuf>,
    /// Write the scheduled circuit here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write per-edge hop chains as JSON.
    #[arg(long)]
    hops: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    report: ReportFormat,
}

#[derive(Args)]
struct BenchArgs {
    dir: PathBuf,
    #[command(flatten)]
    clock: ClockArgs,
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    /// Write CSV here instead of printing the table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    clock: ClockArgs,
    #[arg(long, default_value_t = 64)]
    max_delta: u32,
}

/// Error carrying the exit code it maps to.
struct Failure(u8, anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(EXIT_USAGE, e.into())
    }
}

fn with_code<T, E: Into<anyhow::Error>>(code: u8, r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| Failure(code, e.into()))
}

fn seconds(s: f64) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(s).map_err(|_| Failure(EXIT_USAGE, anyhow::anyhow!("bad time limit {s}")))
}

fn load_dag(path: &Path) -> Result<MappedDag, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let netlist = with_code(EXIT_PARSE, parse_netlist(&text))?;
    let report = validate(&netlist);
    if let Some(v) = report.violations.first() {
        return Err(Failure(EXIT_PARSE, anyhow::anyhow!("{v}")));
    }
    with_code(EXIT_PARSE, insert_splitter_trees(&netlist, &FanoutLimits::default()))
}

fn solve_code(e: &IlpError) -> u8 {
    match e {
        IlpError::Infeasible | IlpError::NoIncumbent => EXIT_INFEASIBLE,
        _ => EXIT_USAGE,
    }
}

fn schedule(args: &ScheduleArgs) -> Result<(), Failure> {
    let dag = load_dag(&args.file)?;
    let config = args.clock.config();
    let model = build_model(&dag, &config).map_err(|e| Failure(solve_code(&e), e.into()))?;
    if let Some(path) = &args.emit_lp {
        fs::write(path, export_lp(&model))?;
    }
    let time_limit = args.time_limit.map(seconds).transpose()?;
    let sol = solve(&model, &SolveOptions { time_limit, node_limit: None }).map_err(|e| Failure(solve_code(&e), e.into()))?;
    let circuit = apply_schedule(&dag, &sol, &config)?;
    let legality = check_legality(&circuit, &config, &FanoutLimits::default());
    if !legality.is_legal() {
        for v in &legality.violations {
            eprintln!("violation: {v}");
        }
        return Err(Failure(EXIT_ILLEGAL, anyhow::anyhow!("schedule failed the legality check")));
    }
    if let Some(path) = &args.out {
        fs::write(path, serialize_scheduled(&circuit))?;
    }
    if let Some(path) = &args.hops {
        fs::write(path, hops_json(&circuit))?;
    }
    let report = report_metrics(&circuit);
    match args.report {
        ReportFormat::Json => println!("{}", report.to_json()),
        ReportFormat::Table => {
            let status = if sol.status == SolveStatus::Optimal { "optimal" } else { "feasible" };
            println!("circuit     {}", dag.name());
            println!("scheme      {}", config.scheme);
            println!("status      {status} (bound {}, {} nodes)", sol.stats.best_bound, sol.stats.nodes);
            println!("gates       {}", report.gates);
            println!("BS          {}", report.bs);
            println!("JJs         {}", report.jjs);
            println!("MPS         {}", report.mps);
            println!("R_max       {}", report.r_max);
            println!("throughput  {}/{}", report.throughput_num, report.throughput_den);
        }
    }
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<(), Failure> {
    let rows = run_suite(&args.dir, &args.clock.config(), Some(seconds(args.time_limit)?))?;
    match &args.csv {
        Some(path) => fs::write(path, suite_csv(&rows))?,
        None => print!("{}", suite_table(&rows)),
    }
    Ok(())
}

fn verify(file: &Path) -> Result<(), Failure> {
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let circuit = with_code(EXIT_PARSE, parse_scheduled(&text))?;
    let legality = check_legality(&circuit, &circuit.config, &FanoutLimits::default());
    for v in &legality.violations {
        println!("violation: {v}");
    }
    if !legality.is_legal() {
        return Err(Failure(EXIT_ILLEGAL, anyhow::anyhow!("{} violations", legality.violations.len())));
    }
    println!("{}", report_metrics(&circuit).to_json());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Schedule(args) => schedule(&args),
        Cmd::Bench(args) => bench(&args),
        Cmd::CostCurve(args) => {
            print!("{}", curve_csv(&cost_curve(args.max_delta, &args.clock.config())?));
            Ok(())
        }
        Cmd::Verify { file } => verify(&file),
        Cmd::Histogram { file } => {
            let hist = imbalance_histogram(&load_dag(&file)?);
            println!("imbalance,gates");
            for (k, v) in &hist.buckets {
                println!("{k},{v}");
            }
            eprintln!("mean {:.3}", hist.mean);
            Ok(())
        }
        Cmd::Gen { kind, size } => {
            let n = match kind {
                GenKind::Chain => generate::chain(size),
                GenKind::Reconvergent => generate::reconvergent(size),
                GenKind::TwoStage => generate::two_stage(),
                GenKind::Ladder => generate::diamond_ladder(size, 3),
                GenKind::Adder => generate::ripple_adder(size),
                GenKind::Counter => generate::counter(size),
            };
            print!("{n}");
            Ok(())
        }
        Cmd::Sweep { file, clock, up_to } => {
            let dag = load_dag(&file)?;
            let values: Vec<u32> = (0..=up_to).collect();
            println!("rmax,objective,throughput");
            for p in sweep_throughput(&dag, &clock.config(), &values, &SolveOptions::default()) {
                match p.result {
                    Ok((obj, t)) => println!("{},{obj},{}/{}", p.r_max, t.numer(), t.denom()),
                    Err(e) => println!("{},,{e}", p.r_max),
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
