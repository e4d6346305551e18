//! `lqbench` — benchmark driver for the `lqreg` solvers.
//!
//! Three subcommands: `solve` runs one algorithm on one instance and prints
//! its metric row, `bench-cs` sweeps synthetic recovery instances with trial
//! repetition and median aggregation, and `bench-svm` runs every
//! algorithm/exponent combination on LIBSVM-format datasets. Trials within a
//! sweep run on a thread pool sized by `RAYON_NUM_THREADS`.

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lqreg::bench::{
    gen_cs, lambda_rule_cs, lambda_rule_cs_with, lambda_rule_svm, median_row, metric_row_cs,
    metric_row_svm, read_libsvm, scale_features, write_csv, write_trace, CsInstance, DatasetTable,
    MetricRow,
};
use lqreg::solver::SolverError;
use lqreg::{prox_grad, psnp, NewtonMode, Problem, SolveOptions, SolveReport};
use rayon::prelude::*;
use std::fs::File;
use std::io::{stdout, BufWriter};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "lqbench",
    version,
    about = "Benchmarks for Lq-norm regularized sparse optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance (generated, or an SVM dataset) with one algorithm.
    Solve(SolveArgs),
    /// Sweep synthetic recovery instances; one median row per sweep cell.
    BenchCs(BenchCsArgs),
    /// Run both algorithms at q in {0, 1/2, 2/3} on SVM dataset(s).
    BenchSvm(BenchSvmArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Psnp,
    Proxgrad,
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Algo::Psnp => "psnp",
            Algo::Proxgrad => "proxgrad",
        }
    }

    fn run(self, problem: &Problem, opts: &SolveOptions) -> Result<SolveReport, SolverError> {
        match self {
            Algo::Psnp => psnp(problem, opts),
            Algo::Proxgrad => prox_grad(problem, opts),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NewtonFlag {
    Auto,
    Direct,
    Cg,
    Off,
}

impl From<NewtonFlag> for NewtonMode {
    fn from(flag: NewtonFlag) -> Self {
        match flag {
            NewtonFlag::Auto => NewtonMode::Auto,
            NewtonFlag::Direct => NewtonMode::Direct,
            NewtonFlag::Cg => NewtonMode::Cg,
            NewtonFlag::Off => NewtonMode::Off,
        }
    }
}

/// Solver flags shared by all subcommands.
#[derive(Args, Clone, Copy)]
struct SolverFlags {
    /// Penalty weight; overrides the selection rule.
    #[arg(long, conflicts_with = "lambda_a")]
    lambda: Option<f64>,
    /// Factor a in lambda = a * ||A^T b||_inf (generated instances only).
    #[arg(long)]
    lambda_a: Option<f64>,
    /// Stationarity tolerance. Default: 1e-6 for generated instances,
    /// log2(m*n) * 1e-5 for datasets.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Initial line-search step. Default: 1 for generated instances, 10 for
    /// datasets.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_enum, default_value_t = NewtonFlag::Auto)]
    newton: NewtonFlag,
}

impl SolverFlags {
    fn options(&self, lambda: f64, q: f64, dataset: bool) -> SolveOptions {
        let mut opts = SolveOptions::new(lambda, q);
        opts.max_iter = self.max_iter;
        opts.newton_mode = self.newton.into();
        opts.tau = self.tau.unwrap_or(if dataset { 10.0 } else { 1.0 });
        if let Some(tol) = self.tol {
            opts.grad_tol = tol;
        }
        opts
    }

    fn cs_lambda(&self, inst: &CsInstance, q: f64) -> Result<f64> {
        Ok(match (self.lambda, self.lambda_a) {
            (Some(lambda), _) => lambda,
            (None, Some(factor)) => lambda_rule_cs_with(&inst.matrix, &inst.response, factor)?,
            (None, None) => lambda_rule_cs(&inst.matrix, &inst.response, q)
                .context("no named penalty factor for this q; pass --lambda or --lambda-a")?,
        })
    }
}

#[derive(Args)]
struct SolveArgs {
    /// LIBSVM dataset path; omit to generate a least-squares instance.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    m: usize,
    #[arg(long, default_value_t = 800)]
    n: usize,
    /// Ground-truth sparsity of the generated instance.
    #[arg(long, default_value_t = 20)]
    s: usize,
    /// Noise factor of the generated instance.
    #[arg(long, default_value_t = 0.0)]
    nf: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Fraction of nonzero entries in the generated matrix.
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[arg(long, value_enum, default_value_t = Algo::Psnp)]
    algo: Algo,
    /// Penalty exponent in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    q: f64,
    #[command(flatten)]
    solver: SolverFlags,
    /// Write the per-iteration trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the metric row CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchCsArgs {
    /// Sample counts (comma-separated to sweep).
    #[arg(long, value_delimiter = ',', default_value = "200")]
    m: Vec<usize>,
    #[arg(long, default_value_t = 800)]
    n: usize,
    /// Sparsity levels (comma-separated to sweep).
    #[arg(long, value_delimiter = ',', default_value = "20")]
    s: Vec<usize>,
    /// Noise factors (comma-separated to sweep).
    #[arg(long, value_delimiter = ',', default_value = "0")]
    nf: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "psnp,proxgrad")]
    algo: Vec<Algo>,
    /// Penalty exponents (comma-separated).
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,0.6666666666666666")]
    q: Vec<f64>,
    /// Trials per cell; the CSV row is the median over them.
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Base seed; trial t uses seed + t.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[command(flatten)]
    solver: SolverFlags,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchSvmArgs {
    /// LIBSVM dataset path(s).
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve(args) => run_solve(args),
        Command::BenchCs(args) => run_bench_cs(args),
        Command::BenchSvm(args) => run_bench_svm(args),
    }
}

fn run_solve(args: SolveArgs) -> Result<()> {
    let (row, report) = if let Some(path) = &args.data {
        let table = load_dataset(path)?;
        let (lambda, mu) = match args.solver.lambda {
            Some(lambda) => (lambda, lambda),
            None => lambda_rule_svm(&table)
                .context("penalty rule failed for this dataset; pass --lambda")?,
        };
        let mut opts = args.solver.options(lambda, args.q, true);
        if args.solver.tol.is_none() {
            opts.grad_tol = svm_tolerance(&table);
        }
        let problem =
            Problem::squared_hinge(table.samples.clone(), table.labels.clone(), mu)?;
        let report = args.algo.run(&problem, &opts)?;
        (metric_row_svm(args.algo.name(), args.q, &report, &table), report)
    } else {
        let inst = gen_cs(args.m, args.n, args.s, args.nf, args.seed, args.density)?;
        let lambda = args.solver.cs_lambda(&inst, args.q)?;
        let opts = args.solver.options(lambda, args.q, false);
        let report = args.algo.run(&inst.to_problem(), &opts)?;
        (metric_row_cs(args.algo.name(), args.q, &report, &inst.x_true)?, report)
    };
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    if let Some(path) = &args.trace {
        let file = File::create(path)
            .with_context(|| format!("cannot create trace file {}", path.display()))?;
        write_trace(BufWriter::new(file), &report)?;
    }
    emit(&args.out, &[row])
}

fn run_bench_cs(args: BenchCsArgs) -> Result<()> {
    let mut rows = Vec::new();
    for &m in &args.m {
        for &s in &args.s {
            for &nf in &args.nf {
                for &algo in &args.algo {
                    for &q in &args.q {
                        let trials: Vec<MetricRow> = (0..args.trials)
                            .into_par_iter()
                            .map(|trial| -> Result<MetricRow> {
                                let inst = gen_cs(
                                    m,
                                    args.n,
                                    s,
                                    nf,
                                    args.seed + trial as u64,
                                    args.density,
                                )?;
                                let lambda = args.solver.cs_lambda(&inst, q)?;
                                let opts = args.solver.options(lambda, q, false);
                                let report = algo.run(&inst.to_problem(), &opts)?;
                                Ok(metric_row_cs(algo.name(), q, &report, &inst.x_true)?)
                            })
                            .collect::<Result<_>>()?;
                        let mut cell = median_row(&trials);
                        cell.algorithm = format!("{}@m{m}s{s}nf{nf}", cell.algorithm);
                        rows.push(cell);
                    }
                }
            }
        }
    }
    emit(&args.out, &rows)
}

fn run_bench_svm(args: BenchSvmArgs) -> Result<()> {
    let exponents = [0.0, 0.5, 2.0 / 3.0];
    let mut rows = Vec::new();
    for path in &args.data {
        let table = load_dataset(path)?;
        let (lambda, mu) = match args.solver.lambda {
            Some(lambda) => (lambda, lambda),
            None => lambda_rule_svm(&table).with_context(|| {
                format!("penalty rule failed for {}; pass --lambda", path.display())
            })?,
        };
        let problem = Problem::squared_hinge(table.samples.clone(), table.labels.clone(), mu)?;
        for &q in &exponents {
            for algo in [Algo::Psnp, Algo::Proxgrad] {
                let mut opts = args.solver.options(lambda, q, true);
                if args.solver.tol.is_none() {
                    opts.grad_tol = svm_tolerance(&table);
                }
                let report = algo.run(&problem, &opts)?;
                let mut row = metric_row_svm(algo.name(), q, &report, &table);
                if args.data.len() > 1 {
                    let stem = path.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default();
                    row.algorithm = format!("{}@{stem}", row.algorithm);
                }
                rows.push(row);
            }
        }
    }
    emit(&args.out, &rows)
}

fn load_dataset(path: &PathBuf) -> Result<DatasetTable> {
    let table =
        read_libsvm(path).with_context(|| format!("cannot read dataset {}", path.display()))?;
    Ok(scale_features(table))
}

fn svm_tolerance(table: &DatasetTable) -> f64 {
    let cells = (table.samples.nrows() * table.samples.ncols()) as f64;
    cells.log2() * 1e-5
}

fn emit(out: &Option<PathBuf>, rows: &[MetricRow]) -> Result<()> {
    match out {
        Some(path) => {
            let file = File::create(path)
                .with_context(|| format!("cannot create output file {}", path.display()))?;
            write_csv(BufWriter::new(file), rows)?;
        }
        None => write_csv(stdout().lock(), rows)?,
    }
    Ok(())
}
