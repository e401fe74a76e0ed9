//! Command-line front end: single solves, seeded benchmark trials,
//! convergence plots and reference regeneration.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slcp::bench::{self, TrialConfig, TrialSet, BANDS, DEFAULT_TRIALS};
use slcp::driver::{solve, Algorithm, SolveOptions};
use slcp::problems::{self, BenchmarkId};

#[derive(Parser)]
#[command(name = "slcp", version, about = "SQP, logspace SQP and SLCP on engineering design benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one benchmark from one start point.
    Solve(SolveArgs),
    /// Run seeded trials and write one CSV per algorithm and band plus a summary.
    Bench(BenchArgs),
    /// Plot convergence curves from CSVs written by `bench`.
    Curves(CurvesArgs),
    /// Regenerate stored reference optima.
    RecomputeReferences(RecomputeArgs),
    /// List benchmarks.
    List,
}

#[derive(Args, Clone)]
struct SolverFlags {
    /// Gradient-of-Lagrangian termination tolerance.
    #[arg(long, default_value_t = 1e-6)]
    eps_gl: f64,
    /// Step-size termination tolerance.
    #[arg(long, default_value_t = 1e-8)]
    eps_dx: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Penalty weight on the sub-problem slacks.
    #[arg(long)]
    slack_weight: Option<f64>,
}

impl SolverFlags {
    fn options(&self, algorithm: Algorithm) -> SolveOptions {
        let mut o = SolveOptions::new(algorithm);
        o.eps_gl = self.eps_gl;
        o.eps_dx = self.eps_dx;
        o.max_iter = self.max_iter;
        if let Some(k) = self.slack_weight {
            o.slack_weight = k;
        }
        o
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    benchmark: BenchmarkId,
    #[arg(long, default_value = "slcp")]
    algo: Algorithm,
    /// Comma-separated start point; defaults to the benchmark's nominal start.
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
    /// Print one line per iteration.
    #[arg(long)]
    trace: bool,
    /// Directory for the iteration history CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    benchmark: BenchmarkId,
    /// Algorithms to run (comma-separated); all three by default.
    #[arg(long = "algo", value_delimiter = ',')]
    algos: Vec<Algorithm>,
    /// Start-point bands (comma-separated fractions); 0.1, 0.5 and 0.8 by default.
    #[arg(long = "band", value_delimiter = ',')]
    bands: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; all cores by default.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also write `{benchmark}_curves.svg`.
    #[arg(long)]
    curves: bool,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(long)]
    benchmark: BenchmarkId,
    /// Directory holding the trial CSVs; the plot is written there too.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct RecomputeArgs {
    /// Benchmarks to regenerate; all by default.
    #[arg(long = "benchmark", value_delimiter = ',')]
    benchmarks: Vec<BenchmarkId>,
    #[arg(long, default_value = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/references"))]
    dir: PathBuf,
    /// Overwrite existing reference files.
    #[arg(long)]
    force: bool,
    #[arg(long, default_value_t = 1e-12)]
    eps_gl: f64,
}

/// Failure that maps to exit code 1; usage errors exit with 2 from clap.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Bench(a) => run_bench(a),
        Command::Curves(a) => run_curves(a),
        Command::RecomputeReferences(a) => run_recompute(a),
        Command::List => run_list(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn usage(msg: String) -> ! {
    use clap::CommandFactory;
    Cli::command().error(clap::error::ErrorKind::InvalidValue, msg).exit()
}

fn run_solve(a: SolveArgs) -> Result<(), Failure> {
    let problem = a.benchmark.problem();
    let x0 = a.x0.unwrap_or_else(|| a.benchmark.nominal_start());
    if x0.len() != problem.n_vars() {
        usage(format!(
            "--x0 has {} values but {} has {} variables",
            x0.len(),
            a.benchmark,
            problem.n_vars()
        ));
    }
    let r = solve(&problem, &x0, &a.solver.options(a.algo))?;
    if a.trace {
        println!("{:>5} {:>16} {:>10} {:>10} {:>12} {:>10}", "iter", "f", "|dx|", "alpha", "max viol", "|grad L|");
        for h in &r.history {
            println!(
                "{:>5} {:>16.9e} {:>10.3e} {:>10.3e} {:>12.3e} {:>10.3e}",
                h.iter, h.objective, h.step_norm, h.alpha, h.max_violation, h.grad_lagrangian
            );
        }
    }
    println!("benchmark   {}", a.benchmark);
    println!("algorithm   {}", a.algo);
    println!("termination {}", r.termination);
    println!("iterations  {}", r.iterations);
    println!("objective   {:.12e}", r.f_star);
    println!("|grad L|    {:.3e}", r.grad_lagrangian);
    for (v, x) in problem.variables.iter().zip(&r.x_star) {
        println!("  {:<12} {:.10e}", v.name, x);
    }
    if let Some(dir) = &a.out {
        let path = dir.join(format!("{}_{}_trace.csv", a.benchmark, a.algo));
        let file = std::fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        r.write_history_csv(std::io::BufWriter::new(file))?;
        println!("wrote {}", path.display());
    }
    if r.termination.converged() {
        Ok(())
    } else {
        Err(Failure(format!("solver stopped without converging ({})", r.termination)))
    }
}

fn run_bench(a: BenchArgs) -> Result<(), Failure> {
    let algos = if a.algos.is_empty() { Algorithm::ALL.to_vec() } else { a.algos.clone() };
    let bands = if a.bands.is_empty() { BANDS.to_vec() } else { a.bands.clone() };
    if a.trials == 0 {
        usage("--trials must be at least 1".into());
    }
    if let Some(b) = bands.iter().find(|b| !(0.0..1.0).contains(*b)) {
        usage(format!("--band {b} outside [0, 1)"));
    }
    let def = problems::build(a.benchmark)?;
    std::fs::create_dir_all(&a.out).map_err(|e| format!("{}: {e}", a.out.display()))?;
    let mut all = Vec::new();
    for &band in &bands {
        let mut sets = Vec::new();
        for &algo in &algos {
            let mut cfg = TrialConfig::new(a.benchmark, algo, band);
            cfg.n_trials = a.trials;
            cfg.base_seed = a.seed;
            cfg.options = a.solver.options(algo);
            let ts = bench::run_trials(&cfg, &def, a.jobs)?;
            let path = bench::write_trials_file(&ts, &a.out)?;
            log::info!("wrote {}", path.display());
            sets.push(ts);
        }
        let table = bench::summarize(&sets)?;
        print!("{table}");
        let path = a.out.join(format!("{}_summary_{:02.0}.csv", a.benchmark, band * 100.0));
        let file = std::fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        table.write_csv(file)?;
        all.extend(sets);
    }
    if a.curves {
        let path = bench::write_curves_svg(&all, &a.out)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn load_sets(benchmark: BenchmarkId, dir: &Path) -> Result<Vec<TrialSet>, Failure> {
    let def = problems::build(benchmark)?;
    let prefix = format!("{benchmark}_");
    let mut sets = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in names {
        let Some(rest) = name.strip_prefix(&prefix).and_then(|r| r.strip_suffix(".csv")) else {
            continue;
        };
        let Some((algo, band)) = rest.split_once('_') else { continue };
        let (Ok(algo), Ok(pct)) = (algo.parse::<Algorithm>(), band.parse::<f64>()) else {
            continue;
        };
        let file = std::fs::File::open(dir.join(&name)).map_err(|e| format!("{name}: {e}"))?;
        let rows = bench::read_trials_csv(file).map_err(|e| format!("{name}: {e}"))?;
        sets.push(TrialSet::from_rows(
            TrialConfig::new(benchmark, algo, pct / 100.0),
            def.reference.objective,
            &rows,
        ));
    }
    Ok(sets)
}

fn run_curves(a: CurvesArgs) -> Result<(), Failure> {
    let sets = load_sets(a.benchmark, &a.out)?;
    if sets.is_empty() {
        return Err(Failure(format!(
            "no {}_<algo>_<band>.csv files in {}",
            a.benchmark,
            a.out.display()
        )));
    }
    let path = bench::write_curves_svg(&sets, &a.out)?;
    println!("wrote {} ({} series)", path.display(), sets.len());
    Ok(())
}

fn run_recompute(a: RecomputeArgs) -> Result<(), Failure> {
    let ids = if a.benchmarks.is_empty() { BenchmarkId::ALL.to_vec() } else { a.benchmarks };
    for id in ids {
        let path = problems::write_reference(id, &a.dir, a.force, a.eps_gl)?;
        let def = problems::build_with_reference(id, &path)?;
        println!("{id}: objective {:.12e} -> {}", def.reference.objective, path.display());
    }
    Ok(())
}

fn run_list() -> Result<(), Failure> {
    println!("{:<16} {:>5} {:>6} {:>16}  description", "id", "vars", "rows", "reference f*");
    for id in BenchmarkId::ALL {
        let def = problems::build(id)?;
        println!(
            "{:<16} {:>5} {:>6} {:>16.9e}  {}",
            id.as_str(),
            def.problem.n_vars(),
            def.problem.n_constraints(),
            def.reference.objective,
            id.description()
        );
    }
    Ok(())
}
