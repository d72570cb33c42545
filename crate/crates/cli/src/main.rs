//! `augmix` command line: solve, generate and check SDPs.
//!
//! Exit codes: 0 on success (status `tol`, or errors below the threshold for
//! `check`), 2 when a solve stops on a limit or `check` exceeds the
//! threshold, 1 on any input or option error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info, warn};

use augmix::instances::{gen_random_sdp, maxcut_relaxation, theta_relaxation, Graph};
use augmix::io::{peek_kind, parse_warm_start, read_solution, write_solution, write_warm_start, SolutionFile};
use augmix::precision::{promote, solve_two_stage};
use augmix::problem::{read_native, read_sdpa, write_native};
use augmix::solver::{compute_errors, compute_z, solve_with_progress, ErrorReport, Solution};
use augmix::{DoubleDouble, Real, ScalarKind, SdpProblem, SolverOptions, Status, WarmStart};

#[derive(Parser, Debug)]
#[command(name = "augmix", version, about = "Low-rank augmented Lagrangian SDP solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a problem in native or SDPA sparse (.dat-s) format.
    Solve(SolveArgs),
    /// Write a generated instance in native format.
    Generate(GenerateArgs),
    /// Recompute the error measures of a solution file.
    Check(CheckArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Precision {
    Double,
    Dd,
}

#[derive(Args, Debug)]
struct SolveArgs {
    problem: PathBuf,
    /// Solution file; defaults to the problem path with `.sol` appended.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "double")]
    precision: Precision,
    /// Resume from a warm-start file.
    #[arg(long)]
    warm_start: Option<PathBuf>,
    /// Save the final iterate as a warm-start file.
    #[arg(long)]
    save_warm_start: Option<PathBuf>,
    #[command(flatten)]
    opts: OptionArgs,
}

#[derive(Args, Debug)]
struct OptionArgs {
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    mu_start: Option<f64>,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, default_value_t = 50)]
    iters_z: usize,
    #[arg(long)]
    no_scaling: bool,
    #[arg(long)]
    shuffling: bool,
    #[arg(long)]
    double_sweep: bool,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, visible_alias = "eps", default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, default_value_t = 1000)]
    max_evals: usize,
    #[arg(long, default_value_t = 1.03)]
    tau: f64,
    #[arg(long, default_value_t = 0.8)]
    rat_min: f64,
    #[arg(long, default_value_t = 1.2)]
    rat_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    memory: usize,
    /// Use the fixed absolute inner tolerance `--epsilon` throughout.
    #[arg(long)]
    no_adaptive_epsilon: bool,
    #[arg(long, default_value_t = 0.01)]
    epsilon_factor: f64,
}

impl OptionArgs {
    fn to_options(&self) -> Result<SolverOptions> {
        let opts = SolverOptions {
            tol: self.tol,
            mu_start: self.mu_start,
            time_limit: self.time_limit.unwrap_or(f64::INFINITY),
            max_iters: self.max_iters.unwrap_or(usize::MAX),
            iters_z: self.iters_z,
            scaling: !self.no_scaling,
            shuffling: self.shuffling,
            double_sweep: self.double_sweep,
            p: self.p,
            delta: self.delta,
            epsilon: self.epsilon,
            max_evals: self.max_evals,
            tau: self.tau,
            rat_min: self.rat_min,
            rat_max: self.rat_max,
            seed: self.seed,
            memory: self.memory,
            adaptive_epsilon: !self.no_adaptive_epsilon,
            epsilon_factor: self.epsilon_factor,
        };
        opts.validate().context("invalid solver options")?;
        Ok(opts)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Family {
    Rand,
    Maxcut,
    Theta,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(value_enum)]
    family: Family,
    #[arg(short, long)]
    output: PathBuf,
    /// Block sizes for `rand`, comma separated.
    #[arg(long, value_delimiter = ',')]
    blocks: Vec<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge list for `maxcut` and `theta`.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Add all triangle inequalities (`maxcut`).
    #[arg(long)]
    triangles: bool,
    /// Add nonnegativity on non-edges (`theta`).
    #[arg(long)]
    strengthened: bool,
}

#[derive(Args, Debug)]
struct CheckArgs {
    problem: PathBuf,
    solution: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    threshold: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("AUGMIX_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Generate(a) => cmd_generate(&a),
        Command::Check(a) => cmd_check(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn read_problem(path: &Path) -> Result<SdpProblem> {
    let name = path.to_string_lossy();
    let problem = if name.ends_with(".dat-s") || name.ends_with(".dat") {
        read_sdpa(path).with_context(|| format!("reading {}", path.display()))?
    } else {
        read_native(path).with_context(|| format!("reading {}", path.display()))?
    };
    debug!(
        "problem: blocks {:?}, m_a = {}, m_b = {}",
        problem.block_sizes,
        problem.num_eq(),
        problem.num_ineq()
    );
    Ok(problem)
}

fn status_code(status: Status) -> u8 {
    if status == Status::Tol {
        0
    } else {
        2
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:e}"))
}

fn print_report(r: &ErrorReport) {
    println!("pinf {:e}", r.pinf);
    println!("gap {:e}", r.gap);
    println!("dinf {}", opt(r.dinf));
    println!("compl {}", opt(r.compl));
    println!("compl* {:e}", r.compl_star);
}

fn print_solution<T: Real>(problem: &SdpProblem, sol: &Solution<T>) {
    println!("status {}", sol.status);
    println!("iterations {}", sol.stats.iterations);
    println!("objective {:.15e}", problem.objective.apply(sol.primal_objective));
    print_report(&sol.report);
    println!("time {:.3}", sol.stats.elapsed.as_secs_f64());
}

fn load_warm_start<T: Real>(path: &Path) -> Result<WarmStart<T>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let kind = peek_kind(&text)?;
    let warm = match kind {
        ScalarKind::Binary64 => promote::<f64, T>(&parse_warm_start::<f64>(&text)?)?,
        ScalarKind::DoubleDouble => promote::<DoubleDouble, T>(&parse_warm_start::<DoubleDouble>(&text)?)?,
    };
    Ok(warm)
}

fn finish<T: Real>(args: &SolveArgs, problem: &SdpProblem, sol: &Solution<T>, warm: &WarmStart<T>) -> Result<u8> {
    let out = args
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.sol", args.problem.display())));
    write_solution(&SolutionFile::from(sol), &out).with_context(|| format!("writing {}", out.display()))?;
    info!("solution written to {}", out.display());
    if let Some(path) = &args.save_warm_start {
        write_warm_start(warm, path).with_context(|| format!("writing {}", path.display()))?;
        info!("warm start written to {}", path.display());
    }
    print_solution(problem, sol);
    if sol.status != Status::Tol {
        warn!("stopped before reaching tolerance: {}", sol.status);
    }
    Ok(status_code(sol.status))
}

fn cmd_solve(args: &SolveArgs) -> Result<u8> {
    let options = args.opts.to_options()?;
    let problem = read_problem(&args.problem)?;
    let log = |l: &augmix::solver::IterationLog| {
        if l.iter.is_multiple_of(100) || l.iter == 1 {
            info!("{l}");
        }
    };
    match (args.precision, &args.warm_start) {
        (Precision::Double, warm_path) => {
            let warm = warm_path.as_deref().map(load_warm_start::<f64>).transpose()?;
            let (sol, warm) = solve_with_progress(&problem, &options, warm, log)?;
            finish(args, &problem, &sol, &warm)
        }
        (Precision::Dd, Some(path)) => {
            let warm = load_warm_start::<DoubleDouble>(path)?;
            let dd: SdpProblem<DoubleDouble> = problem.cast();
            let (sol, warm) = solve_with_progress(&dd, &options, Some(warm), log)?;
            finish(args, &problem, &sol, &warm)
        }
        (Precision::Dd, None) => {
            let res = solve_two_stage(&problem, options.tol, &options, |kind, l| {
                if l.iter.is_multiple_of(100) || l.iter == 1 {
                    info!("[{}] {l}", kind.name());
                }
            })?;
            let mut sol = res.final_solution();
            sol.stats.iterations = res.iterations;
            sol.stats.elapsed = res.elapsed;
            finish(args, &problem, &sol, &res.warm_start)
        }
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<u8> {
    let problem = match args.family {
        Family::Rand => {
            if args.blocks.is_empty() {
                bail!("rand needs --blocks");
            }
            let m = args.m.context("rand needs --m")?;
            gen_random_sdp(&args.blocks, m, args.density, args.seed)?
        }
        Family::Maxcut | Family::Theta => {
            let path = args.graph.as_ref().context("maxcut and theta need --graph")?;
            let graph = Graph::read(path).with_context(|| format!("reading {}", path.display()))?;
            if args.family == Family::Maxcut {
                maxcut_relaxation(&graph, args.triangles)?
            } else {
                theta_relaxation(&graph, args.strengthened)?
            }
        }
    };
    write_native(&problem, &args.output).with_context(|| format!("writing {}", args.output.display()))?;
    let sizes: Vec<String> = problem.block_sizes.iter().map(|n| n.to_string()).collect();
    println!("n {} m_a {} m_b {}", sizes.join(","), problem.num_eq(), problem.num_ineq());
    Ok(0)
}

fn check_in<T: Real>(problem: &SdpProblem, path: &Path) -> Result<ErrorReport> {
    let problem: SdpProblem<T> = problem.cast();
    let sol = read_solution::<T>(path).with_context(|| format!("reading {}", path.display()))?;
    let m_a = problem.num_eq();
    if sol.y.len() != problem.num_constraints() {
        bail!(
            "solution has {} multipliers, problem has {} constraints",
            sol.y.len(),
            problem.num_constraints()
        );
    }
    let z = match sol.z {
        Some(z) => z,
        None => compute_z(&problem, &sol.y)?,
    };
    let report = compute_errors(&problem, &sol.factors, &sol.y[..m_a], &sol.y[m_a..], Some(&z))
        .context("solution does not match the problem")?;
    Ok(report)
}

fn cmd_check(args: &CheckArgs) -> Result<u8> {
    let problem = read_problem(&args.problem)?;
    let text = std::fs::read_to_string(&args.solution).with_context(|| format!("reading {}", args.solution.display()))?;
    let report = match peek_kind(&text)? {
        ScalarKind::Binary64 => check_in::<f64>(&problem, &args.solution)?,
        ScalarKind::DoubleDouble => check_in::<DoubleDouble>(&problem, &args.solution)?,
    };
    print_report(&report);
    let max = report.max_error().unwrap_or(f64::INFINITY);
    println!("max {max:e}");
    Ok(if max < args.threshold { 0 } else { 2 })
}
