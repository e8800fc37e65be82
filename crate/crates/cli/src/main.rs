use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use tdroute::atsp::{solve_atsp, AtspConstraints};
use tdroute::bnb::{solve_with_ctcp, SolveReport};
use tdroute::bounds::{bound_pair, lower_graph, plot_csv};
use tdroute::ctcp::{check, GridPolicy};
use tdroute::instgen::{generate, load_instance, manifest_line, write_instance, GenSpec, Pattern, MANIFEST_HEADER};
use tdroute::TdGraph;

/// Path-ranking invariance, bounds and exact solving for the time-dependent TSP.
#[derive(Parser)]
#[command(name = "tdroute", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Decide path-ranking invariance. Exit status 0 = yes, 1 = no.
    Check {
        instance: PathBuf,
        #[command(flatten)]
        lp: LpArgs,
    },
    /// Lower and upper bounds from the less congested graph.
    Bound {
        instance: PathBuf,
        #[command(flatten)]
        lp: LpArgs,
        /// Write per-arc samples of tau, tau_low and the travel cost as CSV.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Samples per arc for --plot.
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Solve exactly with the branch-and-bound.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Solve several instances and print one CSV row each plus an average row.
    Bench {
        #[arg(required = true)]
        instances: Vec<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "B")]
    pattern: Pattern,
    #[arg(long)]
    n: usize,
    #[arg(long, value_parser = parse_delta)]
    delta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    periods: usize,
    /// Defaults to 50 n.
    #[arg(long)]
    horizon: Option<f64>,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append the manifest line to this CSV file.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct LpArgs {
    /// exact, reduced, reduced:K, auto or auto:CAP.
    #[arg(long, default_value = "reduced", value_parser = parse_grid)]
    grid: GridPolicy,
    /// Lower bound on the step function; defaults to 1 / (smallest grid gap).
    #[arg(long, value_parser = parse_positive)]
    rho: Option<f64>,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    lp: LpArgs,
    /// Seconds before the search stops with its best bounds.
    #[arg(long, value_parser = parse_positive)]
    time_limit: Option<f64>,
    /// Leave timings out so that reruns print identical bytes.
    #[arg(long)]
    no_timing: bool,
}

fn parse_delta(s: &str) -> Result<f64, String> {
    let d: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if d > 0.0 && d <= 1.0 {
        Ok(d)
    } else {
        Err(format!("delta must lie in (0, 1], got {d}"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("expected a positive number, got {v}"))
    }
}

fn parse_grid(s: &str) -> Result<GridPolicy, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

/// Writes to standard output; a closed pipe ends the output quietly.
fn emit(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn load(path: &Path) -> Result<TdGraph> {
    let g = load_instance(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(g)
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Check { instance, lp } => {
            let g = load(&instance)?;
            let r = check(&g, lp.rho, lp.grid)?;
            emit(&r.to_key_value())?;
            Ok(if r.is_invariant { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Bound { instance, lp, plot, samples } => {
            let g = load(&instance)?;
            let r = check(&g, lp.rho, lp.grid)?;
            let la = lower_graph(&g, &r);
            let bp = bound_pair(&g, &la, |c| solve_atsp(c, &AtspConstraints::default()))?;
            let tour: Vec<String> = bp.tour.iter().map(|v| v.to_string()).collect();
            emit(&format!(
                "lower={}\nupper={}\ngap_initial={}\ntour={}\nzeta_star={}\ninvariant={}\n",
                bp.lower,
                bp.upper,
                (bp.upper - bp.lower) / bp.lower * 100.0,
                tour.join("-"),
                r.zeta_star,
                if r.is_invariant { "yes" } else { "no" }
            ))?;
            if let Some(path) = plot {
                fs::write(&path, plot_csv(&g, &r, &la, samples))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve { instance, run } => {
            let g = load(&instance)?;
            let report = solve(&g, &run)?;
            emit(&report.to_key_value(!run.no_timing))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { instances, run, out } => cmd_bench(&instances, &run, out.as_deref()),
    }
}

fn cmd_gen(args: GenArgs) -> Result<ExitCode> {
    let mut spec = GenSpec::new(args.n, args.pattern, args.delta, args.seed);
    spec.periods = args.periods;
    if let Some(h) = args.horizon {
        spec.horizon = h;
    }
    if let Err(e) = spec.validate() {
        eprintln!("error: {e}");
        return Ok(ExitCode::from(2));
    }
    let g = generate(&spec)?;
    let text = format!(
        "# pattern={} delta={} seed={} periods={}\n{}",
        spec.pattern,
        spec.delta,
        spec.seed,
        spec.periods,
        write_instance(&g)
    );
    let name = match &args.out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            path.display().to_string()
        }
        None => {
            emit(&text)?;
            "-".to_string()
        }
    };
    let line = manifest_line(&name, &spec);
    if let Some(path) = &args.manifest {
        let fresh = !path.exists();
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        if fresh {
            writeln!(f, "{MANIFEST_HEADER}")?;
        }
        writeln!(f, "{line}")?;
    }
    if args.out.is_some() {
        emit(&format!("{line}\n"))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn solve(g: &TdGraph, run: &RunArgs) -> Result<SolveReport> {
    let started = Instant::now();
    let r = check(g, run.lp.rho, run.lp.grid)?;
    let limit = run.time_limit.map(Duration::from_secs_f64);
    Ok(solve_with_ctcp(g, &r, limit, started)?)
}

/// `pattern`, `delta` and `seed` from the `key=value` comment written by
/// `gen`, blank when absent.
fn metadata(path: &Path) -> [String; 3] {
    let mut out: [String; 3] = Default::default();
    let Ok(text) = fs::read_to_string(path) else { return out };
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        for tok in line.trim_start_matches('#').split_whitespace() {
            match tok.split_once('=') {
                Some(("pattern", v)) => out[0] = v.to_string(),
                Some(("delta", v)) => out[1] = v.to_string(),
                Some(("seed", v)) => out[2] = v.to_string(),
                _ => {}
            }
        }
    }
    out
}

const BENCH_HEADER: &str = "instance,n,pattern,delta,seed,OPT,UB_I/LB_F,GAP_I,GAP_F,NODES,TIME";

fn cmd_bench(instances: &[PathBuf], run: &RunArgs, out: Option<&Path>) -> Result<ExitCode> {
    let threads = match std::env::var("TDROUTE_THREADS") {
        Ok(v) => v.parse().with_context(|| format!("TDROUTE_THREADS={v:?} is not a thread count"))?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let results: Vec<Result<(usize, SolveReport)>> = pool.install(|| {
        instances
            .par_iter()
            .map(|path| {
                let g = load(path)?;
                Ok((g.num_vertices(), solve(&g, run)?))
            })
            .collect()
    });
    let timing = !run.no_timing;
    let mut csv = String::from(BENCH_HEADER);
    csv.push('\n');
    let mut reports = Vec::with_capacity(results.len());
    for (path, result) in instances.iter().zip(results) {
        let (n, report) = result?;
        let [pattern, delta, seed] = metadata(path);
        csv += &format!("{},{n},{pattern},{delta},{seed},{}\n", path.display(), report.csv_fields(timing));
        reports.push(report);
    }
    if reports.is_empty() {
        bail!("no instances");
    }
    let k = reports.len() as f64;
    let mean = |f: &dyn Fn(&SolveReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
    let time = if timing { format!("{:.3}", mean(&|r| r.elapsed.as_secs_f64())) } else { String::new() };
    csv += &format!(
        "AVG,,,,,{:.4},{:.6},{:.4},{:.4},{:.1},{}\n",
        mean(&|r| f64::from(u8::from(r.status == tdroute::bnb::SolveStatus::Optimal))),
        mean(&|r| r.ub_ratio()),
        mean(&|r| r.gap_initial()),
        mean(&|r| r.gap_final()),
        mean(&|r| r.nodes as f64),
        time
    );
    match out {
        Some(path) => fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => emit(&csv)?,
    }
    Ok(ExitCode::SUCCESS)
}
