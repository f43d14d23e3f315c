//! Command-line front end: `ot`, `wb`, `gen` and `bench`.
//!
//! Exit codes: 0 when every solve is optimal, 2 for any other terminal status
//! (or a failed `--verify`), 1 for usage and input errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::ingest::{
    build_ot_problem, build_wb_problem, embed_plan, generate_synthetic, grid_to_csv, load_grid,
    normalize_and_prune, uniform_weights, GridDistribution, GridFormat, SyntheticClass,
};
use crate::model::{OtProblem, SolveReport, SolverConfig, SparsePlan, Status};
use crate::oracle::{ot_reference, wb_reference};
use crate::ot_solver::solve_ot;
use crate::wb_solver::solve_wb;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_OPTIMAL: i32 = 2;

/// Largest relative objective gap accepted by `--verify`.
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(
    name = "smoothot",
    version,
    about = "Smoothing Newton solver for optimal transport and barycenters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an OT problem between two grid distributions.
    Ot(OtArgs),
    /// Solve a fixed-support barycenter problem.
    Wb(WbArgs),
    /// Write a synthetic distribution as a CSV grid.
    Gen(GenArgs),
    /// Solve seeded synthetic instances and aggregate the results.
    Bench(BenchArgs),
}

#[derive(Debug, Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Seconds.
    #[arg(long, default_value_t = 86_400.0)]
    time_limit: f64,
    /// Solve the unscaled problem.
    #[arg(long)]
    no_scale: bool,
    /// Write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig, String> {
        let config = SolverConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            time_limit_secs: self.time_limit,
            ..SolverConfig::default()
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
struct OtArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// Dense CSV cost over the original pixels (rows of `a`, columns of `b`).
    #[arg(long)]
    cost: Option<PathBuf>,
    /// Keep the redundant last column-sum constraint.
    #[arg(long)]
    keep_last_row: bool,
    /// Triplet CSV `i,j,value` in original pixel indices.
    #[arg(long)]
    plan_out: Option<PathBuf>,
    /// Cross-check the objective against the dense simplex oracle.
    #[arg(long)]
    verify: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct WbArgs {
    #[arg(long, num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    /// `uniform` or a file of weights.
    #[arg(long, default_value = "uniform")]
    weights: String,
    /// Barycenter grid as `WxH`.
    #[arg(long, value_parser = parse_support)]
    support: (usize, usize),
    /// Barycenter weights as a CSV grid.
    #[arg(long)]
    bary_out: Option<PathBuf>,
    #[arg(long)]
    verify: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    class: SyntheticClass,
    #[arg(long)]
    res: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Comma-separated class names.
    #[arg(long, value_delimiter = ',', default_value = "whitenoise,smooth,bump")]
    classes: Vec<SyntheticClass>,
    #[arg(long, default_value_t = 32)]
    res: usize,
    #[arg(long, default_value_t = 1)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
}

fn parse_support(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got `{s}`"))?;
    let w: usize = w
        .trim()
        .parse()
        .map_err(|_| format!("bad width in `{s}`"))?;
    let h: usize = h
        .trim()
        .parse()
        .map_err(|_| format!("bad height in `{s}`"))?;
    if w == 0 || h == 0 {
        return Err("support must be nonempty".into());
    }
    Ok((w, h))
}

/// One logged iteration in the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub iter: usize,
    pub merit: f64,
    pub eps: f64,
    pub step: f64,
    pub lin_iters: usize,
}

/// Solver settings echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    #[serde(flatten)]
    pub solver: SolverConfig,
    pub scaled: bool,
    pub drop_last_row: bool,
}

/// Oracle comparison attached by `--verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub oracle_objective: f64,
    pub relative_delta: f64,
}

/// JSON report written by `ot` and `wb`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliReport {
    pub status: Status,
    pub iterations: usize,
    pub eta_p: f64,
    pub eta_d: f64,
    pub eta_c: f64,
    pub eta_g: f64,
    /// Objectives in normalized-cost units.
    pub objective_primal: f64,
    pub objective_dual: f64,
    /// Multiply objectives by this to recover raw squared pixel distances.
    pub cost_scale: f64,
    pub solve_seconds: f64,
    pub nnz_plan: usize,
    pub config: ConfigEcho,
    pub per_iteration: Vec<IterationRow>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub verify: Option<Verification>,
}

impl CliReport {
    pub fn new(report: &SolveReport, config: ConfigEcho, cost_scale: f64) -> Self {
        Self {
            status: report.status,
            iterations: report.iterations,
            eta_p: report.eta_p,
            eta_d: report.eta_d,
            eta_c: report.eta_c,
            eta_g: report.eta_g,
            objective_primal: report.objective_primal,
            objective_dual: report.objective_dual,
            cost_scale,
            solve_seconds: report.solve_seconds,
            nnz_plan: report.nnz_plan,
            config,
            per_iteration: report
                .log
                .iter()
                .map(|l| IterationRow {
                    iter: l.iter,
                    merit: l.merit,
                    eps: l.eps,
                    step: l.step,
                    lin_iters: l.lin_iters,
                })
                .collect(),
            verify: None,
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Ot(a) => cmd_ot(&a),
        Command::Wb(a) => cmd_wb(&a),
        Command::Gen(a) => cmd_gen(&a),
        Command::Bench(a) => cmd_bench(&a),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}

fn load(path: &Path) -> Result<GridDistribution, String> {
    let g = load_grid(path, GridFormat::from_path(path)).map_err(|e| e.to_string())?;
    normalize_and_prune(&g).map_err(|e| e.to_string())
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    write(path, &text)
}

fn numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: `{t}`")))
        .collect()
}

/// Dense cost file restricted to the retained pixels and scaled to max 1.
fn custom_cost(
    path: &Path,
    a: &GridDistribution,
    b: &GridDistribution,
) -> Result<(Vec<f64>, f64), String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(numbers)
        .collect::<Result<_, _>>()?;
    let (full_m, full_n) = (a.width * a.height, b.width * b.height);
    if rows.len() != full_m || rows.iter().any(|r| r.len() != full_n) {
        return Err(format!("cost must be {full_m} rows of {full_n} values"));
    }
    let mut data = Vec::with_capacity(a.len() * b.len());
    for &j in &b.kept_indices {
        for &i in &a.kept_indices {
            let c = rows[i][j];
            if !(c >= 0.0) || !c.is_finite() {
                return Err(format!(
                    "cost entry ({i},{j}) must be finite and nonnegative"
                ));
            }
            data.push(c);
        }
    }
    let max = data.iter().fold(0.0f64, |s, &c| s.max(c));
    if max > 0.0 {
        data.iter_mut().for_each(|c| *c /= max);
    }
    Ok((data, if max > 0.0 { max } else { 1.0 }))
}

/// Plan as `i,j,value` lines with a header.
pub fn plan_to_csv(plan: &SparsePlan) -> String {
    let mut s = String::from("i,j,value\n");
    for &(i, j, v) in &plan.entries {
        if v != 0.0 {
            s.push_str(&format!("{i},{j},{v}\n"));
        }
    }
    s
}

/// Reads a plan written by [`plan_to_csv`].
pub fn plan_from_csv(text: &str) -> Result<Vec<(usize, usize, f64)>, String> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 3 {
                return Err(format!("bad plan line `{l}`"));
            }
            let bad = |_| format!("bad plan line `{l}`");
            Ok((
                f[0].trim().parse().map_err(bad)?,
                f[1].trim().parse().map_err(bad)?,
                f[2].trim()
                    .parse()
                    .map_err(|_| format!("bad plan line `{l}`"))?,
            ))
        })
        .collect()
}

fn relative_delta(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs().max(1e-12)
}

fn summarize(kind: &str, r: &CliReport) {
    println!(
        "{kind}: {:?} after {} iterations in {:.3}s",
        r.status, r.iterations, r.solve_seconds
    );
    println!(
        "  eta_p {:.3e}  eta_d {:.3e}  eta_c {:.3e}  eta_g {:.3e}",
        r.eta_p, r.eta_d, r.eta_c, r.eta_g
    );
    println!(
        "  objective {:.12e} (raw units {:.12e}), plan nnz {}",
        r.objective_primal,
        r.objective_primal * r.cost_scale,
        r.nnz_plan
    );
}

fn status_code(status: Status) -> i32 {
    if status == Status::Optimal {
        EXIT_OK
    } else {
        EXIT_NOT_OPTIMAL
    }
}

fn cmd_ot(args: &OtArgs) -> Result<i32, String> {
    let config = args.solver.config()?;
    let a = load(&args.a)?;
    let b = load(&args.b)?;
    let drop = !args.keep_last_row;
    let (problem, cost_scale) = match &args.cost {
        None => {
            let (p, c) = build_ot_problem(&a, &b, drop).map_err(|e| e.to_string())?;
            (p, if c.max_raw > 0.0 { c.max_raw } else { 1.0 })
        }
        Some(path) => {
            let (data, scale) = custom_cost(path, &a, &b)?;
            let p = OtProblem::new(data, a.mass.clone(), b.mass.clone(), drop)
                .map_err(|e| e.to_string())?;
            (p, scale)
        }
    };
    let problem = if args.solver.no_scale {
        problem.without_scaling()
    } else {
        problem
    };
    let report = solve_ot(&problem, &config).map_err(|e| e.to_string())?;
    let echo = ConfigEcho {
        solver: config,
        scaled: !args.solver.no_scale,
        drop_last_row: drop,
    };
    let mut out = CliReport::new(&report, echo, cost_scale);
    let mut code = status_code(report.status);
    if args.verify {
        match ot_reference(&problem) {
            Ok(r) => {
                let delta = relative_delta(report.objective_primal, r.objective);
                println!(
                    "oracle objective {:.12e}, relative delta {delta:.3e}",
                    r.objective
                );
                if delta > VERIFY_TOL {
                    code = EXIT_NOT_OPTIMAL;
                }
                out.verify = Some(Verification {
                    oracle_objective: r.objective,
                    relative_delta: delta,
                });
            }
            Err(e) => eprintln!("verify skipped: {e}"),
        }
    }
    summarize("ot", &out);
    if let Some(path) = &args.plan_out {
        let full = embed_plan(
            &report.plans[0],
            &a.kept_indices,
            &b.kept_indices,
            a.width * a.height,
            b.width * b.height,
        );
        write(path, &plan_to_csv(&full))?;
    }
    if let Some(path) = &args.solver.json {
        write_json(path, &out)?;
    }
    Ok(code)
}

fn cmd_wb(args: &WbArgs) -> Result<i32, String> {
    let config = args.solver.config()?;
    let dists: Vec<GridDistribution> = args
        .inputs
        .iter()
        .map(|p| load(p))
        .collect::<Result<_, _>>()?;
    let weights = if args.weights == "uniform" {
        uniform_weights(dists.len())
    } else {
        let path = Path::new(&args.weights);
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let w = numbers(&text)?;
        let s: f64 = w.iter().sum();
        if w.iter().any(|&x| !(x > 0.0)) || !s.is_finite() {
            return Err("weights must be positive".into());
        }
        w.iter().map(|x| x / s).collect()
    };
    let (width, height) = args.support;
    let (problem, max_raw) =
        build_wb_problem(&dists, &weights, width, height).map_err(|e| e.to_string())?;
    let problem = if args.solver.no_scale {
        problem.without_scaling()
    } else {
        problem
    };
    let report = solve_wb(&problem, &config).map_err(|e| e.to_string())?;
    let echo = ConfigEcho {
        solver: config,
        scaled: !args.solver.no_scale,
        drop_last_row: false,
    };
    let mut out = CliReport::new(&report, echo, if max_raw > 0.0 { max_raw } else { 1.0 });
    let mut code = status_code(report.status);
    if args.verify {
        match wb_reference(&problem) {
            Ok(r) => {
                let delta = relative_delta(report.objective_primal, r.objective);
                println!(
                    "oracle objective {:.12e}, relative delta {delta:.3e}",
                    r.objective
                );
                if delta > VERIFY_TOL {
                    code = EXIT_NOT_OPTIMAL;
                }
                out.verify = Some(Verification {
                    oracle_objective: r.objective,
                    relative_delta: delta,
                });
            }
            Err(e) => eprintln!("verify skipped: {e}"),
        }
    }
    summarize("wb", &out);
    if let (Some(path), Some(w)) = (&args.bary_out, &report.barycenter) {
        write(path, &grid_to_csv(w, width, height))?;
    }
    if let Some(path) = &args.solver.json {
        write_json(path, &out)?;
    }
    Ok(code)
}

fn cmd_gen(args: &GenArgs) -> Result<i32, String> {
    if args.res == 0 {
        return Err("--res must be positive".into());
    }
    let g = generate_synthetic(args.class, args.res, args.seed);
    write(&args.out, &grid_to_csv(&g.to_full(), g.width, g.height))?;
    Ok(EXIT_OK)
}

/// One solved benchmark instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchInstance {
    pub class: String,
    pub pair: usize,
    pub seed_a: u64,
    pub seed_b: u64,
    pub status: Status,
    pub iterations: usize,
    pub solve_seconds: f64,
    pub eta_p: f64,
    pub eta_d: f64,
    pub eta_c: f64,
    pub eta_g: f64,
    pub objective: f64,
    pub nnz_plan: usize,
}

/// Per-class means over [`BenchInstance`]s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub class: String,
    pub instances: usize,
    pub optimal: usize,
    pub mean_seconds: f64,
    pub mean_iterations: f64,
    pub mean_eta_p: f64,
    pub mean_eta_d: f64,
    pub mean_eta_c: f64,
    pub mean_eta_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub res: usize,
    pub config: SolverConfig,
    pub rows: Vec<BenchRow>,
    pub instances: Vec<BenchInstance>,
}

/// Seeds of the two images in pair `k`.
pub fn bench_seeds(seed: u64, pair: usize) -> (u64, u64) {
    let base = seed.wrapping_mul(1_000_003).wrapping_add(2 * pair as u64);
    (base, base + 1)
}

/// Means over the instances of each class, in first-seen class order.
pub fn aggregate(instances: &[BenchInstance]) -> Vec<BenchRow> {
    let mut classes: Vec<&str> = Vec::new();
    for i in instances {
        if !classes.contains(&i.class.as_str()) {
            classes.push(&i.class);
        }
    }
    classes
        .into_iter()
        .map(|c| {
            let xs: Vec<&BenchInstance> = instances.iter().filter(|i| i.class == c).collect();
            let k = xs.len() as f64;
            let mean = |f: fn(&BenchInstance) -> f64| xs.iter().map(|i| f(i)).sum::<f64>() / k;
            BenchRow {
                class: c.to_string(),
                instances: xs.len(),
                optimal: xs.iter().filter(|i| i.status == Status::Optimal).count(),
                mean_seconds: mean(|i| i.solve_seconds),
                mean_iterations: mean(|i| i.iterations as f64),
                mean_eta_p: mean(|i| i.eta_p),
                mean_eta_d: mean(|i| i.eta_d),
                mean_eta_c: mean(|i| i.eta_c),
                mean_eta_g: mean(|i| i.eta_g),
            }
        })
        .collect()
}

/// `SOLVER_THREADS`, default 1.
fn solver_threads() -> usize {
    std::env::var("SOLVER_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

fn bench_one(
    class: SyntheticClass,
    res: usize,
    seed: u64,
    pair: usize,
    config: &SolverConfig,
    no_scale: bool,
) -> Result<BenchInstance, String> {
    let (sa, sb) = bench_seeds(seed, pair);
    let a = generate_synthetic(class, res, sa);
    let b = generate_synthetic(class, res, sb);
    let (p, _) = build_ot_problem(&a, &b, true).map_err(|e| e.to_string())?;
    let p = if no_scale { p.without_scaling() } else { p };
    let r = solve_ot(&p, config).map_err(|e| e.to_string())?;
    Ok(BenchInstance {
        class: class.to_string(),
        pair,
        seed_a: sa,
        seed_b: sb,
        status: r.status,
        iterations: r.iterations,
        solve_seconds: r.solve_seconds,
        eta_p: r.eta_p,
        eta_d: r.eta_d,
        eta_c: r.eta_c,
        eta_g: r.eta_g,
        objective: r.objective_primal,
        nnz_plan: r.nnz_plan,
    })
}

fn cmd_bench(args: &BenchArgs) -> Result<i32, String> {
    let config = args.solver.config()?;
    if args.res == 0 || args.pairs == 0 || args.classes.is_empty() {
        return Err("--res, --pairs and --classes must be nonempty".into());
    }
    let jobs: Vec<(SyntheticClass, usize)> = args
        .classes
        .iter()
        .flat_map(|&c| (0..args.pairs).map(move |k| (c, k)))
        .collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<BenchInstance, String>>>> =
        Mutex::new(vec![None; jobs.len()]);
    let threads = solver_threads().min(jobs.len());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(class, pair)) = jobs.get(k) else {
                    break;
                };
                let r = bench_one(
                    class,
                    args.res,
                    args.seed,
                    pair,
                    &config,
                    args.solver.no_scale,
                );
                results.lock().expect("bench results lock")[k] = Some(r);
            });
        }
    });
    let mut instances = Vec::with_capacity(jobs.len());
    for (k, r) in results
        .into_inner()
        .expect("bench results lock")
        .into_iter()
        .enumerate()
    {
        match r.expect("every job ran") {
            Ok(i) => instances.push(i),
            Err(e) => {
                let (class, pair) = jobs[k];
                eprintln!("{class} pair {pair}: {e}");
            }
        }
    }
    let rows = aggregate(&instances);
    println!(
        "{:<11} {:>5} {:>7} {:>9} {:>8} {:>10} {:>10} {:>10} {:>10}",
        "class", "n", "optimal", "time(s)", "iter", "eta_p", "eta_d", "eta_c", "eta_g"
    );
    for r in &rows {
        println!(
            "{:<11} {:>5} {:>7} {:>9.3} {:>8.1} {:>10.2e} {:>10.2e} {:>10.2e} {:>10.2e}",
            r.class,
            r.instances,
            r.optimal,
            r.mean_seconds,
            r.mean_iterations,
            r.mean_eta_p,
            r.mean_eta_d,
            r.mean_eta_c,
            r.mean_eta_g
        );
    }
    let all_ok =
        instances.len() == jobs.len() && instances.iter().all(|i| i.status == Status::Optimal);
    if let Some(path) = &args.solver.json {
        write_json(
            path,
            &BenchReport {
                res: args.res,
                config,
                rows,
                instances,
            },
        )?;
    }
    Ok(if all_ok { EXIT_OK } else { EXIT_NOT_OPTIMAL })
}
