//! Transport between two synthetic images.
//!
//! ```text
//! cargo run --release --example transport_pair -- [class] [resolution] [seed]
//! ```

use smoothot::ingest::{build_ot_problem, generate_synthetic, SyntheticClass};
use smoothot::model::SolverConfig;
use smoothot::ot_solver::solve_ot;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let class: SyntheticClass = args
        .get(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(SyntheticClass::Smooth);
    let res: usize = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(16);
    let seed: u64 = args.get(3).map(|s| s.parse()).transpose()?.unwrap_or(1);

    let a = generate_synthetic(class, res, 2 * seed);
    let b = generate_synthetic(class, res, 2 * seed + 1);
    let (problem, cost) = build_ot_problem(&a, &b, true)?;
    let report = solve_ot(&problem, &SolverConfig::default())?;

    println!("iter  merit       eps         step      ls   lin  method      nnz(v)  lin_res");
    for l in &report.log {
        println!(
            "{:>4}  {:.3e}  {:.3e}  {:.2e}  {:>2}  {:>4}  {:<10}  {}  {:.1e}",
            l.iter,
            l.merit,
            l.eps,
            l.step,
            l.ls_trials,
            l.lin_iters,
            format!("{:?}", l.lin_method),
            l.nnz_v,
            l.lin_residual
        );
    }
    println!(
        "{class} {res}x{res}: {:?} after {} iterations in {:.2}s",
        report.status, report.iterations, report.solve_seconds
    );
    println!(
        "eta_p {:.2e}  eta_d {:.2e}  eta_c {:.2e}  eta_g {:.2e}",
        report.eta_p, report.eta_d, report.eta_c, report.eta_g
    );
    println!(
        "objective {:.10} (raw units {:.6}), plan nnz {}",
        report.objective_primal,
        report.objective_primal * cost.max_raw,
        report.nnz_plan
    );
    Ok(())
}
