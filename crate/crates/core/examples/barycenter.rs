//! Fixed-support barycenter of a few synthetic images.
//!
//! ```text
//! cargo run --release --example barycenter -- [count] [resolution] [seed]
//! ```

use smoothot::ingest::{build_wb_problem, generate_synthetic, uniform_weights, SyntheticClass};
use smoothot::model::SolverConfig;
use smoothot::wb_solver::solve_wb;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let count: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(3);
    let res: usize = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(6);
    let seed: u64 = args.get(3).map(|s| s.parse()).transpose()?.unwrap_or(1);

    let dists: Vec<_> = (0..count as u64)
        .map(|k| generate_synthetic(SyntheticClass::Bump, res, seed * 100 + k))
        .collect();
    let weights = uniform_weights(count);
    let (problem, max_raw) = build_wb_problem(&dists, &weights, res, res)?;
    let report = solve_wb(&problem, &SolverConfig::default())?;

    println!(
        "{count} inputs on {res}x{res}: {:?} after {} iterations in {:.2}s",
        report.status, report.iterations, report.solve_seconds
    );
    println!(
        "eta_p {:.2e}  eta_c {:.2e}  eta_g {:.2e}",
        report.eta_p, report.eta_c, report.eta_g
    );
    println!(
        "objective {:.8} (raw units {:.6})",
        report.objective_primal,
        report.objective_primal * max_raw
    );
    let w = report.barycenter.unwrap_or_default();
    println!("barycenter (rows of the grid, x1000):");
    for r in 0..res {
        let row: Vec<String> = (0..res)
            .map(|c| format!("{:6.1}", 1e3 * w[c * res + r]))
            .collect();
        println!("  {}", row.join(" "));
    }
    Ok(())
}
