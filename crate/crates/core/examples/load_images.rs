//! Load two grid images (CSV or PGM), solve the transport problem between
//! them and write the plan in original pixel indices.
//!
//! ```text
//! cargo run --release --example load_images -- a.pgm b.pgm [plan.csv]
//! ```
//!
//! Without arguments two small PGM files are written to a temporary
//! directory and used instead.

use std::path::PathBuf;

use smoothot::cli::plan_to_csv;
use smoothot::ingest::{build_ot_problem, embed_plan, load_grid, normalize_and_prune, GridFormat};
use smoothot::model::SolverConfig;
use smoothot::ot_solver::solve_ot;

fn demo_inputs() -> std::io::Result<(PathBuf, PathBuf)> {
    let dir = std::env::temp_dir().join("smoothot_load_images");
    std::fs::create_dir_all(&dir)?;
    let a = dir.join("a.pgm");
    let b = dir.join("b.pgm");
    std::fs::write(&a, "P2\n4 3\n255\n0 10 20 0\n5 200 30 0\n0 0 40 90\n")?;
    let mut raw = b"P5\n4 3\n255\n".to_vec();
    raw.extend_from_slice(&[90, 0, 0, 0, 0, 40, 0, 12, 7, 7, 0, 60]);
    std::fs::write(&b, raw)?;
    Ok((a, b))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (pa, pb) = if args.len() >= 2 {
        (PathBuf::from(&args[0]), PathBuf::from(&args[1]))
    } else {
        demo_inputs()?
    };
    let a = normalize_and_prune(&load_grid(&pa, GridFormat::from_path(&pa))?)?;
    let b = normalize_and_prune(&load_grid(&pb, GridFormat::from_path(&pb))?)?;
    println!(
        "a: {}x{} grid, {} nonzero pixels; b: {}x{} grid, {} nonzero pixels",
        a.width,
        a.height,
        a.len(),
        b.width,
        b.height,
        b.len()
    );
    let (problem, cost) = build_ot_problem(&a, &b, true)?;
    let report = solve_ot(&problem, &SolverConfig::default())?;
    println!(
        "{:?} after {} iterations, squared-distance cost {:.6}",
        report.status,
        report.iterations,
        report.objective_primal * cost.max_raw
    );
    let plan = embed_plan(
        &report.plans[0],
        &a.kept_indices,
        &b.kept_indices,
        a.width * a.height,
        b.width * b.height,
    );
    let csv = plan_to_csv(&plan);
    match args.get(2) {
        Some(out) => std::fs::write(out, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
