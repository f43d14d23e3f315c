//! The OT normal matrix for a sparse `Theta`: block form, connected
//! components, and the three solution routes.

use smoothot::model::{OtProblem, SolverConfig};
use smoothot::ot_solver::{
    assemble_normal_ot, solve_normal_by_components, solve_normal_monolithic, solve_normal_pcg,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (m, n) = (4, 4);
    let cost: Vec<f64> = (0..m * n)
        .map(|k| ((k % m) as f64 - (k / m) as f64).powi(2) / 9.0)
        .collect();
    let problem = OtProblem::new(cost, vec![0.25; m], vec![0.25; n], true)?;
    let config = SolverConfig::default();

    // v2 is diagonal-block: rows {0,1} talk to columns {0,1}, rows {2,3} to {2,3}.
    let mut v2 = vec![0.0; m * n];
    for (i, j) in [(0, 0), (1, 0), (1, 1), (2, 2), (3, 2), (3, 3)] {
        v2[j * m + i] = 0.9;
    }
    let sys = assemble_normal_ot(&problem, &config, 1e-3, &v2)?;
    println!(
        "dim {}  nnz(V) {}  lambda {:.1e}  components {}",
        sys.dim(),
        sys.nnz_v(),
        sys.lambda(),
        sys.components().count
    );
    let dense = sys.matrix().to_dense();
    let d = sys.dim();
    println!("lambda I + A Theta A^T:");
    for i in 0..d {
        let row: Vec<String> = (0..d)
            .map(|j| format!("{:9.2}", dense[i * d + j]))
            .collect();
        println!("  {}", row.join(""));
    }

    let rhs: Vec<f64> = (0..d).map(|k| (k as f64 + 1.0).sin()).collect();
    let by_parts = solve_normal_by_components(&sys, &rhs)?;
    let whole = solve_normal_monolithic(&sys, &rhs)?;
    let (iterative, iters) = solve_normal_pcg(&sys, &rhs, 1e-12, 10 * d)?;
    let diff = |u: &[f64], v: &[f64]| {
        u.iter()
            .zip(v)
            .fold(0.0f64, |s, (a, b)| s.max((a - b).abs()))
    };
    println!("components vs monolithic: {:.1e}", diff(&by_parts, &whole));
    println!(
        "PCG ({iters} iterations) vs monolithic: {:.1e}",
        diff(&iterative, &whole)
    );
    Ok(())
}
