//! Cross-check the smoothing Newton solver against the dense simplex oracle
//! on random small OT and barycenter instances.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smoothot::model::{OtProblem, SolverConfig, WbProblem};
use smoothot::oracle::{ot_reference, wb_reference};
use smoothot::ot_solver::solve_ot;
use smoothot::wb_solver::solve_wb;

fn distribution(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = v.iter().sum();
    let mut v: Vec<f64> = v.iter().map(|x| x / s).collect();
    let head: f64 = v[..k - 1].iter().sum();
    v[k - 1] = 1.0 - head;
    v
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let config = SolverConfig::default();
    println!("kind  size    newton objective    simplex objective   rel. gap");
    for _ in 0..5 {
        let (m, n) = (rng.random_range(2..=8), rng.random_range(2..=8));
        let a = distribution(&mut rng, m);
        let b = distribution(&mut rng, n);
        let c = (0..m * n).map(|_| rng.random_range(0.0..1.0)).collect();
        let p = OtProblem::new(c, a, b, true)?;
        let r = solve_ot(&p, &config)?;
        let o = ot_reference(&p)?;
        let gap = (r.objective_primal - o.objective).abs() / o.objective.abs().max(1e-12);
        println!(
            "OT    {m}x{n}     {:.12}      {:.12}      {gap:.1e}",
            r.objective_primal, o.objective
        );
    }
    for _ in 0..3 {
        let big_n = rng.random_range(2..=3);
        let m = rng.random_range(3..=5);
        let marg = (0..big_n).map(|_| distribution(&mut rng, m)).collect();
        let w = distribution(&mut rng, big_n);
        let d: Vec<Vec<f64>> = (0..big_n)
            .map(|_| (0..m * m).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let p = WbProblem::new(&d, marg, w, m)?;
        let r = solve_wb(&p, &config)?;
        let o = wb_reference(&p)?;
        let gap = (r.objective_primal - o.objective).abs() / o.objective.abs().max(1e-12);
        println!(
            "WB    N={big_n},m={m} {:.12}      {:.12}      {gap:.1e}",
            r.objective_primal, o.objective
        );
    }
    Ok(())
}
