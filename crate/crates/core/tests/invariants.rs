mod common;

use common::*;
use proptest::prelude::*;
use rand::RngExt;
use smoothot::ingest::{cost_sq_euclidean, embed_plan, normalize_and_prune, GridDistribution};
use smoothot::model::{
    kkt_metrics, smoothed_map, unscale_solution, LinearSolverKind, LpStructure, OtProblem,
    SolverConfig, Status,
};
use smoothot::oracle::ot_reference;
use smoothot::ot_solver::solve_ot;
use smoothot::smoothing::phi_jacobians;
use smoothot::wb_solver::{build_blocks, solve_dy_wb, solve_wb, SchurStrategy};

fn random_grid(rng: &mut rand_chacha::ChaCha8Rng, w: usize, h: usize) -> GridDistribution {
    let mass = (0..w * h)
        .map(|_| {
            if rng.random_bool(0.8) {
                rng.random_range(1.0..10.0)
            } else {
                0.0
            }
        })
        .collect();
    normalize_and_prune(&GridDistribution::new(w, h, mass)).unwrap()
}

#[test]
fn cost_normalization_keeps_the_optimal_plan() {
    let mut rng = rng(31);
    for _ in 0..30 {
        let a = random_grid(&mut rng, 3, 3);
        let b = random_grid(&mut rng, 3, 3);
        let cost = cost_sq_euclidean(&a, &b);
        let raw: Vec<f64> = cost.data.iter().map(|c| c * cost.max_raw).collect();
        let pn = OtProblem::new(cost.data.clone(), a.mass.clone(), b.mass.clone(), true).unwrap();
        let pr = OtProblem::new(raw, a.mass.clone(), b.mass.clone(), true).unwrap();
        let on = ot_reference(&pn).unwrap();
        let or = ot_reference(&pr).unwrap();
        for (u, v) in on.primal.iter().zip(&or.primal) {
            assert!((u - v).abs() <= 1e-12);
        }
        assert!((on.objective * cost.max_raw - or.objective).abs() <= 1e-10 * (1.0 + or.objective));
    }
}

#[test]
fn embedded_plans_vanish_on_pruned_pixels() {
    let mut rng = rng(32);
    let a = random_grid(&mut rng, 4, 3);
    let b = random_grid(&mut rng, 3, 4);
    let cost = cost_sq_euclidean(&a, &b);
    let p = OtProblem::new(cost.data, a.mass.clone(), b.mass.clone(), true).unwrap();
    let r = solve_ot(&p, &SolverConfig::default()).unwrap();
    let full = embed_plan(&r.plans[0], &a.kept_indices, &b.kept_indices, 12, 12);
    let (mut rows, mut cols) = (vec![0.0; 12], vec![0.0; 12]);
    for &(i, j, v) in &full.entries {
        rows[i] += v;
        cols[j] += v;
    }
    let (fa, fb) = (a.to_full(), b.to_full());
    for k in 0..12 {
        if fa[k] == 0.0 {
            assert_eq!(rows[k], 0.0);
        }
        if fb[k] == 0.0 {
            assert_eq!(cols[k], 0.0);
        }
        assert!((rows[k] - fa[k]).abs() <= 1e-8);
        assert!((cols[k] - fb[k]).abs() <= 1e-8);
    }
}

#[test]
fn dropped_row_is_satisfied_at_optimum() {
    let mut rng = rng(33);
    for _ in 0..20 {
        let (m, n) = (rng.random_range(2..=9), rng.random_range(2..=9));
        let p = random_ot(&mut rng, m, n);
        let r = solve_ot(&p, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        // The dropped residual is minus the sum of the kept ones, so it is
        // bounded by sqrt(m + n) times their norm.
        let x = &r.primal;
        let mut res = Vec::with_capacity(m + n);
        for i in 0..m {
            res.push((0..n).map(|j| x[j * m + i]).sum::<f64>() - p.a()[i]);
        }
        for j in 0..n {
            res.push(x[j * m..(j + 1) * m].iter().sum::<f64>() - p.b()[j]);
        }
        let d_norm = norm(p.a()).hypot(norm(p.b()));
        let full = norm(&res) / (1.0 + d_norm);
        let bound = ((m + n) as f64).sqrt() * 1e-8;
        assert!(
            full <= bound,
            "{m}x{n}: full {full:.2e} eta_p {:.2e}",
            r.eta_p
        );
        assert!(p.full_marginal_residual(x) <= bound * (1.0 + d_norm));
        eprintln!(
            "{m}x{n}: eta_p {:.2e}, with dropped row {full:.2e}",
            r.eta_p
        );
    }
}

#[test]
fn small_runs_have_exact_linear_solves_and_report_sparsity() {
    let mut rng = rng(34);
    for k in 0..10 {
        let (m, n) = (rng.random_range(3..=10), rng.random_range(3..=10));
        let p = random_ot(&mut rng, m, n);
        let r = solve_ot(&p, &SolverConfig::default()).unwrap();
        for l in &r.log {
            assert!(
                l.lin_residual <= 1e-9,
                "iteration {}: {}",
                l.iter,
                l.lin_residual
            );
        }
        let tail: Vec<usize> = r.log.iter().rev().take(10).rev().map(|l| l.nnz_v).collect();
        let monotone = tail.windows(2).all(|w| w[1] <= w[0]);
        eprintln!("instance {k} ({m}x{n}): final nnz(v) {tail:?}, non-increasing: {monotone}");
    }
}

#[test]
fn optimal_reports_meet_tolerance_on_original_data() {
    let mut rng = rng(35);
    for _ in 0..10 {
        let p = random_ot(&mut rng, 6, 7);
        let r = solve_ot(&p, &SolverConfig::default()).unwrap();
        let m = kkt_metrics(&p, &r.primal, &r.dual).unwrap();
        assert_eq!(m.eta_d, 0.0);
        assert!(m.eta_p <= 1e-8 && m.eta_c <= 1e-8 && m.eta_g <= 1e-8);
        assert_eq!((m.eta_p, m.eta_c, m.eta_g), (r.eta_p, r.eta_c, r.eta_g));
    }
}

#[test]
fn kkt_metrics_survive_scaling_roundtrip() {
    let mut rng = rng(36);
    for _ in 0..10 {
        let p = random_ot(&mut rng, 4, 5);
        let o = ot_reference(&p).unwrap();
        let before = kkt_metrics(&p, &o.primal, &o.dual).unwrap();
        let xs: Vec<f64> = o.primal.iter().map(|v| v / p.scale_d()).collect();
        let ys: Vec<f64> = o.dual.iter().map(|v| v / p.scale_c()).collect();
        let (x, y) = unscale_solution(&p, &xs, &ys);
        let after = kkt_metrics(&p, &x, &y).unwrap();
        for (u, v) in [
            (before.eta_p, after.eta_p),
            (before.eta_c, after.eta_c),
            (before.eta_g, after.eta_g),
        ] {
            assert!((u - v).abs() <= 1e-14);
            assert!(u <= 1e-10);
        }
    }
}

#[test]
fn wb_pcg_and_direct_agree() {
    let mut rng = rng(37);
    let config = SolverConfig::default();
    for _ in 0..10 {
        let p = random_wb(&mut rng, 2, 3, 3);
        let eps = rng.random_range(0.05..1.0);
        let w: Vec<f64> = (0..p.primal_dim())
            .map(|_| rng.random_range(-0.5..1.0))
            .collect();
        let jac = phi_jacobians(eps, &w).unwrap();
        let blocks = build_blocks(&p, &config, eps, &jac.v2).unwrap();
        let r: Vec<f64> = (0..p.dual_dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let d = solve_dy_wb(&blocks, &r, SchurStrategy::Direct { tol: 1e-14 }).unwrap();
        let i = solve_dy_wb(&blocks, &r, SchurStrategy::PcgThenDirect { tol: 1e-14 }).unwrap();
        for (u, v) in d.dy1.iter().chain(&d.dy2).zip(i.dy1.iter().chain(&i.dy2)) {
            assert!((u - v).abs() <= 1e-7);
        }
    }
}

#[test]
fn wb_direct_policy_matches_default() {
    let mut rng = rng(38);
    let p = random_wb(&mut rng, 3, 4, 4);
    let a = solve_wb(&p, &SolverConfig::default()).unwrap();
    let direct = SolverConfig {
        linear_solver: LinearSolverKind::Direct,
        ..SolverConfig::default()
    };
    let b = solve_wb(&p, &direct).unwrap();
    assert_eq!(a.status, Status::Optimal);
    assert_eq!(b.status, Status::Optimal);
    assert!((a.objective_primal - b.objective_primal).abs() <= 1e-7);
    let w = a.barycenter.unwrap();
    assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smoothed_map_approaches_the_nonsmooth_map(seed in 0u64..1_000_000, eps in 1e-8f64..1e-1) {
        let mut rng = rng(seed);
        let p = random_ot(&mut rng, 3, 4);
        let config = SolverConfig::default();
        let x: Vec<f64> = (0..p.primal_dim()).map(|_| rng.random_range(-0.2..0.5)).collect();
        let y: Vec<f64> = (0..p.dual_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e = smoothed_map(&p, &config, eps, &x, &y).unwrap();
        let e0 = smoothed_map(&p, &config, 0.0, &x, &y).unwrap();
        let diff = e.iter().zip(&e0).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        let bound = config.kappa_p * eps * norm(&y)
            + config.kappa_c * eps * norm(&x)
            + eps / 2.0 * (e.len() as f64).sqrt();
        prop_assert!(diff <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn apply_a_and_at_are_adjoint_wb(seed in 0u64..1_000_000) {
        let mut rng = rng(seed);
        let big_n = rng.random_range(1..=3);
        let p = random_wb(&mut rng, big_n, 3, 4);
        let x: Vec<f64> = (0..p.primal_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..p.dual_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ax = p.apply_a(&x).unwrap();
        let aty = p.apply_at(&y).unwrap();
        let l: f64 = ax.iter().zip(&y).map(|(u, v)| u * v).sum();
        let r: f64 = x.iter().zip(&aty).map(|(u, v)| u * v).sum();
        prop_assert!((l - r).abs() <= 1e-12 * (1.0 + l.abs()));
    }
}
