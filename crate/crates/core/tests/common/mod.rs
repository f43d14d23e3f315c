#![allow(dead_code)]

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smoothot::model::{LpStructure, OtProblem, WbProblem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive probability vector summing to one.
pub fn distribution(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = v.iter().sum();
    let mut v: Vec<f64> = v.iter().map(|x| x / s).collect();
    let head: f64 = v[..k - 1].iter().sum();
    v[k - 1] = 1.0 - head;
    v
}

pub fn random_ot(rng: &mut ChaCha8Rng, m: usize, n: usize) -> OtProblem {
    let a = distribution(rng, m);
    let b = distribution(rng, n);
    let c = (0..m * n).map(|_| rng.random_range(0.0..1.0)).collect();
    OtProblem::new(c, a, b, true).unwrap()
}

pub fn random_wb(rng: &mut ChaCha8Rng, big_n: usize, m: usize, n: usize) -> WbProblem {
    let marg = (0..big_n).map(|_| distribution(rng, n)).collect();
    let w = distribution(rng, big_n);
    let d: Vec<Vec<f64>> = (0..big_n)
        .map(|_| (0..m * n).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    WbProblem::new(&d, marg, w, m).unwrap()
}

/// Row-major dense constraint matrix.
pub fn dense_a<P: LpStructure + ?Sized>(p: &P) -> Vec<Vec<f64>> {
    let (nx, ny) = (p.primal_dim(), p.dual_dim());
    let mut a = vec![vec![0.0; nx]; ny];
    for k in 0..nx {
        let mut e = vec![0.0; nx];
        e[k] = 1.0;
        let c = p.apply_a(&e).unwrap();
        for i in 0..ny {
            a[i][k] = c[i];
        }
    }
    a
}

/// `lambda I + A Diag(theta) A^T`.
pub fn dense_normal(a: &[Vec<f64>], theta: &[f64], lambda: f64) -> Vec<Vec<f64>> {
    let ny = a.len();
    let mut out = vec![vec![0.0; ny]; ny];
    for i in 0..ny {
        for j in 0..ny {
            out[i][j] = (0..theta.len())
                .map(|k| a[i][k] * theta[k] * a[j][k])
                .sum::<f64>()
                + if i == j { lambda } else { 0.0 };
        }
    }
    out
}

pub fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(u, v)| u * v).sum())
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut b = b.to_vec();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}
