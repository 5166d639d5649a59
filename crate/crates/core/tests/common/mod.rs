//! Shared helpers for integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use dragform::lp::StandardLp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Random feasible LP with finite bounds: `b` is built from an interior point.
pub fn random_lp(seed: u64, max_vars: usize, max_rows: usize) -> StandardLp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(0..=max_rows.min(n));
    let mut lp = StandardLp::new(n, m);
    for j in 0..n {
        lp.c[j] = rng.gen_range(-5.0..5.0);
        let lo: f64 = rng.gen_range(-3.0..1.0);
        lp.lb[j] = lo;
        lp.ub[j] = lo + rng.gen_range(0.1..4.0);
    }
    let x0: Vec<f64> = (0..n).map(|j| rng.gen_range(lp.lb[j]..lp.ub[j])).collect();
    for i in 0..m {
        let mut row = 0.0;
        for j in 0..n {
            if rng.gen_bool(0.7) {
                let v: f64 = rng.gen_range(-4.0..4.0);
                lp.triplets.push((i, j, v));
                row += v * x0[j];
            }
        }
        lp.b[i] = row;
    }
    lp
}

fn dense_rows(lp: &StandardLp) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; lp.num_vars]; lp.num_rows()];
    for &(i, j, v) in &lp.triplets {
        a[i][j] += v;
    }
    a
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    for col in 0..k {
        let p = (col..k).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[p][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..k {
            let f = a[r][col] / a[col][col];
            for c in col..k {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Best objective over every basic feasible solution: pick a set of basic
/// columns, put every other column at one of its bounds, solve for the rest.
/// Rank-deficient row sets are handled by also trying smaller bases over
/// subsets of rows that reproduce the dropped rows.
pub fn enumerate_vertices(lp: &StandardLp) -> Option<f64> {
    let a = dense_rows(lp);
    let (m, n) = (lp.num_rows(), lp.num_vars);
    let mut best: Option<f64> = None;
    for basis_mask in 0u32..(1 << n) {
        if basis_mask.count_ones() as usize > m {
            continue;
        }
        let basic: Vec<usize> = (0..n).filter(|j| basis_mask & (1 << j) != 0).collect();
        let nonbasic: Vec<usize> = (0..n).filter(|j| basis_mask & (1 << j) == 0).collect();
        for bound_mask in 0u32..(1 << nonbasic.len()) {
            let mut x = vec![0.0; n];
            for (k, &j) in nonbasic.iter().enumerate() {
                x[j] = if bound_mask & (1 << k) != 0 { lp.ub[j] } else { lp.lb[j] };
            }
            let rhs: Vec<f64> = (0..m)
                .map(|i| lp.b[i] - nonbasic.iter().map(|&j| a[i][j] * x[j]).sum::<f64>())
                .collect();
            // choose |basic| rows that are independent on the basic columns
            let k = basic.len();
            let solved = if k == 0 {
                Some(vec![])
            } else {
                let mut found = None;
                for row_mask in 0u32..(1 << m) {
                    if row_mask.count_ones() as usize != k {
                        continue;
                    }
                    let rows: Vec<usize> = (0..m).filter(|i| row_mask & (1 << i) != 0).collect();
                    let sub: Vec<Vec<f64>> = rows.iter().map(|&i| basic.iter().map(|&j| a[i][j]).collect()).collect();
                    if let Some(xb) = solve_square(sub, rows.iter().map(|&i| rhs[i]).collect()) {
                        found = Some(xb);
                        break;
                    }
                }
                found
            };
            let Some(xb) = solved else { continue };
            for (k, &j) in basic.iter().enumerate() {
                x[j] = xb[k];
            }
            if lp.max_violation(&x) <= 1e-9 {
                let obj = lp.objective(&x);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
    }
    best
}
