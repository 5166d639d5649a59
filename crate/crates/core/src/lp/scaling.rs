//! Geometric-mean row and column equilibration.
//!
//! The scaled problem is `A' = R A C`, `x = C x'`, `y = R y'`. Factors are
//! rounded to powers of two so scaling itself introduces no rounding error.

use super::{LpStatus, RawSolution, StandardLp};

const PASSES: usize = 6;

pub(crate) struct Scaled {
    pub lp: StandardLp,
    row: Vec<f64>,
    col: Vec<f64>,
}

impl Scaled {
    pub fn identity(lp: &StandardLp) -> Self {
        Self {
            lp: lp.clone(),
            row: vec![1.0; lp.num_rows()],
            col: vec![1.0; lp.num_vars],
        }
    }

    pub fn unscale(&self, raw: RawSolution) -> RawSolution {
        if raw.status != LpStatus::Optimal {
            return raw;
        }
        RawSolution {
            x: raw.x.iter().zip(&self.col).map(|(x, c)| x * c).collect(),
            duals: raw
                .duals
                .map(|y| y.iter().zip(&self.row).map(|(y, r)| y * r).collect()),
            ..raw
        }
    }
}

fn pow2(x: f64) -> f64 {
    if x.is_finite() && x > 0.0 {
        2f64.powi(x.log2().round() as i32)
    } else {
        1.0
    }
}

pub(crate) fn equilibrate(lp: &StandardLp) -> Scaled {
    let (m, n) = (lp.num_rows(), lp.num_vars);
    let mut row = vec![1.0f64; m];
    let mut col = vec![1.0f64; n];
    for _ in 0..PASSES {
        let mut rmin = vec![f64::INFINITY; m];
        let mut rmax = vec![0.0f64; m];
        for &(i, j, v) in &lp.triplets {
            let a = (v * row[i] * col[j]).abs();
            if a > 0.0 {
                rmin[i] = rmin[i].min(a);
                rmax[i] = rmax[i].max(a);
            }
        }
        for i in 0..m {
            if rmax[i] > 0.0 {
                row[i] /= (rmin[i] * rmax[i]).sqrt();
            }
        }
        let mut cmin = vec![f64::INFINITY; n];
        let mut cmax = vec![0.0f64; n];
        for &(i, j, v) in &lp.triplets {
            let a = (v * row[i] * col[j]).abs();
            if a > 0.0 {
                cmin[j] = cmin[j].min(a);
                cmax[j] = cmax[j].max(a);
            }
        }
        for j in 0..n {
            if cmax[j] > 0.0 {
                col[j] /= (cmin[j] * cmax[j]).sqrt();
            }
        }
    }
    let row: Vec<f64> = row.into_iter().map(pow2).collect();
    let col: Vec<f64> = col.into_iter().map(pow2).collect();

    let scaled = StandardLp {
        num_vars: n,
        c: lp.c.iter().zip(&col).map(|(c, s)| c * s).collect(),
        triplets: lp
            .triplets
            .iter()
            .map(|&(i, j, v)| (i, j, v * row[i] * col[j]))
            .collect(),
        b: lp.b.iter().zip(&row).map(|(b, r)| b * r).collect(),
        lb: lp.lb.iter().zip(&col).map(|(l, s)| l / s).collect(),
        ub: lp.ub.iter().zip(&col).map(|(u, s)| u / s).collect(),
    };
    Scaled { lp: scaled, row, col }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn badly_scaled_rows_are_balanced() {
        let mut lp = StandardLp::new(2, 2);
        lp.triplets = vec![(0, 0, 1e6), (0, 1, 2e6), (1, 0, 1e-5), (1, 1, -3e-5)];
        lp.b = vec![1e6, 0.0];
        let s = equilibrate(&lp);
        let max = s.lp.triplets.iter().map(|t| t.2.abs()).fold(0.0, f64::max);
        let min = s.lp.triplets.iter().map(|t| t.2.abs()).fold(f64::INFINITY, f64::min);
        assert!(max / min < 8.0, "{max} {min}");
        assert!(s.row.iter().chain(&s.col).all(|f| f.log2().fract() == 0.0));
    }

    #[test]
    fn unscale_inverts() {
        let mut lp = StandardLp::new(2, 1);
        lp.triplets = vec![(0, 0, 1e3), (0, 1, 1e-3)];
        lp.b = vec![5.0];
        let s = equilibrate(&lp);
        let xs = vec![1.5, -2.0];
        let raw = RawSolution { status: LpStatus::Optimal, x: xs.clone(), duals: Some(vec![0.5]), iterations: 0 };
        let out = s.unscale(raw);
        // residual is invariant: row r (A x - b) = A' x' - b'
        let r_scaled: f64 = s.lp.triplets.iter().map(|&(_, j, v)| v * xs[j]).sum::<f64>() - s.lp.b[0];
        let r_orig = lp.row_residuals(&out.x)[0];
        assert!((r_scaled - s.row[0] * r_orig).abs() < 1e-9 * r_scaled.abs().max(1.0));
    }
}
