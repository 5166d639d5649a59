//! Removal of fixed variables and empty rows.

use super::StandardLp;

/// Result of [`presolve`].
#[derive(Debug, Clone, PartialEq)]
pub enum Presolved {
    /// A row left without free columns cannot be satisfied.
    Infeasible,
    Reduced(Reduction),
}

/// Reduced problem plus what is needed to map its solution back.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub lp: StandardLp,
    /// Original index of each reduced column.
    pub kept_cols: Vec<usize>,
    /// Original index of each reduced row.
    pub kept_rows: Vec<usize>,
    /// Value of every fixed original variable (unused for kept ones).
    fixed_values: Vec<f64>,
}

impl Reduction {
    /// Expands a reduced solution to the original variable space.
    pub fn restore(&self, x_reduced: &[f64], original: &StandardLp) -> Vec<f64> {
        let mut x = self.fixed_values.clone();
        x.resize(original.num_vars, 0.0);
        for (k, &j) in self.kept_cols.iter().enumerate() {
            x[j] = x_reduced[k];
        }
        x
    }

    /// Row multipliers in the original row space; dropped rows get zero.
    pub fn restore_duals(&self, y_reduced: &[f64], num_rows: usize) -> Vec<f64> {
        let mut y = vec![0.0; num_rows];
        for (k, &i) in self.kept_rows.iter().enumerate() {
            y[i] = y_reduced[k];
        }
        y
    }

    pub fn is_identity(&self) -> bool {
        self.kept_cols.iter().enumerate().all(|(k, &j)| k == j)
            && self.kept_rows.iter().enumerate().all(|(k, &i)| k == i)
            && self.kept_cols.len() == self.fixed_values.len()
    }
}

/// Substitutes out variables with `lb == ub` and drops rows that end up
/// empty after checking they are satisfied.
pub fn presolve(lp: &StandardLp) -> Presolved {
    let n = lp.num_vars;
    let m = lp.num_rows();
    let fixed: Vec<bool> = (0..n).map(|j| lp.lb[j] == lp.ub[j]).collect();
    let fixed_values: Vec<f64> = (0..n).map(|j| if fixed[j] { lp.lb[j] } else { 0.0 }).collect();

    let mut b = lp.b.clone();
    let mut row_scale = vec![0.0f64; m];
    let mut row_has_free = vec![false; m];
    for &(i, j, v) in &lp.triplets {
        if v == 0.0 {
            continue;
        }
        if fixed[j] {
            b[i] -= v * fixed_values[j];
            row_scale[i] = row_scale[i].max((v * fixed_values[j]).abs());
        } else {
            row_has_free[i] = true;
        }
    }
    for i in 0..m {
        if !row_has_free[i] {
            let tol = 1e-9 * row_scale[i].max(lp.b[i].abs()).max(1.0);
            if b[i].abs() > tol {
                return Presolved::Infeasible;
            }
        }
    }

    let kept_cols: Vec<usize> = (0..n).filter(|&j| !fixed[j]).collect();
    let kept_rows: Vec<usize> = (0..m).filter(|&i| row_has_free[i]).collect();
    let mut col_map = vec![usize::MAX; n];
    for (k, &j) in kept_cols.iter().enumerate() {
        col_map[j] = k;
    }
    let mut row_map = vec![usize::MAX; m];
    for (k, &i) in kept_rows.iter().enumerate() {
        row_map[i] = k;
    }

    let reduced = StandardLp {
        num_vars: kept_cols.len(),
        c: kept_cols.iter().map(|&j| lp.c[j]).collect(),
        triplets: lp
            .triplets
            .iter()
            .filter(|&&(i, j, v)| !fixed[j] && v != 0.0 && row_map[i] != usize::MAX)
            .map(|&(i, j, v)| (row_map[i], col_map[j], v))
            .collect(),
        b: kept_rows.iter().map(|&i| b[i]).collect(),
        lb: kept_cols.iter().map(|&j| lp.lb[j]).collect(),
        ub: kept_cols.iter().map(|&j| lp.ub[j]).collect(),
    };
    Presolved::Reduced(Reduction {
        lp: reduced,
        kept_cols,
        kept_rows,
        fixed_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve, LpStatus, SolveOptions};

    fn sample() -> StandardLp {
        let mut lp = StandardLp::new(3, 2);
        lp.c = vec![1.0, 2.0, 3.0];
        lp.triplets = vec![(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0), (1, 2, -1.0)];
        lp.b = vec![1.0, 0.0];
        lp.ub = vec![1.0; 3];
        lp
    }

    #[test]
    fn no_fixed_is_identity() {
        let lp = sample();
        match presolve(&lp) {
            Presolved::Reduced(r) => {
                assert!(r.is_identity());
                assert_eq!(r.lp, lp);
                assert_eq!(r.restore(&[0.1, 0.2, 0.3], &lp), vec![0.1, 0.2, 0.3]);
            }
            Presolved::Infeasible => panic!(),
        }
    }

    #[test]
    fn all_fixed_consistent() {
        let mut lp = sample();
        lp.lb = vec![0.5, 0.5, 0.5];
        lp.ub = lp.lb.clone();
        let Presolved::Reduced(r) = presolve(&lp) else { panic!() };
        assert_eq!(r.lp.num_vars, 0);
        assert_eq!(r.lp.num_rows(), 0);
        let res = solve(&lp, &SolveOptions::default()).unwrap();
        assert_eq!(res.status, LpStatus::Optimal);
        assert_eq!(res.x, vec![0.5, 0.5, 0.5]);
        assert_eq!(res.objective, 3.0);
    }

    #[test]
    fn fixed_violating_row() {
        let mut lp = sample();
        lp.lb = vec![0.7, 0.7, 0.0];
        lp.ub = vec![0.7, 0.7, 1.0];
        assert_eq!(presolve(&lp), Presolved::Infeasible);
        assert_eq!(solve(&lp, &SolveOptions::default()).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn partial_fix_restores() {
        let mut lp = sample();
        lp.lb[0] = 0.25;
        lp.ub[0] = 0.25;
        let Presolved::Reduced(r) = presolve(&lp) else { panic!() };
        assert_eq!(r.kept_cols, vec![1, 2]);
        assert_eq!(r.lp.b, vec![0.75, 0.0]);
        let res = solve(&lp, &SolveOptions::default()).unwrap();
        assert_eq!(res.x, vec![0.25, 0.75, 0.75]);
    }
}
