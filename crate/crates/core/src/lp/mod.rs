//! Linear programs in bounded equality form.
//!
//! ```text
//! minimize cᵀx  subject to  A x = b,  lb ≤ x ≤ ub
//! ```
//!
//! [`solve`] runs presolve, equilibration scaling and one of two backends:
//! an embedded dense bounded-variable revised simplex, or a sparse simplex
//! for problems with thousands of rows. Infeasibility and unboundedness are
//! statuses, not errors; only malformed input is an error.

mod dense;
mod dump;
mod presolve;
mod scaling;
mod sparse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dump::{parse_dump, write_dump};
pub use presolve::{presolve, Presolved};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("triplet ({row}, {col}) out of range for {rows} rows and {cols} columns")]
    TripletIndex { row: usize, col: usize, rows: usize, cols: usize },
    #[error("non-finite coefficient at ({row}, {col})")]
    NonFiniteCoefficient { row: usize, col: usize },
    #[error("variable {index}: lower bound {lb} exceeds upper bound {ub}")]
    Bounds { index: usize, lb: f64, ub: f64 },
    #[error("{what} has length {got}, expected {expected}")]
    Length { what: &'static str, got: usize, expected: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("malformed LP dump at line {line}: {msg}")]
    Dump { line: usize, msg: String },
}

/// Equality-form LP with sparse constraint triplets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardLp {
    pub num_vars: usize,
    pub c: Vec<f64>,
    /// `(row, col, value)`; duplicates are summed.
    pub triplets: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    /// May contain `-inf`.
    pub lb: Vec<f64>,
    /// May contain `+inf`.
    pub ub: Vec<f64>,
}

impl StandardLp {
    pub fn new(num_vars: usize, num_rows: usize) -> Self {
        Self {
            num_vars,
            c: vec![0.0; num_vars],
            triplets: Vec::new(),
            b: vec![0.0; num_rows],
            lb: vec![0.0; num_vars],
            ub: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars;
        for (what, len) in [("c", self.c.len()), ("lb", self.lb.len()), ("ub", self.ub.len())] {
            if len != n {
                return Err(LpError::Length { what, got: len, expected: n });
            }
        }
        if self.c.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("c"));
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("b"));
        }
        let m = self.num_rows();
        for &(row, col, v) in &self.triplets {
            if row >= m || col >= n {
                return Err(LpError::TripletIndex { row, col, rows: m, cols: n });
            }
            if !v.is_finite() {
                return Err(LpError::NonFiniteCoefficient { row, col });
            }
        }
        for (index, (&lb, &ub)) in self.lb.iter().zip(&self.ub).enumerate() {
            if lb.is_nan() || ub.is_nan() || lb > ub || lb == f64::INFINITY || ub == f64::NEG_INFINITY {
                return Err(LpError::Bounds { index, lb, ub });
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// `A x − b`.
    pub fn row_residuals(&self, x: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = self.b.iter().map(|b| -b).collect();
        for &(i, j, v) in &self.triplets {
            r[i] += v * x[j];
        }
        r
    }

    /// Largest equality residual or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.row_residuals(x).into_iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let bounds = x
            .iter()
            .zip(self.lb.iter().zip(&self.ub))
            .fold(0.0f64, |m, (&x, (&lb, &ub))| m.max(lb - x).max(x - ub));
        rows.max(bounds)
    }

    /// Columns as `(row, value)` lists with duplicates merged, rows ascending.
    pub(crate) fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_vars];
        for &(i, j, v) in &self.triplets {
            cols[j].push((i, v));
        }
        for col in &mut cols {
            col.sort_by_key(|e| e.0);
            col.dedup_by(|next, prev| {
                if next.0 == prev.0 {
                    prev.1 += next.1;
                    true
                } else {
                    false
                }
            });
            col.retain(|e| e.1 != 0.0);
        }
        cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Dense for small problems, sparse otherwise.
    #[default]
    Auto,
    Dense,
    Sparse,
}

/// Rows at or below this count go to the dense backend under [`Backend::Auto`].
pub const AUTO_DENSE_MAX_ROWS: usize = 150;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// `None` means `20·(vars + rows)`.
    pub max_iter: Option<usize>,
    pub backend: Backend,
    pub scale: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            opt_tol: 1e-8,
            max_iter: None,
            backend: Backend::Auto,
            scale: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpResult {
    pub status: LpStatus,
    /// Full-length point; meaningful when optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Row multipliers `y` with reduced costs `c − Aᵀy`; dense backend only.
    pub duals: Option<Vec<f64>>,
    pub backend: Backend,
}

impl LpResult {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn without_solution(status: LpStatus, n: usize, iterations: usize, backend: Backend) -> Self {
        Self {
            status,
            x: vec![f64::NAN; n],
            objective: f64::NAN,
            iterations,
            duals: None,
            backend,
        }
    }
}

/// Output of a backend on the reduced, scaled problem.
pub(crate) struct RawSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub duals: Option<Vec<f64>>,
    pub iterations: usize,
}

/// Reduced costs `c − Aᵀy`.
pub fn reduced_costs(lp: &StandardLp, y: &[f64]) -> Vec<f64> {
    let mut d = lp.c.clone();
    for &(i, j, v) in &lp.triplets {
        d[j] -= v * y[i];
    }
    d
}

/// Checks the simplex optimality certificate: every reduced cost has the
/// sign allowed by where its variable sits. Returns the worst violation.
pub fn certificate_violation(lp: &StandardLp, x: &[f64], y: &[f64], bound_tol: f64) -> f64 {
    let d = reduced_costs(lp, y);
    let mut worst = 0.0f64;
    for j in 0..lp.num_vars {
        let at_lb = x[j] - lp.lb[j] <= bound_tol;
        let at_ub = lp.ub[j] - x[j] <= bound_tol;
        let v = match (at_lb, at_ub) {
            (true, true) => 0.0,
            (true, false) => (-d[j]).max(0.0),
            (false, true) => d[j].max(0.0),
            (false, false) => d[j].abs(),
        };
        worst = worst.max(v);
    }
    worst
}

pub fn solve(lp: &StandardLp, opts: &SolveOptions) -> Result<LpResult, LpError> {
    lp.validate()?;
    let n = lp.num_vars;
    let backend = match opts.backend {
        Backend::Auto if lp.num_rows() <= AUTO_DENSE_MAX_ROWS => Backend::Dense,
        Backend::Auto => Backend::Sparse,
        b => b,
    };

    let pre = presolve(lp);
    let reduced = match &pre {
        Presolved::Infeasible => return Ok(LpResult::without_solution(LpStatus::Infeasible, n, 0, backend)),
        Presolved::Reduced(r) => r,
    };

    let raw = if reduced.lp.num_vars == 0 {
        RawSolution {
            status: LpStatus::Optimal,
            x: Vec::new(),
            duals: Some(vec![0.0; reduced.lp.num_rows()]),
            iterations: 0,
        }
    } else {
        let scaled = if opts.scale {
            scaling::equilibrate(&reduced.lp)
        } else {
            scaling::Scaled::identity(&reduced.lp)
        };
        let max_iter = opts
            .max_iter
            .unwrap_or(20 * (scaled.lp.num_vars + scaled.lp.num_rows()).max(1));
        let raw = match backend {
            Backend::Sparse => sparse::solve(&scaled.lp, max_iter),
            _ => dense::solve(&scaled.lp, opts.feas_tol, opts.opt_tol, max_iter),
        };
        scaled.unscale(raw)
    };

    if raw.status != LpStatus::Optimal {
        return Ok(LpResult::without_solution(raw.status, n, raw.iterations, backend));
    }
    let x = reduced.restore(&raw.x, lp);
    let duals = raw.duals.map(|y| reduced.restore_duals(&y, lp.num_rows()));
    Ok(LpResult {
        status: LpStatus::Optimal,
        objective: lp.objective(&x),
        x,
        iterations: raw.iterations,
        duals,
        backend,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp_from(c: &[f64], rows: &[(&[f64], f64)], lb: &[f64], ub: &[f64]) -> StandardLp {
        let mut lp = StandardLp::new(c.len(), rows.len());
        lp.c = c.to_vec();
        lp.lb = lb.to_vec();
        lp.ub = ub.to_vec();
        for (i, (a, b)) in rows.iter().enumerate() {
            lp.b[i] = *b;
            for (j, v) in a.iter().enumerate() {
                if *v != 0.0 {
                    lp.triplets.push((i, j, *v));
                }
            }
        }
        lp
    }

    fn all_backends() -> [SolveOptions; 3] {
        [
            SolveOptions { backend: Backend::Dense, ..Default::default() },
            SolveOptions { backend: Backend::Sparse, ..Default::default() },
            SolveOptions { backend: Backend::Dense, scale: false, ..Default::default() },
        ]
    }

    #[test]
    fn single_bounded_variable() {
        let lp = lp_from(&[-1.0], &[], &[0.0], &[1.0]);
        for o in all_backends() {
            let r = solve(&lp, &o).unwrap();
            assert_eq!(r.status, LpStatus::Optimal);
            assert!((r.x[0] - 1.0).abs() < 1e-12 && (r.objective + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_optimum_set() {
        let lp = lp_from(&[1.0, 1.0], &[(&[1.0, 1.0], 1.0)], &[0.0, 0.0], &[1.0, 1.0]);
        for o in all_backends() {
            let r = solve(&lp, &o).unwrap();
            assert!(r.is_optimal());
            assert!((r.objective - 1.0).abs() < 1e-9);
            assert!(lp.max_violation(&r.x) < 1e-9);
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let inf = lp_from(&[1.0, 1.0], &[(&[1.0, 1.0], 3.0)], &[0.0, 0.0], &[1.0, 1.0]);
        let unb = lp_from(
            &[-1.0, 0.0],
            &[(&[1.0, -1.0], 0.0)],
            &[0.0, 0.0],
            &[f64::INFINITY, f64::INFINITY],
        );
        for o in all_backends() {
            assert_eq!(solve(&inf, &o).unwrap().status, LpStatus::Infeasible);
            assert_eq!(solve(&unb, &o).unwrap().status, LpStatus::Unbounded);
        }
    }

    #[test]
    fn free_variables_and_certificate() {
        // min x0 + 2 x1 + 3 x2, x0 free, x0 - x1 = -2, x1 + x2 = 4
        let lp = lp_from(
            &[1.0, 2.0, 3.0],
            &[(&[1.0, -1.0, 0.0], -2.0), (&[0.0, 1.0, 1.0], 4.0)],
            &[f64::NEG_INFINITY, 0.0, 0.0],
            &[f64::INFINITY, 10.0, 10.0],
        );
        let r = solve(&lp, &SolveOptions { backend: Backend::Dense, ..Default::default() }).unwrap();
        assert!(r.is_optimal());
        // x1 = 0 → x0 = -2, x2 = 4: 10; x1 = 4 → x0 = 2, x2 = 0: 10. Tie: objective 10.
        assert!((r.objective - 10.0).abs() < 1e-9, "{}", r.objective);
        let y = r.duals.unwrap();
        assert!(certificate_violation(&lp, &r.x, &y, 1e-9) < 1e-8);
    }

    #[test]
    fn iteration_limit_reported() {
        let lp = lp_from(
            &[-1.0, -2.0, -3.0],
            &[(&[1.0, 1.0, 1.0], 2.0)],
            &[0.0; 3],
            &[1.0; 3],
        );
        let o = SolveOptions { backend: Backend::Dense, max_iter: Some(1), ..Default::default() };
        assert_eq!(solve(&lp, &o).unwrap().status, LpStatus::IterationLimit);
    }

    #[test]
    fn validation_errors() {
        let mut lp = lp_from(&[1.0], &[(&[1.0], 1.0)], &[0.0], &[1.0]);
        lp.triplets.push((3, 0, 1.0));
        assert!(matches!(solve(&lp, &SolveOptions::default()), Err(LpError::TripletIndex { .. })));
        let bad = lp_from(&[1.0], &[], &[2.0], &[1.0]);
        assert!(matches!(bad.validate(), Err(LpError::Bounds { .. })));
        let mut short = bad.clone();
        short.lb = vec![];
        assert!(matches!(short.validate(), Err(LpError::Length { .. })));
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let mut lp = lp_from(&[1.0, 0.0], &[(&[0.0, 1.0], 1.0)], &[0.0, 0.0], &[5.0, 5.0]);
        lp.triplets.push((0, 0, 0.5));
        lp.triplets.push((0, 0, 0.5));
        // x0 + x1 = 1, minimize x0 → x0 = 0
        for o in all_backends() {
            let r = solve(&lp, &o).unwrap();
            assert!(r.is_optimal() && r.objective.abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic() {
        let lp = lp_from(
            &[1.0, -1.0, 0.5, 2.0],
            &[(&[1.0, 1.0, 1.0, 0.0], 2.0), (&[0.0, 1.0, -1.0, 1.0], 0.5)],
            &[0.0; 4],
            &[2.0; 4],
        );
        let o = SolveOptions { backend: Backend::Dense, ..Default::default() };
        assert_eq!(solve(&lp, &o).unwrap(), solve(&lp, &o).unwrap());
    }
}
