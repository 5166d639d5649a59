//! Sparse simplex backend for large planner problems, built on `microlp`.

use microlp::{ComparisonOp, Error, LinearExpr, OptimizationDirection, Problem, SolveOutcome};

use super::{LpStatus, RawSolution, StandardLp};

pub(crate) fn solve(lp: &StandardLp, max_iter: usize) -> RawSolution {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..lp.num_vars)
        .map(|j| problem.add_var(lp.c[j], (lp.lb[j], lp.ub[j])))
        .collect();

    let mut rows: Vec<LinearExpr> = (0..lp.num_rows()).map(|_| LinearExpr::empty()).collect();
    for (j, col) in lp.columns().into_iter().enumerate() {
        for (i, v) in col {
            rows[i].add(vars[j], v);
        }
    }
    for (expr, &b) in rows.into_iter().zip(&lp.b) {
        problem.add_constraint(expr, ComparisonOp::Eq, b);
    }

    let fail = |status| RawSolution { status, x: Vec::new(), duals: None, iterations: 0 };
    match problem.solve() {
        Ok(SolveOutcome::Solution(sol)) => {
            let iterations = sol.stats().lp_iterations as usize;
            if iterations > max_iter {
                log::warn!("sparse simplex used {iterations} iterations (budget {max_iter})");
            }
            RawSolution {
                status: LpStatus::Optimal,
                x: vars.iter().map(|&v| sol.var_value(v)).collect(),
                duals: None,
                iterations,
            }
        }
        Ok(_) => fail(LpStatus::IterationLimit),
        Err(Error::Infeasible) => fail(LpStatus::Infeasible),
        Err(Error::Unbounded) => fail(LpStatus::Unbounded),
        Err(e) => {
            log::warn!("sparse simplex stopped: {e}");
            fail(LpStatus::IterationLimit)
        }
    }
}
