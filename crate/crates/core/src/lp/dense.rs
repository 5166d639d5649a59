//! Dense bounded-variable revised simplex.
//!
//! Two phases with one artificial column per row. Pricing is Dantzig's
//! largest reduced cost; after [`STALL_LIMIT`] consecutive degenerate pivots
//! the method switches to Bland's smallest-index rule until the objective
//! strictly improves. The basis inverse is an LU factorization with partial
//! pivoting followed by product-form eta updates, refactored every
//! [`REFACTOR_EVERY`] pivots.

use super::{LpStatus, RawSolution, StandardLp};

pub(crate) const STALL_LIMIT: usize = 50;
pub(crate) const REFACTOR_EVERY: usize = 100;

const PIVOT_TOL: f64 = 1e-9;
const STEP_EPS: f64 = 1e-12;

/// Dense LU of a square matrix with row pivoting: `P B = L U`.
struct Lu {
    m: usize,
    /// Row-major; `L` strictly below the diagonal (unit diagonal), `U` on and above.
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<f64>, m: usize) -> Option<Self> {
        let mut perm: Vec<usize> = (0..m).collect();
        for k in 0..m {
            let (p, best) = (k..m)
                .map(|r| (r, a[r * m + k].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best < 1e-13 {
                return None;
            }
            if p != k {
                for c in 0..m {
                    a.swap(k * m + c, p * m + c);
                }
                perm.swap(k, p);
            }
            let piv = a[k * m + k];
            for r in k + 1..m {
                let f = a[r * m + k] / piv;
                if f != 0.0 {
                    a[r * m + k] = f;
                    for c in k + 1..m {
                        a[r * m + c] -= f * a[k * m + c];
                    }
                } else {
                    a[r * m + k] = 0.0;
                }
            }
        }
        Some(Self { m, lu: a, perm })
    }

    /// Solves `B x = rhs`.
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for r in 0..m {
            let mut s = x[r];
            for c in 0..r {
                s -= self.lu[r * m + c] * x[c];
            }
            x[r] = s;
        }
        for r in (0..m).rev() {
            let mut s = x[r];
            for c in r + 1..m {
                s -= self.lu[r * m + c] * x[c];
            }
            x[r] = s / self.lu[r * m + r];
        }
        x
    }

    /// Solves `Bᵀ y = rhs`.
    fn solve_transpose(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut z = rhs.to_vec();
        for r in 0..m {
            let mut s = z[r];
            for c in 0..r {
                s -= self.lu[c * m + r] * z[c];
            }
            z[r] = s / self.lu[r * m + r];
        }
        for r in (0..m).rev() {
            let mut s = z[r];
            for c in r + 1..m {
                s -= self.lu[c * m + r] * z[c];
            }
            z[r] = s;
        }
        let mut y = vec![0.0; m];
        for (i, &p) in self.perm.iter().enumerate() {
            y[p] = z[i];
        }
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Zero,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    Limit,
    Singular,
}

struct Simplex {
    m: usize,
    /// Structural columns followed by one artificial per row.
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    lu: Lu,
    /// `(pivot row, entering column expressed in the previous basis)`.
    etas: Vec<(usize, Vec<f64>)>,
    iterations: usize,
    max_iter: usize,
    opt_tol: f64,
}

impl Simplex {
    fn new(lp: &StandardLp, opt_tol: f64, max_iter: usize) -> Self {
        let (m, n) = (lp.num_rows(), lp.num_vars);
        let mut cols = lp.columns();
        let mut lb = lp.lb.clone();
        let mut ub = lp.ub.clone();
        let mut x = vec![0.0; n + m];
        let mut state = Vec::with_capacity(n + m);
        for j in 0..n {
            let (s, v) = if lb[j].is_finite() {
                (VarState::AtLower, lb[j])
            } else if ub[j].is_finite() {
                (VarState::AtUpper, ub[j])
            } else {
                (VarState::Zero, 0.0)
            };
            state.push(s);
            x[j] = v;
        }
        let mut r = lp.b.clone();
        for (j, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                r[i] -= v * x[j];
            }
        }
        let mut diag = vec![0.0; m * m];
        for i in 0..m {
            let sign = if r[i] < 0.0 { -1.0 } else { 1.0 };
            cols.push(vec![(i, sign)]);
            lb.push(0.0);
            ub.push(f64::INFINITY);
            x[n + i] = r[i].abs();
            state.push(VarState::Basic);
            diag[i * m + i] = sign;
        }
        let lu = Lu::factor(diag, m).expect("diagonal basis");
        Self {
            m,
            cols,
            b: lp.b.clone(),
            lb,
            ub,
            x,
            state,
            basis: (n..n + m).collect(),
            lu,
            etas: Vec::new(),
            iterations: 0,
            max_iter,
            opt_tol,
        }
    }

    fn ftran(&self, rhs: &[f64]) -> Vec<f64> {
        let mut y = self.lu.solve(rhs);
        for (r, d) in &self.etas {
            let yr = y[*r] / d[*r];
            for (i, di) in d.iter().enumerate() {
                if i != *r {
                    y[i] -= di * yr;
                }
            }
            y[*r] = yr;
        }
        y
    }

    fn btran(&self, rhs: &[f64]) -> Vec<f64> {
        let mut c = rhs.to_vec();
        for (r, d) in self.etas.iter().rev() {
            let mut s = c[*r];
            for (i, di) in d.iter().enumerate() {
                if i != *r {
                    s -= di * c[i];
                }
            }
            c[*r] = s / d[*r];
        }
        self.lu.solve_transpose(&c)
    }

    fn dense_col(&self, j: usize) -> Vec<f64> {
        let mut a = vec![0.0; self.m];
        for &(i, v) in &self.cols[j] {
            a[i] = v;
        }
        a
    }

    /// Refactors the basis and recomputes basic values from nonbasic ones.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut bm = vec![0.0; m * m];
        for (r, &j) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                bm[i * m + r] = v;
            }
        }
        let Some(lu) = Lu::factor(bm, m) else { return false };
        self.lu = lu;
        self.etas.clear();
        let mut rhs = self.b.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                for &(i, v) in col {
                    rhs[i] -= v * self.x[j];
                }
            }
        }
        let xb = self.ftran(&rhs);
        for (r, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[r];
        }
        true
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
        self.btran(&cb)
    }

    fn run_phase(&mut self, cost: &[f64]) -> PhaseEnd {
        let mut degenerate_run = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= self.max_iter {
                return PhaseEnd::Limit;
            }
            let y = self.duals(cost);

            // pricing
            let mut entering: Option<(usize, f64, f64)> = None; // (j, d_j, direction)
            for j in 0..self.cols.len() {
                let st = self.state[j];
                if st == VarState::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let d = cost[j] - self.cols[j].iter().map(|&(i, v)| v * y[i]).sum::<f64>();
                let dir = match st {
                    VarState::AtLower if d < -self.opt_tol => 1.0,
                    VarState::AtUpper if d > self.opt_tol => -1.0,
                    VarState::Zero if d.abs() > self.opt_tol => -d.signum(),
                    _ => continue,
                };
                if bland {
                    entering = Some((j, d, dir));
                    break;
                }
                if entering.is_none_or(|(_, bd, _)| d.abs() > bd.abs()) {
                    entering = Some((j, d, dir));
                }
            }
            let Some((q, _, dir)) = entering else { return PhaseEnd::Optimal };

            // ratio test
            let w = self.ftran(&self.dense_col(q));
            let mut t_best = self.ub[q] - self.lb[q];
            let mut leave: Option<usize> = None;
            for (r, &wr) in w.iter().enumerate() {
                if wr.abs() <= PIVOT_TOL {
                    continue;
                }
                let j = self.basis[r];
                let delta = -dir * wr;
                let t = if delta < 0.0 {
                    if self.lb[j] == f64::NEG_INFINITY {
                        continue;
                    }
                    ((self.x[j] - self.lb[j]) / -delta).max(0.0)
                } else {
                    if self.ub[j] == f64::INFINITY {
                        continue;
                    }
                    ((self.ub[j] - self.x[j]) / delta).max(0.0)
                };
                let take = if t < t_best - STEP_EPS {
                    true
                } else if t > t_best + STEP_EPS {
                    false
                } else {
                    match leave {
                        None => t < t_best,
                        Some(l) if bland => j < self.basis[l],
                        Some(l) => wr.abs() > w[l].abs(),
                    }
                };
                if take {
                    t_best = t_best.min(t);
                    leave = Some(r);
                }
            }
            if t_best == f64::INFINITY {
                return PhaseEnd::Unbounded;
            }
            self.iterations += 1;

            // update primal values
            let t = t_best;
            if t != 0.0 {
                self.x[q] += dir * t;
                for (r, &wr) in w.iter().enumerate() {
                    if wr != 0.0 {
                        let j = self.basis[r];
                        self.x[j] -= dir * t * wr;
                    }
                }
            }
            if t > STEP_EPS {
                degenerate_run = 0;
                bland = false;
            } else {
                degenerate_run += 1;
                if degenerate_run >= STALL_LIMIT {
                    bland = true;
                }
            }

            match leave {
                None => {
                    // bound flip
                    if dir > 0.0 {
                        self.state[q] = VarState::AtUpper;
                        self.x[q] = self.ub[q];
                    } else {
                        self.state[q] = VarState::AtLower;
                        self.x[q] = self.lb[q];
                    }
                }
                Some(r) => {
                    let out = self.basis[r];
                    let delta = -dir * w[r];
                    if delta < 0.0 {
                        self.state[out] = VarState::AtLower;
                        self.x[out] = self.lb[out];
                    } else {
                        self.state[out] = VarState::AtUpper;
                        self.x[out] = self.ub[out];
                    }
                    self.state[q] = VarState::Basic;
                    self.basis[r] = q;
                    self.etas.push((r, w));
                    if self.etas.len() >= REFACTOR_EVERY && !self.refactor() {
                        return PhaseEnd::Singular;
                    }
                }
            }
        }
    }
}

pub(crate) fn solve(lp: &StandardLp, feas_tol: f64, opt_tol: f64, max_iter: usize) -> RawSolution {
    let n = lp.num_vars;
    let m = lp.num_rows();
    let mut s = Simplex::new(lp, opt_tol, max_iter);
    let done = |s: &Simplex, status| RawSolution {
        status,
        x: Vec::new(),
        duals: None,
        iterations: s.iterations,
    };

    let mut phase1 = vec![0.0; n + m];
    phase1[n..].iter_mut().for_each(|c| *c = 1.0);
    match s.run_phase(&phase1) {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded => unreachable!("phase one objective is bounded below"),
        PhaseEnd::Limit | PhaseEnd::Singular => return done(&s, LpStatus::IterationLimit),
    }
    if !s.refactor() {
        return done(&s, LpStatus::IterationLimit);
    }
    let b_scale = lp.b.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let infeasibility: f64 = s.x[n..].iter().sum();
    if infeasibility > feas_tol * b_scale {
        return done(&s, LpStatus::Infeasible);
    }
    for j in n..n + m {
        s.ub[j] = 0.0;
        if s.state[j] != VarState::Basic {
            s.state[j] = VarState::AtLower;
            s.x[j] = 0.0;
        }
    }

    let mut phase2 = lp.c.clone();
    phase2.resize(n + m, 0.0);
    match s.run_phase(&phase2) {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded => return done(&s, LpStatus::Unbounded),
        PhaseEnd::Limit | PhaseEnd::Singular => return done(&s, LpStatus::IterationLimit),
    }
    if !s.refactor() {
        return done(&s, LpStatus::IterationLimit);
    }
    let duals = s.duals(&phase2);
    let mut x = s.x[..n].to_vec();
    // snap basics that drifted by rounding onto their bounds
    for j in 0..n {
        if x[j] < lp.lb[j] && lp.lb[j] - x[j] <= feas_tol {
            x[j] = lp.lb[j];
        } else if x[j] > lp.ub[j] && x[j] - lp.ub[j] <= feas_tol {
            x[j] = lp.ub[j];
        }
    }
    RawSolution {
        status: LpStatus::Optimal,
        x,
        duals: Some(duals),
        iterations: s.iterations,
    }
}
