//! Trajectory optimization over the discrete relative model.
//!
//! For `n` satellites (chief plus `n − 1` deputies) and `N` state nodes the
//! planner minimizes
//!
//! ```text
//! Σ_k Σ_p w_θ·|Δθ̄_k^p − target^p|  +  Σ_i Σ_q w_u·u_i^q
//! ```
//!
//! subject to the exact discrete dynamics, hard `Δa` bounds at every node,
//! drag-ratio bounds and `Δa_N = 0` for every pair. Along-track tracking is a
//! cost, so the program stays feasible for unreachable targets; the L1 form
//! gives bang-bang schedules.
//!
//! A transition may span several base steps (`blocks`): its model is the
//! base model composed `L` times and its stage costs are weighted by `L`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{self, Backend, LpError, LpStatus, SolveOptions, StandardLp};
use crate::relative::{
    discretize, feasible_raan, DiscreteLinearModel, FormationState, GainSet, RelativeError,
    RelativePairState,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("{what}: got {got}, expected {expected}")]
    Dimension { what: &'static str, got: usize, expected: usize },
    #[error("invalid plan configuration: {0}")]
    Config(String),
    #[error("model step {model} s differs from configured stage duration {config} s")]
    StepMismatch { model: f64, config: f64 },
    #[error(transparent)]
    Relative(#[from] RelativeError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("planning problem is infeasible ({rows} rows, {cols} columns)")]
    Infeasible { rows: usize, cols: usize },
    #[error("planner LP ended with status {status:?} after {iterations} iterations")]
    Solver { status: LpStatus, iterations: usize },
}

/// Along-track goal for one deputy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTarget {
    /// Wrapped final separation, rad, `|d_theta_f| < 2π`.
    pub d_theta_f: f64,
    /// Whole extra revolutions.
    pub ell: i64,
}

impl PairTarget {
    /// Unwrapped along-track target, rad.
    pub fn total(&self) -> f64 {
        self.d_theta_f + TAU * self.ell as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationTarget {
    pub pairs: Vec<PairTarget>,
}

impl FormationTarget {
    pub fn validate(&self) -> Result<(), PlanError> {
        for p in &self.pairs {
            if !(p.d_theta_f.abs() < TAU) {
                return Err(RelativeError::WrappedTarget(p.d_theta_f).into());
            }
        }
        Ok(())
    }

    /// Final RAAN separations implied by the targets under `g`.
    pub fn implied_raan(&self, g: &GainSet) -> Result<Vec<f64>, PlanError> {
        self.pairs
            .iter()
            .map(|p| feasible_raan(p.d_theta_f, p.ell, g).map_err(PlanError::from))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    /// Number of state nodes `N`, including the initial one.
    pub n_stages: usize,
    /// Base stage duration, s.
    pub dt: f64,
    pub d_a_min: f64,
    pub d_a_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub w_theta: f64,
    pub w_u: f64,
    /// Extra factor on the terminal tracking weight.
    pub terminal_boost: f64,
    /// Length of each of the `N − 1` transitions in base steps; all ones
    /// when absent.
    pub blocks: Option<Vec<usize>>,
}

impl PlanConfig {
    pub fn new(n_stages: usize, dt: f64) -> Self {
        Self {
            n_stages,
            dt,
            d_a_min: -10e3,
            d_a_max: 10e3,
            u_min: 0.2,
            u_max: 1.0,
            w_theta: 1.0,
            w_u: 1.0,
            terminal_boost: 1.0,
            blocks: None,
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: String| Err(PlanError::Config(m));
        if self.n_stages < 2 {
            return bad(format!("n_stages {} must be at least 2", self.n_stages));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt {} must be positive", self.dt));
        }
        if !(self.u_min >= 0.0 && self.u_min < self.u_max && self.u_max <= 1.0) {
            return bad(format!("need 0 <= u_min < u_max <= 1, got [{}, {}]", self.u_min, self.u_max));
        }
        if !(self.d_a_min < 0.0 && 0.0 < self.d_a_max) {
            return bad(format!("need d_a_min < 0 < d_a_max, got [{}, {}]", self.d_a_min, self.d_a_max));
        }
        if !(self.w_theta > 0.0 && self.w_u >= 0.0 && self.terminal_boost > 0.0) {
            return bad("weights must be positive".into());
        }
        if let Some(b) = &self.blocks {
            if b.len() != self.n_stages - 1 {
                return Err(PlanError::Dimension { what: "blocks", got: b.len(), expected: self.n_stages - 1 });
            }
            if b.contains(&0) {
                return bad("block lengths must be at least 1".into());
            }
        }
        Ok(())
    }

    pub fn block_lengths(&self) -> Vec<usize> {
        self.blocks.clone().unwrap_or_else(|| vec![1; self.n_stages.saturating_sub(1)])
    }

    /// Total span in base steps.
    pub fn span_steps(&self) -> usize {
        self.block_lengths().iter().sum()
    }
}

/// Transition lengths for `total` base steps using at most `max_stages`
/// transitions: the first `fine` are single steps, the rest grow
/// geometrically.
pub fn block_lengths(total: usize, fine: usize, max_stages: usize) -> Vec<usize> {
    if total <= max_stages || max_stages <= fine {
        return vec![1; total];
    }
    let coarse_total = (total - fine) as f64;
    let m = (max_stages - fine) as i32;
    let sum = |r: f64| {
        if (r - 1.0).abs() < 1e-12 {
            m as f64
        } else {
            (r.powi(m) - 1.0) / (r - 1.0)
        }
    };
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    while sum(hi) < coarse_total {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) < coarse_total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let scale = coarse_total / sum(hi);
    let mut out = vec![1; fine];
    let (mut acc, mut prev) = (0.0, 0usize);
    for k in 0..m {
        acc += scale * hi.powi(k);
        let boundary = if k == m - 1 { total - fine } else { acc.round() as usize };
        if boundary > prev {
            out.push(boundary - prev);
            prev = boundary;
        }
    }
    out
}

/// Column and row bookkeeping of the planning LP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LpLayout {
    pub n_sats: usize,
    pub n_pairs: usize,
    pub n_nodes: usize,
    pub state_vars: usize,
    pub control_vars: usize,
    pub slack_vars: usize,
    /// Nonnegative columns that turn the two slack inequalities into equalities.
    pub surplus_vars: usize,
    pub dynamics_rows: usize,
    pub terminal_rows: usize,
    pub slack_rows: usize,
}

impl LpLayout {
    pub fn new(n_sats: usize, n_nodes: usize) -> Self {
        let p = n_sats - 1;
        Self {
            n_sats,
            n_pairs: p,
            n_nodes,
            state_vars: 2 * p * n_nodes,
            control_vars: n_sats * (n_nodes - 1),
            slack_vars: p * n_nodes,
            surplus_vars: 2 * p * n_nodes,
            dynamics_rows: 2 * p * (n_nodes - 1),
            terminal_rows: p,
            slack_rows: 2 * p * n_nodes,
        }
    }

    pub fn structural_vars(&self) -> usize {
        self.state_vars + self.control_vars + self.slack_vars
    }

    pub fn total_vars(&self) -> usize {
        self.structural_vars() + self.surplus_vars
    }

    pub fn total_rows(&self) -> usize {
        self.dynamics_rows + self.terminal_rows + self.slack_rows
    }

    /// Column of component `c` (0 = Δθ̄, 1 = Δa) of pair `p` at node `k`.
    pub fn state(&self, k: usize, p: usize, c: usize) -> usize {
        (k * self.n_pairs + p) * 2 + c
    }

    pub fn control(&self, i: usize, q: usize) -> usize {
        self.state_vars + i * self.n_sats + q
    }

    pub fn slack(&self, k: usize, p: usize) -> usize {
        self.state_vars + self.control_vars + k * self.n_pairs + p
    }

    fn surplus(&self, k: usize, p: usize, side: usize) -> usize {
        self.structural_vars() + 2 * (k * self.n_pairs + p) + side
    }
}

/// `model` applied `l` times, by repeated squaring.
pub fn model_power(model: &DiscreteLinearModel, l: usize) -> DiscreteLinearModel {
    let mut result: Option<DiscreteLinearModel> = None;
    let mut base = *model;
    let mut e = l;
    while e > 0 {
        if e & 1 == 1 {
            result = Some(match result {
                None => base,
                Some(r) => r.then(&base),
            });
        }
        e >>= 1;
        if e > 0 {
            base = base.then(&base);
        }
    }
    result.expect("power of at least one")
}

fn check_dims(x0: &FormationState, target: &FormationTarget) -> Result<usize, PlanError> {
    if x0.deputies.is_empty() {
        return Err(PlanError::Dimension { what: "deputies", got: 0, expected: 1 });
    }
    if x0.deputies.len() != target.pairs.len() {
        return Err(PlanError::Dimension {
            what: "target pairs",
            got: target.pairs.len(),
            expected: x0.deputies.len(),
        });
    }
    Ok(x0.deputies.len() + 1)
}

pub fn build_lp(
    x0: &FormationState,
    target: &FormationTarget,
    cfg: &PlanConfig,
    model: &DiscreteLinearModel,
) -> Result<(StandardLp, LpLayout), PlanError> {
    cfg.validate()?;
    target.validate()?;
    let n_sats = check_dims(x0, target)?;
    if (model.dt - cfg.dt).abs() > 1e-9 * cfg.dt {
        return Err(PlanError::StepMismatch { model: model.dt, config: cfg.dt });
    }
    let n = cfg.n_stages;
    let lay = LpLayout::new(n_sats, n);
    let p_count = lay.n_pairs;
    let mut lp = StandardLp::new(lay.total_vars(), lay.total_rows());

    let blocks = cfg.block_lengths();
    let mut models = std::collections::BTreeMap::new();
    for &l in &blocks {
        models.entry(l).or_insert_with(|| model_power(model, l));
    }

    // bounds
    for k in 0..n {
        for p in 0..p_count {
            let (th, da) = (lay.state(k, p, 0), lay.state(k, p, 1));
            if k == 0 {
                let x = x0.deputies[p];
                lp.lb[th] = x.d_theta;
                lp.ub[th] = x.d_theta;
                lp.lb[da] = x.d_a;
                lp.ub[da] = x.d_a;
            } else {
                lp.lb[th] = f64::NEG_INFINITY;
                lp.ub[th] = f64::INFINITY;
                lp.lb[da] = cfg.d_a_min;
                lp.ub[da] = cfg.d_a_max;
            }
        }
    }
    for i in 0..n - 1 {
        for q in 0..n_sats {
            let j = lay.control(i, q);
            lp.lb[j] = cfg.u_min;
            lp.ub[j] = cfg.u_max;
            lp.c[j] = cfg.w_u * blocks[i] as f64;
        }
    }
    for k in 0..n {
        let stage_weight = if k == 0 { 1.0 } else { blocks[k - 1] as f64 };
        let boost = if k == n - 1 { cfg.terminal_boost } else { 1.0 };
        for p in 0..p_count {
            lp.c[lay.slack(k, p)] = cfg.w_theta * stage_weight * boost;
        }
    }

    // (a) dynamics: x_{i+1} − Ad x_i − Bd (u_dep − u_chief) = 0
    let mut row = 0;
    for i in 0..n - 1 {
        let m = &models[&blocks[i]];
        for p in 0..p_count {
            for c in 0..2 {
                lp.triplets.push((row, lay.state(i + 1, p, c), 1.0));
                for cc in 0..2 {
                    if m.ad[c][cc] != 0.0 {
                        lp.triplets.push((row, lay.state(i, p, cc), -m.ad[c][cc]));
                    }
                }
                lp.triplets.push((row, lay.control(i, p + 1), -m.bd[c]));
                lp.triplets.push((row, lay.control(i, 0), m.bd[c]));
                row += 1;
            }
        }
    }
    // (b) terminal altitude match
    for p in 0..p_count {
        lp.triplets.push((row, lay.state(n - 1, p, 1), 1.0));
        row += 1;
    }
    // slack: s − (θ − tgt) − e1 = 0 and s + (θ − tgt) − e2 = 0
    for k in 0..n {
        for p in 0..p_count {
            let tgt = target.pairs[p].total();
            let (s, th) = (lay.slack(k, p), lay.state(k, p, 0));
            lp.triplets.push((row, s, 1.0));
            lp.triplets.push((row, th, -1.0));
            lp.triplets.push((row, lay.surplus(k, p, 0), -1.0));
            lp.b[row] = -tgt;
            row += 1;
            lp.triplets.push((row, s, 1.0));
            lp.triplets.push((row, th, 1.0));
            lp.triplets.push((row, lay.surplus(k, p, 1), -1.0));
            lp.b[row] = tgt;
            row += 1;
        }
    }
    debug_assert_eq!(row, lay.total_rows());
    Ok((lp, lay))
}

/// Forward simulation of the discrete model under per-satellite controls.
pub fn simulate_plan(
    x0: &FormationState,
    u: &[Vec<f64>],
    blocks: &[usize],
    model: &DiscreteLinearModel,
) -> Vec<FormationState> {
    let mut out = vec![x0.clone()];
    let mut cur = x0.clone();
    for (i, &l) in blocks.iter().enumerate() {
        let m = model_power(model, l);
        for (p, d) in cur.deputies.iter_mut().enumerate() {
            let du = u[p + 1][i] - u[0][i];
            *d = RelativePairState::from_array(m.apply(d.as_array(), du));
        }
        out.push(cur.clone());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSolution {
    /// `u[sat][transition]`.
    pub u: Vec<Vec<f64>>,
    /// Length of each transition in base steps.
    pub blocks: Vec<usize>,
    /// Predicted state at every node, from re-simulating `u`.
    pub predicted: Vec<FormationState>,
    pub objective: f64,
    pub iterations: usize,
    pub backend: Backend,
}

impl PlanSolution {
    /// Controls expanded to one value per base step.
    pub fn expanded(&self) -> Vec<Vec<f64>> {
        self.u
            .iter()
            .map(|us| {
                us.iter()
                    .zip(&self.blocks)
                    .flat_map(|(&u, &l)| std::iter::repeat_n(u, l))
                    .collect()
            })
            .collect()
    }

    /// Node times in base steps from the start of the plan.
    pub fn node_steps(&self) -> Vec<usize> {
        std::iter::once(0)
            .chain(self.blocks.iter().scan(0, |acc, &l| {
                *acc += l;
                Some(*acc)
            }))
            .collect()
    }

    pub fn terminal(&self) -> &FormationState {
        self.predicted.last().expect("at least one node")
    }
}

pub fn plan(
    x0: &FormationState,
    target: &FormationTarget,
    cfg: &PlanConfig,
    gains: &GainSet,
    opts: &SolveOptions,
) -> Result<PlanSolution, PlanError> {
    let model = discretize(gains, cfg.dt)?;
    let (lp, lay) = build_lp(x0, target, cfg, &model)?;
    let res = lp::solve(&lp, opts)?;
    match res.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(PlanError::Infeasible { rows: lp.num_rows(), cols: lp.num_vars })
        }
        status => return Err(PlanError::Solver { status, iterations: res.iterations }),
    }
    let blocks = cfg.block_lengths();
    let u: Vec<Vec<f64>> = (0..lay.n_sats)
        .map(|q| {
            (0..cfg.n_stages - 1)
                .map(|i| res.x[lay.control(i, q)].clamp(cfg.u_min, cfg.u_max))
                .collect()
        })
        .collect();
    let predicted = simulate_plan(x0, &u, &blocks, &model);
    Ok(PlanSolution {
        u,
        blocks,
        predicted,
        objective: res.objective,
        iterations: res.iterations,
        backend: res.backend,
    })
}
