//! Shrinking-horizon model-predictive controller and the closed-loop run.
//!
//! Every `K` orbits the controller measures trailing one-orbit mean elements
//! from the truth simulation, re-solves the planner over the orbits left
//! until the fixed final time, and applies the first `K` single-orbit
//! controls as a zero-order hold.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::reference_drag;
use crate::lp::SolveOptions;
use crate::orbital::{orbital_period, wrap_pi, EarthConstants};
use crate::par::{self, Execution};
use crate::planner::{self, block_lengths, FormationTarget, PlanConfig, PlanSolution};
use crate::propagator::{
    extract_mean, step, ForceModel, MeanElements, OrbitHistory, PropagationError, SatelliteSimState,
    Trajectory,
};
use crate::relative::{
    compute_gains, discretize, feasible_raan, spherical_distance, FormationState, GainSet,
    RelativePairState,
};
use crate::report::{
    trajectory_file_name, ChiefSummary, EpochRecord, PairReport, RunStatus, SimulationReport,
    SimulationRun, SECONDS_PER_MONTH,
};
use crate::scenario::{ConfigError, PlanSettings, ScenarioConfig};

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcConfig {
    pub replan_interval_orbits: usize,
    pub horizon_orbits: usize,
    #[serde(default = "yes")]
    pub relinearize: bool,
    /// Largest number of plan transitions; longer horizons are blocked.
    #[serde(default = "MpcConfig::default_max_stages")]
    pub max_plan_stages: usize,
    /// Single-orbit transitions kept at the start of every plan.
    #[serde(default = "MpcConfig::default_fine")]
    pub fine_stages: usize,
    /// Remaining-orbit count below which the terminal weight is boosted.
    #[serde(default = "MpcConfig::default_endgame")]
    pub endgame_orbits: usize,
    #[serde(default = "MpcConfig::default_boost")]
    pub terminal_boost: f64,
}

impl MpcConfig {
    fn default_max_stages() -> usize {
        60
    }
    fn default_fine() -> usize {
        10
    }
    fn default_endgame() -> usize {
        10
    }
    fn default_boost() -> f64 {
        10.0
    }

    pub fn new(replan_interval_orbits: usize, horizon_orbits: usize) -> Self {
        Self {
            replan_interval_orbits,
            horizon_orbits,
            relinearize: true,
            max_plan_stages: Self::default_max_stages(),
            fine_stages: Self::default_fine(),
            endgame_orbits: Self::default_endgame(),
            terminal_boost: Self::default_boost(),
        }
    }
}

#[derive(Debug, Error)]
pub enum MpcError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("horizon exhausted")]
    HorizonExhausted,
    #[error("initial state: {0}")]
    Initial(String),
}

/// Mutable controller bookkeeping carried from epoch to epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    pub orbits_elapsed: usize,
    pub horizon: usize,
    pub last_plan: Option<PlanSolution>,
    pub gains: GainSet,
    /// Controls of the most recently commanded orbit, per satellite.
    pub last_u: Vec<f64>,
}

impl ControllerState {
    pub fn new(horizon: usize, gains: GainSet, u0: Vec<f64>) -> Self {
        Self {
            orbits_elapsed: 0,
            horizon,
            last_plan: None,
            gains,
            last_u: u0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.horizon.saturating_sub(self.orbits_elapsed)
    }
}

/// Commands for the orbits until the next epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochCommand {
    /// `u[sat][orbit]`
    pub u: Vec<Vec<f64>>,
    /// False when coasting or holding after a planner failure.
    pub planned: bool,
    pub failure: Option<String>,
}

impl EpochCommand {
    pub fn orbits(&self) -> usize {
        self.u.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub mpc: MpcConfig,
    pub plan: PlanSettings,
    pub target: FormationTarget,
    pub solve: SolveOptions,
}

impl Controller {
    pub fn from_scenario(s: &ScenarioConfig) -> Self {
        Self {
            mpc: s.mpc.clone(),
            plan: s.plan.clone(),
            target: s.formation_target(),
            solve: SolveOptions {
                backend: s.plan.backend,
                ..SolveOptions::default()
            },
        }
    }

    /// Planner setup for `remaining` orbits left: one node per remaining
    /// orbit, single-orbit transitions for at least the first `K`, coarser
    /// blocks further out, and a boosted terminal weight in the endgame.
    pub fn plan_config(&self, remaining: usize, dt: f64) -> PlanConfig {
        let fine = self.mpc.replan_interval_orbits.max(self.mpc.fine_stages);
        let blocks = block_lengths(remaining - 1, fine, self.mpc.max_plan_stages);
        let mut cfg = self.plan.plan_config(blocks.len() + 1, dt);
        if blocks.iter().any(|&l| l > 1) {
            cfg.blocks = Some(blocks);
        }
        if remaining < self.mpc.endgame_orbits {
            cfg.terminal_boost = self.mpc.terminal_boost;
        }
        cfg
    }

    /// One replanning step from the measured relative state. On a planner
    /// failure the previous controls are held and the failure is reported.
    pub fn control_epoch(
        &self,
        measured: &FormationState,
        gains: GainSet,
        dt: f64,
        st: &mut ControllerState,
    ) -> Result<EpochCommand, MpcError> {
        let r = st.remaining();
        if r == 0 {
            return Err(MpcError::HorizonExhausted);
        }
        st.gains = gains;
        let n_sats = measured.deputies.len() + 1;
        if r == 1 {
            // a single node has no transition left to plan
            st.last_u = vec![self.plan.u_min; n_sats];
            return Ok(EpochCommand {
                u: vec![vec![self.plan.u_min]; n_sats],
                planned: false,
                failure: None,
            });
        }
        let apply = self.mpc.replan_interval_orbits.min(r - 1);
        let cfg = self.plan_config(r, dt);
        match planner::plan(measured, &self.target, &cfg, &gains, &self.solve) {
            Ok(sol) => {
                let u: Vec<Vec<f64>> = sol.expanded().into_iter().map(|us| us[..apply].to_vec()).collect();
                st.last_u = u.iter().map(|us| us[apply - 1]).collect();
                st.last_plan = Some(sol);
                Ok(EpochCommand { u, planned: true, failure: None })
            }
            Err(e) => Ok(EpochCommand {
                u: st.last_u.iter().map(|&x| vec![x; apply]).collect(),
                planned: false,
                failure: Some(e.to_string()),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub exec: Execution,
    /// Print one line per epoch to standard error.
    pub progress: bool,
}

/// One satellite of the truth simulation.
#[derive(Debug, Clone)]
struct SatRunner {
    state: SatelliteSimState,
    history: OrbitHistory,
    samples: Vec<SatelliteSimState>,
    u: f64,
}

impl SatRunner {
    fn new(state: SatelliteSimState, keep_s: f64, mu: f64) -> Self {
        let mut history = OrbitHistory::new(keep_s);
        history.push(state.sample(mu));
        Self { state, history, samples: vec![state], u: state.u_applied }
    }

    fn step_once(&mut self, index: u64, dt: f64, model: &ForceModel, every: u64) -> Result<(), PropagationError> {
        self.state = step(&self.state, self.u, dt, model)?;
        self.history.push(self.state.sample(model.constants.mu));
        if index.is_multiple_of(every) {
            self.samples.push(self.state);
        }
        Ok(())
    }

    fn run(&mut self, first: u64, n: u64, dt: f64, model: &ForceModel, every: u64) -> Result<(), PropagationError> {
        (first..first + n).try_for_each(|k| self.step_once(k, dt, model, every))
    }

    fn osculating_mean(&self, mu: f64) -> MeanElements {
        let s = self.state.sample(mu);
        MeanElements {
            a_mean: s.a,
            raan_mean: s.raan_cum,
            theta_mean_cum: s.theta_cum,
            window: 0.0,
            epoch: s.t,
        }
    }
}

/// Mean elements of every satellite at the current time.
struct Measurement {
    means: Vec<MeanElements>,
    period: f64,
}

impl Measurement {
    fn relative(&self) -> FormationState {
        let c = &self.means[0];
        FormationState {
            chief: 0,
            deputies: self.means[1..]
                .iter()
                .map(|d| RelativePairState {
                    d_theta: d.theta_mean_cum - c.theta_mean_cum,
                    d_a: d.a_mean - c.a_mean,
                })
                .collect(),
        }
    }

    fn d_raan(&self) -> Vec<f64> {
        self.means[1..].iter().map(|d| d.raan_mean - self.means[0].raan_mean).collect()
    }
}

struct Simulation<'a> {
    scn: &'a ScenarioConfig,
    model: ForceModel,
    atm: std::sync::Arc<crate::environment::AtmosphereTable>,
    sats: Vec<SatRunner>,
    times: Vec<f64>,
    step_index: u64,
    every: u64,
    theta0: f64,
    exec: Execution,
}

impl Simulation<'_> {
    fn c(&self) -> &EarthConstants {
        &self.scn.constants
    }

    /// Measured draconic period from the chief's history, Keplerian as a
    /// fallback.
    fn period(&self) -> f64 {
        let chief = &self.sats[0];
        let now = chief.state;
        chief
            .history
            .time_at_theta(now.theta_cum - TAU)
            .map(|t0| now.t - t0)
            .unwrap_or_else(|| orbital_period(now.sample(self.c().mu).a, self.c()))
    }

    fn measure(&mut self) -> Measurement {
        let period = self.period();
        let mu = self.c().mu;
        let means = self
            .sats
            .iter_mut()
            .map(|s| {
                let fallback = s.osculating_mean(mu);
                extract_mean(s.history.samples(), period).unwrap_or(fallback)
            })
            .collect();
        Measurement { means, period }
    }

    /// Advances every satellite by one chief revolution. The chief sets the
    /// step count; deputies take the same steps in parallel.
    fn orbit(&mut self, orbit_index: usize, u: &[f64]) -> Result<(), PropagationError> {
        for (s, &ui) in self.sats.iter_mut().zip(u) {
            s.u = ui;
        }
        let dt = self.scn.sim.dt_s;
        let goal = self.theta0 + TAU * (orbit_index + 1) as f64;
        let cap = (3.0 * self.period() / dt).ceil() as u64 + 10;
        let first = self.step_index + 1;
        let mut n = 0u64;
        let (chief, deputies) = self.sats.split_first_mut().expect("at least two satellites");
        while chief.state.theta_cum < goal {
            if n >= cap {
                return Err(PropagationError::Schedule(format!(
                    "chief failed to complete orbit {orbit_index} within {cap} steps"
                )));
            }
            chief.step_once(first + n, dt, &self.model, self.every)?;
            n += 1;
        }
        let model = &self.model;
        let every = self.every;
        par::map_mut(self.exec, deputies, |d| d.run(first, n, dt, model, every))
            .into_iter()
            .collect::<Result<Vec<()>, _>>()?;
        for k in first..first + n {
            if k % self.every == 0 {
                self.times.push(dt * k as f64);
            }
        }
        self.step_index += n;
        Ok(())
    }

    fn gains(&self, m: &Measurement) -> Result<GainSet, String> {
        let a = m.means[0].a_mean;
        let i = self.sats[0].state.osculating(self.c()).map_err(|e| e.to_string())?.i;
        let d_ref = reference_drag(a, &self.scn.spacecraft, &self.atm, self.c()).map_err(|e| e.to_string())?;
        compute_gains(a, i, d_ref, self.c()).map_err(|e| e.to_string())
    }

    fn trajectory(mut self) -> Trajectory {
        let t_end = self.sats[0].state.t;
        if self.times.last() != Some(&t_end) {
            self.times.push(t_end);
            for s in &mut self.sats {
                s.samples.push(s.state);
            }
        }
        Trajectory {
            times: self.times,
            states: self.sats.into_iter().map(|s| s.samples).collect(),
        }
    }
}

/// Runs a scenario in closed loop until the horizon is exhausted or the
/// truth simulation fails (orbit decay, invalid step), in which case a
/// partial report is returned with `status = aborted`.
pub fn run_closed_loop(scn: &ScenarioConfig, opts: RunOptions) -> Result<SimulationRun, MpcError> {
    scn.validate()?;
    let c = scn.constants;
    let atm = scn.load_atmosphere()?;
    let mut model = ForceModel::zonal(&c, scn.sim.max_degree);
    if scn.sim.drag {
        model = model.with_drag(scn.spacecraft, atm.clone());
    }
    let oe = scn.deployment.elements(&c);
    let u_min = scn.plan.u_min;
    let s0 = SatelliteSimState::from_elements(&oe, &c, 0.0, u_min).map_err(|e| MpcError::Initial(e.to_string()))?;
    let keep = 1.5 * orbital_period(oe.a, &c);
    let dt = scn.sim.dt_s;
    let mut sim = Simulation {
        scn,
        model,
        atm,
        sats: vec![SatRunner::new(s0, keep, c.mu); scn.n_sats],
        times: vec![0.0],
        step_index: 0,
        every: ((scn.sim.sample_interval_s / dt).round() as u64).max(1),
        theta0: s0.theta_cum,
        exec: opts.exec,
    };

    let ctl = Controller::from_scenario(scn);
    let m0 = sim.measure();
    let g0 = sim.gains(&m0).map_err(MpcError::Initial)?;
    let mut st = ControllerState::new(scn.mpc.horizon_orbits, g0, vec![u_min; scn.n_sats]);
    let mut noise = scn.sim.measurement_noise.as_ref().map(|n| {
        (
            ChaCha8Rng::seed_from_u64(n.seed),
            Normal::new(0.0, n.sigma_a_m).expect("validated sigma"),
            Normal::new(0.0, n.sigma_theta_deg.to_radians()).expect("validated sigma"),
        )
    });

    let mut epochs = Vec::new();
    let mut failures = 0usize;
    let mut abort: Option<String> = None;
    let mut m = m0;
    while st.remaining() > 0 {
        let gains = if scn.mpc.relinearize { sim.gains(&m) } else { Ok(st.gains) };
        let gains = match gains {
            Ok(g) => g,
            Err(e) => {
                abort = Some(format!("relinearization failed: {e}"));
                break;
            }
        };
        let mut x = m.relative();
        // the trailing mean describes the middle of the window; carry it
        // forward to now with the controls that were applied
        let lag = 0.5 * m.means[0].window;
        if lag > 0.0 {
            let prop = discretize(&gains, lag).expect("positive lag");
            for (p, d) in x.deputies.iter_mut().enumerate() {
                let du = sim.sats[p + 1].state.u_applied - sim.sats[0].state.u_applied;
                *d = RelativePairState::from_array(prop.apply(d.as_array(), du));
            }
        }
        if let Some((rng, na, nt)) = noise.as_mut() {
            for d in &mut x.deputies {
                d.d_a += na.sample(rng);
                d.d_theta += nt.sample(rng);
            }
        }
        let cmd = ctl.control_epoch(&x, gains, m.period, &mut st)?;
        if cmd.failure.is_some() {
            failures += 1;
        }
        let c_mean_a = |me: &MeanElements| (me.a_mean - c.r_eq) / 1e3;
        let rec = EpochRecord {
            orbit: st.orbits_elapsed,
            t_s: sim.sats[0].state.t,
            remaining_orbits: st.remaining(),
            d_theta_deg: x.deputies.iter().map(|d| d.d_theta.to_degrees()).collect(),
            d_a_m: x.deputies.iter().map(|d| d.d_a).collect(),
            d_raan_deg: m.d_raan().iter().map(|r| r.to_degrees()).collect(),
            mean_alt_km: m.means.iter().map(c_mean_a).collect(),
            u: cmd.u.iter().map(|us| us[0]).collect(),
            k4: gains.k4,
            planned: cmd.planned,
            failure: cmd.failure.clone(),
        };
        if opts.progress {
            let pairs: Vec<String> = (0..x.deputies.len())
                .map(|p| format!("1-{} dθ {:+.3}° Δa {:+.1} m", p + 2, rec.d_theta_deg[p], rec.d_a_m[p]))
                .collect();
            eprintln!(
                "epoch {:>5} orbit {:>5}/{} remaining {:>5} | {}{}",
                epochs.len(),
                rec.orbit,
                st.horizon,
                rec.remaining_orbits,
                pairs.join(" | "),
                rec.failure.as_deref().map(|f| format!(" | planner failed: {f}")).unwrap_or_default()
            );
        }
        epochs.push(rec);

        for k in 0..cmd.orbits() {
            let u: Vec<f64> = cmd.u.iter().map(|us| us[k]).collect();
            if let Err(e) = sim.orbit(st.orbits_elapsed, &u) {
                abort = Some(format!("propagation stopped in orbit {}: {e}", st.orbits_elapsed));
                break;
            }
            st.orbits_elapsed += 1;
        }
        if abort.is_some() {
            break;
        }
        m = sim.measure();
    }
    if abort.is_some() {
        m = sim.measure();
    }

    let report = build_report(scn, &sim, &m, &st, g0, epochs, failures, abort);
    Ok(SimulationRun { report, trajectory: sim.trajectory() })
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    scn: &ScenarioConfig,
    sim: &Simulation<'_>,
    m: &Measurement,
    st: &ControllerState,
    initial_gains: GainSet,
    epochs: Vec<EpochRecord>,
    planner_failures: usize,
    abort: Option<String>,
) -> SimulationReport {
    let c = &scn.constants;
    let chief = &sim.sats[0].state;
    let elapsed = chief.t;
    let osc = chief.osculating(c).ok();
    let i_chief = osc.map_or(scn.deployment.i_deg.to_radians(), |o| o.i);
    let r_chief = m.means[0].a_mean;
    let x = m.relative();
    let d_raan = m.d_raan();
    let pairs = scn
        .targets
        .iter()
        .enumerate()
        .map(|(p, t)| {
            let d = x.deputies[p];
            let wrapped = wrap_pi(d.d_theta);
            let target = feasible_raan(t.d_theta_f_rad(), t.ell, &st.gains).unwrap_or(0.0);
            PairReport {
                pair: format!("1-{}", p + 2),
                t_f_months: elapsed / SECONDS_PER_MONTH,
                d_theta_f_deg: wrapped.to_degrees(),
                d_raan_f_deg: d_raan[p].to_degrees(),
                distance_km: spherical_distance(wrapped, d_raan[p], i_chief, r_chief) / 1e3,
                d_a_m: d.d_a,
                d_theta_total_deg: d.d_theta.to_degrees(),
                ell: t.ell,
                d_raan_target_deg: target.to_degrees(),
            }
        })
        .collect();
    SimulationReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: scn.clone(),
        status: if abort.is_some() { RunStatus::Aborted } else { RunStatus::Completed },
        abort_reason: abort,
        orbits_completed: st.orbits_elapsed,
        elapsed_s: elapsed,
        pairs,
        final_chief: ChiefSummary {
            altitude_km: (r_chief - c.r_eq) / 1e3,
            e: osc.map_or(0.0, |o| o.e),
            i_deg: i_chief.to_degrees(),
        },
        initial_gains,
        final_gains: st.gains,
        planner_failures,
        epochs,
        trajectory_files: (0..scn.n_sats).map(trajectory_file_name).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbital::EarthConstants;
    use crate::planner::PairTarget;

    fn gains() -> GainSet {
        let c = EarthConstants::default();
        compute_gains(c.r_eq + 440e3, 51.5f64.to_radians(), 6.05e-6, &c).unwrap()
    }

    fn controller(k: usize, h: usize, ell: i64) -> Controller {
        let plan = PlanSettings { d_a_min_km: -100.0, d_a_max_km: 100.0, ..PlanSettings::default() };
        Controller {
            mpc: MpcConfig::new(k, h),
            plan,
            target: FormationTarget { pairs: vec![PairTarget { d_theta_f: 0.0, ell }] },
            solve: SolveOptions::default(),
        }
    }

    #[test]
    fn at_target_commands_minimum_drag() {
        let ctl = controller(3, 50, 0);
        let mut st = ControllerState::new(50, gains(), vec![0.2; 2]);
        let cmd = ctl.control_epoch(&FormationState::zeros(1), gains(), 5570.0, &mut st).unwrap();
        assert!(cmd.planned);
        assert_eq!(cmd.orbits(), 3);
        for us in &cmd.u {
            for &u in us {
                assert!((u - 0.2).abs() < 1e-9, "{u}");
            }
        }
    }

    #[test]
    fn two_remaining_gives_single_block() {
        let ctl = controller(5, 40, 0);
        let mut st = ControllerState::new(40, gains(), vec![0.2; 2]);
        st.orbits_elapsed = 38;
        let cmd = ctl.control_epoch(&FormationState::zeros(1), gains(), 5570.0, &mut st).unwrap();
        assert_eq!(cmd.orbits(), 1);
        assert_eq!(st.last_plan.as_ref().unwrap().u[0].len(), 1);
        // the last orbit is a coast at minimum drag
        st.orbits_elapsed = 39;
        let cmd = ctl.control_epoch(&FormationState::zeros(1), gains(), 5570.0, &mut st).unwrap();
        assert!(!cmd.planned && cmd.failure.is_none());
        assert_eq!(cmd.u, vec![vec![0.2]; 2]);
        st.orbits_elapsed = 40;
        assert!(matches!(
            ctl.control_epoch(&FormationState::zeros(1), gains(), 5570.0, &mut st),
            Err(MpcError::HorizonExhausted)
        ));
    }

    #[test]
    fn planner_failure_holds_previous_controls() {
        let mut ctl = controller(2, 30, 0);
        // a 90 km split with 29 orbits left cannot be closed: terminal Δa is infeasible
        ctl.plan.d_a_max_km = 100.0;
        let mut st = ControllerState::new(30, gains(), vec![0.2, 0.7]);
        let x = FormationState {
            chief: 0,
            deputies: vec![RelativePairState { d_theta: 0.0, d_a: 90e3 }],
        };
        let cmd = ctl.control_epoch(&x, gains(), 5570.0, &mut st).unwrap();
        assert!(!cmd.planned);
        assert!(cmd.failure.unwrap().contains("infeasible"));
        assert_eq!(cmd.u, vec![vec![0.2, 0.2], vec![0.7, 0.7]]);
    }

    #[test]
    fn restart_mid_maneuver_matches_open_loop() {
        let g = gains();
        let ctl = controller(1, 60, 1);
        let cfg = ctl.plan_config(60, 5570.0);
        assert!(cfg.blocks.is_none());
        let open = planner::plan(&FormationState::zeros(1), &ctl.target, &cfg, &g, &ctl.solve).unwrap();
        let start = 20;
        let mut st = ControllerState::new(60, g, vec![0.2; 2]);
        st.orbits_elapsed = start;
        let cmd = ctl.control_epoch(&open.predicted[start], g, 5570.0, &mut st).unwrap();
        let closed = st.last_plan.unwrap();
        for q in 0..2 {
            assert!((cmd.u[q][0] - open.u[q][start]).abs() < 1e-6, "sat {q}");
        }
        // the remaining schedule reaches the same terminal state
        let a = open.terminal().deputies[0];
        let b = closed.terminal().deputies[0];
        assert!((a.d_theta - b.d_theta).abs() < 1e-6 && (a.d_a - b.d_a).abs() < 1e-3);
    }

    #[test]
    fn blocking_keeps_first_replan_interval_fine() {
        let mut ctl = controller(5, 5000, 6);
        ctl.mpc.fine_stages = 3;
        let cfg = ctl.plan_config(5000, 5700.0);
        let blocks = cfg.blocks.unwrap();
        assert_eq!(blocks.iter().sum::<usize>(), 4999);
        assert!(blocks.len() <= ctl.mpc.max_plan_stages);
        assert!(blocks[..5].iter().all(|&l| l == 1));
        assert_eq!(ctl.plan_config(9, 5700.0).terminal_boost, 10.0);
        assert_eq!(ctl.plan_config(10, 5700.0).terminal_boost, 1.0);
    }
}
