//! Differential-drag formation control for LEO CubeSats.
//!
//! Satellites deployed together separate along track by commanding different
//! drag areas; the resulting altitude difference also makes their J2 nodal
//! precession rates differ, so along-track separation is traded for a
//! cross-track (RAAN) offset. The crate contains:
//!
//! - [`orbital`], [`environment`]: constants, element conversions, zonal
//!   gravity and a piecewise-exponential atmosphere.
//! - [`propagator`]: RK4 truth simulation and mean-element extraction.
//! - [`relative`]: the linear mean relative model and its feasibility ladder.
//! - [`lp`]: a bounded-variable LP solver with dense and sparse backends.
//! - [`planner`]: the L1 trajectory optimization posed as an LP.
//! - [`mpc`]: the shrinking-horizon closed loop.
//! - [`scenario`], [`report`]: configuration files and run outputs.
//!
//! With the `parallel` feature (default) satellites are propagated on the
//! rayon pool; [`par::Execution::Sequential`] or building without the feature
//! gives the same results on one thread.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod environment;
pub mod lp;
pub mod mpc;
pub mod orbital;
pub mod par;
pub mod planner;
pub mod propagator;
pub mod relative;
pub mod report;
pub mod scenario;

pub use mpc::{run_closed_loop, Controller, ControllerState, MpcConfig, RunOptions};
pub use par::Execution;
pub use planner::{plan, FormationTarget, PairTarget, PlanConfig, PlanSolution};
pub use relative::{compute_gains, GainSet};
pub use report::{write_report, SimulationReport, SimulationRun};
pub use scenario::{load_scenario, ScenarioConfig};
