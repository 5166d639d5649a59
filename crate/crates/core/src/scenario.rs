//! Scenario configuration: JSON schema, validation and the shipped presets.
//!
//! Unknown keys are rejected everywhere, and errors carry the key path
//! (`mpc.horizon_orbits`, `targets[2].ell`, ...).

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::AtmosphereTable;
use crate::lp::Backend;
use crate::mpc::MpcConfig;
use crate::orbital::{orbital_period, EarthConstants, OrbitalElements, SpacecraftParams};
use crate::planner::{FormationTarget, PairTarget, PlanConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("{key}: {msg}")]
    Invalid { key: String, msg: String },
    #[error("unknown preset `{0}` (available: scenario1, scenario2, scenario2_ci)")]
    UnknownPreset(String),
}

impl ConfigError {
    fn invalid(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Self::Invalid { key: key.into(), msg: msg.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Deployment {
    pub altitude_km: f64,
    pub e: f64,
    pub i_deg: f64,
    #[serde(default)]
    pub raan_deg: f64,
    /// Initial argument of latitude; the argument of perigee is set to zero.
    #[serde(default)]
    pub aol_deg: f64,
}

impl Deployment {
    pub fn elements(&self, c: &EarthConstants) -> OrbitalElements {
        OrbitalElements::from_aol(
            c.r_eq + self.altitude_km * 1e3,
            self.e,
            self.i_deg.to_radians(),
            self.raan_deg.to_radians(),
            self.aol_deg.to_radians(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AtmosphereSource {
    #[default]
    Default,
    /// Path to a `h_base_km,rho_kg_m3,scale_height_km` table, relative to
    /// the scenario file.
    Csv(PathBuf),
}

/// Final along-track goal of one deputy. The wrapped part may be given in
/// degrees or in revolutions, not both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_theta_f_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_theta_f_rev: Option<f64>,
    pub ell: i64,
}

impl TargetSpec {
    pub fn d_theta_f_rad(&self) -> f64 {
        match (self.d_theta_f_deg, self.d_theta_f_rev) {
            (Some(d), _) => d.to_radians(),
            (None, Some(r)) => r * TAU,
            (None, None) => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanSettings {
    pub d_a_min_km: f64,
    pub d_a_max_km: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub w_theta: f64,
    pub w_u: f64,
    pub backend: Backend,
}

impl Default for PlanSettings {
    fn default() -> Self {
        Self {
            d_a_min_km: -10.0,
            d_a_max_km: 10.0,
            u_min: 0.2,
            u_max: 1.0,
            w_theta: 1.0,
            w_u: 1.0,
            backend: Backend::Auto,
        }
    }
}

impl PlanSettings {
    /// Planner configuration for `n_stages` nodes of duration `dt`.
    pub fn plan_config(&self, n_stages: usize, dt: f64) -> PlanConfig {
        PlanConfig {
            d_a_min: self.d_a_min_km * 1e3,
            d_a_max: self.d_a_max_km * 1e3,
            u_min: self.u_min,
            u_max: self.u_max,
            w_theta: self.w_theta,
            w_u: self.w_u,
            ..PlanConfig::new(n_stages, dt)
        }
    }
}

/// Additive Gaussian error on measured mean elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementNoise {
    pub sigma_a_m: f64,
    pub sigma_theta_deg: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub dt_s: f64,
    pub max_degree: usize,
    pub drag: bool,
    /// Trajectory output spacing; rounded to a whole number of steps.
    pub sample_interval_s: f64,
    pub measurement_noise: Option<MeasurementNoise>,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt_s: 30.0,
            max_degree: 2,
            drag: true,
            sample_interval_s: 600.0,
            measurement_noise: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    #[serde(default)]
    pub name: String,
    pub deployment: Deployment,
    pub n_sats: usize,
    #[serde(default)]
    pub spacecraft: SpacecraftParams,
    #[serde(default)]
    pub atmosphere: AtmosphereSource,
    #[serde(default)]
    pub constants: EarthConstants,
    pub targets: Vec<TargetSpec>,
    pub mpc: MpcConfig,
    #[serde(default)]
    pub plan: PlanSettings,
    #[serde(default)]
    pub sim: SimSettings,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |k: &str, m: String| Err(ConfigError::invalid(k, m));
        if self.schema != SCHEMA_VERSION {
            return bad("schema", format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema));
        }
        self.constants
            .validate()
            .map_err(|e| ConfigError::invalid("constants", e.to_string()))?;
        self.spacecraft
            .validate()
            .map_err(|e| ConfigError::invalid("spacecraft", e.to_string()))?;
        let d = &self.deployment;
        if !(d.altitude_km > 0.0 && d.altitude_km.is_finite()) {
            return bad("deployment.altitude_km", format!("must be positive, got {}", d.altitude_km));
        }
        if !(0.0..0.1).contains(&d.e) {
            return bad("deployment.e", format!("must be in [0, 0.1), got {}", d.e));
        }
        if !(0.0..=180.0).contains(&d.i_deg) {
            return bad("deployment.i_deg", format!("must be in [0, 180], got {}", d.i_deg));
        }
        if self.n_sats < 2 {
            return bad("n_sats", format!("need at least 2 satellites, got {}", self.n_sats));
        }
        if self.targets.len() != self.n_sats - 1 {
            return bad(
                "targets",
                format!("need {} entries (one per deputy), got {}", self.n_sats - 1, self.targets.len()),
            );
        }
        for (k, t) in self.targets.iter().enumerate() {
            if t.d_theta_f_deg.is_some() && t.d_theta_f_rev.is_some() {
                return bad(&format!("targets[{k}]"), "give d_theta_f_deg or d_theta_f_rev, not both".into());
            }
            if !(t.d_theta_f_rad().abs() < TAU) {
                return bad(&format!("targets[{k}]"), "wrapped target must be below one revolution".into());
            }
        }
        let m = &self.mpc;
        if m.horizon_orbits < 2 {
            return bad("mpc.horizon_orbits", format!("must be at least 2, got {}", m.horizon_orbits));
        }
        if !(1..=m.horizon_orbits).contains(&m.replan_interval_orbits) {
            return bad(
                "mpc.replan_interval_orbits",
                format!("must be in [1, horizon_orbits], got {}", m.replan_interval_orbits),
            );
        }
        if m.max_plan_stages < 2 {
            return bad("mpc.max_plan_stages", "must be at least 2".into());
        }
        if !(m.terminal_boost > 0.0) {
            return bad("mpc.terminal_boost", "must be positive".into());
        }
        let p = &self.plan;
        let cfg = p.plan_config(2, 1.0);
        cfg.validate().map_err(|e| ConfigError::invalid("plan", e.to_string()))?;
        if p.u_min + 1e-12 < self.spacecraft.min_ratio() {
            return bad(
                "plan.u_min",
                format!(
                    "{} is below the spacecraft's smallest drag ratio {:.4}",
                    p.u_min,
                    self.spacecraft.min_ratio()
                ),
            );
        }
        let s = &self.sim;
        if !(2..=crate::environment::MAX_ZONAL_DEGREE).contains(&s.max_degree) {
            return bad("sim.max_degree", format!("must be in 2..=6, got {}", s.max_degree));
        }
        let period = orbital_period(self.constants.r_eq + d.altitude_km * 1e3, &self.constants);
        let max_dt = period / crate::propagator::MIN_STEPS_PER_ORBIT;
        if !(s.dt_s > 0.0 && s.dt_s <= max_dt) {
            return bad("sim.dt_s", format!("must be in (0, {max_dt:.1}], got {}", s.dt_s));
        }
        if !(s.sample_interval_s >= s.dt_s) {
            return bad("sim.sample_interval_s", "must be at least sim.dt_s".into());
        }
        if let Some(n) = &s.measurement_noise {
            if !(n.sigma_a_m >= 0.0 && n.sigma_theta_deg >= 0.0) {
                return bad("sim.measurement_noise", "standard deviations must be non-negative".into());
            }
        }
        if let AtmosphereSource::Csv(path) = &self.atmosphere {
            if path.as_os_str().is_empty() {
                return bad("atmosphere.csv", "empty path".into());
            }
        }
        Ok(())
    }

    pub fn formation_target(&self) -> FormationTarget {
        FormationTarget {
            pairs: self
                .targets
                .iter()
                .map(|t| PairTarget { d_theta_f: t.d_theta_f_rad(), ell: t.ell })
                .collect(),
        }
    }

    pub fn load_atmosphere(&self) -> Result<Arc<AtmosphereTable>, ConfigError> {
        match &self.atmosphere {
            AtmosphereSource::Default => Ok(Arc::new(AtmosphereTable::default_table().clone())),
            AtmosphereSource::Csv(path) => AtmosphereTable::from_csv_path(path)
                .map(Arc::new)
                .map_err(|e| ConfigError::invalid("atmosphere.csv", e.to_string())),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a scenario from JSON text. Relative atmosphere
/// paths are resolved against `base_dir` when given.
pub fn parse_scenario(text: &str, base_dir: Option<&Path>) -> Result<ScenarioConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::Parse {
            path: if path == "." { "(root)".into() } else { path },
            msg: e.into_inner().to_string(),
        }
    })?;
    if let (AtmosphereSource::Csv(p), Some(base)) = (&mut cfg.atmosphere, base_dir) {
        if p.is_relative() {
            *p = base.join(&p);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, path.parent())
}

const SCENARIO1: &str = include_str!("../../../scenarios/scenario1.json");
const SCENARIO2: &str = include_str!("../../../scenarios/scenario2.json");
const SCENARIO2_CI: &str = include_str!("../../../scenarios/scenario2_ci.json");

/// Names of the built-in scenarios.
pub const PRESETS: [&str; 3] = ["scenario1", "scenario2", "scenario2_ci"];

pub fn preset(name: &str) -> Result<ScenarioConfig, ConfigError> {
    let text = match name.trim_end_matches(".json") {
        "scenario1" => SCENARIO1,
        "scenario2" => SCENARIO2,
        "scenario2_ci" => SCENARIO2_CI,
        other => return Err(ConfigError::UnknownPreset(other.to_string())),
    };
    parse_scenario(text, None)
}
