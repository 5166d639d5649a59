//! Simulation report and the files emitted for it.
//!
//! `report.json` is the full record (including the scenario echo), `pairs.csv`
//! has one row per deputy, `traj_<sat>.csv` holds the sampled truth states and
//! `plot_*.csv` hold per-epoch series for external plotting.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbital::EarthConstants;
use crate::planner::PlanSolution;
use crate::propagator::{write_state_row, Trajectory, TRAJECTORY_CSV_HEADER};
use crate::relative::{FormationState, GainSet};
use crate::scenario::ScenarioConfig;

/// Seconds per reporting month.
pub const SECONDS_PER_MONTH: f64 = 30.44 * 86_400.0;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("trajectory row: {0}")]
    State(#[from] crate::orbital::OrbitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Aborted,
}

/// Final relative geometry of one deputy, in the style of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    /// `"1-<k>"`, chief first.
    pub pair: String,
    pub t_f_months: f64,
    /// Wrapped to (-180, 180].
    pub d_theta_f_deg: f64,
    pub d_raan_f_deg: f64,
    pub distance_km: f64,
    pub d_a_m: f64,
    /// Unwrapped along-track separation.
    pub d_theta_total_deg: f64,
    pub ell: i64,
    /// `k4 (Δθ_f + 2πℓ)` with the gains of the last plan.
    pub d_raan_target_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiefSummary {
    pub altitude_km: f64,
    pub e: f64,
    pub i_deg: f64,
}

/// Controller snapshot at one replanning epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub orbit: usize,
    pub t_s: f64,
    pub remaining_orbits: usize,
    /// Measured (lag-compensated) relative state per deputy.
    pub d_theta_deg: Vec<f64>,
    pub d_a_m: Vec<f64>,
    /// Trailing-mean RAAN separation per deputy.
    pub d_raan_deg: Vec<f64>,
    /// Trailing-mean altitude per satellite.
    pub mean_alt_km: Vec<f64>,
    /// First commanded drag ratio per satellite.
    pub u: Vec<f64>,
    pub k4: f64,
    pub planned: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub version: String,
    pub scenario: ScenarioConfig,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
    pub orbits_completed: usize,
    pub elapsed_s: f64,
    pub pairs: Vec<PairReport>,
    pub final_chief: ChiefSummary,
    pub initial_gains: GainSet,
    pub final_gains: GainSet,
    pub planner_failures: usize,
    pub epochs: Vec<EpochRecord>,
    /// Trajectory file names, relative to the output directory.
    pub trajectory_files: Vec<String>,
}

impl SimulationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Output of a closed-loop run: the report plus the sampled truth states.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub report: SimulationReport,
    pub trajectory: Trajectory,
}

pub fn trajectory_file_name(sat: usize) -> String {
    format!("traj_{sat}.csv")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io { path: path.to_path_buf(), source }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, ReportError> {
    csv::Writer::from_path(path).map_err(|source| ReportError::Csv { path: path.to_path_buf(), source })
}

fn write_rows<R: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<(), ReportError> {
    let wrap = |source| ReportError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(wrap)?;
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.flush().map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
}

/// Writes every output file of a run into `out_dir`, creating it if needed.
/// Returns the paths written.
pub fn write_report(run: &SimulationRun, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let r = &run.report;
    let mut written = Vec::new();

    let path = out_dir.join("report.json");
    fs::write(&path, r.to_json()).map_err(io_err(&path))?;
    written.push(path);

    let path = out_dir.join("pairs.csv");
    let mut w = csv_writer(&path)?;
    for p in &r.pairs {
        w.serialize(p).map_err(|source| ReportError::Csv { path: path.clone(), source })?;
    }
    w.flush().map_err(io_err(&path))?;
    written.push(path);

    let c = &r.scenario.constants;
    for (sat, name) in r.trajectory_files.iter().enumerate() {
        let path = out_dir.join(name);
        fs::write(&path, trajectory_csv(&run.trajectory, sat, c)?).map_err(io_err(&path))?;
        written.push(path);
    }

    written.extend(write_plots(r, out_dir)?);
    Ok(written)
}

/// CSV of one satellite's sampled states.
pub fn trajectory_csv(traj: &Trajectory, sat: usize, c: &EarthConstants) -> Result<String, ReportError> {
    let mut out = String::from(TRAJECTORY_CSV_HEADER);
    out.push('\n');
    for (t, s) in traj.times.iter().zip(&traj.states[sat]) {
        write_state_row(&mut out, *t, sat, s, c)?;
    }
    Ok(out)
}

fn write_plots(r: &SimulationReport, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let n_sats = r.scenario.n_sats;
    let mut written = Vec::new();

    let path = out_dir.join("plot_controls.csv");
    let mut header = vec!["t_s".to_string(), "orbit".to_string()];
    header.extend((0..n_sats).map(|s| format!("u_{s}")));
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(&path, &h, r.epochs.iter().map(|e| (e.t_s, e.orbit, &e.u)))?;
    written.push(path);

    let path = out_dir.join("plot_altitude.csv");
    let mut header = vec!["t_s".to_string(), "orbit".to_string()];
    header.extend((0..n_sats).map(|s| format!("alt_km_{s}")));
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(&path, &h, r.epochs.iter().map(|e| (e.t_s, e.orbit, &e.mean_alt_km)))?;
    written.push(path);

    let path = out_dir.join("plot_relative.csv");
    let rows = r.epochs.iter().flat_map(|e| {
        (0..e.d_a_m.len()).map(move |p| {
            (e.t_s, e.orbit, format!("1-{}", p + 2), e.d_theta_deg[p], e.d_raan_deg[p], e.d_a_m[p])
        })
    });
    write_rows(&path, &["t_s", "orbit", "pair", "d_theta_deg", "d_raan_deg", "d_a_m"], rows)?;
    written.push(path);
    Ok(written)
}

/// Writes an open-loop plan as `plan_controls.csv` (stage, sat_id, u, one row
/// per orbit) and `plan_states.csv` (stage, pair, d_theta_deg, d_a_m, one row
/// per plan node).
pub fn write_plan(sol: &PlanSolution, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let path_u = out_dir.join("plan_controls.csv");
    let expanded = sol.expanded();
    let rows = expanded
        .iter()
        .enumerate()
        .flat_map(|(sat, us)| us.iter().enumerate().map(move |(k, u)| (k, sat, *u)))
        .collect::<Vec<_>>();
    let mut rows = rows;
    rows.sort_by_key(|r| (r.0, r.1));
    write_rows(&path_u, &["stage", "sat_id", "u"], rows)?;

    let path_x = out_dir.join("plan_states.csv");
    write_rows(&path_x, &["stage", "pair", "d_theta_deg", "d_a_m"], plan_state_rows(&sol.predicted, &sol.node_steps()))?;
    Ok(vec![path_u, path_x])
}

fn plan_state_rows<'a>(
    nodes: &'a [FormationState],
    steps: &'a [usize],
) -> impl Iterator<Item = (usize, String, f64, f64)> + 'a {
    nodes.iter().zip(steps).flat_map(|(x, &k)| {
        x.deputies
            .iter()
            .enumerate()
            .map(move |(p, d)| (k, format!("1-{}", p + 2), d.d_theta.to_degrees(), d.d_a))
    })
}
