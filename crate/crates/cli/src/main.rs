//! `dragform` command-line interface.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 when the
//! planner fails, 1 for anything else (I/O).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use dragform::environment::{reference_drag, AtmosphereTable};
use dragform::lp::write_dump;
use dragform::mpc::{run_closed_loop, Controller, RunOptions};
use dragform::orbital::{orbital_period, EarthConstants, SpacecraftParams};
use dragform::par::Execution;
use dragform::planner::{build_lp, plan};
use dragform::relative::{compute_gains, discretize, feasible_raan, spherical_distance, FormationState, GainSet};
use dragform::report::{write_plan, write_report};
use dragform::scenario::{load_scenario, preset, ScenarioConfig, PRESETS};

const OUT_ENV: &str = "DRAGPLAN_OUT";
const DEFAULT_OUT: &str = "out";

#[derive(Parser)]
#[command(name = "dragform", version, about = "Differential-drag formation planning and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Linearization gains at a circular reference orbit, as JSON.
    Gains(OrbitArgs),
    /// RAAN separations reachable for an along-track target, as JSON.
    Feasible {
        #[command(flatten)]
        orbit: OrbitArgs,
        /// Wrapped along-track target, deg.
        #[arg(long, allow_hyphen_values = true)]
        dtheta_deg: f64,
        /// Enumerate revolution counts -N..=N.
        #[arg(long)]
        ell_range: u32,
    },
    /// Solve the open-loop plan for a scenario.
    Plan {
        #[command(flatten)]
        io: IoArgs,
        /// Also write the planning LP in text form to this file.
        #[arg(long)]
        dump_lp: Option<PathBuf>,
    },
    /// Run a scenario in closed loop.
    Simulate {
        #[command(flatten)]
        io: IoArgs,
        /// Propagate satellites on one thread.
        #[arg(long)]
        sequential: bool,
        /// Suppress per-epoch progress lines.
        #[arg(long)]
        quiet: bool,
    },
}

#[derive(Args)]
struct OrbitArgs {
    #[arg(long)]
    alt_km: f64,
    #[arg(long, allow_hyphen_values = true)]
    inc_deg: f64,
}

#[derive(Args)]
struct IoArgs {
    /// Scenario JSON file, or the name of a built-in preset.
    #[arg(long)]
    config: String,
    /// Output directory (default: $DRAGPLAN_OUT, then `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Planner(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Planner(_) => 3,
            Failure::Other(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Planner(m) | Failure::Other(m) => m,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gains(o) => gains(&o),
        Command::Feasible { orbit, dtheta_deg, ell_range } => feasible(&orbit, dtheta_deg, ell_range),
        Command::Plan { io, dump_lp } => plan_cmd(&io, dump_lp.as_deref()),
        Command::Simulate { io, sequential, quiet } => simulate(&io, sequential, quiet),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn reference_gains(o: &OrbitArgs) -> Result<(GainSet, EarthConstants), Failure> {
    let c = EarthConstants::default();
    if !(o.alt_km > 0.0 && o.alt_km.is_finite()) {
        return Err(Failure::Config(format!("--alt-km must be positive, got {}", o.alt_km)));
    }
    if !(0.0..=180.0).contains(&o.inc_deg) {
        return Err(Failure::Config(format!("--inc-deg must be in [0, 180], got {}", o.inc_deg)));
    }
    let a = c.r_eq + o.alt_km * 1e3;
    let d_ref = reference_drag(a, &SpacecraftParams::default(), AtmosphereTable::default_table(), &c)
        .map_err(|e| Failure::Config(e.to_string()))?;
    let g = compute_gains(a, o.inc_deg.to_radians(), d_ref, &c).map_err(|e| Failure::Config(e.to_string()))?;
    Ok((g, c))
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value"));
}

fn gains(o: &OrbitArgs) -> Result<(), Failure> {
    let (g, _) = reference_gains(o)?;
    print_json(&json!({
        "k1": g.k1,
        "k2": g.k2,
        "k3": g.k3,
        "k4": g.k4,
        "deg_raan_per_rev": g.deg_raan_per_rev(),
    }));
    Ok(())
}

fn feasible(o: &OrbitArgs, dtheta_deg: f64, ell_range: u32) -> Result<(), Failure> {
    let (g, _) = reference_gains(o)?;
    let d_theta = dtheta_deg.to_radians();
    let n = ell_range as i64;
    let ladder = (-n..=n)
        .map(|ell| {
            let d_raan = feasible_raan(d_theta, ell, &g).map_err(|e| Failure::Config(e.to_string()))?;
            Ok(json!({
                "ell": ell,
                "d_raan_deg": d_raan.to_degrees(),
                "distance_km": spherical_distance(d_theta, d_raan, g.i_ref, g.a_ref) / 1e3,
            }))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    print_json(&json!({
        "deg_raan_per_rev": g.deg_raan_per_rev(),
        "ladder": ladder,
    }));
    Ok(())
}

fn scenario(spec: &str) -> Result<ScenarioConfig, Failure> {
    let path = Path::new(spec);
    if !path.exists() && PRESETS.contains(&spec.trim_end_matches(".json")) {
        return preset(spec).map_err(|e| Failure::Config(e.to_string()));
    }
    load_scenario(path).map_err(|e| Failure::Config(e.to_string()))
}

fn out_dir(io: &IoArgs) -> PathBuf {
    io.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn plan_cmd(io: &IoArgs, dump_lp: Option<&Path>) -> Result<(), Failure> {
    let scn = scenario(&io.config)?;
    let c = &scn.constants;
    let oe = scn.deployment.elements(c);
    let atm = scn.load_atmosphere().map_err(|e| Failure::Config(e.to_string()))?;
    let d_ref = reference_drag(oe.a, &scn.spacecraft, &atm, c).map_err(|e| Failure::Config(e.to_string()))?;
    let g = compute_gains(oe.a, oe.i, d_ref, c).map_err(|e| Failure::Config(e.to_string()))?;
    let dt = orbital_period(oe.a, c);
    let ctl = Controller::from_scenario(&scn);
    let cfg = ctl.plan_config(scn.mpc.horizon_orbits, dt);
    let x0 = FormationState::zeros(scn.n_sats - 1);

    let out = out_dir(io);
    if let Some(path) = dump_lp {
        let model = discretize(&g, dt).map_err(|e| Failure::Planner(e.to_string()))?;
        let (lp, _) = build_lp(&x0, &ctl.target, &cfg, &model).map_err(|e| Failure::Planner(e.to_string()))?;
        std::fs::write(path, write_dump(&lp)).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))?;
    }
    let sol = plan(&x0, &ctl.target, &cfg, &g, &ctl.solve).map_err(|e| Failure::Planner(e.to_string()))?;
    write_plan(&sol, &out).map_err(|e| Failure::Other(e.to_string()))?;
    let terminal: Vec<_> = sol
        .terminal()
        .deputies
        .iter()
        .enumerate()
        .map(|(p, d)| {
            json!({
                "pair": format!("1-{}", p + 2),
                "d_theta_deg": d.d_theta.to_degrees(),
                "d_a_m": d.d_a,
                "d_raan_deg": (g.k4 * d.d_theta).to_degrees(),
            })
        })
        .collect();
    let summary = json!({
        "scenario": scn.name,
        "gains": g,
        "stage_s": dt,
        "nodes": sol.predicted.len(),
        "orbits": sol.blocks.iter().sum::<usize>(),
        "objective": sol.objective,
        "iterations": sol.iterations,
        "backend": sol.backend,
        "terminal": terminal,
    });
    let path = out.join("plan_summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary).expect("json value"))
        .map_err(|e| Failure::Other(format!("{}: {e}", path.display())))?;
    print_json(&summary);
    Ok(())
}

fn simulate(io: &IoArgs, sequential: bool, quiet: bool) -> Result<(), Failure> {
    let scn = scenario(&io.config)?;
    let opts = RunOptions {
        exec: if sequential { Execution::Sequential } else { Execution::Parallel },
        progress: !quiet,
    };
    let run = run_closed_loop(&scn, opts).map_err(|e| Failure::Config(e.to_string()))?;
    let out = out_dir(io);
    write_report(&run, &out).map_err(|e| Failure::Other(e.to_string()))?;
    let r = &run.report;
    for p in &r.pairs {
        println!(
            "{}  t_f {:.2} mo  dtheta_f {:+.3} deg  draan_f {:+.4} deg  dist {:.2} km  da {:+.1} m",
            p.pair, p.t_f_months, p.d_theta_f_deg, p.d_raan_f_deg, p.distance_km, p.d_a_m
        );
    }
    println!("report written to {}", out.display());
    if let Some(reason) = &r.abort_reason {
        return Err(Failure::Other(format!("run aborted: {reason}")));
    }
    if r.planner_failures > 0 {
        return Err(Failure::Planner(format!("{} replanning epochs failed", r.planner_failures)));
    }
    Ok(())
}
