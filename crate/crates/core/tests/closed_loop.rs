use std::path::Path;

use dragform::mpc::{run_closed_loop, RunOptions};
use dragform::propagator::TRAJECTORY_CSV_HEADER;
use dragform::report::{write_report, RunStatus, SimulationReport};
use dragform::scenario::{preset, AtmosphereSource, MeasurementNoise, ScenarioConfig};

fn short(n_sats: usize, horizon: usize) -> ScenarioConfig {
    let mut s = preset("scenario1").unwrap();
    s.n_sats = n_sats;
    s.targets.truncate(n_sats - 1);
    for t in &mut s.targets {
        t.ell = 0;
        t.d_theta_f_deg = Some(0.0);
    }
    s.mpc.horizon_orbits = horizon;
    s.mpc.replan_interval_orbits = 2;
    s
}

#[test]
fn zero_targets_regulate_about_origin() {
    let run = run_closed_loop(&short(3, 40), RunOptions::default()).unwrap();
    let r = &run.report;
    assert_eq!(r.status, RunStatus::Completed);
    assert_eq!(r.orbits_completed, 40);
    assert_eq!(r.planner_failures, 0);
    for e in &r.epochs {
        for p in 0..2 {
            assert!(e.d_a_m[p].abs() < 1e3, "orbit {}: da {}", e.orbit, e.d_a_m[p]);
            assert!(e.d_theta_deg[p].abs() < 0.5, "orbit {}: dtheta {}", e.orbit, e.d_theta_deg[p]);
        }
        assert!(e.u.iter().all(|&u| (u - 0.2).abs() < 1e-9));
    }
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn emitted_files_are_well_formed() {
    let mut scn = short(3, 12);
    scn.targets[1].d_theta_f_deg = Some(-3.0);
    let run = run_closed_loop(&scn, RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = write_report(&run, dir.path()).unwrap();
    for name in [
        "report.json",
        "pairs.csv",
        "traj_0.csv",
        "traj_1.csv",
        "traj_2.csv",
        "plot_controls.csv",
        "plot_altitude.csv",
        "plot_relative.csv",
    ] {
        assert!(written.contains(&dir.path().join(name)), "{name}");
    }

    let (h, rows) = read_csv(&dir.path().join("pairs.csv"));
    assert_eq!(h[..5], ["pair", "t_f_months", "d_theta_f_deg", "d_raan_f_deg", "distance_km"]);
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let wrapped: f64 = r[2].parse().unwrap();
        assert!(wrapped > -180.0 && wrapped <= 180.0);
        let months: f64 = r[1].parse().unwrap();
        assert!((months - run.report.elapsed_s / (30.44 * 86400.0)).abs() < 1e-12);
    }

    for sat in 0..3 {
        let (h, rows) = read_csv(&dir.path().join(format!("traj_{sat}.csv")));
        assert_eq!(h.join(","), TRAJECTORY_CSV_HEADER);
        assert!(rows.len() > 10);
        let times: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
        assert!(times.windows(2).all(|w| w[1] > w[0]), "sat {sat}");
        assert!(rows.iter().all(|r| r.len() == h.len() && r[1] == sat.to_string()));
    }

    for (name, cols) in [("plot_controls.csv", 5), ("plot_altitude.csv", 5), ("plot_relative.csv", 6)] {
        let (h, rows) = read_csv(&dir.path().join(name));
        assert_eq!(h.len(), cols, "{name}");
        assert!(rows.iter().all(|r| r.len() == cols));
        let times: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
        assert!(times.windows(2).all(|w| w[1] >= w[0]), "{name}");
    }

    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let back: SimulationReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, run.report);
}

#[test]
fn decay_below_table_floor_aborts_with_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let atm = dir.path().join("thick.csv");
    std::fs::write(&atm, "h_base_km,rho_kg_m3,scale_height_km\n420,1e-9,60\n").unwrap();
    let mut scn = short(2, 50);
    scn.deployment.e = 0.0;
    scn.atmosphere = AtmosphereSource::Csv(atm);
    let run = run_closed_loop(&scn, RunOptions::default()).unwrap();
    let r = &run.report;
    assert_eq!(r.status, RunStatus::Aborted);
    let reason = r.abort_reason.as_deref().unwrap();
    assert!(reason.contains("below the atmosphere table floor"), "{reason}");
    assert!(r.orbits_completed < 50);
    assert_eq!(r.pairs.len(), 1);
    write_report(&run, &dir.path().join("out")).unwrap();
}

#[test]
fn measurement_noise_is_seeded() {
    let mut scn = short(2, 10);
    scn.sim.measurement_noise = Some(MeasurementNoise { sigma_a_m: 5.0, sigma_theta_deg: 0.01, seed: 11 });
    let a = run_closed_loop(&scn, RunOptions::default()).unwrap();
    let b = run_closed_loop(&scn, RunOptions::default()).unwrap();
    assert_eq!(a.report, b.report);
    let clean = run_closed_loop(&short(2, 10), RunOptions::default()).unwrap();
    assert_ne!(a.report.epochs[1].d_a_m, clean.report.epochs[1].d_a_m);
}
