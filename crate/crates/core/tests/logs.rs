use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::PathBuf;

use enclose_core::config::ScenarioConfig;
use enclose_core::log_io::{read_metrics_csv, read_trajectory_csv, write_metrics_csv, write_trajectory_csv, Entity};
use enclose_core::metrics::edge_displacements;
use enclose_core::{metrics, parse_scenario, run, Error, ErrorKind, TargetModel, Vec2};

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn short_b() -> ScenarioConfig {
    ScenarioConfig {
        steps: 320,
        ..parse_scenario(scenario_path("paper_sim_b.json")).unwrap()
    }
}

#[test]
fn bundled_scenario_a_has_published_parameters() {
    let cfg = parse_scenario(scenario_path("paper_sim_a.json")).unwrap();
    assert_eq!(cfg.n, 4);
    assert_eq!(cfg.target_sensors, vec![1]);
    assert_eq!(cfg.t, 0.125);
    assert_eq!(cfg.omega, FRAC_PI_2);
    assert_eq!(cfg.gains(), vec![1.0, 1.0, 1.0, -1.0]);
    assert_eq!(cfg.beta, 7.0);
    assert_eq!(cfg.beta_f, 0.7);
    assert_eq!(cfg.u_bar, 0.4);
    assert_eq!(cfg.rho_schedule.base, 4.0);
    assert_eq!(
        cfg.target_model,
        TargetModel::Line {
            start: Vec2::ZERO,
            step: Vec2::new(0.1, 0.0)
        }
    );
    assert!(enclose_core::validate_scenario(&cfg).is_ok());
}

#[test]
fn bundled_scenario_b_has_breathing_radius_and_fault() {
    let cfg = parse_scenario(scenario_path("paper_sim_b.json")).unwrap();
    assert_eq!(cfg.fault_schedule.len(), 1);
    assert_eq!((cfg.fault_schedule[0].step, cfg.fault_schedule[0].uav), (250, 4));
    assert_eq!(cfg.target_model.position(75), Vec2::new(7.5, 3.0));
    assert_eq!(cfg.rho_schedule.max_radius(), 6.0);
    assert!(enclose_core::validate_scenario(&cfg).is_ok());
}

#[test]
fn missing_and_empty_files() {
    let dir = tempfile::tempdir().unwrap();
    let err = parse_scenario(dir.path().join("nope.json")).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Io);

    let empty = dir.path().join("empty.json");
    fs::write(&empty, "").unwrap();
    assert!(matches!(parse_scenario(&empty), Err(Error::Schema { .. })));
}

#[test]
fn trajectory_csv_round_trips_positions_exactly() {
    let log = run(&short_b()).unwrap();
    let mut buf = Vec::new();
    write_trajectory_csv(&log, &mut buf).unwrap();
    let table = read_trajectory_csv(&buf[..]).unwrap();

    assert_eq!(table.header.get_f64("T").unwrap(), Some(0.125));
    assert_eq!(table.header.get_f64("rho").unwrap(), Some(6.0));
    assert_eq!(table.header.sensors().unwrap(), vec![1]);
    let tracks = table.tracks();
    assert_eq!(tracks[&Entity::Uav(4)].len(), 250);
    assert_eq!(tracks[&Entity::Uav(1)].len(), 321);
    for rec in &log.records {
        for a in &rec.agents {
            let (k, p) = tracks[&Entity::Uav(a.id)][rec.k];
            assert_eq!((k, p), (rec.k, a.position));
        }
    }

    // displacements rebuilt from positions agree with the logged ones
    let rebuilt = table.edge_displacements().unwrap();
    let logged = edge_displacements(&log);
    assert_eq!(rebuilt.len(), logged.len());
    for ((e1, h1), (e2, h2)) in rebuilt.iter().zip(&logged) {
        assert_eq!(e1, e2);
        for (k, (a, b)) in h1.iter().zip(h2).enumerate() {
            match (a, b) {
                (Some(a), Some(b)) => assert!((*a - *b).norm() < 1e-12, "edge {e1} step {k}"),
                // the last step before a removal has no following position
                (None, Some(_)) => assert_eq!(k, 249),
                (a, b) => assert_eq!(a.is_some(), b.is_some(), "edge {e1} step {k}"),
            }
        }
    }
}

#[test]
fn metrics_csv_columns_and_gaps() {
    let log = run(&short_b()).unwrap();
    let series = metrics(&log).unwrap();
    let mut buf = Vec::new();
    write_metrics_csv(&log, &series, &mut buf).unwrap();
    let table = read_metrics_csv(&buf[..]).unwrap();
    assert_eq!(
        &table.columns[..8],
        [
            "k",
            "tracking_error",
            "max_rel_loc_error",
            "phase_spread",
            "theta_1",
            "theta_2",
            "theta_3",
            "theta_4"
        ]
    );
    assert_eq!(table.columns_with_prefix("err_").len(), 7);
    let theta4 = table.column("theta_4").unwrap();
    assert!(theta4[249].is_some() && theta4[250].is_none());
    let tracking = table.column("tracking_error").unwrap();
    for (row, value) in series.rows.iter().zip(tracking) {
        assert_eq!(Some(row.tracking_error), value);
    }
}

#[test]
fn logs_are_byte_identical_across_runs() {
    let bytes = || {
        let log = run(&short_b()).unwrap();
        let mut t = Vec::new();
        write_trajectory_csv(&log, &mut t).unwrap();
        let mut m = Vec::new();
        write_metrics_csv(&log, &metrics(&log).unwrap(), &mut m).unwrap();
        (t, m)
    };
    assert_eq!(bytes(), bytes());
}

#[test]
fn foreign_schema_is_rejected() {
    let text = "# schema=something-else/2; T=0.1\nk,entity,x,y\n0,target,0,0\n";
    let err = read_trajectory_csv(text.as_bytes()).unwrap_err();
    assert!(err.to_string().contains("schema mismatch"), "{err}");
    assert_eq!(err.kind(), ErrorKind::Io);
}
