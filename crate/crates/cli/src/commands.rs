use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use enclose_core::log_io::{self, MetricsTable, TrajectoryTable};
use enclose_core::oscillator::{detect_equilibrium, DEFAULT_EQUILIBRIUM_HOLD, DEFAULT_EQUILIBRIUM_TOL};
use enclose_core::pe::{check_pe as score_pe, PeParams, PeReport, PeSummary};
use enclose_core::{metrics, parse_scenario, validate_scenario, ErrorKind, ScenarioConfig, TrajectoryLog};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::plot::{self, Which};

/// Failing windows kept verbatim in a PE report.
const MAX_LISTED_FAILURES: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] enclose_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    CheckFailed(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Validation => 1,
                ErrorKind::Runtime => 2,
                ErrorKind::Io => 3,
            },
            CliError::Usage(_) | CliError::CheckFailed(_) => 1,
            CliError::Io { .. } => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

/// `a..b` (exclusive) or `a..=b`.
pub fn parse_seed_range(spec: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("--seeds expects a..b or a..=b, got '{spec}'"));
    let (lo, hi, inclusive) = match spec.split_once("..=") {
        Some((a, b)) => (a, b, true),
        None => {
            let (a, b) = spec.split_once("..").ok_or_else(bad)?;
            (a, b, false)
        }
    };
    let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
    let seeds: Vec<u64> = if inclusive {
        (lo..=hi).collect()
    } else {
        (lo..hi).collect()
    };
    if seeds.is_empty() {
        return Err(CliError::Usage(format!("seed range '{spec}' is empty")));
    }
    Ok(seeds)
}

#[derive(Debug, Serialize)]
struct EdgeStats {
    windows: usize,
    min_lambda_min: f64,
    max_lambda_max: f64,
}

#[derive(Debug, Serialize)]
struct PeReportFile<'a> {
    params: PeParams,
    pass: bool,
    from: usize,
    window: usize,
    alpha2_bound: f64,
    windows: usize,
    failures: usize,
    min_lambda_min: Option<f64>,
    max_lambda_max: Option<f64>,
    edges: BTreeMap<String, EdgeStats>,
    failing: Vec<&'a PeReport>,
}

fn write_pe_report(path: &Path, params: PeParams, summary: &PeSummary) -> Result<(), CliError> {
    let mut edges: BTreeMap<String, EdgeStats> = BTreeMap::new();
    for r in &summary.reports {
        let e = edges.entry(r.edge.to_string()).or_insert(EdgeStats {
            windows: 0,
            min_lambda_min: f64::INFINITY,
            max_lambda_max: 0.0,
        });
        e.windows += 1;
        e.min_lambda_min = e.min_lambda_min.min(r.lambda_min);
        e.max_lambda_max = e.max_lambda_max.max(r.lambda_max);
    }
    let file = PeReportFile {
        params,
        pass: summary.pass(),
        from: summary.from,
        window: summary.n,
        alpha2_bound: summary.alpha2_bound,
        windows: summary.windows,
        failures: summary.failures,
        min_lambda_min: summary.min_lambda_min,
        max_lambda_max: summary.max_lambda_max,
        edges,
        failing: summary
            .reports
            .iter()
            .filter(|r| !r.pass)
            .take(MAX_LISTED_FAILURES)
            .collect(),
    };
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &file).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn pe_params(log: &TrajectoryLog) -> PeParams {
    let cfg = &log.config;
    PeParams {
        t: cfg.t,
        omega: cfg.omega,
        omega_cap: cfg.omega_cap(),
        rho: cfg.rho_schedule.max_radius(),
        u_bar: cfg.u_bar,
    }
}

fn run_one(cfg: &ScenarioConfig, dir: &Path) -> Result<String, CliError> {
    let log = enclose_core::run(cfg)?;
    let series = metrics(&log)?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let path = dir.join("trajectory.csv");
    let mut w = create(&path)?;
    log_io::write_trajectory_csv(&log, &mut w)?;
    w.flush().map_err(io_err(&path))?;

    let path = dir.join("metrics.csv");
    let mut w = create(&path)?;
    log_io::write_metrics_csv(&log, &series, &mut w)?;
    w.flush().map_err(io_err(&path))?;

    let path = dir.join("resolved_config.json");
    fs::write(&path, log.config.to_json() + "\n").map_err(io_err(&path))?;

    let k_o = series.equilibrium_step(0, DEFAULT_EQUILIBRIUM_TOL, DEFAULT_EQUILIBRIUM_HOLD);
    let pe = match k_o {
        Some(k_o) => {
            let params = pe_params(&log);
            let summary = score_pe(&enclose_core::metrics::edge_displacements(&log), k_o, params)?;
            write_pe_report(&dir.join("pe_report.json"), params, &summary)?;
            if summary.pass() {
                "pass"
            } else {
                "FAIL"
            }
        }
        None => "no equilibrium",
    };
    let last = series.rows.last().expect("metrics are nonempty");
    Ok(format!(
        "{} seed {}: {} steps, tracking error {:.3e}, max localization error {:.3e}, k_o {}, pe {}",
        cfg.name.as_deref().unwrap_or("scenario"),
        cfg.seed,
        cfg.steps,
        last.tracking_error,
        last.max_rel_loc_error,
        k_o.map_or_else(|| "-".to_string(), |k| k.to_string()),
        pe,
    ))
}

pub fn run(scenario: &Path, out: &Path, seeds: Option<&str>) -> Result<(), CliError> {
    let cfg = parse_scenario(scenario)?;
    let Some(spec) = seeds else {
        println!("{}", run_one(&cfg, out)?);
        return Ok(());
    };
    let seeds = parse_seed_range(spec)?;
    info!("running {} seeds", seeds.len());
    let results: Vec<Result<String, CliError>> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = ScenarioConfig { seed, ..cfg.clone() };
            run_one(&cfg, &out.join(format!("seed_{seed}")))
        })
        .collect();
    let mut first_err = None;
    for (seed, r) in seeds.iter().zip(results) {
        match r {
            Ok(line) => println!("{line}"),
            Err(e) => {
                eprintln!("seed {seed}: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

/// Trajectory and metrics paths for a run directory or a trajectory file.
fn log_paths(log: &Path) -> (PathBuf, PathBuf) {
    if log.is_dir() {
        (log.join("trajectory.csv"), log.join("metrics.csv"))
    } else {
        let dir = log.parent().unwrap_or(Path::new("."));
        (log.to_path_buf(), dir.join("metrics.csv"))
    }
}

fn read_tables(log: &Path) -> Result<(TrajectoryTable, Option<MetricsTable>), CliError> {
    let (traj_path, metrics_path) = log_paths(log);
    let traj = log_io::read_trajectory_csv(open(&traj_path)?)?;
    let metrics = if metrics_path.is_file() {
        Some(log_io::read_metrics_csv(open(&metrics_path)?)?)
    } else {
        None
    };
    Ok((traj, metrics))
}

#[derive(Debug, Default, Clone, Copy)]
pub struct PeOverrides {
    pub t: Option<f64>,
    pub omega: Option<f64>,
    pub omega_cap: Option<f64>,
    pub rho: Option<f64>,
    pub u_bar: Option<f64>,
    pub from: Option<usize>,
}

pub fn check_pe(log: &Path, over: PeOverrides, out: Option<&Path>) -> Result<(), CliError> {
    let (traj, metrics) = read_tables(log)?;
    let header = &traj.header;
    let pick = |flag: Option<f64>, key: &str, name: &str| -> Result<f64, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => header
                .get_f64(key)?
                .ok_or_else(|| CliError::Usage(format!("log header has no {key}; pass --{name}"))),
        }
    };
    let t = pick(over.t, "T", "T")?;
    let omega = pick(over.omega, "omega", "omega")?;
    let params = PeParams {
        t,
        omega,
        omega_cap: match over.omega_cap {
            Some(v) => v,
            None => header.get_f64("omega_cap")?.unwrap_or(2.0 * omega),
        },
        rho: pick(over.rho, "rho", "rho")?,
        u_bar: pick(over.u_bar, "u_bar", "u-bar")?,
    };
    let from = match over.from {
        Some(k) => k,
        None => {
            let spreads: Vec<f64> = metrics
                .as_ref()
                .and_then(|m| m.column("phase_spread"))
                .ok_or_else(|| CliError::Usage("no metrics.csv next to the log; pass --from".into()))?
                .into_iter()
                .map(|s| s.unwrap_or(0.0))
                .collect();
            detect_equilibrium(&spreads, DEFAULT_EQUILIBRIUM_TOL, DEFAULT_EQUILIBRIUM_HOLD)
                .ok_or_else(|| CliError::CheckFailed("phases never reach a balanced pattern; pass --from".into()))?
        }
    };
    let summary = score_pe(&traj.edge_displacements()?, from, params)?;
    let out = match out {
        Some(p) => p.to_path_buf(),
        None => log_paths(log).0.with_file_name("pe_report.json"),
    };
    write_pe_report(&out, params, &summary)?;
    println!(
        "pe {}: {} windows of {} steps from k = {}, {} failing, min lambda_min {:.3e}, max lambda_max {:.3e} (bound {:.3e})",
        if summary.pass() { "pass" } else { "FAIL" },
        summary.windows,
        summary.n,
        from,
        summary.failures,
        summary.min_lambda_min.unwrap_or(f64::NAN),
        summary.max_lambda_max.unwrap_or(f64::NAN),
        summary.alpha2_bound,
    );
    if summary.pass() {
        Ok(())
    } else if summary.windows == 0 {
        Err(CliError::CheckFailed(
            "no complete excitation window after the start step".into(),
        ))
    } else {
        Err(CliError::CheckFailed(format!(
            "{} windows lack persistent excitation",
            summary.failures
        )))
    }
}

pub fn plot(log: &Path, out: &Path, which: &[Which]) -> Result<(), CliError> {
    let (traj, metrics) = read_tables(log)?;
    let which = if which.is_empty() {
        Which::ALL.to_vec()
    } else {
        which.to_vec()
    };
    fs::create_dir_all(out).map_err(io_err(out))?;
    for w in which {
        let svg = plot::render(w, &traj, metrics.as_ref())?;
        let path = out.join(format!("{}.svg", w.name()));
        fs::write(&path, svg).map_err(io_err(&path))?;
        println!("{}", path.display());
    }
    Ok(())
}

pub fn validate(scenario: &Path) -> Result<(), CliError> {
    let cfg = parse_scenario(scenario)?;
    let report = validate_scenario(&cfg);
    print!("{report}");
    if report.is_ok() {
        Ok(())
    } else {
        Err(CliError::Core(enclose_core::Error::Validation(
            report.failure_summary(),
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seed_range("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seed_range("2..=4").unwrap(), vec![2, 3, 4]);
        assert!(parse_seed_range("3..3").is_err());
        assert!(parse_seed_range("x..2").is_err());
        assert!(parse_seed_range("5").is_err());
    }

    #[test]
    fn exit_codes() {
        let io = CliError::Io {
            path: "x".into(),
            source: std::io::Error::other("boom"),
        };
        assert_eq!(io.exit_code(), 3);
        assert_eq!(CliError::Usage("u".into()).exit_code(), 1);
        let runtime = CliError::Core(enclose_core::Error::NonFinite {
            step: 3,
            what: "x".into(),
        });
        assert_eq!(runtime.exit_code(), 2);
    }
}
