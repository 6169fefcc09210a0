//! Distributed moving-target enclosing for a team of UAVs.
//!
//! A network of coupled phase oscillators spreads the UAVs evenly around a
//! (possibly affinely deformed) circle. Each UAV localizes its neighbors and
//! the target from range and self-displacement readings with a forgetting
//! recursive least-squares filter, and steers with a saturated consensus
//! law on those estimates.
//!
//! ```no_run
//! let cfg = enclose_core::parse_scenario("scenarios/paper_sim_a.json")?;
//! let log = enclose_core::run(&cfg)?;
//! let m = enclose_core::metrics(&log)?;
//! println!("final tracking error {}", m.rows.last().unwrap().tracking_error);
//! # Ok::<(), enclose_core::Error>(())
//! ```

// `!(x > 0.0)` guards deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod engine;
pub mod error;
pub mod formation;
pub mod geometry;
pub mod localization;
pub mod log_io;
pub mod metrics;
pub mod oscillator;
pub mod pe;
pub mod topology;
pub mod validate;

pub use config::{parse_scenario, ScenarioConfig, TargetModel};
pub use engine::{inject_fault, run, Engine, StepRecord, TrajectoryLog, WorldState};
pub use error::{Error, ErrorKind, Result};
pub use geometry::{Mat2, Vec2};
pub use metrics::{metrics, MetricSeries};
pub use topology::{build_topology, Edge, ExtendedGraph, TARGET};
pub use validate::{validate_scenario, ValidationReport};
