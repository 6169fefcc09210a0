//! Per-step scores derived from a trajectory log.

use std::collections::BTreeMap;

use crate::engine::{StepRecord, TrajectoryLog};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::oscillator::detect_equilibrium;
use crate::topology::{Edge, TARGET};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub k: usize,
    /// `|mean_i p_i - p_0|`.
    pub tracking_error: f64,
    /// Largest `|p_hat_ij - p_ij|` over live edges.
    pub max_rel_loc_error: f64,
    pub phase_spread: Option<f64>,
    pub thetas: BTreeMap<usize, f64>,
    pub edge_errors: BTreeMap<Edge, f64>,
    /// `|p_i - r_i - p_0|` per UAV.
    pub agent_errors: BTreeMap<usize, f64>,
}

impl MetricRow {
    pub fn max_agent_error(&self) -> f64 {
        self.agent_errors.values().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricSeries {
    pub rows: Vec<MetricRow>,
}

impl MetricSeries {
    pub fn tracking_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.tracking_error).collect()
    }

    pub fn loc_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.max_rel_loc_error).collect()
    }

    pub fn max_agent_errors(&self) -> Vec<f64> {
        self.rows.iter().map(MetricRow::max_agent_error).collect()
    }

    /// Phase spread per step; a single UAV counts as balanced.
    pub fn spreads(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.phase_spread.unwrap_or(0.0)).collect()
    }

    /// First step of a sustained balanced pattern at or after `from`.
    pub fn equilibrium_step(&self, from: usize, tol: f64, hold: usize) -> Option<usize> {
        let spreads = self.spreads();
        let from = from.min(spreads.len());
        detect_equilibrium(&spreads[from..], tol, hold).map(|k| k + from)
    }
}

fn row(rec: &StepRecord) -> MetricRow {
    let edge_errors: BTreeMap<Edge, f64> = rec.edges.iter().map(|e| (e.edge, e.error())).collect();
    MetricRow {
        k: rec.k,
        tracking_error: rec.tracking_error,
        max_rel_loc_error: edge_errors.values().copied().fold(0.0, f64::max),
        phase_spread: rec.phase_spread,
        thetas: rec.agents.iter().map(|a| (a.id, a.theta)).collect(),
        edge_errors,
        agent_errors: rec
            .agents
            .iter()
            .map(|a| (a.id, (a.position - a.desired - rec.target).norm()))
            .collect(),
    }
}

pub fn metrics(log: &TrajectoryLog) -> Result<MetricSeries> {
    if log.records.is_empty() {
        return Err(Error::LogFormat("no records".into()));
    }
    Ok(MetricSeries {
        rows: log.records.iter().map(row).collect(),
    })
}

fn edge_histories(
    log: &TrajectoryLog,
    per_agent: impl Fn(&StepRecord, usize) -> Option<Vec2>,
) -> Vec<(Edge, Vec<Option<Vec2>>)> {
    let transitions = &log.records[..log.records.len().saturating_sub(1)];
    log.initial_edges()
        .into_iter()
        .map(|edge| {
            let series = transitions
                .iter()
                .map(|rec| {
                    let a = per_agent(rec, edge.0)?;
                    let b = if edge.1 == TARGET {
                        rec.target_displacement?
                    } else {
                        per_agent(rec, edge.1)?
                    };
                    Some(a - b)
                })
                .collect();
            (edge, series)
        })
        .collect()
}

/// True relative displacement `v_ij(k)` per initial edge; `None` once an
/// endpoint has been removed.
pub fn edge_displacements(log: &TrajectoryLog) -> Vec<(Edge, Vec<Option<Vec2>>)> {
    edge_histories(log, |rec, id| rec.agent(id)?.displacement)
}

/// Planned relative setpoint displacement `dr_ij(k)`; the target's
/// setpoint is fixed at the origin of the relative frame.
pub fn edge_desired_displacements(log: &TrajectoryLog) -> Vec<(Edge, Vec<Option<Vec2>>)> {
    let transitions = &log.records[..log.records.len().saturating_sub(1)];
    log.initial_edges()
        .into_iter()
        .map(|edge| {
            let series = transitions
                .iter()
                .map(|rec| {
                    let a = rec.agent(edge.0)?.desired_displacement?;
                    if edge.1 == TARGET {
                        Some(a)
                    } else {
                        Some(a - rec.agent(edge.1)?.desired_displacement?)
                    }
                })
                .collect();
            (edge, series)
        })
        .collect()
}

/// Least-squares slope of `ln y` against `x`. Needs two distinct
/// abscissae and strictly positive ordinates.
pub fn log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(_, y)| !(y > 0.0)) {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in points {
        sxy += (x - mx) * (y.ln() - my);
        sxx += (x - mx) * (x - mx);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Exponential decay rate of `values[from..]`, fitted up to the first
/// sample that drops below `floor` (beyond it the series is round-off).
pub fn decay_rate(values: &[f64], from: usize, floor: f64) -> Option<f64> {
    let points: Vec<(f64, f64)> = values
        .iter()
        .enumerate()
        .skip(from)
        .take_while(|(_, &y)| y >= floor)
        .map(|(k, &y)| (k as f64, y))
        .collect();
    log_slope(&points)
}
