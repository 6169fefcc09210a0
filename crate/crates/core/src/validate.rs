//! Checks a scenario against the standing assumptions of the control
//! scheme and reports each one with its margin.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::pe::SmallTReport;
use crate::topology::ExtendedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Unknown,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    /// Signed distance to the constraint boundary, positive when satisfied.
    pub margin: Option<f64>,
    pub detail: String,
    /// Advisory checks are reported but never block a run.
    pub advisory: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn hard_failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.advisory && c.status == Status::Fail)
    }

    pub fn is_ok(&self) -> bool {
        self.hard_failures().next().is_none()
    }

    /// One line summary of the blocking failures.
    pub fn failure_summary(&self) -> String {
        self.hard_failures()
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect::<Vec<_>>()
            .join("; ")
    }

    fn push(&mut self, name: &'static str, ok: bool, margin: Option<f64>, detail: impl Into<String>) {
        self.checks.push(Check {
            name,
            status: if ok { Status::Pass } else { Status::Fail },
            margin,
            detail: detail.into(),
            advisory: false,
        });
    }

    fn push_advisory(&mut self, name: &'static str, status: Status, margin: Option<f64>, detail: impl Into<String>) {
        self.checks.push(Check {
            name,
            status,
            margin,
            detail: detail.into(),
            advisory: true,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let margin = c.margin.map_or_else(|| "-".to_string(), |m| format!("{m:.6}"));
            let tag = if c.advisory { " (advisory)" } else { "" };
            writeln!(
                f,
                "{:<8} {:<20} margin {:>12}  {}{}",
                c.status, c.name, margin, c.detail, tag
            )?;
        }
        Ok(())
    }
}

/// Validates a scenario; the sampling-interval condition is reported as
/// unknown because it needs trajectory data.
pub fn validate_scenario(cfg: &ScenarioConfig) -> ValidationReport {
    let mut r = ValidationReport::default();
    let t = cfg.t;

    match ExtendedGraph::over(&(1..=cfg.n).collect::<Vec<_>>(), &cfg.target_sensors) {
        Ok(g) => r.push(
            "topology",
            true,
            None,
            format!(
                "complete graph on {} UAVs, target sensed by {:?}",
                g.n(),
                g.target_sensors()
            ),
        ),
        Err(e) => r.push("topology", false, None, e.to_string()),
    }

    r.push("step_interval", t > 0.0 && t.is_finite(), Some(t), format!("T = {t}"));

    let gains = cfg.gains();
    r.push(
        "osc_gains",
        gains.len() == cfg.n && gains.iter().all(|g| g.is_finite()),
        None,
        format!("{} gains for {} UAVs", gains.len(), cfg.n),
    );
    if gains.len() == cfg.n && cfg.n > 0 {
        let (head, last) = gains.split_at(cfg.n - 1);
        let ok = head.iter().all(|&g| g > 0.0) && last[0] < 0.0;
        r.push_advisory(
            "gain_signs",
            if ok { Status::Pass } else { Status::Fail },
            None,
            "K_l > 0 for l < n and K_n < 0",
        );
    }

    let bf = cfg.beta_f;
    r.push(
        "forgetting_factor",
        bf > 0.0 && bf < 1.0,
        Some(bf.min(1.0 - bf)),
        format!("beta_f = {bf} must lie in (0, 1)"),
    );

    let beta_margin = 1.0 / t - cfg.beta;
    r.push(
        "controller_gain",
        cfg.beta > 0.0 && beta_margin > 0.0,
        Some(beta_margin),
        format!("beta = {} must lie in (0, 1/T = {})", cfg.beta, 1.0 / t),
    );

    r.push(
        "consensus_cap",
        cfg.u_bar > 0.0 && cfg.u_bar < cfg.u_max,
        Some((cfg.u_max - cfg.u_bar).min(cfg.u_bar)),
        format!("U_bar = {} must lie in (0, U = {})", cfg.u_bar, cfg.u_max),
    );

    let u0 = cfg.target_speed_bound();
    let target_ok = u0 < cfg.u_max;
    r.push(
        "target_speed",
        target_ok,
        Some(cfg.u_max - u0),
        if target_ok {
            format!("U_0 = {u0} < U = {}", cfg.u_max)
        } else {
            format!("target faster than velocity budget: U_0 = {u0} >= U = {}", cfg.u_max)
        },
    );
    if let Err(e) = cfg.target_model.validate() {
        r.push("target_model", false, None, e.to_string());
    }

    let cap = cfg.omega_cap();
    r.push(
        "excitation_bound",
        cfg.omega > 0.0 && cfg.omega < cap,
        Some(cap - cfg.omega),
        format!("0 < omega = {} < Omega = {cap}", cfg.omega),
    );

    let schedule = &cfg.rho_schedule;
    let shape_ok = schedule.base > 0.0 && schedule.affine.validate().is_ok() && schedule.affine.min_scale() > 0.0;
    r.push(
        "formation_shape",
        shape_ok,
        Some(schedule.affine.min_scale()),
        format!(
            "rho = {}, smallest scale factor {}",
            schedule.base,
            schedule.affine.min_scale()
        ),
    );

    let pos_ok = cfg
        .initial_positions
        .as_ref()
        .is_none_or(|p| p.len() == cfg.n && p.iter().all(|v| v.is_finite()));
    let phase_ok = cfg
        .initial_phases
        .as_ref()
        .is_none_or(|p| p.len() == cfg.n && p.iter().all(|v| v.is_finite()));
    r.push(
        "initial_conditions",
        pos_ok && phase_ok,
        None,
        "one finite position and phase per UAV",
    );

    let (faults_ok, fault_detail) = check_faults(cfg);
    r.push("fault_schedule", faults_ok, None, fault_detail);

    if let Some(noise) = cfg.noise {
        r.push(
            "noise",
            noise.distance_std >= 0.0 && noise.displacement_std >= 0.0,
            None,
            "standard deviations must be non-negative",
        );
    }

    let harmonic: f64 = gains.iter().enumerate().map(|(l, k)| k.abs() / (l + 1) as f64).sum();
    let rate = cap.max(cfg.omega + harmonic);
    let budget = cfg.u_bar + schedule.max_radius() * rate + u0;
    r.push_advisory(
        "velocity_budget",
        if budget <= cfg.u_max {
            Status::Pass
        } else {
            Status::Fail
        },
        Some(cfg.u_max - budget),
        format!(
            "U_bar + rho_max * max(Omega, omega + sum|K_l|/l) + U_0 = {budget:.4} vs U = {}",
            cfg.u_max
        ),
    );

    r.push_advisory(
        "sampling_time",
        Status::Unknown,
        None,
        "needs desired-displacement windows from a trajectory",
    );

    r
}

/// Validation with the sampling-interval condition evaluated from a run.
pub fn validate_with_trajectory(cfg: &ScenarioConfig, small_t: &SmallTReport) -> ValidationReport {
    let mut r = validate_scenario(cfg);
    if let Some(check) = r.checks.iter_mut().find(|c| c.name == "sampling_time") {
        check.status = if small_t.passes_argmax {
            Status::Pass
        } else {
            Status::Fail
        };
        check.margin = Some(small_t.threshold_argmax - cfg.t);
        check.detail = format!(
            "T = {} vs threshold {:.6} (arg-max g), {:.6} (min g{})",
            cfg.t,
            small_t.threshold_argmax,
            small_t.threshold_min,
            if small_t.passes_min { "" } else { ", exceeded" }
        );
    }
    r
}

fn check_faults(cfg: &ScenarioConfig) -> (bool, String) {
    let mut alive: BTreeSet<usize> = (1..=cfg.n).collect();
    let mut sensors: BTreeSet<usize> = cfg.target_sensors.iter().copied().collect();
    let mut events = cfg.fault_schedule.clone();
    events.sort_by_key(|e| e.step);
    for e in &events {
        if !alive.remove(&e.uav) {
            return (false, format!("step {}: uav {} is not alive", e.step, e.uav));
        }
        sensors.remove(&e.uav);
        if alive.is_empty() {
            return (false, format!("step {}: removing uav {} leaves no UAVs", e.step, e.uav));
        }
        if sensors.is_empty() {
            return (
                false,
                format!(
                    "step {}: removing uav {} leaves target not globally reachable",
                    e.step, e.uav
                ),
            );
        }
    }
    (true, format!("{} removals", events.len()))
}
