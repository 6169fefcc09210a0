//! Scenario configuration and its JSON form.
//!
//! Parsing is strict: unknown keys are rejected with their key path so that
//! typos do not silently fall back to defaults. Physical constraints are not
//! checked here; see [`crate::validate`].

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formation::AffineSchedule;
use crate::geometry::Vec2;
use crate::oscillator::default_gains;

/// Base radius plus affine shaping of the circular pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoSchedule {
    /// Radius of the untransformed circle (m).
    pub base: f64,
    #[serde(default, skip_serializing_if = "AffineSchedule::is_identity")]
    pub affine: AffineSchedule,
}

impl RhoSchedule {
    pub fn constant(base: f64) -> Self {
        Self {
            base,
            affine: AffineSchedule::default(),
        }
    }

    /// Upper bound on the distance of a setpoint from the target.
    pub fn max_radius(&self) -> f64 {
        self.affine.max_radius(self.base)
    }
}

/// Target motion, expressed per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetModel {
    /// `p0(k) = start + k * step`.
    Line {
        #[serde(default)]
        start: Vec2,
        step: Vec2,
    },
    /// `p0(k) = start + (speed * k, amp * sin(2*pi*k / period))`.
    Sinusoid {
        #[serde(default)]
        start: Vec2,
        speed: f64,
        amp: f64,
        period: f64,
    },
    /// Circle about `center`, one revolution every `period` steps.
    Circle {
        #[serde(default)]
        center: Vec2,
        radius: f64,
        period: f64,
    },
    /// Polyline traversed at `speed` meters per step, holding at the end.
    Waypoints { points: Vec<Vec2>, speed: f64 },
}

impl TargetModel {
    pub fn position(&self, k: usize) -> Vec2 {
        let kf = k as f64;
        match self {
            TargetModel::Line { start, step } => *start + *step * kf,
            TargetModel::Sinusoid {
                start,
                speed,
                amp,
                period,
            } => *start + Vec2::new(speed * kf, amp * (TAU * kf / period).sin()),
            TargetModel::Circle { center, radius, period } => *center + Vec2::from_angle(TAU * kf / period) * *radius,
            TargetModel::Waypoints { points, speed } => along_polyline(points, speed * kf),
        }
    }

    /// Target self-displacement over step `k`.
    pub fn displacement(&self, k: usize) -> Vec2 {
        self.position(k + 1) - self.position(k)
    }

    /// Bound on the per-step displacement length.
    pub fn max_step(&self) -> f64 {
        match self {
            TargetModel::Line { step, .. } => step.norm(),
            TargetModel::Sinusoid { speed, amp, period, .. } => {
                speed.hypot(2.0 * amp.abs() * (std::f64::consts::PI / period).sin().abs().min(1.0))
            }
            TargetModel::Circle { radius, period, .. } => {
                2.0 * radius.abs() * (std::f64::consts::PI / period).sin().abs()
            }
            TargetModel::Waypoints { speed, .. } => speed.abs(),
        }
    }

    /// Average-velocity bound `U_0` for step interval `t`.
    pub fn speed_bound(&self, t: f64) -> f64 {
        self.max_step() / t
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("target_model: {m}")));
        match self {
            TargetModel::Sinusoid { period, .. } | TargetModel::Circle { period, .. } if !(*period > 0.0) => {
                bad("period must be positive")
            }
            TargetModel::Circle { radius, .. } if *radius < 0.0 => bad("radius must be non-negative"),
            TargetModel::Waypoints { points, .. } if points.is_empty() => bad("need at least one waypoint"),
            TargetModel::Waypoints { speed, .. } if *speed < 0.0 => bad("speed must be non-negative"),
            _ => Ok(()),
        }
    }
}

fn along_polyline(points: &[Vec2], mut distance: f64) -> Vec2 {
    let Some(&first) = points.first() else {
        return Vec2::ZERO;
    };
    let mut here = first;
    for &next in &points[1..] {
        let seg = (next - here).norm();
        if distance <= seg {
            return if seg > 0.0 {
                here + (next - here) * (distance / seg)
            } else {
                here
            };
        }
        distance -= seg;
        here = next;
    }
    here
}

/// UAV removal at the start of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEvent {
    pub step: usize,
    pub uav: usize,
}

/// Standard deviations of zero-mean Gaussian measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// On each range reading (m).
    #[serde(default)]
    pub distance_std: f64,
    /// On each component of each self-displacement reading (m).
    #[serde(default)]
    pub displacement_std: f64,
}

fn default_sensors() -> Vec<usize> {
    vec![1]
}

/// Every free parameter of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Number of UAVs, ids `1..=n`.
    pub n: usize,
    /// Step interval (s).
    #[serde(rename = "T")]
    pub t: f64,
    pub steps: usize,
    /// Common oscillator frequency (rad/s).
    pub omega: f64,
    /// Excitation bound `Omega`; defaults to `2 * omega`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_cap: Option<f64>,
    /// Harmonic gains `K_1..K_n`; defaults to `(1, .., 1, -1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub osc_gains: Option<Vec<f64>>,
    pub rho_schedule: RhoSchedule,
    pub beta: f64,
    pub beta_f: f64,
    /// Consensus saturation bound (m/s).
    pub u_bar: f64,
    /// Total velocity bound (m/s).
    pub u_max: f64,
    pub target_model: TargetModel,
    #[serde(default = "default_sensors")]
    pub target_sensors: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_positions: Option<Vec<Vec2>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_phases: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fault_schedule: Vec<FaultEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn omega_cap(&self) -> f64 {
        self.omega_cap.unwrap_or(2.0 * self.omega)
    }

    pub fn gains(&self) -> Vec<f64> {
        self.osc_gains.clone().unwrap_or_else(|| default_gains(self.n))
    }

    /// Target speed bound `U_0`.
    pub fn target_speed_bound(&self) -> f64 {
        self.target_model.speed_bound(self.t)
    }

    /// Copy with every defaulted field made explicit. Random initial
    /// conditions are drawn from `seed`, so resolving is deterministic.
    pub fn resolved(&self) -> ScenarioConfig {
        let mut out = self.clone();
        out.omega_cap = Some(self.omega_cap());
        out.osc_gains = Some(self.gains());
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        if out.initial_positions.is_none() {
            let center = self.target_model.position(0);
            let radius = 2.0 * self.rho_schedule.base;
            out.initial_positions = Some(
                (0..self.n)
                    .map(|_| {
                        let r = radius * rng.random::<f64>().sqrt();
                        center + Vec2::from_angle(TAU * rng.random::<f64>()) * r
                    })
                    .collect(),
            );
        }
        if out.initial_phases.is_none() {
            out.initial_phases = Some((0..self.n).map(|_| TAU * rng.random::<f64>()).collect());
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn from_json(text: &str) -> Result<ScenarioConfig> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: match e.path().to_string() {
                p if p == "." => "<root>".to_string(),
                p => p,
            },
            message: e.into_inner().to_string(),
        })?;
        Ok(cfg)
    }
}

/// Reads and strictly parses a scenario file.
pub fn parse_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path.as_ref())?;
    ScenarioConfig::from_json(&text)
}
