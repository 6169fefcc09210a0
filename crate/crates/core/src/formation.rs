//! Desired circular formation geometry and affine shaping.
//!
//! An agent with phase `theta` wants to sit at `rho * (cos theta, sin theta)`
//! relative to the target. That point may then be sheared, scaled and
//! translated (in that order) by per-step affine parameters, which is how
//! the formation narrows, stretches, or offsets itself from the target.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Translation, scaling and shearing parameters for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineParams {
    pub t_x: f64,
    pub t_y: f64,
    pub s_x: f64,
    pub s_y: f64,
    pub h_a: f64,
    pub h_b: f64,
}

impl AffineParams {
    pub const IDENTITY: AffineParams = AffineParams {
        t_x: 0.0,
        t_y: 0.0,
        s_x: 1.0,
        s_y: 1.0,
        h_a: 0.0,
        h_b: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.s_x > 0.0 && self.s_y > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "scaling factors must be positive, got S_x = {}, S_y = {}",
                self.s_x, self.s_y
            )));
        }
        Ok(())
    }

    /// 3x3 homogeneous matrix `T * S * H`, row-major.
    pub fn homogeneous(&self) -> [[f64; 3]; 3] {
        let t = [[1.0, 0.0, self.t_x], [0.0, 1.0, self.t_y], [0.0, 0.0, 1.0]];
        let s = [[self.s_x, 0.0, 0.0], [0.0, self.s_y, 0.0], [0.0, 0.0, 1.0]];
        let h = [[1.0, self.h_a, 0.0], [self.h_b, 1.0, 0.0], [0.0, 0.0, 1.0]];
        mat3_mul(&t, &mat3_mul(&s, &h))
    }
}

fn mat3_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = (0..3).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    out
}

/// Point on the circle of radius `rho` at angle `theta`.
pub fn desired_position(theta: f64, rho: f64) -> Result<Vec2> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {rho}")));
    }
    Ok(Vec2::from_angle(theta) * rho)
}

/// Applies shear, then scale, then translation to `q`.
pub fn affine_apply(params: &AffineParams, q: Vec2) -> Vec2 {
    let sheared = Vec2::new(q.x + params.h_a * q.y, params.h_b * q.x + q.y);
    let scaled = Vec2::new(params.s_x * sheared.x, params.s_y * sheared.y);
    Vec2::new(scaled.x + params.t_x, scaled.y + params.t_y)
}

/// `r_i(k+1) - r_i(k)`.
pub fn desired_displacement(r_next: Vec2, r_now: Vec2) -> Vec2 {
    r_next - r_now
}

/// `r_ij = r_i - r_j`; pass `None` for the target, whose offset is zero.
pub fn desired_relative(r_i: Vec2, r_j: Option<Vec2>) -> Vec2 {
    match r_j {
        Some(r_j) => r_i - r_j,
        None => r_i,
    }
}

/// Scalar schedule over the step index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Waveform {
    Constant {
        value: f64,
    },
    /// `offset + amp * sin(2*pi*k/period + phase)`, period in steps.
    Sinusoid {
        amp: f64,
        period: f64,
        offset: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Value of the last breakpoint at or before `k`; the first value
    /// applies before the first breakpoint.
    Piecewise {
        points: Vec<(usize, f64)>,
    },
}

impl Waveform {
    pub const fn constant(value: f64) -> Self {
        Waveform::Constant { value }
    }

    pub fn at(&self, k: usize) -> f64 {
        match self {
            Waveform::Constant { value } => *value,
            Waveform::Sinusoid {
                amp,
                period,
                offset,
                phase,
            } => offset + amp * (TAU * k as f64 / period + phase).sin(),
            Waveform::Piecewise { points } => points
                .iter()
                .take_while(|(start, _)| *start <= k)
                .last()
                .or_else(|| points.first())
                .map(|(_, v)| *v)
                .unwrap_or(0.0),
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        match self {
            Waveform::Sinusoid { period, .. } if !(*period > 0.0) => Err(Error::InvalidArgument(format!(
                "{name}: sinusoid period must be positive"
            ))),
            Waveform::Piecewise { points } if points.is_empty() => Err(Error::InvalidArgument(format!(
                "{name}: piecewise schedule needs at least one point"
            ))),
            Waveform::Piecewise { points } if points.windows(2).any(|w| w[0].0 >= w[1].0) => Err(
                Error::InvalidArgument(format!("{name}: piecewise breakpoints must increase")),
            ),
            _ => Ok(()),
        }
    }

    /// Smallest value the schedule can take (exact for constant and
    /// piecewise, analytic for sinusoids).
    pub fn lower_bound(&self) -> f64 {
        match self {
            Waveform::Constant { value } => *value,
            Waveform::Sinusoid { amp, offset, .. } => offset - amp.abs(),
            Waveform::Piecewise { points } => points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn upper_bound(&self) -> f64 {
        match self {
            Waveform::Constant { value } => *value,
            Waveform::Sinusoid { amp, offset, .. } => offset + amp.abs(),
            Waveform::Piecewise { points } => points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

fn zero() -> Waveform {
    Waveform::constant(0.0)
}

fn one() -> Waveform {
    Waveform::constant(1.0)
}

/// Per-step affine parameters, each an independent waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSchedule {
    #[serde(rename = "T_x", default = "zero")]
    pub t_x: Waveform,
    #[serde(rename = "T_y", default = "zero")]
    pub t_y: Waveform,
    #[serde(rename = "S_x", default = "one")]
    pub s_x: Waveform,
    #[serde(rename = "S_y", default = "one")]
    pub s_y: Waveform,
    #[serde(rename = "H_a", default = "zero")]
    pub h_a: Waveform,
    #[serde(rename = "H_b", default = "zero")]
    pub h_b: Waveform,
}

impl Default for AffineSchedule {
    fn default() -> Self {
        Self {
            t_x: zero(),
            t_y: zero(),
            s_x: one(),
            s_y: one(),
            h_a: zero(),
            h_b: zero(),
        }
    }
}

impl AffineSchedule {
    pub fn at(&self, k: usize) -> AffineParams {
        AffineParams {
            t_x: self.t_x.at(k),
            t_y: self.t_y.at(k),
            s_x: self.s_x.at(k),
            s_y: self.s_y.at(k),
            h_a: self.h_a.at(k),
            h_b: self.h_b.at(k),
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::default()
    }

    fn waveforms(&self) -> [(&'static str, &Waveform); 6] {
        [
            ("T_x", &self.t_x),
            ("T_y", &self.t_y),
            ("S_x", &self.s_x),
            ("S_y", &self.s_y),
            ("H_a", &self.h_a),
            ("H_b", &self.h_b),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, w) in self.waveforms() {
            w.validate(name)?;
        }
        Ok(())
    }

    /// Smallest scaling factor the schedule can produce.
    pub fn min_scale(&self) -> f64 {
        self.s_x.lower_bound().min(self.s_y.lower_bound())
    }

    /// Upper bound on `|r|` for a base circle of radius `rho`.
    pub fn max_radius(&self, rho: f64) -> f64 {
        let sx = self.s_x.upper_bound().abs().max(self.s_x.lower_bound().abs());
        let sy = self.s_y.upper_bound().abs().max(self.s_y.lower_bound().abs());
        let ha = self.h_a.upper_bound().abs().max(self.h_a.lower_bound().abs());
        let hb = self.h_b.upper_bound().abs().max(self.h_b.lower_bound().abs());
        let tx = self.t_x.upper_bound().abs().max(self.t_x.lower_bound().abs());
        let ty = self.t_y.upper_bound().abs().max(self.t_y.lower_bound().abs());
        let shear = 1.0 + ha.max(hb);
        rho * shear * sx.max(sy) + tx.hypot(ty)
    }
}

/// Base circle plus affine schedule: maps a phase at step `k` to the
/// desired offset from the target.
#[derive(Debug, Clone, PartialEq)]
pub struct Formation {
    pub rho: f64,
    pub schedule: AffineSchedule,
}

impl Formation {
    pub fn new(rho: f64, schedule: AffineSchedule) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {rho}")));
        }
        schedule.validate()?;
        Ok(Self { rho, schedule })
    }

    pub fn setpoint(&self, theta: f64, k: usize) -> Result<Vec2> {
        let params = self.schedule.at(k);
        params.validate()?;
        Ok(affine_apply(&params, desired_position(theta, self.rho)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn close(a: Vec2, b: Vec2, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn circle_points() {
        assert!(close(desired_position(0.0, 4.0).unwrap(), Vec2::new(4.0, 0.0), 1e-15));
        assert!(close(
            desired_position(FRAC_PI_2, 4.0).unwrap(),
            Vec2::new(0.0, 4.0),
            1e-15
        ));
        let s = 2f64.sqrt();
        assert!(close(desired_position(FRAC_PI_4, 2.0).unwrap(), Vec2::new(s, s), 1e-15));
        assert!(desired_position(0.0, 0.0).is_err());
    }

    #[test]
    fn affine_examples() {
        let q = Vec2::new(3.0, -2.0);
        assert_eq!(affine_apply(&AffineParams::IDENTITY, q), q);

        let scale = AffineParams {
            s_x: 1.5,
            s_y: 1.5,
            ..AffineParams::IDENTITY
        };
        assert_eq!(affine_apply(&scale, Vec2::new(4.0, 0.0)), Vec2::new(6.0, 0.0));

        let mixed = AffineParams {
            t_x: 1.0,
            t_y: 2.0,
            s_x: 2.0,
            s_y: 1.0,
            h_a: 0.5,
            h_b: 0.0,
        };
        assert_eq!(affine_apply(&mixed, Vec2::new(1.0, 1.0)), Vec2::new(4.0, 3.0));
    }

    #[test]
    fn homogeneous_matrix_agrees_with_direct_application() {
        let p = AffineParams {
            t_x: -0.3,
            t_y: 2.5,
            s_x: 0.7,
            s_y: 1.9,
            h_a: 0.25,
            h_b: -0.6,
        };
        let m = p.homogeneous();
        let q = Vec2::new(1.3, -0.4);
        let via_matrix = Vec2::new(
            m[0][0] * q.x + m[0][1] * q.y + m[0][2],
            m[1][0] * q.x + m[1][1] * q.y + m[1][2],
        );
        assert!(close(via_matrix, affine_apply(&p, q), 1e-14));
        assert_eq!(m[2], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn displacement_and_relative() {
        assert_eq!(
            desired_displacement(Vec2::new(0.0, 4.0), Vec2::new(4.0, 0.0)),
            Vec2::new(-4.0, 4.0)
        );
        let a = Vec2::new(4.0, 0.0);
        assert_eq!(desired_displacement(a, a), Vec2::ZERO);
        assert_eq!(desired_relative(a, Some(Vec2::new(0.0, 4.0))), Vec2::new(4.0, -4.0));
        assert_eq!(desired_relative(a, None), a);
    }

    #[test]
    fn chord_on_paper_orbit() {
        let (rho, omega, t) = (4.0, FRAC_PI_2, 0.125);
        let r0 = desired_position(0.3, rho).unwrap();
        let r1 = desired_position(0.3 + t * omega, rho).unwrap();
        let chord = desired_displacement(r1, r0).norm();
        assert!((chord - 2.0 * rho * (t * omega / 2.0).sin()).abs() < 1e-14);
        assert!((chord - 0.78414).abs() < 1e-5);
    }

    #[test]
    fn balanced_offsets_sum_to_zero() {
        for n in 2..=8 {
            let sum: Vec2 = (0..n)
                .map(|i| desired_position(0.37 + TAU * i as f64 / n as f64, 4.0).unwrap())
                .sum();
            assert!(sum.norm() < 1e-9);
        }
    }

    #[test]
    fn sinusoid_scale_gives_breathing_radius() {
        let schedule = AffineSchedule {
            s_x: Waveform::Sinusoid {
                amp: 0.5,
                period: 200.0,
                offset: 1.0,
                phase: 0.0,
            },
            s_y: Waveform::Sinusoid {
                amp: 0.5,
                period: 200.0,
                offset: 1.0,
                phase: 0.0,
            },
            ..AffineSchedule::default()
        };
        let f = Formation::new(4.0, schedule).unwrap();
        for k in [0usize, 17, 50, 133, 250] {
            let rho_k = 2.0 * (k as f64 * PI / 100.0).sin() + 4.0;
            let r = f.setpoint(1.1, k).unwrap();
            assert!((r.norm() - rho_k).abs() < 1e-9);
        }
    }

    #[test]
    fn piecewise_holds_last_value() {
        let w = Waveform::Piecewise {
            points: vec![(10, 2.0), (20, 3.0)],
        };
        assert_eq!(w.at(0), 2.0);
        assert_eq!(w.at(10), 2.0);
        assert_eq!(w.at(19), 2.0);
        assert_eq!(w.at(20), 3.0);
        assert_eq!(w.at(1000), 3.0);
        assert!(Waveform::Piecewise { points: vec![] }.validate("x").is_err());
    }

    #[test]
    fn nonpositive_scale_rejected() {
        let f = Formation::new(
            4.0,
            AffineSchedule {
                s_y: Waveform::constant(0.0),
                ..AffineSchedule::default()
            },
        )
        .unwrap();
        assert!(f.setpoint(0.0, 0).is_err());
    }
}
