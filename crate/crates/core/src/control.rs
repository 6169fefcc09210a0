//! Saturated cooperative tracking control.
//!
//! Each UAV commands
//!
//! ```text
//! u_i = sat_{U_bar}( -beta * sum_j a_ij (p_hat_ij - r_ij) ) + dr_i / T + u_0
//! ```
//!
//! built only from relative estimates, the planned setpoint displacement
//! and the broadcast target velocity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Radial projection onto the ball of radius `cap`.
pub fn saturate(u: Vec2, cap: f64) -> Result<Vec2> {
    if !(cap > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "saturation cap must be positive, got {cap}"
        )));
    }
    Ok(u * (cap / cap.max(u.norm())))
}

/// Consensus correction `-beta * sum_j a_ij (p_hat_ij - r_ij)` over one
/// UAV's extended neighbors, keyed by neighbor id (0 for the target).
pub fn consensus_term(
    estimates: &BTreeMap<usize, Vec2>,
    desired: &BTreeMap<usize, Vec2>,
    weights: &BTreeMap<usize, f64>,
    beta: f64,
) -> Result<Vec2> {
    if !estimates.keys().eq(desired.keys()) || !estimates.keys().eq(weights.keys()) {
        return Err(Error::Dimension(
            "estimates, desired offsets and weights must cover the same neighbors".into(),
        ));
    }
    let residual: Vec2 = estimates
        .iter()
        .map(|(j, p_hat)| (*p_hat - desired[j]) * weights[j])
        .sum();
    Ok(residual * -beta)
}

/// Velocity command split into its three contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub u: Vec2,
    /// Saturated consensus correction.
    pub consensus_part: Vec2,
    /// Setpoint feedforward `dr / T`.
    pub feedforward_part: Vec2,
    /// Broadcast target velocity.
    pub target_part: Vec2,
}

pub fn control_input(u_bar: Vec2, cap: f64, dr: Vec2, t: f64, u0: Vec2) -> Result<ControlInput> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step interval must be positive, got {t}"
        )));
    }
    let consensus_part = saturate(u_bar, cap)?;
    let feedforward_part = dr / t;
    Ok(ControlInput {
        u: consensus_part + feedforward_part + u0,
        consensus_part,
        feedforward_part,
        target_part: u0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(j: usize, est: Vec2, des: Vec2) -> [BTreeMap<usize, Vec2>; 2] {
        [BTreeMap::from([(j, est)]), BTreeMap::from([(j, des)])]
    }

    #[test]
    fn saturation_examples() {
        let s = saturate(Vec2::new(3.0, 4.0), 1.0).unwrap();
        assert!((s - Vec2::new(0.6, 0.8)).norm() < 1e-15);
        assert_eq!(saturate(Vec2::new(0.3, 0.4), 1.0).unwrap(), Vec2::new(0.3, 0.4));
        assert_eq!(saturate(Vec2::ZERO, 0.2).unwrap(), Vec2::ZERO);
        assert!(saturate(Vec2::new(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn consensus_examples() {
        let est = BTreeMap::from([(2, Vec2::new(1.0, 2.0)), (0, Vec2::new(-3.0, 0.5))]);
        let w = BTreeMap::from([(2, 0.5), (0, 0.5)]);
        assert_eq!(consensus_term(&est, &est, &w, 7.0).unwrap(), Vec2::ZERO);

        let [e, d] = single(0, Vec2::new(4.1, 0.0), Vec2::new(4.0, 0.0));
        let u = consensus_term(&e, &d, &BTreeMap::from([(0, 1.0)]), 7.0).unwrap();
        assert!((u - Vec2::new(-0.7, 0.0)).norm() < 1e-12);

        let desired = BTreeMap::from([(2, Vec2::new(0.0, 1.0)), (0, Vec2::new(2.0, 0.0))]);
        let a = consensus_term(&est, &desired, &w, 7.0).unwrap();
        let doubled: BTreeMap<usize, f64> = w.iter().map(|(k, v)| (*k, 2.0 * v)).collect();
        let b = consensus_term(&est, &desired, &doubled, 3.5).unwrap();
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn consensus_key_mismatch() {
        let est = BTreeMap::from([(2, Vec2::ZERO)]);
        let des = BTreeMap::from([(3, Vec2::ZERO)]);
        let w = BTreeMap::from([(2, 1.0)]);
        assert!(consensus_term(&est, &des, &w, 1.0).is_err());
    }

    #[test]
    fn control_examples() {
        let c = control_input(Vec2::ZERO, 0.4, Vec2::ZERO, 0.125, Vec2::new(0.1, 0.0)).unwrap();
        assert_eq!(c.u, Vec2::new(0.1, 0.0));

        let c = control_input(Vec2::new(1e6, 0.0), 0.4, Vec2::ZERO, 0.125, Vec2::ZERO).unwrap();
        assert!((c.u - Vec2::new(0.4, 0.0)).norm() < 1e-15);
        assert!(c.consensus_part.norm() <= 0.4);
    }

    #[test]
    fn paper_step_assembles_parts() {
        // target moving 0.1 m per step at T = 0.125 -> 0.8 m/s broadcast
        let (t, rho, w) = (0.125, 4.0, std::f64::consts::FRAC_PI_2);
        let theta = 0.6;
        let dr = Vec2::from_angle(theta + t * w) * rho - Vec2::from_angle(theta) * rho;
        let u0 = Vec2::new(0.1 / t, 0.0);
        let u_bar = Vec2::new(-0.3, 0.2);
        let c = control_input(u_bar, 0.4, dr, t, u0).unwrap();
        // u_bar is under the cap, so the command is the plain sum
        let expected_x = -0.3 + dr.x / t + 0.8;
        let expected_y = 0.2 + dr.y / t;
        assert!((c.u.x - expected_x).abs() < 1e-12);
        assert!((c.u.y - expected_y).abs() < 1e-12);
        assert_eq!(c.target_part, Vec2::new(0.8, 0.0));
    }
}
