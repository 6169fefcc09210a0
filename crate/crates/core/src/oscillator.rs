//! Discrete-time coupled phase oscillators driving the agents toward a
//! balanced (splay) arrangement on the circle.
//!
//! Each phase advances as
//!
//! ```text
//! theta_i <- theta_i + T*omega + T * sum_j sum_l (K_l a_ij / l) sin(l (theta_i - theta_j))
//! ```
//!
//! with harmonics `l = 1..=n`. Positive `K_l` for `l < n` spread the phases
//! apart and a negative `K_n` locks them onto multiples of `2*pi/n`.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// Default spread tolerance for declaring equilibrium, in radians.
pub const DEFAULT_EQUILIBRIUM_TOL: f64 = 1e-3;
/// Default number of consecutive steps the spread must stay under tolerance.
pub const DEFAULT_EQUILIBRIUM_HOLD: usize = 50;

/// Harmonic gains `K_l = 1` for `l < n` and `K_n = -1`.
pub fn default_gains(n: usize) -> Vec<f64> {
    (1..=n).map(|l| if l < n { 1.0 } else { -1.0 }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorState {
    /// Unwrapped phases, one per agent.
    pub phases: Vec<f64>,
    /// Harmonic gains `K_1..K_n`.
    pub gains: Vec<f64>,
    /// Common natural frequency (rad/s).
    pub omega: f64,
    /// Row-major UAV adjacency `a_ij`.
    pub adjacency: Vec<Vec<f64>>,
}

impl OscillatorState {
    pub fn new(phases: Vec<f64>, gains: Vec<f64>, omega: f64, adjacency: Vec<Vec<f64>>) -> Result<Self> {
        let state = Self {
            phases,
            gains,
            omega,
            adjacency,
        };
        state.check_dims()?;
        Ok(state)
    }

    pub fn n(&self) -> usize {
        self.phases.len()
    }

    fn check_dims(&self) -> Result<()> {
        let n = self.phases.len();
        if self.adjacency.len() != n || self.adjacency.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(format!(
                "adjacency must be {n}x{n} to match the phase count"
            )));
        }
        if self.gains.len() != n {
            return Err(Error::Dimension(format!(
                "{} gains for {n} oscillators",
                self.gains.len()
            )));
        }
        Ok(())
    }

    /// Coupling sum for oscillator `i` (the bracket multiplied by `T`).
    pub fn coupling(&self, i: usize) -> f64 {
        let theta_i = self.phases[i];
        let mut acc = 0.0;
        for (j, &theta_j) in self.phases.iter().enumerate() {
            let a_ij = self.adjacency[i][j];
            if j == i || a_ij == 0.0 {
                continue;
            }
            let diff = theta_i - theta_j;
            for (idx, &k_l) in self.gains.iter().enumerate() {
                let l = (idx + 1) as f64;
                acc += k_l * a_ij / l * (l * diff).sin();
            }
        }
        acc
    }

    /// One synchronous update of every phase.
    pub fn phase_step(&self, t: f64) -> Result<OscillatorState> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step interval must be positive, got {t}"
            )));
        }
        self.check_dims()?;
        let phases = (0..self.n())
            .map(|i| self.phases[i] + t * self.omega + t * self.coupling(i))
            .collect();
        Ok(OscillatorState {
            phases,
            gains: self.gains.clone(),
            omega: self.omega,
            adjacency: self.adjacency.clone(),
        })
    }
}

/// Largest deviation of a circular gap between neighboring phases from the
/// balanced spacing `2*pi/n`.
///
/// Zero exactly when the phases form a regular n-gon; a fully synchronized
/// pair gives `pi`.
pub fn phase_spread(phases: &[f64]) -> Result<f64> {
    let n = phases.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "phase spread needs at least two phases, got {n}"
        )));
    }
    let mut wrapped: Vec<f64> = phases.iter().map(|p| p.rem_euclid(TAU)).collect();
    wrapped.sort_by(f64::total_cmp);
    let spacing = TAU / n as f64;
    let wrap_gap = wrapped[0] + TAU - wrapped[n - 1];
    let spread = wrapped
        .windows(2)
        .map(|w| w[1] - w[0])
        .chain(std::iter::once(wrap_gap))
        .map(|gap| (gap - spacing).abs())
        .fold(0.0, f64::max);
    Ok(spread)
}

/// First step `k` after which the spread stays within `tol` for `hold`
/// consecutive samples (all of which must be in the series).
pub fn detect_equilibrium(spread_history: &[f64], tol: f64, hold: usize) -> Option<usize> {
    let hold = hold.max(1);
    let mut run = 0usize;
    for (k, &s) in spread_history.iter().enumerate() {
        if s <= tol {
            run += 1;
            if run == hold {
                return Some(k + 1 - hold);
            }
        } else {
            run = 0;
        }
    }
    None
}
