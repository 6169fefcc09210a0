//! Relative localization from range and displacement readings.
//!
//! For a pair of vertices the cosine law turns two consecutive ranges and
//! the relative displacement into a linear observation of the relative
//! position:
//!
//! ```text
//! zeta = (d(k+1)^2 - d(k)^2 - |v|^2) / 2 = v . p(k)
//! ```
//!
//! A recursive least-squares estimator with exponential forgetting tracks
//! `p(k)`, propagating the estimate by the known displacement each step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat2, Vec2};

/// Range and displacement readings for one edge over one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    /// Range at the start of the step.
    pub d_now: f64,
    /// Range at the end of the step.
    pub d_next: f64,
    /// Relative displacement `v_i - v_j` over the step.
    pub v: Vec2,
}

impl Measurement {
    /// Noiseless readings for a pair with relative position `p_ij` at the
    /// start of the step and relative displacement `v_ij`.
    pub fn from_relative(p_ij: Vec2, v_ij: Vec2) -> Self {
        Self {
            d_now: p_ij.norm(),
            d_next: (p_ij + v_ij).norm(),
            v: v_ij,
        }
    }

    /// Checks that ranges are non-negative and consistent with the
    /// displacement by the triangle inequality.
    pub fn is_consistent(&self, tol: f64) -> bool {
        self.d_now >= 0.0 && self.d_next >= 0.0 && (self.d_next - self.d_now).abs() <= self.v.norm() + tol
    }
}

/// `(d_next^2 - d_now^2 - |v|^2) / 2`.
pub fn zeta(m: &Measurement) -> f64 {
    0.5 * (m.d_next * m.d_next - m.d_now * m.d_now - m.v.norm_squared())
}

/// Per-edge estimator state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeEstimator {
    pub p_hat: Vec2,
    pub gamma: Mat2,
    pub beta_f: f64,
}

impl EdgeEstimator {
    /// Zero initial estimate with identity gain matrix.
    pub fn new(beta_f: f64) -> Result<Self> {
        Self::with_prior(Vec2::ZERO, Mat2::IDENTITY, beta_f)
    }

    pub fn with_prior(p_hat: Vec2, gamma: Mat2, beta_f: f64) -> Result<Self> {
        check_forgetting(beta_f)?;
        if !gamma.is_symmetric_positive_definite(1e-12) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { p_hat, gamma, beta_f })
    }

    /// Innovation `zeta - v . p_hat` for a measurement.
    pub fn innovation(&self, m: &Measurement) -> f64 {
        zeta(m) - m.v.dot(self.p_hat)
    }

    pub fn update(&self, m: &Measurement) -> Result<EdgeEstimator> {
        rlse_update(self, m)
    }

    /// Estimator for the reversed edge (`p_ji = -p_ij`).
    pub fn reversed(&self) -> EdgeEstimator {
        EdgeEstimator {
            p_hat: -self.p_hat,
            ..*self
        }
    }
}

fn check_forgetting(beta_f: f64) -> Result<()> {
    if beta_f > 0.0 && beta_f < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "forgetting factor must lie in (0, 1), got {beta_f}"
        )))
    }
}

/// One recursive least-squares step with forgetting.
pub fn rlse_update(est: &EdgeEstimator, m: &Measurement) -> Result<EdgeEstimator> {
    check_forgetting(est.beta_f)?;
    let gamma = est.gamma;
    if !gamma.is_symmetric_positive_definite(1e-12) {
        return Err(Error::NotPositiveDefinite);
    }
    let v = m.v;
    let beta = est.beta_f;

    let eps = est.innovation(m);
    let gv = gamma * v;
    let denom = beta + v.dot(gv);
    let gamma_next = ((gamma - gv.outer(gv) * (1.0 / denom)) * (1.0 / beta)).symmetrized();
    let p_hat = est.p_hat + v + gamma_next * v * eps;

    Ok(EdgeEstimator {
        p_hat,
        gamma: gamma_next,
        beta_f: beta,
    })
}

/// Exact minimizer of the forgetting-weighted least-squares cost after
/// `history.len()` updates, obtained by solving the 2x2 normal equations.
///
/// Measurement `l` of `k` is weighted by `beta_f^(k-1-l)` and refers to the
/// relative position at step `l`, which is the unknown current position
/// minus the displacements accumulated since. The prior is weighted by
/// `beta_f^k`. This is what the recursion computes in closed form; it is
/// kept as a direct solve so it can serve as an independent check.
pub fn batch_oracle(history: &[Measurement], p_hat0: Vec2, gamma0: Mat2, beta_f: f64) -> Result<Vec2> {
    check_forgetting(beta_f)?;
    if !gamma0.is_symmetric_positive_definite(1e-12) {
        return Err(Error::NotPositiveDefinite);
    }
    let k = history.len();
    if k == 0 {
        return Ok(p_hat0);
    }
    let prior_info = gamma0.inverse().ok_or(Error::NotPositiveDefinite)?;

    // suffix[l] = sum of v_q for q in l..k
    let mut suffix = vec![Vec2::ZERO; k + 1];
    for l in (0..k).rev() {
        suffix[l] = suffix[l + 1] + history[l].v;
    }

    let prior_w = beta_f.powi(k as i32);
    let mut normal = prior_info * prior_w;
    let mut rhs = prior_info * (suffix[0] + p_hat0) * prior_w;
    for (l, m) in history.iter().enumerate() {
        let w = beta_f.powi((k - 1 - l) as i32);
        let v = m.v;
        normal += v.outer(v) * w;
        rhs += v * (w * (zeta(m) + v.dot(suffix[l])));
    }
    normal.solve(rhs).ok_or(Error::SingularNormalMatrix)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_cosine_law() {
        let m = Measurement::from_relative(Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0));
        assert_eq!(m.d_now, 1.0);
        assert!((m.d_next - 5f64.sqrt()).abs() < 1e-15);
        assert!((zeta(&m) - 1.0).abs() < 1e-14);

        let still = Measurement {
            d_now: 3.0,
            d_next: 3.0,
            v: Vec2::ZERO,
        };
        assert_eq!(zeta(&still), 0.0);
    }

    #[test]
    fn perfect_prior_propagates_truth() {
        let p = Vec2::new(2.0, -1.0);
        let v = Vec2::new(0.3, 0.4);
        let est = EdgeEstimator::with_prior(p, Mat2::IDENTITY, 0.7).unwrap();
        let m = Measurement::from_relative(p, v);
        assert!(est.innovation(&m).abs() < 1e-14);
        let next = est.update(&m).unwrap();
        assert!((next.p_hat - (p + v)).norm() < 1e-14);
    }

    #[test]
    fn gamma_closed_form() {
        let est = EdgeEstimator::new(0.7).unwrap();
        let m = Measurement::from_relative(Vec2::new(3.0, 1.0), Vec2::new(1.0, 0.0));
        let next = est.update(&m).unwrap();
        assert!((next.gamma.a - 1.0 / 1.7).abs() < 1e-15);
        assert!((next.gamma.d - 1.0 / 0.7).abs() < 1e-15);
        assert_eq!(next.gamma.b, 0.0);
        assert_eq!(next.gamma.c, 0.0);
    }

    #[test]
    fn zero_excitation_only_inflates_gamma() {
        let est = EdgeEstimator::with_prior(Vec2::new(1.0, 2.0), Mat2::new(2.0, 0.5, 0.5, 1.0), 0.5).unwrap();
        let m = Measurement {
            d_now: 4.0,
            d_next: 4.0,
            v: Vec2::ZERO,
        };
        let next = est.update(&m).unwrap();
        assert_eq!(next.p_hat, est.p_hat);
        assert!((next.gamma - est.gamma * 2.0).max_abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_gamma_and_forgetting() {
        let bad = EdgeEstimator {
            p_hat: Vec2::ZERO,
            gamma: Mat2::new(1.0, 2.0, 2.0, 1.0),
            beta_f: 0.7,
        };
        let m = Measurement::from_relative(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0));
        assert!(matches!(rlse_update(&bad, &m), Err(Error::NotPositiveDefinite)));
        assert!(EdgeEstimator::new(1.0).is_err());
        assert!(EdgeEstimator::new(0.0).is_err());
    }

    #[test]
    fn oracle_empty_history_is_prior() {
        let p0 = Vec2::new(0.5, -0.25);
        assert_eq!(batch_oracle(&[], p0, Mat2::IDENTITY, 0.7).unwrap(), p0);
    }

    #[test]
    fn oracle_matches_single_update() {
        let m = Measurement::from_relative(Vec2::new(2.0, 1.0), Vec2::new(0.6, -0.2));
        let est = EdgeEstimator::new(0.7).unwrap().update(&m).unwrap();
        let oracle = batch_oracle(&[m], Vec2::ZERO, Mat2::IDENTITY, 0.7).unwrap();
        assert!((oracle - est.p_hat).norm() < 1e-10);
    }

    #[test]
    fn oracle_reports_singular_normals() {
        // prior weight underflows to zero and the only regressor direction is x
        let m = Measurement::from_relative(Vec2::new(1.0, 1.0), Vec2::new(1.0, 0.0));
        let history = vec![m; 3000];
        let err = batch_oracle(&history, Vec2::ZERO, Mat2::IDENTITY, 0.5).unwrap_err();
        assert!(matches!(err, Error::SingularNormalMatrix));
    }

    #[test]
    fn circular_history_converges_to_truth() {
        // Pair rotating on a circle of radius 4 at pi/2 rad/s with T = 0.125.
        let (rho, w, t) = (4.0, std::f64::consts::FRAC_PI_2, 0.125);
        let pos = |k: usize| Vec2::from_angle(w * t * k as f64) * rho;
        let history: Vec<Measurement> = (0..200)
            .map(|k| Measurement::from_relative(pos(k), pos(k + 1) - pos(k)))
            .collect();
        let mut est = EdgeEstimator::new(0.7).unwrap();
        for m in &history {
            est = est.update(m).unwrap();
        }
        let oracle = batch_oracle(&history, Vec2::ZERO, Mat2::IDENTITY, 0.7).unwrap();
        assert!((oracle - pos(200)).norm() < 1e-6);
        assert!((est.p_hat - oracle).norm() < 1e-6);
    }
}
