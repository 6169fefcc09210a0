//! Persistent-excitation analysis of logged relative displacements.
//!
//! Over a window of `N = floor(2*pi / (T*omega))` steps (one orbit period)
//! the Gramian `Phi = sum v v^T` of an edge's relative displacements must be
//! bounded below by a positive multiple of the identity for the estimator
//! on that edge to converge exponentially, and it is bounded above by
//! `N T^2 (rho*Omega + 2*U_bar)^2` when the control terms respect their caps.

use std::f64::consts::{SQRT_2, TAU};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Mat2, Vec2};
use crate::topology::Edge;

/// Smallest Gramian eigenvalue that still counts as excitation.
pub const PE_FLOOR: f64 = 1e-8;
/// Slack on the upper Gramian bound.
pub const ALPHA2_SLACK: f64 = 1e-9;
/// Slack on the chord-length inequalities.
pub const CHORD_SLACK: f64 = 1e-9;

/// Steps per orbit, `floor(2*pi / (T*omega))`.
pub fn window_period(t: f64, omega: f64) -> Result<usize> {
    if !(t > 0.0) || !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "window period needs T > 0 and omega > 0, got T = {t}, omega = {omega}"
        )));
    }
    let ratio = TAU / (t * omega);
    // guard against 31.999999999 when the ratio is an integer in exact arithmetic
    Ok((ratio * (1.0 + 1e-12)).floor().max(1.0) as usize)
}

/// `N T^2 (rho*Omega + 2*U_bar)^2`.
pub fn alpha2_bound(n_window: usize, t: f64, rho: f64, omega_cap: f64, u_bar: f64) -> f64 {
    n_window as f64 * t * t * (rho * omega_cap + 2.0 * u_bar).powi(2)
}

/// Sum of `v v^T` over `history[l..l+n]`.
pub fn gramian(v_history: &[Vec2], l: usize, n: usize) -> Result<Mat2> {
    let end = l + n;
    if end > v_history.len() {
        return Err(Error::InsufficientHistory {
            needed: end,
            available: v_history.len(),
        });
    }
    Ok(v_history[l..end].iter().fold(Mat2::ZERO, |acc, v| acc + v.outer(*v)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeReport {
    pub edge: Edge,
    pub window_start: usize,
    pub n: usize,
    #[serde(skip)]
    pub phi: Mat2,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub alpha2_bound: f64,
    pub pass: bool,
}

impl PeReport {
    pub fn excited(&self) -> bool {
        self.lambda_min > PE_FLOOR
    }

    pub fn within_upper_bound(&self) -> bool {
        self.lambda_max <= self.alpha2_bound + ALPHA2_SLACK
    }
}

/// Gramian report for one window.
pub fn window_report(edge: Edge, v_history: &[Vec2], l: usize, n: usize, alpha2: f64) -> Result<PeReport> {
    let phi = gramian(v_history, l, n)?;
    let (lambda_min, lambda_max) = phi.sym_eigenvalues();
    let mut report = PeReport {
        edge,
        window_start: l,
        n,
        phi,
        lambda_min,
        lambda_max,
        alpha2_bound: alpha2,
        pass: false,
    };
    report.pass = report.excited() && report.within_upper_bound();
    Ok(report)
}

/// Reports for every complete window starting at or after `from`.
///
/// `history[k]` is the edge's relative displacement over step `k`, or `None`
/// when the edge did not exist at that step; windows touching a gap are
/// skipped.
pub fn window_reports(edge: Edge, history: &[Option<Vec2>], from: usize, n: usize, alpha2: f64) -> Vec<PeReport> {
    let mut out = Vec::new();
    for (start, values) in contiguous_runs(history) {
        if values.len() < n {
            continue;
        }
        for l in from.max(start)..=start + values.len() - n {
            if let Ok(mut r) = window_report(edge, &values, l - start, n, alpha2) {
                r.window_start = l;
                out.push(r);
            }
        }
    }
    out
}

/// Run parameters needed to score excitation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeParams {
    pub t: f64,
    pub omega: f64,
    pub omega_cap: f64,
    /// Largest setpoint radius over the run.
    pub rho: f64,
    pub u_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeSummary {
    pub from: usize,
    pub n: usize,
    pub alpha2_bound: f64,
    pub windows: usize,
    pub failures: usize,
    pub min_lambda_min: Option<f64>,
    pub max_lambda_max: Option<f64>,
    pub reports: Vec<PeReport>,
}

impl PeSummary {
    /// At least one window was scored and none failed.
    pub fn pass(&self) -> bool {
        self.windows > 0 && self.failures == 0
    }
}

/// Scores every complete window after `from` on every edge.
pub fn check_pe(histories: &[(Edge, Vec<Option<Vec2>>)], from: usize, params: PeParams) -> Result<PeSummary> {
    let n = window_period(params.t, params.omega)?;
    let alpha2 = alpha2_bound(n, params.t, params.rho, params.omega_cap, params.u_bar);
    let reports: Vec<PeReport> = histories
        .iter()
        .flat_map(|(edge, h)| window_reports(*edge, h, from, n, alpha2))
        .collect();
    Ok(PeSummary {
        from,
        n,
        alpha2_bound: alpha2,
        windows: reports.len(),
        failures: reports.iter().filter(|r| !r.pass).count(),
        min_lambda_min: reports.iter().map(|r| r.lambda_min).reduce(f64::min),
        max_lambda_max: reports.iter().map(|r| r.lambda_max).reduce(f64::max),
        reports,
    })
}

fn contiguous_runs(history: &[Option<Vec2>]) -> Vec<(usize, Vec<Vec2>)> {
    let mut runs = Vec::new();
    let mut current: Option<(usize, Vec<Vec2>)> = None;
    for (k, v) in history.iter().enumerate() {
        match (v, current.as_mut()) {
            (Some(v), Some((_, values))) => values.push(*v),
            (Some(v), None) => current = Some((k, vec![*v])),
            (None, _) => runs.extend(current.take()),
        }
    }
    runs.extend(current);
    runs
}

/// `g(W) = s_max - sqrt(s_max^2 - s_min^2)` over the singular values of `W`.
pub fn g_value(w: Mat2) -> f64 {
    let (s_min, s_max) = w.singular_values();
    if s_min <= s_max * 1e-12 {
        return 0.0;
    }
    s_max - (s_max * s_max - s_min * s_min).max(0.0).sqrt()
}

/// Largest sampling interval admitted by the excitation pair `W` under the
/// consensus cap `u_bar`. Zero when `W` is rank deficient.
pub fn small_t_threshold(w_star: Mat2, u_bar: f64) -> Result<f64> {
    if !(u_bar > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "consensus cap must be positive, got {u_bar}"
        )));
    }
    Ok(g_value(w_star) / (2.0 * SQRT_2 * u_bar))
}

/// Best excitation pair `[dr(k1), dr(k2)]` inside one window.
pub fn best_pair(dr_window: &[Vec2]) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..dr_window.len() {
        for j in i + 1..dr_window.len() {
            let g = g_value(Mat2::from_columns(dr_window[i], dr_window[j]));
            if best.is_none_or(|b| g > b.2) {
                best = Some((i, j, g));
            }
        }
    }
    best
}

/// Sampling-interval condition evaluated over all windows and edges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallTReport {
    pub t: f64,
    pub windows: usize,
    /// Largest `g` over all windows and edges (the arg-max reading).
    pub g_argmax: f64,
    /// Smallest per-window best `g` (uniform over every edge and window).
    pub g_min: f64,
    pub threshold_argmax: f64,
    pub threshold_min: f64,
    pub passes_argmax: bool,
    pub passes_min: bool,
}

/// Evaluates the sampling-interval condition on desired relative
/// displacement histories, windows starting at or after `from`.
pub fn small_t_analysis(
    dr_histories: &[(Edge, Vec<Option<Vec2>>)],
    from: usize,
    n: usize,
    t: f64,
    u_bar: f64,
) -> Result<SmallTReport> {
    let mut g_argmax = f64::NEG_INFINITY;
    let mut g_min = f64::INFINITY;
    let mut windows = 0usize;
    for (_, history) in dr_histories {
        for (start, values) in contiguous_runs(history) {
            if values.len() < n {
                continue;
            }
            for l in from.max(start)..=start + values.len() - n {
                let window = &values[l - start..l - start + n];
                let g = best_pair(window).map_or(0.0, |b| b.2);
                g_argmax = g_argmax.max(g);
                g_min = g_min.min(g);
                windows += 1;
            }
        }
    }
    if windows == 0 {
        return Err(Error::InsufficientHistory {
            needed: n,
            available: 0,
        });
    }
    let threshold_argmax = small_t_threshold_from_g(g_argmax, u_bar)?;
    let threshold_min = small_t_threshold_from_g(g_min, u_bar)?;
    Ok(SmallTReport {
        t,
        windows,
        g_argmax,
        g_min,
        threshold_argmax,
        threshold_min,
        passes_argmax: t < threshold_argmax,
        passes_min: t < threshold_min,
    })
}

fn small_t_threshold_from_g(g: f64, u_bar: f64) -> Result<f64> {
    if !(u_bar > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "consensus cap must be positive, got {u_bar}"
        )));
    }
    Ok(g / (2.0 * SQRT_2 * u_bar))
}

/// True iff every displacement satisfies `|dr| <= 2 rho |sin(T omega / 2)|`
/// and that chord bound itself is at most `T rho Omega`.
pub fn chord_bound_check(dr_history: &[Vec2], rho: f64, omega: f64, omega_cap: f64, t: f64) -> Result<bool> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {rho}")));
    }
    let chord = 2.0 * rho * (t * omega / 2.0).sin().abs();
    let cap = t * rho * omega_cap;
    if chord > cap + CHORD_SLACK {
        return Ok(false);
    }
    Ok(dr_history.iter().all(|dr| dr.norm() <= chord + CHORD_SLACK))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn periods() {
        assert_eq!(window_period(0.125, FRAC_PI_2).unwrap(), 32);
        assert_eq!(window_period(0.1, TAU).unwrap(), 10);
        assert_eq!(window_period(1.0, TAU).unwrap(), 1);
        assert!(window_period(0.0, 1.0).is_err());
        assert!(window_period(0.1, -1.0).is_err());
    }

    #[test]
    fn collinear_excitation_fails() {
        let v = vec![Vec2::new(1.0, 0.0); 4];
        let phi = gramian(&v, 0, 4).unwrap();
        assert_eq!(phi, Mat2::diag(4.0, 0.0));
        let r = window_report(Edge(1, 0), &v, 0, 4, 100.0).unwrap();
        assert_eq!(r.lambda_min, 0.0);
        assert!(!r.pass);
    }

    #[test]
    fn orthogonal_excitation_passes() {
        let v: Vec<Vec2> = (0..4)
            .map(|k| {
                if k % 2 == 0 {
                    Vec2::new(1.0, 0.0)
                } else {
                    Vec2::new(0.0, 1.0)
                }
            })
            .collect();
        let r = window_report(Edge(1, 2), &v, 0, 4, 100.0).unwrap();
        assert_eq!(r.phi, Mat2::diag(2.0, 2.0));
        assert!((r.lambda_min - 2.0).abs() < 1e-15);
        assert!(r.pass);
        assert!(gramian(&v, 1, 4).is_err());
    }

    #[test]
    fn reports_skip_gaps() {
        let mut h: Vec<Option<Vec2>> = (0..10).map(|k| Some(Vec2::from_angle(k as f64))).collect();
        h[5] = None;
        let reports = window_reports(Edge(1, 2), &h, 0, 3, 10.0);
        let starts: Vec<usize> = reports.iter().map(|r| r.window_start).collect();
        assert_eq!(starts, vec![0, 1, 2, 6, 7]);
        let later = window_reports(Edge(1, 2), &h, 7, 3, 10.0);
        assert_eq!(later.len(), 1);
    }

    #[test]
    fn thresholds() {
        let lam = 0.8;
        let th = small_t_threshold(Mat2::diag(lam, lam), 0.4).unwrap();
        assert!((th - lam / (2.0 * SQRT_2 * 0.4)).abs() < 1e-15);

        let th = small_t_threshold(Mat2::diag(2.0, 1.0), 0.4).unwrap();
        let g = 2.0 - 3f64.sqrt();
        assert!((g - 0.2679).abs() < 1e-4);
        assert!((th - g / (2.0 * SQRT_2 * 0.4)).abs() < 1e-15);
        assert!((th - 0.2369).abs() < 1e-4);

        assert_eq!(small_t_threshold(Mat2::new(1.0, 2.0, 2.0, 4.0), 0.4).unwrap(), 0.0);
        assert!(small_t_threshold(Mat2::IDENTITY, 0.0).is_err());
    }

    #[test]
    fn chord_checks() {
        let (rho, w, t) = (4.0, FRAC_PI_2, 0.125);
        assert!(chord_bound_check(&[Vec2::ZERO; 5], rho, w, PI, t).unwrap());
        let orbit: Vec<Vec2> = (0..64)
            .map(|k| Vec2::from_angle(w * t * (k + 1) as f64) * rho - Vec2::from_angle(w * t * k as f64) * rho)
            .collect();
        assert!(chord_bound_check(&orbit, rho, w, PI, t).unwrap());
        let too_long = vec![Vec2::new(t * rho * PI + 1.0, 0.0)];
        assert!(!chord_bound_check(&too_long, rho, w, PI, t).unwrap());
        // Omega below omega breaks the second inequality
        assert!(!chord_bound_check(&orbit, rho, w, 0.5, t).unwrap());
    }

    #[test]
    fn best_pair_prefers_orthogonal() {
        let w = [Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.1), Vec2::new(0.0, 1.0)];
        let (i, j, g) = best_pair(&w).unwrap();
        assert_eq!((i, j), (0, 2));
        assert!((g - 1.0).abs() < 1e-12);
    }
}
