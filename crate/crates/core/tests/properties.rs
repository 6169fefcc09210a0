use std::collections::BTreeMap;

use enclose_core::config::{RhoSchedule, ScenarioConfig};
use enclose_core::control::{consensus_term, saturate};
use enclose_core::formation::{desired_position, AffineSchedule, Formation, Waveform};
use enclose_core::localization::{batch_oracle, rlse_update, zeta, EdgeEstimator, Measurement};
use enclose_core::oscillator::phase_spread;
use enclose_core::pe::alpha2_bound;
use enclose_core::{Edge, Mat2, TargetModel, Vec2};
use proptest::prelude::*;

fn vec2(range: f64) -> impl Strategy<Value = Vec2> {
    (-range..range, -range..range).prop_map(|(x, y)| Vec2::new(x, y))
}

fn rotate(v: Vec2, a: f64) -> Vec2 {
    Vec2::new(a.cos() * v.x - a.sin() * v.y, a.sin() * v.x + a.cos() * v.y)
}

fn history(p0: Vec2, vs: &[Vec2]) -> Vec<Measurement> {
    let mut p = p0;
    vs.iter()
        .map(|&v| {
            let m = Measurement::from_relative(p, v);
            p += v;
            m
        })
        .collect()
}

proptest! {
    #[test]
    fn gain_matrix_stays_spd(
        beta in 0.3f64..0.99,
        vs in prop::collection::vec(vec2(3.0), 1..60),
        p in vec2(10.0),
    ) {
        let mut est = EdgeEstimator::new(beta).unwrap();
        for m in history(p, &vs) {
            est = rlse_update(&est, &m).unwrap();
            prop_assert!(est.gamma.is_symmetric_positive_definite(1e-12));
        }
    }

    #[test]
    fn estimate_rotates_with_the_frame(
        beta in 0.4f64..0.95,
        vs in prop::collection::vec(vec2(1.0), 1..40),
        p in vec2(10.0),
        prior in vec2(3.0),
        angle in 0.0f64..std::f64::consts::TAU,
    ) {
        let run = |p: Vec2, prior: Vec2, vs: &[Vec2]| {
            let mut est = EdgeEstimator::with_prior(prior, Mat2::IDENTITY, beta).unwrap();
            for m in history(p, vs) {
                est = rlse_update(&est, &m).unwrap();
            }
            est.p_hat
        };
        let plain = run(p, prior, &vs);
        let rotated_vs: Vec<Vec2> = vs.iter().map(|v| rotate(*v, angle)).collect();
        let turned = run(rotate(p, angle), rotate(prior, angle), &rotated_vs);
        let scale = 1.0 + plain.norm();
        prop_assert!((rotate(plain, angle) - turned).norm() < 1e-9 * scale);
    }

    #[test]
    fn recursion_matches_batch_solution(
        beta in 0.5f64..0.95,
        vs in prop::collection::vec(vec2(1.0), 1..50),
        p in vec2(10.0),
        prior in vec2(3.0),
        noise in prop::collection::vec(-0.05f64..0.05, 50),
    ) {
        let mut h = history(p, &vs);
        for (m, e) in h.iter_mut().zip(&noise) {
            m.d_next = (m.d_next + e).max(0.0);
        }
        let mut est = EdgeEstimator::with_prior(prior, Mat2::IDENTITY, beta).unwrap();
        for (k, m) in h.iter().enumerate() {
            est = rlse_update(&est, m).unwrap();
            let batch = batch_oracle(&h[..=k], prior, Mat2::IDENTITY, beta).unwrap();
            prop_assert!((est.p_hat - batch).norm() < 1e-7 * (1.0 + batch.norm()));
        }
    }

    #[test]
    fn cosine_law_holds(p in vec2(50.0), v in vec2(5.0)) {
        let m = Measurement::from_relative(p, v);
        prop_assert!(m.is_consistent(1e-9));
        prop_assert!((zeta(&m) - v.dot(p)).abs() <= 1e-12 * (1.0 + v.norm() * p.norm()));
    }

    #[test]
    fn saturation_is_a_radial_projection(u in vec2(100.0), cap in 0.01f64..10.0) {
        let s = saturate(u, cap).unwrap();
        prop_assert!(s.norm() <= cap * (1.0 + 1e-15));
        prop_assert!(s.cross(u).abs() <= 1e-12 * (1.0 + u.norm()));
        prop_assert!(s.dot(u) >= 0.0);
        if u.norm() <= cap {
            prop_assert_eq!(s, u);
        }
    }

    #[test]
    fn saturation_is_monotone_in_the_cap(u in vec2(100.0), c1 in 0.01f64..10.0, c2 in 0.01f64..10.0) {
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        prop_assert!(saturate(u, lo).unwrap().norm() <= saturate(u, hi).unwrap().norm() + 1e-12);
    }

    #[test]
    fn consensus_ignores_a_common_offset(
        ests in prop::collection::vec(vec2(10.0), 1..6),
        offset in vec2(100.0),
        beta in 0.1f64..8.0,
    ) {
        // estimates and desired offsets move together when every agent's
        // absolute frame shifts, so only their difference matters
        let ids: Vec<usize> = (0..ests.len()).collect();
        let w: BTreeMap<usize, f64> = ids.iter().map(|&j| (j, 1.0 / ids.len() as f64)).collect();
        let e: BTreeMap<usize, Vec2> = ids.iter().map(|&j| (j, ests[j])).collect();
        let d: BTreeMap<usize, Vec2> = ids.iter().map(|&j| (j, ests[j] * 0.5)).collect();
        let e2: BTreeMap<usize, Vec2> = e.iter().map(|(j, v)| (*j, *v + offset)).collect();
        let d2: BTreeMap<usize, Vec2> = d.iter().map(|(j, v)| (*j, *v + offset)).collect();
        let a = consensus_term(&e, &d, &w, beta).unwrap();
        let b = consensus_term(&e2, &d2, &w, beta).unwrap();
        prop_assert!((a - b).norm() < 1e-9 * beta * (1.0 + offset.norm()));
    }

    #[test]
    fn excitation_bound_is_monotone(
        n in 1usize..100, t in 0.01f64..1.0, rho in 0.1f64..10.0,
        cap in 0.1f64..5.0, u_bar in 0.0f64..2.0, bump in 0.0f64..1.0,
    ) {
        let base = alpha2_bound(n, t, rho, cap, u_bar);
        prop_assert!(alpha2_bound(n + 1, t, rho, cap, u_bar) >= base);
        prop_assert!(alpha2_bound(n, t, rho + bump, cap, u_bar) >= base);
        prop_assert!(alpha2_bound(n, t, rho, cap + bump, u_bar) >= base);
        prop_assert!(alpha2_bound(n, t, rho, cap, u_bar + bump) >= base);
    }

    #[test]
    fn spread_ignores_rotation_and_order(
        phases in prop::collection::vec(0.0f64..std::f64::consts::TAU, 2..8),
        shift in -20.0f64..20.0,
    ) {
        let s = phase_spread(&phases).unwrap();
        let mut moved: Vec<f64> = phases.iter().map(|p| p + shift).collect();
        moved.reverse();
        prop_assert!((phase_spread(&moved).unwrap() - s).abs() < 1e-9);
        prop_assert!((0.0..=std::f64::consts::TAU).contains(&s));
    }

    #[test]
    fn identity_schedule_is_the_plain_circle(theta in -10.0f64..10.0, rho in 0.1f64..20.0, k in 0usize..10_000) {
        let f = Formation::new(rho, AffineSchedule::default()).unwrap();
        prop_assert_eq!(f.setpoint(theta, k).unwrap(), desired_position(theta, rho).unwrap());
    }

    #[test]
    fn edges_are_canonical(i in 0usize..20, j in 0usize..20) {
        prop_assume!(i != j);
        let e = Edge::new(i, j);
        prop_assert_eq!(e, Edge::new(j, i));
        prop_assert_eq!(e.orientation(i, j), -e.orientation(j, i));
    }

    #[test]
    fn scenario_config_round_trips(
        n in 1usize..7,
        t in 0.01f64..0.5,
        omega in 0.1f64..3.0,
        rho in 0.5f64..10.0,
        amp in 0.0f64..0.4,
        speed in 0.0f64..0.5,
        seed in any::<u64>(),
        resolve in any::<bool>(),
    ) {
        let cfg = ScenarioConfig {
            name: Some("prop".into()),
            n,
            t,
            steps: 10,
            omega,
            omega_cap: None,
            osc_gains: None,
            rho_schedule: RhoSchedule {
                base: rho,
                affine: AffineSchedule {
                    s_x: Waveform::Sinusoid { amp, period: 100.0, offset: 1.0, phase: 0.0 },
                    ..AffineSchedule::default()
                },
            },
            beta: 0.5 / t,
            beta_f: 0.7,
            u_bar: 0.4,
            u_max: 50.0,
            target_model: TargetModel::Sinusoid { start: Vec2::ZERO, speed, amp: 1.0, period: 300.0 },
            target_sensors: vec![1],
            initial_positions: None,
            initial_phases: None,
            fault_schedule: vec![],
            noise: None,
            seed,
        };
        let cfg = if resolve { cfg.resolved() } else { cfg };
        let back = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
