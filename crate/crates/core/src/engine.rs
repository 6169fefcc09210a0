//! Synchronous simulation loop.
//!
//! Every step runs the same fixed pipeline on a frozen snapshot of the
//! world:
//!
//! 1. advance the phase oscillators and build the setpoints `r_i(k)`,
//!    `r_i(k+1)` through the affine schedule;
//! 2. compute every UAV's control from the current relative estimates;
//! 3. move the target and the UAVs;
//! 4. synthesize range/displacement readings and update every edge
//!    estimator, so fresh estimates are ready for the next step;
//! 5. emit a record of the state at step `k`.
//!
//! True positions never reach the controllers; they are used only to
//! synthesize measurements and to score the run.

use std::collections::BTreeMap;

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::config::{NoiseConfig, ScenarioConfig};
use crate::control::{consensus_term, control_input, ControlInput};
use crate::error::{Error, Result};
use crate::formation::Formation;
use crate::geometry::Vec2;
use crate::localization::{EdgeEstimator, Measurement};
use crate::oscillator::{default_gains, phase_spread, OscillatorState};
use crate::topology::{Edge, ExtendedGraph, TARGET};
use crate::validate::validate_scenario;

/// Version tag written into every log header.
pub const LOG_SCHEMA: &str = "target-enclose-log/1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentRecord {
    pub id: usize,
    pub position: Vec2,
    pub theta: f64,
    /// Desired offset from the target, `r_i(k)`.
    pub desired: Vec2,
    /// Command applied over step `k`; absent in the final record.
    pub control: Option<ControlInput>,
    /// True self-displacement over step `k`.
    pub displacement: Option<Vec2>,
    /// Planned setpoint displacement `r_i(k+1) - r_i(k)`.
    pub desired_displacement: Option<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeRecord {
    pub edge: Edge,
    pub estimate: Vec2,
    pub truth: Vec2,
}

impl EdgeRecord {
    pub fn error(&self) -> f64 {
        (self.estimate - self.truth).norm()
    }
}

/// Everything observable at step `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub k: usize,
    pub target: Vec2,
    pub target_displacement: Option<Vec2>,
    pub agents: Vec<AgentRecord>,
    pub edges: Vec<EdgeRecord>,
    /// `|mean_i p_i - p_0|`.
    pub tracking_error: f64,
    pub phase_spread: Option<f64>,
}

impl StepRecord {
    pub fn agent(&self, id: usize) -> Option<&AgentRecord> {
        self.agents.iter().find(|a| a.id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    /// Resolved configuration the run was produced from.
    pub config: ScenarioConfig,
    /// One record per step plus the final state.
    pub records: Vec<StepRecord>,
}

impl TrajectoryLog {
    /// UAV ids present at the start of the run.
    pub fn initial_agents(&self) -> Vec<usize> {
        (1..=self.config.n).collect()
    }

    /// Extended edges present at the start of the run.
    pub fn initial_edges(&self) -> Vec<Edge> {
        self.records
            .first()
            .map(|r| r.edges.iter().map(|e| e.edge).collect())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub k: usize,
    pub graph: ExtendedGraph,
    /// True positions, aligned with `graph.agents()`.
    pub positions: Vec<Vec2>,
    pub target_pos: Vec2,
    /// Phases aligned with `graph.agents()`.
    pub oscillator: OscillatorState,
    pub estimators: BTreeMap<Edge, EdgeEstimator>,
    /// Range reading taken at the current step, reused as the next
    /// step's starting range so each range is measured once.
    range_readings: BTreeMap<Edge, f64>,
    noise_rng: ChaCha8Rng,
}

impl WorldState {
    pub fn agents(&self) -> &[usize] {
        self.graph.agents()
    }

    fn index_of(&self, id: usize) -> Option<usize> {
        self.graph.agents().binary_search(&id).ok()
    }

    pub fn position(&self, id: usize) -> Option<Vec2> {
        if id == TARGET {
            Some(self.target_pos)
        } else {
            self.index_of(id).map(|a| self.positions[a])
        }
    }

    /// True relative position carried by `edge`.
    pub fn relative(&self, edge: Edge) -> Vec2 {
        self.position(edge.0).expect("edge endpoint alive") - self.position(edge.1).expect("edge endpoint alive")
    }
}

/// Removes a UAV: the survivors keep their states, the graph and the
/// oscillator network are rebuilt for the smaller team.
pub fn inject_fault(world: &WorldState, uav: usize) -> Result<WorldState> {
    let idx = world.index_of(uav).ok_or(Error::UnknownAgent(uav))?;
    let graph = world.graph.without(uav)?;
    let n = graph.n();

    let mut positions = world.positions.clone();
    positions.remove(idx);
    let mut phases = world.oscillator.phases.clone();
    phases.remove(idx);
    let oscillator = OscillatorState::new(
        phases,
        default_gains(n),
        world.oscillator.omega,
        graph.uav_adjacency_matrix(),
    )?;

    let keep = |e: &Edge| !e.contains(uav);
    Ok(WorldState {
        k: world.k,
        graph,
        positions,
        target_pos: world.target_pos,
        oscillator,
        estimators: world
            .estimators
            .iter()
            .filter(|(e, _)| keep(e))
            .map(|(e, s)| (*e, *s))
            .collect(),
        range_readings: world
            .range_readings
            .iter()
            .filter(|(e, _)| keep(e))
            .map(|(e, d)| (*e, *d))
            .collect(),
        noise_rng: world.noise_rng.clone(),
    })
}

struct NoiseModel {
    distance: Option<Normal<f64>>,
    displacement: Option<Normal<f64>>,
}

impl NoiseModel {
    fn new(cfg: Option<NoiseConfig>) -> Result<Self> {
        let make = |std: f64| -> Result<Option<Normal<f64>>> {
            if std > 0.0 {
                Normal::new(0.0, std)
                    .map(Some)
                    .map_err(|e| Error::InvalidArgument(format!("noise: {e}")))
            } else {
                Ok(None)
            }
        };
        let cfg = cfg.unwrap_or_default();
        Ok(Self {
            distance: make(cfg.distance_std)?,
            displacement: make(cfg.displacement_std)?,
        })
    }

    fn range(&self, truth: f64, rng: &mut ChaCha8Rng) -> f64 {
        match &self.distance {
            Some(d) => (truth + d.sample(rng)).max(0.0),
            None => truth,
        }
    }

    fn displacement(&self, truth: Vec2, rng: &mut ChaCha8Rng) -> Vec2 {
        match &self.displacement {
            Some(d) => truth + Vec2::new(d.sample(rng), d.sample(rng)),
            None => truth,
        }
    }
}

/// A validated scenario ready to simulate.
pub struct Engine {
    cfg: ScenarioConfig,
    formation: Formation,
    noise: NoiseModel,
}

impl Engine {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let report = validate_scenario(cfg);
        if !report.is_ok() {
            return Err(Error::Validation(report.failure_summary()));
        }
        let cfg = cfg.resolved();
        let formation = Formation::new(cfg.rho_schedule.base, cfg.rho_schedule.affine.clone())?;
        let noise = NoiseModel::new(cfg.noise)?;
        Ok(Self { cfg, formation, noise })
    }

    /// The resolved configuration.
    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn initial_state(&self) -> Result<WorldState> {
        let cfg = &self.cfg;
        let graph = crate::topology::build_topology(cfg.n, &cfg.target_sensors)?;
        let positions = cfg.initial_positions.clone().expect("resolved config has positions");
        let phases = cfg.initial_phases.clone().expect("resolved config has phases");
        let oscillator = OscillatorState::new(phases, cfg.gains(), cfg.omega, graph.uav_adjacency_matrix())?;
        let estimators = graph
            .edges()
            .into_iter()
            .map(|e| EdgeEstimator::new(cfg.beta_f).map(|s| (e, s)))
            .collect::<Result<_>>()?;
        let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        noise_rng.set_stream(1);
        Ok(WorldState {
            k: 0,
            graph,
            positions,
            target_pos: cfg.target_model.position(0),
            oscillator,
            estimators,
            range_readings: BTreeMap::new(),
            noise_rng,
        })
    }

    fn setpoints(&self, phases: &[f64], k: usize, agents: &[usize]) -> Result<Vec<Vec2>> {
        phases
            .iter()
            .zip(agents)
            .map(|(&theta, &id)| self.formation.setpoint(theta, k).map_err(|e| e.at(k, id)))
            .collect()
    }

    /// Record of the current state without advancing it.
    pub fn snapshot(&self, world: &WorldState) -> Result<StepRecord> {
        let r_now = self.setpoints(&world.oscillator.phases, world.k, world.agents())?;
        Ok(self.record(world, &r_now, None))
    }

    fn record(&self, world: &WorldState, r_now: &[Vec2], transition: Option<&Transition>) -> StepRecord {
        let agents = world
            .agents()
            .iter()
            .enumerate()
            .map(|(a, &id)| AgentRecord {
                id,
                position: world.positions[a],
                theta: world.oscillator.phases[a],
                desired: r_now[a],
                control: transition.map(|t| t.controls[a]),
                displacement: transition.map(|t| t.displacements[a]),
                desired_displacement: transition.map(|t| t.desired_displacements[a]),
            })
            .collect();
        let edges = world
            .estimators
            .iter()
            .map(|(&edge, est)| EdgeRecord {
                edge,
                estimate: est.p_hat,
                truth: world.relative(edge),
            })
            .collect();
        let n = world.positions.len() as f64;
        let center = world.positions.iter().copied().sum::<Vec2>() / n;
        StepRecord {
            k: world.k,
            target: world.target_pos,
            target_displacement: transition.map(|t| t.target_displacement),
            agents,
            edges,
            tracking_error: (center - world.target_pos).norm(),
            phase_spread: phase_spread(&world.oscillator.phases).ok(),
        }
    }

    /// Advances the world by one step.
    pub fn step(&self, world: &WorldState) -> Result<(WorldState, StepRecord)> {
        let cfg = &self.cfg;
        let (k, t) = (world.k, cfg.t);
        let agents = world.agents().to_vec();
        let graph = &world.graph;

        // 1. pattern generation
        let next_osc = world.oscillator.phase_step(t)?;
        let r_now = self.setpoints(&world.oscillator.phases, k, &agents)?;
        let r_next = self.setpoints(&next_osc.phases, k + 1, &agents)?;
        let dr: Vec<Vec2> = r_next.iter().zip(&r_now).map(|(a, b)| *a - *b).collect();

        // 2. control from current estimates
        let v0 = cfg.target_model.displacement(k);
        let u0 = v0 / t;
        let mut controls = Vec::with_capacity(agents.len());
        for (a, &i) in agents.iter().enumerate() {
            let mut estimates = BTreeMap::new();
            let mut desired = BTreeMap::new();
            let mut weights = BTreeMap::new();
            for j in graph.extended_neighbors(i) {
                let edge = Edge::new(i, j);
                let sign = edge.orientation(i, j);
                estimates.insert(j, world.estimators[&edge].p_hat * sign);
                let r_j = (j != TARGET).then(|| r_now[world.index_of(j).expect("neighbor alive")]);
                desired.insert(j, crate::formation::desired_relative(r_now[a], r_j));
                weights.insert(j, graph.weight(i, j));
            }
            let u_bar = consensus_term(&estimates, &desired, &weights, cfg.beta).map_err(|e| e.at(k, i))?;
            let c = control_input(u_bar, cfg.u_bar, dr[a], t, u0).map_err(|e| e.at(k, i))?;
            let speed = c.u.norm();
            if !speed.is_finite() {
                return Err(Error::NonFinite {
                    step: k,
                    what: format!("control of uav {i}"),
                });
            }
            if speed > cfg.u_max {
                return Err(Error::VelocityBound {
                    step: k,
                    agent: i,
                    speed,
                    bound: cfg.u_max,
                });
            }
            controls.push(c);
        }

        // 3. motion
        let displacements: Vec<Vec2> = controls.iter().map(|c| c.u * t).collect();
        let positions: Vec<Vec2> = world
            .positions
            .iter()
            .zip(&displacements)
            .map(|(p, v)| *p + *v)
            .collect();
        let target_pos = world.target_pos + v0;

        // 4. measurements and estimator updates
        let mut rng = world.noise_rng.clone();
        let measured_v: Vec<Vec2> = displacements
            .iter()
            .map(|v| self.noise.displacement(*v, &mut rng))
            .collect();
        let pos_next = |id: usize| {
            if id == TARGET {
                target_pos
            } else {
                positions[world.index_of(id).expect("edge endpoint alive")]
            }
        };
        let disp_meas = |id: usize| {
            if id == TARGET {
                v0
            } else {
                measured_v[world.index_of(id).expect("edge endpoint alive")]
            }
        };
        let mut estimators = BTreeMap::new();
        let mut range_readings = BTreeMap::new();
        for (&edge, est) in &world.estimators {
            let d_now = match world.range_readings.get(&edge) {
                Some(&d) => d,
                None => self.noise.range(world.relative(edge).norm(), &mut rng),
            };
            let truth_next = pos_next(edge.0) - pos_next(edge.1);
            let d_next = self.noise.range(truth_next.norm(), &mut rng);
            let m = Measurement {
                d_now,
                d_next,
                v: disp_meas(edge.0) - disp_meas(edge.1),
            };
            let updated = est.update(&m).map_err(|e| e.at(k, edge.0))?;
            if !updated.p_hat.is_finite() || !updated.gamma.is_finite() {
                return Err(Error::NonFinite {
                    step: k,
                    what: format!("estimator on edge {edge}"),
                });
            }
            estimators.insert(edge, updated);
            range_readings.insert(edge, d_next);
        }
        if let Some(a) = positions.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite {
                step: k,
                what: format!("position of uav {}", agents[a]),
            });
        }

        // 5. record of step k
        let transition = Transition {
            controls,
            displacements,
            desired_displacements: dr,
            target_displacement: v0,
        };
        let record = self.record(world, &r_now, Some(&transition));

        let next = WorldState {
            k: k + 1,
            graph: world.graph.clone(),
            positions,
            target_pos,
            oscillator: next_osc,
            estimators,
            range_readings,
            noise_rng: rng,
        };
        Ok((next, record))
    }

    /// Runs every step, applying scheduled faults at the start of their step.
    pub fn run(&self) -> Result<TrajectoryLog> {
        let mut world = self.initial_state()?;
        let mut faults = self.cfg.fault_schedule.clone();
        faults.sort_by_key(|f| f.step);
        let mut faults = faults.into_iter().peekable();
        let mut records = Vec::with_capacity(self.cfg.steps + 1);

        for k in 0..=self.cfg.steps {
            while let Some(f) = faults.next_if(|f| f.step <= k) {
                info!("step {k}: removing uav {}", f.uav);
                world = inject_fault(&world, f.uav).map_err(|e| e.at(k, f.uav))?;
            }
            if k == self.cfg.steps {
                break;
            }
            let (next, record) = self.step(&world)?;
            if k % 100 == 0 {
                debug!(
                    "step {k}: tracking error {:.3e}, phase spread {:?}",
                    record.tracking_error, record.phase_spread
                );
            }
            records.push(record);
            world = next;
        }
        records.push(self.snapshot(&world)?);
        Ok(TrajectoryLog {
            config: self.cfg.clone(),
            records,
        })
    }
}

struct Transition {
    controls: Vec<ControlInput>,
    displacements: Vec<Vec2>,
    desired_displacements: Vec<Vec2>,
    target_displacement: Vec2,
}

/// Validates, resolves and runs a scenario.
pub fn run(cfg: &ScenarioConfig) -> Result<TrajectoryLog> {
    Engine::new(cfg)?.run()
}
