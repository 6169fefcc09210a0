//! Interaction topology: the complete UAV graph extended with the target
//! vertex `0`.
//!
//! Weights follow the uniform rule `a_ij = 1 / |N_i|` over each UAV's
//! extended neighbor set, so every UAV row sums to one. When only some UAVs
//! sense the target the degrees differ and the weights are not symmetric;
//! only the row-sum property is guaranteed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// Vertex id of the moving target.
pub const TARGET: usize = 0;

/// Undirected extended edge, stored canonically.
///
/// UAV pairs are kept as `(i, j)` with `i < j`; a UAV-target edge is `(i, 0)`.
/// The relative position carried by an edge is always `p_first - p_second`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge(pub usize, pub usize);

impl Edge {
    /// Canonical edge between two vertices.
    pub fn new(u: usize, v: usize) -> Self {
        assert_ne!(u, v, "self loops are not edges");
        if u == TARGET {
            Edge(v, TARGET)
        } else if v == TARGET {
            Edge(u, TARGET)
        } else {
            Edge(u.min(v), u.max(v))
        }
    }

    pub fn is_target_edge(self) -> bool {
        self.1 == TARGET
    }

    pub fn contains(self, v: usize) -> bool {
        self.0 == v || self.1 == v
    }

    /// Sign relating this edge's stored relative position to `p_from - p_to`.
    pub fn orientation(self, from: usize, to: usize) -> f64 {
        if self.0 == from && self.1 == to {
            1.0
        } else if self.0 == to && self.1 == from {
            -1.0
        } else {
            panic!("edge {self} does not join {from} and {to}")
        }
    }
}

impl serde::Serialize for Edge {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.0, self.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedGraph {
    agents: Vec<usize>,
    target_sensors: BTreeSet<usize>,
    weights: BTreeMap<(usize, usize), f64>,
}

/// Complete UAV graph over `1..=n` plus the target vertex.
pub fn build_topology(n: usize, target_sensors: &[usize]) -> Result<ExtendedGraph> {
    if n == 0 {
        return Err(Error::Topology("need at least one UAV".into()));
    }
    let agents: Vec<usize> = (1..=n).collect();
    ExtendedGraph::over(&agents, target_sensors)
}

impl ExtendedGraph {
    /// Complete graph over an arbitrary set of UAV ids, e.g. the survivors
    /// after a fault.
    pub fn over(agents: &[usize], target_sensors: &[usize]) -> Result<Self> {
        let agent_set: BTreeSet<usize> = agents.iter().copied().collect();
        if agent_set.is_empty() {
            return Err(Error::Topology("need at least one UAV".into()));
        }
        if agent_set.len() != agents.len() {
            return Err(Error::Topology("duplicate UAV id".into()));
        }
        if agent_set.contains(&TARGET) {
            return Err(Error::Topology("UAV ids start at 1; 0 is the target".into()));
        }
        let sensors: BTreeSet<usize> = target_sensors.iter().copied().collect();
        if let Some(bad) = sensors.iter().find(|s| !agent_set.contains(s)) {
            return Err(Error::Topology(format!("target sensor {bad} is not a UAV")));
        }
        if sensors.is_empty() {
            return Err(Error::Topology("target not globally reachable".into()));
        }

        let mut weights = BTreeMap::new();
        for &i in &agent_set {
            let degree = agent_set.len() - 1 + usize::from(sensors.contains(&i));
            let w = 1.0 / degree as f64;
            for &j in &agent_set {
                if j != i {
                    weights.insert((i, j), w);
                }
            }
            if sensors.contains(&i) {
                weights.insert((i, TARGET), w);
            }
        }

        Ok(Self {
            agents: agent_set.into_iter().collect(),
            target_sensors: sensors,
            weights,
        })
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[usize] {
        &self.agents
    }

    pub fn target_sensors(&self) -> &BTreeSet<usize> {
        &self.target_sensors
    }

    pub fn senses_target(&self, i: usize) -> bool {
        self.target_sensors.contains(&i)
    }

    pub fn contains(&self, i: usize) -> bool {
        self.agents.binary_search(&i).is_ok()
    }

    /// Extended neighbor set of UAV `i` (other UAVs, then the target if sensed).
    pub fn extended_neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.agents.iter().copied().filter(|&j| j != i).collect();
        if self.senses_target(i) {
            out.push(TARGET);
        }
        out
    }

    /// Extended weight `a_ij`; zero when `(i, j)` is not an edge.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights.get(&(i, j)).copied().unwrap_or(0.0)
    }

    /// Row sum of extended weights for UAV `i`.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.weights.range((i, 0)..=(i, usize::MAX)).map(|(_, w)| w).sum()
    }

    /// UAV-only adjacency used by the phase oscillators, `1 / |N_i|` on the
    /// complete graph.
    pub fn uav_adjacency(&self, i: usize, j: usize) -> f64 {
        if i == j || !self.contains(i) || !self.contains(j) {
            0.0
        } else {
            1.0 / (self.n() - 1) as f64
        }
    }

    /// Dense UAV adjacency in agent order.
    pub fn uav_adjacency_matrix(&self) -> Vec<Vec<f64>> {
        self.agents
            .iter()
            .map(|&i| self.agents.iter().map(|&j| self.uav_adjacency(i, j)).collect())
            .collect()
    }

    /// All undirected extended edges: UAV pairs first, then target edges.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for (a, &i) in self.agents.iter().enumerate() {
            for &j in &self.agents[a + 1..] {
                out.push(Edge(i, j));
            }
        }
        out.extend(self.target_sensors.iter().map(|&i| Edge(i, TARGET)));
        out
    }

    /// Same graph with `uav` removed and weights renormalized.
    pub fn without(&self, uav: usize) -> Result<Self> {
        if !self.contains(uav) {
            return Err(Error::UnknownAgent(uav));
        }
        let agents: Vec<usize> = self.agents.iter().copied().filter(|&i| i != uav).collect();
        let sensors: Vec<usize> = self.target_sensors.iter().copied().filter(|&i| i != uav).collect();
        Self::over(&agents, &sensors)
    }
}
