//! CSV trajectory and metric logs.
//!
//! Both files start with one comment line carrying the schema version and
//! the run parameters needed to analyse the log without its scenario:
//!
//! ```text
//! # schema=target-enclose-log/1; T=0.125; omega=1.5707963267948966; ...
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use crate::engine::{TrajectoryLog, LOG_SCHEMA};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::metrics::MetricSeries;
use crate::topology::{Edge, TARGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Entity {
    Target,
    Uav(usize),
}

impl Entity {
    pub fn id(self) -> usize {
        match self {
            Entity::Target => TARGET,
            Entity::Uav(i) => i,
        }
    }
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entity::Target => f.write_str("target"),
            Entity::Uav(i) => write!(f, "uav{i}"),
        }
    }
}

impl FromStr for Entity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "target" {
            return Ok(Entity::Target);
        }
        s.strip_prefix("uav")
            .and_then(|i| i.parse().ok())
            .filter(|&i| i > 0)
            .map(Entity::Uav)
            .ok_or_else(|| Error::LogFormat(format!("unknown entity '{s}'")))
    }
}

/// Parsed header comment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogHeader {
    pub fields: BTreeMap<String, String>,
}

impl LogHeader {
    pub fn for_log(log: &TrajectoryLog) -> Self {
        let cfg = &log.config;
        let sensors: Vec<String> = cfg.target_sensors.iter().map(|s| s.to_string()).collect();
        let fields = [
            ("schema", LOG_SCHEMA.to_string()),
            ("T", cfg.t.to_string()),
            ("omega", cfg.omega.to_string()),
            ("omega_cap", cfg.omega_cap().to_string()),
            ("rho", cfg.rho_schedule.max_radius().to_string()),
            ("u_bar", cfg.u_bar.to_string()),
            ("n", cfg.n.to_string()),
            ("sensors", sensors.join(" ")),
            ("seed", cfg.seed.to_string()),
        ];
        Self {
            fields: fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    pub fn parse(line: &str) -> Result<Self> {
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| Error::LogFormat("missing header comment".into()))?;
        let mut fields = BTreeMap::new();
        for part in body.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::LogFormat(format!("malformed header field '{part}'")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let header = Self { fields };
        match header.get("schema") {
            Some(LOG_SCHEMA) => Ok(header),
            Some(other) => Err(Error::LogFormat(format!(
                "schema mismatch: expected {LOG_SCHEMA}, found {other}"
            ))),
            None => Err(Error::LogFormat("header has no schema version".into())),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.get(key).map(String::as_str)
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::LogFormat(format!("header field {key}='{v}' is not a number")))
            })
            .transpose()
    }

    pub fn sensors(&self) -> Result<Vec<usize>> {
        self.get("sensors")
            .unwrap_or("")
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| Error::LogFormat(format!("bad sensor id '{s}'"))))
            .collect()
    }
}

impl fmt::Display for LogHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // schema first so a truncated glance still identifies the file
        write!(f, "# schema={}", self.get("schema").unwrap_or(""))?;
        for (k, v) in self.fields.iter().filter(|(k, _)| k.as_str() != "schema") {
            write!(f, "; {k}={v}")?;
        }
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trajectory_csv<W: Write>(log: &TrajectoryLog, mut out: W) -> Result<()> {
    writeln!(out, "{}", LogHeader::for_log(log))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "entity", "x", "y"])?;
    for rec in &log.records {
        let k = rec.k.to_string();
        w.write_record([
            k.as_str(),
            "target",
            &rec.target.x.to_string(),
            &rec.target.y.to_string(),
        ])?;
        for a in &rec.agents {
            w.write_record([
                k.clone(),
                Entity::Uav(a.id).to_string(),
                a.position.x.to_string(),
                a.position.y.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics_csv<W: Write>(log: &TrajectoryLog, series: &MetricSeries, mut out: W) -> Result<()> {
    writeln!(out, "{}", LogHeader::for_log(log))?;
    let agents = log.initial_agents();
    let edges = log.initial_edges();
    let mut w = csv::Writer::from_writer(out);
    let mut head: Vec<String> = ["k", "tracking_error", "max_rel_loc_error", "phase_spread"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    head.extend(agents.iter().map(|i| format!("theta_{i}")));
    head.extend(edges.iter().map(|e| format!("err_{e}")));
    w.write_record(&head)?;
    for row in &series.rows {
        let mut fields = vec![
            row.k.to_string(),
            row.tracking_error.to_string(),
            row.max_rel_loc_error.to_string(),
            opt(row.phase_spread),
        ];
        fields.extend(agents.iter().map(|i| opt(row.thetas.get(i).copied())));
        fields.extend(edges.iter().map(|e| opt(row.edge_errors.get(e).copied())));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

fn split_header<R: Read>(input: R) -> Result<(LogHeader, BufReader<R>)> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    if reader.read_line(&mut first)? == 0 {
        return Err(Error::LogFormat("no records".into()));
    }
    Ok((LogHeader::parse(first.trim_end())?, reader))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub k: usize,
    pub entity: Entity,
    pub position: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub header: LogHeader,
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryTable {
    /// Position series per entity, ordered by step.
    pub fn tracks(&self) -> BTreeMap<Entity, Vec<(usize, Vec2)>> {
        let mut out: BTreeMap<Entity, Vec<(usize, Vec2)>> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.entity).or_default().push((r.k, r.position));
        }
        for track in out.values_mut() {
            track.sort_by_key(|(k, _)| *k);
        }
        out
    }

    pub fn last_step(&self) -> Option<usize> {
        self.rows.iter().map(|r| r.k).max()
    }

    /// Per-edge relative displacement `v_ij(k)` rebuilt from consecutive
    /// positions; `None` where either endpoint is missing at `k` or `k+1`.
    pub fn edge_displacements(&self) -> Result<Vec<(Edge, Vec<Option<Vec2>>)>> {
        let last = self.last_step().ok_or_else(|| Error::LogFormat("no records".into()))?;
        let tracks = self.tracks();
        let disp: BTreeMap<usize, Vec<Option<Vec2>>> = tracks
            .iter()
            .map(|(e, track)| {
                let pos: BTreeMap<usize, Vec2> = track.iter().copied().collect();
                let series = (0..last).map(|k| Some(*pos.get(&(k + 1))? - *pos.get(&k)?)).collect();
                (e.id(), series)
            })
            .collect();
        if !disp.contains_key(&TARGET) {
            return Err(Error::LogFormat("trajectory has no target rows".into()));
        }
        let uavs: Vec<usize> = disp.keys().copied().filter(|&i| i != TARGET).collect();
        let sensors: BTreeSet<usize> = self.header.sensors()?.into_iter().collect();
        let mut edges: Vec<Edge> = Vec::new();
        for (a, &i) in uavs.iter().enumerate() {
            edges.extend(uavs[a + 1..].iter().map(|&j| Edge::new(i, j)));
        }
        edges.extend(
            uavs.iter()
                .filter(|i| sensors.contains(i))
                .map(|&i| Edge::new(i, TARGET)),
        );
        edges.sort();
        Ok(edges
            .into_iter()
            .map(|e| {
                let series = disp[&e.0]
                    .iter()
                    .zip(&disp[&e.1])
                    .map(|(a, b)| Some((*a)? - (*b)?))
                    .collect();
                (e, series)
            })
            .collect())
    }
}

pub fn read_trajectory_csv<R: Read>(input: R) -> Result<TrajectoryTable> {
    let (header, reader) = split_header(input)?;
    let mut csv = csv::Reader::from_reader(reader);
    if csv.headers()?.iter().collect::<Vec<_>>() != ["k", "entity", "x", "y"] {
        return Err(Error::LogFormat("trajectory columns must be k,entity,x,y".into()));
    }
    let mut rows = Vec::new();
    for rec in csv.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::LogFormat(format!("bad number '{}' in trajectory", &rec[i])))
        };
        rows.push(TrajectoryRow {
            k: rec[0]
                .parse()
                .map_err(|_| Error::LogFormat(format!("bad step '{}'", &rec[0])))?,
            entity: rec[1].parse()?,
            position: Vec2::new(num(2)?, num(3)?),
        });
    }
    if rows.is_empty() {
        return Err(Error::LogFormat("no records".into()));
    }
    Ok(TrajectoryTable { header, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub header: LogHeader,
    pub columns: Vec<String>,
    /// Empty cells read as `None`.
    pub rows: Vec<Vec<Option<f64>>>,
}

impl MetricsTable {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn columns_with_prefix(&self, prefix: &str) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| c.starts_with(prefix))
            .map(String::as_str)
            .collect()
    }
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<MetricsTable> {
    let (header, reader) = split_header(input)?;
    let mut csv = csv::Reader::from_reader(reader);
    let columns: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
    if columns.len() < 4 || columns[..4] != ["k", "tracking_error", "max_rel_loc_error", "phase_spread"] {
        return Err(Error::LogFormat(
            "metrics columns must start with k,tracking_error,max_rel_loc_error,phase_spread".into(),
        ));
    }
    let mut rows = Vec::new();
    for rec in csv.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|cell| {
                if cell.is_empty() {
                    Ok(None)
                } else {
                    cell.parse()
                        .map(Some)
                        .map_err(|_| Error::LogFormat(format!("bad number '{cell}' in metrics")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::LogFormat("no records".into()));
    }
    Ok(MetricsTable { header, columns, rows })
}
