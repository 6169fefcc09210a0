//! Minimal SVG line plots.

use std::fmt::Write;

use clap::ValueEnum;
use enclose_core::log_io::{Entity, MetricsTable, TrajectoryTable};

use crate::commands::CliError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 120.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;
/// Values below this are drawn at the floor on log axes.
const LOG_FLOOR: f64 = 1e-16;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    #[value(name = "trajectory")]
    Trajectory,
    #[value(name = "phases")]
    Phases,
    #[value(name = "loc_error")]
    LocError,
    #[value(name = "tracking_error")]
    TrackingError,
}

impl Which {
    pub const ALL: [Which; 4] = [Which::Trajectory, Which::Phases, Which::LocError, Which::TrackingError];

    pub fn name(self) -> &'static str {
        match self {
            Which::Trajectory => "trajectory",
            Which::Phases => "phases",
            Which::LocError => "loc_error",
            Which::TrackingError => "tracking_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
    pub start_marker: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub equal_aspect: bool,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64, integer: bool) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let mut step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    if integer {
        step = step.max(1.0).round();
    }
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{}", v.round() as i64)
    } else if v == 0.0 || (v.abs() >= 1e-3 && v.abs() < 1e5) {
        format!("{}", (v * 1e6).round() / 1e6)
    } else {
        format!("{v:.1e}")
    }
}

impl Figure {
    fn transformed(&self) -> Vec<Vec<(f64, f64)>> {
        self.series
            .iter()
            .map(|s| {
                s.points
                    .iter()
                    .map(|&(x, y)| {
                        if self.log_y {
                            (x, y.max(LOG_FLOOR).log10())
                        } else {
                            (x, y)
                        }
                    })
                    .filter(|(x, y)| x.is_finite() && y.is_finite())
                    .collect()
            })
            .collect()
    }

    pub fn to_svg(&self) -> Result<String, CliError> {
        let data = self.transformed();
        let all: Vec<(f64, f64)> = data.iter().flatten().copied().collect();
        if all.is_empty() {
            return Err(CliError::Core(enclose_core::Error::LogFormat("no records".into())));
        }
        let bound = |f: fn(&(f64, f64)) -> f64| {
            let lo = all.iter().map(f).fold(f64::INFINITY, f64::min);
            let hi = all.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            if hi - lo > 0.0 {
                (lo, hi)
            } else {
                let pad = lo.abs().max(1.0) * 0.1;
                (lo - pad, hi + pad)
            }
        };
        let (mut x0, mut x1) = bound(|p| p.0);
        let (mut y0, mut y1) = bound(|p| p.1);
        let pad = 0.04 * (y1 - y0);
        (y0, y1) = (y0 - pad, y1 + pad);
        let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        if self.equal_aspect {
            let scale = ((x1 - x0) / pw).max((y1 - y0) / ph);
            let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
            (x0, x1) = (cx - scale * pw / 2.0, cx + scale * pw / 2.0);
            (y0, y1) = (cy - scale * ph / 2.0, cy + scale * ph / 2.0);
        }
        let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| MARGIN_TOP + ph - (y - y0) / (y1 - y0) * ph;

        let mut svg = String::new();
        let w = &mut svg;
        // writing to a String cannot fail
        let _ = writeln!(
            w,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            w,
            r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        );
        let _ = writeln!(
            w,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            MARGIN_LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            w,
            r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for x in ticks(x0, x1, false) {
            let px = sx(x);
            let _ = writeln!(
                w,
                r#"<line x1="{px:.2}" y1="{b:.2}" x2="{px:.2}" y2="{b2:.2}" stroke="black"/><text x="{px:.2}" y="{ty:.2}" text-anchor="middle">{}</text>"#,
                tick_label(x, false),
                b = MARGIN_TOP + ph,
                b2 = MARGIN_TOP + ph + 5.0,
                ty = MARGIN_TOP + ph + 18.0,
            );
        }
        for y in ticks(y0, y1, self.log_y) {
            let py = sy(y);
            let _ = writeln!(
                w,
                r#"<line x1="{l2:.2}" y1="{py:.2}" x2="{MARGIN_LEFT}" y2="{py:.2}" stroke="black"/><text x="{tx:.2}" y="{ty:.2}" text-anchor="end">{}</text>"#,
                tick_label(y, self.log_y),
                l2 = MARGIN_LEFT - 5.0,
                tx = MARGIN_LEFT - 8.0,
                ty = py + 4.0,
            );
        }
        let _ = writeln!(
            w,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            w,
            r#"<text x="16" y="{cy}" text-anchor="middle" transform="rotate(-90 16 {cy})">{}</text>"#,
            escape(&self.y_label),
            cy = MARGIN_TOP + ph / 2.0
        );

        for (idx, (series, pts)) in self.series.iter().zip(&data).enumerate() {
            let color = PALETTE[idx % PALETTE.len()];
            let dash = if series.dashed {
                r#" stroke-dasharray="6 4""#
            } else {
                ""
            };
            let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(
                w,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"><title>{}</title></polyline>"#,
                coords.join(" "),
                escape(&series.label)
            );
            if let (true, Some(&(x, y))) = (series.start_marker, pts.first()) {
                let _ = writeln!(
                    w,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#,
                    sx(x),
                    sy(y)
                );
            }
            let ly = MARGIN_TOP + 14.0 + 18.0 * idx as f64;
            let lx = WIDTH - MARGIN_RIGHT + 12.0;
            let _ = writeln!(
                w,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
                lx + 24.0,
                lx + 30.0,
                ly + 4.0,
                escape(&series.label)
            );
        }
        svg.push_str("</svg>\n");
        Ok(svg)
    }
}

fn need_metrics(m: Option<&MetricsTable>, which: Which) -> Result<&MetricsTable, CliError> {
    m.ok_or_else(|| {
        CliError::Usage(format!(
            "the {} plot needs metrics.csv next to the trajectory",
            which.name()
        ))
    })
}

fn column_series(m: &MetricsTable, name: &str, label: &str) -> Result<Series, CliError> {
    let ks = m.column("k").expect("metrics tables always have k");
    let vals = m
        .column(name)
        .ok_or_else(|| CliError::Core(enclose_core::Error::LogFormat(format!("metrics have no column {name}"))))?;
    Ok(Series {
        label: label.to_string(),
        points: ks.iter().zip(vals).filter_map(|(k, v)| Some(((*k)?, v?))).collect(),
        dashed: false,
        start_marker: false,
    })
}

pub fn figure(which: Which, traj: &TrajectoryTable, metrics: Option<&MetricsTable>) -> Result<Figure, CliError> {
    Ok(match which {
        Which::Trajectory => Figure {
            title: "Trajectories".into(),
            x_label: "x (m)".into(),
            y_label: "y (m)".into(),
            log_y: false,
            equal_aspect: true,
            series: traj
                .tracks()
                .into_iter()
                .map(|(entity, track)| Series {
                    label: entity.to_string(),
                    points: track.iter().map(|(_, p)| (p.x, p.y)).collect(),
                    dashed: entity == Entity::Target,
                    start_marker: true,
                })
                .collect(),
        },
        Which::Phases => {
            let m = need_metrics(metrics, which)?;
            let t = m.header.get_f64("T")?;
            let omega = m.header.get_f64("omega")?;
            let (Some(t), Some(omega)) = (t, omega) else {
                return Err(CliError::Core(enclose_core::Error::LogFormat(
                    "metrics header lacks T or omega".into(),
                )));
            };
            let mut series = Vec::new();
            for name in m.columns_with_prefix("theta_") {
                let mut s = column_series(m, name, &name.replace("theta_", "uav"))?;
                for p in &mut s.points {
                    p.1 -= p.0 * t * omega;
                }
                series.push(s);
            }
            Figure {
                title: "Relative phases".into(),
                x_label: "step k".into(),
                y_label: "theta_i - k T omega (rad)".into(),
                log_y: false,
                equal_aspect: false,
                series,
            }
        }
        Which::LocError => Figure {
            title: "Relative localization error".into(),
            x_label: "step k".into(),
            y_label: "max edge error (m)".into(),
            log_y: true,
            equal_aspect: false,
            series: vec![column_series(
                need_metrics(metrics, which)?,
                "max_rel_loc_error",
                "max error",
            )?],
        },
        Which::TrackingError => Figure {
            title: "Formation tracking error".into(),
            x_label: "step k".into(),
            y_label: "|centroid - target| (m)".into(),
            log_y: true,
            equal_aspect: false,
            series: vec![column_series(
                need_metrics(metrics, which)?,
                "tracking_error",
                "tracking error",
            )?],
        },
    })
}

pub fn render(which: Which, traj: &TrajectoryTable, metrics: Option<&MetricsTable>) -> Result<String, CliError> {
    figure(which, traj, metrics)?.to_svg()
}
