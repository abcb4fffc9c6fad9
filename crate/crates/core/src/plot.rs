//! Minimal SVG line charts for run artifacts.

use std::fmt::Write as _;

use crate::semcom::PayloadKind;
use crate::sim::{Comparison, MetricsLog, SweepPoint};

const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
    pub markers: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

/// Round step of roughly `span / target` in 1-2-5 form.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = (span / target).max(f64::MIN_POSITIVE);
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1e6 {
        format!("{:.1}M", v / 1e6)
    } else if v.abs() >= 1e4 {
        format!("{:.0}k", v / 1e3)
    } else if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LineChart {
    pub fn render(&self) -> String {
        let pts = || self.series.iter().flat_map(|s| s.points.iter().copied());
        let ty = |y: f64| if self.log_y { y.log10() } else { y };
        let usable = |&(_, y): &(f64, f64)| !self.log_y || y > 0.0;

        let x_max = pts().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let x_min = pts().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let (x_min, x_max) = if x_min.is_finite() && x_max > x_min { (x_min, x_max) } else { (0.0, 1.0) };
        let ys: Vec<f64> = pts().filter(usable).map(|p| ty(p.1)).collect();
        let (mut y_lo, mut y_hi) =
            ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
        if self.log_y {
            y_lo = y_lo.floor();
            y_hi = y_hi.ceil().max(y_lo + 1.0);
        } else {
            y_lo = y_lo.min(0.0);
            y_hi = if y_hi > y_lo { y_hi * 1.05 } else { y_lo + 1.0 };
        }
        if !y_lo.is_finite() {
            (y_lo, y_hi) = (0.0, 1.0);
        }

        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * pw;
        let sy = |y: f64| TOP + ph - (y - y_lo) / (y_hi - y_lo) * ph;

        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#).unwrap();
        writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
            W / 2.0,
            escape(&self.title)
        )
        .unwrap();

        // y grid
        let y_ticks: Vec<f64> = if self.log_y {
            (y_lo as i32..=y_hi as i32).map(f64::from).collect()
        } else {
            let step = nice_step(y_hi - y_lo, 6.0);
            (0..).map(|i| (y_lo / step).ceil() * step + i as f64 * step).take_while(|&v| v <= y_hi + 1e-9).collect()
        };
        for v in y_ticks {
            let y = sy(v);
            let label = if self.log_y { fmt_tick(10f64.powf(v)) } else { fmt_tick(v) };
            writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, W - RIGHT)
                .unwrap();
            writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#, LEFT - 6.0, y + 4.0).unwrap();
        }
        let step = nice_step(x_max - x_min, 8.0);
        let mut v = (x_min / step).ceil() * step;
        while v <= x_max + 1e-9 {
            let x = sx(v);
            writeln!(s, r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#eee"/>"##, TOP + ph).unwrap();
            writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, fmt_tick(v))
                .unwrap();
            v += step;
        }
        writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 18.0,
            escape(&self.x_label)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        )
        .unwrap();

        for (i, series) in self.series.iter().enumerate() {
            let coords: Vec<String> = series
                .points
                .iter()
                .filter(|p| usable(p))
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(ty(y))))
                .collect();
            if !coords.is_empty() {
                writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
                    series.color,
                    coords.join(" ")
                )
                .unwrap();
            }
            if series.markers {
                for c in &coords {
                    let (x, y) = c.split_once(',').unwrap();
                    writeln!(s, r#"<circle cx="{x}" cy="{y}" r="4" fill="{}"/>"#, series.color).unwrap();
                }
            }
            let ly = TOP + 16.0 + 18.0 * i as f64;
            writeln!(
                s,
                r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}" stroke-width="3"/>"#,
                LEFT + 12.0,
                LEFT + 36.0,
                series.color
            )
            .unwrap();
            writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, LEFT + 42.0, ly + 4.0, escape(&series.name)).unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}

const SEMCOM_COLOR: &str = "#1f77b4";
const RAW_COLOR: &str = "#d62728";

/// Cumulative delivered bits per step, one line per run.
pub fn cumulative_bits_svg(logs: &[&MetricsLog]) -> String {
    let series = logs
        .iter()
        .map(|log| {
            let (name, color) = match log.branch {
                PayloadKind::SemCom => ("SemCom (latent)", SEMCOM_COLOR),
                PayloadKind::Raw => ("Raw (image)", RAW_COLOR),
            };
            Series {
                name: name.to_string(),
                color: color.to_string(),
                points: std::iter::once((0.0, 0.0))
                    .chain(log.cumulative_by_step.iter().enumerate().map(|(i, &b)| ((i + 1) as f64, b as f64)))
                    .collect(),
                markers: false,
            }
        })
        .collect();
    let (robots, devices) = logs.first().map_or((0, 0), |l| (l.n_robots, l.n_devices));
    LineChart {
        title: format!("Cumulative transmitted data ({robots} robots, {devices} devices)"),
        x_label: "step".into(),
        y_label: "cumulative bits".into(),
        log_y: false,
        series,
    }
    .render()
}

/// Both branches of a paired comparison.
pub fn comparison_svg(c: &Comparison) -> String {
    cumulative_bits_svg(&[&c.semcom, &c.raw])
}

/// Final delivered bits against device count, log scale.
pub fn sweep_svg(points: &[SweepPoint]) -> String {
    let series = |name: &str, color: &str, f: fn(&SweepPoint) -> u64| Series {
        name: name.to_string(),
        color: color.to_string(),
        points: points.iter().map(|p| (p.n_devices as f64, f(p) as f64)).collect(),
        markers: true,
    };
    LineChart {
        title: "Transmitted data vs number of devices".into(),
        x_label: "devices".into(),
        y_label: "total bits (log scale)".into(),
        log_y: true,
        series: vec![
            series("SemCom (latent)", SEMCOM_COLOR, |p| p.semcom_bits),
            series("Raw (image)", RAW_COLOR, |p| p.raw_bits),
        ],
    }
    .render()
}
