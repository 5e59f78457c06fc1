//! Static SVG plots from the CSV outputs. Rendering is plain string
//! formatting with fixed precision, so identical inputs give identical bytes.

use std::fmt::Write as _;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    /// `step,reward,return` rows; log-scale returns with the initial-return line.
    Trajectory,
    /// `p,safe_preference[,ci]` rows; preference curve with marker lines.
    Preference,
    /// Any two numeric columns.
    Line,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub x: Option<String>,
    pub y: Option<String>,
    pub log_x: bool,
    pub log_y: bool,
    pub vlines: Vec<f64>,
    pub hlines: Vec<f64>,
    pub title: String,
}

impl PlotSpec {
    pub fn new(kind: PlotKind, title: impl Into<String>) -> Self {
        Self {
            kind,
            x: None,
            y: None,
            log_x: false,
            log_y: kind == PlotKind::Trajectory,
            vlines: Vec::new(),
            hlines: Vec::new(),
            title: title.into(),
        }
    }

    pub fn columns(mut self, x: &str, y: &str) -> Self {
        self.x = Some(x.into());
        self.y = Some(y.into());
        self
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 2000;
const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

struct Table {
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn parse(name: &str, text: &str) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| CliError::Schema(format!("{name}: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = rdr
            .records()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Schema(format!("{name}: {e}")))?;
        Ok(Self { headers, rows })
    }

    fn column(&self, name: &str, col: &str) -> CliResult<usize> {
        self.headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| CliError::Schema(format!("{name}: missing column `{col}`")))
    }

    fn values(&self, name: &str, col: &str) -> CliResult<Vec<f64>> {
        let i = self.column(name, col)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| CliError::Schema(format!("{name}: row {}: column `{col}` is not numeric", r + 2)))
            })
            .collect()
    }
}

struct Series {
    points: Vec<(f64, f64)>,
    band: Option<Vec<f64>>,
}

/// Renders the CSV inputs (`(label, contents)` pairs) to an SVG document.
pub fn render(inputs: &[(String, String)], spec: &PlotSpec) -> CliResult<String> {
    if inputs.is_empty() {
        return Err(CliError::Schema("no input CSV".into()));
    }
    let mut series = Vec::new();
    let mut hlines = spec.hlines.clone();
    for (name, text) in inputs {
        let table = Table::parse(name, text)?;
        match spec.kind {
            PlotKind::Trajectory => {
                let step = table.values(name, "step")?;
                let reward = table.values(name, "reward")?;
                let ret = table.values(name, "return")?;
                if let (Some(r), Some(g)) = (ret.first(), reward.first()) {
                    let r0 = r - g;
                    if !hlines.iter().any(|h| (h - r0).abs() < 1e-12) {
                        hlines.push(r0);
                    }
                }
                let mut current = Vec::new();
                for i in 0..step.len() {
                    if i > 0 && step[i] <= step[i - 1] {
                        series.push(Series {
                            points: std::mem::take(&mut current),
                            band: None,
                        });
                    }
                    current.push((step[i] + 1.0, ret[i]));
                }
                if !current.is_empty() {
                    series.push(Series {
                        points: current,
                        band: None,
                    });
                }
            }
            PlotKind::Preference => {
                let p = table.values(name, "p")?;
                let pref = table.values(name, "safe_preference")?;
                let band = match table.column(name, "ci") {
                    Ok(_) => Some(table.values(name, "ci")?),
                    Err(_) => None,
                };
                series.push(Series {
                    points: p.into_iter().zip(pref).collect(),
                    band,
                });
            }
            PlotKind::Line => {
                let (x, y) = match (&spec.x, &spec.y) {
                    (Some(x), Some(y)) => (x, y),
                    _ => return Err(CliError::Config("line plots need --x and --y".into())),
                };
                let xs = table.values(name, x)?;
                let ys = table.values(name, y)?;
                series.push(Series {
                    points: xs.into_iter().zip(ys).collect(),
                    band: None,
                });
            }
        }
    }
    if spec.kind == PlotKind::Preference && hlines.is_empty() {
        hlines.push(0.5);
    }
    if series.iter().all(|s| s.points.is_empty()) {
        let first = &inputs[0].0;
        return Err(CliError::Schema(format!("{first}: no data rows")));
    }
    Ok(draw(&series, spec, &hlines))
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            if let Some(t) = transform(v, log) {
                lo = lo.min(t);
                hi = hi.max(t);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.04 * (hi - lo);
        Self {
            lo: lo - pad,
            hi: hi + pad,
            log,
        }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        transform(v, self.log).map(|t| (t - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i64, self.hi.floor() as i64);
            let stride = ((b - a) / 6 + 1).max(1);
            return (a..=b)
                .step_by(stride as usize)
                .map(|k| ((k as f64 - self.lo) / (self.hi - self.lo), format!("1e{k}")))
                .collect();
        }
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let mut out = Vec::new();
        let mut v = (self.lo / step).ceil() * step;
        while v <= self.hi + 1e-9 * step {
            let label = format!("{:.*}", decimals(step), if v.abs() < 1e-12 * step { 0.0 } else { v });
            out.push(((v - self.lo) / (self.hi - self.lo), label));
            v += step;
        }
        out
    }
}

fn decimals(step: f64) -> usize {
    if step >= 1.0 {
        0
    } else {
        (-step.log10().floor()) as usize
    }
}

fn transform(v: f64, log: bool) -> Option<f64> {
    if !v.is_finite() {
        return None;
    }
    if log {
        (v > 0.0).then(|| v.log10())
    } else {
        Some(v)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn draw(series: &[Series], spec: &PlotSpec, hlines: &[f64]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let xa = Axis::fit(all().map(|p| p.0).chain(spec.vlines.iter().copied()), spec.log_x);
    let band_ys = series.iter().flat_map(|s| {
        s.band
            .iter()
            .flat_map(move |b| s.points.iter().zip(b).flat_map(|(p, h)| [p.1 - h, p.1 + h]))
    });
    let ya = Axis::fit(all().map(|p| p.1).chain(hlines.iter().copied()).chain(band_ys), spec.log_y);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |f: f64| LEFT + f * pw;
    let py = |f: f64| TOP + (1.0 - f) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"11\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
        WIDTH / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(
        s,
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{pw:.2}\" height=\"{ph:.2}\" fill=\"none\" stroke=\"black\"/>"
    );
    for (f, label) in xa.ticks() {
        let x = px(f);
        let _ = writeln!(
            s,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/><text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{label}</text>",
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0
        );
    }
    for (f, label) in ya.ticks() {
        let y = py(f);
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{LEFT}\" y2=\"{y:.2}\" stroke=\"black\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{label}</text>",
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let (xl, yl) = match spec.kind {
        PlotKind::Trajectory => ("step".to_string(), "return".to_string()),
        PlotKind::Preference => ("p".to_string(), "safe preference".to_string()),
        PlotKind::Line => (spec.x.clone().unwrap_or_default(), spec.y.clone().unwrap_or_default()),
    };
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(&xl)
    );
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {:.2})\">{}</text>",
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&yl)
    );

    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if let Some(band) = &ser.band {
            let upper: Vec<(f64, f64)> = ser.points.iter().zip(band).map(|(p, h)| (p.0, p.1 + h)).collect();
            let lower: Vec<(f64, f64)> = ser.points.iter().zip(band).rev().map(|(p, h)| (p.0, p.1 - h)).collect();
            let pts = path_points(upper.iter().chain(&lower), &xa, &ya, &px, &py);
            if !pts.is_empty() {
                let _ = writeln!(s, "<polygon points=\"{pts}\" fill=\"{color}\" fill-opacity=\"0.2\" stroke=\"none\"/>");
            }
        }
        let stride = ser.points.len().div_ceil(MAX_POINTS).max(1);
        let kept: Vec<&(f64, f64)> = ser
            .points
            .iter()
            .enumerate()
            .filter(|(k, _)| k % stride == 0 || *k + 1 == ser.points.len())
            .map(|(_, p)| p)
            .collect();
        let pts = path_points(kept.into_iter(), &xa, &ya, &px, &py);
        if !pts.is_empty() {
            let _ = writeln!(
                s,
                "<polyline points=\"{pts}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\"/>"
            );
        }
    }
    for &h in hlines {
        if let Some(f) = ya.frac(h) {
            let y = py(f);
            let _ = writeln!(
                s,
                "<line x1=\"{LEFT}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"black\" stroke-dasharray=\"4 3\"/>",
                LEFT + pw
            );
        }
    }
    for &v in &spec.vlines {
        if let Some(f) = xa.frac(v) {
            let x = px(f);
            let _ = writeln!(
                s,
                "<line x1=\"{x:.2}\" y1=\"{TOP}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"gray\" stroke-dasharray=\"2 2\"/><text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\" fill=\"gray\">{v:.4}</text>",
                TOP + ph,
                TOP - 4.0
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn path_points<'a>(
    pts: impl Iterator<Item = &'a (f64, f64)>,
    xa: &Axis,
    ya: &Axis,
    px: &dyn Fn(f64) -> f64,
    py: &dyn Fn(f64) -> f64,
) -> String {
    let mut out = String::new();
    for &(x, y) in pts {
        if let (Some(fx), Some(fy)) = (xa.frac(x), ya.frac(y)) {
            if !out.is_empty() {
                out.push(' ');
            }
            let _ = write!(out, "{:.2},{:.2}", px(fx), py(fy));
        }
    }
    out
}
