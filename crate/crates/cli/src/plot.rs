//! Static SVG line plots of trace columns.

use std::fmt::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Traces whose headers differ.
#[derive(Debug)]
pub struct SchemaMismatch {
    pub file: PathBuf,
    pub expected: Vec<String>,
    pub found: Vec<String>,
}

impl fmt::Display for SchemaMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "schema mismatch in {}: expected columns [{}], found [{}]",
            self.file.display(),
            self.expected.join(","),
            self.found.join(",")
        )
    }
}

impl std::error::Error for SchemaMismatch {}

pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}: row {}", path.display(), i + 2))?;
        rows.push(row);
    }
    let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    Ok(Table { name, header, rows })
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if (1e-2..1e4).contains(&v.abs()) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').into()
    } else {
        format!("{v:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= 0.0 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Plot `columns` of every table against `iter` (or row number when absent).
pub fn render(tables: &[Table], columns: &[String], log_y: bool) -> Result<String> {
    let first = tables.first().ok_or_else(|| anyhow!("no traces to plot"))?;
    let x_col = first.header.iter().position(|h| h == "iter");
    let mut cols = Vec::new();
    for c in columns {
        cols.push(
            first
                .header
                .iter()
                .position(|h| h == c)
                .ok_or_else(|| anyhow!("column `{c}` is not in the trace"))?,
        );
    }
    let mut series = Vec::new();
    for t in tables {
        for (&j, name) in cols.iter().zip(columns) {
            let label = if columns.len() > 1 { format!("{} {name}", t.name) } else { t.name.clone() };
            let points = t
                .rows
                .iter()
                .enumerate()
                .map(|(i, r)| (x_col.map_or(i as f64, |k| r[k]), r[j]))
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
                .map(|(x, y)| (x, if log_y { y.log10() } else { y }))
                .collect();
            series.push(Series { label, points });
        }
    }
    let (x0, x1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut svg = String::new();
    let w = &mut svg;
    writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#)?;
    writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(w, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#)?;
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let px = sx(fx);
        writeln!(w, r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0)?;
        writeln!(
            w,
            r#"<text x="{px:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
            TOP + ph + 20.0,
            tick_label(fx)
        )?;
    }
    let y_ticks: Vec<f64> = if log_y && y1 - y0 >= 1.0 {
        (y0.ceil() as i64..=y1.floor() as i64).map(|e| e as f64).collect()
    } else {
        (0..=4).map(|k| y0 + (y1 - y0) * k as f64 / 4.0).collect()
    };
    for fy in y_ticks {
        let py = sy(fy);
        let label = if log_y { tick_label(10f64.powf(fy)) } else { tick_label(fy) };
        writeln!(w, r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/>"#, LEFT - 5.0)?;
        writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{label}</text>"#,
            LEFT - 8.0,
            py + 4.0
        )?;
    }
    let x_label = if x_col.is_some() { "iter" } else { "row" };
    writeln!(
        w,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{x_label}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    )?;
    let y_label = escape(&columns.join(", ")) + if log_y { " (log scale)" } else { "" };
    writeln!(
        w,
        r#"<text x="20" y="{:.2}" font-size="14" text-anchor="middle" transform="rotate(-90 20 {:.2})">{y_label}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    )?;
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        writeln!(w, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "))?;
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        writeln!(w, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0)?;
        writeln!(w, r#"<text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.label))?;
    }
    writeln!(w, "</svg>")?;
    Ok(svg)
}

/// Read traces, check they share one header, and render.
pub fn plot_files(paths: &[PathBuf], columns: &[String], log_y: bool) -> Result<String> {
    let tables = paths.iter().map(|p| read_table(p)).collect::<Result<Vec<_>>>()?;
    if let Some(first) = tables.first() {
        for (t, p) in tables.iter().zip(paths).skip(1) {
            if t.header != first.header {
                return Err(SchemaMismatch {
                    file: p.clone(),
                    expected: first.header.clone(),
                    found: t.header.clone(),
                }
                .into());
            }
        }
    }
    render(&tables, columns, log_y)
}
