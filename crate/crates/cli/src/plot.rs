//! Self-contained SVG line charts from numeric CSV files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// A numeric CSV: header names and rows of equal width.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Reads a CSV whose cells are all numeric. Errors carry the line number.
pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| anyhow!("{}: line 1: {e}", path.display()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.len() < 2 || headers.iter().all(String::is_empty) {
        bail!("{}: line 1: need a header with an x column and at least one y column", path.display());
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            anyhow!("{}: line {line}: {e}", path.display())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .zip(&headers)
            .map(|(cell, name)| {
                cell.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| anyhow!("{}: line {line}: column '{name}': '{cell}' is not a finite number", path.display()))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: line 2: no data rows", path.display());
    }
    Ok(Table { headers, rows })
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One polyline per y column against the first column. Axis bounds are the
/// data extremes and appear as labelled text elements.
pub fn render_svg(title: &str, table: &Table) -> String {
    let (x0, x1) = bounds(table.rows.iter().map(|r| r[0]));
    let (y0, y1) = bounds(table.rows.iter().flat_map(|r| r[1..].iter().copied()));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#).unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, WIDTH / 2.0, escape(title)).unwrap();
    writeln!(s, r#"<rect class="plot-area" x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
    let label = |s: &mut String, axis: &str, value: f64, x: f64, y: f64, anchor: &str| {
        writeln!(s, r#"<text class="axis-bound" data-axis="{axis}" data-value="{value}" x="{x}" y="{y}" text-anchor="{anchor}" font-size="11">{value:.4e}</text>"#).unwrap();
    };
    label(&mut s, "x-min", x0, LEFT, HEIGHT - BOTTOM + 16.0, "start");
    label(&mut s, "x-max", x1, WIDTH - RIGHT, HEIGHT - BOTTOM + 16.0, "end");
    label(&mut s, "y-min", y0, LEFT - 4.0, HEIGHT - BOTTOM, "end");
    label(&mut s, "y-max", y1, LEFT - 4.0, TOP + 10.0, "end");
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 12.0, escape(&table.headers[0])).unwrap();

    for (j, name) in table.headers.iter().enumerate().skip(1) {
        let color = COLORS[(j - 1) % COLORS.len()];
        let pts: Vec<String> = table.rows.iter().map(|r| format!("{:.3},{:.3}", sx(r[0]), sy(r[j]))).collect();
        writeln!(s, r#"<polyline class="series" data-name="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, escape(name), pts.join(" ")).unwrap();
        let ly = TOP + 14.0 * j as f64;
        writeln!(s, r#"<text x="{}" y="{ly}" text-anchor="end" font-size="11" fill="{color}">{}</text>"#, WIDTH - RIGHT - 6.0, escape(name)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Renders `input` to `<out_dir>/<stem>.svg`. Nothing is written on error.
pub fn plot_csv(input: &Path, out_dir: &Path) -> Result<PathBuf> {
    let table = read_table(input)?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot");
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let path = out_dir.join(format!("{stem}.svg"));
    std::fs::write(&path, render_svg(stem, &table)).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
