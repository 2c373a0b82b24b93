//! Minimal static SVG line plots of CSV columns.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, SgpError};
use crate::experiment::{read_csv, CsvTable};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, Default)]
pub struct PlotOptions {
    /// Abscissa column; the first column when absent.
    pub x: Option<String>,
    /// Ordinate columns; every other numeric column when empty.
    pub y: Vec<String>,
    /// Split rows into one series per distinct value of this column.
    pub group: Option<String>,
    pub log_y: bool,
    pub title: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn numeric(table: &CsvTable, name: &str) -> Result<Vec<Option<f64>>> {
    table.reals(name)
}

/// Extracts the series to draw; rows with a missing field are skipped.
pub fn collect_series(table: &CsvTable, opts: &PlotOptions) -> Result<Vec<Series>> {
    let x_name = match &opts.x {
        Some(x) => x.clone(),
        None => table
            .header
            .first()
            .cloned()
            .ok_or_else(|| SgpError::Domain("CSV has no columns".into()))?,
    };
    let xs = numeric(table, &x_name)?;
    let y_names: Vec<String> = if opts.y.is_empty() {
        table
            .header
            .iter()
            .filter(|h| **h != x_name && Some(*h) != opts.group.as_ref())
            .filter(|h| numeric(table, h).is_ok())
            .cloned()
            .collect()
    } else {
        opts.y.clone()
    };
    if y_names.is_empty() {
        return Err(SgpError::Domain("no numeric columns to plot".into()));
    }
    let groups: Vec<String> = match &opts.group {
        Some(g) => {
            let col = table
                .column(g)
                .ok_or_else(|| SgpError::Domain(format!("no column {g:?}")))?;
            table.rows.iter().map(|r| r[col].clone()).collect()
        }
        None => vec![String::new(); table.rows.len()],
    };
    let mut series: Vec<Series> = Vec::new();
    for y_name in &y_names {
        let ys = numeric(table, y_name)?;
        for ((x, y), g) in xs.iter().zip(&ys).zip(&groups) {
            let label = if g.is_empty() {
                y_name.clone()
            } else if y_names.len() == 1 {
                g.clone()
            } else {
                format!("{g} {y_name}")
            };
            let (Some(x), Some(y)) = (x, y) else { continue };
            if opts.log_y && *y <= 0.0 {
                continue;
            }
            match series.iter_mut().find(|s| s.label == label) {
                Some(s) => s.points.push((*x, *y)),
                None => series.push(Series {
                    label,
                    points: vec![(*x, *y)],
                }),
            }
        }
    }
    Ok(series)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(series: &[Series], opts: &PlotOptions) -> String {
    let ty = |y: f64| if opts.log_y { y.log10() } else { y };
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| ty(p.1))));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (ty(y) - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    if let Some(title) = &opts.title {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
            WIDTH / 2.0,
            MARGIN / 2.0,
            escape(title)
        );
    }
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let ylabel = if opts.log_y { format!("1e{yv:.1}") } else { format!("{yv:.3e}") };
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xv:.3e}</text>"#,
            px(xv),
            HEIGHT - MARGIN + 16.0
        );
        let ypix = HEIGHT - MARGIN - f * (HEIGHT - 2.0 * MARGIN);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{ylabel}</text>"#,
            MARGIN - 4.0,
            ypix + 4.0
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
            MARGIN + 8.0,
            MARGIN + 14.0 * (i as f64 + 1.0),
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Reads `csv_path` and writes an SVG plot to `out`.
pub fn plot_csv(csv_path: &Path, out: &Path, opts: &PlotOptions) -> Result<()> {
    let table = read_csv(csv_path)?;
    let series = collect_series(&table, opts)?;
    std::fs::write(out, render_svg(&series, opts)).map_err(|source| SgpError::Io {
        path: out.to_path_buf(),
        source,
    })
}
