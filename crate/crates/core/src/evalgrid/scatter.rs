use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::grid::GridCell;
use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#637939",
];

/// One row of the scatter CSV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub c: usize,
    pub n: usize,
    pub cost_per_point: f64,
    pub seed: u64,
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

/// Writes `<prefix>.csv` and `<prefix>.svg` and returns both paths.
pub fn emit_scatter(cells: &[GridCell], selected: &[usize], prefix: &Path) -> Result<(PathBuf, PathBuf)> {
    if cells.is_empty() {
        return Err(Error::Config("no grid cells to plot".into()));
    }
    let csv_path = with_suffix(prefix, ".csv");
    let svg_path = with_suffix(prefix, ".svg");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::format(&csv_path, e))?;
    for cell in cells {
        w.serialize(ScatterRow {
            c: cell.c,
            n: cell.n,
            cost_per_point: cell.cost_per_point,
            seed: cell.seed,
        })
        .map_err(|e| Error::format(&csv_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    std::fs::write(&svg_path, scatter_svg(cells, selected)).map_err(|e| Error::io(&svg_path, e))?;
    Ok((csv_path, svg_path))
}

pub fn read_scatter_csv(path: &Path) -> Result<Vec<ScatterRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<ScatterRow>, _>>()
        .map_err(|e| Error::format(path, e))
}

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let digits = (3 - v.abs().log10().floor() as i32).clamp(0, 8) as usize;
    format!("{v:.digits$}")
}

fn glyph(out: &mut String, shape: usize, x: f64, y: f64, color: &str) {
    let _ = match shape % 3 {
        0 => writeln!(out, r#"<circle cx="{x:.1}" cy="{y:.1}" r="5" fill="{color}"/>"#),
        1 => writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="9" height="9" fill="{color}"/>"#,
            x - 4.5,
            y - 4.5
        ),
        _ => writeln!(
            out,
            r#"<polygon points="{:.1},{:.1} {:.1},{:.1} {:.1},{:.1}" fill="{color}"/>"#,
            x,
            y - 6.0,
            x - 5.5,
            y + 4.5,
            x + 5.5,
            y + 4.5
        ),
    };
}

/// Cost against transition count, one color and glyph per cluster count,
/// selected cells ringed.
pub fn scatter_svg(cells: &[GridCell], selected: &[usize]) -> String {
    let (mut n_lo, mut n_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for cell in cells {
        n_lo = n_lo.min(cell.n as f64);
        n_hi = n_hi.max(cell.n as f64);
        y_lo = y_lo.min(cell.cost_per_point);
        y_hi = y_hi.max(cell.cost_per_point);
    }
    let (n_lo, n_hi) = (n_lo - 0.5, n_hi + 0.5);
    let pad = if y_hi > y_lo { 0.05 * (y_hi - y_lo) } else { 0.5 };
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |n: f64| LEFT + (n - n_lo) / (n_hi - n_lo) * plot_w;
    let sy = |v: f64| TOP + (y_hi - v) / (y_hi - y_lo) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for t in ticks(y_lo, y_hi) {
        let y = sy(t);
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            y + 4.0,
            label(t)
        );
    }
    let span = (n_hi - n_lo).ceil() as usize;
    let step = span.div_ceil(15).max(1);
    let mut n = (n_lo + 0.5) as usize;
    while (n as f64) <= n_hi {
        let x = sx(n as f64);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{n}</text>"#,
            TOP + plot_h + 20.0
        );
        n += step;
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">transitions N</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">cost per point</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    let mut cs: Vec<usize> = cells.iter().map(|c| c.c).collect();
    cs.sort_unstable();
    cs.dedup();
    for (slot, &c) in cs.iter().enumerate() {
        let color = COLORS[slot % COLORS.len()];
        for cell in cells.iter().filter(|cell| cell.c == c) {
            glyph(&mut out, slot, sx(cell.n as f64), sy(cell.cost_per_point), color);
        }
        let ly = TOP + 10.0 + 20.0 * slot as f64;
        let lx = LEFT + plot_w + 20.0;
        glyph(&mut out, slot, lx, ly, color);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">C = {c}</text>"#, lx + 12.0, ly + 4.0);
    }
    for &i in selected {
        if let Some(cell) = cells.get(i) {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.1}" cy="{:.1}" r="9" fill="none" stroke="black" stroke-width="1.5"/>"#,
                sx(cell.n as f64),
                sy(cell.cost_per_point)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
