//! Self-contained SVG learning curves: one chart per state, one series per
//! agent, the mean across trials with a ±1 std band.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use indexmap::IndexMap;

use crate::experiment::{RunRecord, Stat};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

/// `series[agent] = [(episode, stat)]` for one state.
type Series = IndexMap<String, Vec<(usize, Stat)>>;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn slug(s: &str) -> String {
    let raw: String = s.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' }).collect();
    raw.split('_').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("_")
}

fn collect(records: &[RunRecord]) -> IndexMap<String, Series> {
    let mut raw: IndexMap<&str, IndexMap<&str, IndexMap<usize, Vec<f64>>>> = IndexMap::new();
    for r in records {
        raw.entry(&r.state).or_default().entry(&r.agent).or_default().entry(r.episode).or_default().push(r.v_defender);
    }
    raw.into_iter()
        .map(|(state, agents)| {
            let series = agents
                .into_iter()
                .map(|(agent, eps)| {
                    let mut pts: Vec<(usize, Stat)> = eps.into_iter().map(|(e, v)| (e, Stat::of(&v))).collect();
                    pts.sort_by_key(|p| p.0);
                    (agent.to_string(), pts)
                })
                .collect();
            (state.to_string(), series)
        })
        .collect()
}

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= n as f64).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn render(state: &str, series: &Series) -> String {
    let points = series.values().flatten();
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut x_hi = 1usize;
    for (e, st) in points {
        y_lo = y_lo.min(st.mean - st.std);
        y_hi = y_hi.max(st.mean + st.std);
        x_hi = x_hi.max(*e);
    }
    if y_hi - y_lo < 1e-9 {
        y_lo -= 1.0;
        y_hi += 1.0;
    }
    let pad = 0.05 * (y_hi - y_lo);
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |e: f64| LEFT + pw * e / x_hi as f64;
    let sy = |v: f64| TOP + ph * (y_hi - v) / (y_hi - y_lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(state));
    for t in nice_ticks(y_lo, y_hi, 6) {
        let y = sy(t);
        let _ = writeln!(svg, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##, LEFT + pw);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{t}</text>"#, LEFT - 6.0, y + 4.0);
    }
    for t in nice_ticks(0.0, x_hi as f64, 8) {
        let x = sx(t);
        let _ = writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#, TOP + ph + 18.0);
    }
    let _ = writeln!(svg, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">episode</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0);
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">defender value</text>"#,
        TOP + ph / 2.0
    );
    for (k, (agent, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let upper: Vec<String> = pts.iter().map(|(e, s)| format!("{:.2},{:.2}", sx(*e as f64), sy(s.mean + s.std))).collect();
        let lower: Vec<String> =
            pts.iter().rev().map(|(e, s)| format!("{:.2},{:.2}", sx(*e as f64), sy(s.mean - s.std))).collect();
        let _ = writeln!(
            svg,
            r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
            upper.join(" "),
            lower.join(" ")
        );
        let line: Vec<String> = pts.iter().map(|(e, s)| format!("{:.2},{:.2}", sx(*e as f64), sy(s.mean))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" "));
        let ly = TOP + 10.0 + 20.0 * k as f64;
        let lx = LEFT + pw + 14.0;
        let _ = writeln!(svg, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#, lx + 22.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, lx + 28.0, ly + 4.0, escape(agent));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes one SVG per state into `dir` and returns their paths.
pub fn emit_plots(records: &[RunRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    emit_plots_ordered(records, &[], dir)
}

/// Like [`emit_plots`], numbering the files by position in `order`.
pub fn emit_plots_ordered(records: &[RunRecord], order: &[String], dir: &Path) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        bail!("no records to plot");
    }
    let mut states = collect(records);
    states.sort_by_cached_key(|name, _| order.iter().position(|o| o == name).unwrap_or(order.len()));
    let mut paths = Vec::new();
    for (k, (state, series)) in states.iter().enumerate() {
        let path = dir.join(format!("state_{k}_{}.svg", slug(state)));
        std::fs::write(&path, render(state, series)).with_context(|| format!("writing {}", path.display()))?;
        paths.push(path);
    }
    Ok(paths)
}
