use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::compare::baseline_pct;
use super::report::write_file;
use crate::error::Result;
use crate::stats::OverlapStat;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 32.0;
const BOTTOM: f64 = 48.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn y_of(pct: f64) -> f64 {
    TOP + (HEIGHT - TOP - BOTTOM) * (1.0 - pct.clamp(0.0, 100.0) / 100.0)
}

/// Shade for the `rank`-th of `count` seeds, from dark to light blue.
fn shade(rank: usize, count: usize) -> String {
    let t = if count > 1 { rank as f64 / (count - 1) as f64 } else { 0.0 };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(8.0, 107.0), lerp(48.0, 174.0), lerp(107.0, 214.0))
}

/// Overlap percentages per layer, shaded by seed, over the hypergeometric
/// mean (gray line) and its ±2σ band (dashed).
pub fn render_scatter(stats: &[OverlapStat], title: &str) -> Result<String> {
    let mut by_layer: BTreeMap<usize, Vec<&OverlapStat>> = BTreeMap::new();
    for s in stats {
        by_layer.entry(s.layer).or_default().push(s);
    }
    let seeds: Vec<u64> = {
        let mut v: Vec<u64> = stats.iter().filter_map(|s| s.pair.as_ref().map(|p| p.a.seed)).collect();
        v.sort_unstable();
        v.dedup();
        v
    };

    let mut out = String::new();
    let w = &mut out;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(w, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, WIDTH / 2.0, escape(title)).unwrap();
    let (x0, x1, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM);
    writeln!(w, r#"<line x1="{x0}" y1="{TOP}" x2="{x0}" y2="{y1}" stroke="black"/>"#).unwrap();
    writeln!(w, r#"<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>"#).unwrap();
    for tick in (0..=100).step_by(20) {
        let y = y_of(tick as f64);
        writeln!(w, r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 4.0).unwrap();
        writeln!(w, r#"<text x="{}" y="{:.2}" text-anchor="end">{tick}</text>"#, x0 - 6.0, y + 4.0).unwrap();
    }
    writeln!(
        w,
        r#"<text x="14" y="{:.2}" transform="rotate(-90 14 {:.2})" text-anchor="middle">overlap (%)</text>"#,
        (TOP + y1) / 2.0,
        (TOP + y1) / 2.0
    )
    .unwrap();

    if by_layer.is_empty() {
        writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="gray">no data</text>"#, (x0 + x1) / 2.0, (TOP + y1) / 2.0).unwrap();
        out.push_str("</svg>\n");
        return Ok(out);
    }

    let band = (x1 - x0) / by_layer.len() as f64;
    let mut mean_line = Vec::new();
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for (i, (_, group)) in by_layer.iter().enumerate() {
        let cx = x0 + band * (i as f64 + 0.5);
        let b = baseline_pct(group[0])?;
        mean_line.push(format!("{cx:.2},{:.2}", y_of(b.mean)));
        upper.push(format!("{cx:.2},{:.2}", y_of(b.mean + 2.0 * b.sigma)));
        lower.push(format!("{cx:.2},{:.2}", y_of(b.mean - 2.0 * b.sigma)));
        writeln!(w, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y1 + 16.0, escape(&group[0].layer_name)).unwrap();
        let spread = band * 0.6;
        for (j, s) in group.iter().enumerate() {
            let offset = if group.len() > 1 { j as f64 / (group.len() - 1) as f64 - 0.5 } else { 0.0 };
            let rank = s
                .pair
                .as_ref()
                .and_then(|p| seeds.binary_search(&p.a.seed).ok())
                .unwrap_or(0);
            writeln!(
                w,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.8"/>"#,
                cx + offset * spread,
                y_of(s.pct),
                shade(rank, seeds.len())
            )
            .unwrap();
        }
    }
    writeln!(w, r#"<polyline points="{}" fill="none" stroke="gray" stroke-width="2"/>"#, mean_line.join(" ")).unwrap();
    for band_line in [upper, lower] {
        writeln!(
            w,
            r#"<polyline points="{}" fill="none" stroke="gray" stroke-dasharray="4 3"/>"#,
            band_line.join(" ")
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_svg(stats: &[OverlapStat], title: &str, path: &Path) -> Result<()> {
    write_file(path, &render_scatter(stats, title)?)
}
