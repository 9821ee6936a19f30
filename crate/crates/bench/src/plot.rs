//! Tiny dependency-free SVG line chart of RTF against utterance duration.

use std::path::Path;

use crate::error::Result;
use crate::report::ReportRow;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

fn polyline(points: &[(f64, f64)], color: &str) -> String {
    let coords: Vec<String> = points.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
        coords.join(" ")
    )
}

/// Render rtf-vs-duration curves, one polyline per mixing label present.
pub fn render_rtf_svg(rows: &[ReportRow]) -> String {
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    let max_dur = rows.iter().map(|r| r.duration_s).fold(1e-9, f64::max);
    let max_rtf = rows.iter().map(|r| r.rtf).fold(1e-9, f64::max) * 1.1;
    let x_of = |d: f64| MARGIN + (d / max_dur) * (WIDTH - 2.0 * MARGIN);
    let y_of = |r: f64| HEIGHT - MARGIN - (r / max_rtf) * (HEIGHT - 2.0 * MARGIN);

    // axes
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    ));
    svg.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">duration (s)</text>\n",
        WIDTH / 2.0,
        HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"14\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">rtf</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0
    ));

    let mut labels: Vec<&str> = rows.iter().map(|r| r.mixing.as_str()).collect();
    labels.sort_unstable();
    labels.dedup();
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    for (i, label) in labels.iter().enumerate() {
        let mut pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.mixing == *label)
            .map(|r| (x_of(r.duration_s), y_of(r.rtf)))
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite coords"));
        let color = colors[i % colors.len()];
        svg.push_str(&polyline(&pts, color));
        svg.push('\n');
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"13\" fill=\"{color}\">{label}</text>\n",
            WIDTH - MARGIN - 80.0,
            MARGIN + 18.0 * (i as f64 + 1.0)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_rtf_svg(rows: &[ReportRow], path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, render_rtf_svg(rows))?;
    Ok(())
}
