//! Static SVG rendering of performance profiles.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use crate::profile::{write_curves, ProfileCurve};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const DASHES: [&str; 3] = ["", "6 3", "2 3"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Right end of the `log₂ τ` axis: the largest finite ratio, rounded up to a
/// power of two, at least 2.
fn x_extent(curves: &[ProfileCurve]) -> f64 {
    let max = curves
        .iter()
        .filter_map(|c| c.ratios.last())
        .fold(1.0f64, |a, b| a.max(*b));
    max.log2().ceil().max(1.0)
}

/// One step curve per solver over a `log₂` ratio axis. The output depends on
/// nothing but the arguments.
pub fn render_svg(curves: &[ProfileCurve], title: &str) -> String {
    let xmax = x_extent(curves);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |t: f64| LEFT + pw * t / xmax;
    let py = |v: f64| TOP + ph * (1.0 - v);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );

    // Axes, grid and ticks.
    let step = (xmax / 10.0).ceil().max(1.0);
    let mut k = 0.0;
    while k <= xmax {
        let x = px(k);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/>"##,
            py(0.0),
            py(1.0)
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            py(0.0) + 16.0,
            2f64.powf(k)
        );
        k += step;
    }
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let y = py(v);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##,
            px(0.0),
            px(xmax)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
            px(0.0) - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{:.2}" y="{:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#,
        px(0.0),
        py(1.0)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">performance ratio τ (log₂ scale)</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">fraction of problems</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    for (i, c) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let dash = DASHES[(i / COLORS.len()) % DASHES.len()];
        let mut d = format!("M {:.2} {:.2}", px(0.0), py(0.0));
        for (r, v) in c.ratios.iter().zip(&c.values) {
            let _ = write!(d, " H {:.2} V {:.2}", px(r.log2()), py(*v));
        }
        let _ = write!(d, " H {:.2}", px(xmax));
        let dash_attr = if dash.is_empty() {
            String::new()
        } else {
            format!(r#" stroke-dasharray="{dash}""#)
        };
        let _ = writeln!(
            s,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="2"{dash_attr}/>"#
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash_attr}/>"#,
            lx + 25.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 32.0,
            ly + 4.0,
            escape(&c.solver)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the plot to `svg` and the curve data next to it with extension
/// `.csv`. Returns the CSV path.
pub fn emit_profile_plot(curves: &[ProfileCurve], svg: &Path, title: &str) -> io::Result<PathBuf> {
    std::fs::write(svg, render_svg(curves, title))?;
    let csv_path = svg.with_extension("csv");
    let file = std::fs::File::create(&csv_path)?;
    write_curves(curves, file).map_err(io::Error::other)?;
    Ok(csv_path)
}
