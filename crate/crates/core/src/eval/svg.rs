//! Minimal line-plot SVG writer with fixed-precision coordinates.

use std::fmt::Write as _;

use super::metrics::Curve;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 2] = ["#1f77b4", "#d62728"];
const TICKS: usize = 5;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

/// Plots curves with values in `[0, 1]` as percentages over their thresholds.
/// All series share the first series' thresholds; the third tuple field is
/// the headline value shown in the legend.
pub(crate) fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[(&str, &Curve, f64)]) -> String {
    let xs = &series[0].1.thresholds;
    let (x_min, x_max) = (xs[0], xs[xs.len() - 1]);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * pw;
    let py = |y: f64| TOP + (1.0 - y) * ph;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title))
        .unwrap();
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let (gx, gy) = (px(x_min + f * (x_max - x_min)), py(f));
        writeln!(s, r##"<line x1="{LEFT:.1}" y1="{gy:.2}" x2="{:.1}" y2="{gy:.2}" stroke="#dddddd"/>"##, LEFT + pw)
            .unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{:.0}</text>"#, LEFT - 6.0, gy + 4.0, 100.0 * f)
            .unwrap();
        writeln!(
            s,
            r#"<text x="{gx:.2}" y="{:.1}" text-anchor="middle">{}</text>"#,
            TOP + ph + 16.0,
            tick_label(x_min + f * (x_max - x_min))
        )
        .unwrap();
    }
    writeln!(s, r#"<rect x="{LEFT:.1}" y="{TOP:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#)
        .unwrap();
    writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    )
    .unwrap();
    for (k, (name, curve, headline)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let points: Vec<String> =
            curve.thresholds.iter().zip(&curve.values).map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, points.join(" "))
            .unwrap();
        let ly = TOP + 16.0 + 16.0 * k as f64;
        let lx = LEFT + pw - 110.0;
        writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"/>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0
        )
        .unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{ly:.1}">{} ({:.1})</text>"#, lx + 26.0, escape(name), headline).unwrap();
    }
    s.push_str("</svg>\n");
    s
}
