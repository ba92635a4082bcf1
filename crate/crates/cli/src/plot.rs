//! Minimal hand-emitted SVG line plots (optionally log-scaled axes) with
//! no external plotting dependency.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// One labeled curve.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Axis description; `log` axes drop non-positive values.
#[derive(Debug, Clone, Copy)]
pub struct Axes {
    pub log_x: bool,
    pub log_y: bool,
}

fn transform(v: f64, log: bool) -> Option<f64> {
    if log {
        if v > 0.0 {
            Some(v.ln())
        } else {
            None
        }
    } else {
        Some(v)
    }
}

fn nice_ticks(lo: f64, hi: f64, log: bool) -> Vec<(f64, String)> {
    // Ticks in transformed coordinates; labels in data coordinates.
    if log {
        // Decade ticks between the enclosing powers of ten.
        let lo_exp = (lo / std::f64::consts::LN_10).floor() as i32;
        let hi_exp = (hi / std::f64::consts::LN_10).ceil() as i32;
        let mut ticks = Vec::new();
        let mut step = 1;
        while (hi_exp - lo_exp) / step > 8 {
            step += 1;
        }
        let mut e = lo_exp;
        while e <= hi_exp {
            let t = e as f64 * std::f64::consts::LN_10;
            if t >= lo - 1e-9 && t <= hi + 1e-9 {
                ticks.push((t, format!("1e{e}")));
            }
            e += step;
        }
        if ticks.is_empty() {
            ticks.push((lo, format!("{:.3e}", lo.exp())));
            ticks.push((hi, format!("{:.3e}", hi.exp())));
        }
        ticks
    } else {
        let span = (hi - lo).max(f64::MIN_POSITIVE);
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| span / s <= 6.0)
            .unwrap_or(mag * 10.0);
        let mut ticks = Vec::new();
        let mut t = (lo / step).ceil() * step;
        while t <= hi + 1e-9 * span {
            ticks.push((t, format!("{t:.4}")));
            t += step;
        }
        ticks
    }
}

/// Renders the series as a self-contained SVG document.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, axes: Axes, series: &[Series]) -> String {
    let mut pts_t: Vec<Vec<(f64, f64)>> = Vec::new();
    for s in series {
        let t: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter_map(|&(x, y)| Some((transform(x, axes.log_x)?, transform(y, axes.log_y)?)))
            .collect();
        pts_t.push(t);
    }
    let all: Vec<(f64, f64)> = pts_t.iter().flatten().copied().collect();
    let (mut x_lo, mut x_hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let (mut y_lo, mut y_hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    if !x_lo.is_finite() {
        (x_lo, x_hi) = (0.0, 1.0);
        (y_lo, y_hi) = (0.0, 1.0);
    }
    if x_hi - x_lo < 1e-12 {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    if y_hi - y_lo < 1e-12 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pad_x = 0.04 * (x_hi - x_lo);
    let pad_y = 0.06 * (y_hi - y_lo);
    let (x_lo, x_hi) = (x_lo - pad_x, x_hi + pad_x);
    let (y_lo, y_hi) = (y_lo - pad_y, y_hi + pad_y);

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = move |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = move |y: f64| MARGIN_T + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        MARGIN_L + plot_w / 2.0,
        xml_escape(title)
    );

    // Axes frame.
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"black\"/>"
    );

    for (t, label) in nice_ticks(x_lo, x_hi, axes.log_x) {
        let px = sx(t);
        let y0 = MARGIN_T + plot_h;
        let _ = writeln!(
            svg,
            "<line x1=\"{px:.2}\" y1=\"{y0:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\
             <text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            y0 + 5.0,
            y0 + 20.0,
            xml_escape(&label)
        );
    }
    for (t, label) in nice_ticks(y_lo, y_hi, axes.log_y) {
        let py = sy(t);
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{MARGIN_L}\" y2=\"{py:.2}\" stroke=\"black\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            MARGIN_L - 5.0,
            MARGIN_L - 8.0,
            py + 4.0,
            xml_escape(&label)
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 10.0,
        xml_escape(x_label)
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        xml_escape(y_label)
    );

    for (si, (s, pts)) in series.iter().zip(pts_t.iter()).enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if pts.len() > 1 {
            let path: String = pts
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| {
                    format!("{}{:.2},{:.2}", if i == 0 { "M" } else { "L" }, sx(x), sy(y))
                })
                .collect();
            let _ = writeln!(svg, "<path d=\"{path}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>");
        }
        for &(x, y) in pts {
            let _ = writeln!(
                svg,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>",
                sx(x),
                sy(y)
            );
        }
        // Legend entry.
        let ly = MARGIN_T + 14.0 + 18.0 * si as f64;
        let lx = WIDTH - MARGIN_R + 10.0;
        let _ = writeln!(
            svg,
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{}\" y=\"{}\">{}</text>",
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            xml_escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
