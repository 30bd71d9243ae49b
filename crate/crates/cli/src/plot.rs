//! Minimal SVG rendering for heat plots and evaluation curves.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 52.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

struct Frame {
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn plot_w(&self) -> f64 {
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    }

    fn plot_h(&self) -> f64 {
        HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    }

    fn y(&self, v: f64) -> f64 {
        let span = self.y_max - self.y_min;
        MARGIN_TOP + self.plot_h() * (1.0 - (v - self.y_min) / span)
    }

    fn header(&self, svg: &mut String, title: &str, y_label: &str, x_label: &str) {
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(title)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + self.plot_w() / 2.0,
            HEIGHT - 10.0,
            escape(x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            MARGIN_TOP + self.plot_h() / 2.0,
            escape(y_label)
        );
        for i in 0..=4 {
            let v = self.y_min + (self.y_max - self.y_min) * i as f64 / 4.0;
            let y = self.y(v);
            let _ = writeln!(
                svg,
                r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/>"##,
                WIDTH - MARGIN_RIGHT
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                MARGIN_LEFT - 6.0,
                y + 4.0,
                fmt_tick(v)
            );
        }
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{:.2}" stroke="black"/>"##,
            HEIGHT - MARGIN_BOTTOM
        );
    }
}

/// Bar chart of one value per band, labelled by the band's upper bound.
///
/// `signed` draws bars around a zero axis; otherwise bars start at zero and
/// the axis begins there. `errors` adds symmetric error bars.
pub fn bar_chart(
    title: &str,
    y_label: &str,
    labels: &[f64],
    values: &[f64],
    errors: Option<&[f64]>,
    signed: bool,
) -> String {
    let err = |i: usize| errors.map_or(0.0, |e| e[i]);
    let hi = values
        .iter()
        .enumerate()
        .map(|(i, v)| v + err(i))
        .fold(0.0f64, f64::max);
    let lo = values
        .iter()
        .enumerate()
        .map(|(i, v)| v - err(i))
        .fold(0.0f64, f64::min);
    let (y_min, y_max) = if signed {
        let m = hi.max(-lo).max(1e-12);
        (-m, m)
    } else {
        (0.0, hi.max(1e-12))
    };
    let frame = Frame { y_min, y_max };

    let mut svg = String::new();
    frame.header(&mut svg, title, y_label, "band upper bound t");
    let zero = frame.y(0.0);
    let slot = frame.plot_w() / values.len().max(1) as f64;
    let bar_w = slot * 0.7;
    for (i, v) in values.iter().enumerate() {
        let x = MARGIN_LEFT + slot * i as f64 + (slot - bar_w) / 2.0;
        let y = frame.y(*v);
        let (top, h) = if y < zero { (y, zero - y) } else { (zero, y - zero) };
        let fill = if *v < 0.0 { PALETTE[1] } else { PALETTE[0] };
        let _ = writeln!(
            svg,
            r#"<rect class="bar" x="{x:.2}" y="{top:.2}" width="{bar_w:.2}" height="{h:.2}" fill="{fill}"><title>{}</title></rect>"#,
            fmt_tick(*v)
        );
        if let Some(e) = errors {
            let cx = x + bar_w / 2.0;
            let (y0, y1) = (frame.y(v - e[i]), frame.y(v + e[i]));
            let _ = writeln!(
                svg,
                r#"<g class="errorbar" stroke="black"><line x1="{cx:.2}" y1="{y0:.2}" x2="{cx:.2}" y2="{y1:.2}"/><line x1="{:.2}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}"/><line x1="{:.2}" y1="{y1:.2}" x2="{:.2}" y2="{y1:.2}"/></g>"#,
                cx - 4.0,
                cx + 4.0,
                cx - 4.0,
                cx + 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x + bar_w / 2.0,
            HEIGHT - MARGIN_BOTTOM + 16.0,
            fmt_tick(labels[i])
        );
    }
    let _ = writeln!(
        svg,
        r#"<line class="axis-zero" x1="{MARGIN_LEFT}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="black"/>"#,
        WIDTH - MARGIN_RIGHT
    );
    svg.push_str("</svg>\n");
    svg
}

pub struct Series<'a> {
    pub name: String,
    pub points: &'a [(f64, f64)],
    pub dashed: bool,
}

/// Line chart over `x ∈ [0, 1]`. Dashed series are drawn dotted and grey.
pub fn line_chart(title: &str, y_label: &str, x_label: &str, series: &[Series<'_>]) -> String {
    let hi = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .fold(0.0f64, f64::max);
    let frame = Frame {
        y_min: 0.0,
        y_max: if hi > 0.0 { hi * 1.05 } else { 1.0 },
    };
    let x = |v: f64| MARGIN_LEFT + frame.plot_w() * v;

    let mut svg = String::new();
    frame.header(&mut svg, title, y_label, x_label);
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x(v),
            HEIGHT - MARGIN_BOTTOM + 16.0,
            fmt_tick(v)
        );
    }
    let mut solid = 0;
    for s in series {
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(px, py)| format!("{:.2},{:.2}", x(px), frame.y(py)))
            .collect();
        let (color, dash) = if s.dashed {
            ("#7f7f7f", r#" stroke-dasharray="2,3""#)
        } else {
            solid += 1;
            (PALETTE[(solid - 1) % PALETTE.len()], "")
        };
        let _ = writeln!(
            svg,
            r#"<polyline class="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"><title>{}</title></polyline>"#,
            if s.dashed { "baseline" } else { "curve" },
            path.join(" "),
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}
