//! Minimal self-contained SVG line charts with a fixed layout, so output is
//! byte-stable for identical data.

use std::fmt::Write as _;

pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
];

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: String,
}

#[derive(Clone, Debug)]
pub struct Marker {
    pub x: f64,
    pub y: f64,
    pub label: String,
}

/// Shaded x-interval with a caption, e.g. a controller phase.
#[derive(Clone, Debug)]
pub struct Band {
    pub x0: f64,
    pub x1: f64,
    pub label: String,
    pub color: String,
}

#[derive(Clone, Debug, Default)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub markers: Vec<Marker>,
    pub bands: Vec<Band>,
}

const W: f64 = 760.0;
const H: f64 = 300.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 45.0;

fn num(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" { "0.00".into() } else { s }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round tick spacing giving roughly `n` intervals over `span`.
fn tick_step(span: f64, n: f64) -> f64 {
    let raw = span / n;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f < 1.5 { 1.0 } else if f < 3.0 { 2.0 } else if f < 7.0 { 5.0 } else { 10.0 };
    nice * mag
}

fn tick_label(x: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s.trim_start_matches(['-', '0', '.']).is_empty() {
        s[1..].to_string()
    } else {
        s
    }
}

fn bounds(panel: &Panel) -> ((f64, f64), (f64, f64)) {
    let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ys = (0.0f64, f64::NEG_INFINITY);
    let pts = panel
        .series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .chain(panel.markers.iter().map(|m| (m.x, m.y)));
    for (x, y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        xs = (xs.0.min(x), xs.1.max(x));
        ys = (ys.0.min(y), ys.1.max(y));
    }
    if !xs.0.is_finite() {
        return ((0.0, 1.0), (0.0, 1.0));
    }
    if xs.1 <= xs.0 {
        xs.1 = xs.0 + 1.0;
    }
    if ys.1 <= ys.0 {
        ys.1 = ys.0 + 1.0;
    }
    ys.1 += 0.08 * (ys.1 - ys.0);
    (xs, ys)
}

fn render_panel(out: &mut String, panel: &Panel, y0: f64) {
    let ((xa, xb), (ya, yb)) = bounds(panel);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - xa) / (xb - xa) * pw;
    let sy = |y: f64| y0 + TOP + ph - (y - ya) / (yb - ya) * ph;

    let _ = writeln!(out, r#"<g>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="14" font-weight="bold">{}</text>"#,
        num(LEFT),
        num(y0 + 20.0),
        esc(&panel.title)
    );
    for b in &panel.bands {
        let (x0, x1) = (sx(b.x0.max(xa)), sx(b.x1.min(xb)));
        if x1 <= x0 {
            continue;
        }
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}" fill-opacity="0.12"/>"#,
            num(x0),
            num(y0 + TOP),
            num(x1 - x0),
            num(ph),
            b.color
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" fill="{}">{}</text>"#,
            num(x0 + 2.0),
            num(y0 + TOP + 11.0),
            b.color,
            esc(&b.label)
        );
    }
    let _ = writeln!(
        out,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
        num(LEFT),
        num(y0 + TOP),
        num(pw),
        num(ph)
    );
    let xs = tick_step(xb - xa, 8.0);
    let mut k = (xa / xs).ceil();
    while k * xs <= xb + 1e-9 * xs {
        let x = k * xs;
        let _ = writeln!(
            out,
            r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#ddd"/><text x="{0}" y="{3}" font-size="10" text-anchor="middle">{4}</text>"##,
            num(sx(x)),
            num(y0 + TOP),
            num(y0 + TOP + ph),
            num(y0 + TOP + ph + 14.0),
            tick_label(x, xs)
        );
        k += 1.0;
    }
    let ys = tick_step(yb - ya, 5.0);
    let mut k = (ya / ys).ceil();
    while k * ys <= yb + 1e-9 * ys {
        let y = k * ys;
        let _ = writeln!(
            out,
            r##"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#ddd"/><text x="{3}" y="{4}" font-size="10" text-anchor="end">{5}</text>"##,
            num(LEFT),
            num(sy(y)),
            num(LEFT + pw),
            num(LEFT - 4.0),
            num(sy(y) + 3.0),
            tick_label(y, ys)
        );
        k += 1.0;
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
        num(LEFT + pw / 2.0),
        num(y0 + H - 8.0),
        esc(&panel.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{0}" font-size="11" text-anchor="middle" transform="rotate(-90 14 {0})">{1}</text>"#,
        num(y0 + TOP + ph / 2.0),
        esc(&panel.y_label)
    );
    for (n, s) in panel.series.iter().enumerate() {
        let mut path = String::new();
        for (x, y) in s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
            let _ = write!(path, "{}{},{}", if path.is_empty() { "M" } else { " L" }, num(sx(*x)), num(sy(*y)));
        }
        let _ = writeln!(
            out,
            r#"<path d="{}" fill="none" stroke="{}" stroke-width="1.3"/>"#,
            path, s.color
        );
        let ly = y0 + TOP + 12.0 + 16.0 * n as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{3}" stroke-width="2"/><text x="{4}" y="{5}" font-size="11">{6}</text>"#,
            num(LEFT + pw + 10.0),
            num(ly),
            num(LEFT + pw + 30.0),
            s.color,
            num(LEFT + pw + 34.0),
            num(ly + 4.0),
            esc(&s.label)
        );
    }
    for m in &panel.markers {
        let _ = writeln!(
            out,
            r##"<circle cx="{0}" cy="{1}" r="4" fill="none" stroke="#000"/><text x="{0}" y="{2}" font-size="10" text-anchor="middle">{3}</text>"##,
            num(sx(m.x)),
            num(sy(m.y)),
            num(sy(m.y) - 7.0),
            esc(&m.label)
        );
    }
    let _ = writeln!(out, "</g>");
}

/// Panels stacked vertically in one document.
pub fn render(panels: &[Panel]) -> String {
    let height = H * panels.len().max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{1}" viewBox="0 0 {0} {1}" font-family="sans-serif">"#,
        num(W),
        num(height)
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (k, p) in panels.iter().enumerate() {
        render_panel(&mut out, p, k as f64 * H);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel() -> Panel {
        Panel {
            title: "P & V".into(),
            x_label: "v".into(),
            y_label: "p".into(),
            series: vec![Series {
                label: "a".into(),
                points: vec![(0.0, 0.0), (1.0, 2.0), (2.0, 1.0)],
                color: PALETTE[0].into(),
            }],
            markers: vec![Marker { x: 1.0, y: 2.0, label: "peak".into() }],
            bands: vec![],
        }
    }

    #[test]
    fn output_is_deterministic_and_escaped() {
        let a = render(&[panel(), panel()]);
        assert_eq!(a, render(&[panel(), panel()]));
        assert!(a.contains("P &amp; V"));
        assert_eq!(a.matches("<circle").count(), 2);
        assert!(a.ends_with("</svg>\n"));
    }

    #[test]
    fn nice_ticks() {
        assert_eq!(tick_step(1000.0, 5.0), 200.0);
        assert_eq!(tick_step(1.5, 8.0), 0.2);
        assert_eq!(tick_label(0.30000000000000004, 0.1), "0.3");
    }
}
