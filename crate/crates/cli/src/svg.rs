//! Static SVG learning-curve plots: a 10–90th percentile band and a median
//! line per head.

use std::fmt::Write;

pub struct Series {
    pub label: String,
    /// `(epoch, p10, median, p90)`
    pub points: Vec<(f64, f64, f64, f64)>,
}

const PALETTE: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn percentile_bands(title: &str, y_label: &str, series: &[Series]) -> String {
    let finite = |v: f64| if v.is_finite() { Some(v) } else { None };
    let x_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .fold(1.0f64, f64::max);
    let y_max = series
        .iter()
        .flat_map(|s| s.points.iter().filter_map(|p| finite(p.3)))
        .fold(0.0f64, f64::max)
        .max(1e-9)
        * 1.05;
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + x / x_max * pw;
    let sy = |y: f64| TOP + ph - y.clamp(0.0, y_max) / y_max * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));

    // axes and ticks
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT},{TOP} V{} H{}" stroke="black" fill="none"/>"#,
        TOP + ph,
        LEFT + pw
    );
    for k in 0..=5 {
        let y = y_max * k as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" x2="{}" y1="{py:.2}" y2="{py:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{y:.1}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            sy(y) + 4.0,
            py = sy(y)
        );
        let x = x_max * k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            sx(x),
            TOP + ph + 18.0,
            x.round()
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">epoch</text>"#,
        LEFT + pw / 2.0,
        H - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );

    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let label = escape(&ser.label);
        let _ = writeln!(s, "<!-- series {label}: epoch,p10,median,p90 -->");
        for p in &ser.points {
            let _ = writeln!(s, "<!-- {},{},{},{} -->", p.0, p.1, p.2, p.3);
        }
        let pts: Vec<_> = ser.points.iter().filter(|p| p.1.is_finite() && p.2.is_finite() && p.3.is_finite()).collect();
        let mut band = String::new();
        for p in &pts {
            let _ = write!(band, "{:.2},{:.2} ", sx(p.0), sy(p.3));
        }
        for p in pts.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", sx(p.0), sy(p.1));
        }
        let _ = writeln!(
            s,
            r#"<g class="head" data-head="{label}"><polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let line: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.2))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/></g>"#,
            line.join(" ")
        );
        let ly = TOP + 16.0 + 20.0 * i as f64;
        let lx = LEFT + pw + 14.0;
        let _ = writeln!(
            s,
            r#"<rect x="{lx}" y="{}" width="14" height="10" fill="{color}" fill-opacity="0.5"/><text x="{}" y="{ly}">{label}</text>"#,
            ly - 9.0,
            lx + 20.0
        );
    }
    s.push_str("</svg>\n");
    s
}
