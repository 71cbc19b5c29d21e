//! Spectrum scatter plot written as plain SVG.

use anisopml::Complex64;
use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: [f64; 4] = [40.0, 30.0, 50.0, 70.0]; // top, right, bottom, left

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Marker {
    Physical,
    Ambiguous,
    Spurious,
    Reference,
}

impl Marker {
    fn label(self) -> &'static str {
        match self {
            Marker::Physical => "computed",
            Marker::Ambiguous => "computed (ambiguous match)",
            Marker::Spurious => "spurious",
            Marker::Reference => "reference",
        }
    }

    fn draw(self, out: &mut String, x: f64, y: f64) {
        let _ = match self {
            Marker::Physical => writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="#1f5fbf"/>"##),
            Marker::Ambiguous => writeln!(
                out,
                r##"<rect x="{:.2}" y="{:.2}" width="7" height="7" fill="none" stroke="#d08000" stroke-width="1.5"/>"##,
                x - 3.5,
                y - 3.5
            ),
            Marker::Spurious => writeln!(
                out,
                r##"<path d="M{:.2},{:.2}l7,7m0,-7l-7,7" stroke="#c02020" stroke-width="1.5"/>"##,
                x - 3.5,
                y - 3.5
            ),
            Marker::Reference => {
                writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="6" fill="none" stroke="#208020" stroke-width="1.5"/>"##)
            }
        };
    }
}

/// Tick positions at a 1-2-5 step covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter of `points` in the complex plane (real part right, imaginary part up).
pub fn spectrum_svg(title: &str, points: &[(Complex64, Marker)]) -> String {
    let (mut x0, mut x1, mut y0, mut y1) = (0.0f64, 1.0f64, -1.0f64, 0.0f64);
    for (z, _) in points.iter().filter(|(z, _)| z.re.is_finite() && z.im.is_finite()) {
        x0 = x0.min(z.re);
        x1 = x1.max(z.re);
        y0 = y0.min(z.im);
        y1 = y1.max(z.im);
    }
    let (px, py) = (0.05 * (x1 - x0), 0.05 * (y1 - y0));
    let (x0, x1, y0, y1) = (x0 - px, x1 + px, y0 - py, y1 + py);
    let [top, right, bottom, left] = MARGIN;
    let pw = WIDTH - left - right;
    let ph = HEIGHT - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for t in ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{}" stroke="#e0e0e0"/>"##, top + ph);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, top + ph + 16.0, fmt_tick(t));
    }
    for t in ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(s, r##"<line x1="{left}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#e0e0e0"/>"##, left + pw);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, left - 6.0, y + 4.0, fmt_tick(t));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">Re ω</text>"#, left + pw / 2.0, HEIGHT - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">Im ω</text>"#,
        top + ph / 2.0
    );
    for &(z, m) in points.iter().filter(|(z, _)| z.re.is_finite() && z.im.is_finite()) {
        m.draw(&mut s, sx(z.re), sy(z.im));
    }

    let mut kinds: Vec<Marker> = Vec::new();
    for &(_, m) in points {
        if !kinds.contains(&m) {
            kinds.push(m);
        }
    }
    kinds.sort_by_key(|m| *m as u8);
    let lx = left + pw - 190.0;
    for (i, m) in kinds.iter().enumerate() {
        let y = top + 16.0 + 18.0 * i as f64;
        m.draw(&mut s, lx, y);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 12.0, y + 4.0, m.label());
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(t: f64) -> String {
    let s = format!("{t:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}
