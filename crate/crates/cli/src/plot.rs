//! Small SVG line and scatter charts.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Line,
    Circle,
    Cross,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub mark: Mark,
    /// Index into the palette.
    pub color: usize,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r < 1.5 {
        1.0
    } else if r < 3.0 {
        2.0
    } else if r < 7.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, 5);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        let d = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        (lo - d, hi + d)
    } else {
        let d = 0.04 * (hi - lo);
        (lo - d, hi + d)
    }
}

impl Chart {
    pub fn render(&self) -> String {
        let keep = |y: f64| y.is_finite() && (!self.log_y || y > 0.0);
        let pts: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().copied())
            .filter(|(x, y)| x.is_finite() && keep(*y))
            .collect();
        let fy = |y: f64| if self.log_y { y.log10() } else { y };
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in &pts {
            x0 = x0.min(*x);
            x1 = x1.max(*x);
            y0 = y0.min(fy(*y));
            y1 = y1.max(fy(*y));
        }
        if pts.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let (x0, x1) = padded(x0, x1);
        let (y0, y1) = if self.log_y {
            (y0.floor(), y1.ceil().max(y0.floor() + 1.0))
        } else {
            padded(y0, y1)
        };
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (fy(y) - y0) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
        );

        for t in linear_ticks(x0, x1) {
            let x = sx(t);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#333"/>"##,
                TOP + ph,
                TOP + ph + 5.0
            );
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, label(t));
        }
        let yticks: Vec<(f64, String)> = if self.log_y {
            let (a, b) = (y0 as i32, y1 as i32);
            let every = ((b - a) / 8).max(1);
            (a..=b)
                .filter(|e| (e - a) % every == 0)
                .map(|e| (10f64.powi(e), format!("1e{e}")))
                .collect()
        } else {
            linear_ticks(y0, y1).into_iter().map(|t| (t, label(t))).collect()
        };
        for (t, txt) in yticks {
            let y = sy(t);
            let _ = writeln!(s, r##"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#333"/>"##, LEFT - 5.0);
            let _ = writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/>"##, LEFT + pw);
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{txt}</text>"#, LEFT - 8.0, y + 4.0);
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            H - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (i, ser) in self.series.iter().enumerate() {
            let color = PALETTE[ser.color % PALETTE.len()];
            let p: Vec<(f64, f64)> = ser
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && keep(*y))
                .map(|(x, y)| (sx(*x), sy(*y)))
                .collect();
            match ser.mark {
                Mark::Line => {
                    let d: Vec<String> = p.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                        d.join(" ")
                    );
                }
                Mark::Circle => {
                    for (x, y) in &p {
                        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="none" stroke="{color}"/>"#);
                    }
                }
                Mark::Cross => {
                    for (x, y) in &p {
                        let _ = writeln!(
                            s,
                            r#"<path d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="{color}"/>"#,
                            x - 3.0,
                            y - 3.0,
                            x + 3.0,
                            y + 3.0,
                            x - 3.0,
                            y + 3.0,
                            x + 3.0,
                            y - 3.0
                        );
                    }
                }
            }
            let ly = TOP + 14.0 + 16.0 * i as f64;
            let lx = LEFT + pw - 150.0;
            let _ = writeln!(s, r#"<rect x="{lx}" y="{}" width="12" height="3" fill="{color}"/>"#, ly - 4.0);
            let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, lx + 18.0, escape(&ser.name));
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_range() {
        let t = linear_ticks(0.0, 1.0);
        assert_eq!(t.first(), Some(&0.0));
        assert!((t.last().unwrap() - 1.0).abs() < 1e-12);
        assert!(t.len() >= 4 && t.len() <= 12);
    }

    #[test]
    fn renders_empty_and_log_charts() {
        let empty = Chart {
            title: "e".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_y: true,
            series: vec![],
        };
        assert!(empty.render().ends_with("</svg>\n"));
        let c = Chart {
            series: vec![Series {
                name: "s<1>".into(),
                points: vec![(0.0, 1e-3), (1.0, 10.0), (2.0, 0.0)],
                mark: Mark::Line,
                color: 0,
            }],
            ..empty
        };
        let svg = c.render();
        assert!(svg.contains("polyline") && svg.contains("s&lt;1&gt;") && svg.contains("1e-3"));
    }
}
