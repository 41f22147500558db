//! Minimal static line charts.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

pub struct Series<'a> {
    pub name: &'a str,
    pub y: &'a [f64],
}

pub struct Chart<'a> {
    pub title: Option<&'a str>,
    pub x_label: &'a str,
    pub x: &'a [f64],
    pub series: Vec<Series<'a>>,
    pub log_x: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn extent(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    if hi - lo < 1e-300 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

impl Chart<'_> {
    /// Points whose x is not finite (or not positive on a log axis) are
    /// skipped, as are non-finite y values.
    pub fn render(&self) -> String {
        let tx = |x: f64| if self.log_x { x.log10() } else { x };
        let keep = |x: f64| x.is_finite() && (!self.log_x || x > 0.0);
        let (x0, x1) = extent(self.x.iter().copied().filter(|x| keep(*x)).map(tx)).unwrap_or((0.0, 1.0));
        let ys = self.series.iter().flat_map(|s| {
            s.y.iter().zip(self.x).filter(|(_, x)| keep(**x)).map(|(y, _)| *y)
        });
        let (y0, y1) = extent(ys).unwrap_or((0.0, 1.0));

        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let px = |x: f64| LEFT + (tx(x) - x0) / (x1 - x0) * pw;
        let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        if let Some(t) = self.title {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
                LEFT + pw / 2.0,
                escape(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<g class="axes" stroke="black" fill="none"><line x1="{LEFT}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{b}"/></g>"#,
            b = TOP + ph,
            r = LEFT + pw
        );

        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = x0 + f * (x1 - x0);
            let label = if self.log_x { tick(10f64.powf(xv)) } else { tick(xv) };
            let sx = LEFT + f * pw;
            let _ = writeln!(
                out,
                r#"<line x1="{sx:.2}" y1="{b}" x2="{sx:.2}" y2="{b5}" stroke="black"/><text x="{sx:.2}" y="{b18}" text-anchor="middle">{label}</text>"#,
                b = TOP + ph,
                b5 = TOP + ph + 5.0,
                b18 = TOP + ph + 18.0
            );
            let yv = y0 + f * (y1 - y0);
            let sy = TOP + (1.0 - f) * ph;
            let _ = writeln!(
                out,
                r#"<line x1="{l5}" y1="{sy:.2}" x2="{LEFT}" y2="{sy:.2}" stroke="black"/><text x="{l8}" y="{sy4:.2}" text-anchor="end">{}</text>"#,
                tick(yv),
                l5 = LEFT - 5.0,
                l8 = LEFT - 8.0,
                sy4 = sy + 4.0
            );
        }
        let x_label = if self.log_x {
            format!("{} (log)", self.x_label)
        } else {
            self.x_label.to_string()
        };
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 10.0,
            escape(&x_label)
        );

        for (k, s) in self.series.iter().enumerate() {
            let colour = PALETTE[k % PALETTE.len()];
            let points: Vec<String> = self
                .x
                .iter()
                .zip(s.y)
                .filter(|(x, y)| keep(**x) && y.is_finite())
                .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
                .collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
                points.join(" ")
            );
            let ly = TOP + 10.0 + 18.0 * k as f64;
            let lx = LEFT + pw + 15.0;
            let _ = writeln!(
                out,
                r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">{}</text></g>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                escape(s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_series() {
        let x = [1.0, 2.0, 3.0];
        let a = [0.0, 1.0, 0.5];
        let b = [2.0, 1.0, 0.0];
        let svg = Chart {
            title: None,
            x_label: "t",
            x: &x,
            series: vec![Series { name: "a", y: &a }, Series { name: "b<", y: &b }],
            log_x: false,
        }
        .render();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("b&lt;"));
    }

    #[test]
    fn log_axis_drops_non_positive_x() {
        let x = [0.0, 1.0, 10.0, 100.0];
        let y = [1.0, 2.0, 3.0, 4.0];
        let svg = Chart {
            title: Some("r"),
            x_label: "t",
            x: &x,
            series: vec![Series { name: "y", y: &y }],
            log_x: true,
        }
        .render();
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(line.matches(',').count(), 3);
    }
}
