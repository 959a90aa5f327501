//! Standalone SVG figures. Output depends only on the inputs, so repeated
//! runs give identical bytes.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;
const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        escape(title)
    )
}

/// Rounded-up axis limit with a tick step from {1, 2, 5}·10^k.
fn nice_ticks(lo: f64, hi: f64) -> (f64, f64, f64) {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    ((lo / step).floor() * step, (hi / step).ceil() * step, step)
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.decimals$}")
}

struct Frame {
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn y(&self, v: f64) -> f64 {
        TOP + (self.y_hi - v) / (self.y_hi - self.y_lo) * (H - TOP - BOTTOM)
    }
}

fn y_axis(svg: &mut String, lo: f64, hi: f64, label: &str) -> Frame {
    let (lo, hi, step) = nice_ticks(lo, hi);
    let f = Frame { y_lo: lo, y_hi: hi };
    let n = ((hi - lo) / step).round() as i64;
    for i in 0..=n {
        let v = lo + i as f64 * step;
        let y = f.y(v);
        let _ = writeln!(
            svg,
            "<line x1=\"{LEFT}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            W - RIGHT,
            LEFT - 6.0,
            y + 4.0,
            tick_label(v, step)
        );
    }
    let _ = writeln!(
        svg,
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{:.2}\" stroke=\"black\"/>\n\
         <text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">{}</text>",
        H - BOTTOM,
        (TOP + H - BOTTOM) / 2.0,
        (TOP + H - BOTTOM) / 2.0,
        escape(label)
    );
    f
}

/// One group of bars per entry of `groups`; bar `i` in each group belongs to
/// `series[i]`. Values are `(mean, error)`.
pub struct BarChart<'a> {
    pub title: &'a str,
    pub y_label: &'a str,
    pub groups: Vec<String>,
    pub series: Vec<String>,
    pub values: Vec<Vec<(f64, f64)>>,
}

pub fn bar_chart(c: &BarChart<'_>) -> String {
    let mut svg = header(c.title);
    let hi = c
        .values
        .iter()
        .flatten()
        .map(|(m, e)| m + e)
        .fold(0.0f64, f64::max);
    let lo = c.values.iter().flatten().map(|(m, e)| m - e).fold(0.0f64, f64::min);
    let f = y_axis(&mut svg, lo, hi, c.y_label);
    let plot_w = W - LEFT - RIGHT;
    let group_w = plot_w / c.groups.len().max(1) as f64;
    let bar_w = group_w * 0.8 / c.series.len().max(1) as f64;
    for (g, name) in c.groups.iter().enumerate() {
        let x0 = LEFT + g as f64 * group_w + group_w * 0.1;
        for (s, &(m, e)) in c.values[g].iter().enumerate() {
            let x = x0 + s as f64 * bar_w;
            let (y0, y1) = (f.y(m.max(0.0)), f.y(m.min(0.0)));
            let cx = x + bar_w / 2.0;
            let _ = writeln!(
                svg,
                "<rect x=\"{x:.2}\" y=\"{y0:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>\n\
                 <line x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n\
                 <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n\
                 <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
                bar_w * 0.9,
                (y1 - y0).max(0.0),
                PALETTE[s % PALETTE.len()],
                f.y(m + e),
                f.y(m - e),
                cx - bar_w * 0.2,
                f.y(m + e),
                cx + bar_w * 0.2,
                f.y(m + e),
                cx - bar_w * 0.2,
                f.y(m - e),
                cx + bar_w * 0.2,
                f.y(m - e),
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            LEFT + (g as f64 + 0.5) * group_w,
            H - BOTTOM + 18.0,
            escape(name)
        );
    }
    let zero = f.y(0.0);
    let _ = writeln!(
        svg,
        "<line x1=\"{LEFT}\" y1=\"{zero:.2}\" x2=\"{:.2}\" y2=\"{zero:.2}\" stroke=\"black\"/>",
        W - RIGHT
    );
    for (s, name) in c.series.iter().enumerate() {
        let x = LEFT + s as f64 * 110.0;
        let y = H - 22.0;
        let _ = writeln!(
            svg,
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n\
             <text x=\"{:.2}\" y=\"{y:.2}\">{}</text>",
            y - 10.0,
            PALETTE[s % PALETTE.len()],
            x + 16.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Scatter of predicted against observed values with the identity line.
pub fn predicted_vs_observed(title: &str, labels: &[&str], observed: &[f64], predicted: &[f64]) -> String {
    let mut svg = header(title);
    let all = observed.iter().chain(predicted);
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    let f = y_axis(&mut svg, lo, hi, "predicted");
    let plot_w = W - LEFT - RIGHT;
    let x = |v: f64| LEFT + (v - f.y_lo) / (f.y_hi - f.y_lo) * plot_w;
    let _ = writeln!(
        svg,
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#999999\" stroke-dasharray=\"4 3\"/>",
        x(f.y_lo),
        f.y(f.y_lo),
        x(f.y_hi),
        f.y(f.y_hi)
    );
    let _ = writeln!(
        svg,
        "<line x1=\"{LEFT}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">observed</text>",
        H - BOTTOM,
        W - RIGHT,
        H - BOTTOM,
        LEFT + plot_w / 2.0,
        H - BOTTOM + 36.0
    );
    for (i, (&o, &p)) in observed.iter().zip(predicted).enumerate() {
        let (cx, cy) = (x(o), f.y(p));
        let _ = writeln!(
            svg,
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"4\" fill=\"{}\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\">{}</text>",
            PALETTE[0],
            cx + 6.0,
            cy - 6.0,
            escape(labels.get(i).copied().unwrap_or(""))
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_range() {
        let (lo, hi, step) = nice_ticks(0.0, 0.17);
        assert_eq!((lo, step), (0.0, 0.05));
        assert!(hi >= 0.17);
        assert_eq!(tick_label(0.05, 0.05), "0.05");
    }

    #[test]
    fn charts_are_deterministic_svg() {
        let c = BarChart {
            title: "t<1>",
            y_label: "w",
            groups: vec!["a".into(), "b".into()],
            series: vec!["x".into()],
            values: vec![vec![(0.1, 0.02)], vec![(0.2, 0.01)]],
        };
        let a = bar_chart(&c);
        assert_eq!(a, bar_chart(&c));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert!(a.contains("t&lt;1&gt;"));
        let s = predicted_vs_observed("p", &["A", "B"], &[0.1, 0.2], &[0.12, 0.18]);
        assert_eq!(s.matches("<circle").count(), 2);
    }
}
