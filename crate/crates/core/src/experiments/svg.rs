//! Minimal static SVG charts. Output depends only on the data: coordinates
//! are printed with fixed precision and elements are emitted in input order.

use std::fmt::Write;

const FONT: &str = "font-family=\"sans-serif\" font-size=\"11\"";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Light-to-dark blue ramp for values in `[0, 1]`.
fn ramp(v: f64) -> String {
    let t = v.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(247.0, 8.0), lerp(251.0, 48.0), lerp(255.0, 107.0))
}

/// Heatmap of `value(x, y)` over the distinct `xs` (columns) and `ys`
/// (rows, largest on top). Values are expected in `[0, 1]`.
pub fn heatmap(
    title: &str,
    x_label: &str,
    y_label: &str,
    points: &[(f64, f64, Option<f64>)],
) -> String {
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    for v in [&mut xs, &mut ys] {
        v.sort_by(|a, b| a.total_cmp(b));
        v.dedup();
    }
    ys.reverse();
    let (cw, ch) = (56.0, 24.0);
    let (left, top) = (70.0, 40.0);
    let width = left + cw * xs.len() as f64 + 90.0;
    let height = top + ch * ys.len() as f64 + 50.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(out, "<text x=\"{left:.1}\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">{}</text>", escape(title));
    for (i, x) in xs.iter().enumerate() {
        let cx = left + cw * (i as f64 + 0.5);
        let _ = writeln!(
            out,
            "<text x=\"{cx:.1}\" y=\"{:.1}\" {FONT} text-anchor=\"middle\">{x:.3}</text>",
            top + ch * ys.len() as f64 + 16.0
        );
    }
    for (j, y) in ys.iter().enumerate() {
        let cy = top + ch * (j as f64 + 0.5) + 4.0;
        let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{cy:.1}\" {FONT} text-anchor=\"end\">{y:.3}</text>", left - 6.0);
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" {FONT} text-anchor=\"middle\">{}</text>",
        left + cw * xs.len() as f64 / 2.0,
        top + ch * ys.len() as f64 + 36.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"14\" y=\"{:.1}\" {FONT} text-anchor=\"middle\" transform=\"rotate(-90 14 {:.1})\">{}</text>",
        top + ch * ys.len() as f64 / 2.0,
        top + ch * ys.len() as f64 / 2.0,
        escape(y_label)
    );
    for &(x, y, v) in points {
        let i = xs.iter().position(|&a| a == x).unwrap_or(0);
        let j = ys.iter().position(|&b| b == y).unwrap_or(0);
        let (rx, ry) = (left + cw * i as f64, top + ch * j as f64);
        let (fill, label, ink) = match v {
            Some(v) if v.is_finite() => (ramp(v), format!("{v:.2}"), if v > 0.55 { "white" } else { "black" }),
            _ => ("#dddddd".to_string(), "-".to_string(), "black"),
        };
        let _ = writeln!(
            out,
            "<rect x=\"{rx:.1}\" y=\"{ry:.1}\" width=\"{cw:.1}\" height=\"{ch:.1}\" fill=\"{fill}\" stroke=\"white\"/>"
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" {FONT} text-anchor=\"middle\" fill=\"{ink}\">{label}</text>",
            rx + cw / 2.0,
            ry + ch / 2.0 + 4.0
        );
    }
    // legend
    let lx = left + cw * xs.len() as f64 + 20.0;
    for s in 0..=10 {
        let v = 1.0 - s as f64 / 10.0;
        let _ = writeln!(
            out,
            "<rect x=\"{lx:.1}\" y=\"{:.1}\" width=\"14\" height=\"10\" fill=\"{}\"/>",
            top + 10.0 * s as f64,
            ramp(v)
        );
    }
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" {FONT}>1</text>", lx + 18.0, top + 9.0);
    let _ = writeln!(out, "<text x=\"{:.1}\" y=\"{:.1}\" {FONT}>0</text>", lx + 18.0, top + 109.0);
    out.push_str("</svg>\n");
    out
}

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Copy)]
pub struct Axes<'a> {
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log_x: bool,
    pub log_y: bool,
}

const PALETTE: [&str; 4] = ["#1f4e9c", "#c0392b", "#27864a", "#7d3c98"];

/// Line plot; non-positive values are dropped on log axes.
pub fn line_plot(title: &str, axes: Axes<'_>, series: &[Series<'_>]) -> String {
    let (w, h) = (520.0, 340.0);
    let (left, right, top, bottom) = (70.0, 20.0, 36.0, 50.0);
    let tx = |v: f64| if axes.log_x { v.log10() } else { v };
    let ty = |v: f64| if axes.log_y { v.log10() } else { v };
    let usable = |(x, y): &(f64, f64)| {
        x.is_finite() && y.is_finite() && (!axes.log_x || *x > 0.0) && (!axes.log_y || *y > 0.0)
    };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().filter(|p| usable(p)).map(|&(x, y)| (tx(x), ty(y))))
        .collect();
    let bounds = |vals: Vec<f64>| -> (f64, f64) {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = bounds(pts.iter().map(|p| p.0).collect());
    let (y0, y1) = bounds(pts.iter().map(|p| p.1).collect());
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(out, "<text x=\"{left:.1}\" y=\"20\" font-family=\"sans-serif\" font-size=\"13\">{}</text>", escape(title));
    let _ = writeln!(
        out,
        "<path d=\"M{:.1},{:.1} L{:.1},{:.1} L{:.1},{:.1}\" fill=\"none\" stroke=\"black\"/>",
        left,
        top,
        left,
        h - bottom,
        w - right,
        h - bottom
    );
    let label = |v: f64, log: bool| if log { format!("{:.0e}", 10f64.powf(v)) } else { format!("{v:.3}") };
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" {FONT} text-anchor=\"middle\">{}</text>",
            px(xv),
            h - bottom + 16.0,
            label(xv, axes.log_x)
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" {FONT} text-anchor=\"end\">{}</text>",
            left - 6.0,
            py(yv) + 4.0,
            label(yv, axes.log_y)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" {FONT} text-anchor=\"middle\">{}</text>",
        (left + w - right) / 2.0,
        h - 12.0,
        escape(axes.x_label)
    );
    let mid = (top + h - bottom) / 2.0;
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{mid:.1}\" {FONT} text-anchor=\"middle\" transform=\"rotate(-90 16 {mid:.1})\">{}</text>",
        escape(axes.y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|p| usable(p))
            .map(|&(x, y)| format!("{:.1},{:.1}", px(tx(x)), py(ty(y))))
            .collect();
        if !coords.is_empty() {
            let _ = writeln!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\"/>",
                coords.join(" ")
            );
            for c in &coords {
                let (cx, cy) = c.split_once(',').unwrap_or(("0", "0"));
                let _ = writeln!(out, "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"2.5\" fill=\"{colour}\"/>");
            }
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" {FONT} fill=\"{colour}\">{}</text>",
            left + 10.0,
            top + 14.0 * (i as f64 + 1.0),
            escape(s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_places_every_cell() {
        let svg = heatmap("t", "x", "y", &[(0.5, 0.1, Some(0.2)), (0.5, 0.2, None), (1.0, 0.1, Some(1.0))]);
        assert_eq!(svg.matches("<rect x=").count(), 3 + 11);
        assert!(svg.contains(">0.20<") && svg.contains(">-<"));
        assert_eq!(svg, heatmap("t", "x", "y", &[(0.5, 0.1, Some(0.2)), (0.5, 0.2, None), (1.0, 0.1, Some(1.0))]));
    }

    /// No tag repeats an attribute (XML forbids it and browsers differ).
    fn assert_unique_attributes(svg: &str) {
        for tag in svg.split('<').skip(1) {
            let head = tag.split('>').next().unwrap();
            let mut names: Vec<&str> = head
                .split('"')
                .step_by(2)
                .filter_map(|chunk| chunk.trim_end().strip_suffix('='))
                .map(|chunk| chunk.rsplit(' ').next().unwrap())
                .collect();
            let total = names.len();
            names.sort_unstable();
            names.dedup();
            assert_eq!(names.len(), total, "duplicate attribute in <{head}>");
        }
    }

    #[test]
    fn attributes_are_unique() {
        assert_unique_attributes(&heatmap("t", "x", "y", &[(0.5, 0.1, Some(0.2))]));
        let axes = Axes { x_label: "t", y_label: "risk", log_x: true, log_y: false };
        let series = [Series { name: "a", points: vec![(1.0, 1.0), (10.0, 3.0)] }];
        assert_unique_attributes(&line_plot("r", axes, &series));
    }

    #[test]
    fn line_plot_skips_nonpositive_on_log_axes() {
        let axes = Axes { x_label: "t", y_label: "risk", log_x: true, log_y: true };
        let svg = line_plot("r", axes, &[Series { name: "a", points: vec![(1.0, 1.0), (10.0, 0.0), (100.0, 50.0)] }]);
        assert_eq!(svg.matches("<circle").count(), 2);
        let empty = line_plot("r", axes, &[]);
        assert!(empty.ends_with("</svg>\n"));
    }
}
