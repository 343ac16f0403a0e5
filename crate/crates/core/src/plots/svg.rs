//! Minimal standalone SVG renderings of the plot series.

use std::fmt::Write as _;

use super::{BiasBox, DiagonalPoint, ShiftPoint, IDEAL_SERIES};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Distinct methods in first-appearance order.
fn methods<'a>(names: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for n in names {
        if !out.contains(&n) {
            out.push(n);
        }
    }
    out
}

struct Frame {
    svg: String,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        let mut f = Frame {
            svg: String::new(),
            x: pad(x),
            y: pad(y),
        };
        let _ = write!(
            f.svg,
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n<text x=\"{:.2}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
            (LEFT + W - RIGHT) / 2.0,
            esc(title)
        );
        let (x0, y0, x1, y1) = (LEFT, H - BOTTOM, W - RIGHT, TOP);
        let _ = writeln!(
            f.svg,
            "<path d=\"M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}\" fill=\"none\" stroke=\"black\"/>"
        );
        for i in 0..=5 {
            let t = i as f64 / 5.0;
            let xv = f.x.0 + t * (f.x.1 - f.x.0);
            let yv = f.y.0 + t * (f.y.1 - f.y.0);
            let (px, py) = (f.px(xv), f.py(yv));
            let _ = writeln!(
                f.svg,
                "<path d=\"M{px:.2},{y0:.2} L{px:.2},{:.2}\" stroke=\"black\"/><text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{xv:.2}</text>",
                y0 + 4.0,
                y0 + 16.0
            );
            let _ = writeln!(
                f.svg,
                "<path d=\"M{:.2},{py:.2} L{x0:.2},{py:.2}\" stroke=\"black\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{yv:.2}</text>",
                x0 - 4.0,
                x0 - 6.0,
                py + 4.0
            );
        }
        let _ = writeln!(
            f.svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            (x0 + x1) / 2.0,
            H - 12.0,
            esc(xlabel)
        );
        let _ = writeln!(
            f.svg,
            "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">{}</text>",
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            esc(ylabel)
        );
        f
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        H - BOTTOM - (v - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str, dashed: bool) {
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect();
        let dash = if dashed { " stroke-dasharray=\"4 3\"" } else { "" };
        let _ = writeln!(
            self.svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>",
            coords.join(" ")
        );
    }

    fn legend(&mut self, names: &[&str], colors: &[&str]) {
        let x = W - RIGHT + 15.0;
        for (i, (n, c)) in names.iter().zip(colors).enumerate() {
            let y = TOP + 10.0 + 16.0 * i as f64;
            let _ = writeln!(
                self.svg,
                "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"12\" height=\"8\" fill=\"{c}\"/><text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
                y - 8.0,
                x + 18.0,
                y,
                esc(n)
            );
        }
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

pub fn diagonal_svg(points: &[DiagonalPoint]) -> String {
    let mut f = Frame::new("Diagonal", "true prevalence", "estimated prevalence", (0.0, 1.0), (0.0, 1.0));
    let names = methods(points.iter().map(|p| p.method.as_str()));
    let mut colors = Vec::new();
    let mut k = 0;
    for name in &names {
        let pts: Vec<&DiagonalPoint> = points.iter().filter(|p| p.method == *name).collect();
        let ideal = *name == IDEAL_SERIES;
        let color = if ideal {
            "#7f7f7f"
        } else {
            k += 1;
            PALETTE[(k - 1) % PALETTE.len()]
        };
        colors.push(color);
        if !ideal {
            for p in &pts {
                let (x, lo, hi) = (f.px(p.x), f.py((p.mean - p.std).max(0.0)), f.py((p.mean + p.std).min(1.0)));
                let _ = writeln!(
                    f.svg,
                    "<path d=\"M{x:.2},{lo:.2} L{x:.2},{hi:.2}\" stroke=\"{color}\" stroke-opacity=\"0.4\"/>"
                );
            }
        }
        let line: Vec<(f64, f64)> = pts.iter().map(|p| (p.x, p.mean)).collect();
        f.polyline(&line, color, ideal);
    }
    f.legend(&names, &colors);
    f.finish()
}

pub fn shift_svg(points: &[ShiftPoint]) -> String {
    let xr = range(points.iter().map(|p| p.bin_center));
    let yr = range(points.iter().map(|p| p.mean_error));
    let xr = if xr.0.is_finite() { (xr.0.min(0.0), xr.1) } else { (0.0, 1.0) };
    let yr = if yr.0.is_finite() { (0.0, yr.1) } else { (0.0, 1.0) };
    let mut f = Frame::new("Error by shift", "distribution shift", "mean error", xr, yr);
    let names = methods(points.iter().map(|p| p.method.as_str()));
    let mut colors = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        colors.push(color);
        let line: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| p.method == *name)
            .map(|p| (p.bin_center, p.mean_error))
            .collect();
        f.polyline(&line, color, false);
    }
    f.legend(&names, &colors);
    f.finish()
}

pub fn bias_svg(boxes: &[BiasBox]) -> String {
    let yr = range(boxes.iter().flat_map(|b| [b.lo_whisker, b.hi_whisker]));
    let yr = if yr.0.is_finite() { (yr.0.min(0.0), yr.1.max(0.0)) } else { (-1.0, 1.0) };
    let bins = methods(boxes.iter().map(|b| b.bin.as_str()));
    let names = methods(boxes.iter().map(|b| b.method.as_str()));
    let slots = (bins.len() * names.len()).max(1) as f64;
    let mut f = Frame::new("Bias", "true prevalence bin", "signed error", (0.0, slots), yr);
    let zero = f.py(0.0);
    let _ = writeln!(
        f.svg,
        "<path d=\"M{LEFT:.2},{zero:.2} L{:.2},{zero:.2}\" stroke=\"#7f7f7f\" stroke-dasharray=\"4 3\"/>",
        W - RIGHT
    );
    let colors: Vec<&str> = (0..names.len()).map(|i| PALETTE[i % PALETTE.len()]).collect();
    for (bi, bin) in bins.iter().enumerate() {
        let label_x = f.px((bi * names.len()) as f64 + names.len() as f64 / 2.0);
        let _ = writeln!(
            f.svg,
            "<text x=\"{label_x:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"9\">{}</text>",
            H - BOTTOM + 28.0,
            esc(bin)
        );
        for (mi, name) in names.iter().enumerate() {
            let Some(b) = boxes.iter().find(|b| b.bin == *bin && b.method == *name) else {
                continue;
            };
            let slot = (bi * names.len() + mi) as f64;
            let (x0, x1, xm) = (f.px(slot + 0.2), f.px(slot + 0.8), f.px(slot + 0.5));
            let c = colors[mi];
            let (lo, q1, md, q3, hi) = (f.py(b.lo_whisker), f.py(b.q1), f.py(b.median), f.py(b.q3), f.py(b.hi_whisker));
            let _ = writeln!(
                f.svg,
                "<path d=\"M{xm:.2},{lo:.2} L{xm:.2},{q1:.2} M{xm:.2},{q3:.2} L{xm:.2},{hi:.2}\" stroke=\"{c}\"/>\n<rect x=\"{x0:.2}\" y=\"{q3:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{c}\" fill-opacity=\"0.3\" stroke=\"{c}\"/>\n<path d=\"M{x0:.2},{md:.2} L{x1:.2},{md:.2}\" stroke=\"{c}\" stroke-width=\"2\"/>",
                x1 - x0,
                (q1 - q3).max(0.0)
            );
        }
    }
    f.legend(&names, &colors);
    f.finish()
}

#[cfg(test)]
mod tests {
    use super::super::tests::grid_report;
    use super::super::*;

    #[test]
    fn svgs_are_deterministic_and_escaped() {
        let reps = vec![
            ("a<b".to_string(), grid_report(|t| t * 0.9)),
            ("c&d".to_string(), grid_report(|t| t)),
        ];
        let d = diagonal_data(&reps, 1, 10).unwrap();
        let s = shift_data(&reps, None, ErrorMeasure::Ae, ErrorMeasure::Ae, 5).unwrap();
        let b = bias_box_data(&reps, 1, 5).unwrap();
        for (x, y) in [
            (diagonal_svg(&d), diagonal_svg(&d)),
            (shift_svg(&s), shift_svg(&s)),
            (bias_svg(&b), bias_svg(&b)),
        ] {
            assert_eq!(x, y);
            assert!(x.starts_with("<?xml"));
            assert!(x.trim_end().ends_with("</svg>"));
            assert!(x.contains("a&lt;b") && x.contains("c&amp;d"));
            assert!(!x.contains("NaN") && !x.contains("inf"));
            let doc = roxmltree::Document::parse(&x).unwrap();
            assert_eq!(doc.root_element().tag_name().name(), "svg");
        }
    }

    #[test]
    fn empty_series_still_render() {
        assert!(shift_svg(&[]).ends_with("</svg>\n"));
        assert!(bias_svg(&[]).ends_with("</svg>\n"));
        assert!(diagonal_svg(&[]).ends_with("</svg>\n"));
    }
}
