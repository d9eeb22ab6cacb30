//! Minimal deterministic SVG for 2-D trajectories.
//!
//! Elements are emitted in input order and coordinates are printed with a
//! fixed number of decimals, so equal figures render to equal bytes.

use std::fmt::Write;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stroke {
    /// Source-side pass (inversion or anchors), dashed.
    Inversion,
    /// Regeneration, solid.
    Regeneration,
    /// Sampling on the straightened field.
    Straight,
    /// Sampling on the curved base field.
    Curved,
}

impl Stroke {
    fn style(&self) -> (&'static str, &'static str) {
        match self {
            Stroke::Inversion => ("#1f77b4", " stroke-dasharray=\"6 4\""),
            Stroke::Regeneration => ("#d62728", ""),
            Stroke::Straight => ("#2ca02c", ""),
            Stroke::Curved => ("#7f7f7f", ""),
        }
    }

    fn class(&self) -> &'static str {
        match self {
            Stroke::Inversion => "inversion",
            Stroke::Regeneration => "regeneration",
            Stroke::Straight => "straight",
            Stroke::Curved => "curved",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Polyline {
    pub stroke: Stroke,
    pub points: Vec<[f64; 2]>,
}

/// A mixture component drawn as a circle of radius `sigma` around its mean.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Component {
    pub label: String,
    pub center: [f64; 2],
    pub sigma: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Figure {
    pub title: String,
    pub components: Vec<Component>,
    pub polylines: Vec<Polyline>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn of(fig: &Figure) -> Frame {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for c in &fig.components {
            xs.extend([c.center[0] - c.sigma, c.center[0] + c.sigma]);
            ys.extend([c.center[1] - c.sigma, c.center[1] + c.sigma]);
        }
        for p in fig.polylines.iter().flat_map(|l| &l.points) {
            xs.push(p[0]);
            ys.push(p[1]);
        }
        let span = |v: &[f64]| {
            let lo = v
                .iter()
                .copied()
                .filter(|x| x.is_finite())
                .fold(f64::INFINITY, f64::min);
            let hi = v
                .iter()
                .copied()
                .filter(|x| x.is_finite())
                .fold(f64::NEG_INFINITY, f64::max);
            if lo.is_finite() && hi > lo {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            } else if lo.is_finite() {
                (lo - 1.0, lo + 1.0)
            } else {
                (-1.0, 1.0)
            }
        };
        let (x0, x1) = span(&xs);
        let (y0, y1) = span(&ys);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(fig: &Figure) -> String {
    let f = Frame::of(fig);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(s, "<title>{}</title>", escape(&fig.title));
    let _ = writeln!(s, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<rect class=\"axes\" x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let tick = |s: &mut String, x: f64, y: f64, anchor: &str, v: f64| {
        let _ = writeln!(
            s,
            "<text x=\"{x:.3}\" y=\"{y:.3}\" font-size=\"11\" text-anchor=\"{anchor}\">{v:.2}</text>"
        );
    };
    tick(&mut s, MARGIN, HEIGHT - MARGIN + 16.0, "start", f.x0);
    tick(&mut s, WIDTH - MARGIN, HEIGHT - MARGIN + 16.0, "end", f.x1);
    tick(&mut s, MARGIN - 4.0, HEIGHT - MARGIN, "end", f.y0);
    tick(&mut s, MARGIN - 4.0, MARGIN + 4.0, "end", f.y1);

    for c in &fig.components {
        let (cx, cy) = (f.px(c.center[0]), f.py(c.center[1]));
        let rx = (f.px(c.center[0] + c.sigma) - cx).abs();
        let ry = (f.py(c.center[1] + c.sigma) - cy).abs();
        let _ = writeln!(
            s,
            "<ellipse class=\"component\" cx=\"{cx:.3}\" cy=\"{cy:.3}\" rx=\"{rx:.3}\" ry=\"{ry:.3}\" fill=\"#eeeeee\" stroke=\"#999999\"/>"
        );
        let _ = writeln!(
            s,
            "<text x=\"{cx:.3}\" y=\"{cy:.3}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            escape(&c.label)
        );
    }

    for line in &fig.polylines {
        let (color, dash) = line.stroke.style();
        let pts: Vec<String> = line
            .points
            .iter()
            .map(|p| format!("{:.3},{:.3}", f.px(p[0]), f.py(p[1])))
            .collect();
        let _ = writeln!(
            s,
            "<polyline class=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>",
            line.stroke.class(),
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}
