//! Dependency-free SVG rendering of 2-d projections.
//!
//! A zonotope projects to a 2-d zonotope by keeping two coordinate rows; its
//! outline is sampled as support points over 64 directions, which yields the
//! exact polygon up to direction resolution. All numbers are formatted with
//! fixed precision so output bytes are reproducible.

use zonoreach::linalg::Mat;
use zonoreach::zonotope::{IntervalBox, Zonotope};

const DIRECTIONS: usize = 64;
const CANVAS: f64 = 640.0;
const MARGIN: f64 = 40.0;

/// Project onto (axis_x, axis_y) by selecting the two rows of the generator
/// matrix.
fn project(z: &Zonotope, axis_x: usize, axis_y: usize) -> Zonotope {
    let mut rows = Mat::zeros(2, z.dim());
    rows.set(0, axis_x, 1.0);
    rows.set(1, axis_y, 1.0);
    z.linear_image(&rows).expect("projection dimensions agree")
}

/// Support points of a 2-d zonotope over evenly spaced directions,
/// deduplicated while preserving order.
fn outline(z: &Zonotope) -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(DIRECTIONS);
    for k in 0..DIRECTIONS {
        let a = std::f64::consts::TAU * k as f64 / DIRECTIONS as f64;
        let d = [a.cos(), a.sin()];
        let p = z.support_point(&d);
        let q = (p[0], p[1]);
        if pts.last() != Some(&q) {
            pts.push(q);
        }
    }
    pts
}

struct Frame {
    min_x: f64,
    min_y: f64,
    scale: f64,
}

impl Frame {
    fn fit(xs: &[(f64, f64)]) -> Frame {
        let mut min_x = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        for &(x, y) in xs {
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
        }
        let span = (max_x - min_x).max(max_y - min_y).max(1e-12);
        Frame { min_x, min_y, scale: (CANVAS - 2.0 * MARGIN) / span }
    }

    fn to_canvas(&self, p: (f64, f64)) -> (f64, f64) {
        (
            MARGIN + (p.0 - self.min_x) * self.scale,
            CANVAS - MARGIN - (p.1 - self.min_y) * self.scale,
        )
    }
}

fn polygon(frame: &Frame, pts: &[(f64, f64)], style: &str) -> String {
    let coords: Vec<String> = pts
        .iter()
        .map(|&p| {
            let (x, y) = frame.to_canvas(p);
            format!("{x:.3},{y:.3}")
        })
        .collect();
    format!("  <polygon points=\"{}\" {style}/>\n", coords.join(" "))
}

/// SVG overlay of the final inner-approximation, the simulation-hull box and
/// optionally the boundary pieces of the last step, projected onto two axes.
pub fn render_projection(
    inner: &Zonotope,
    hull: &IntervalBox,
    pieces: &[Zonotope],
    axis_x: usize,
    axis_y: usize,
) -> String {
    let inner2 = project(inner, axis_x, axis_y);
    let inner_pts = outline(&inner2);
    let hull_pts = vec![
        (hull.lower[axis_x], hull.lower[axis_y]),
        (hull.upper[axis_x], hull.lower[axis_y]),
        (hull.upper[axis_x], hull.upper[axis_y]),
        (hull.lower[axis_x], hull.upper[axis_y]),
    ];
    let piece_outlines: Vec<Vec<(f64, f64)>> = pieces
        .iter()
        .map(|p| outline(&project(p, axis_x, axis_y)))
        .collect();

    let mut all: Vec<(f64, f64)> = Vec::new();
    all.extend(&inner_pts);
    all.extend(&hull_pts);
    for o in &piece_outlines {
        all.extend(o);
    }
    let frame = Frame::fit(&all);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CANVAS}\" height=\"{CANVAS}\" viewBox=\"0 0 {CANVAS} {CANVAS}\">\n"
    ));
    svg.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&polygon(
        &frame,
        &hull_pts,
        "fill=\"none\" stroke=\"#2a9d2a\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"",
    ));
    for o in &piece_outlines {
        svg.push_str(&polygon(
            &frame,
            o,
            "fill=\"none\" stroke=\"#d62728\" stroke-width=\"0.8\"",
        ));
    }
    svg.push_str(&polygon(
        &frame,
        &inner_pts,
        "fill=\"#1f77b4\" fill-opacity=\"0.35\" stroke=\"#1f77b4\" stroke-width=\"1.5\"",
    ));
    svg.push_str(&format!(
        "  <text x=\"{MARGIN}\" y=\"24\" font-family=\"monospace\" font-size=\"14\">axes x{} / x{}</text>\n",
        axis_x + 1,
        axis_y + 1
    ));
    svg.push_str("</svg>\n");
    svg
}
