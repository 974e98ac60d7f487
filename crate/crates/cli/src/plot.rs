//! Top-down SVG rendering of sparse and dense trajectories.
//!
//! Vertices are drawn as labeled circles, each visitation step as an arrow
//! (step 1 enters the start vertex from outside the path) and the dense
//! samples as a single polyline.

use std::fmt::Write as _;

use trajcap_core::trajectory::{DenseTrajectory, SparseTrajectory};

const CANVAS: f64 = 800.0;
const MARGIN: f64 = 60.0;
const VERTEX_RADIUS: f64 = 7.0;

/// Upper-case Roman numeral for `n >= 1`.
pub fn roman(mut n: usize) -> String {
    const TABLE: [(usize, &str); 13] = [
        (1000, "M"),
        (900, "CM"),
        (500, "D"),
        (400, "CD"),
        (100, "C"),
        (90, "XC"),
        (50, "L"),
        (40, "XL"),
        (10, "X"),
        (9, "IX"),
        (5, "V"),
        (4, "IV"),
        (1, "I"),
    ];
    let mut out = String::new();
    for (value, sym) in TABLE {
        while n >= value {
            out.push_str(sym);
            n -= value;
        }
    }
    out
}

/// Maps map coordinates onto the canvas, north up, preserving aspect.
struct Frame {
    min_x: f64,
    max_y: f64,
    scale: f64,
}

impl Frame {
    fn fit(points: &[(f64, f64)]) -> Self {
        let (mut lo_x, mut lo_y, mut hi_x, mut hi_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for &(x, y) in points {
            lo_x = lo_x.min(x);
            lo_y = lo_y.min(y);
            hi_x = hi_x.max(x);
            hi_y = hi_y.max(y);
        }
        let span = (hi_x - lo_x).max(hi_y - lo_y).max(1e-9);
        Self {
            min_x: lo_x,
            max_y: hi_y,
            scale: (CANVAS - 2.0 * MARGIN) / span,
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (MARGIN + (x - self.min_x) * self.scale, MARGIN + (self.max_y - y) * self.scale)
    }
}

/// Pulls both ends of a segment in by `inset` so arrow heads stay outside
/// the vertex markers.
fn inset_segment(a: (f64, f64), b: (f64, f64), inset: f64) -> ((f64, f64), (f64, f64)) {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = dx.hypot(dy);
    if len <= 2.0 * inset {
        return (a, b);
    }
    let (ux, uy) = (dx / len, dy / len);
    ((a.0 + ux * inset, a.1 + uy * inset), (b.0 - ux * inset, b.1 - uy * inset))
}

pub fn render(sparse: Option<&SparseTrajectory>, dense: Option<&DenseTrajectory>) -> String {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    if let Some(s) = sparse {
        pts.extend(s.vertices().iter().map(|v| (v.x, v.y)));
    }
    if let Some(d) = dense {
        pts.extend(d.samples().iter().map(|p| (p.protagonist_pos.x, p.protagonist_pos.y)));
    }
    if pts.is_empty() {
        pts.push((0.0, 0.0));
    }
    let frame = Frame::fit(&pts);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">"#
    );
    svg.push_str(concat!(
        "<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"7\" markerHeight=\"7\" orient=\"auto-start-reverse\">",
        "<path d=\"M 0 0 L 10 5 L 0 10 z\" fill=\"#d62728\"/></marker></defs>\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    if let Some(d) = dense {
        let coords: Vec<String> = d
            .samples()
            .iter()
            .map(|p| {
                let (x, y) = frame.map(p.protagonist_pos.x, p.protagonist_pos.y);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r##"<polyline class="dense" fill="none" stroke="#1f77b4" stroke-width="1.5" points="{}"/>"##,
            coords.join(" ")
        );
    }

    if let Some(s) = sparse {
        if let Ok(path) = s.expand_visitation() {
            let at = |i: usize| frame.map(s.vertices()[i].x, s.vertices()[i].y);
            for (step, &v) in path.iter().enumerate() {
                let to = at(v);
                let d = if step == 0 {
                    let from = (to.0 - 40.0, to.1 + 40.0);
                    let (a, b) = inset_segment(from, to, VERTEX_RADIUS + 2.0);
                    format!("M {:.2} {:.2} L {:.2} {:.2}", a.0, a.1, b.0, b.1)
                } else if path[step - 1] == v {
                    // Revisiting the same vertex: a small loop above it.
                    format!(
                        "M {:.2} {:.2} a 12 12 0 1 1 0.01 0",
                        to.0 - 0.005,
                        to.1 - VERTEX_RADIUS - 2.0
                    )
                } else {
                    let (a, b) = inset_segment(at(path[step - 1]), to, VERTEX_RADIUS + 2.0);
                    format!("M {:.2} {:.2} L {:.2} {:.2}", a.0, a.1, b.0, b.1)
                };
                let _ = writeln!(
                    svg,
                    r##"<path class="order-arrow" data-step="{}" d="{d}" fill="none" stroke="#d62728" stroke-width="2" marker-end="url(#arrow)"/>"##,
                    step + 1
                );
            }
        }
        for (i, v) in s.vertices().iter().enumerate() {
            let (x, y) = frame.map(v.x, v.y);
            let _ = writeln!(
                svg,
                r#"<circle class="vertex" cx="{x:.2}" cy="{y:.2}" r="{VERTEX_RADIUS}" fill="black"/>"#
            );
            let _ = writeln!(
                svg,
                r#"<text class="vertex-label" x="{:.2}" y="{:.2}" font-family="serif" font-size="16">{}</text>"#,
                x + VERTEX_RADIUS + 3.0,
                y - VERTEX_RADIUS - 3.0,
                roman(i + 1)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roman_numerals() {
        let got: Vec<String> = (1..=10).map(roman).collect();
        assert_eq!(got, ["I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX", "X"]);
        assert_eq!(roman(1994), "MCMXCIV");
    }

    #[test]
    fn frame_is_north_up() {
        let f = Frame::fit(&[(0.0, 0.0), (10.0, 10.0)]);
        let (_, y_south) = f.map(0.0, 0.0);
        let (_, y_north) = f.map(0.0, 10.0);
        assert!(y_north < y_south);
    }
}
