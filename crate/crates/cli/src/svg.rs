//! Static SVG rendering of trajectories.

use std::fmt::Write;

use indoor_slam::Trajectory;

const SIZE: f64 = 800.0;
const MARGIN: f64 = 20.0;

/// Draws the estimate in blue and, when given, ground truth dashed grey.
/// The y axis points up.
pub fn render(estimate: &Trajectory, ground_truth: Option<&Trajectory>) -> String {
    let all = estimate
        .points()
        .iter()
        .chain(ground_truth.map_or(&[][..], |g| g.points()));
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p.pose.x);
        y0 = y0.min(p.pose.y);
        x1 = x1.max(p.pose.x);
        y1 = y1.max(p.pose.y);
    }
    if !x0.is_finite() {
        (x0, y0, x1, y1) = (0.0, 0.0, 1.0, 1.0);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let to_px = |x: f64, y: f64| (MARGIN + (x - x0) * scale, SIZE - MARGIN - (y - y0) * scale);

    let polyline = |t: &Trajectory, style: &str| {
        let mut pts = String::new();
        for p in t.points() {
            let (px, py) = to_px(p.pose.x, p.pose.y);
            let _ = write!(pts, "{px:.2},{py:.2} ");
        }
        format!("<polyline fill=\"none\" {style} points=\"{}\"/>\n", pts.trim_end())
    };

    let mut doc = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    if let Some(g) = ground_truth {
        doc.push_str(&polyline(g, "stroke=\"#888\" stroke-width=\"2\" stroke-dasharray=\"6 4\""));
    }
    doc.push_str(&polyline(estimate, "stroke=\"#1f5fbf\" stroke-width=\"1.5\""));
    doc.push_str("</svg>\n");
    doc
}
