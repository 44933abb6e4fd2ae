//! Plot-ready output for a 2D projection: a CSV any plotting tool can read,
//! and a self-contained SVG scatter for a quick look without one.

use crate::pca::Projection2D;

/// CSV with header `token_id,label,x,y`, one row per projected point.
/// `labels` marks cluster membership (false = first token, true = second).
pub fn projection_csv(token_ids: &[usize], labels: &[bool], proj: &Projection2D) -> String {
    assert_eq!(token_ids.len(), proj.points.len());
    assert_eq!(labels.len(), proj.points.len());
    let mut out = String::from("token_id,label,x,y\n");
    for ((&id, &label), p) in token_ids.iter().zip(labels).zip(&proj.points) {
        out.push_str(&format!(
            "{id},{},{:.9},{:.9}\n",
            if label { 1 } else { 0 },
            p[0],
            p[1]
        ));
    }
    out
}

/// A standalone SVG scatter of the projection, colored by label.
pub fn projection_svg(labels: &[bool], proj: &Projection2D, title: &str) -> String {
    assert_eq!(labels.len(), proj.points.len());
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const MARGIN: f64 = 48.0;

    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &proj.points {
        min_x = min_x.min(p[0]);
        max_x = max_x.max(p[0]);
        min_y = min_y.min(p[1]);
        max_y = max_y.max(p[1]);
    }
    // Guard flat extents so the mapping below never divides by zero.
    if max_x - min_x < 1e-12 {
        min_x -= 0.5;
        max_x += 0.5;
    }
    if max_y - min_y < 1e-12 {
        min_y -= 0.5;
        max_y += 0.5;
    }
    let sx = (W - 2.0 * MARGIN) / (max_x - min_x);
    let sy = (H - 2.0 * MARGIN) / (max_y - min_y);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\" \
         text-anchor=\"middle\">{title}</text>\n",
        W / 2.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
         text-anchor=\"middle\">component 1 ({:.1}% var)</text>\n",
        W / 2.0,
        H - 12.0,
        proj.explained[0] * 100.0
    ));
    svg.push_str(&format!(
        "  <text x=\"16\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">component 2 ({:.1}% var)</text>\n",
        H / 2.0,
        H / 2.0,
        proj.explained[1] * 100.0
    ));
    for (p, &label) in proj.points.iter().zip(labels) {
        let cx = MARGIN + (p[0] - min_x) * sx;
        let cy = H - MARGIN - (p[1] - min_y) * sy;
        let color = if label { "#f58518" } else { "#4c78a8" };
        svg.push_str(&format!(
            "  <circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"4\" fill=\"{color}\" \
             fill-opacity=\"0.7\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
