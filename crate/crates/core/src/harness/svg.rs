use std::fmt::Write as _;
use std::path::Path;

use super::write_atomic;
use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::linalg::Vector;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 20.0;
const CURVE_POINTS: usize = 256;

/// Scatter plot of planar `points` over the boundary of `set`, framed by an axis box.
/// The view covers the set and every point; output bytes depend only on the inputs.
pub fn emit_scatter(points: &[Vector], set: &ConstraintSet, path: &Path) -> Result<()> {
    let svg = render_scatter(points, set)?;
    write_atomic(path, svg.as_bytes())
}

pub(crate) fn render_scatter(points: &[Vector], set: &ConstraintSet) -> Result<String> {
    if set.dim() != 2 {
        return Err(Error::Unsupported(format!(
            "scatter plots need p = 2, got {}",
            set.dim()
        )));
    }
    if let Some(p) = points.iter().find(|p| p.len() != 2) {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: p.len(),
        });
    }
    let boundary = set.boundary_polygon(CURVE_POINTS)?;
    let mut half = set.radii().1 * 1.1;
    for p in points {
        half = half.max(p[0].abs()).max(p[1].abs());
    }
    let scale = (SIZE - 2.0 * MARGIN) / (2.0 * half);
    let px = |x: f64, y: f64| (MARGIN + (x + half) * scale, MARGIN + (half - y) * scale);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let (x0, y0) = px(-half, half);
    let _ = writeln!(
        out,
        r#"<rect class="axes" x="{x0:.3}" y="{y0:.3}" width="{w:.3}" height="{w:.3}" fill="none" stroke="black"/>"#,
        w = 2.0 * half * scale
    );
    let (ox, oy) = px(0.0, 0.0);
    let _ = writeln!(
        out,
        r#"<path class="origin" d="M {:.3} {oy:.3} H {:.3} M {ox:.3} {:.3} V {:.3}" stroke="lightgray"/>"#,
        MARGIN,
        SIZE - MARGIN,
        MARGIN,
        SIZE - MARGIN
    );
    let corners: Vec<String> = boundary
        .iter()
        .map(|&(x, y)| {
            let (a, b) = px(x, y);
            format!("{a:.3},{b:.3}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polygon class="boundary" points="{}" fill="none" stroke="goldenrod" stroke-width="2"/>"#,
        corners.join(" ")
    );
    for p in points {
        let (a, b) = px(p[0], p[1]);
        let _ = writeln!(
            out,
            r#"<circle cx="{a:.3}" cy="{b:.3}" r="1.5" fill="steelblue" fill-opacity="0.5"/>"#
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::preset;

    fn boundary_points(svg: &str) -> Vec<(f64, f64)> {
        let line = svg
            .lines()
            .find(|l| l.contains(r#"class="boundary""#))
            .unwrap();
        let start = line.find(r#"points=""#).unwrap() + 8;
        let end = start + line[start..].find('"').unwrap();
        line[start..end]
            .split(' ')
            .map(|pair| {
                let (a, b) = pair.split_once(',').unwrap();
                (a.parse().unwrap(), b.parse().unwrap())
            })
            .collect()
    }

    #[test]
    fn boundary_only_plot() {
        let ball = ConstraintSet::ball(2, 0.5).unwrap();
        let svg = render_scatter(&[], &ball).unwrap();
        assert!(!svg.contains("<circle"));
        assert_eq!(boundary_points(&svg).len(), CURVE_POINTS);
    }

    #[test]
    fn origin_lands_inside_the_circle() {
        let ball = ConstraintSet::ball(2, 0.5).unwrap();
        let svg = render_scatter(&[Vector::zeros(2)], &ball).unwrap();
        let centre = (SIZE / 2.0, SIZE / 2.0);
        let dot = svg.lines().find(|l| l.starts_with("<circle")).unwrap();
        assert!(dot.contains(&format!(r#"cx="{:.3}" cy="{:.3}""#, centre.0, centre.1)));
        let radius = boundary_points(&svg)
            .iter()
            .map(|(x, y)| ((x - centre.0).powi(2) + (y - centre.1).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!(radius > 100.0);
    }

    #[test]
    fn triangle_has_three_corners() {
        let set = preset("triangle")
            .unwrap()
            .potential()
            .unwrap()
            .set()
            .clone();
        let svg = render_scatter(&[Vector::from_row_slice(&[0.1, 0.1])], &set).unwrap();
        let drawn = boundary_points(&svg);
        assert_eq!(drawn.len(), 3);
        // invert the pixel map to recover data coordinates
        let half = set.radii().1 * 1.1;
        let scale = (SIZE - 2.0 * MARGIN) / (2.0 * half);
        let mut data: Vec<(f64, f64)> = drawn
            .iter()
            .map(|(a, b)| ((a - MARGIN) / scale - half, half - (b - MARGIN) / scale))
            .collect();
        data.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let expect = [(-0.3, -0.3), (-0.3, 0.9), (0.9, -0.3)];
        for (got, want) in data.iter().zip(expect) {
            assert!(
                (got.0 - want.0).abs() < 1e-2 && (got.1 - want.1).abs() < 1e-2,
                "{got:?}"
            );
        }
        assert_eq!(
            svg,
            render_scatter(&[Vector::from_row_slice(&[0.1, 0.1])], &set).unwrap()
        );
    }

    #[test]
    fn rejects_other_dimensions() {
        let ball = ConstraintSet::ball(3, 0.5).unwrap();
        assert!(matches!(
            render_scatter(&[], &ball),
            Err(Error::Unsupported(_))
        ));
    }
}
