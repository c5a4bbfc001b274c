//! SVG drawing of a layout on its grid. User units are metres with north up,
//! so marker coordinates equal cell centroids.

use std::fmt::Write;

use wflo_core::farm::FarmGrid;
use wflo_core::mrf::Layout;
use wflo_core::wind::flow_vector;

/// Output depends only on the arguments.
pub fn render_svg(grid: &FarmGrid, layout: &Layout, wind_from: Option<f64>) -> anyhow::Result<String> {
    if layout.len() != grid.len() {
        anyhow::bail!("layout has {} cells, grid has {}", layout.len(), grid.len());
    }
    let side = grid.cell_side();
    let half = side / 2.0;
    let (mut min_x, mut min_y, mut max_x, mut max_y) =
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for c in grid.cells() {
        min_x = min_x.min(c.x - half);
        min_y = min_y.min(c.y - half);
        max_x = max_x.max(c.x + half);
        max_y = max_y.max(c.y + half);
    }
    let pad = 0.05 * (max_x - min_x).max(max_y - min_y);
    let (w, h) = (max_x - min_x + 2.0 * pad, max_y - min_y + 2.0 * pad);
    let stroke = side / 40.0;

    let mut s = String::new();
    // y is negated so that the viewBox origin sits at the top-left
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="800" height="{}">"#,
        min_x - pad,
        -(max_y + pad),
        w,
        h,
        (800.0 * h / w).round()
    )?;
    writeln!(s, r#"<g transform="scale(1,-1)">"#)?;
    writeln!(
        s,
        r##"<g id="cells" fill="none" stroke="#bbbbbb" stroke-width="{stroke}">"##
    )?;
    for c in grid.cells() {
        writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{side}" height="{side}"/>"#,
            c.x - half,
            c.y - half
        )?;
    }
    writeln!(s, "</g>")?;
    writeln!(s, r##"<g id="turbines" fill="#1f5fa8">"##)?;
    for i in layout.selected() {
        let (x, y) = grid.centroid(i);
        writeln!(s, r#"<circle data-cell="{i}" cx="{x}" cy="{y}" r="{}"/>"#, side * 0.3)?;
    }
    writeln!(s, "</g>")?;
    if let Some(dir) = wind_from {
        let (fx, fy) = flow_vector(dir);
        let (cx, cy) = ((min_x + max_x) / 2.0, (min_y + max_y) / 2.0);
        let len = 0.4 * (max_x - min_x).min(max_y - min_y);
        let (x1, y1) = (cx - fx * len / 2.0, cy - fy * len / 2.0);
        let (x2, y2) = (cx + fx * len / 2.0, cy + fy * len / 2.0);
        // arrowhead wings at +-150 degrees from the flow
        let head = len / 8.0;
        let wing = |sign: f64| {
            let (c, sn) = (150f64.to_radians().cos(), sign * 150f64.to_radians().sin());
            (x2 + head * (fx * c - fy * sn), y2 + head * (fx * sn + fy * c))
        };
        let (ax, ay) = wing(1.0);
        let (bx, by) = wing(-1.0);
        writeln!(
            s,
            r##"<g id="wind" stroke="#c0392b" stroke-width="{}" fill="none" opacity="0.7"><path d="M {x1} {y1} L {x2} {y2} M {ax} {ay} L {x2} {y2} L {bx} {by}"/></g>"##,
            stroke * 4.0
        )?;
    }
    writeln!(s, "</g>")?;
    writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="{}">{} turbines</text>"#,
        min_x,
        -(max_y + pad * 0.3),
        pad * 0.5,
        layout.count()
    )?;
    writeln!(s, "</svg>")?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use wflo_core::farm::make_square_grid;

    #[test]
    fn empty_layout_draws_only_the_grid() {
        let g = make_square_grid(2000.0, 10).unwrap();
        let svg = render_svg(&g, &Layout::empty(100), None).unwrap();
        assert_eq!(svg.matches("<rect").count(), 100);
        assert_eq!(svg.matches("<circle").count(), 0);
        assert!(!svg.contains("id=\"wind\""));
    }

    #[test]
    fn markers_sit_on_centroids() {
        let g = make_square_grid(2000.0, 10).unwrap();
        let l = Layout::from_indices(100, &[0, 99]).unwrap();
        let svg = render_svg(&g, &l, Some(0.0)).unwrap();
        assert!(svg.contains(r#"data-cell="0" cx="100" cy="100""#));
        assert!(svg.contains(r#"data-cell="99" cx="1900" cy="1900""#));
        assert!(svg.contains("id=\"wind\""));
        assert_eq!(svg, render_svg(&g, &l, Some(0.0)).unwrap());
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let g = make_square_grid(2000.0, 10).unwrap();
        assert!(render_svg(&g, &Layout::empty(99), None).is_err());
    }
}
