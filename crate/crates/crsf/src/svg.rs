//! Deterministic SVG rendering of a sampled CRSF over the surface's chart
//! coordinates: one color per connected component, cycle edges bold, with
//! periodic (wrap-around) edges split into two stubs so tori and cylinders
//! draw sensibly.

use crate::graph::{OrientedCrsf, WeightedGraph};
use crate::surface::SurfaceModel;
use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub struct SvgOptions {
    pub stroke_width: f64,
    pub cycles_only: bool,
    /// Pixels per chart unit.
    pub unit: f64,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions { stroke_width: 2.0, cycles_only: false, unit: 24.0 }
    }
}

const PALETTE: [&str; 12] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
    "#bcbd22", "#7f7f7f", "#aec7e8", "#ff9896",
];

fn fmt_coord(x: f64) -> String {
    format!("{:.2}", x)
}

/// Renders the sample as standalone SVG text. Output depends only on the
/// inputs, so reruns are byte-identical.
pub fn render_crsf(
    g: &WeightedGraph,
    surf: &SurfaceModel,
    crsf: &OrientedCrsf,
    opts: &SvgOptions,
) -> String {
    let pos = &surf.vertex_positions;
    assert_eq!(pos.len(), g.vertex_count(), "one chart position per vertex");
    let (mut min_x, mut min_y) = (f64::INFINITY, f64::INFINITY);
    let (mut max_x, mut max_y) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pos {
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    let span_x = (max_x - min_x).max(1.0);
    let span_y = (max_y - min_y).max(1.0);
    // wrap periods: positions live on a fundamental domain of grid pitch 1
    let (per_x, per_y) = (span_x + 1.0, span_y + 1.0);
    let pad = 1.0;
    let width = (span_x + 2.0 * pad) * opts.unit;
    let height = (span_y + 2.0 * pad) * opts.unit;
    let to_px = |x: f64, y: f64| {
        ((x - min_x + pad) * opts.unit, (max_y - y + pad) * opts.unit)
    };

    let comp = crsf.component_ids(g);
    let mut on_cycle = vec![false; g.edge_count()];
    for cyc in crsf.cycles(g) {
        for e in cyc {
            on_cycle[e.edge] = true;
        }
    }

    let mut body = String::new();
    for (v, arc) in crsf.arcs().iter().enumerate() {
        let &e = match arc {
            Some(e) => e,
            None => continue,
        };
        let cyc = on_cycle[e.edge];
        if opts.cycles_only && !cyc {
            continue;
        }
        let color = PALETTE[comp[v] % PALETTE.len()];
        let sw = if cyc { opts.stroke_width * 2.5 } else { opts.stroke_width };
        let (x1, y1) = pos[g.tail(e)];
        let (x2, y2) = pos[g.head(e)];
        // a displacement beyond half a period means the edge wraps: draw a
        // stub from each endpoint toward the unwrapped image of the other
        let mut dx = x2 - x1;
        let mut dy = y2 - y1;
        let mut wrapped = false;
        if dx.abs() > per_x / 2.0 {
            dx -= dx.signum() * per_x;
            wrapped = true;
        }
        if dy.abs() > per_y / 2.0 {
            dy -= dy.signum() * per_y;
            wrapped = true;
        }
        let mut segment = |ax: f64, ay: f64, bx: f64, by: f64| {
            let (px1, py1) = to_px(ax, ay);
            let (px2, py2) = to_px(bx, by);
            writeln!(
                body,
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\" stroke-linecap=\"round\"/>",
                fmt_coord(px1),
                fmt_coord(py1),
                fmt_coord(px2),
                fmt_coord(py2),
                color,
                sw
            )
            .unwrap();
        };
        if wrapped {
            segment(x1, y1, x1 + dx, y1 + dy);
            segment(x2, y2, x2 - dx, y2 - dy);
        } else {
            segment(x1, y1, x2, y2);
        }
    }

    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
        fmt_coord(width),
        fmt_coord(height),
        fmt_coord(width),
        fmt_coord(height),
        body
    )
}
