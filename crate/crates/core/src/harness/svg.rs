//! SVG figures: graph edges dotted underneath, tree edges solid on top,
//! nodes colored by hop layer.

use std::fmt::Write as _;

use crate::spt::RoutingTree;
use crate::topology::GraphInstance;

const SCALE: f64 = 8.0;
const MARGIN: f64 = 24.0;
const FAILURE_COLOR: &str = "#e0115f";

// viridis, sampled at five stops
const STOPS: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn layer_color(layer: usize, max_layer: usize) -> String {
    let t = if max_layer == 0 {
        0.0
    } else {
        layer.min(max_layer) as f64 / max_layer as f64
    };
    let pos = t * (STOPS.len() - 1) as f64;
    let i = (pos.floor() as usize).min(STOPS.len() - 2);
    let f = pos - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let c = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(a.0, b.0), c(a.1, b.1), c(a.2, b.2))
}

/// Renders `g` with the tree overlaid. Every graph edge appears once as a
/// dotted `edge` line and every node once as a `node` circle.
pub fn render_svg(g: &GraphInstance, tree: &RoutingTree, title: &str) -> String {
    let w = f64::from(g.params().width() - 1) * SCALE + 2.0 * MARGIN;
    let px = |c: u32| MARGIN + f64::from(c) * SCALE;
    // y grows upward on the grid
    let py = |c: u32| w - MARGIN - f64::from(c) * SCALE;
    let max_layer = tree.predicted_layers.values().copied().max().unwrap_or(0);

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        h = w + 20.0
    )
    .unwrap();
    writeln!(out, "<title>{}</title>", escape(title)).unwrap();
    out.push_str(concat!(
        "<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" ",
        "markerWidth=\"5\" markerHeight=\"5\" orient=\"auto-start-reverse\">",
        "<path d=\"M 0 0 L 10 5 L 0 10 z\" fill=\"#333\"/></marker></defs>\n"
    ));
    writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##).unwrap();

    out.push_str("<g stroke=\"#9a9a9a\" stroke-width=\"0.6\" stroke-dasharray=\"2,3\">\n");
    for (a, b) in g.edges() {
        let (va, vb) = (g.location(a), g.location(b));
        writeln!(
            out,
            r#"<line class="edge" x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
            px(va.x),
            py(va.y),
            px(vb.x),
            py(vb.y)
        )
        .unwrap();
    }
    out.push_str("</g>\n");

    out.push_str("<g stroke=\"#333\" stroke-width=\"1.4\" marker-end=\"url(#arrow)\">\n");
    for (&v, &p) in &tree.parent {
        writeln!(
            out,
            r#"<line class="tree" x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
            px(v.x),
            py(v.y),
            px(p.x),
            py(p.y)
        )
        .unwrap();
    }
    out.push_str("</g>\n");

    out.push_str("<g stroke=\"#222\" stroke-width=\"0.5\">\n");
    for &v in g.nodes() {
        let layer = tree.layer(v).unwrap_or(0);
        let (fill, r, extra) = if v == g.sink() {
            ("#000000".to_string(), 6.0, r##" stroke="#ff8c00" stroke-width="2.5""##)
        } else if tree.failures.contains(&v) {
            (FAILURE_COLOR.to_string(), 4.0, "")
        } else {
            (layer_color(layer, max_layer), 4.0, "")
        };
        writeln!(
            out,
            r#"<circle class="node" cx="{}" cy="{}" r="{r}" fill="{fill}"{extra}><title>({}, {}) layer {layer}</title></circle>"#,
            px(v.x),
            py(v.y),
            v.x,
            v.y
        )
        .unwrap();
    }
    out.push_str("</g>\n");
    writeln!(
        out,
        r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="12">{} (max layer {max_layer}, {} dead ends)</text>"#,
        w + 12.0,
        escape(title),
        tree.failures.len()
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridParams, Location};
    use crate::oracle::oracle_tree;
    use crate::qtable::QTable;
    use crate::spt::build_tree;
    use crate::topology::generate_graph;

    #[test]
    fn palette_endpoints() {
        assert_eq!(layer_color(0, 4), "#440154");
        assert_eq!(layer_color(4, 4), "#fde725");
        assert_eq!(layer_color(0, 0), "#440154");
    }

    #[test]
    fn glyph_counts_match_graph() {
        let g = generate_graph(GridParams::new(30, 8.0).unwrap(), 40, Location::new(15, 15), 2).unwrap();
        let t = build_tree(&g, &QTable::new(*g.params()));
        let svg = render_svg(&g, &t, "fresh <table>");
        assert_eq!(svg.matches("class=\"node\"").count(), g.len());
        assert_eq!(svg.matches("class=\"edge\"").count(), g.edge_count());
        assert_eq!(svg.matches("class=\"tree\"").count(), t.parent.len());
        assert!(svg.contains("fresh &lt;table&gt;"));
        let o = oracle_tree(&g).unwrap();
        let svg = render_svg(&g, &o, "oracle");
        assert_eq!(svg.matches("class=\"tree\"").count(), g.len() - 1);
    }

    #[test]
    fn singleton_has_one_sink_glyph() {
        let g = generate_graph(GridParams::new(10, 2.0).unwrap(), 1, Location::new(5, 5), 0).unwrap();
        let svg = render_svg(&g, &build_tree(&g, &QTable::new(*g.params())), "one");
        assert_eq!(svg.matches("class=\"node\"").count(), 1);
        assert!(svg.contains("#ff8c00"));
    }

    #[test]
    fn failures_get_their_own_color() {
        let p = GridParams::new(10, 2.0).unwrap();
        let g = crate::topology::GraphInstance::new(p, Location::new(9, 9), [Location::new(0, 0), Location::new(0, 1)])
            .unwrap();
        let svg = render_svg(&g, &build_tree(&g, &QTable::new(p)), "dead");
        assert_eq!(svg.matches(FAILURE_COLOR).count(), 2);
    }
}
