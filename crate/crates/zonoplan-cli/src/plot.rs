//! Deterministic SVG rendering of a scenario: regions colored by role,
//! the planned trajectory as a polyline with step markers. Output is
//! byte-identical across runs for fixed input.

use zonoplan::reach::RegionRole;
use zonoplan::solve::PlanSolution;

use crate::scenario::BuiltScenario;

/// Role palette (documented in the README):
/// free `#f2efe9`, obstacle `#9e9e9e`, goal `#66bb6a`, key `#42a5f5`,
/// door `#ef5350`, charge `#ffca28`, exchange `#ef9a9a`.
pub fn role_color(role: RegionRole) -> &'static str {
    match role {
        RegionRole::Free => "#f2efe9",
        RegionRole::Obstacle => "#9e9e9e",
        RegionRole::Goal => "#66bb6a",
        RegionRole::Key => "#42a5f5",
        RegionRole::Door => "#ef5350",
        RegionRole::Charge => "#ffca28",
        RegionRole::Exchange => "#ef9a9a",
    }
}

const W: f64 = 640.0;
const MARGIN: f64 = 20.0;

pub fn render_svg(built: &BuiltScenario, plan: Option<&PlanSolution>) -> String {
    let lo = &built.cfg.workspace.lo;
    let hi = &built.cfg.workspace.hi;
    let (x0, x1, y0, y1) = (lo[0], hi[0], lo[1], hi[1]);
    let scale = (W - 2.0 * MARGIN) / (x1 - x0);
    let h = (y1 - y0) * scale + 2.0 * MARGIN;
    let px = |x: f64| MARGIN + (x - x0) * scale;
    // SVG y axis points down.
    let py = |y: f64| h - MARGIN - (y - y0) * scale;

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{h:.1}\" viewBox=\"0 0 {W} {h:.1}\">\n"
    ));
    s.push_str(&format!(
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#ffffff\" stroke=\"#333333\"/>\n",
        px(x0),
        py(y1),
        (x1 - x0) * scale,
        (y1 - y0) * scale
    ));

    // Region boxes (position-plane hull of each region at step 0).
    let map = built.schedule.at(0);
    for region in &map.regions {
        if let Ok((rlo, rhi)) = region.polytope.interval_hull_lp() {
            let (bx0, bx1, by0, by1) = (rlo[0], rhi[0], rlo[1], rhi[1]);
            s.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\" fill-opacity=\"0.45\" stroke=\"#555555\" stroke-width=\"0.5\"/>\n",
                px(bx0),
                py(by1),
                (bx1 - bx0) * scale,
                (by1 - by0) * scale,
                role_color(region.role)
            ));
            s.push_str(&format!(
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" fill=\"#333333\">{}</text>\n",
                px(bx0) + 2.0,
                py(by1) + 10.0,
                region.id
            ));
        }
    }
    // Keep-out carve-outs.
    for k in &built.cfg.map.keepouts {
        if k.dims.len() >= 2 && k.dims[0] == 0 && k.dims[1] == 1 {
            s.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#777777\"/>\n",
                px(k.lo[0]),
                py(k.hi[1]),
                (k.hi[0] - k.lo[0]) * scale,
                (k.hi[1] - k.lo[1]) * scale
            ));
        }
    }

    if let Some(plan) = plan {
        // For the two-agent scenario draw both vehicles.
        let tracks: Vec<(usize, &str)> = if built.two_agent.is_some() {
            vec![(0, "#1565c0"), (4, "#b71c1c")]
        } else {
            vec![(0, "#1565c0")]
        };
        for (off, color) in tracks {
            let pts: Vec<String> = plan
                .states
                .iter()
                .map(|x| format!("{:.2},{:.2}", px(x[off]), py(x[off + 1])))
                .collect();
            s.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                pts.join(" ")
            ));
            for (k, x) in plan.states.iter().enumerate() {
                s.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.4\" fill=\"{color}\"/>\n",
                    px(x[off]),
                    py(x[off + 1])
                ));
                if k == 0 {
                    s.push_str(&format!(
                        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4.0\" fill=\"none\" stroke=\"{color}\"/>\n",
                        px(x[off]),
                        py(x[off + 1])
                    ));
                }
            }
        }
    }
    s.push_str("</svg>\n");
    s
}
