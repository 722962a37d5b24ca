//! Deterministic SVG rendering of a domain with analysis overlays.
//!
//! Output is advisory: figures are for human inspection and only their
//! well-formedness is ever asserted. Everything is emitted in a fixed
//! order with fixed-precision coordinates so the same inputs produce the
//! same bytes. Three-dimensional domains are drawn as their middle z
//! slice, which keeps the renderer honest without pretending to be a 3D
//! viewer.

use crate::domain::RasterDomain;
use crate::field::FieldSpace;
use crate::grid::Cell;
use crate::whitney::WhitneyDecomposition;

/// A separating ball with its end cells (grid indices).
#[derive(Debug, Clone)]
pub struct BallOverlay {
    pub center: [f64; 3],
    pub radius: f64,
    pub end_cells: Vec<usize>,
}

/// A vector field to draw as arrows, component-major over `space` dofs.
pub struct QuiverOverlay<'a> {
    pub space: &'a FieldSpace,
    pub u: &'a [f64],
}

/// Optional layers stacked over the mask.
#[derive(Default)]
pub struct SvgLayers<'a> {
    pub whitney: Option<&'a WhitneyDecomposition>,
    pub ball: Option<BallOverlay>,
    pub quiver: Option<QuiverOverlay<'a>>,
}

struct Frame {
     scale: f64,
     y_top: f64,
     z_slice: usize,
}

impl Frame {
    /// World x to pixel x.
    fn px(&self, x: f64) -> f64 {
        x * self.scale
    }
    /// World y to pixel y, flipped so the figure reads north-up.
    fn py(&self, y: f64) -> f64 {
        (self.y_top - y) * self.scale
    }
}

fn fmt(v: f64) -> String {
    // Fixed precision keeps the output byte-stable across runs.
    format!("{:.3}", v)
}

/// Render the domain and layers to a complete SVG document.
pub fn render_svg(domain: &RasterDomain, layers: &SvgLayers) -> String {
    let g = domain.grid();
    let h = g.h;
    let dim = domain.dim();
    let world_w = g.nx as f64 * h;
    let world_h = g.ny as f64 * h;
    let scale = 1000.0 / world_w.max(world_h);
    let frame = Frame {
        scale,
        y_top: g.origin[1] + world_h,
        z_slice: if dim == 3 { g.nz / 2 } else { 0 },
    };
    let pw = world_w * scale;
    let ph = world_h * scale;
    let mut s = String::with_capacity(1 << 16);
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        fmt(pw),
        fmt(ph),
        fmt(pw),
        fmt(ph)
    ));
    s.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
        fmt(pw),
        fmt(ph)
    ));

    // Mask: merge each row of true cells into horizontal runs.
    s.push_str("<g fill=\"#b8c4d9\">\n");
    let z = frame.z_slice;
    for y in 0..g.ny {
        let mut x = 0usize;
        while x < g.nx {
            if !domain.is_true_cell([x, y, z]) {
                x += 1;
                continue;
            }
            let start = x;
            while x < g.nx && domain.is_true_cell([x, y, z]) {
                x += 1;
            }
            let wx = g.origin[0] + start as f64 * h;
            let wy = g.origin[1] + (y + 1) as f64 * h;
            s.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>\n",
                fmt(frame.px(wx)),
                fmt(frame.py(wy)),
                fmt((x - start) as f64 * h * scale),
                fmt(h * scale)
            ));
        }
    }
    s.push_str("</g>\n");

    if let Some(w) = layers.whitney {
        s.push_str("<g fill=\"none\" stroke=\"#5b4b8a\" stroke-width=\"0.6\">\n");
        for cube in &w.cubes {
            if dim == 3 && !(cube.anchor[2] <= z && z < cube.anchor[2] + cube.side_cells) {
                continue;
            }
            let wx = g.origin[0] + cube.anchor[0] as f64 * h;
            let wy = g.origin[1] + (cube.anchor[1] + cube.side_cells) as f64 * h;
            let side = cube.side_cells as f64 * h * scale;
            s.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>\n",
                fmt(frame.px(wx)),
                fmt(frame.py(wy)),
                fmt(side),
                fmt(side)
            ));
        }
        s.push_str("</g>\n");
    }

    if let Some(ball) = &layers.ball {
        s.push_str("<g fill=\"#e2a348\" fill-opacity=\"0.55\">\n");
        for &idx in &ball.end_cells {
            let c = g.cell(idx);
            if dim == 3 && c[2] != z {
                continue;
            }
            let wx = g.origin[0] + c[0] as f64 * h;
            let wy = g.origin[1] + (c[1] + 1) as f64 * h;
            s.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/>\n",
                fmt(frame.px(wx)),
                fmt(frame.py(wy)),
                fmt(h * scale),
                fmt(h * scale)
            ));
        }
        s.push_str("</g>\n");
        let cx = fmt(frame.px(ball.center[0]));
        let cy = fmt(frame.py(ball.center[1]));
        s.push_str(&format!(
            "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"{}\" fill=\"none\" stroke=\"#c23b22\" stroke-width=\"1.4\"/>\n",
            fmt(ball.radius * scale)
        ));
        s.push_str(&format!(
            "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"{}\" fill=\"none\" stroke=\"#c23b22\" stroke-width=\"0.8\" stroke-dasharray=\"4 3\"/>\n",
            fmt(2.0 * ball.radius * scale)
        ));
        s.push_str(&format!(
            "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"2.2\" fill=\"#c23b22\"/>\n"
        ));
    }

    if let Some(q) = &layers.quiver {
        let space = q.space;
        let n = space.n();
        let d = space.dim();
        let stride = (g.nx.max(g.ny) / 48).max(1);
        let mut umax = 0.0f64;
        for dof in 0..n {
            for i in 0..d.min(2) {
                umax = umax.max(q.u[i * n + dof].abs());
            }
        }
        let arrow = if umax > 0.0 {
            0.9 * stride as f64 * h / umax
        } else {
            0.0
        };
        s.push_str("<g stroke=\"#1f3552\" stroke-width=\"0.9\" fill=\"#1f3552\">\n");
        for (dof, &idx) in space.dof_cells().iter().enumerate() {
            let c = g.cell(idx as usize);
            if c[0] % stride != 0 || c[1] % stride != 0 || (dim == 3 && c[2] != z) {
                continue;
            }
            let ux = q.u[dof];
            let uy = if d > 1 { q.u[n + dof] } else { 0.0 };
            if ux == 0.0 && uy == 0.0 {
                continue;
            }
            let p = g.center(c);
            let x0 = frame.px(p[0]);
            let y0 = frame.py(p[1]);
            let x1 = frame.px(p[0] + arrow * ux);
            let y1 = frame.py(p[1] + arrow * uy);
            s.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>\n",
                fmt(x0),
                fmt(y0),
                fmt(x1),
                fmt(y1)
            ));
            s.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"1.1\"/>\n",
                fmt(x1),
                fmt(y1)
            ));
        }
        s.push_str("</g>\n");
    }

    s.push_str("</svg>\n");
    s
}

/// Convenience: cells of a cube overlay for tests.
pub fn cube_cells(anchor: Cell, side: usize) -> Vec<Cell> {
    let mut v = Vec::new();
    for dx in 0..side {
        for dy in 0..side {
            v.push([anchor[0] + dx, anchor[1] + dy, anchor[2]]);
        }
    }
    v
}
