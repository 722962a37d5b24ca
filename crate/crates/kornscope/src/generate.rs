//! Analytic domain generators and rasterization.
//!
//! Each generator describes an open set in the plane or in space; `rasterize`
//! marks a cell true exactly when its center lies in the analytic set, pads
//! the bounding box with two rings of false cells, and validates the result
//! as a [`RasterDomain`]. `resolution` is cells per unit length (`h = 1/res`).
//!
//! The zoo:
//!
//! * `disk` — diameter-1 disk centered at the origin,
//! * `square` — unit square,
//! * `l_shape` — unit square minus its open upper-right quadrant,
//! * `cusp(alpha)` — `{0 < y < 1, 0 < x^2 < y^(2 alpha)}`, an outward cusp
//!   sharpening at the origin; `alpha > 1`,
//! * `flat_cusp(alpha)` — the same cusp profile extruded in z over (0,1),
//! * `rooms(neck, count)` — unit-square rooms in a row joined by corridors
//!   of width `neck` and length 1/2,
//! * `punctured_disk(levels)` — radius-1 disk minus, for each `k <= levels`,
//!   `k!` single cells equally spaced on the circle of radius `1 - 2^-k`,
//! * `punctured_slab(levels)` — radius-1 disk times `(-1,1)` minus the
//!   vertical columns `{puncture} x [0,1)` over the same puncture points.

use crate::domain::RasterDomain;
use crate::grid::Grid;
use crate::{Error, Result};

/// Analytic domain family with parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum DomainSpec {
    Disk,
    Square,
    LShape,
    Cusp { alpha: f64 },
    FlatCusp { alpha: f64 },
    Rooms { neck: f64, count: usize },
    PuncturedDisk { levels: usize },
    PuncturedSlab { levels: usize },
}

impl DomainSpec {
    /// Validate generator parameters.
    pub fn validate(&self) -> Result<()> {
        match *self {
            DomainSpec::Cusp { alpha } | DomainSpec::FlatCusp { alpha } => {
                if !(alpha > 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "cusp exponent alpha must exceed 1, got {alpha}"
                    )));
                }
            }
            DomainSpec::Rooms { neck, count } => {
                if !(neck > 0.0 && neck < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "corridor width must lie in (0, 1), got {neck}"
                    )));
                }
                if count < 2 {
                    return Err(Error::InvalidParameter(format!(
                        "room count must be at least 2, got {count}"
                    )));
                }
            }
            DomainSpec::PuncturedDisk { levels } | DomainSpec::PuncturedSlab { levels } => {
                if levels < 1 || levels > 8 {
                    return Err(Error::InvalidParameter(format!(
                        "puncture levels must lie in 1..=8, got {levels}"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::FlatCusp { .. } | DomainSpec::PuncturedSlab { .. } => 3,
            _ => 2,
        }
    }

    /// Canonical identifier used in CSV rows and file names.
    pub fn id(&self) -> String {
        match self {
            DomainSpec::Disk => "disk".into(),
            DomainSpec::Square => "square".into(),
            DomainSpec::LShape => "l_shape".into(),
            DomainSpec::Cusp { alpha } => format!("cusp(alpha={alpha})"),
            DomainSpec::FlatCusp { alpha } => format!("flat_cusp(alpha={alpha})"),
            DomainSpec::Rooms { neck, count } => format!("rooms(neck={neck},count={count})"),
            DomainSpec::PuncturedDisk { levels } => format!("punctured_disk(levels={levels})"),
            DomainSpec::PuncturedSlab { levels } => format!("punctured_slab(levels={levels})"),
        }
    }

    /// Analytic bounding box (lower corner, upper corner).
    pub fn bbox(&self) -> ([f64; 3], [f64; 3]) {
        match *self {
            DomainSpec::Disk => ([-0.5, -0.5, 0.0], [0.5, 0.5, 0.0]),
            DomainSpec::Square | DomainSpec::LShape => ([0.0, 0.0, 0.0], [1.0, 1.0, 0.0]),
            DomainSpec::Cusp { .. } => ([-1.0, 0.0, 0.0], [1.0, 1.0, 0.0]),
            DomainSpec::FlatCusp { .. } => ([-1.0, 0.0, 0.0], [1.0, 1.0, 1.0]),
            DomainSpec::Rooms { count, .. } => {
                let w = count as f64 + (count as f64 - 1.0) * 0.5;
                ([0.0, 0.0, 0.0], [w, 1.0, 0.0])
            }
            DomainSpec::PuncturedDisk { .. } => ([-1.0, -1.0, 0.0], [1.0, 1.0, 0.0]),
            DomainSpec::PuncturedSlab { .. } => ([-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]),
        }
    }

    /// Analytic membership of a point (punctures excluded only at rasterization,
    /// since single points carry no measure).
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let (x, y, z) = (p[0], p[1], p[2]);
        match *self {
            DomainSpec::Disk => x * x + y * y < 0.25,
            DomainSpec::Square => (0.0..1.0).contains(&x) && (0.0..1.0).contains(&y),
            DomainSpec::LShape => {
                (0.0..1.0).contains(&x) && (0.0..1.0).contains(&y) && !(x > 0.5 && y > 0.5)
            }
            DomainSpec::Cusp { alpha } => {
                y > 0.0 && y < 1.0 && x * x > 0.0 && x * x < y.powf(2.0 * alpha)
            }
            DomainSpec::FlatCusp { alpha } => {
                y > 0.0
                    && y < 1.0
                    && z > 0.0
                    && z < 1.0
                    && x * x > 0.0
                    && x * x < y.powf(2.0 * alpha)
            }
            DomainSpec::Rooms { neck, count } => {
                if !(0.0..1.0).contains(&y) {
                    return false;
                }
                for k in 0..count {
                    let x0 = k as f64 * 1.5;
                    if x > x0 && x < x0 + 1.0 {
                        return true;
                    }
                }
                let half = neck / 2.0;
                if (y - 0.5).abs() < half {
                    for k in 0..count - 1 {
                        let x0 = k as f64 * 1.5 + 1.0;
                        if x >= x0 && x <= x0 + 0.5 {
                            return true;
                        }
                    }
                }
                false
            }
            DomainSpec::PuncturedDisk { .. } => x * x + y * y < 1.0,
            DomainSpec::PuncturedSlab { .. } => x * x + y * y < 1.0 && z > -1.0 && z < 1.0,
        }
    }

    /// Puncture points for the punctured families: `k!` points equally spaced
    /// on the circle of radius `1 - 2^-k`, for `k = 1..=levels`.
    pub fn punctures(&self) -> Vec<[f64; 2]> {
        let levels = match *self {
            DomainSpec::PuncturedDisk { levels } | DomainSpec::PuncturedSlab { levels } => levels,
            _ => return Vec::new(),
        };
        let mut pts = Vec::new();
        for k in 1..=levels {
            let m: usize = (1..=k).product();
            let r = 1.0 - 0.5f64.powi(k as i32);
            for j in 0..m {
                let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
                pts.push([r * th.cos(), r * th.sin()]);
            }
        }
        pts
    }
}

const PAD: usize = 2;

/// Rasterize a generator at `resolution` cells per unit length.
pub fn rasterize(spec: &DomainSpec, resolution: usize) -> Result<RasterDomain> {
    spec.validate()?;
    if resolution < 8 {
        return Err(Error::InvalidParameter(format!(
            "resolution must be at least 8, got {resolution}"
        )));
    }
    let h = 1.0 / resolution as f64;
    let (lo, hi) = spec.bbox();
    let dim = spec.dim();
    let mut n = [1usize; 3];
    let mut origin = [0.0f64; 3];
    for a in 0..dim {
        let extent = hi[a] - lo[a];
        n[a] = (extent * resolution as f64).round() as usize + 2 * PAD;
        origin[a] = lo[a] - PAD as f64 * h;
    }
    let grid = if dim == 2 {
        Grid::new2d(n[0], n[1], h, [origin[0], origin[1]])
    } else {
        Grid::new3d(n[0], n[1], n[2], h, origin)
    };

    let mut mask = vec![false; grid.len()];
    for idx in 0..grid.len() {
        mask[idx] = spec.contains(grid.center(grid.cell(idx)));
    }

    // Punctured families: each puncture removes exactly the one cell that
    // contains it. A collision (two punctures in one cell) means the
    // resolution cannot represent the spec.
    let punctures = spec.punctures();
    if !punctures.is_empty() {
        let mut removed = Vec::with_capacity(punctures.len());
        for p in &punctures {
            let c = grid
                .locate([p[0], p[1], if dim == 3 { origin[2] + 0.5 * h } else { 0.0 }])
                .ok_or_else(|| Error::InvalidParameter("puncture outside grid".into()))?;
            removed.push([c[0], c[1]]);
        }
        removed.sort_unstable();
        let before = removed.len();
        removed.dedup();
        if removed.len() != before {
            return Err(Error::InvalidParameter(format!(
                "puncture collision: resolution {resolution} cannot separate all {} punctures",
                before
            )));
        }
        for rc in &removed {
            match *spec {
                DomainSpec::PuncturedDisk { .. } => {
                    let idx = grid.idx([rc[0], rc[1], 0]);
                    debug_assert!(mask[idx]);
                    mask[idx] = false;
                }
                DomainSpec::PuncturedSlab { .. } => {
                    for zc in 0..grid.nz {
                        let zc_center = origin[2] + (zc as f64 + 0.5) * h;
                        if (0.0..1.0).contains(&zc_center) {
                            mask[grid.idx([rc[0], rc[1], zc])] = false;
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    RasterDomain::new(grid, mask).map_err(|e| match e {
        Error::Disconnected(msg) => Error::Disconnected(format!(
            "{} at resolution {resolution}; the generator needs a finer grid",
            msg
        )),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_area_converges() {
        let d = rasterize(&DomainSpec::Disk, 128).unwrap();
        let exact = std::f64::consts::PI / 4.0 * 1.0;
        assert!((d.measure() - exact).abs() / exact < 0.02, "measure {}", d.measure());
    }

    #[test]
    fn disk_cell_count_matches_resolution() {
        let d = rasterize(&DomainSpec::Disk, 64).unwrap();
        let expect = std::f64::consts::PI * 64.0 * 64.0 / 4.0;
        let got = d.true_count() as f64;
        assert!((got - expect).abs() / expect < 0.03, "got {got}, expect {expect}");
    }

    #[test]
    fn square_exact_cell_count() {
        let d = rasterize(&DomainSpec::Square, 32).unwrap();
        assert_eq!(d.true_count(), 32 * 32);
    }

    #[test]
    fn l_shape_removes_quadrant() {
        let d = rasterize(&DomainSpec::LShape, 32).unwrap();
        assert_eq!(d.true_count(), 32 * 32 - 16 * 16);
    }

    #[test]
    fn cusp_narrows_quadratically() {
        let d = rasterize(&DomainSpec::Cusp { alpha: 2.0 }, 128).unwrap();
        let g = d.grid();
        // Width of the true set in row y ~ 0.5 is about 2 * 0.25 = 0.5.
        let row = g.locate([0.01, 0.5, 0.0]).unwrap()[1];
        let count = (0..g.nx).filter(|&x| d.is_true_cell([x, row, 0])).count();
        let width = count as f64 * g.h;
        assert!((width - 0.5).abs() < 0.05, "width {width}");
        // Deep rows are empty: centers satisfy x^2 < y^4 only once y^2 > h/2.
        let deep = g.locate([0.0, 0.02, 0.0]).unwrap()[1];
        assert_eq!((0..g.nx).filter(|&x| d.is_true_cell([x, deep, 0])).count(), 0);
    }

    #[test]
    fn alpha_at_most_one_rejected() {
        assert!(rasterize(&DomainSpec::Cusp { alpha: 1.0 }, 64).is_err());
    }

    #[test]
    fn rooms_too_coarse_disconnects() {
        // neck = 1/64 is half a cell at resolution 32: corridors vanish.
        let err = rasterize(&DomainSpec::Rooms { neck: 1.0 / 64.0, count: 2 }, 32);
        assert!(matches!(err, Err(Error::Disconnected(_))));
    }

    #[test]
    fn rooms_connected_at_adequate_resolution() {
        let d = rasterize(&DomainSpec::Rooms { neck: 0.0625, count: 4 }, 64).unwrap();
        assert_eq!(d.dim(), 2);
        // 4 rooms of 64x64 cells plus 3 corridors of 32x4.
        assert_eq!(d.true_count(), 4 * 64 * 64 + 3 * 32 * 4);
    }

    #[test]
    fn punctured_disk_removes_factorial_cells() {
        let spec = DomainSpec::PuncturedDisk { levels: 3 };
        assert_eq!(spec.punctures().len(), 1 + 2 + 6);
        let punctured = rasterize(&spec, 128).unwrap().true_count();
        // The radius-1 disk at resolution 128 rasterizes to the same lattice
        // as the diameter-1 disk at resolution 256, so that count serves as
        // the unpunctured reference.
        let unpunctured = rasterize(&DomainSpec::Disk, 256).unwrap().true_count();
        assert_eq!(punctured + 9, unpunctured);
    }

    #[test]
    fn punctured_slab_is_3d_and_connected() {
        let d = rasterize(&DomainSpec::PuncturedSlab { levels: 2 }, 16).unwrap();
        assert_eq!(d.dim(), 3);
    }

    #[test]
    fn flat_cusp_extrudes_cusp() {
        let d3 = rasterize(&DomainSpec::FlatCusp { alpha: 2.0 }, 32).unwrap();
        let d2 = rasterize(&DomainSpec::Cusp { alpha: 2.0 }, 32).unwrap();
        // Every z-slice of the flat cusp away from the z walls matches the 2D cusp.
        let g3 = d3.grid();
        let g2 = d2.grid();
        let mid_z = g3.nz / 2;
        let mut slice_count = 0;
        for y in 0..g3.ny.min(g2.ny) {
            for x in 0..g3.nx.min(g2.nx) {
                if d3.is_true_cell([x, y, mid_z]) {
                    slice_count += 1;
                    assert!(d2.is_true_cell([x, y, 0]));
                }
            }
        }
        assert!(slice_count > 0);
    }

    #[test]
    fn rasterization_monotone_for_convex_generators() {
        // True region at resolution r, refined, lands inside the true region
        // at resolution 2r dilated by one cell.
        for spec in [DomainSpec::Disk, DomainSpec::Square] {
            let coarse = rasterize(&spec, 32).unwrap();
            let fine = rasterize(&spec, 64).unwrap();
            let gc = coarse.grid();
            let gf = fine.grid();
            for idx in 0..gc.len() {
                if !coarse.is_true(idx) {
                    continue;
                }
                let p = gc.center(gc.cell(idx));
                let fc = gf.locate(p).unwrap();
                let mut hit = fine.is_true_cell(fc);
                let mut nbrs = Vec::new();
                if !hit {
                    gf.all_neighbors(fc, &mut nbrs);
                    hit = nbrs.iter().any(|&c| fine.is_true_cell(c));
                }
                assert!(hit, "coarse true cell {:?} not covered at finer resolution", p);
            }
        }
    }
}
