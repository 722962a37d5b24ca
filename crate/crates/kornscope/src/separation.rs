//! Separation certificates for curves and domains.
//!
//! A curve from x to the base point satisfies the separation property with
//! constant `cs` when at every vertex, with z the current point and
//! `r = cs * rho(z)`, each earlier point either lies in the ball B(z, r) or
//! is cut off from the base point by the sphere around z. Discretely the
//! sphere becomes the band of cells whose centers are within half a cell
//! diagonal of radius r; removing the band splits the domain, and a
//! violation is an earlier vertex strictly outside the band whose cell still
//! connects to the base point. Points inside the band count as satisfying:
//! at this resolution the sphere itself cannot tell them apart.
//!
//! Candidate curves ascend the distance field from the start until a local
//! maximum, then follow a widest-path tree into the base point, so they gain
//! depth as fast as the domain allows before threading the necks.

use crate::components::ConnScratch;
use crate::curve::DiscreteCurve;
use crate::distance::DistanceField;
use crate::domain::RasterDomain;
use crate::grid::{dist as point_dist, Cell};
use crate::{Error, Result};
use rayon::prelude::*;

/// One failed check: at arclength `t` from the sample, with ball radius
/// `radius` around `center`, the earlier vertex `witness_vertex` stays
/// outside the sphere band yet connects to the base point.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SeparationViolation {
    pub sample: Cell,
    pub vertex: usize,
    pub t: f64,
    pub center: [f64; 3],
    pub radius: f64,
    pub witness_vertex: usize,
    pub witness_cell: Cell,
}

/// Outcome of checking a single curve.
#[derive(Debug, Clone)]
pub struct CurveCheck {
    pub ok: bool,
    pub violation: Option<SeparationViolation>,
    pub vertices: usize,
}

/// Half width of the discrete sphere band: half a cell diagonal, the largest
/// center-to-point distance within a cell. Adjacent cell centers differ by
/// less than a full diagonal, so the band has no face-adjacent gaps.
pub fn band_half_width(h: f64, dim: usize) -> f64 {
    0.5 * h * (dim as f64).sqrt()
}

/// Check the separation property along one curve with constant `cs`,
/// reporting the earliest violation if any.
pub fn check_curve_separation(
    domain: &RasterDomain,
    dist: &DistanceField,
    curve: &DiscreteCurve,
    cs: f64,
    x0_cell: Cell,
    scratch: &mut ConnScratch,
) -> Result<CurveCheck> {
    if !(cs.is_finite() && cs > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "separation constant must be positive, got {cs}"
        )));
    }
    let g = domain.grid();
    if !domain.is_true_cell(x0_cell) {
        return Err(Error::InvalidParameter(format!(
            "base cell {x0_cell:?} is outside the domain"
        )));
    }
    let x0_idx = g.idx(x0_cell);
    let pts = curve.points();
    let mut cells = Vec::with_capacity(pts.len());
    for (i, &p) in pts.iter().enumerate() {
        let c = g
            .locate(p)
            .filter(|&c| domain.is_true_cell(c))
            .ok_or_else(|| Error::Curve(format!("vertex {i} at {p:?} leaves the domain")))?;
        cells.push(g.idx(c));
    }
    let arcs = curve.arclengths(g.dim);
    let centers: Vec<[f64; 3]> = cells.iter().map(|&i| g.center(g.cell(i))).collect();
    let half = band_half_width(g.h, g.dim);
    let sample = g.cell(cells[0]);

    let mut witnesses: Vec<usize> = Vec::new();
    let mut witness_vertices: Vec<usize> = Vec::new();
    for i in 1..pts.len() {
        let z = pts[i];
        let r = cs * dist.rho(cells[i]);
        // Earlier points sit within arclength arcs[i] of z, so when the ball
        // radius covers the whole arc the containment clause holds outright.
        if r >= arcs[i] {
            continue;
        }
        witnesses.clear();
        witness_vertices.clear();
        for j in 0..i {
            if point_dist(pts[j], z, g.dim) <= r {
                continue;
            }
            // Band residents (cell center within the sphere band or closer)
            // count as satisfying.
            if point_dist(centers[j], z, g.dim) <= r + half {
                continue;
            }
            witnesses.push(cells[j]);
            witness_vertices.push(j);
        }
        if witnesses.is_empty() {
            continue;
        }
        let open = |idx: usize| {
            domain.is_true(idx)
                && (point_dist(g.center(g.cell(idx)), z, g.dim) - r).abs() > half
        };
        // Base point swallowed by the band: no component contains it, so
        // every witness is vacuously separated from it.
        if !open(x0_idx) {
            continue;
        }
        witnesses.sort_unstable();
        witnesses.dedup();
        if scratch.connected_any(g, open, &witnesses, x0_idx) {
            // Identify the earliest connected witness for the report.
            let wj = witness_vertices
                .iter()
                .copied()
                .find(|&j| scratch.connected(g, open, cells[j], x0_idx))
                .unwrap_or(witness_vertices[0]);
            return Ok(CurveCheck {
                ok: false,
                violation: Some(SeparationViolation {
                    sample,
                    vertex: i,
                    t: arcs[i],
                    center: z,
                    radius: r,
                    witness_vertex: wj,
                    witness_cell: g.cell(cells[wj]),
                }),
                vertices: pts.len(),
            });
        }
    }
    Ok(CurveCheck { ok: true, violation: None, vertices: pts.len() })
}

/// Widest-path tree toward a fixed base point, shared across samples.
///
/// `bottleneck[c]` is the largest over paths from c to the base point of the
/// smallest squared cell distance along the path; `parent` realizes one such
/// path. Computed with a bucket queue over integer distances in one
/// descending sweep.
pub struct CurvePlanner {
    x0: usize,
    parent: Vec<u32>,
    bottleneck: Vec<u32>,
}

const NO_PARENT: u32 = u32::MAX;

impl CurvePlanner {
    pub fn new(domain: &RasterDomain, dist: &DistanceField, x0_cell: Cell) -> Result<Self> {
        let g = domain.grid();
        if !domain.is_true_cell(x0_cell) {
            return Err(Error::InvalidParameter(format!(
                "base cell {x0_cell:?} is outside the domain"
            )));
        }
        let x0 = g.idx(x0_cell);
        let mut parent = vec![NO_PARENT; g.len()];
        let mut bottleneck = vec![0u32; g.len()];
        let top = dist.d2(x0) as usize;
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); top + 1];
        bottleneck[x0] = dist.d2(x0);
        buckets[top].push(x0 as u32);
        let mut nbrs = Vec::with_capacity(6);
        for b in (1..=top).rev() {
            let mut k = 0;
            while k < buckets[b].len() {
                let idx = buckets[b][k] as usize;
                k += 1;
                if bottleneck[idx] as usize != b {
                    continue;
                }
                g.face_neighbors(g.cell(idx), &mut nbrs);
                for &nc in &nbrs {
                    let m = g.idx(nc);
                    if !domain.is_true(m) {
                        continue;
                    }
                    let nb = (b as u32).min(dist.d2(m));
                    if nb > bottleneck[m] {
                        bottleneck[m] = nb;
                        parent[m] = idx as u32;
                        buckets[nb as usize].push(m as u32);
                    }
                }
            }
            buckets[b] = Vec::new();
        }
        Ok(CurvePlanner { x0, parent, bottleneck })
    }

    pub fn base_index(&self) -> usize {
        self.x0
    }

    /// Candidate curve from a cell to the base point: steepest ascent on the
    /// distance field, then the widest-path tree. Vertices are cell centers
    /// resampled at half-cell steps; exact revisits are cut.
    pub fn curve_from(
        &self,
        domain: &RasterDomain,
        dist: &DistanceField,
        x_cell: Cell,
    ) -> Result<DiscreteCurve> {
        let g = domain.grid();
        if !domain.is_true_cell(x_cell) {
            return Err(Error::InvalidParameter(format!(
                "start cell {x_cell:?} is outside the domain"
            )));
        }
        if g.idx(x_cell) == self.x0 {
            let c = g.center(x_cell);
            return DiscreteCurve::new(vec![c, c]);
        }
        let mut cells: Vec<usize> = vec![g.idx(x_cell)];
        // Ascend strictly: each step to the face neighbor of largest distance.
        let mut nbrs = Vec::with_capacity(6);
        loop {
            let cur = *cells.last().unwrap();
            g.face_neighbors(g.cell(cur), &mut nbrs);
            let mut best: Option<usize> = None;
            for &nc in &nbrs {
                let m = g.idx(nc);
                if !domain.is_true(m) || dist.d2(m) <= dist.d2(cur) {
                    continue;
                }
                best = match best {
                    Some(b) if dist.d2(b) > dist.d2(m) => Some(b),
                    Some(b) if dist.d2(b) == dist.d2(m) && b < m => Some(b),
                    _ => Some(m),
                };
            }
            match best {
                Some(m) => cells.push(m),
                None => break,
            }
        }
        // Follow the widest-path tree from the ascent's end.
        let mut cur = *cells.last().unwrap();
        while cur != self.x0 {
            let p = self.parent[cur];
            if p == NO_PARENT {
                return Err(Error::Disconnected(format!(
                    "no path from {:?} to the base point",
                    g.cell(cur)
                )));
            }
            cur = p as usize;
            cells.push(cur);
        }
        let pts: Vec<[f64; 3]> = cells.iter().map(|&i| g.center(g.cell(i))).collect();
        let curve = if pts.len() == 1 {
            DiscreteCurve::new(vec![pts[0], pts[0]])?
        } else {
            DiscreteCurve::new(pts)?
        };
        Ok(curve.resample(0.5 * g.h, g.dim).remove_exact_loops())
    }

    /// Smallest squared cell distance guaranteed along the tree path from a
    /// cell to the base point.
    pub fn bottleneck(&self, idx: usize) -> u32 {
        self.bottleneck[idx]
    }
}

/// Convenience wrapper: candidate curve for a single start cell.
pub fn find_separation_curve(
    domain: &RasterDomain,
    dist: &DistanceField,
    x_cell: Cell,
    x0_cell: Cell,
) -> Result<DiscreteCurve> {
    CurvePlanner::new(domain, dist, x0_cell)?.curve_from(domain, dist, x_cell)
}

/// Deterministic sample of up to `budget` start cells, stratified by depth:
/// true cells are ranked by squared boundary distance (scan order breaking
/// ties) and picked at even rank strides, so the shallowest and deepest cells
/// always appear and every depth stratum is represented.
pub fn sample_cells(domain: &RasterDomain, dist: &DistanceField, budget: usize) -> Vec<usize> {
    let mut cells = domain.true_cells();
    if budget == 0 {
        return Vec::new();
    }
    cells.sort_by_key(|&i| (dist.d2(i), i));
    if cells.len() <= budget {
        return cells;
    }
    let n = cells.len();
    (0..budget)
        .map(|k| cells[k * (n - 1) / (budget - 1).max(1)])
        .collect()
}

/// Domain-level separation certificate at constant `cs`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SeparationCertificate {
    pub cs: f64,
    pub base_cell: Cell,
    pub budget: usize,
    pub samples_checked: usize,
    pub passed: bool,
    /// First violation per failing sample, capped at 32 entries.
    pub violations: Vec<SeparationViolation>,
}

/// Check the separation property over a depth-stratified sample of start
/// cells. Samples are independent and checked in parallel; the report is
/// deterministic.
pub fn check_separation_property(
    domain: &RasterDomain,
    dist: &DistanceField,
    cs: f64,
    x0_cell: Option<Cell>,
    budget: usize,
) -> Result<SeparationCertificate> {
    let g = domain.grid();
    let base = match x0_cell {
        Some(c) => c,
        None => g.cell(dist.deepest_cell().0),
    };
    let planner = CurvePlanner::new(domain, dist, base)?;
    let samples = sample_cells(domain, dist, budget);
    let results: Vec<Option<SeparationViolation>> = samples
        .par_iter()
        .map_init(
            || ConnScratch::new(g.len()),
            |scratch, &s| {
                let curve = planner.curve_from(domain, dist, g.cell(s))?;
                let check = check_curve_separation(domain, dist, &curve, cs, base, scratch)?;
                Ok::<_, Error>(check.violation)
            },
        )
        .collect::<Result<_>>()?;
    let mut violations: Vec<SeparationViolation> = results.into_iter().flatten().collect();
    let passed = violations.is_empty();
    violations.truncate(32);
    Ok(SeparationCertificate {
        cs,
        base_cell: base,
        budget,
        samples_checked: samples.len(),
        passed,
        violations,
    })
}

/// How a certificate survives moving the base point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum TransferMode {
    /// New base within `rho(x0)/1000` of the old: constant at most doubles.
    Near,
    /// Chained through intermediate base points, doubling per step.
    Chained,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct TransferReport {
    pub mode: TransferMode,
    pub chain_steps: usize,
    /// log2 of the guaranteed constant: chain length plus log2 of the
    /// certified constant. Stored as a logarithm because the power itself
    /// overflows floating point for long chains.
    pub log2_cs_bound: f64,
    /// The guaranteed constant when it is representable.
    pub cs_bound: Option<f64>,
    /// Smallest constant from a doubling search that passes at the new base,
    /// if any tested one does.
    pub verified_cs: Option<f64>,
}

/// Transfer a separation certificate to a new base point. Near moves double
/// the constant once; far moves chain intermediate bases along a candidate
/// curve with steps of `rho/1000`, doubling per step, and the reported bound
/// grows accordingly. A doubling search then measures what actually passes.
pub fn base_point_transfer(
    domain: &RasterDomain,
    dist: &DistanceField,
    cert: &SeparationCertificate,
    new_x0: Cell,
    budget: usize,
) -> Result<TransferReport> {
    let g = domain.grid();
    if !domain.is_true_cell(new_x0) {
        return Err(Error::InvalidParameter(format!(
            "new base cell {new_x0:?} is outside the domain"
        )));
    }
    let old = cert.base_cell;
    let old_idx = g.idx(old);
    let move_len = point_dist(g.center(old), g.center(new_x0), g.dim);
    let (mode, chain_steps) = if move_len <= dist.rho(old_idx) / 1000.0 {
        (TransferMode::Near, 1usize)
    } else {
        // Walk a candidate curve from the old base to the new one, advancing
        // rho/1000 at a time; every step doubles the constant.
        let planner = CurvePlanner::new(domain, dist, new_x0)?;
        let curve = planner.curve_from(domain, dist, old)?;
        let pts = curve.points();
        let dim = g.dim;
        let mut steps = 0usize;
        let mut seg = 0usize;
        let mut offset = 0.0f64;
        let mut pos = pts[0];
        while seg + 1 < pts.len() {
            let idx = g
                .locate(pos)
                .map(|c| g.idx(c))
                .ok_or_else(|| Error::Curve("transfer chain left the grid".into()))?;
            let mut advance = dist.rho(idx) / 1000.0;
            steps += 1;
            // Move `advance` along the polyline.
            while seg + 1 < pts.len() {
                let seg_len = point_dist(pts[seg], pts[seg + 1], dim);
                let remain = seg_len - offset;
                if advance < remain {
                    offset += advance;
                    break;
                }
                advance -= remain;
                seg += 1;
                offset = 0.0;
            }
            if seg + 1 >= pts.len() {
                break;
            }
            let t = offset / point_dist(pts[seg], pts[seg + 1], dim);
            pos = [
                pts[seg][0] + t * (pts[seg + 1][0] - pts[seg][0]),
                pts[seg][1] + t * (pts[seg + 1][1] - pts[seg][1]),
                pts[seg][2] + t * (pts[seg + 1][2] - pts[seg][2]),
            ];
        }
        (TransferMode::Chained, steps.max(1))
    };
    let log2_bound = chain_steps as f64 + cert.cs.log2();
    let cs_bound = if log2_bound < 1023.0 {
        Some(cert.cs * (chain_steps as f64).exp2())
    } else {
        None
    };
    // Doubling search for the smallest passing constant at the new base.
    let mut verified = None;
    if budget > 0 {
        for j in 0..=8 {
            let try_cs = cert.cs * (j as f64).exp2();
            let report = check_separation_property(domain, dist, try_cs, Some(new_x0), budget)?;
            if report.passed {
                verified = Some(try_cs);
                break;
            }
        }
    }
    Ok(TransferReport {
        mode,
        chain_steps,
        log2_cs_bound: log2_bound,
        cs_bound,
        verified_cs: verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{rasterize, DomainSpec};
    use crate::grid::Grid;

    fn annulus(res: usize) -> RasterDomain {
        // Ring 0.3 < |p| < 0.5: bounded, connected, but curves around the
        // hole cannot be separated from the base point by small spheres.
        let h = 1.0 / res as f64;
        let n = res + 4;
        let g = Grid::new2d(n, n, h, [-0.5 - 2.0 * h, -0.5 - 2.0 * h]);
        let mut mask = vec![false; g.len()];
        for i in 0..g.len() {
            let c = g.center(g.cell(i));
            let r2 = c[0] * c[0] + c[1] * c[1];
            mask[i] = r2 > 0.09 && r2 < 0.25;
        }
        RasterDomain::new(g, mask).unwrap()
    }

    #[test]
    fn disk_passes_at_moderate_constant() {
        let d = rasterize(&DomainSpec::Disk, 48).unwrap();
        let dist = DistanceField::compute(&d).unwrap();
        let cert = check_separation_property(&d, &dist, 2.0, None, 128).unwrap();
        assert!(cert.passed, "violations: {:?}", cert.violations.first());
        assert_eq!(cert.samples_checked, 128);
    }

    #[test]
    fn rooms_pass_with_neck_blocking_spheres() {
        let d = rasterize(&DomainSpec::Rooms { neck: 0.25, count: 2 }, 48).unwrap();
        let dist = DistanceField::compute(&d).unwrap();
        let cert = check_separation_property(&d, &dist, 4.0, None, 128).unwrap();
        assert!(cert.passed, "violations: {:?}", cert.violations.first());
    }

    #[test]
    fn annulus_violates_separation() {
        let d = annulus(64);
        let dist = DistanceField::compute(&d).unwrap();
        let cert = check_separation_property(&d, &dist, 2.0, None, 128).unwrap();
        assert!(!cert.passed);
        let v = &cert.violations[0];
        assert!(v.t > 0.0 && v.radius > 0.0);
        assert!(v.witness_vertex < v.vertex);
    }

    #[test]
    fn curves_end_at_base_and_stay_inside() {
        let d = rasterize(&DomainSpec::LShape, 32).unwrap();
        let dist = DistanceField::compute(&d).unwrap();
        let base = d.grid().cell(dist.deepest_cell().0);
        let planner = CurvePlanner::new(&d, &dist, base).unwrap();
        for &s in sample_cells(&d, &dist, 64).iter() {
            let curve = planner.curve_from(&d, &dist, d.grid().cell(s)).unwrap();
            curve.check_inside(&d).unwrap();
            let end = curve.end();
            let bc = d.grid().center(base);
            assert!(point_dist(end, bc, 2) < 1e-12);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_stratified() {
        let d = rasterize(&DomainSpec::Disk, 32).unwrap();
        let dist = DistanceField::compute(&d).unwrap();
        let a = sample_cells(&d, &dist, 50);
        let b = sample_cells(&d, &dist, 50);
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        // Extremes present: a shallowest and the deepest cell.
        assert_eq!(dist.d2(a[0]), 1);
        assert_eq!(dist.d2(*a.last().unwrap()), dist.d2(dist.deepest_cell().0));
    }

    #[test]
    fn transfer_near_same_cell_doubles_constant() {
        let d = rasterize(&DomainSpec::Disk, 32).unwrap();
        let dist = DistanceField::compute(&d).unwrap();
        let cert = check_separation_property(&d, &dist, 2.0, None, 32).unwrap();
        let report = base_point_transfer(&d, &dist, &cert, cert.base_cell, 32).unwrap();
        assert_eq!(report.mode, TransferMode::Near);
        assert_eq!(report.chain_steps, 1);
        assert_eq!(report.cs_bound, Some(4.0));
        assert!(report.verified_cs.unwrap() <= 4.0);
    }

    #[test]
    fn transfer_far_reports_chain() {
        let d = rasterize(&DomainSpec::Disk, 32).unwrap();
        let dist = DistanceField::compute(&d).unwrap();
        let cert = check_separation_property(&d, &dist, 2.0, None, 32).unwrap();
        // A cell well away from the center.
        let new = d
            .grid()
            .locate([0.3, 0.0, 0.0])
            .filter(|&c| d.is_true_cell(c))
            .unwrap();
        let report = base_point_transfer(&d, &dist, &cert, new, 32).unwrap();
        assert_eq!(report.mode, TransferMode::Chained);
        assert!(report.chain_steps > 100, "steps {}", report.chain_steps);
        assert!(report.log2_cs_bound > 100.0);
        assert!(report.verified_cs.is_some());
    }
}
