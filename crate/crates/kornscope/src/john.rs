//! John-constant estimation and the end-measure criterion.
//!
//! The direct estimate follows candidate curves from sampled start cells to
//! the base point and takes the worst ratio `rho(gamma(t)) / t` with
//! arclength measured from the start; every reported constant is witnessed
//! by a concrete curve, so it is a certified lower bound for the John
//! constant of the rasterized domain.
//!
//! A ball B separates when removing it (plus the discrete band that thickens
//! its sphere to a leak-free cell set) leaves components that do not contain
//! the base point; their union is the end E_B. For a John domain the end
//! cannot be large relative to the ball, and the checker compares the worst
//! observed `|E_B| / |B|` against the threshold `tau = 4^n * 4`. Rooms
//! joined by thin necks fail the threshold at moderate scales, which is the
//! expected signature of a degenerate John constant.

use crate::distance::DistanceField;
use crate::domain::RasterDomain;
use crate::grid::{dist as point_dist, Cell};
use crate::separation::{band_half_width, sample_cells, CurvePlanner};
use crate::{Error, Result};
use rayon::prelude::*;
use std::collections::VecDeque;

/// Certified lower bound for the John constant, with its witness.
#[derive(Debug, Clone, serde::Serialize)]
pub struct JohnDirectEstimate {
    pub c_lower: f64,
    pub base_cell: Cell,
    pub samples: usize,
    /// Sample whose curve attains the bound.
    pub worst_cell: Cell,
    /// Arclength and distance at the pinching vertex.
    pub worst_t: f64,
    pub worst_rho: f64,
}

/// Estimate the John constant from below over a depth-stratified sample.
pub fn john_constant_direct(
    domain: &RasterDomain,
    dist: &DistanceField,
    x0_cell: Option<Cell>,
    budget: usize,
) -> Result<JohnDirectEstimate> {
    let g = domain.grid();
    let base = match x0_cell {
        Some(c) => c,
        None => g.cell(dist.deepest_cell().0),
    };
    let planner = CurvePlanner::new(domain, dist, base)?;
    let samples = sample_cells(domain, dist, budget);
    // Per sample: (ratio, t, rho) at the pinching vertex.
    let per_sample: Vec<Option<(f64, f64, f64)>> = samples
        .par_iter()
        .map(|&s| {
            let curve = planner.curve_from(domain, dist, g.cell(s))?;
            let arcs = curve.arclengths(g.dim);
            let mut worst: Option<(f64, f64, f64)> = None;
            for (i, &p) in curve.points().iter().enumerate() {
                if arcs[i] <= 0.0 {
                    continue;
                }
                let cell = g.locate(p).ok_or_else(|| {
                    Error::Curve(format!("curve vertex {i} outside grid"))
                })?;
                let rho = dist.rho_cell(cell);
                let ratio = rho / arcs[i];
                if worst.map_or(true, |(w, _, _)| ratio < w) {
                    worst = Some((ratio, arcs[i], rho));
                }
            }
            Ok::<_, Error>(worst)
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(usize, (f64, f64, f64))> = None;
    for (k, w) in per_sample.iter().enumerate() {
        if let Some(w) = w {
            if best.map_or(true, |(_, (r, _, _))| w.0 < r) {
                best = Some((k, *w));
            }
        }
    }
    let (worst_idx, (c_lower, worst_t, worst_rho)) = best.ok_or_else(|| {
        Error::InvalidParameter("no sample produced a nondegenerate curve".into())
    })?;
    Ok(JohnDirectEstimate {
        c_lower,
        base_cell: base,
        samples: samples.len(),
        worst_cell: g.cell(samples[worst_idx]),
        worst_t,
        worst_rho,
    })
}

/// One candidate ball and its end.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BallEnd {
    pub center_cell: Cell,
    pub center: [f64; 3],
    pub radius: f64,
    pub end_cells: usize,
    pub end_measure: f64,
    /// Analytic ball volume: pi r^2 or (4/3) pi r^3.
    pub ball_measure: f64,
    pub ratio: f64,
    /// Base point swallowed by the removed set; the end is undefined.
    pub degenerate: bool,
}

fn ball_measure(r: f64, dim: usize) -> f64 {
    if dim == 2 {
        std::f64::consts::PI * r * r
    } else {
        4.0 / 3.0 * std::f64::consts::PI * r * r * r
    }
}

/// Flood the base component of the domain minus the closed ball plus band,
/// then count the leftover open cells. Returns (end count, degenerate).
fn end_cell_count(
    domain: &RasterDomain,
    z: [f64; 3],
    r: f64,
    x0_idx: usize,
    visited: &mut Vec<bool>,
    queue: &mut VecDeque<usize>,
    collect: Option<&mut Vec<usize>>,
) -> (usize, bool) {
    let g = domain.grid();
    let cut = r + band_half_width(g.h, g.dim);
    let open = |idx: usize| {
        domain.is_true(idx) && point_dist(g.center(g.cell(idx)), z, g.dim) > cut
    };
    if !open(x0_idx) {
        return (0, true);
    }
    visited.clear();
    visited.resize(g.len(), false);
    queue.clear();
    visited[x0_idx] = true;
    queue.push_back(x0_idx);
    let mut nbrs = Vec::with_capacity(6);
    while let Some(idx) = queue.pop_front() {
        g.face_neighbors(g.cell(idx), &mut nbrs);
        for &nc in &nbrs {
            let j = g.idx(nc);
            if !visited[j] && open(j) {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    let mut count = 0;
    match collect {
        Some(cells) => {
            cells.clear();
            for idx in 0..g.len() {
                if open(idx) && !visited[idx] {
                    cells.push(idx);
                    count += 1;
                }
            }
        }
        None => {
            for idx in 0..g.len() {
                if open(idx) && !visited[idx] {
                    count += 1;
                }
            }
        }
    }
    (count, false)
}

/// The end of one explicit ball, with its cells. Used to build test fields.
pub fn ball_end_cells(
    domain: &RasterDomain,
    center_cell: Cell,
    radius: f64,
    x0_cell: Cell,
) -> Result<BallEnd> {
    let g = domain.grid();
    if !domain.is_true_cell(x0_cell) {
        return Err(Error::InvalidParameter("base cell outside the domain".into()));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidParameter(format!("ball radius must be positive, got {radius}")));
    }
    let z = g.center(center_cell);
    let mut visited = Vec::new();
    let mut queue = VecDeque::new();
    let mut cells = Vec::new();
    let (count, degenerate) = end_cell_count(
        domain,
        z,
        radius,
        g.idx(x0_cell),
        &mut visited,
        &mut queue,
        Some(&mut cells),
    );
    let bm = ball_measure(radius, g.dim);
    Ok(BallEnd {
        center_cell,
        center: z,
        radius,
        end_cells: count,
        end_measure: crate::domain::measure(count, g.h, g.dim),
        ball_measure: bm,
        ratio: if degenerate { f64::NAN } else { crate::domain::measure(count, g.h, g.dim) / bm },
        degenerate,
    })
}

/// Cells of the end itself, ascending. Companion to [`ball_end_cells`].
pub fn ball_end_cell_list(
    domain: &RasterDomain,
    center_cell: Cell,
    radius: f64,
    x0_cell: Cell,
) -> Result<Vec<usize>> {
    let g = domain.grid();
    let z = g.center(center_cell);
    let mut visited = Vec::new();
    let mut queue = VecDeque::new();
    let mut cells = Vec::new();
    let (_, degenerate) = end_cell_count(
        domain,
        z,
        radius,
        g.idx(x0_cell),
        &mut visited,
        &mut queue,
        Some(&mut cells),
    );
    if degenerate {
        return Err(Error::InvalidParameter(
            "base point lies inside the removed ball".into(),
        ));
    }
    Ok(cells)
}

/// Verdict of the end-measure criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum EndVerdict {
    JohnConsistent,
    NotJohnAtScale,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EndMeasureReport {
    pub tau: f64,
    pub max_ratio: f64,
    pub worst: Option<BallEnd>,
    pub balls_checked: usize,
    pub separating_balls: usize,
    pub degenerate_balls: usize,
    pub verdict: EndVerdict,
}

/// Enumerate candidate separating balls over sampled centers: for each
/// sampled cell z and each factor in `cs_ladder` the ball of radius
/// `cs * rho(z)`. Returns all balls with nonempty ends.
pub fn enumerate_separating_balls(
    domain: &RasterDomain,
    dist: &DistanceField,
    x0_cell: Option<Cell>,
    budget: usize,
    cs_ladder: &[f64],
) -> Result<Vec<BallEnd>> {
    let g = domain.grid();
    let base = match x0_cell {
        Some(c) => c,
        None => g.cell(dist.deepest_cell().0),
    };
    if !domain.is_true_cell(base) {
        return Err(Error::InvalidParameter("base cell outside the domain".into()));
    }
    for &cs in cs_ladder {
        if !(cs.is_finite() && cs > 0.0) {
            return Err(Error::InvalidParameter(format!("ball factor must be positive, got {cs}")));
        }
    }
    let x0_idx = g.idx(base);
    let samples = sample_cells(domain, dist, budget);
    let mut jobs = Vec::with_capacity(samples.len() * cs_ladder.len());
    for &s in &samples {
        for &cs in cs_ladder {
            jobs.push((s, cs * dist.rho(s)));
        }
    }
    let ends: Vec<BallEnd> = jobs
        .par_iter()
        .map_init(
            || (Vec::new(), VecDeque::new()),
            |(visited, queue), &(s, r)| {
                let z = g.center(g.cell(s));
                let (count, degenerate) =
                    end_cell_count(domain, z, r, x0_idx, visited, queue, None);
                let bm = ball_measure(r, g.dim);
                let em = crate::domain::measure(count, g.h, g.dim);
                BallEnd {
                    center_cell: g.cell(s),
                    center: z,
                    radius: r,
                    end_cells: count,
                    end_measure: em,
                    ball_measure: bm,
                    ratio: if degenerate { f64::NAN } else { em / bm },
                    degenerate,
                }
            },
        )
        .collect();
    Ok(ends)
}

/// Worst end-to-ball measure ratio over the enumerated balls, compared
/// against `tau = 4^n * 4`.
pub fn end_measure_ratio(
    domain: &RasterDomain,
    dist: &DistanceField,
    x0_cell: Option<Cell>,
    budget: usize,
    cs_ladder: &[f64],
) -> Result<EndMeasureReport> {
    let ends = enumerate_separating_balls(domain, dist, x0_cell, budget, cs_ladder)?;
    let tau = 4.0f64.powi(domain.dim() as i32) * 4.0;
    let balls_checked = ends.len();
    let degenerate_balls = ends.iter().filter(|e| e.degenerate).count();
    let mut worst: Option<BallEnd> = None;
    let mut separating = 0usize;
    for e in ends {
        if e.degenerate || e.end_cells == 0 {
            continue;
        }
        separating += 1;
        if worst.as_ref().map_or(true, |w| e.ratio > w.ratio) {
            worst = Some(e);
        }
    }
    let max_ratio = worst.as_ref().map_or(0.0, |w| w.ratio);
    Ok(EndMeasureReport {
        tau,
        max_ratio,
        worst,
        balls_checked,
        separating_balls: separating,
        degenerate_balls,
        verdict: if max_ratio <= tau {
            EndVerdict::JohnConsistent
        } else {
            EndVerdict::NotJohnAtScale
        },
    })
}

/// Tail-domination report for a positive sequence: with
/// `b = max_k sum_{j>=k} x_j / x_k` finite, tails decay geometrically and
/// `sum_{j>=k} x_j^alpha <= c x_k^alpha` holds with
/// `c = b^alpha / (1 - (1 - 1/b)^alpha)`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TailDominationReport {
    pub alpha: f64,
    /// Empirical hypothesis constant.
    pub hyp_b: f64,
    /// Empirical constant for the alpha-power sums.
    pub c_emp: f64,
    /// Closed-form bound implied by `hyp_b`.
    pub c_bound: f64,
    pub satisfied: bool,
}

/// Check the geometric-tail lemma on a concrete sequence.
pub fn astala_gehring_check(x: &[f64], alpha: f64) -> Result<TailDominationReport> {
    if x.is_empty() {
        return Err(Error::InvalidParameter("empty sequence".into()));
    }
    if x.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(Error::InvalidParameter(
            "sequence entries must be positive and finite".into(),
        ));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "exponent must be positive, got {alpha}"
        )));
    }
    // Suffix sums of x and of x^alpha, then the worst ratios.
    let mut tail = 0.0f64;
    let mut tail_a = 0.0f64;
    let mut hyp_b = 0.0f64;
    let mut c_emp = 0.0f64;
    for &v in x.iter().rev() {
        tail += v;
        tail_a += v.powf(alpha);
        hyp_b = hyp_b.max(tail / v);
        c_emp = c_emp.max(tail_a / v.powf(alpha));
    }
    let c_bound = if hyp_b <= 1.0 {
        1.0
    } else {
        hyp_b.powf(alpha) / (1.0 - (1.0 - 1.0 / hyp_b).powf(alpha))
    };
    Ok(TailDominationReport {
        alpha,
        hyp_b,
        c_emp,
        c_bound,
        satisfied: c_emp <= c_bound * (1.0 + 1e-12),
    })
}
