//! Polygonal curves inside a raster domain.
//!
//! A curve is a vertex list starting at the point it certifies and ending at
//! the base point. Arclength is measured from the start. Two operations keep
//! curves tractable:
//!
//! * `resample` bounds segment lengths so every visited cell shows up as the
//!   containing cell of some vertex,
//! * `simplify` makes the curve cube-simple with respect to a Whitney
//!   decomposition: exact vertex repeats are cut first, then any cube visited
//!   twice has the stretch between first entry and last exit replaced by the
//!   straight segment, which convexity keeps inside that cube. Each pass
//!   strictly shortens the cube chain, so the iteration terminates.

use crate::grid::Grid;
use crate::whitney::{WhitneyDecomposition, NO_CUBE};
use crate::{Error, Result};
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve {
    pts: Vec<[f64; 3]>,
}

impl DiscreteCurve {
    pub fn new(pts: Vec<[f64; 3]>) -> Result<Self> {
        if pts.len() < 2 {
            return Err(Error::Curve(format!(
                "curve needs at least 2 vertices, got {}",
                pts.len()
            )));
        }
        if pts.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Curve("curve has non-finite coordinates".into()));
        }
        Ok(DiscreteCurve { pts })
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.pts
    }

    pub fn start(&self) -> [f64; 3] {
        self.pts[0]
    }

    pub fn end(&self) -> [f64; 3] {
        *self.pts.last().unwrap()
    }

    /// Total polygonal length.
    pub fn length(&self, dim: usize) -> f64 {
        self.pts
            .windows(2)
            .map(|w| crate::grid::dist(w[0], w[1], dim))
            .sum()
    }

    /// Cumulative arclength at each vertex, measured from the start.
    pub fn arclengths(&self, dim: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.pts.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.pts.windows(2) {
            acc += crate::grid::dist(w[0], w[1], dim);
            out.push(acc);
        }
        out
    }

    /// Subdivide segments so no step exceeds `max_step`. Original vertices
    /// are kept; inserted vertices are evenly spaced along each segment.
    pub fn resample(&self, max_step: f64, dim: usize) -> DiscreteCurve {
        assert!(max_step > 0.0);
        let mut pts = Vec::with_capacity(self.pts.len());
        pts.push(self.pts[0]);
        for w in self.pts.windows(2) {
            let d = crate::grid::dist(w[0], w[1], dim);
            let steps = (d / max_step).ceil().max(1.0) as usize;
            for s in 1..=steps {
                let t = s as f64 / steps as f64;
                pts.push([
                    w[0][0] + t * (w[1][0] - w[0][0]),
                    w[0][1] + t * (w[1][1] - w[0][1]),
                    w[0][2] + t * (w[1][2] - w[0][2]),
                ]);
            }
        }
        DiscreteCurve { pts }
    }

    /// Every vertex must lie in a true cell; returns the offending vertex
    /// otherwise.
    pub fn check_inside(&self, domain: &crate::domain::RasterDomain) -> Result<()> {
        let g = domain.grid();
        for (i, &p) in self.pts.iter().enumerate() {
            let ok = g
                .locate(p)
                .map(|c| domain.is_true_cell(c))
                .unwrap_or(false);
            if !ok {
                return Err(Error::Curve(format!("vertex {i} at {p:?} leaves the domain")));
            }
        }
        Ok(())
    }

    /// Whitney cube visited by each vertex, consecutively deduplicated.
    /// Errors if a vertex is outside the decomposed domain.
    pub fn cube_chain(&self, grid: &Grid, dec: &WhitneyDecomposition) -> Result<Vec<u32>> {
        let mut chain = Vec::new();
        for (i, &p) in self.pts.iter().enumerate() {
            let cell = grid
                .locate(p)
                .ok_or_else(|| Error::Curve(format!("vertex {i} outside grid")))?;
            let id = dec.cell_to_cube[grid.idx(cell)];
            if id == NO_CUBE {
                return Err(Error::Curve(format!("vertex {i} at {p:?} outside domain")));
            }
            if chain.last() != Some(&id) {
                chain.push(id);
            }
        }
        Ok(chain)
    }

    /// True when no cube appears twice in the cube chain.
    pub fn is_cube_simple(&self, grid: &Grid, dec: &WhitneyDecomposition) -> Result<bool> {
        let chain = self.cube_chain(grid, dec)?;
        let mut seen = std::collections::HashSet::new();
        Ok(chain.into_iter().all(|id| seen.insert(id)))
    }

    /// Remove exact self-intersections: whenever a vertex repeats an earlier
    /// vertex bit-for-bit, the loop between the occurrences is dropped.
    pub fn remove_exact_loops(&self) -> DiscreteCurve {
        let mut out: Vec<[f64; 3]> = Vec::with_capacity(self.pts.len());
        let mut index: HashMap<[u64; 3], usize> = HashMap::new();
        for &p in &self.pts {
            let key = [p[0].to_bits(), p[1].to_bits(), p[2].to_bits()];
            if let Some(&at) = index.get(&key) {
                for q in out.drain(at + 1..) {
                    index.remove(&[q[0].to_bits(), q[1].to_bits(), q[2].to_bits()]);
                }
            } else {
                index.insert(key, out.len());
                out.push(p);
            }
        }
        DiscreteCurve { pts: out }
    }

    /// Make the curve cube-simple: cut exact loops, then repeatedly straighten
    /// across any cube visited more than once. Inserted vertices are spaced at
    /// most one cell diagonal apart, so the chain still records every crossed
    /// cube of that stretch (a single cube, by convexity).
    pub fn simplify(&self, grid: &Grid, dec: &WhitneyDecomposition) -> Result<DiscreteCurve> {
        let dim = grid.dim;
        let diag = grid.h * (dim as f64).sqrt();
        let mut cur = self.remove_exact_loops();
        if cur.pts.len() < 2 {
            return Ok(cur);
        }
        loop {
            // Cube id per vertex.
            let mut ids = Vec::with_capacity(cur.pts.len());
            for (i, &p) in cur.pts.iter().enumerate() {
                let cell = grid
                    .locate(p)
                    .ok_or_else(|| Error::Curve(format!("vertex {i} outside grid")))?;
                let id = dec.cell_to_cube[grid.idx(cell)];
                if id == NO_CUBE {
                    return Err(Error::Curve(format!("vertex {i} outside domain")));
                }
                ids.push(id);
            }
            // First cube whose visits are interrupted by another cube.
            let mut last_seen: HashMap<u32, usize> = HashMap::new();
            let mut target: Option<(usize, usize)> = None;
            for (i, &id) in ids.iter().enumerate() {
                if let Some(&prev) = last_seen.get(&id) {
                    if ids[prev + 1..i].iter().any(|&other| other != id) {
                        // Extend to the cube's very first and very last visit.
                        let first = ids.iter().position(|&x| x == id).unwrap();
                        let last = ids.len() - 1 - ids.iter().rev().position(|&x| x == id).unwrap();
                        target = Some((first, last));
                        break;
                    }
                }
                last_seen.insert(id, i);
            }
            let Some((first, last)) = target else {
                return Ok(cur);
            };
            // Straight segment from first entry to last exit, resampled.
            let a = cur.pts[first];
            let b = cur.pts[last];
            let mut mid = Vec::new();
            let d = crate::grid::dist(a, b, dim);
            let steps = (d / diag).ceil().max(1.0) as usize;
            for s in 1..steps {
                let t = s as f64 / steps as f64;
                mid.push([
                    a[0] + t * (b[0] - a[0]),
                    a[1] + t * (b[1] - a[1]),
                    a[2] + t * (b[2] - a[2]),
                ]);
            }
            let mut pts = Vec::with_capacity(first + 1 + mid.len() + cur.pts.len() - last);
            pts.extend_from_slice(&cur.pts[..=first]);
            pts.extend_from_slice(&mid);
            pts.extend_from_slice(&cur.pts[last..]);
            cur = DiscreteCurve { pts };
        }
    }
}
