//! Exact Euclidean distance transform on the cell lattice.
//!
//! For every cell the squared distance, in cell units, to the nearest false
//! cell center is computed with the separable lower-envelope transform, one
//! axis at a time. All inputs and outputs of each pass are integers, and the
//! winning parabola at each sample attains an integer value, so float
//! rounding in breakpoint positions can only switch between parabolas of
//! equal value: the transform is exact.
//!
//! `rho` converts to geometric units: `rho = h * sqrt(d2)`, the distance from
//! a cell center to the nearest excluded cell center. It tracks the continuum
//! boundary distance to within one cell diagonal.

use crate::domain::RasterDomain;
use crate::grid::{Cell, Grid};
use crate::{Error, Result};

/// Squared cell-unit distances to the complement, one entry per cell.
#[derive(Debug, Clone)]
pub struct DistanceField {
    grid: Grid,
    d2: Vec<u32>,
}

const INF: i64 = i64::MAX / 4;

impl DistanceField {
    /// Compute the transform for a validated domain. False cells are sites
    /// with distance zero; the padded border guarantees every true cell sees
    /// a finite distance.
    pub fn compute(domain: &RasterDomain) -> Result<Self> {
        let grid = domain.grid().clone();
        let side = grid.nx.max(grid.ny).max(grid.nz) as u64;
        if 3 * side * side > u32::MAX as u64 {
            return Err(Error::Unsupported(format!(
                "grid side {side} too large for 32-bit squared distances"
            )));
        }
        let mut f: Vec<i64> = domain
            .mask()
            .iter()
            .map(|&t| if t { INF } else { 0 })
            .collect();

        let nx = grid.nx;
        let ny = grid.ny;
        let nz = grid.nz;
        let mut buf = vec![0i64; nx.max(ny).max(nz)];
        let mut out = vec![0i64; nx.max(ny).max(nz)];
        let mut v = vec![0usize; nx.max(ny).max(nz)];
        let mut z = vec![0f64; nx.max(ny).max(nz) + 1];

        // Pass along x: contiguous lanes.
        for zc in 0..nz {
            for yc in 0..ny {
                let base = (zc * ny + yc) * nx;
                buf[..nx].copy_from_slice(&f[base..base + nx]);
                envelope(&buf[..nx], &mut out[..nx], &mut v, &mut z);
                f[base..base + nx].copy_from_slice(&out[..nx]);
            }
        }
        // Pass along y.
        for zc in 0..nz {
            for xc in 0..nx {
                for yc in 0..ny {
                    buf[yc] = f[(zc * ny + yc) * nx + xc];
                }
                envelope(&buf[..ny], &mut out[..ny], &mut v, &mut z);
                for yc in 0..ny {
                    f[(zc * ny + yc) * nx + xc] = out[yc];
                }
            }
        }
        // Pass along z.
        if nz > 1 {
            for yc in 0..ny {
                for xc in 0..nx {
                    for zc in 0..nz {
                        buf[zc] = f[(zc * ny + yc) * nx + xc];
                    }
                    envelope(&buf[..nz], &mut out[..nz], &mut v, &mut z);
                    for zc in 0..nz {
                        f[(zc * ny + yc) * nx + xc] = out[zc];
                    }
                }
            }
        }

        let d2 = f.into_iter().map(|d| d as u32).collect();
        Ok(DistanceField { grid, d2 })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Squared distance in cell units.
    pub fn d2(&self, idx: usize) -> u32 {
        self.d2[idx]
    }

    /// Distance from the cell center to the nearest excluded center.
    pub fn rho(&self, idx: usize) -> f64 {
        self.grid.h * (self.d2[idx] as f64).sqrt()
    }

    pub fn rho_cell(&self, c: Cell) -> f64 {
        self.rho(self.grid.idx(c))
    }

    /// Cell of maximal distance, ties broken by scan order. Serves as the
    /// default base point: the deepest cell of the domain.
    pub fn deepest_cell(&self) -> (usize, f64) {
        let mut best = 0usize;
        for idx in 1..self.d2.len() {
            if self.d2[idx] > self.d2[best] {
                best = idx;
            }
        }
        (best, self.rho(best))
    }
}

/// One-dimensional squared-distance transform: `out[q] = min_p (q-p)^2 + g[p]`.
/// Lower envelope of parabolas, integer heights, float breakpoints.
fn envelope(g: &[i64], out: &mut [i64], v: &mut [usize], z: &mut [f64]) {
    let n = g.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        if g[q] >= INF {
            continue;
        }
        loop {
            let p = v[k];
            // Intersection of the parabolas rooted at p and q.
            let s = if g[p] >= INF {
                f64::NEG_INFINITY
            } else {
                ((g[q] + (q * q) as i64) - (g[p] + (p * p) as i64)) as f64
                    / (2 * (q - p)) as f64
            };
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    let mut k2 = 0usize;
    for q in 0..n {
        while z[k2 + 1] < q as f64 {
            k2 += 1;
        }
        let p = v[k2];
        out[q] = if g[p] >= INF {
            INF
        } else {
            ((q as i64 - p as i64) * (q as i64 - p as i64)) + g[p]
        };
    }
}
