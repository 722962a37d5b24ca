//! Binary raster domains.
//!
//! A [`RasterDomain`] is an immutable binary mask on a [`Grid`]. True cells
//! are the discrete domain. Structural invariants enforced at construction:
//!
//! * spacing `h > 0` and consistent dimensions,
//! * at least 9 true cells,
//! * every cell on the array border is false (the complement is never empty
//!   and boundary geometry is fully contained in the grid),
//! * the true set is one face-connected component.

use crate::components::label_components;
use crate::grid::{Cell, Grid};
use crate::{Error, Result};

/// Immutable binary raster with its grid geometry.
#[derive(Debug, Clone)]
pub struct RasterDomain {
    grid: Grid,
    mask: Vec<bool>,
    true_count: usize,
}

impl RasterDomain {
    /// Validate and wrap a mask. See module docs for the invariants.
    pub fn new(grid: Grid, mask: Vec<bool>) -> Result<Self> {
        if !(grid.h > 0.0) || !grid.h.is_finite() {
            return Err(Error::InvalidParameter(format!("spacing h must be positive, got {}", grid.h)));
        }
        if grid.dim != 2 && grid.dim != 3 {
            return Err(Error::InvalidParameter(format!("dim must be 2 or 3, got {}", grid.dim)));
        }
        if (grid.dim == 2) != (grid.nz == 1) {
            return Err(Error::InvalidParameter("nz must be 1 exactly in 2D".into()));
        }
        if mask.len() != grid.len() {
            return Err(Error::InvalidMask(format!(
                "mask length {} does not match grid {}x{}x{}",
                mask.len(),
                grid.nx,
                grid.ny,
                grid.nz
            )));
        }
        let true_count = mask.iter().filter(|&&b| b).count();
        if true_count < 9 {
            return Err(Error::MaskTooSmall { true_cells: true_count });
        }
        for idx in 0..mask.len() {
            if !mask[idx] {
                continue;
            }
            let c = grid.cell(idx);
            let on_border = c[0] == 0
                || c[0] + 1 == grid.nx
                || c[1] == 0
                || c[1] + 1 == grid.ny
                || (grid.dim == 3 && (c[2] == 0 || c[2] + 1 == grid.nz));
            if on_border {
                return Err(Error::InvalidMask(format!(
                    "true cell {:?} lies on the array border; pad the mask with false cells",
                    c
                )));
            }
        }
        let labels = label_components(&grid, |i| mask[i]);
        if labels.count != 1 {
            return Err(Error::Disconnected(format!("{} components", labels.count)));
        }
        Ok(RasterDomain { grid, mask, true_count })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn is_true(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    #[inline]
    pub fn is_true_cell(&self, c: Cell) -> bool {
        self.grid.contains(c) && self.mask[self.grid.idx(c)]
    }

    #[inline]
    pub fn true_count(&self) -> usize {
        self.true_count
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    /// Lebesgue measure of the true set: `count * h^dim`.
    pub fn measure(&self) -> f64 {
        measure(self.true_count, self.grid.h, self.grid.dim)
    }

    /// Linear indices of all true cells, ascending.
    pub fn true_cells(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    /// Discrete boundary: false cells that touch a true cell through a face,
    /// edge, or corner (8-adjacency in 2D, 26-adjacency in 3D).
    pub fn boundary_cells(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut nbrs: Vec<Cell> = Vec::with_capacity(26);
        for idx in 0..self.mask.len() {
            if self.mask[idx] {
                continue;
            }
            self.grid.all_neighbors(self.grid.cell(idx), &mut nbrs);
            if nbrs.iter().any(|&c| self.mask[self.grid.idx(c)]) {
                out.push(idx);
            }
        }
        out
    }

    /// True cell whose center is nearest to `p` (ties to the smaller index),
    /// or `None` when the mask is empty.
    pub fn nearest_true_cell(&self, p: [f64; 3]) -> Option<usize> {
        if let Some(c) = self.grid.locate(p) {
            let idx = self.grid.idx(c);
            if self.mask[idx] {
                return Some(idx);
            }
        }
        let mut best: Option<(f64, usize)> = None;
        for idx in 0..self.mask.len() {
            if !self.mask[idx] {
                continue;
            }
            let q = self.grid.center(self.grid.cell(idx));
            let d = crate::grid::dist(p, q, self.grid.dim);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, idx));
            }
        }
        best.map(|(_, i)| i)
    }
}

/// Measure of a cell count at spacing `h` in dimension `dim`.
pub fn measure(cells: usize, h: f64, dim: usize) -> f64 {
    cells as f64 * h.powi(dim as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(n: usize) -> (Grid, Vec<bool>) {
        let g = Grid::new2d(n, n, 1.0 / n as f64, [0.0, 0.0]);
        let mut m = vec![false; g.len()];
        for y in 1..n - 1 {
            for x in 1..n - 1 {
                m[g.idx([x, y, 0])] = true;
            }
        }
        (g, m)
    }

    #[test]
    fn accepts_padded_block() {
        let (g, m) = blob(6);
        let d = RasterDomain::new(g, m).unwrap();
        assert_eq!(d.true_count(), 16);
        assert!((d.measure() - 16.0 / 36.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_border_contact() {
        let (g, mut m) = blob(6);
        m[g.idx([0, 3, 0])] = true;
        assert!(matches!(RasterDomain::new(g, m), Err(Error::InvalidMask(_))));
    }

    #[test]
    fn rejects_tiny_mask() {
        let g = Grid::new2d(5, 5, 1.0, [0.0, 0.0]);
        let mut m = vec![false; g.len()];
        for x in 1..4 {
            m[g.idx([x, 2, 0])] = true;
        }
        assert!(matches!(RasterDomain::new(g, m), Err(Error::MaskTooSmall { true_cells: 3 })));
    }

    #[test]
    fn rejects_disconnected() {
        let (g, mut m) = blob(8);
        for y in 1..7 {
            m[g.idx([3, y, 0])] = false;
        }
        assert!(matches!(RasterDomain::new(g, m), Err(Error::Disconnected(_))));
    }

    #[test]
    fn boundary_cells_are_false_and_touching() {
        let (g, m) = blob(6);
        let d = RasterDomain::new(g, m).unwrap();
        let b = d.boundary_cells();
        assert!(!b.is_empty());
        let mut nbrs = Vec::new();
        for idx in b {
            assert!(!d.is_true(idx));
            d.grid().all_neighbors(d.grid().cell(idx), &mut nbrs);
            assert!(nbrs.iter().any(|&c| d.is_true_cell(c)));
        }
    }
}
