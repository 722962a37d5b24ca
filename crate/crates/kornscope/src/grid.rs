//! Axis-aligned cell grids in two or three dimensions.
//!
//! A [`Grid`] describes the lattice a raster mask lives on: cell counts per
//! axis, the spacing `h`, and the real-space coordinate of the lower corner
//! of cell `(0,0,0)`. Cells are addressed either by integer coordinates
//! (`[usize; 3]`, with the third component fixed to 0 in 2D) or by the
//! row-major linear index with x fastest.

/// Integer cell coordinates; `c[2] == 0` whenever the grid is 2D.
pub type Cell = [usize; 3];

/// Grid geometry. `nz == 1` exactly when `dim == 2`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Cell side length in domain units; strictly positive.
    pub h: f64,
    /// Real coordinate of the lower corner of cell (0,0,0).
    pub origin: [f64; 3],
}

impl Grid {
    pub fn new2d(nx: usize, ny: usize, h: f64, origin: [f64; 2]) -> Self {
        Grid { dim: 2, nx, ny, nz: 1, h, origin: [origin[0], origin[1], 0.0] }
    }

    pub fn new3d(nx: usize, ny: usize, nz: usize, h: f64, origin: [f64; 3]) -> Self {
        Grid { dim: 3, nx, ny, nz, h, origin }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, c: Cell) -> usize {
        (c[2] * self.ny + c[1]) * self.nx + c[0]
    }

    #[inline]
    pub fn cell(&self, idx: usize) -> Cell {
        let x = idx % self.nx;
        let r = idx / self.nx;
        [x, r % self.ny, r / self.ny]
    }

    #[inline]
    pub fn contains(&self, c: Cell) -> bool {
        c[0] < self.nx && c[1] < self.ny && c[2] < self.nz
    }

    /// Center of a cell in real coordinates (third component 0 in 2D).
    #[inline]
    pub fn center(&self, c: Cell) -> [f64; 3] {
        let z = if self.dim == 3 { self.origin[2] + (c[2] as f64 + 0.5) * self.h } else { 0.0 };
        [
            self.origin[0] + (c[0] as f64 + 0.5) * self.h,
            self.origin[1] + (c[1] as f64 + 0.5) * self.h,
            z,
        ]
    }

    /// Cell whose half-open box `[origin + i*h, origin + (i+1)*h)` contains `p`,
    /// or `None` if `p` is outside the grid.
    pub fn locate(&self, p: [f64; 3]) -> Option<Cell> {
        let mut c = [0usize; 3];
        let n = [self.nx, self.ny, self.nz];
        for a in 0..3 {
            let v = if a < self.dim { (p[a] - self.origin[a]) / self.h } else { 0.0 };
            if a < self.dim {
                if v < 0.0 {
                    return None;
                }
                let i = v.floor() as usize;
                if i >= n[a] {
                    return None;
                }
                c[a] = i;
            }
        }
        Some(c)
    }

    /// Face neighbors (4 in 2D, 6 in 3D) that stay inside the grid.
    pub fn face_neighbors(&self, c: Cell, out: &mut Vec<Cell>) {
        out.clear();
        let n = [self.nx, self.ny, self.nz];
        for a in 0..self.dim {
            if c[a] > 0 {
                let mut d = c;
                d[a] -= 1;
                out.push(d);
            }
            if c[a] + 1 < n[a] {
                let mut d = c;
                d[a] += 1;
                out.push(d);
            }
        }
    }

    /// All neighbors sharing a face, edge, or corner (8 in 2D, 26 in 3D).
    pub fn all_neighbors(&self, c: Cell, out: &mut Vec<Cell>) {
        out.clear();
        let zr = if self.dim == 3 { -1i64..=1 } else { 0i64..=0 };
        for dz in zr {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let x = c[0] as i64 + dx;
                    let y = c[1] as i64 + dy;
                    let z = c[2] as i64 + dz;
                    if x < 0 || y < 0 || z < 0 {
                        continue;
                    }
                    let d = [x as usize, y as usize, z as usize];
                    if self.contains(d) {
                        out.push(d);
                    }
                }
            }
        }
    }

    /// Euclidean distance between two cell centers.
    #[inline]
    pub fn center_dist(&self, a: Cell, b: Cell) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim {
            let d = a[k] as f64 - b[k] as f64;
            s += d * d;
        }
        s.sqrt() * self.h
    }
}

/// Euclidean distance between two points, ignoring components past `dim`.
#[inline]
pub fn dist(a: [f64; 3], b: [f64; 3], dim: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..dim {
        let d = a[k] - b[k];
        s += d * d;
    }
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        let g = Grid::new3d(5, 7, 3, 0.5, [0.0, 0.0, 0.0]);
        for idx in 0..g.len() {
            assert_eq!(g.idx(g.cell(idx)), idx);
        }
    }

    #[test]
    fn locate_matches_center() {
        let g = Grid::new2d(8, 8, 0.25, [-1.0, -1.0]);
        for idx in 0..g.len() {
            let c = g.cell(idx);
            assert_eq!(g.locate(g.center(c)), Some(c));
        }
        assert_eq!(g.locate([-1.01, 0.0, 0.0]), None);
        assert_eq!(g.locate([1.0, 0.0, 0.0]), None);
    }

    #[test]
    fn neighbor_counts() {
        let g = Grid::new2d(4, 4, 1.0, [0.0, 0.0]);
        let mut v = Vec::new();
        g.face_neighbors([1, 1, 0], &mut v);
        assert_eq!(v.len(), 4);
        g.face_neighbors([0, 0, 0], &mut v);
        assert_eq!(v.len(), 2);
        g.all_neighbors([1, 1, 0], &mut v);
        assert_eq!(v.len(), 8);
        let g3 = Grid::new3d(4, 4, 4, 1.0, [0.0; 3]);
        g3.all_neighbors([1, 1, 1], &mut v);
        assert_eq!(v.len(), 26);
    }
}
