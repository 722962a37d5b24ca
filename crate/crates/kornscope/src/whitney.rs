//! Whitney decomposition of a raster domain into dyadic cubes.
//!
//! Cubes are axis-aligned blocks of cells with power-of-two sides, anchored
//! on the dyadic lattice of the grid. A block Q of geometric side `l` is
//! accepted when every member cell is inside the domain and
//!
//! ```text
//! dist(Q) >= sqrt(n) * l,        dist(Q) = min over member cells of rho,
//! ```
//!
//! which in integer form is `min_d2 >= n * side^2` with `side` in cells. The
//! top-down recursion makes the matching upper bound automatic: an accepted
//! block has a rejected parent, so some parent cell sits within
//! `2 sqrt(n) l` of the complement and `dist(Q) < 4 sqrt(n) l` follows. The
//! ratio of side lengths of touching cubes is then below 5, hence at most 4
//! on dyadic sides.
//!
//! True cells that cannot satisfy the lower bound even at side 1 (their
//! center is less than one cell diagonal from the complement) are emitted as
//! `saturated` unit cubes; they hug the boundary and are exempt from the
//! lower bound. Every true cell lands in exactly one cube.

use crate::distance::DistanceField;
use crate::domain::RasterDomain;
use crate::grid::Cell;
use std::collections::HashSet;

/// One dyadic cube: `side_cells` is a power of two, `anchor` its lowest cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WhitneyCube {
    pub anchor: Cell,
    pub side_cells: usize,
    /// Minimum squared cell distance to the complement over member cells.
    pub min_d2: u32,
    /// Unit cell exempt from the lower distance bound.
    pub saturated: bool,
}

/// Marker for cells outside the domain in `cell_to_cube`.
pub const NO_CUBE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct WhitneyDecomposition {
    pub cubes: Vec<WhitneyCube>,
    /// Cube index per cell; `NO_CUBE` on false cells.
    pub cell_to_cube: Vec<u32>,
}

impl WhitneyDecomposition {
    pub fn cube_of_cell(&self, idx: usize) -> Option<&WhitneyCube> {
        match self.cell_to_cube[idx] {
            NO_CUBE => None,
            id => Some(&self.cubes[id as usize]),
        }
    }

    /// Geometric side length of cube `id` on grid spacing `h`.
    pub fn side_len(&self, id: usize, h: f64) -> f64 {
        self.cubes[id].side_cells as f64 * h
    }

    /// dist(Q, complement) in geometric units.
    pub fn dist(&self, id: usize, h: f64) -> f64 {
        h * (self.cubes[id].min_d2 as f64).sqrt()
    }

    /// Cube counts keyed by side length in cells, ascending.
    pub fn side_histogram(&self) -> Vec<(usize, usize)> {
        let mut map = std::collections::BTreeMap::new();
        for c in &self.cubes {
            *map.entry(c.side_cells).or_insert(0usize) += 1;
        }
        map.into_iter().collect()
    }
}

/// Min-distance and all-inside pyramids over dyadic blocks.
struct Pyramid {
    /// Per level: dims and per-block (min_d2, all_true).
    levels: Vec<Level>,
}

struct Level {
    nx: usize,
    ny: usize,
    nz: usize,
    min_d2: Vec<u32>,
    all_true: Vec<bool>,
}

impl Level {
    fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.ny + y) * self.nx + x
    }
}

fn build_pyramid(domain: &RasterDomain, dist: &DistanceField) -> Pyramid {
    let g = domain.grid();
    let mut levels = Vec::new();
    let base = Level {
        nx: g.nx,
        ny: g.ny,
        nz: g.nz,
        min_d2: (0..g.len()).map(|i| dist.d2(i)).collect(),
        all_true: domain.mask().to_vec(),
    };
    levels.push(base);
    while {
        let top = levels.last().unwrap();
        top.nx > 1 || top.ny > 1 || top.nz > 1
    } {
        let prev = levels.last().unwrap();
        let nx = (prev.nx + 1) / 2;
        let ny = (prev.ny + 1) / 2;
        let nz = if prev.nz > 1 { (prev.nz + 1) / 2 } else { 1 };
        let mut min_d2 = vec![0u32; nx * ny * nz];
        let mut all_true = vec![false; nx * ny * nz];
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let mut md = u32::MAX;
                    let mut all = true;
                    let zs = if prev.nz > 1 { 2 } else { 1 };
                    for dz in 0..zs {
                        for dy in 0..2 {
                            for dx in 0..2 {
                                let (cx, cy, cz) = (2 * x + dx, 2 * y + dy, zs * z + dz);
                                if cx < prev.nx && cy < prev.ny && cz < prev.nz {
                                    let i = prev.idx(cx, cy, cz);
                                    md = md.min(prev.min_d2[i]);
                                    all &= prev.all_true[i];
                                } else {
                                    // Beyond the grid: treat as outside.
                                    md = 0;
                                    all = false;
                                }
                            }
                        }
                    }
                    let i = (z * ny + y) * nx + x;
                    min_d2[i] = md;
                    all_true[i] = all;
                }
            }
        }
        levels.push(Level { nx, ny, nz, min_d2, all_true });
    }
    Pyramid { levels }
}

/// Decompose a domain into Whitney cubes. Deterministic: cubes appear in
/// depth-first z-order of the dyadic recursion.
pub fn whitney_decompose(domain: &RasterDomain, dist: &DistanceField) -> WhitneyDecomposition {
    let g = domain.grid();
    let n = g.dim as u32;
    let pyr = build_pyramid(domain, dist);
    let mut cubes = Vec::new();
    let mut cell_to_cube = vec![NO_CUBE; g.len()];

    // Iterative depth-first walk; stack of (level, block coords).
    let top = pyr.levels.len() - 1;
    let mut stack: Vec<(usize, [usize; 3])> = vec![(top, [0, 0, 0])];
    while let Some((lvl, b)) = stack.pop() {
        let level = &pyr.levels[lvl];
        if b[0] >= level.nx || b[1] >= level.ny || b[2] >= level.nz {
            continue;
        }
        let i = level.idx(b[0], b[1], b[2]);
        let side = 1usize << lvl;
        let accept = level.all_true[i]
            && level.min_d2[i] as u64 >= n as u64 * (side as u64) * (side as u64);
        if accept || (lvl == 0 && level.all_true[i]) {
            let id = cubes.len() as u32;
            let anchor = [b[0] << lvl, b[1] << lvl, if g.dim == 3 { b[2] << lvl } else { 0 }];
            cubes.push(WhitneyCube {
                anchor,
                side_cells: side,
                min_d2: level.min_d2[i],
                saturated: !accept,
            });
            paint(g, &mut cell_to_cube, anchor, side, id);
        } else if lvl > 0 {
            // Push children in reverse so the walk visits them in z-order.
            let zs = if g.dim == 3 { 2 } else { 1 };
            for dz in (0..zs).rev() {
                for dy in (0..2).rev() {
                    for dx in (0..2).rev() {
                        stack.push((lvl - 1, [2 * b[0] + dx, 2 * b[1] + dy, 2 * b[2] + dz]));
                    }
                }
            }
        }
        // lvl == 0 and cell false: outside the domain, nothing to emit.
    }

    WhitneyDecomposition { cubes, cell_to_cube }
}

fn paint(g: &crate::grid::Grid, map: &mut [u32], anchor: Cell, side: usize, id: u32) {
    let zs = if g.dim == 3 { side } else { 1 };
    for dz in 0..zs {
        for dy in 0..side {
            let row = ((anchor[2] + dz) * g.ny + anchor[1] + dy) * g.nx + anchor[0];
            map[row..row + side].fill(id);
        }
    }
}

/// Invariant report: structural checks on a decomposition.
#[derive(Debug)]
pub struct WhitneyReport {
    pub cube_count: usize,
    pub saturated_count: usize,
    /// Largest side ratio over touching cube pairs.
    pub max_neighbor_ratio: f64,
    pub violations: Vec<String>,
}

/// Check partition coverage, the two-sided distance bounds, and the touching
/// ratio. A correct decomposition reports zero violations.
pub fn verify_whitney_invariants(
    domain: &RasterDomain,
    dist: &DistanceField,
    dec: &WhitneyDecomposition,
) -> WhitneyReport {
    let g = domain.grid();
    let n = g.dim as u64;
    let mut violations = Vec::new();
    let push = |v: &mut Vec<String>, msg: String| {
        if v.len() < 100 {
            v.push(msg);
        }
    };

    // Coverage: every true cell in exactly one cube, no cube on false cells.
    let mut seen = vec![false; g.len()];
    for (id, c) in dec.cubes.iter().enumerate() {
        let zs = if g.dim == 3 { c.side_cells } else { 1 };
        let mut min_d2 = u32::MAX;
        for dz in 0..zs {
            for dy in 0..c.side_cells {
                for dx in 0..c.side_cells {
                    let cell = [c.anchor[0] + dx, c.anchor[1] + dy, c.anchor[2] + dz];
                    let idx = g.idx(cell);
                    if !domain.is_true(idx) {
                        push(&mut violations, format!("cube {id} covers false cell {cell:?}"));
                    }
                    if seen[idx] {
                        push(&mut violations, format!("cell {cell:?} covered twice"));
                    }
                    seen[idx] = true;
                    if dec.cell_to_cube[idx] != id as u32 {
                        push(&mut violations, format!("cell map disagrees at {cell:?}"));
                    }
                    min_d2 = min_d2.min(dist.d2(idx));
                }
            }
        }
        if min_d2 != c.min_d2 {
            push(&mut violations, format!("cube {id} stores min_d2 {} != {min_d2}", c.min_d2));
        }
        let s2 = (c.side_cells as u64) * (c.side_cells as u64);
        if c.saturated {
            if c.side_cells != 1 || min_d2 as u64 >= n {
                push(&mut violations, format!("cube {id} wrongly saturated"));
            }
        } else {
            // Lower bound: dist >= sqrt(n) * l, exact in integers.
            if (min_d2 as u64) < n * s2 {
                push(&mut violations, format!("cube {id} below distance lower bound"));
            }
            // Upper bound: dist <= 4 sqrt(n) * l, exact in integers.
            if min_d2 as u64 > 16 * n * s2 {
                push(&mut violations, format!("cube {id} above distance upper bound"));
            }
        }
    }
    for idx in 0..g.len() {
        if domain.is_true(idx) && !seen[idx] {
            push(&mut violations, format!("true cell {:?} uncovered", g.cell(idx)));
        }
        if domain.is_true(idx) != (dec.cell_to_cube[idx] != NO_CUBE) {
            push(&mut violations, format!("cell map mismatch at {:?}", g.cell(idx)));
        }
    }

    // Touching ratio over distinct cube pairs.
    let mut pairs: HashSet<(u32, u32)> = HashSet::new();
    let mut nbrs = Vec::new();
    for idx in 0..g.len() {
        let a = dec.cell_to_cube[idx];
        if a == NO_CUBE {
            continue;
        }
        g.all_neighbors(g.cell(idx), &mut nbrs);
        for &nc in &nbrs {
            let b = dec.cell_to_cube[g.idx(nc)];
            if b != NO_CUBE && b != a {
                pairs.insert((a.min(b), a.max(b)));
            }
        }
    }
    let mut max_ratio = 1.0f64;
    for &(a, b) in &pairs {
        let sa = dec.cubes[a as usize].side_cells as f64;
        let sb = dec.cubes[b as usize].side_cells as f64;
        let r = (sa / sb).max(sb / sa);
        max_ratio = max_ratio.max(r);
        if r > 4.0 {
            push(
                &mut violations,
                format!("touching cubes {a} and {b} have side ratio {r}"),
            );
        }
    }

    WhitneyReport {
        cube_count: dec.cubes.len(),
        saturated_count: dec.cubes.iter().filter(|c| c.saturated).count(),
        max_neighbor_ratio: max_ratio,
        violations,
    }
}
