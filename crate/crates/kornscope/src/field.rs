//! Vector fields and finite-difference operators on raster domains.
//!
//! A field stores one value per cell per component, component-major: the
//! value of component `i` at scalar dof `d` sits at `i*n + d`. Gradients
//! are centered difference quotients; the two boundary rules are exactly
//! the ones the constants downstream need. `OneSided` falls back to a
//! one-sided quotient where a neighbor is missing: it imposes no boundary
//! condition and is exact on affine fields, so rigid motions lie in the
//! kernel of the strain operator and Korn quotients are uncontaminated.
//! `ZeroExtension` treats missing values as zero: the matrix transpose is
//! then the exact discrete adjoint (summation by parts), which is what the
//! divergence equation and the inf-sup constant want.

use crate::domain::RasterDomain;
use crate::grid::Grid;
use crate::sparse::Csr;

pub const NO_DOF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffRule {
    /// Centered where both neighbors carry a dof, one-sided where only one
    /// does, zero where neither does.
    OneSided,
    /// Centered quotient with missing neighbors read as zero.
    ZeroExtension,
}

/// The set of cells carrying field values, with forward and inverse maps
/// between grid indices and dense dof numbers.
#[derive(Debug, Clone)]
pub struct FieldSpace {
    grid: Grid,
    dim: usize,
    dofs: Vec<u32>,
    cell_dof: Vec<u32>,
}

impl FieldSpace {
    /// One scalar dof per true cell.
    pub fn full(domain: &RasterDomain) -> FieldSpace {
        let grid = domain.grid().clone();
        let mut dofs = Vec::with_capacity(domain.true_count());
        let mut cell_dof = vec![NO_DOF; grid.len()];
        for idx in 0..grid.len() {
            if domain.is_true(idx) {
                cell_dof[idx] = dofs.len() as u32;
                dofs.push(idx as u32);
            }
        }
        FieldSpace { grid, dim: domain.dim(), dofs, cell_dof }
    }

    /// Dofs only on true cells whose face neighbors are all true. Fields in
    /// this space vanish on the one-cell collar, the hard form of a zero
    /// boundary condition.
    pub fn interior(domain: &RasterDomain) -> FieldSpace {
        let grid = domain.grid().clone();
        let mut dofs = Vec::new();
        let mut cell_dof = vec![NO_DOF; grid.len()];
        let mut nbrs = Vec::with_capacity(6);
        for idx in 0..grid.len() {
            if !domain.is_true(idx) {
                continue;
            }
            grid.face_neighbors(grid.cell(idx), &mut nbrs);
            let fits = nbrs.len() == 2 * domain.dim()
                && nbrs.iter().all(|&c| domain.is_true(grid.idx(c)));
            if fits {
                cell_dof[idx] = dofs.len() as u32;
                dofs.push(idx as u32);
            }
        }
        FieldSpace { grid, dim: domain.dim(), dofs, cell_dof }
    }

    pub fn n(&self) -> usize {
        self.dofs.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total unknowns of a vector field: dim components per scalar dof.
    pub fn ndofs(&self) -> usize {
        self.dim * self.dofs.len()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dof_cells(&self) -> &[u32] {
        &self.dofs
    }

    pub fn dof_of(&self, idx: usize) -> Option<usize> {
        let d = self.cell_dof[idx];
        if d == NO_DOF {
            None
        } else {
            Some(d as usize)
        }
    }

    pub fn cell_measure(&self) -> f64 {
        self.grid.h.powi(self.dim as i32)
    }

    /// Mean of the dof cell centers, the natural center for rotation fields.
    pub fn centroid(&self) -> [f64; 3] {
        let mut m = [0.0f64; 3];
        for &idx in &self.dofs {
            let c = self.grid.center(self.grid.cell(idx as usize));
            for a in 0..3 {
                m[a] += c[a];
            }
        }
        for a in m.iter_mut() {
            *a /= self.dofs.len() as f64;
        }
        m
    }

    /// Difference stencil for d/dx_axis at a dof: up to two (scalar dof,
    /// coefficient) pairs. Single source of truth for every operator below.
    fn diff_stencil(&self, dof: usize, axis: usize, rule: DiffRule) -> ([(u32, f64); 2], usize) {
        let idx = self.dofs[dof] as usize;
        let c = self.grid.cell(idx);
        let h = self.grid.h;
        let dims = [self.grid.nx, self.grid.ny, self.grid.nz];
        let minus = if c[axis] > 0 {
            let mut cc = c;
            cc[axis] -= 1;
            let d = self.cell_dof[self.grid.idx(cc)];
            if d == NO_DOF {
                None
            } else {
                Some(d)
            }
        } else {
            None
        };
        let plus = if c[axis] + 1 < dims[axis] {
            let mut cc = c;
            cc[axis] += 1;
            let d = self.cell_dof[self.grid.idx(cc)];
            if d == NO_DOF {
                None
            } else {
                Some(d)
            }
        } else {
            None
        };
        let mut out = [(0u32, 0.0f64); 2];
        let count = match (minus, plus, rule) {
            (Some(m), Some(p), _) => {
                out[0] = (m, -0.5 / h);
                out[1] = (p, 0.5 / h);
                2
            }
            (Some(m), None, DiffRule::OneSided) => {
                out[0] = (m, -1.0 / h);
                out[1] = (self.cell_dof[idx], 1.0 / h);
                2
            }
            (None, Some(p), DiffRule::OneSided) => {
                out[0] = (self.cell_dof[idx], -1.0 / h);
                out[1] = (p, 1.0 / h);
                2
            }
            (Some(m), None, DiffRule::ZeroExtension) => {
                out[0] = (m, -0.5 / h);
                1
            }
            (None, Some(p), DiffRule::ZeroExtension) => {
                out[0] = (p, 0.5 / h);
                1
            }
            (None, None, _) => 0,
        };
        (out, count)
    }

    /// Full gradient operator: row `cell*dim*dim + i*dim + j` holds the
    /// quotient for d(u_i)/dx_j. Columns are vector-field unknowns.
    pub fn gradient_matrix(&self, rule: DiffRule) -> Csr {
        let n = self.n();
        let d = self.dim;
        let mut trips: Vec<(u32, u32, f64)> = Vec::with_capacity(2 * d * d * n);
        for dof in 0..n {
            for j in 0..d {
                let (st, cnt) = self.diff_stencil(dof, j, rule);
                for i in 0..d {
                    let row = (dof * d * d + i * d + j) as u32;
                    for &(col, w) in &st[..cnt] {
                        trips.push((row, (i * n) as u32 + col, w));
                    }
                }
            }
        }
        Csr::from_triplets(d * d * n, d * n, &mut trips)
    }

    /// Symmetric-gradient operator with Frobenius weights: per cell the rows
    /// are the diagonal strains followed by sqrt(2) times the off-diagonal
    /// ones, so squared row blocks sum to |eps|_F^2.
    pub fn strain_matrix(&self, rule: DiffRule) -> Csr {
        let n = self.n();
        let d = self.dim;
        let nsym = d * (d + 1) / 2;
        let mut trips: Vec<(u32, u32, f64)> = Vec::with_capacity(2 * nsym * n);
        let pairs = strain_pairs(d);
        for dof in 0..n {
            let mut st = Vec::with_capacity(d);
            for j in 0..d {
                st.push(self.diff_stencil(dof, j, rule));
            }
            for (k, &(i, j)) in pairs.iter().enumerate() {
                let row = (dof * nsym + k) as u32;
                if i == j {
                    let (s, cnt) = st[i];
                    for &(col, w) in &s[..cnt] {
                        trips.push((row, (i * n) as u32 + col, w));
                    }
                } else {
                    // sqrt(2) * (d_j u_i + d_i u_j) / 2
                    let half = std::f64::consts::SQRT_2 / 2.0;
                    let (sj, cj) = st[j];
                    for &(col, w) in &sj[..cj] {
                        trips.push((row, (i * n) as u32 + col, half * w));
                    }
                    let (si, ci) = st[i];
                    for &(col, w) in &si[..ci] {
                        trips.push((row, (j * n) as u32 + col, half * w));
                    }
                }
            }
        }
        Csr::from_triplets(nsym * n, d * n, &mut trips)
    }

    /// Gradient operator evaluated at this space's cells for a field living
    /// in `velocity`, zero extension built in. Row layout matches
    /// `gradient_matrix`; columns are velocity unknowns. The rows at cells
    /// outside the velocity space are what make the Gram matrix the honest
    /// H1 energy of the zero-extended field.
    pub fn gradient_from(&self, velocity: &FieldSpace) -> Csr {
        assert_eq!(self.dim, velocity.dim);
        let n = self.n();
        let nv = velocity.n();
        let d = self.dim;
        let h = self.grid.h;
        let dims = [self.grid.nx, self.grid.ny, self.grid.nz];
        let mut trips: Vec<(u32, u32, f64)> = Vec::with_capacity(2 * d * d * n);
        for dof in 0..n {
            let c = self.grid.cell(self.dofs[dof] as usize);
            for j in 0..d {
                let mut st = [(0u32, 0.0f64); 2];
                let mut cnt = 0;
                if c[j] > 0 {
                    let mut cc = c;
                    cc[j] -= 1;
                    let vd = velocity.cell_dof[self.grid.idx(cc)];
                    if vd != NO_DOF {
                        st[cnt] = (vd, -0.5 / h);
                        cnt += 1;
                    }
                }
                if c[j] + 1 < dims[j] {
                    let mut cc = c;
                    cc[j] += 1;
                    let vd = velocity.cell_dof[self.grid.idx(cc)];
                    if vd != NO_DOF {
                        st[cnt] = (vd, 0.5 / h);
                        cnt += 1;
                    }
                }
                for i in 0..d {
                    let row = (dof * d * d + i * d + j) as u32;
                    for &(col, w) in &st[..cnt] {
                        trips.push((row, (i * nv) as u32 + col, w));
                    }
                }
            }
        }
        Csr::from_triplets(d * d * n, d * nv, &mut trips)
    }

    /// Divergence operator from a velocity space onto this (pressure) space,
    /// zero extension built in: velocity values outside `velocity` read as
    /// zero. Row per pressure dof, column per velocity unknown.
    pub fn divergence_from(&self, velocity: &FieldSpace) -> Csr {
        assert_eq!(self.dim, velocity.dim);
        let n = self.n();
        let nv = velocity.n();
        let d = self.dim;
        let h = self.grid.h;
        let dims = [self.grid.nx, self.grid.ny, self.grid.nz];
        let mut trips: Vec<(u32, u32, f64)> = Vec::with_capacity(2 * d * n);
        for dof in 0..n {
            let c = self.grid.cell(self.dofs[dof] as usize);
            for i in 0..d {
                // d(v_i)/dx_i with values looked up in the velocity space.
                if c[i] > 0 {
                    let mut cc = c;
                    cc[i] -= 1;
                    let vd = velocity.cell_dof[self.grid.idx(cc)];
                    if vd != NO_DOF {
                        trips.push((dof as u32, (i * nv) as u32 + vd, -0.5 / h));
                    }
                }
                if c[i] + 1 < dims[i] {
                    let mut cc = c;
                    cc[i] += 1;
                    let vd = velocity.cell_dof[self.grid.idx(cc)];
                    if vd != NO_DOF {
                        trips.push((dof as u32, (i * nv) as u32 + vd, 0.5 / h));
                    }
                }
            }
        }
        Csr::from_triplets(n, d * nv, &mut trips)
    }

    /// Linear functionals u -> sum over cells of kappa_{i,j}(u), one per
    /// index pair i < j, unweighted by cell measure.
    pub fn rotation_constraints(&self, rule: DiffRule) -> Vec<Vec<f64>> {
        let n = self.n();
        let d = self.dim;
        let mut out = Vec::new();
        for (i, j) in antisym_pairs(d) {
            let mut g = vec![0.0f64; d * n];
            for dof in 0..n {
                // kappa_{i,j} = (d_j u_i - d_i u_j) / 2
                let (sj, cj) = self.diff_stencil(dof, j, rule);
                for &(col, w) in &sj[..cj] {
                    g[i * n + col as usize] += 0.5 * w;
                }
                let (si, ci) = self.diff_stencil(dof, i, rule);
                for &(col, w) in &si[..ci] {
                    g[j * n + col as usize] -= 0.5 * w;
                }
            }
            out.push(g);
        }
        out
    }

    /// Constant unit field per component.
    pub fn constant_fields(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let d = self.dim;
        (0..d)
            .map(|i| {
                let mut v = vec![0.0; d * n];
                v[i * n..(i + 1) * n].fill(1.0);
                v
            })
            .collect()
    }

    /// Centered rigid rotations, one per index pair i < j:
    /// u_i = -(x_j - m_j), u_j = x_i - m_i.
    pub fn rotation_fields(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let d = self.dim;
        let m = self.centroid();
        antisym_pairs(d)
            .into_iter()
            .map(|(i, j)| {
                let mut v = vec![0.0; d * n];
                for (dof, &idx) in self.dofs.iter().enumerate() {
                    let c = self.grid.center(self.grid.cell(idx as usize));
                    v[i * n + dof] = -(c[j] - m[j]);
                    v[j * n + dof] = c[i] - m[i];
                }
                v
            })
            .collect()
    }

    /// Sample an analytic field at dof centers into component-major layout.
    pub fn sample(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Vec<f64> {
        let n = self.n();
        let d = self.dim;
        let mut v = vec![0.0; d * n];
        for (dof, &idx) in self.dofs.iter().enumerate() {
            let val = f(self.grid.center(self.grid.cell(idx as usize)));
            for i in 0..d {
                v[i * n + dof] = val[i];
            }
        }
        v
    }

    /// Derivative of a scalar cell field along one axis, matrix-free.
    pub fn scalar_derivative(&self, f: &[f64], axis: usize, rule: DiffRule) -> Vec<f64> {
        let n = self.n();
        assert_eq!(f.len(), n);
        let mut out = vec![0.0; n];
        for dof in 0..n {
            let (st, cnt) = self.diff_stencil(dof, axis, rule);
            let mut acc = 0.0;
            for &(col, w) in &st[..cnt] {
                acc += w * f[col as usize];
            }
            out[dof] = acc;
        }
        out
    }

    /// Per-cell gradient entries of a field, matrix-free, laid out like the
    /// rows of `gradient_matrix`: entry (cell, i, j) at cell*dim*dim+i*dim+j.
    pub fn gradient_entries(&self, u: &[f64], rule: DiffRule) -> Vec<f64> {
        let n = self.n();
        let d = self.dim;
        assert_eq!(u.len(), d * n);
        let mut out = vec![0.0; d * d * n];
        for dof in 0..n {
            for j in 0..d {
                let (st, cnt) = self.diff_stencil(dof, j, rule);
                for i in 0..d {
                    let mut acc = 0.0;
                    for &(col, w) in &st[..cnt] {
                        acc += w * u[i * n + col as usize];
                    }
                    out[dof * d * d + i * d + j] = acc;
                }
            }
        }
        out
    }
}

/// Row order of `strain_matrix`: diagonal pairs first, then i < j.
pub fn strain_pairs(dim: usize) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = (0..dim).map(|i| (i, i)).collect();
    v.extend(antisym_pairs(dim));
    v
}

pub fn antisym_pairs(dim: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for i in 0..dim {
        for j in i + 1..dim {
            v.push((i, j));
        }
    }
    v
}

/// Symmetric part of per-cell gradient entries, same layout.
pub fn symmetric_part(grad: &[f64], dim: usize) -> Vec<f64> {
    let w = dim * dim;
    let mut out = vec![0.0; grad.len()];
    for (cell, chunk) in grad.chunks_exact(w).enumerate() {
        for i in 0..dim {
            for j in 0..dim {
                out[cell * w + i * dim + j] = 0.5 * (chunk[i * dim + j] + chunk[j * dim + i]);
            }
        }
    }
    out
}

/// Antisymmetric part of per-cell gradient entries, same layout.
pub fn antisymmetric_part(grad: &[f64], dim: usize) -> Vec<f64> {
    let w = dim * dim;
    let mut out = vec![0.0; grad.len()];
    for (cell, chunk) in grad.chunks_exact(w).enumerate() {
        for i in 0..dim {
            for j in 0..dim {
                out[cell * w + i * dim + j] = 0.5 * (chunk[i * dim + j] - chunk[j * dim + i]);
            }
        }
    }
    out
}

/// Sum over cells of kappa_{1,2} read from gradient entries, unweighted.
pub fn kappa12_sum(grad: &[f64], dim: usize) -> f64 {
    let w = dim * dim;
    grad.chunks_exact(w).map(|g| 0.5 * (g[dim] - g[1])).sum::<f64>()
}

/// L^p norm over cells of the entrywise max of each chunk:
/// (sum_cells (max_k |chunk_k|)^p * measure)^(1/p).
pub fn lp_cellwise_max(vals: &[f64], width: usize, p: f64, cell_measure: f64) -> f64 {
    assert!(width > 0 && vals.len() % width == 0);
    let s: f64 = vals
        .chunks_exact(width)
        .map(|c| {
            let m = c.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            m.powf(p)
        })
        .sum();
    (s * cell_measure).powf(1.0 / p)
}

/// L^p norm over cells of the Frobenius norm of each chunk.
pub fn lp_cellwise_frobenius(vals: &[f64], width: usize, p: f64, cell_measure: f64) -> f64 {
    assert!(width > 0 && vals.len() % width == 0);
    let s: f64 = vals
        .chunks_exact(width)
        .map(|c| {
            let m = c.iter().map(|&x| x * x).sum::<f64>().sqrt();
            m.powf(p)
        })
        .sum();
    (s * cell_measure).powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{rasterize, DomainSpec};
    use crate::sparse::dot;

    fn square(res: usize) -> RasterDomain {
        rasterize(&DomainSpec::Square, res).unwrap()
    }

    #[test]
    fn identity_field_has_identity_gradient() {
        let d = square(16);
        let fs = FieldSpace::full(&d);
        let u = fs.sample(|p| [p[0], p[1], 0.0]);
        let g = fs.gradient_entries(&u, DiffRule::OneSided);
        for chunk in g.chunks_exact(4) {
            assert!((chunk[0] - 1.0).abs() < 1e-12);
            assert!(chunk[1].abs() < 1e-12);
            assert!(chunk[2].abs() < 1e-12);
            assert!((chunk[3] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rigid_rotation_has_zero_strain_everywhere() {
        let d = square(16);
        let fs = FieldSpace::full(&d);
        let u = fs.sample(|p| [-p[1], p[0], 0.0]);
        let e = fs.strain_matrix(DiffRule::OneSided);
        let mut out = vec![0.0; e.nrows];
        e.matvec(&u, &mut out);
        let max = out.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        assert!(max < 1e-12, "strain of rigid rotation {max}");
        let g = fs.rotation_constraints(DiffRule::OneSided);
        let total = dot(&g[0], &u);
        assert!((total + fs.n() as f64).abs() < 1e-9, "kappa12 sum {total}");
    }

    #[test]
    fn polynomial_gradient_is_second_order_in_the_interior() {
        let d = square(32);
        let fs = FieldSpace::full(&d);
        let u = fs.sample(|p| [p[0] * p[0] * p[1], p[0] * p[1] * p[1], 0.0]);
        let g = fs.gradient_entries(&u, DiffRule::OneSided);
        let grid = fs.grid().clone();
        let h = grid.h;
        let mut worst = 0.0f64;
        for (dof, &idx) in fs.dof_cells().iter().enumerate() {
            let c = grid.cell(idx as usize);
            // Stay two cells away from the mask edge so every stencil in
            // sight is centered.
            if c[0] < 4 || c[1] < 4 || c[0] + 4 >= grid.nx || c[1] + 4 >= grid.ny {
                continue;
            }
            let p = grid.center(c);
            let exact = [2.0 * p[0] * p[1], p[0] * p[0], p[1] * p[1], 2.0 * p[0] * p[1]];
            for k in 0..4 {
                worst = worst.max((g[dof * 4 + k] - exact[k]).abs());
            }
        }
        assert!(worst < 2.0 * h * h, "interior gradient error {worst} at h={h}");
    }

    #[test]
    fn divergence_columns_sum_to_zero() {
        let d = rasterize(&DomainSpec::Disk, 24).unwrap();
        let pressure = FieldSpace::full(&d);
        let velocity = FieldSpace::interior(&d);
        assert!(velocity.n() > 0 && velocity.n() < pressure.n());
        let s = pressure.divergence_from(&velocity);
        let ones = vec![1.0; s.nrows];
        let mut colsums = vec![0.0; s.ncols];
        s.transpose().matvec(&ones, &mut colsums);
        let max = colsums.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        assert!(max < 1e-12, "column sum {max}");
    }

    #[test]
    fn divergence_of_linear_field_is_one_deep_inside() {
        let d = square(24);
        let pressure = FieldSpace::full(&d);
        let velocity = FieldSpace::interior(&d);
        let s = pressure.divergence_from(&velocity);
        let v = velocity.sample(|p| [p[0], 0.0, 0.0]);
        let mut div = vec![0.0; pressure.n()];
        s.matvec(&v, &mut div);
        let grid = pressure.grid().clone();
        for (dof, &idx) in pressure.dof_cells().iter().enumerate() {
            let c = grid.cell(idx as usize);
            if c[0] < 5 || c[1] < 5 || c[0] + 5 >= grid.nx || c[1] + 5 >= grid.ny {
                continue;
            }
            assert!((div[dof] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn norm_helpers_agree_on_singleton_chunks() {
        let vals = [3.0, -4.0];
        let max = lp_cellwise_max(&vals, 1, 2.0, 0.25);
        let fro = lp_cellwise_frobenius(&vals, 1, 2.0, 0.25);
        assert!((max - 2.5).abs() < 1e-12);
        assert!((fro - 2.5).abs() < 1e-12);
        let both = lp_cellwise_max(&vals, 2, 2.0, 1.0);
        assert!((both - 4.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_antisymmetric_parts_recompose() {
        let g = [1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 2.5, 7.0];
        let e = symmetric_part(&g, 2);
        let k = antisymmetric_part(&g, 2);
        for i in 0..8 {
            assert!((e[i] + k[i] - g[i]).abs() < 1e-15);
        }
        assert!((e[1] - e[2]).abs() < 1e-15);
        assert!((k[1] + k[2]).abs() < 1e-15);
        assert!((kappa12_sum(&g, 2) - (0.5 * (3.0 - 2.0) + 0.5 * (2.5 - 0.5))).abs() < 1e-15);
    }
}
