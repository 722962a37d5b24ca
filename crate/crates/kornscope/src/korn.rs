//! Korn constants on raster domains.
//!
//! The p = 2 constants come from the smallest generalized eigenvalue of the
//! strain Gram matrix against the gradient Gram matrix, restricted to the
//! admissible subspace: mean antisymmetric part zero for the standard
//! constant, or with an added gradient energy over a fixed interior cube
//! for the hat variant. The eigensolver works in the Frobenius inner
//! product; the entrywise-max convention used for reported constants
//! differs from it by at most a factor of the dimension, and method tags
//! say which convention a value carries. For p != 2 a projected ascent on
//! a smooth surrogate ratio runs from several deterministic starts, and the
//! reported value is the exact max-convention ratio of the best iterate, a
//! valid lower bound.
//!
//! The same module builds the separating-ball counterexample fields: a
//! cutoff rotation supported on a ball end, plus the global rigid
//! correction that makes the total antisymmetric mean exactly zero, and the
//! measure-ratio lower bound they certify.

use crate::distance::DistanceField;
use crate::domain::RasterDomain;
use crate::field::{kappa12_sum, lp_cellwise_max, symmetric_part, DiffRule, FieldSpace};
use crate::grid::Cell;
use crate::john::BallEnd;
use crate::report::{Bound, ConstantEstimate, ConstantName};
use crate::sparse::{
    dot, gram, smallest_generalized_eig, vstack, Csr, EigOptions, Projector, SymGaussSeidel,
};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Which Korn constant to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KornMode {
    /// K_p: quotient over fields with mean antisymmetric part zero.
    Standard,
    /// K_hat_p: unconstrained quotient with the gradient energy over a
    /// fixed interior cube added to the denominator.
    FixedCube,
}

/// Axis-aligned cube in cell coordinates: `side` cells along each axis
/// starting at `anchor`.
#[derive(Debug, Clone, Copy)]
pub struct CellCube {
    pub anchor: Cell,
    pub side: usize,
}

impl CellCube {
    pub fn contains(&self, c: Cell, dim: usize) -> bool {
        (0..dim).all(|a| c[a] >= self.anchor[a] && c[a] < self.anchor[a] + self.side)
            && (dim == 3 || c[2] == self.anchor[2])
    }
}

/// Largest cube centered on the deepest cell whose one-cell inflation is
/// still inside the mask. Always has odd side and at least the margin the
/// hat constant requires.
pub fn default_interior_cube(domain: &RasterDomain, dist: &DistanceField) -> Result<CellCube> {
    let g = domain.grid();
    let (deepest_idx, _) = dist.deepest_cell();
    let center = g.cell(deepest_idx);
    let mut half = 0usize;
    loop {
        let next = half + 1;
        if !inflated_cube_inside(domain, center, next) {
            break;
        }
        half = next;
    }
    if !inflated_cube_inside(domain, center, half) {
        return Err(Error::InvalidParameter(
            "domain has no interior cell with a one-cell margin for the fixed cube".into(),
        ));
    }
    let anchor = [
        center[0] - half,
        center[1] - half,
        if g.dim == 3 { center[2] - half } else { center[2] },
    ];
    Ok(CellCube { anchor, side: 2 * half + 1 })
}

/// All cells of the cube inflated by `margin` exist and are true.
fn inflated_cube_inside(domain: &RasterDomain, center: Cell, half: usize) -> bool {
    let g = domain.grid();
    let dim = g.dim;
    let m = half + 1;
    let dims = [g.nx, g.ny, g.nz];
    for a in 0..dim {
        if center[a] < m || center[a] + m >= dims[a] {
            return false;
        }
    }
    let lo = |a: usize| center[a] - m;
    let hi = |a: usize| center[a] + m;
    let zr = if dim == 3 { (lo(2), hi(2)) } else { (center[2], center[2]) };
    for z in zr.0..=zr.1 {
        for y in lo(1)..=hi(1) {
            for x in lo(0)..=hi(0) {
                if !domain.is_true_cell([x, y, z]) {
                    return false;
                }
            }
        }
    }
    true
}

fn validate_cube(domain: &RasterDomain, q: &CellCube) -> Result<()> {
    let g = domain.grid();
    if q.side == 0 {
        return Err(Error::InvalidParameter("fixed cube has zero side".into()));
    }
    let dim = g.dim;
    let dims = [g.nx, g.ny, g.nz];
    for a in 0..dim {
        if q.anchor[a] == 0 || q.anchor[a] + q.side + 1 > dims[a] {
            return Err(Error::InvalidParameter(
                "fixed cube violates the one-cell margin".into(),
            ));
        }
    }
    let zr = if dim == 3 {
        (q.anchor[2] - 1, q.anchor[2] + q.side)
    } else {
        (q.anchor[2], q.anchor[2])
    };
    for z in zr.0..=zr.1 {
        for y in q.anchor[1] - 1..=q.anchor[1] + q.side {
            for x in q.anchor[0] - 1..=q.anchor[0] + q.side {
                if !domain.is_true_cell([x, y, z]) {
                    return Err(Error::InvalidParameter(
                        "fixed cube (with margin) leaves the mask".into(),
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Result of a Korn estimate: the constant plus the extremal field that
/// witnessed it, in component-major layout on the full field space.
#[derive(Debug, Clone)]
pub struct KornSolution {
    pub estimate: ConstantEstimate,
    pub field: Vec<f64>,
    /// Smallest pencil eigenvalue for p = 2 solves.
    pub lambda: Option<f64>,
    pub converged: bool,
    pub outer_iters: usize,
}

/// Keep only the rows belonging to cells accepted by the predicate; row
/// count and numbering stay unchanged so Gram products line up.
fn filter_cell_rows(m: &Csr, rows_per_cell: usize, keep: impl Fn(usize) -> bool) -> Csr {
    let mut trips: Vec<(u32, u32, f64)> = Vec::new();
    for r in 0..m.nrows {
        if !keep(r / rows_per_cell) {
            continue;
        }
        for k in m.indptr[r]..m.indptr[r + 1] {
            trips.push((r as u32, m.indices[k], m.data[k]));
        }
    }
    Csr::from_triplets(m.nrows, m.ncols, &mut trips)
}

struct KornSetup {
    space: FieldSpace,
    e: Csr,
    g: Csr,
    /// Gradient rows restricted to the fixed cube, for the hat variant.
    gq: Option<Csr>,
    projector: Projector,
    /// Raw mean-rotation functionals, one per index pair.
    constraints: Vec<Vec<f64>>,
}

fn setup(domain: &RasterDomain, mode: KornMode, q: Option<CellCube>) -> Result<KornSetup> {
    let space = FieldSpace::full(domain);
    let dim = space.dim();
    let e = space.strain_matrix(DiffRule::OneSided);
    let g = space.gradient_matrix(DiffRule::OneSided);
    let constraints = space.rotation_constraints(DiffRule::OneSided);
    let (gq, removed) = match mode {
        KornMode::Standard => {
            let mut basis = space.constant_fields();
            basis.extend(constraints.iter().cloned());
            (None, basis)
        }
        KornMode::FixedCube => {
            let cube = match q {
                Some(c) => {
                    validate_cube(domain, &c)?;
                    c
                }
                None => {
                    let dist = DistanceField::compute(domain)?;
                    default_interior_cube(domain, &dist)?
                }
            };
            let grid = space.grid().clone();
            let dofs = space.dof_cells().to_vec();
            let gq = filter_cell_rows(&g, dim * dim, |cell| {
                cube.contains(grid.cell(dofs[cell] as usize), dim)
            });
            if gq.nnz() == 0 {
                return Err(Error::InvalidParameter("fixed cube contains no dofs".into()));
            }
            (Some(gq), space.constant_fields())
        }
    };
    let projector = Projector::new(removed);
    if space.ndofs() <= projector.removed_dim() + 1 {
        return Err(Error::InvalidParameter(
            "constraint subspace is trivial: domain too small for a Korn quotient".into(),
        ));
    }
    Ok(KornSetup { space, e, g, gq, projector, constraints })
}

/// Estimate a Korn constant. For p = 2 the value is two-sided up to the
/// eigensolver tolerance 1e-8 (Frobenius convention); otherwise it is the
/// best exact entrywise-max ratio found by projected ascent, a lower
/// bound. `seed_field` warm-starts the p = 2 eigensolve and adds one extra
/// ascent start otherwise; typical seeds are a counterexample field or a
/// prolonged coarse solution. `seed` fixes the random starts.
pub fn estimate_korn(
    domain: &RasterDomain,
    p: f64,
    mode: KornMode,
    q: Option<CellCube>,
    seed_field: Option<&[f64]>,
    seed: u64,
) -> Result<KornSolution> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (1, inf), got {p}")));
    }
    let s = setup(domain, mode, q)?;
    let h = s.space.grid().h;
    let name = match mode {
        KornMode::Standard => ConstantName::KornP,
        KornMode::FixedCube => ConstantName::KornHatP,
    };
    if (p - 2.0).abs() < 1e-14 {
        let a = match &s.gq {
            None => gram(&s.e),
            Some(gq) => gram(&vstack(&s.e, gq)),
        };
        let b = gram(&s.g);
        let sgs = SymGaussSeidel::new(&a);
        let res = smallest_generalized_eig(
            |x, y| a.matvec(x, y),
            |x, y| b.matvec(x, y),
            |r, z| sgs.apply(r, z),
            |x| s.projector.apply(x),
            s.space.ndofs(),
            seed_field.filter(|f| f.len() == s.space.ndofs()).map(|f| f.to_vec()),
            EigOptions { tol: 1e-8, max_outer: 300, inner_cap: 10_000, block: 4, residual_tol: None },
        )?;
        if !(res.lambda > 0.0) {
            return Err(Error::Infeasible { residual: res.lambda });
        }
        let value = res.lambda.powf(-0.5);
        let mut method = String::from("p2-eig-frobenius");
        if !res.converged {
            method.push_str("-unconverged");
        }
        return Ok(KornSolution {
            estimate: ConstantEstimate::new(name, 2.0, value, Bound::TwoSided, method, h),
            field: res.vector,
            lambda: Some(res.lambda),
            converged: res.converged,
            outer_iters: res.outer_iters,
        });
    }
    let (value, field, steps) = ascend_ratio(&s, p, seed_field, seed);
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::Infeasible { residual: value });
    }
    Ok(KornSolution {
        estimate: ConstantEstimate::new(name, p, value, Bound::Lower, "p-ascent-maxnorm", h),
        field,
        lambda: None,
        converged: true,
        outer_iters: steps,
    })
}

/// Exact reported ratio in the entrywise-max convention for the current
/// field: ||Du||_p over (||eps||_p^p + ||Du||_{p,Q}^p)^(1/p).
fn exact_ratio(s: &KornSetup, p: f64, u: &[f64], grad: &mut Vec<f64>) -> f64 {
    let dim = s.space.dim();
    let w = dim * dim;
    let meas = s.space.cell_measure();
    grad.resize(s.g.nrows, 0.0);
    s.g.matvec(u, grad);
    let num = lp_cellwise_max(grad, w, p, meas);
    let eps = symmetric_part(grad, dim);
    let mut den_pow = lp_cellwise_max(&eps, w, p, meas).powf(p);
    if let Some(gq) = &s.gq {
        let mut gu = vec![0.0; gq.nrows];
        gq.matvec(u, &mut gu);
        den_pow += lp_cellwise_max(&gu, w, p, meas).powf(p);
    }
    let den = den_pow.powf(1.0 / p);
    if den <= 0.0 {
        return 0.0;
    }
    num / den
}

/// Projected gradient ascent on the log of a smooth Frobenius surrogate of
/// the p-ratio; tracks the best exact max-convention ratio along the way.
fn ascend_ratio(
    s: &KornSetup,
    p: f64,
    seed_field: Option<&[f64]>,
    seed: u64,
) -> (f64, Vec<f64>, usize) {
    let n = s.space.ndofs();
    let dim = s.space.dim();
    let w = dim * dim;
    let nsym = dim * (dim + 1) / 2;
    let et = s.e.transpose();
    let gt = s.g.transpose();
    let gqt = s.gq.as_ref().map(|m| m.transpose());

    // Surrogate energy and its gradient for one operator: sum over cells of
    // the Frobenius norm of the row block to the p-th power.
    let block_energy = |vals: &[f64], width: usize| -> f64 {
        vals.chunks_exact(width)
            .map(|c| c.iter().map(|&x| x * x).sum::<f64>().powf(p / 2.0))
            .sum()
    };
    let weight_rows = |vals: &mut [f64], width: usize| {
        for chunk in vals.chunks_exact_mut(width) {
            let z2: f64 = chunk.iter().map(|&x| x * x).sum();
            let wgt = if z2 > 1e-300 { z2.powf((p - 2.0) / 2.0) } else { 0.0 };
            for x in chunk.iter_mut() {
                *x *= wgt;
            }
        }
    };

    let mut best_val = 0.0f64;
    let mut best_field = vec![0.0; n];
    let mut total_steps = 0usize;
    let mut grad_buf: Vec<f64> = Vec::new();

    let mut starts: Vec<Vec<f64>> = Vec::new();
    for k in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e3779b97f4a7c15u64.wrapping_mul(k + 1)));
        starts.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    if let Some(f) = seed_field {
        if f.len() == n {
            starts.push(f.to_vec());
        }
    }

    for mut u in starts {
        s.projector.apply(&mut u);
        let nu = dot(&u, &u).sqrt();
        if nu <= 0.0 {
            continue;
        }
        for x in u.iter_mut() {
            *x /= nu;
        }
        let mut gu = vec![0.0; s.g.nrows];
        let mut eu = vec![0.0; s.e.nrows];
        let mut qu = s.gq.as_ref().map(|m| vec![0.0; m.nrows]);
        let objective = |u: &[f64], gu: &mut Vec<f64>, eu: &mut Vec<f64>, qu: &mut Option<Vec<f64>>| -> (f64, f64, f64) {
            s.g.matvec(u, gu);
            s.e.matvec(u, eu);
            let mut den = block_energy(eu, nsym);
            if let (Some(gq), Some(quv)) = (&s.gq, qu.as_mut()) {
                gq.matvec(u, quv);
                den += block_energy(quv, w);
            }
            let num = block_energy(gu, w);
            let j = if num > 0.0 && den > 0.0 { (num.ln() - den.ln()) / p } else { f64::NEG_INFINITY };
            (j, num, den)
        };
        let (mut j, mut num, mut den) = objective(&u, &mut gu, &mut eu, &mut qu);
        if !j.is_finite() {
            continue;
        }
        let r0 = exact_ratio(s, p, &u, &mut grad_buf);
        if r0 > best_val {
            best_val = r0;
            best_field.copy_from_slice(&u);
        }
        let mut step = 0.1f64;
        let mut dir = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        for _ in 0..150 {
            total_steps += 1;
            // dir = d/du [log num - log den] / p
            weight_rows(&mut gu, w);
            gt.matvec(&gu, &mut dir);
            for x in dir.iter_mut() {
                *x /= num;
            }
            weight_rows(&mut eu, nsym);
            et.matvec(&eu, &mut tmp);
            for (d, t) in dir.iter_mut().zip(&tmp) {
                *d -= t / den;
            }
            if let (Some(gqt), Some(quv)) = (&gqt, qu.as_mut()) {
                weight_rows(quv, w);
                gqt.matvec(quv, &mut tmp);
                for (d, t) in dir.iter_mut().zip(&tmp) {
                    *d -= t / den;
                }
            }
            s.projector.apply(&mut dir);
            let dn = dot(&dir, &dir).sqrt();
            if dn < 1e-14 {
                break;
            }
            let mut advanced = false;
            for _ in 0..20 {
                let mut cand = u.clone();
                for i in 0..n {
                    cand[i] += step / dn * dir[i];
                }
                s.projector.apply(&mut cand);
                let cn = dot(&cand, &cand).sqrt();
                if cn <= 0.0 {
                    step *= 0.5;
                    continue;
                }
                for x in cand.iter_mut() {
                    *x /= cn;
                }
                let (jc, nc, dc) = objective(&cand, &mut gu, &mut eu, &mut qu);
                if jc.is_finite() && jc > j {
                    u = cand;
                    j = jc;
                    num = nc;
                    den = dc;
                    step *= 1.3;
                    advanced = true;
                    break;
                }
                step *= 0.5;
            }
            if !advanced {
                // Refresh operator images for the unchanged u (the line
                // search clobbered the buffers) and stop this start.
                let _ = objective(&u, &mut gu, &mut eu, &mut qu);
                break;
            }
            let r = exact_ratio(s, p, &u, &mut grad_buf);
            if r > best_val {
                best_val = r;
                best_field.copy_from_slice(&u);
            }
        }
    }
    (best_val, best_field, total_steps)
}

/// The quotient form of the standard p = 2 constant: minimize over constant
/// antisymmetric shifts instead of constraining the mean rotation. Equals
/// the constrained eigenvalue exactly; exposed for the equivalence test.
pub fn korn_quotient_value(domain: &RasterDomain) -> Result<f64> {
    let s = setup(domain, KornMode::Standard, None)?;
    let a = gram(&s.e);
    let b = gram(&s.g);
    let n = s.space.ndofs();
    let ncells = s.space.n() as f64;
    let constraints = s.constraints.clone();
    let mut removed = s.space.constant_fields();
    removed.extend(s.space.rotation_fields());
    let projector = Projector::new(removed);
    let sgs = SymGaussSeidel::new(&a);
    let apply_b = |x: &[f64], y: &mut [f64]| {
        b.matvec(x, y);
        for g in &constraints {
            let c = dot(g, x) * 2.0 / ncells;
            for i in 0..n {
                y[i] -= c * g[i];
            }
        }
    };
    let res = smallest_generalized_eig(
        |x, y| a.matvec(x, y),
        apply_b,
        |r, z| sgs.apply(r, z),
        |x| projector.apply(x),
        n,
        None,
        EigOptions { tol: 1e-8, max_outer: 300, inner_cap: 10_000, block: 4, residual_tol: None },
    )?;
    if !(res.lambda > 0.0) {
        return Err(Error::Infeasible { residual: res.lambda });
    }
    Ok(res.lambda.powf(-0.5))
}

/// The cutoff rotation supported on a separating-ball end, its rigid
/// correction, and their sum, which has mean antisymmetric part exactly
/// zero. Fields live on the full space of `space`.
#[derive(Debug, Clone)]
pub struct CounterexampleField {
    pub space: FieldSpace,
    pub center: [f64; 3],
    pub radius: f64,
    /// Scalar cutoff per dof: 0 off the end, 1 far from the ball, the
    /// clamped radial distance in between.
    pub phi: Vec<f64>,
    /// Cutoff rotation (z2-x2, x1-z1) * phi, mean rotation positive.
    pub v: Vec<f64>,
    /// Global rigid correction (c*x2, -c*x1), cancelling the mean rotation
    /// of `v` exactly.
    pub w: Vec<f64>,
    /// v + w.
    pub u: Vec<f64>,
    /// Coefficient of the rigid correction.
    pub c_tilde: f64,
    /// Whether the mean rotation of v came out positive, as the
    /// construction expects.
    pub sign_positive: bool,
    /// Per-dof membership in the ball end.
    pub in_end: Vec<bool>,
    pub end_measure: f64,
    pub ball: BallEnd,
}

impl CounterexampleField {
    /// The measure-ratio lower bound is only a certificate when the rigid
    /// correction is small enough that |Du| >= 2/3 survives on the far end.
    pub fn lower_bound_certified(&self) -> bool {
        self.sign_positive && self.c_tilde.abs() <= 1.0 / 3.0
    }
}

/// Build the counterexample field for one separating ball and its end
/// cells (grid indices). Preconditions are the non-trivial case: the end
/// outweighs the ball by 4^n and sticks out of the 4r ball.
pub fn build_counterexample_field(
    domain: &RasterDomain,
    ball: &BallEnd,
    end_cells: &[usize],
) -> Result<CounterexampleField> {
    if domain.dim() != 2 {
        return Err(Error::Unsupported(
            "counterexample fields are built in the plane".into(),
        ));
    }
    if ball.degenerate {
        return Err(Error::InvalidParameter("degenerate ball: base point removed".into()));
    }
    if end_cells.is_empty() {
        return Err(Error::InvalidParameter("empty end: nothing to build on".into()));
    }
    let space = FieldSpace::full(domain);
    let g = space.grid().clone();
    let z = ball.center;
    let r = ball.radius;
    let end_measure = crate::domain::measure(end_cells.len(), g.h, g.dim);
    let threshold = 4f64.powi(g.dim as i32) * ball.ball_measure;
    if end_measure <= threshold {
        return Err(Error::InvalidParameter(format!(
            "trivial separating-ball case: end measure {end_measure:.6} within 4^n x ball {threshold:.6}; use the trivial bound",
        )));
    }
    let outside_4r = end_cells.iter().any(|&idx| {
        crate::grid::dist(g.center(g.cell(idx)), z, g.dim) > 4.0 * r
    });
    if !outside_4r {
        return Err(Error::InvalidParameter(
            "trivial separating-ball case: end contained in the 4r ball; use the trivial bound".into(),
        ));
    }

    let n = space.n();
    let mut in_end = vec![false; n];
    for &idx in end_cells {
        if let Some(d) = space.dof_of(idx) {
            in_end[d] = true;
        }
    }
    let mut phi = vec![0.0f64; n];
    let mut v = vec![0.0f64; 2 * n];
    for (dof, &idx) in space.dof_cells().iter().enumerate() {
        if !in_end[dof] {
            continue;
        }
        let c = g.center(g.cell(idx as usize));
        let d = crate::grid::dist(c, z, 2);
        let f = ((d - r) / r).clamp(0.0, 1.0);
        phi[dof] = f;
        v[dof] = (z[1] - c[1]) * f;
        v[n + dof] = (c[0] - z[0]) * f;
    }
    let grad_v = space.gradient_entries(&v, DiffRule::OneSided);
    let kappa_v = kappa12_sum(&grad_v, 2);
    let c_tilde = kappa_v / n as f64;
    // The opposite rigid rotation with mean c_tilde: linear fields
    // differentiate exactly, so the cancellation below is machine-exact.
    let mut w = vec![0.0f64; 2 * n];
    let mut u = vec![0.0f64; 2 * n];
    for (dof, &idx) in space.dof_cells().iter().enumerate() {
        let c = g.center(g.cell(idx as usize));
        w[dof] = c_tilde * c[1];
        w[n + dof] = -c_tilde * c[0];
        u[dof] = v[dof] + w[dof];
        u[n + dof] = v[n + dof] + w[n + dof];
    }
    Ok(CounterexampleField {
        space,
        center: z,
        radius: r,
        phi,
        v,
        w,
        u,
        c_tilde,
        sign_positive: kappa_v > 0.0,
        in_end,
        end_measure,
        ball: ball.clone(),
    })
}

/// Numeric checks of the construction's pointwise invariants, in the
/// entrywise-max convention.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CounterexampleCheck {
    /// Max |Dv| anywhere, and the bound 3 + 5h/r it must respect.
    pub max_dv: f64,
    pub dv_bound: f64,
    /// Max |Dv| on cells not in the end and with no neighbor in the end;
    /// the one-cell halo unavoidably sees the cutoff through its stencil.
    pub max_dv_off_end: f64,
    /// Max |Dv - J| on end cells at distance >= 2r + 2h from the center,
    /// where J is the fixed rotation matrix.
    pub max_dv_minus_rotation_far: f64,
    /// Mean rotation of u, weighted by cell measure; zero by construction.
    pub kappa_sum_weighted: f64,
    pub omega_measure: f64,
}

pub fn check_counterexample(
    domain: &RasterDomain,
    field: &CounterexampleField,
) -> CounterexampleCheck {
    let space = &field.space;
    let g = space.grid().clone();
    let n = space.n();
    let h = g.h;
    let grad_v = space.gradient_entries(&field.v, DiffRule::OneSided);
    let grad_u = space.gradient_entries(&field.u, DiffRule::OneSided);
    let mut max_dv = 0.0f64;
    let mut max_off = 0.0f64;
    let mut max_far = 0.0f64;
    let mut nbrs = Vec::with_capacity(8);
    for dof in 0..n {
        let chunk = &grad_v[dof * 4..dof * 4 + 4];
        let m = chunk.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        max_dv = max_dv.max(m);
        let idx = space.dof_cells()[dof] as usize;
        let cell = g.cell(idx);
        if !field.in_end[dof] {
            g.all_neighbors(cell, &mut nbrs);
            let touches = nbrs.iter().any(|&c| {
                space.dof_of(g.idx(c)).map(|d| field.in_end[d]).unwrap_or(false)
            });
            if !touches {
                max_off = max_off.max(m);
            }
        } else {
            let d = crate::grid::dist(g.center(cell), field.center, 2);
            if d >= 2.0 * field.radius + 2.0 * h {
                // J has entries (1,2) = -1 and (2,1) = 1.
                let dev = (chunk[0].abs())
                    .max((chunk[1] + 1.0).abs())
                    .max((chunk[2] - 1.0).abs())
                    .max(chunk[3].abs());
                max_far = max_far.max(dev);
            }
        }
    }
    let meas = space.cell_measure();
    CounterexampleCheck {
        max_dv,
        dv_bound: 3.0 + 5.0 * h / field.radius,
        max_dv_off_end: max_off,
        max_dv_minus_rotation_far: max_far,
        kappa_sum_weighted: kappa12_sum(&grad_u, 2) * meas,
        omega_measure: domain.measure(),
    }
}

/// The measure-ratio lower bound rearranged from the counterexample chain.
/// Exposed separately so the algebra is testable on its own.
pub fn lower_bound_value(end_outside_2b: f64, ball2_measure: f64, p: f64) -> f64 {
    ((2.0f64 / 3.0).powf(p) * end_outside_2b / (3.0f64.powf(p) * ball2_measure)).powf(1.0 / p)
}

/// Certified lower bound on the Korn constant from a counterexample field:
/// value = ((2/3)^p |E∖2B| / (3^p |2B|))^(1/p). The end part is cell
/// measure, the doubled ball analytic, matching the end-measure criterion.
pub fn korn_lower_bound_from_end(field: &CounterexampleField, p: f64) -> Result<ConstantEstimate> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (1, inf), got {p}")));
    }
    let space = &field.space;
    let g = space.grid().clone();
    let h = g.h;
    let mut outside = 0usize;
    for (dof, &idx) in space.dof_cells().iter().enumerate() {
        if field.in_end[dof]
            && crate::grid::dist(g.center(g.cell(idx as usize)), field.center, g.dim)
                > 2.0 * field.radius
        {
            outside += 1;
        }
    }
    let me = crate::domain::measure(outside, h, g.dim);
    let mb = if g.dim == 2 {
        std::f64::consts::PI * (2.0 * field.radius).powi(2)
    } else {
        4.0 / 3.0 * std::f64::consts::PI * (2.0 * field.radius).powi(3)
    };
    let value = lower_bound_value(me, mb, p);
    let method = if field.lower_bound_certified() {
        "end-measure-formula".to_string()
    } else {
        "end-measure-formula (uncertified rotation correction)".to_string()
    };
    Ok(ConstantEstimate::new(ConstantName::KornLowerFromEnd, p, value, Bound::Lower, method, h))
}
